//! Frontend for the accepted C subset: parsing, CFG construction,
//! inlining, and value/descriptor resolution.

pub mod ast;
pub mod cfg;
pub mod inline;
pub mod lexer;
pub mod parser;
pub mod resolve;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Alias, CallEvent, ThadSet};
use ast::Loc;
use cfg::{Cfg, FunctionCfg, NodeId, Rv, UnitInfo};
use resolve::{Resolution, TokenFlow};

pub use inline::DEFAULT_INLINE_DEPTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontendErrorKind {
    SyntaxError,
    UnsupportedConstruct,
    MissingEntry,
    RecursionDetected,
    DepthLimitExceeded,
    InvalidDirective,
}

impl fmt::Display for FrontendErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrontendErrorKind::SyntaxError => "syntax error",
            FrontendErrorKind::UnsupportedConstruct => "unsupported construct",
            FrontendErrorKind::MissingEntry => "missing entry function",
            FrontendErrorKind::RecursionDetected => "recursion detected",
            FrontendErrorKind::DepthLimitExceeded => "inline depth limit exceeded",
            FrontendErrorKind::InvalidDirective => "invalid directive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{}:{}: {kind}: {message}", loc.line, loc.col)]
pub struct FrontendError {
    pub kind: FrontendErrorKind,
    pub loc: Loc,
    pub message: String,
}

impl FrontendError {
    /// `file:line:col: error: message`.
    pub fn render(&self, file: &str) -> String {
        format!(
            "{file}:{}:{}: error: {}: {}",
            self.loc.line, self.loc.col, self.kind, self.message
        )
    }
}

/// Program-local specification adjustments written as `// thadc: ...`
/// line comments: `select <id>...` restricts checking to the THADs
/// relevant for the program, `alias <CONST> satisfies <CONST>` adds an
/// alias.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Directives {
    pub select: Option<Vec<String>>,
    pub aliases: Vec<Alias>,
}

pub const DIRECTIVE_PREFIX: &str = "// thadc:";

pub fn parse_directives(src: &str) -> Result<Directives, FrontendError> {
    let mut d = Directives::default();
    for (i, line) in src.lines().enumerate() {
        let trimmed = line.trim_start();
        let Some(rest) = trimmed.strip_prefix(DIRECTIVE_PREFIX) else {
            continue;
        };
        let loc = Loc {
            line: i + 1,
            col: line.len() - trimmed.len() + 1,
        };
        let words: Vec<&str> = rest.split_whitespace().collect();
        let bad = |msg: &str| FrontendError {
            kind: FrontendErrorKind::InvalidDirective,
            loc,
            message: msg.to_string(),
        };
        match words.as_slice() {
            ["select", ids @ ..] if !ids.is_empty() => d
                .select
                .get_or_insert_with(Vec::new)
                .extend(ids.iter().map(|s| s.to_string())),
            ["alias", c, "satisfies", s] => d.aliases.push(Alias {
                constant: c.to_string(),
                satisfies: s.to_string(),
            }),
            _ => {
                return Err(bad(
                    "expected `select <id>...` or `alias <CONST> satisfies <CONST>`",
                ))
            }
        }
    }
    Ok(d)
}

impl Directives {
    /// Apply to a specification: restrict and extend it.
    pub fn apply(&self, set: &ThadSet) -> Result<ThadSet, String> {
        let mut out = match &self.select {
            Some(ids) => {
                if let Some(missing) = ids.iter().find(|id| set.thad(id).is_none()) {
                    return Err(format!(
                        "selected THAD `{missing}` is not in the specification"
                    ));
                }
                set.select(ids)
            }
            None => set.clone(),
        };
        for a in &self.aliases {
            for c in [&a.constant, &a.satisfies] {
                if !out.constants.contains_key(c) {
                    return Err(format!("alias names unknown constant `{c}`"));
                }
            }
            if !out.aliases.contains(a) {
                out.aliases.push(a.clone());
            }
        }
        Ok(out)
    }
}

/// Parsed program: one CFG per function plus global initialisers.
#[derive(Debug, Clone, Serialize)]
pub struct ProgramModel {
    pub file: String,
    pub entry: String,
    pub functions: BTreeMap<String, FunctionCfg>,
    pub globals: Vec<(String, Rv, Loc)>,
    pub directives: Directives,
}

pub const DEFAULT_ENTRY: &str = "main";

/// Parse and lower a program whose entry function is `main`.
pub fn parse_program(src: &str, file: &str) -> Result<ProgramModel, FrontendError> {
    parse_program_with_entry(src, file, DEFAULT_ENTRY)
}

pub fn parse_program_with_entry(
    src: &str,
    file: &str,
    entry: &str,
) -> Result<ProgramModel, FrontendError> {
    let directives = parse_directives(src)?;
    let unit = parser::parse_unit(src)?;
    let info = UnitInfo::new(&unit);
    let mut functions = BTreeMap::new();
    for f in &unit.functions {
        if functions.contains_key(&f.name) {
            return Err(FrontendError {
                kind: FrontendErrorKind::SyntaxError,
                loc: f.loc,
                message: format!("function `{}` is defined twice", f.name),
            });
        }
        functions.insert(f.name.clone(), cfg::lower_function(&info, f)?);
    }
    let mut globals = Vec::new();
    for g in &unit.globals {
        globals.push((g.name.clone(), cfg::lower_global_init(&info, g)?, g.loc));
    }
    if !functions.contains_key(entry) {
        return Err(FrontendError {
            kind: FrontendErrorKind::MissingEntry,
            loc: Loc { line: 1, col: 1 },
            message: format!("entry function `{entry}` is not defined"),
        });
    }
    Ok(ProgramModel {
        file: file.to_string(),
        entry: entry.to_string(),
        functions,
        globals,
        directives,
    })
}

impl ProgramModel {
    /// The entry function's CFG with every user call inlined.
    pub fn inline(&self, depth_limit: usize) -> Result<Cfg, FrontendError> {
        inline::inline_program(&self.functions, &self.globals, &self.entry, depth_limit)
    }
}

/// An inlined program with resolved HAL call events.
#[derive(Debug, Clone)]
pub struct ResolvedProgram {
    pub file: String,
    pub cfg: Cfg,
    pub res: Resolution,
}

impl ResolvedProgram {
    pub fn new(file: &str, cfg: Cfg, set: &ThadSet) -> Self {
        let res = resolve::resolve(&cfg, set);
        ResolvedProgram {
            file: file.to_string(),
            cfg,
            res,
        }
    }

    pub fn event(&self, node: NodeId) -> Option<&CallEvent> {
        self.res.events[node].as_ref()
    }

    pub fn token_flow(&self) -> TokenFlow {
        resolve::token_flow(&self.cfg, &self.res)
    }

    /// Reachable HAL call nodes with their events, in node order.
    pub fn hal_calls(&self) -> impl Iterator<Item = (NodeId, &CallEvent)> + '_ {
        self.res
            .events
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|e| (i, e)))
    }
}

/// Full pipeline: parse, inline from the entry, resolve against `set`.
pub fn load(
    src: &str,
    file: &str,
    set: &ThadSet,
    depth_limit: usize,
) -> Result<ResolvedProgram, FrontendError> {
    let model = parse_program(src, file)?;
    let cfg = model.inline(depth_limit)?;
    Ok(ResolvedProgram::new(file, cfg, set))
}
