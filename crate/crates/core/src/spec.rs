//! The line-oriented THAD specification language and constants files.
//!
//! ```text
//! const MSG
//! routine open(path, oflag) returns descriptor
//! routine ioctl(fd:descriptor, request:discriminator)
//! dep d3: ioctl[request=MSG] requires open
//! bind d3: open.return -> ioctl.fd
//! alias WR_MODE satisfies WR_MODE32
//! ```
//!
//! Declarations may appear in any order; `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::model::{
    Alias, BindingSource, Constraint, DescriptorBinding, ModelError, Param, ParamRole,
    RoutinePattern, RoutineSpec, Thad, ThadSet,
};

pub const SPIDEV_THAD: &str = include_str!("../../../specs/spidev.thad");
pub const SPIDEV_FD_THAD: &str = include_str!("../../../specs/spidev-fd.thad");
pub const SPIDEV_LINUX_CONSTS: &str = include_str!("../../../specs/spidev-linux.consts");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpecErrorKind {
    SyntaxError,
    DuplicateId,
    UnknownRoutine,
    UnknownConstant,
    ConflictingConstant,
    InvalidDeclaration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub severity: Severity,
    pub kind: SpecErrorKind,
    pub message: String,
}

impl Diagnostic {
    fn error(line: usize, column: usize, kind: SpecErrorKind, message: impl Into<String>) -> Self {
        Diagnostic {
            line,
            column,
            severity: Severity::Error,
            kind,
            message: message.into(),
        }
    }

    /// `file:line:col: severity: message`
    pub fn render(&self, file: &str) -> String {
        format!(
            "{file}:{}:{}: {}: {}",
            self.line, self.column, self.severity, self.message
        )
    }
}

/// Source text together with its parse outcome.
#[derive(Debug, Clone)]
pub struct SpecDocument {
    pub source: String,
    pub parsed: Option<ThadSet>,
    pub diagnostics: Vec<Diagnostic>,
}

impl SpecDocument {
    pub fn parse(source: impl Into<String>) -> Self {
        let source = source.into();
        match parse_thad_spec(&source) {
            Ok(set) => SpecDocument {
                source,
                parsed: Some(set),
                diagnostics: Vec::new(),
            },
            Err(diagnostics) => SpecDocument {
                source,
                parsed: None,
                diagnostics,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Int(i64),
    Punct(&'static str),
}

#[derive(Debug, Clone)]
struct Lexeme<'a> {
    tok: Tok<'a>,
    col: usize,
}

fn lex_line(line: &str, lineno: usize) -> Result<Vec<Lexeme<'_>>, Diagnostic> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let col = i + 1;
        if c == b'#' {
            break;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'_' || c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            out.push(Lexeme {
                tok: Tok::Word(&line[start..i]),
                col,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = &line[start..i];
            let value = parse_int(text).ok_or_else(|| {
                Diagnostic::error(
                    lineno,
                    col,
                    SpecErrorKind::SyntaxError,
                    format!("invalid integer `{text}`"),
                )
            })?;
            out.push(Lexeme {
                tok: Tok::Int(value),
                col,
            });
            continue;
        }
        let punct = if line[i..].starts_with("->") {
            "->"
        } else {
            match c {
                b'(' => "(",
                b')' => ")",
                b'[' => "[",
                b']' => "]",
                b',' => ",",
                b':' => ":",
                b'=' => "=",
                b'.' => ".",
                _ => {
                    let ch = line[i..].chars().next().unwrap_or('?');
                    return Err(Diagnostic::error(
                        lineno,
                        col,
                        SpecErrorKind::SyntaxError,
                        format!("unexpected character `{ch}`"),
                    ));
                }
            }
        };
        i += punct.len();
        out.push(Lexeme {
            tok: Tok::Punct(punct),
            col,
        });
    }
    Ok(out)
}

/// Decimal or `0x` hexadecimal, optionally negative.
pub fn parse_int(text: &str) -> Option<i64> {
    let (neg, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let value = if let Some(hex) = digits
        .strip_prefix("0x")
        .or_else(|| digits.strip_prefix("0X"))
    {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        digits.parse::<i64>().ok()?
    };
    Some(if neg { -value } else { value })
}

struct Cursor<'a> {
    toks: Vec<Lexeme<'a>>,
    pos: usize,
    line: usize,
    eol_col: usize,
}

impl<'a> Cursor<'a> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.eol_col, |l| l.col)
    }

    fn err(&self, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::error(self.line, self.col(), SpecErrorKind::SyntaxError, msg)
    }

    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn word(&mut self, what: &str) -> Result<(&'a str, usize), Diagnostic> {
        match self.toks.get(self.pos) {
            Some(Lexeme {
                tok: Tok::Word(w),
                col,
            }) => {
                let out = (*w, *col);
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), Diagnostic> {
        match self.peek() {
            Some(Tok::Word(w)) if *w == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{kw}`"))),
        }
    }

    fn punct(&mut self, p: &str) -> Result<(), Diagnostic> {
        match self.peek() {
            Some(Tok::Punct(q)) if *q == p => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{p}`"))),
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn end(&self) -> Result<(), Diagnostic> {
        if self.pos < self.toks.len() {
            Err(self.err("unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

struct PatternAt {
    pattern: RoutinePattern,
    routine_at: Pos,
    constant_at: Pos,
}

enum Item {
    Const(String, Option<i64>, Pos),
    Routine(RoutineSpec, Pos),
    Dep {
        id: String,
        id_at: Pos,
        dependent: PatternAt,
        dependency: PatternAt,
    },
    Bind {
        id: String,
        id_at: Pos,
        source_routine: String,
        source: BindingSource,
        target_routine: String,
        target_param: String,
    },
    Alias(Alias, Pos),
}

fn parse_pattern(cur: &mut Cursor<'_>) -> Result<PatternAt, Diagnostic> {
    let (routine, rcol) = cur.word("routine name")?;
    let routine_at = Pos {
        line: cur.line,
        col: rcol,
    };
    if !cur.eat_punct("[") {
        return Ok(PatternAt {
            pattern: RoutinePattern::plain(routine),
            routine_at,
            constant_at: routine_at,
        });
    }
    let (param, _) = cur.word("parameter name")?;
    cur.punct("=")?;
    let (constant, ccol) = cur.word("constant name")?;
    cur.punct("]")?;
    Ok(PatternAt {
        pattern: RoutinePattern::constrained(routine, param, constant),
        routine_at,
        constant_at: Pos {
            line: cur.line,
            col: ccol,
        },
    })
}

fn parse_line(cur: &mut Cursor<'_>) -> Result<Option<Item>, Diagnostic> {
    let Some(_) = cur.peek() else {
        return Ok(None);
    };
    let (kw, kcol) = cur.word("a declaration keyword")?;
    let at = Pos {
        line: cur.line,
        col: kcol,
    };
    let item = match kw {
        "const" => {
            let (name, col) = cur.word("constant name")?;
            let value = if cur.eat_punct("=") {
                match cur.peek() {
                    Some(Tok::Int(v)) => {
                        let v = *v;
                        cur.pos += 1;
                        Some(v)
                    }
                    _ => return Err(cur.err("expected integer value")),
                }
            } else {
                None
            };
            Item::Const(
                name.to_string(),
                value,
                Pos {
                    line: cur.line,
                    col,
                },
            )
        }
        "routine" => {
            let (name, _) = cur.word("routine name")?;
            cur.punct("(")?;
            let mut params = Vec::new();
            if !cur.eat_punct(")") {
                loop {
                    let (pname, _) = cur.word("parameter name")?;
                    let role = if cur.eat_punct(":") {
                        match cur.word("parameter role")?.0 {
                            "descriptor" => ParamRole::Descriptor,
                            "discriminator" => ParamRole::Discriminator,
                            "opaque" => ParamRole::Opaque,
                            other => {
                                cur.pos -= 1;
                                return Err(cur.err(format!("unknown parameter role `{other}`")));
                            }
                        }
                    } else {
                        ParamRole::Opaque
                    };
                    params.push(Param::new(pname, role));
                    if cur.eat_punct(")") {
                        break;
                    }
                    cur.punct(",")?;
                }
            }
            let returns_descriptor = if matches!(cur.peek(), Some(Tok::Word("returns"))) {
                cur.pos += 1;
                cur.keyword("descriptor")?;
                true
            } else {
                false
            };
            let spec = RoutineSpec {
                name: name.to_string(),
                params,
                returns_descriptor,
            };
            Item::Routine(spec, at)
        }
        "dep" => {
            let (id, icol) = cur.word("dependency id")?;
            cur.punct(":")?;
            let dependent = parse_pattern(cur)?;
            cur.keyword("requires")?;
            let dependency = parse_pattern(cur)?;
            Item::Dep {
                id: id.to_string(),
                id_at: Pos {
                    line: cur.line,
                    col: icol,
                },
                dependent,
                dependency,
            }
        }
        "bind" => {
            let (id, icol) = cur.word("dependency id")?;
            cur.punct(":")?;
            let (source_routine, _) = cur.word("routine name")?;
            cur.punct(".")?;
            let (src, _) = cur.word("`return` or parameter name")?;
            let source = if src == "return" {
                BindingSource::Return
            } else {
                BindingSource::Param(src.to_string())
            };
            cur.punct("->")?;
            let (target_routine, _) = cur.word("routine name")?;
            cur.punct(".")?;
            let (target_param, _) = cur.word("parameter name")?;
            Item::Bind {
                id: id.to_string(),
                id_at: Pos {
                    line: cur.line,
                    col: icol,
                },
                source_routine: source_routine.to_string(),
                source,
                target_routine: target_routine.to_string(),
                target_param: target_param.to_string(),
            }
        }
        "alias" => {
            let (constant, _) = cur.word("constant name")?;
            cur.keyword("satisfies")?;
            let (satisfies, _) = cur.word("constant name")?;
            Item::Alias(
                Alias {
                    constant: constant.to_string(),
                    satisfies: satisfies.to_string(),
                },
                at,
            )
        }
        other => {
            cur.pos -= 1;
            return Err(cur.err(format!("unknown declaration `{other}`")));
        }
    };
    cur.end()?;
    Ok(Some(item))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
}

fn model_diag(at: Pos, e: &ModelError) -> Diagnostic {
    let kind = match e {
        ModelError::DuplicateId(_) => SpecErrorKind::DuplicateId,
        ModelError::UnknownRoutine(_) => SpecErrorKind::UnknownRoutine,
        ModelError::UnknownConstant(_) => SpecErrorKind::UnknownConstant,
        _ => SpecErrorKind::InvalidDeclaration,
    };
    Diagnostic::error(at.line, at.col, kind, e.to_string())
}

/// Parse a `.thad` document. All problems are reported, in source order.
pub fn parse_thad_spec(text: &str) -> Result<ThadSet, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut items = Vec::new();
    for (lineno, line) in lines(text) {
        let toks = match lex_line(line, lineno) {
            Ok(t) => t,
            Err(d) => {
                diags.push(d);
                continue;
            }
        };
        let mut cur = Cursor {
            toks,
            pos: 0,
            line: lineno,
            eol_col: line.len() + 1,
        };
        match parse_line(&mut cur) {
            Ok(Some(item)) => items.push(item),
            Ok(None) => {}
            Err(d) => diags.push(d),
        }
    }

    let mut set = ThadSet::default();
    for item in &items {
        match item {
            Item::Const(name, value, at) => {
                let entry = set.constants.entry(name.clone()).or_insert(None);
                match (*entry, value) {
                    (Some(a), Some(b)) if a != *b => diags.push(Diagnostic::error(
                        at.line,
                        at.col,
                        SpecErrorKind::ConflictingConstant,
                        format!("constant `{name}` redeclared with a different value"),
                    )),
                    (None, Some(_)) => *entry = *value,
                    _ => {}
                }
            }
            Item::Routine(spec, at) => {
                if let Err(e) = spec.validate() {
                    diags.push(model_diag(*at, &e));
                } else if set.routine(&spec.name).is_some() {
                    diags.push(model_diag(
                        *at,
                        &ModelError::DuplicateRoutine(spec.name.clone()),
                    ));
                } else {
                    set.routines.push(spec.clone());
                }
            }
            _ => {}
        }
    }
    for item in &items {
        if let Item::Alias(alias, at) = item {
            let mut ok = true;
            for c in [&alias.constant, &alias.satisfies] {
                if !set.constants.contains_key(c) {
                    diags.push(model_diag(*at, &ModelError::UnknownConstant(c.clone())));
                    ok = false;
                }
            }
            if ok && !set.aliases.contains(alias) {
                set.aliases.push(alias.clone());
            }
        }
    }
    for item in &items {
        let Item::Dep {
            id,
            id_at,
            dependent,
            dependency,
        } = item
        else {
            continue;
        };
        if set.thad(id).is_some() {
            diags.push(model_diag(*id_at, &ModelError::DuplicateId(id.clone())));
            continue;
        }
        let mut ok = true;
        for p in [dependent, dependency] {
            if let Err(d) = check_pattern(&set, p) {
                diags.push(d);
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        if dependent.pattern == dependency.pattern {
            diags.push(model_diag(*id_at, &ModelError::SelfDependency(id.clone())));
            continue;
        }
        set.thads.push(Thad::new(
            id.clone(),
            dependent.pattern.clone(),
            dependency.pattern.clone(),
        ));
    }
    for item in &items {
        let Item::Bind {
            id,
            id_at,
            source_routine,
            source,
            target_routine,
            target_param,
        } = item
        else {
            continue;
        };
        let Some(idx) = set.thads.iter().position(|t| &t.id == id) else {
            diags.push(Diagnostic::error(
                id_at.line,
                id_at.col,
                SpecErrorKind::InvalidDeclaration,
                format!("binding for undeclared dependency `{id}`"),
            ));
            continue;
        };
        let thad = &set.thads[idx];
        if thad.binding.is_some() {
            diags.push(Diagnostic::error(
                id_at.line,
                id_at.col,
                SpecErrorKind::InvalidDeclaration,
                format!("dependency `{id}` is bound twice"),
            ));
            continue;
        }
        let mismatch = if *source_routine != thad.dependency.routine {
            Some((thad.dependency.routine.clone(), source_routine.clone()))
        } else if *target_routine != thad.dependent.routine {
            Some((thad.dependent.routine.clone(), target_routine.clone()))
        } else {
            None
        };
        if let Some((expected, found)) = mismatch {
            diags.push(model_diag(
                *id_at,
                &ModelError::BindingMismatch {
                    id: id.clone(),
                    expected,
                    found,
                },
            ));
            continue;
        }
        let bound = thad.clone().with_binding(DescriptorBinding {
            source: source.clone(),
            target_param: target_param.clone(),
        });
        let mut probe = set.clone();
        probe.thads = vec![bound.clone()];
        match probe.validate() {
            Ok(()) => set.thads[idx] = bound,
            Err(e) => diags.push(model_diag(*id_at, &e)),
        }
    }

    if diags.is_empty() {
        debug_assert!(set.validate().is_ok());
        Ok(set)
    } else {
        diags.sort_by_key(|d| (d.line, d.column));
        Err(diags)
    }
}

fn check_pattern(set: &ThadSet, p: &PatternAt) -> Result<(), Diagnostic> {
    let Some(routine) = set.routine(&p.pattern.routine) else {
        return Err(model_diag(
            p.routine_at,
            &ModelError::UnknownRoutine(p.pattern.routine.clone()),
        ));
    };
    if let Some(Constraint { param, constant }) = &p.pattern.constraint {
        match routine.param(param) {
            Some((_, prm)) if prm.role == ParamRole::Discriminator => {}
            Some(_) => {
                return Err(model_diag(
                    p.routine_at,
                    &ModelError::WrongRole {
                        routine: routine.name.clone(),
                        param: param.clone(),
                        expected: ParamRole::Discriminator,
                    },
                ))
            }
            None => {
                return Err(model_diag(
                    p.routine_at,
                    &ModelError::UnknownParam {
                        routine: routine.name.clone(),
                        param: param.clone(),
                    },
                ))
            }
        }
        if !set.constants.contains_key(constant) {
            return Err(model_diag(
                p.constant_at,
                &ModelError::UnknownConstant(constant.clone()),
            ));
        }
    }
    Ok(())
}

/// Parse a constants file: `NAME = INTEGER` per line.
pub fn parse_constants(text: &str) -> Result<BTreeMap<String, i64>, Vec<Diagnostic>> {
    let mut out: BTreeMap<String, i64> = BTreeMap::new();
    let mut diags = Vec::new();
    for (lineno, line) in lines(text) {
        let toks = match lex_line(line, lineno) {
            Ok(t) => t,
            Err(d) => {
                diags.push(d);
                continue;
            }
        };
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks,
            pos: 0,
            line: lineno,
            eol_col: line.len() + 1,
        };
        let parsed = (|| {
            let (name, col) = cur.word("constant name")?;
            cur.punct("=")?;
            let value = match cur.peek() {
                Some(Tok::Int(v)) => *v,
                _ => return Err(cur.err("expected integer value")),
            };
            cur.pos += 1;
            cur.end()?;
            Ok((name.to_string(), value, col))
        })();
        match parsed {
            Ok((name, value, col)) => match out.get(&name) {
                Some(prev) if *prev != value => diags.push(Diagnostic::error(
                    lineno,
                    col,
                    SpecErrorKind::ConflictingConstant,
                    format!("constant `{name}` is {prev} earlier but {value} here"),
                )),
                _ => {
                    out.insert(name, value);
                }
            },
            Err(d) => diags.push(d),
        }
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

fn pattern_text(p: &RoutinePattern) -> String {
    p.to_string()
}

/// Canonical text for a set. Parsing the result yields an equal set.
pub fn serialize_spec(set: &ThadSet) -> String {
    let mut out = String::new();
    for (name, value) in &set.constants {
        match value {
            Some(v) => writeln!(out, "const {name} = {v}"),
            None => writeln!(out, "const {name}"),
        }
        .unwrap();
    }
    for r in &set.routines {
        let params: Vec<String> = r
            .params
            .iter()
            .map(|p| match p.role {
                ParamRole::Opaque => p.name.clone(),
                role => format!("{}:{role}", p.name),
            })
            .collect();
        write!(out, "routine {}({})", r.name, params.join(", ")).unwrap();
        if r.returns_descriptor {
            out.push_str(" returns descriptor");
        }
        out.push('\n');
    }
    for a in &set.aliases {
        writeln!(out, "alias {} satisfies {}", a.constant, a.satisfies).unwrap();
    }
    for t in &set.thads {
        writeln!(
            out,
            "dep {}: {} requires {}",
            t.id,
            pattern_text(&t.dependent),
            pattern_text(&t.dependency)
        )
        .unwrap();
    }
    for t in &set.thads {
        if let Some(b) = &t.binding {
            let src = match &b.source {
                BindingSource::Return => "return".to_string(),
                BindingSource::Param(p) => p.clone(),
            };
            writeln!(
                out,
                "bind {}: {}.{} -> {}.{}",
                t.id, t.dependency.routine, src, t.dependent.routine, b.target_param
            )
            .unwrap();
        }
    }
    out
}

/// The bundled spidev set with Linux request values attached.
pub fn spidev() -> ThadSet {
    let consts = parse_constants(SPIDEV_LINUX_CONSTS).expect("bundled constants parse");
    parse_thad_spec(SPIDEV_THAD)
        .expect("bundled spec parses")
        .with_values(&consts)
}

/// [`spidev`] with every THAD correlated by file descriptor.
pub fn spidev_fd() -> ThadSet {
    let consts = parse_constants(SPIDEV_LINUX_CONSTS).expect("bundled constants parse");
    parse_thad_spec(SPIDEV_FD_THAD)
        .expect("bundled spec parses")
        .with_values(&consts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DECLS: &str =
        "routine open(path) returns descriptor\nroutine read(fd:descriptor, buf, n)\n";

    #[test]
    fn single_dependency() {
        let set = parse_thad_spec(&format!("{DECLS}dep d1: read requires open\n")).unwrap();
        assert_eq!(set.thads.len(), 1);
        assert_eq!(set.thads[0].id, "d1");
        assert_eq!(set.thads[0].dependent, RoutinePattern::plain("read"));
        assert_eq!(set.thads[0].dependency, RoutinePattern::plain("open"));
    }

    #[test]
    fn empty_document() {
        let set = parse_thad_spec("").unwrap();
        assert!(set.routines.is_empty() && set.thads.is_empty());
        assert_eq!(serialize_spec(&set), "");
        assert!(parse_constants("").unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_reported_at_second_line() {
        let text = format!("{DECLS}dep d1: read requires open\ndep d1: read requires open\n");
        let diags = parse_thad_spec(&text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, SpecErrorKind::DuplicateId);
        assert_eq!((diags[0].line, diags[0].column), (4, 5));
    }

    #[test]
    fn unknown_names_are_located() {
        let diags = parse_thad_spec("routine read(fd:descriptor)\ndep d1: read requires open\n")
            .unwrap_err();
        assert_eq!(diags[0].kind, SpecErrorKind::UnknownRoutine);
        assert_eq!((diags[0].line, diags[0].column), (2, 23));

        let text = "routine open()\nroutine ioctl(fd:descriptor, request:discriminator)\n\
                    dep d3: ioctl[request=MSG] requires open\n";
        let diags = parse_thad_spec(text).unwrap_err();
        assert_eq!(diags[0].kind, SpecErrorKind::UnknownConstant);
        assert_eq!((diags[0].line, diags[0].column), (3, 23));
    }

    #[test]
    fn syntax_errors_carry_columns() {
        let diags = parse_thad_spec("dep d1 read requires open").unwrap_err();
        assert_eq!(diags[0].kind, SpecErrorKind::SyntaxError);
        assert_eq!(diags[0].column, 8);
        assert_eq!(diags[0].render("x.thad"), "x.thad:1:8: error: expected `:`");

        let diags = parse_thad_spec("routine f(a:weird)").unwrap_err();
        assert!(diags[0].message.contains("weird"));
        let diags = parse_thad_spec("frobnicate x").unwrap_err();
        assert_eq!(diags[0].column, 1);
    }

    #[test]
    fn crlf_and_comments() {
        let text = "# header\r\nroutine open() returns descriptor # trailing\r\nroutine close(fd:descriptor)\r\ndep d4: close requires open\r\n";
        let set = parse_thad_spec(text).unwrap();
        assert_eq!(set.thads.len(), 1);
    }

    #[test]
    fn bindings_are_checked() {
        let ok = format!("{DECLS}dep d1: read requires open\nbind d1: open.return -> read.fd\n");
        let set = parse_thad_spec(&ok).unwrap();
        assert!(set.thads[0].binding.is_some());

        let wrong_role =
            format!("{DECLS}dep d1: read requires open\nbind d1: open.return -> read.buf\n");
        let diags = parse_thad_spec(&wrong_role).unwrap_err();
        assert_eq!(diags[0].kind, SpecErrorKind::InvalidDeclaration);

        let wrong_routine =
            format!("{DECLS}dep d1: read requires open\nbind d1: close.return -> read.fd\n");
        assert!(parse_thad_spec(&wrong_routine).is_err());

        let undeclared = format!("{DECLS}bind d9: open.return -> read.fd\n");
        assert!(parse_thad_spec(&undeclared).is_err());
    }

    #[test]
    fn constants_file() {
        let m = parse_constants("WR_LSB_FIRST = 1074031364").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m["WR_LSB_FIRST"], 1074031364);
        let d = parse_constants("A = 1\nA = 2").unwrap_err();
        assert_eq!(d[0].kind, SpecErrorKind::ConflictingConstant);
        assert_eq!(d[0].line, 2);
        assert!(parse_constants("A = 1\nA = 1").is_ok());
        assert_eq!(parse_constants("B = 0x10\nC = -3").unwrap()["B"], 16);
        assert_eq!(
            parse_constants("A 1").unwrap_err()[0].kind,
            SpecErrorKind::SyntaxError
        );
    }

    #[test]
    fn bundled_spidev_matches_dependency_table() {
        let set = spidev();
        assert_eq!(set.thads.len(), 26);
        let config = [
            "WR_MODE32",
            "WR_LSB_FIRST",
            "WR_BITS_PER_WORD",
            "WR_MAX_SPEED_HZ",
        ];
        for (i, t) in set.thads.iter().enumerate() {
            assert_eq!(t.id, format!("d{}", i + 1));
            if i < 14 {
                assert_eq!(t.dependency, RoutinePattern::plain("open"));
            } else {
                let c = config[(i - 14) / 3];
                assert_eq!(
                    t.dependency,
                    RoutinePattern::constrained("ioctl", "request", c)
                );
                let dependent = ["read", "write", "ioctl"][(i - 14) % 3];
                assert_eq!(t.dependent.routine, dependent);
            }
        }
        assert_eq!(set.constant_value("MSG"), Some(0x40206b00));
        assert_eq!(set.constant_named(0x40046b05), Some("WR_MODE32"));
        let fd = spidev_fd();
        assert!(fd.thads.iter().all(|t| t.binding.is_some()));
    }

    #[test]
    fn bundled_spec_round_trips() {
        let set = spidev_fd();
        assert_eq!(parse_thad_spec(&serialize_spec(&set)).unwrap(), set);
    }

    #[test]
    fn single_thad_serialization() {
        let set = parse_thad_spec(&format!("{DECLS}dep d1: read requires open\n")).unwrap();
        let text = serialize_spec(&set);
        assert_eq!(text.lines().filter(|l| l.starts_with("routine")).count(), 2);
        assert_eq!(text.lines().filter(|l| l.starts_with("dep")).count(), 1);
    }

    #[test]
    fn document_carries_diagnostics() {
        let doc = SpecDocument::parse("dep");
        assert!(doc.parsed.is_none());
        assert!(!doc.diagnostics.is_empty());
        assert!(SpecDocument::parse(DECLS).parsed.is_some());
    }
}
