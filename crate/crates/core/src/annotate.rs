//! Ghost-variable instrumentation of HAL routines: one state flag per
//! THAD, set before every return of the dependency routine and asserted on
//! entry of the dependent routine.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::frontend::ast::{BinOp, Expr, Function, Stmt};
use crate::frontend::parser::parse_unit;
use crate::frontend::FrontendError;
use crate::model::{BindingSource, RoutinePattern, ThadSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// ACSL ghost code and assertions inside `/*@ ... */` comments.
    Acsl,
    /// Plain C globals and `assert(...)` calls.
    Assert,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Acsl => "acsl",
            Mode::Assert => "assert",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotateError {
    #[error("routine `{0}` is not defined in the HAL source")]
    MissingRoutine(String),
    #[error("HAL source does not parse: {0}")]
    Parse(#[from] FrontendError),
    #[error("line {line}: {message}")]
    Layout { line: usize, message: String },
}

/// Discriminator guard: `param == C1 || param == C2 ...` over the spec
/// parameter name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Guard {
    pub param: String,
    pub constants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GhostDecl {
    pub name: String,
    /// `None` leaves the ghost uninitialised (descriptor ghosts).
    pub init: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FdSource {
    /// The value the routine returns.
    Return,
    /// The value of a routine parameter (spec name).
    Param { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UpdatePoint {
    pub thad: String,
    pub routine: String,
    pub guard: Option<Guard>,
    pub state: String,
    pub fd: Option<(String, FdSource)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssertPoint {
    pub thad: String,
    pub routine: String,
    pub guard: Option<Guard>,
    pub state: String,
    /// `(dependent descriptor parameter, ghost)` for a bound THAD.
    pub fd: Option<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnnotationPlan {
    pub ghosts: Vec<GhostDecl>,
    pub updates: Vec<UpdatePoint>,
    pub asserts: Vec<AssertPoint>,
}

impl AnnotationPlan {
    pub fn is_empty(&self) -> bool {
        self.ghosts.is_empty()
    }

    /// Routines the plan touches, in first-use order.
    pub fn routines(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let names = self
            .updates
            .iter()
            .map(|u| u.routine.as_str())
            .chain(self.asserts.iter().map(|a| a.routine.as_str()));
        for n in names {
            if !out.contains(&n) {
                out.push(n);
            }
        }
        out
    }
}

pub fn state_ghost(id: &str) -> String {
    format!("state_{id}")
}

pub fn fd_ghost(id: &str) -> String {
    format!("fd_{id}")
}

fn guard_of(set: &ThadSet, p: &RoutinePattern) -> Option<Guard> {
    let c = p.constraint.as_ref()?;
    let mut constants = vec![c.constant.clone()];
    constants.extend(set.aliases_for(p).into_iter().map(str::to_string));
    Some(Guard {
        param: c.param.clone(),
        constants,
    })
}

pub fn plan_annotations(set: &ThadSet) -> AnnotationPlan {
    let mut plan = AnnotationPlan::default();
    for t in &set.thads {
        let state = state_ghost(&t.id);
        plan.ghosts.push(GhostDecl {
            name: state.clone(),
            init: Some(0),
        });
        let mut update_fd = None;
        let mut assert_fd = None;
        if let Some(b) = &t.binding {
            let ghost = fd_ghost(&t.id);
            plan.ghosts.push(GhostDecl {
                name: ghost.clone(),
                init: None,
            });
            let src = match &b.source {
                BindingSource::Return => FdSource::Return,
                BindingSource::Param(p) => FdSource::Param { name: p.clone() },
            };
            update_fd = Some((ghost.clone(), src));
            assert_fd = Some((b.target_param.clone(), ghost));
        }
        plan.updates.push(UpdatePoint {
            thad: t.id.clone(),
            routine: t.dependency.routine.clone(),
            guard: guard_of(set, &t.dependency),
            state: state.clone(),
            fd: update_fd,
        });
        plan.asserts.push(AssertPoint {
            thad: t.id.clone(),
            routine: t.dependent.routine.clone(),
            guard: guard_of(set, &t.dependent),
            state,
            fd: assert_fd,
        });
    }
    plan
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmitOptions {
    /// Guard updates of constrained dependencies by their discriminator.
    /// Off updates unconditionally before every return of the routine.
    pub guard_updates: bool,
}

/// Annotated text plus the (1-based, output) line numbers that were
/// inserted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotated {
    pub text: String,
    pub inserted: Vec<usize>,
}

fn ghost_decl(mode: Mode, g: &GhostDecl) -> String {
    match (mode, g.init) {
        (Mode::Acsl, Some(v)) => format!("/*@ ghost int {} = {v}; */", g.name),
        (Mode::Acsl, None) => format!("/*@ ghost int {}; */", g.name),
        (Mode::Assert, Some(v)) => format!("int {} = {v};", g.name),
        (Mode::Assert, None) => format!("int {};", g.name),
    }
}

fn ghost_assign(mode: Mode, var: &str, value: &str) -> String {
    match mode {
        Mode::Acsl => format!("/*@ ghost {var} = {value}; */"),
        Mode::Assert => format!("{var} = {value};"),
    }
}

fn assertion(mode: Mode, cond: &str) -> String {
    match mode {
        Mode::Acsl => format!("/*@ assert ({cond}); */"),
        Mode::Assert => format!("assert({cond});"),
    }
}

fn guard_text(g: &Guard, param: &str) -> String {
    g.constants
        .iter()
        .map(|c| format!("{param} == {c}"))
        .collect::<Vec<_>>()
        .join(" || ")
}

/// First source line of a statement.
fn stmt_line(s: &Stmt) -> Option<usize> {
    match s {
        Stmt::Decl { loc, .. }
        | Stmt::Expr(_, loc)
        | Stmt::If { loc, .. }
        | Stmt::While { loc, .. }
        | Stmt::DoWhile { loc, .. }
        | Stmt::For { loc, .. }
        | Stmt::Switch { loc, .. }
        | Stmt::Return(_, loc) => Some(loc.line),
        Stmt::Break(loc) | Stmt::Continue(loc) => Some(loc.line),
        Stmt::Block(b) => b.iter().find_map(stmt_line),
        Stmt::Empty => None,
    }
}

fn collect_returns<'a>(stmts: &'a [Stmt], out: &mut Vec<(usize, Option<&'a Expr>)>) {
    for s in stmts {
        match s {
            Stmt::Return(v, loc) => out.push((loc.line, v.as_ref())),
            Stmt::If { then, els, .. } => {
                collect_returns(std::slice::from_ref(then), out);
                if let Some(e) = els {
                    collect_returns(std::slice::from_ref(e), out);
                }
            }
            Stmt::While { body, .. } | Stmt::DoWhile { body, .. } | Stmt::For { body, .. } => {
                collect_returns(std::slice::from_ref(body), out)
            }
            Stmt::Switch { arms, .. } => {
                for a in arms {
                    collect_returns(&a.body, out);
                }
            }
            Stmt::Block(b) => collect_returns(b, out),
            _ => {}
        }
    }
}

/// A top-level `if (param == CONST) {` block opening on its own line,
/// with no else branch.
fn existing_guard(f: &Function, param: &str, constant: &str, lines: &[&str]) -> Option<usize> {
    f.body.iter().find_map(|s| match s {
        Stmt::If {
            cond: Expr::Binary(BinOp::Eq, a, b),
            then,
            els: None,
            loc,
        } if matches!(then.as_ref(), Stmt::Block(_)) => {
            let names = match (a.as_ref(), b.as_ref()) {
                (Expr::Ident(x, _), Expr::Ident(y, _)) => (x.as_str(), y.as_str()),
                _ => return None,
            };
            let hit = names == (param, constant) || names == (constant, param);
            let opens = lines
                .get(loc.line - 1)
                .is_some_and(|l| l.trim_end().ends_with('{'));
            (hit && opens).then_some(loc.line)
        }
        _ => None,
    })
}

fn indent_of(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

/// Lines to insert before a given source line, ordered by priority.
#[derive(Default)]
struct Insertions {
    at: BTreeMap<usize, Vec<(u8, String)>>,
}

impl Insertions {
    fn add(&mut self, before_line: usize, priority: u8, text: String) {
        self.at
            .entry(before_line)
            .or_default()
            .push((priority, text));
    }
}

fn spec_param_name(
    set: &ThadSet,
    routine: &str,
    param: &str,
    f: &Function,
) -> Result<String, AnnotateError> {
    let idx = set
        .routine(routine)
        .and_then(|r| r.param(param))
        .map(|(i, _)| i)
        .ok_or_else(|| AnnotateError::Layout {
            line: f.loc.line,
            message: format!("routine `{routine}` has no parameter `{param}`"),
        })?;
    f.params
        .get(idx)
        .cloned()
        .ok_or_else(|| AnnotateError::Layout {
            line: f.loc.line,
            message: format!("`{routine}` defines fewer than {} parameters", idx + 1),
        })
}

/// Insert the plan's statements into a HAL implementation. Only whole
/// lines are added; removing them restores `hal_source` exactly.
pub fn emit_annotated_source(
    plan: &AnnotationPlan,
    set: &ThadSet,
    hal_source: &str,
    mode: Mode,
    opts: EmitOptions,
) -> Result<Annotated, AnnotateError> {
    if plan.is_empty() {
        return Ok(Annotated {
            text: hal_source.to_string(),
            inserted: Vec::new(),
        });
    }
    let unit = parse_unit(hal_source)?;
    let lines: Vec<&str> = hal_source.split_inclusive('\n').collect();
    let line_text = |n: usize| lines.get(n - 1).copied().unwrap_or("");
    let func = |name: &str| -> Result<&Function, AnnotateError> {
        unit.functions
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| AnnotateError::MissingRoutine(name.to_string()))
    };
    for r in plan.routines() {
        func(r)?;
    }
    let mut ins = Insertions::default();

    // Ghost declarations before the first function definition.
    let first_fn = unit
        .functions
        .iter()
        .map(|f| f.loc.line)
        .min()
        .expect("plan routines exist, so the source defines functions");
    if mode == Mode::Assert {
        ins.add(1, 0, "#include <assert.h>".into());
    }
    for g in &plan.ghosts {
        ins.add(first_fn, 0, ghost_decl(mode, g));
    }
    ins.add(first_fn, 0, String::new());

    let body_start = |f: &Function| -> Result<usize, AnnotateError> {
        match f.body.iter().find_map(stmt_line) {
            Some(l) if l > f.loc.line => Ok(l),
            _ => Err(AnnotateError::Layout {
                line: f.loc.line,
                message: format!("`{}` needs a body statement on its own line", f.name),
            }),
        }
    };

    // Asserts, grouped by guard in plan order.
    let mut groups: Vec<(&str, Option<&Guard>, Vec<&AssertPoint>)> = Vec::new();
    for a in &plan.asserts {
        match groups
            .iter_mut()
            .find(|(r, g, _)| *r == a.routine && *g == a.guard.as_ref())
        {
            Some((_, _, v)) => v.push(a),
            None => groups.push((&a.routine, a.guard.as_ref(), vec![a])),
        }
    }
    for (routine, guard, points) in groups {
        let f = func(routine)?;
        let mut conds = Vec::new();
        for a in &points {
            let mut c = format!("{} == 1", a.state);
            if let Some((param, ghost)) = &a.fd {
                let p = spec_param_name(set, routine, param, f)?;
                c = format!("{c} && {p} == {ghost}");
            }
            conds.push(assertion(mode, &c));
        }
        let start = body_start(f)?;
        let indent = indent_of(line_text(start)).to_string();
        match guard {
            None => {
                for c in conds {
                    ins.add(start, 1, format!("{indent}{c}"));
                }
            }
            Some(g) => {
                let p = spec_param_name(set, routine, &g.param, f)?;
                let lines_ref: Vec<&str> = lines.clone();
                let existing = match g.constants.as_slice() {
                    [single] => existing_guard(f, &p, single, &lines_ref),
                    _ => None,
                };
                match existing {
                    Some(if_line) => {
                        let inner = format!("{}    ", indent_of(line_text(if_line)));
                        for c in conds {
                            ins.add(if_line + 1, 1, format!("{inner}{c}"));
                        }
                    }
                    None => {
                        ins.add(start, 1, format!("{indent}if ({}) {{", guard_text(g, &p)));
                        for c in conds {
                            ins.add(start, 1, format!("{indent}    {c}"));
                        }
                        ins.add(start, 1, format!("{indent}}}"));
                    }
                }
            }
        }
    }

    // Updates before every return of the dependency routine.
    for u in &plan.updates {
        let f = func(&u.routine)?;
        let mut returns = Vec::new();
        collect_returns(&f.body, &mut returns);
        if returns.is_empty() {
            return Err(AnnotateError::Layout {
                line: f.loc.line,
                message: format!("`{}` has no return statement to annotate", f.name),
            });
        }
        for (line, value) in returns {
            if line <= f.loc.line {
                return Err(AnnotateError::Layout {
                    line,
                    message: format!("return in `{}` must be on its own line", f.name),
                });
            }
            let indent = indent_of(line_text(line)).to_string();
            let mut stmts = vec![ghost_assign(mode, &u.state, "1")];
            if let Some((ghost, src)) = &u.fd {
                let value = match src {
                    FdSource::Return => match value {
                        Some(Expr::Ident(v, _)) => v.clone(),
                        _ => {
                            return Err(AnnotateError::Layout {
                                line,
                                message: "descriptor binding needs `return <variable>;`".into(),
                            })
                        }
                    },
                    FdSource::Param { name } => spec_param_name(set, &u.routine, name, f)?,
                };
                stmts.push(ghost_assign(mode, ghost, &value));
            }
            match (&u.guard, opts.guard_updates) {
                (Some(g), true) => {
                    let p = spec_param_name(set, &u.routine, &g.param, f)?;
                    ins.add(line, 2, format!("{indent}if ({}) {{", guard_text(g, &p)));
                    for s in stmts {
                        ins.add(line, 2, format!("{indent}    {s}"));
                    }
                    ins.add(line, 2, format!("{indent}}}"));
                }
                _ => {
                    for s in stmts {
                        ins.add(line, 2, format!("{indent}{s}"));
                    }
                }
            }
        }
    }

    let eol = if hal_source.contains("\r\n") {
        "\r\n"
    } else {
        "\n"
    };
    let mut text = String::with_capacity(hal_source.len() + 1024);
    let mut inserted = Vec::new();
    let mut out_line = 0;
    for (i, l) in lines.iter().enumerate() {
        if let Some(items) = ins.at.get_mut(&(i + 1)) {
            items.sort_by_key(|(p, _)| *p);
            for (_, t) in items.iter() {
                text.push_str(t);
                text.push_str(eol);
                out_line += 1;
                inserted.push(out_line);
            }
        }
        text.push_str(l);
        out_line += 1;
    }
    Ok(Annotated { text, inserted })
}

fn c_param(role: crate::model::ParamRole, name: &str) -> String {
    match role {
        crate::model::ParamRole::Opaque => format!("long {name}"),
        _ => format!("int {name}"),
    }
}

/// Unannotated forwarding skeleton: one function per routine calling
/// `__real_<name>`.
pub fn wrapper_skeleton(set: &ThadSet) -> String {
    let mut s = String::new();
    s.push_str("/* Forwarding wrapper for the HAL routines of a THAD specification.\n");
    s.push_str(&format!(
        " * {} routines, {} THADs. Each routine forwards to __real_<name>. */\n",
        set.routines.len(),
        set.thads.len()
    ));
    let mut defined = false;
    for (name, value) in &set.constants {
        if let Some(v) = value {
            s.push_str(&format!("#define {name} {v}\n"));
            defined = true;
        }
    }
    if defined || !set.routines.is_empty() {
        s.push('\n');
    }
    for r in &set.routines {
        let params: Vec<String> = r.params.iter().map(|p| c_param(p.role, &p.name)).collect();
        let args: Vec<&str> = r.params.iter().map(|p| p.name.as_str()).collect();
        s.push_str(&format!(
            "int {}({}) {{\n    int ret = __real_{}({});\n    return ret;\n}}\n\n",
            r.name,
            if params.is_empty() {
                "void".to_string()
            } else {
                params.join(", ")
            },
            r.name,
            args.join(", ")
        ));
    }
    s
}

/// Self-contained annotated wrapper for every routine of `set`. Updates of
/// constrained dependencies are guarded so that the wrapper is exact.
pub fn emit_wrapper(set: &ThadSet, mode: Mode) -> String {
    let skeleton = wrapper_skeleton(set);
    let plan = plan_annotations(set);
    emit_annotated_source(
        &plan,
        set,
        &skeleton,
        mode,
        EmitOptions {
            guard_updates: true,
        },
    )
    .expect("the generated skeleton defines every routine with annotatable layout")
    .text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{parse_thad_spec, spidev};

    #[test]
    fn plan_for_single_thad() {
        let set = spidev().select(&["d3".into()]);
        let plan = plan_annotations(&set);
        assert_eq!(
            plan.ghosts,
            vec![GhostDecl {
                name: "state_d3".into(),
                init: Some(0)
            }]
        );
        assert_eq!(plan.updates.len(), 1);
        assert_eq!(plan.updates[0].routine, "open");
        assert_eq!(plan.asserts[0].routine, "ioctl");
        assert_eq!(
            plan.asserts[0].guard,
            Some(Guard {
                param: "request".into(),
                constants: vec!["MSG".into()]
            })
        );
    }

    #[test]
    fn empty_plan_is_identity() {
        let src = "int weird( ) {return 1;}\n";
        let out = emit_annotated_source(
            &AnnotationPlan::default(),
            &ThadSet::default(),
            src,
            Mode::Acsl,
            EmitOptions::default(),
        )
        .unwrap();
        assert_eq!(out.text, src);
    }

    #[test]
    fn missing_routine_is_reported() {
        let set = spidev().select(&["d1".into()]);
        let err = emit_annotated_source(
            &plan_annotations(&set),
            &set,
            "int open(const char *p, int f) {\n    int ret = 3;\n    return ret;\n}\n",
            Mode::Acsl,
            EmitOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, AnnotateError::MissingRoutine("read".into()));
    }

    #[test]
    fn wrapper_for_empty_set_has_no_functions() {
        let w = emit_wrapper(&ThadSet::default(), Mode::Acsl);
        assert!(w.starts_with("/*"));
        assert!(parse_unit(&w).unwrap().functions.is_empty());
    }

    #[test]
    fn alias_extends_guards() {
        let set = parse_thad_spec(
            "const WR_MODE\nconst WR_MODE32\nroutine open(path) returns descriptor\n\
             routine ioctl(fd:descriptor, request:discriminator)\n\
             dep d8: ioctl[request=WR_MODE32] requires open\nalias WR_MODE satisfies WR_MODE32\n",
        )
        .unwrap();
        let w = emit_wrapper(&set, Mode::Assert);
        assert!(
            w.contains("if (request == WR_MODE32 || request == WR_MODE) {"),
            "{w}"
        );
    }
}
