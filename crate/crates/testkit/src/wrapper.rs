//! Concrete interpreter for assert-mode wrappers.
//!
//! Runs the wrapper's routine bodies on a trace of call events and reports
//! the THAD ids whose `state_<id>` ghost appears in a failing `assert`.
//! Descriptor tokens become distinct positive integers; each unresolved
//! descriptor or discriminator becomes a fresh large negative integer
//! equal to nothing else, mirroring the trace semantics in which unknown values
//! never match.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thadc_core::frontend::ast::{Expr, Stmt, Unit};
use thadc_core::frontend::parser::parse_unit;
use thadc_core::model::{CallEvent, Descriptor, Discriminator, ParamRole, ThadSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WrapperError {
    #[error("wrapper does not parse: {0}")]
    Parse(String),
    #[error("wrapper has no function `{0}`")]
    MissingFunction(String),
    #[error("unsupported construct in wrapper: {0}")]
    Unsupported(String),
    #[error("constant `{0}` has no integer value")]
    UnvaluedConstant(String),
}

const TOKEN_BASE: i64 = 1000;

fn token_value(t: u32) -> i64 {
    TOKEN_BASE + i64::from(t)
}

enum Flow {
    Next,
    Return(i64),
}

struct Machine<'a> {
    unit: &'a Unit,
    defines: HashMap<&'a str, i64>,
    globals: HashMap<String, i64>,
    /// Result of the `__real_*` call of the current event.
    real_result: i64,
    failed: BTreeSet<String>,
}

impl<'a> Machine<'a> {
    fn new(unit: &'a Unit) -> Result<Self, WrapperError> {
        let mut m = Machine {
            unit,
            defines: HashMap::new(),
            globals: HashMap::new(),
            real_result: 0,
            failed: BTreeSet::new(),
        };
        for (name, e) in &unit.defines {
            let v = m.eval(e, &mut HashMap::new())?;
            m.defines.insert(name, v);
        }
        for g in &unit.globals {
            let v = match &g.init {
                Some(e) => m.eval(e, &mut HashMap::new())?,
                None => 0,
            };
            m.globals.insert(g.name.clone(), v);
        }
        Ok(m)
    }

    fn read(&self, name: &str, locals: &HashMap<String, i64>) -> Result<i64, WrapperError> {
        locals
            .get(name)
            .or_else(|| self.globals.get(name))
            .or_else(|| self.defines.get(name))
            .copied()
            .ok_or_else(|| WrapperError::Unsupported(format!("undefined identifier `{name}`")))
    }

    fn write(&mut self, name: &str, v: i64, locals: &mut HashMap<String, i64>) {
        if let Some(slot) = locals.get_mut(name) {
            *slot = v;
        } else {
            self.globals.insert(name.to_string(), v);
        }
    }

    fn eval(&mut self, e: &Expr, locals: &mut HashMap<String, i64>) -> Result<i64, WrapperError> {
        Ok(match e {
            Expr::Int(v) => *v,
            Expr::Ident(name, _) => self.read(name, locals)?,
            Expr::Cast(inner) => self.eval(inner, locals)?,
            Expr::Unary(op, a) => op.fold(self.eval(a, locals)?),
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, locals)?;
                let y = self.eval(b, locals)?;
                op.fold(x, y)
                    .ok_or_else(|| WrapperError::Unsupported("division by zero".into()))?
            }
            Expr::Cond(c, a, b) => {
                if self.eval(c, locals)? != 0 {
                    self.eval(a, locals)?
                } else {
                    self.eval(b, locals)?
                }
            }
            Expr::Assign {
                op: None,
                target,
                value,
                ..
            } => {
                let Expr::Ident(name, _) = &**target else {
                    return Err(WrapperError::Unsupported(format!(
                        "assignment to {target:?}"
                    )));
                };
                let v = self.eval(value, locals)?;
                self.write(name, v, locals);
                v
            }
            Expr::Call { callee, args, .. } if callee == "assert" => {
                let [cond] = args.as_slice() else {
                    return Err(WrapperError::Unsupported("assert arity".into()));
                };
                if self.eval(cond, locals)? == 0 {
                    let mut ids = Vec::new();
                    state_ghosts(cond, &mut ids);
                    self.failed.extend(ids);
                }
                0
            }
            Expr::Call { callee, args, .. } if callee.starts_with("__real_") => {
                for a in args {
                    self.eval(a, locals)?;
                }
                self.real_result
            }
            other => return Err(WrapperError::Unsupported(format!("{other:?}"))),
        })
    }

    fn exec(&mut self, s: &Stmt, locals: &mut HashMap<String, i64>) -> Result<Flow, WrapperError> {
        match s {
            Stmt::Decl { name, init, .. } => {
                let v = match init {
                    Some(e) => self.eval(e, locals)?,
                    None => 0,
                };
                locals.insert(name.clone(), v);
            }
            Stmt::Expr(e, _) => {
                self.eval(e, locals)?;
            }
            Stmt::If {
                cond, then, els, ..
            } => {
                if self.eval(cond, locals)? != 0 {
                    return self.exec(then, locals);
                } else if let Some(e) = els {
                    return self.exec(e, locals);
                }
            }
            Stmt::Block(stmts) => {
                for s in stmts {
                    if let Flow::Return(v) = self.exec(s, locals)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::Return(e, _) => {
                let v = match e {
                    Some(e) => self.eval(e, locals)?,
                    None => 0,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::Empty => {}
            other => return Err(WrapperError::Unsupported(format!("{other:?}"))),
        }
        Ok(Flow::Next)
    }

    fn call(&mut self, name: &str, args: &[i64], real_result: i64) -> Result<(), WrapperError> {
        let unit = self.unit;
        let f = unit
            .functions
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| WrapperError::MissingFunction(name.to_string()))?;
        let mut locals: HashMap<String, i64> =
            f.params.iter().cloned().zip(args.iter().copied()).collect();
        self.real_result = real_result;
        for s in &f.body {
            if let Flow::Return(_) = self.exec(s, &mut locals)? {
                break;
            }
        }
        Ok(())
    }
}

fn state_ghosts(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Ident(name, _) => {
            if let Some(id) = name.strip_prefix("state_") {
                out.push(id.to_string());
            }
        }
        Expr::Unary(_, a) | Expr::Cast(a) => state_ghosts(a, out),
        Expr::Binary(_, a, b) => {
            state_ghosts(a, out);
            state_ghosts(b, out);
        }
        _ => {}
    }
}

/// Interpret `wrapper` (assert mode, generated for `set`) on `trace`.
/// Returns the ids of THADs with a failing assertion.
pub fn run_wrapper(
    set: &ThadSet,
    wrapper: &str,
    trace: &[CallEvent],
) -> Result<BTreeSet<String>, WrapperError> {
    let unit = parse_unit(wrapper).map_err(|e| WrapperError::Parse(e.render("wrapper.c")))?;
    let mut m = Machine::new(&unit)?;
    let mut fresh = i64::MIN / 2;
    let mut unknown = || {
        fresh += 1;
        fresh
    };
    let values: BTreeMap<&str, Option<i64>> = set
        .constants
        .iter()
        .map(|(k, v)| (k.as_str(), *v))
        .collect();
    for ev in trace {
        let Some(r) = set.routine(&ev.routine) else {
            continue;
        };
        let mut args = Vec::with_capacity(r.params.len());
        for p in &r.params {
            args.push(match p.role {
                ParamRole::Descriptor => match ev.descriptor {
                    Some(Descriptor::Token(t)) => token_value(t.0),
                    _ => unknown(),
                },
                ParamRole::Discriminator => match &ev.discriminator {
                    Some(Discriminator::Named(n)) => values
                        .get(n.as_str())
                        .copied()
                        .flatten()
                        .ok_or_else(|| WrapperError::UnvaluedConstant(n.clone()))?,
                    Some(Discriminator::Value(v)) => *v,
                    _ => unknown(),
                },
                ParamRole::Opaque => 0,
            });
        }
        let ret = ev.produced.map_or(0, |t| token_value(t.0));
        m.call(&ev.routine, &args, ret)?;
    }
    Ok(m.failed)
}
