//! Brute-force path oracle: enumerate entry-to-exit paths, interpret
//! them concretely, and apply the reference trace semantics.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::frontend::cfg::{EdgeLabel, NodeId, NodeKind};
use crate::frontend::resolve::{assign, edge_feasible, eval, make_event, Env, Value};
use crate::frontend::ResolvedProgram;
use crate::model::{CallEvent, ThadSet, Token};

pub const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("more than {cap} paths; raise the cap or reduce the unrolling bound")]
    PathExplosion { cap: usize },
}

/// One enumerated path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRecord {
    pub nodes: Vec<NodeId>,
    pub events: Vec<CallEvent>,
    /// Reached the exit node (otherwise cut by the unrolling bound).
    pub complete: bool,
}

struct Walker<'a, F: FnMut(&PathRecord)> {
    prog: &'a ResolvedProgram,
    set: &'a ThadSet,
    unroll: usize,
    cap: usize,
    count: usize,
    back_taken: HashMap<(NodeId, usize), usize>,
    record: PathRecord,
    visit: F,
}

impl<F: FnMut(&PathRecord)> Walker<'_, F> {
    fn emit(&mut self, complete: bool) -> Result<(), OracleError> {
        self.count += 1;
        if self.count > self.cap {
            return Err(OracleError::PathExplosion { cap: self.cap });
        }
        self.record.complete = complete;
        (self.visit)(&self.record);
        Ok(())
    }

    fn walk(&mut self, node: NodeId, env: Env) -> Result<(), OracleError> {
        let cfg = &self.prog.cfg;
        self.record.nodes.push(node);
        let mut env = env;
        let mut pushed_event = false;
        match &cfg.nodes[node].kind {
            NodeKind::Assign { var, value } => {
                let v = eval(value, &env, self.set);
                assign(&mut env, var, v);
            }
            NodeKind::Call {
                callee, args, dest, ..
            } => {
                let vals: Vec<Value> = args.iter().map(|a| eval(a, &env, self.set)).collect();
                // Fresh descriptor per dynamic call: the path position.
                let fresh = Token(self.record.nodes.len() as u32);
                let ev = make_event(self.set, callee, &vals, fresh);
                if let Some(d) = dest {
                    let v = match &ev {
                        Some(e) if e.produced.is_some() => Value::Token(fresh),
                        _ => Value::Top,
                    };
                    assign(&mut env, d, v);
                }
                if let Some(ev) = ev {
                    self.record.events.push(ev);
                    pushed_event = true;
                }
            }
            _ => {}
        }

        let result = if node == cfg.exit {
            self.emit(true)
        } else {
            let n = &cfg.nodes[node];
            let cond = match &n.kind {
                NodeKind::Branch { cond } => eval(cond, &env, self.set),
                _ => Value::Top,
            };
            let labels: Vec<EdgeLabel> = n.succs.iter().map(|e| e.label).collect();
            let mut moved = false;
            let mut r = Ok(());
            for (i, e) in n.succs.iter().enumerate() {
                if !edge_feasible(&cond, e.label, &labels) {
                    continue;
                }
                if e.back {
                    let taken = self.back_taken.entry((node, i)).or_insert(0);
                    if *taken >= self.unroll {
                        continue;
                    }
                    *taken += 1;
                }
                moved = true;
                r = self.walk(e.to, env.clone());
                if e.back {
                    *self
                        .back_taken
                        .get_mut(&(node, i))
                        .expect("incremented above") -= 1;
                }
                if r.is_err() {
                    break;
                }
            }
            if r.is_ok() && !moved {
                r = self.emit(false);
            }
            r
        };
        if pushed_event {
            self.record.events.pop();
        }
        self.record.nodes.pop();
        result
    }
}

/// Visit every path from entry; back edges are taken at most `unroll`
/// times each per path, and a path that cannot continue within that bound
/// is reported as incomplete. Returns the number of paths.
pub fn enumerate_paths(
    prog: &ResolvedProgram,
    set: &ThadSet,
    unroll: usize,
    cap: usize,
    visit: impl FnMut(&PathRecord),
) -> Result<usize, OracleError> {
    let mut w = Walker {
        prog,
        set,
        unroll,
        cap,
        count: 0,
        back_taken: HashMap::new(),
        record: PathRecord {
            nodes: Vec::new(),
            events: Vec::new(),
            complete: false,
        },
        visit,
    };
    w.walk(prog.cfg.entry, Env::new())?;
    Ok(w.count)
}

/// Per THAD: does every enumerated path satisfy it?
pub fn brute_force_paths(
    prog: &ResolvedProgram,
    set: &ThadSet,
    unroll: usize,
    cap: usize,
) -> Result<BTreeMap<String, bool>, OracleError> {
    let mut result: BTreeMap<String, bool> =
        set.thads.iter().map(|t| (t.id.clone(), true)).collect();
    enumerate_paths(prog, set, unroll, cap, |p| {
        for t in &set.thads {
            if !set.trace_satisfies(t, &p.events) {
                result.insert(t.id.clone(), false);
            }
        }
    })?;
    Ok(result)
}
