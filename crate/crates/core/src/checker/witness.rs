//! Shortest witness paths in the product of the CFG and the THAD monitor,
//! staying in monitor states that have not completed the tracked key.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::fixpoint::{step, Completed, Key, ThadState};
use crate::frontend::cfg::NodeId;
use crate::frontend::resolve::{edge_allowed, event_in, Env};
use crate::frontend::ResolvedProgram;
use crate::model::{CallEvent, Thad, ThadSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessEvent {
    pub event: CallEvent,
    #[serde(skip)]
    pub node: NodeId,
    pub line: usize,
    pub column: usize,
    pub function: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessTrace {
    /// HAL call events along the path, ending at the offending call.
    pub events: Vec<WitnessEvent>,
    /// Every CFG node of the path, entry first.
    #[serde(skip)]
    pub path: Vec<NodeId>,
}

impl WitnessTrace {
    pub fn call_events(&self) -> Vec<CallEvent> {
        self.events.iter().map(|e| e.event.clone()).collect()
    }
}

/// Product states explored by the path-precise search before it gives
/// up and falls back to the fixpoint environments.
pub const PRECISE_SEARCH_BUDGET: usize = 200_000;

/// Shortest path from entry to one of `targets` on which `key` is never
/// completed for `thad`; ties go to the target with the lower source line,
/// then node id. The search first tracks the exact abstract environment of
/// each path, so branches decided by constants are followed consistently;
/// if that finds nothing within [`PRECISE_SEARCH_BUDGET`] states, it
/// falls back to the merged fixpoint environments in `states`. Among
/// equally short paths, successors are explored in source order.
pub fn find_witness(
    prog: &ResolvedProgram,
    set: &ThadSet,
    thad: &Thad,
    states: &[ThadState],
    targets: &BTreeSet<NodeId>,
    key: Key,
) -> Option<WitnessTrace> {
    let cfg = &prog.cfg;
    let precise = search(
        prog,
        set,
        thad,
        targets,
        key,
        Some(PRECISE_SEARCH_BUDGET),
        // A path environment can resolve a bound descriptor that the merged
        // fixpoint environment lost, so its completed keys need not appear
        // in `states`.
        |_, _, env| Some(env.clone()),
    );
    let path = precise.or_else(|| {
        search(prog, set, thad, targets, key, None, |node, done, _| {
            states[node].as_ref()?.get(done).cloned()
        })
    })?;
    let events = path
        .iter()
        .filter_map(|(node, env)| {
            event_in(cfg, set, *node, env).map(|ev| WitnessEvent {
                event: ev,
                node: *node,
                line: cfg.nodes[*node].loc.line,
                column: cfg.nodes[*node].loc.col,
                function: cfg.nodes[*node].function.clone(),
            })
        })
        .collect();
    Some(WitnessTrace {
        events,
        path: path.into_iter().map(|(n, _)| n).collect(),
    })
}

/// Breadth-first search over `(node, completed keys, environment)`.
/// `env_at` picks the environment used before a node from the one the
/// path carries. Returns the path with the environment before each node.
fn search(
    prog: &ResolvedProgram,
    set: &ThadSet,
    thad: &Thad,
    targets: &BTreeSet<NodeId>,
    key: Key,
    budget: Option<usize>,
    env_at: impl Fn(NodeId, &Completed, &Env) -> Option<Env>,
) -> Option<Vec<(NodeId, Env)>> {
    let cfg = &prog.cfg;
    type P = (NodeId, Completed, Env);
    let start: P = (cfg.entry, Completed::new(), Env::new());
    let mut parent: BTreeMap<P, Option<P>> = BTreeMap::from([(start.clone(), None)]);
    let mut level = vec![start];
    let mut found: Option<P> = None;
    while !level.is_empty() && found.is_none() {
        let mut next_level = Vec::new();
        for p in level {
            if budget.is_some_and(|b| parent.len() > b) {
                return None;
            }
            let (node, done, carried) = &p;
            let Some(env) = env_at(*node, done, carried) else {
                continue;
            };
            if targets.contains(node) {
                let rank = |q: &P| (cfg.nodes[q.0].loc.line, q.0);
                if found.as_ref().is_none_or(|f| rank(&p) < rank(f)) {
                    found = Some(p.clone());
                }
                continue;
            }
            if found.is_some() {
                continue;
            }
            let (next, out) = step(cfg, set, thad, *node, done, &env, &prog.res.dead[*node]);
            if next.contains(&key) {
                continue;
            }
            let mut succs: Vec<NodeId> = cfg.nodes[*node]
                .succs
                .iter()
                .enumerate()
                .filter(|(i, _)| edge_allowed(cfg, set, *node, *i, &out))
                .map(|(_, e)| e.to)
                .collect();
            succs.sort_by_key(|&s| (cfg.nodes[s].loc.line, cfg.nodes[s].loc.col, s));
            succs.dedup();
            for s in succs {
                // The fallback search identifies paths by monitor state only.
                let carry = if budget.is_some() {
                    out.clone()
                } else {
                    Env::new()
                };
                let q = (s, next.clone(), carry);
                if !parent.contains_key(&q) {
                    parent.insert(q.clone(), Some(p.clone()));
                    next_level.push(q);
                }
            }
        }
        level = next_level;
    }
    let mut cur = found?;
    let mut path = vec![cur.clone()];
    while let Some(Some(prev)) = parent.get(&cur) {
        path.push(prev.clone());
        cur = prev.clone();
    }
    path.reverse();
    Some(
        path.into_iter()
            .map(|(node, done, carried)| {
                let env = env_at(node, &done, &carried).expect("path states have environments");
                (node, env)
            })
            .collect(),
    )
}
