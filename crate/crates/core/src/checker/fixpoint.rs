//! Must-completed monitor dataflow: the static shadow of the ghost
//! `state_<id>` variables.
//!
//! The analysis runs over the product of the CFG and the THAD monitor.
//! Every set of completed keys carries its own value environment, so
//! branch feasibility is decided separately for paths that did and did not
//! complete the dependency (an error return after a failed `open` does not
//! leak into the success path).

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::dataflow::{solve, ForwardAnalysis};
use crate::frontend::cfg::{Cfg, NodeId};
use crate::frontend::resolve::{edge_allowed, event_in, meet_env, transfer_env, widen_env, Env};
use crate::frontend::ResolvedProgram;
use crate::model::{CallEvent, Match, Thad, ThadSet, Token};

/// Which completion a monitor tracks: any dependency call (unbound THADs)
/// or one that produced a particular descriptor token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Key {
    Any,
    Token(Token),
}

impl Key {
    pub fn for_thad(thad: &Thad, descriptor: Option<Token>) -> Option<Key> {
        match thad.binding {
            None => Some(Key::Any),
            Some(_) => descriptor.map(Key::Token),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lattice {
    Unreachable,
    Completed,
    NotCompleted,
}

/// Keys completed along a path.
pub type Completed = BTreeSet<Key>;

/// Reachable monitor states before a node, each with the meet of the
/// environments of the paths that reach it in that state.
pub type ProductState = BTreeMap<Completed, Env>;

/// `None` when the node is unreachable.
pub type ThadState = Option<ProductState>;

pub fn lattice(state: &ThadState, key: Key) -> Lattice {
    match state {
        Some(m) if !m.is_empty() => {
            if m.keys().all(|s| s.contains(&key)) {
                Lattice::Completed
            } else {
                Lattice::NotCompleted
            }
        }
        _ => Lattice::Unreachable,
    }
}

/// The key an event completes for `thad`, if it matches the dependency
/// pattern (unresolved discriminators never complete).
pub fn completes(set: &ThadSet, thad: &Thad, ev: &CallEvent) -> Option<Key> {
    if set.match_event(&thad.dependency, ev) != Match::Yes {
        return None;
    }
    match thad.binding {
        None => Some(Key::Any),
        Some(_) => thad.source_token(ev).map(Key::Token),
    }
}

/// Monitor state after a node.
pub fn step(
    cfg: &Cfg,
    set: &ThadSet,
    thad: &Thad,
    node: NodeId,
    done: &Completed,
    env: &Env,
    dead: &[String],
) -> (Completed, Env) {
    let mut next = done.clone();
    if let Some(k) = event_in(cfg, set, node, env).and_then(|ev| completes(set, thad, &ev)) {
        next.insert(k);
    }
    (next, transfer_env(cfg, set, node, env, dead))
}

fn insert_meet(map: &mut ProductState, done: Completed, env: Env) {
    match map.get_mut(&done) {
        Some(e) => *e = meet_env(e, &env),
        None => {
            map.insert(done, env);
        }
    }
}

struct Monitor<'a> {
    set: &'a ThadSet,
    thad: &'a Thad,
    dead: &'a [Vec<String>],
}

impl ForwardAnalysis for Monitor<'_> {
    type State = ProductState;

    fn entry_state(&self) -> Self::State {
        BTreeMap::from([(Completed::new(), Env::new())])
    }

    fn transfer(&self, cfg: &Cfg, node: NodeId, input: &Self::State) -> Self::State {
        let mut out = ProductState::new();
        for (done, env) in input {
            let (d, e) = step(cfg, self.set, self.thad, node, done, env, &self.dead[node]);
            insert_meet(&mut out, d, e);
        }
        out
    }

    fn edge(
        &self,
        cfg: &Cfg,
        node: NodeId,
        edge: usize,
        output: &Self::State,
    ) -> Option<Self::State> {
        let kept: ProductState = output
            .iter()
            .filter(|(_, env)| edge_allowed(cfg, self.set, node, edge, env))
            .map(|(d, e)| (d.clone(), e.clone()))
            .collect();
        (!kept.is_empty()).then_some(kept)
    }

    fn meet(&self, a: &Self::State, b: &Self::State) -> Self::State {
        let mut out = a.clone();
        for (d, e) in b {
            insert_meet(&mut out, d.clone(), e.clone());
        }
        out
    }

    fn widen(&self, old: &Self::State, merged: Self::State) -> Self::State {
        merged
            .into_iter()
            .map(|(d, e)| match old.get(&d) {
                Some(o) => {
                    let w = widen_env(o, e);
                    (d, w)
                }
                None => (d, e),
            })
            .collect()
    }
}

/// Fixpoint for one THAD: product state before each node.
pub fn thad_fixpoint(prog: &ResolvedProgram, set: &ThadSet, thad: &Thad) -> Vec<ThadState> {
    solve(
        &prog.cfg,
        &Monitor {
            set,
            thad,
            dead: &prog.res.dead,
        },
    )
    .input
}

/// Monitor state of every THAD before each node.
#[derive(Debug, Clone, Default)]
pub struct MonitorStates {
    pub per_thad: BTreeMap<String, Vec<ThadState>>,
}

impl MonitorStates {
    pub fn get(&self, thad: &str, node: NodeId, key: Key) -> Lattice {
        self.per_thad
            .get(thad)
            .map_or(Lattice::Unreachable, |v| lattice(&v[node], key))
    }
}

pub fn dataflow_fixpoint(prog: &ResolvedProgram, set: &ThadSet) -> MonitorStates {
    MonitorStates {
        per_thad: set
            .thads
            .iter()
            .map(|t| (t.id.clone(), thad_fixpoint(prog, set, t)))
            .collect(),
    }
}
