//! Static verification of THADs: per-THAD must-dataflow, verdicts, and
//! witnesses, plus an exhaustive path oracle for cross-checking.

pub mod fixpoint;
pub mod oracle;
pub mod witness;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::frontend::cfg::NodeId;
use crate::frontend::resolve::event_in;
use crate::frontend::ResolvedProgram;
use crate::model::{BindingSource, Match, RoutinePattern, Thad, ThadSet};
pub use fixpoint::{dataflow_fixpoint, MonitorStates};
pub use fixpoint::{lattice, Lattice};
use fixpoint::{thad_fixpoint, Key, ThadState};
pub use oracle::{brute_force_paths, enumerate_paths, OracleError, PathRecord, DEFAULT_PATH_CAP};
pub use witness::{find_witness, WitnessEvent, WitnessTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Violated,
    Inconclusive,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Satisfied => "satisfied",
            Status::Violated => "violated",
            Status::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThadVerdict {
    pub id: String,
    pub status: Status,
    /// Satisfied because no reachable call matches the dependent pattern.
    pub trivial: bool,
    /// Reachable calls that (may) match the dependent pattern.
    pub sites: usize,
    /// Constants that matched one of the THAD's patterns only via an alias.
    pub via_alias: Vec<String>,
    pub witness: Option<WitnessTrace>,
    pub reason: Option<String>,
}

/// Check one THAD.
pub fn check_thad(prog: &ResolvedProgram, set: &ThadSet, thad: &Thad) -> ThadVerdict {
    check_thad_in(prog, set, thad, &thad_fixpoint(prog, set, thad))
}

/// Check one THAD given its monitor fixpoint.
fn check_thad_in(
    prog: &ResolvedProgram,
    set: &ThadSet,
    thad: &Thad,
    states: &[ThadState],
) -> ThadVerdict {
    let cfg = &prog.cfg;
    let mut sites = 0;
    let mut via_alias = BTreeSet::new();
    let mut violations: BTreeSet<(NodeId, Key)> = BTreeSet::new();
    let mut reasons: Vec<String> = Vec::new();

    for (node, state) in states.iter().enumerate() {
        let Some(map) = state else { continue };
        let mut site = false;
        for (done, env) in map {
            let Some(ev) = event_in(cfg, set, node, env) else {
                continue;
            };
            for pattern in [&thad.dependent, &thad.dependency] {
                if set.match_event(pattern, &ev) == Match::Yes {
                    if let (Some(want), Some(got)) = (pattern.constant(), ev.constant()) {
                        if want != got {
                            via_alias.insert(got.to_string());
                        }
                    }
                }
            }
            let m = set.match_event(&thad.dependent, &ev);
            if m == Match::No {
                continue;
            }
            site = true;
            let line = cfg.nodes[node].loc.line;
            let Some(key) = Key::for_thad(thad, ev.descriptor_token()) else {
                reasons.push(format!(
                    "unresolved descriptor in `{}` call at line {line}",
                    ev.routine
                ));
                continue;
            };
            if done.contains(&key) {
                continue;
            }
            if m == Match::Yes {
                violations.insert((node, key));
            } else {
                reasons.push(format!(
                    "unresolved discriminator in `{}` call at line {line}",
                    ev.routine
                ));
            }
        }
        sites += usize::from(site);
    }

    let mut verdict = ThadVerdict {
        id: thad.id.clone(),
        status: Status::Satisfied,
        trivial: sites == 0,
        sites,
        via_alias: via_alias.into_iter().collect(),
        witness: None,
        reason: None,
    };
    if !violations.is_empty() {
        let mut by_key: BTreeMap<Key, BTreeSet<NodeId>> = BTreeMap::new();
        for &(node, key) in &violations {
            by_key.entry(key).or_default().insert(node);
        }
        let best = by_key
            .iter()
            .filter_map(|(&key, nodes)| find_witness(prog, set, thad, states, nodes, key))
            .min_by_key(|w| {
                let last = *w.path.last().expect("paths end at the offending node");
                (w.path.len(), cfg.nodes[last].loc.line, last)
            });
        verdict.status = Status::Violated;
        verdict.witness = best;
    } else if !reasons.is_empty() {
        let mut seen = BTreeSet::new();
        reasons.retain(|r| seen.insert(r.clone()));
        verdict.status = Status::Inconclusive;
        verdict.reason = Some(reasons.join("; "));
    }
    verdict
}

/// Verdicts for every THAD of `set`, sorted by id (numeric suffixes in
/// numeric order).
pub fn check(prog: &ResolvedProgram, set: &ThadSet) -> Vec<ThadVerdict> {
    // The monitor only observes the dependency pattern and where the bound
    // descriptor comes from, so THADs agreeing on both share a fixpoint.
    type Shape<'a> = (&'a RoutinePattern, Option<&'a BindingSource>);
    let mut fixpoints: Vec<(Shape, Vec<ThadState>)> = Vec::new();
    let mut out: Vec<ThadVerdict> = set
        .thads
        .iter()
        .map(|t| {
            let key = (&t.dependency, t.binding.as_ref().map(|b| &b.source));
            let i = match fixpoints.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    fixpoints.push((key, thad_fixpoint(prog, set, t)));
                    fixpoints.len() - 1
                }
            };
            check_thad_in(prog, set, t, &fixpoints[i].1)
        })
        .collect();
    out.sort_by(|a, b| id_order(&a.id, &b.id));
    out
}

/// Order ids like `d2` before `d10`: by alphabetic prefix, then by numeric
/// suffix, then lexically.
pub fn id_order(a: &str, b: &str) -> std::cmp::Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (head, tail) = s.split_at(s.len() - digits);
        (head, tail.parse().ok())
    }
    split(a).cmp(&split(b)).then_with(|| a.cmp(b))
}
