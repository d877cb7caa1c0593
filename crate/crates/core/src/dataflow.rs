//! Generic forward dataflow solver over a [`Cfg`].
//!
//! States start at "unreachable" (`None`) everywhere except the entry node
//! and only descend through `meet` (and `widen` on back edges), so any
//! monotone analysis over a finite-height lattice terminates.

use std::collections::BTreeSet;

use crate::frontend::cfg::{Cfg, NodeId};

pub trait ForwardAnalysis {
    type State: Clone + PartialEq;

    fn entry_state(&self) -> Self::State;

    /// State after `node` executes, given the state before it.
    fn transfer(&self, cfg: &Cfg, node: NodeId, input: &Self::State) -> Self::State;

    /// State flowing along out-edge `edge` of `node`; `None` when the edge
    /// cannot be taken in `output`.
    fn edge(
        &self,
        _cfg: &Cfg,
        _node: NodeId,
        _edge: usize,
        output: &Self::State,
    ) -> Option<Self::State> {
        Some(output.clone())
    }

    fn meet(&self, a: &Self::State, b: &Self::State) -> Self::State;

    /// Accelerate convergence where a back edge re-enters a loop header:
    /// `old` is the header's previous state, `merged` its new meet.
    fn widen(&self, _old: &Self::State, merged: Self::State) -> Self::State {
        merged
    }
}

#[derive(Debug, Clone)]
pub struct Solution<S> {
    /// State before each node; `None` for unreachable nodes.
    pub input: Vec<Option<S>>,
    /// State after each node.
    pub output: Vec<Option<S>>,
}

/// Reverse postorder of the nodes reachable from entry.
pub fn reverse_postorder(cfg: &Cfg) -> Vec<NodeId> {
    let mut seen = vec![false; cfg.nodes.len()];
    let mut order = Vec::with_capacity(cfg.nodes.len());
    // Iterative DFS with an explicit successor cursor.
    let mut stack = vec![(cfg.entry, 0usize)];
    seen[cfg.entry] = true;
    while let Some((n, i)) = stack.pop() {
        if let Some(e) = cfg.nodes[n].succs.get(i) {
            stack.push((n, i + 1));
            if !seen[e.to] {
                seen[e.to] = true;
                stack.push((e.to, 0));
            }
        } else {
            order.push(n);
        }
    }
    order.reverse();
    order
}

pub fn solve<A: ForwardAnalysis>(cfg: &Cfg, analysis: &A) -> Solution<A::State> {
    let n = cfg.nodes.len();
    let rpo = reverse_postorder(cfg);
    let mut rank = vec![usize::MAX; n];
    for (i, &node) in rpo.iter().enumerate() {
        rank[node] = i;
    }
    let mut input: Vec<Option<A::State>> = vec![None; n];
    let mut output: Vec<Option<A::State>> = vec![None; n];
    input[cfg.entry] = Some(analysis.entry_state());
    let mut work: BTreeSet<(usize, NodeId)> = BTreeSet::new();
    work.insert((rank[cfg.entry], cfg.entry));
    while let Some((_, node)) = work.pop_first() {
        let Some(inp) = &input[node] else { continue };
        let out = analysis.transfer(cfg, node, inp);
        for (i, e) in cfg.nodes[node].succs.iter().enumerate() {
            let Some(s) = analysis.edge(cfg, node, i, &out) else {
                continue;
            };
            let merged = match &input[e.to] {
                None => s,
                Some(old) if e.back => analysis.widen(old, analysis.meet(old, &s)),
                Some(old) => analysis.meet(old, &s),
            };
            if input[e.to].as_ref() != Some(&merged) {
                input[e.to] = Some(merged);
                work.insert((rank[e.to], e.to));
            }
        }
        output[node] = Some(out);
    }
    Solution { input, output }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    /// Counts, per node, whether every path to it passed a call node.
    struct MustCall;

    impl ForwardAnalysis for MustCall {
        type State = bool;
        fn entry_state(&self) -> bool {
            false
        }
        fn transfer(&self, cfg: &Cfg, node: NodeId, input: &bool) -> bool {
            *input
                || matches!(
                    cfg.nodes[node].kind,
                    crate::frontend::cfg::NodeKind::Call { .. }
                )
        }
        fn meet(&self, a: &bool, b: &bool) -> bool {
            *a && *b
        }
    }

    #[test]
    fn must_analysis_meets_at_joins() {
        let m = parse_program(
            "int main(int c){ if (c) f(); g(); while (c) { h(); } return 0; }",
            "t.c",
        )
        .unwrap();
        let cfg = m.inline(16).unwrap();
        let sol = solve(&cfg, &MustCall);
        for (i, n) in cfg.nodes.iter().enumerate() {
            if let crate::frontend::cfg::NodeKind::Call { callee, .. } = &n.kind {
                let expect = callee == "h";
                assert_eq!(sol.input[i], Some(expect), "{callee}");
            }
        }
        assert_eq!(sol.input[cfg.exit], Some(true));
    }

    #[test]
    fn rpo_starts_at_entry_and_covers_reachable_nodes() {
        let m = parse_program(
            "int main(int c){ for (;c;) { if (c) break; } return 1; }",
            "t.c",
        )
        .unwrap();
        let cfg = m.inline(16).unwrap();
        let rpo = reverse_postorder(&cfg);
        assert_eq!(rpo[0], cfg.entry);
        assert_eq!(rpo.len(), cfg.reachable().iter().filter(|r| **r).count());
    }
}
