//! Value analysis: constant propagation of discriminators, must-alias of
//! descriptor tokens, branch feasibility, and resolution of HAL call
//! events.

use std::collections::BTreeMap;

use serde::Serialize;

use super::ast::BinOp;
use super::cfg::{Cfg, EdgeLabel, NodeId, NodeKind, Rv};
use crate::dataflow::{solve, ForwardAnalysis};
use crate::model::{CallEvent, Descriptor, Discriminator, ThadSet, Token};

/// Abstract value of a variable at a program point.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Int(i64),
    /// One of several integers (sorted, between 2 and [`MAX_INTS`]).
    Ints(Vec<i64>),
    /// A specification constant whose integer value is not known.
    Named(String),
    /// A descriptor produced by a HAL call.
    Token(Token),
    Top,
}

/// Largest integer set tracked before giving up to [`Value::Top`].
pub const MAX_INTS: usize = 8;

impl Value {
    /// Value of a set of integers.
    pub fn from_ints(mut v: Vec<i64>) -> Value {
        v.sort_unstable();
        v.dedup();
        match v.len() {
            0 => Value::Top,
            1 => Value::Int(v[0]),
            n if n <= MAX_INTS => Value::Ints(v),
            _ => Value::Top,
        }
    }

    /// The integers this value may be, if it is integral.
    pub fn ints(&self) -> Option<Vec<i64>> {
        match self {
            Value::Int(v) => Some(vec![*v]),
            Value::Ints(v) => Some(v.clone()),
            _ => None,
        }
    }

    pub fn meet(&self, other: &Value) -> Value {
        if self == other {
            return self.clone();
        }
        match (self.ints(), other.ints()) {
            (Some(mut a), Some(b)) => {
                a.extend(b);
                Value::from_ints(a)
            }
            _ => Value::Top,
        }
    }
}

/// Variable environment; absent variables are [`Value::Top`].
pub type Env = im::OrdMap<String, Value>;

pub fn lookup(env: &Env, var: &str) -> Value {
    env.get(var).cloned().unwrap_or(Value::Top)
}

pub fn assign(env: &mut Env, var: &str, v: Value) {
    if v == Value::Top {
        env.remove(var);
    } else {
        env.insert(var.to_string(), v);
    }
}

pub fn eval(rv: &Rv, env: &Env, set: &ThadSet) -> Value {
    match rv {
        Rv::Int(v) => Value::Int(*v),
        Rv::Var(v) => lookup(env, v),
        Rv::Ext(name) => match set.constants.get(name) {
            Some(Some(v)) => Value::Int(*v),
            Some(None) => Value::Named(name.clone()),
            None => Value::Top,
        },
        Rv::Top => Value::Top,
        Rv::Unary(op, a) => match eval(a, env, set).ints() {
            Some(v) => Value::from_ints(v.into_iter().map(|x| op.fold(x)).collect()),
            None => Value::Top,
        },
        Rv::Binary(op, a, b) => {
            let a = eval(a, env, set);
            let xs = a.ints();
            match (op, &xs) {
                (BinOp::And, Some(v)) if v.iter().all(|x| *x == 0) => return Value::Int(0),
                (BinOp::Or, Some(v)) if v.iter().all(|x| *x != 0) => return Value::Int(1),
                _ => {}
            }
            let b = eval(b, env, set);
            match (xs, b.ints()) {
                (Some(xs), Some(ys)) => {
                    let mut out = Vec::new();
                    for x in &xs {
                        for y in &ys {
                            match op.fold(*x, *y) {
                                Some(r) => out.push(r),
                                None => return Value::Top,
                            }
                        }
                    }
                    Value::from_ints(out)
                }
                _ => match (a, b) {
                    (Value::Named(x), Value::Named(y))
                        if matches!(op, BinOp::Eq | BinOp::Ne) && x == y =>
                    {
                        Value::Int((*op == BinOp::Eq) as i64)
                    }
                    _ => Value::Top,
                },
            }
        }
        Rv::Cond(c, a, b) => match eval(c, env, set).ints() {
            Some(v) if v.iter().all(|x| *x == 0) => eval(b, env, set),
            Some(v) if v.iter().all(|x| *x != 0) => eval(a, env, set),
            _ => eval(a, env, set).meet(&eval(b, env, set)),
        },
    }
}

/// Whether out-edge `label` of a branch on `cond` can be taken.
pub fn edge_feasible(cond: &Value, label: EdgeLabel, all: &[EdgeLabel]) -> bool {
    let Some(vs) = cond.ints() else { return true };
    vs.iter().any(|v| match label {
        EdgeLabel::Then => *v != 0,
        EdgeLabel::Else => *v == 0,
        EdgeLabel::Case(c) => *v == c,
        EdgeLabel::Default => !all.contains(&EdgeLabel::Case(*v)),
        EdgeLabel::Seq => true,
    })
}

/// Token defined by a descriptor-returning call node.
pub fn node_token(node: NodeId) -> Token {
    Token(node as u32)
}

/// Build the event of a HAL call from its argument values; `None` when
/// `callee` is not a routine of `set`.
pub fn make_event(
    set: &ThadSet,
    callee: &str,
    args: &[Value],
    produced: Token,
) -> Option<CallEvent> {
    let r = set.routine(callee)?;
    let mut ev = CallEvent::new(callee);
    if let Some((i, _)) = r.discriminator_param() {
        ev.discriminator = Some(match args.get(i) {
            Some(Value::Int(v)) => set
                .constant_named(*v)
                .map_or(Discriminator::Value(*v), |n| {
                    Discriminator::Named(n.to_string())
                }),
            Some(Value::Named(n)) => Discriminator::Named(n.clone()),
            _ => Discriminator::Unknown,
        });
    }
    if let Some((i, _)) = r.descriptor_param() {
        ev.descriptor = Some(match args.get(i) {
            Some(Value::Token(t)) => Descriptor::Token(*t),
            _ => Descriptor::Unknown,
        });
    }
    if r.returns_descriptor {
        ev.produced = Some(produced);
    }
    Some(ev)
}

/// Environment after `node` given the one before it; variables in `dead`
/// (never read again) are dropped.
pub fn transfer_env(cfg: &Cfg, set: &ThadSet, node: NodeId, input: &Env, dead: &[String]) -> Env {
    let mut env = input.clone();
    match &cfg.nodes[node].kind {
        NodeKind::Assign { var, value } => {
            let v = eval(value, input, set);
            assign(&mut env, var, v);
        }
        NodeKind::Call {
            callee,
            dest: Some(d),
            ..
        } => {
            let v = match set.routine(callee) {
                Some(r) if r.returns_descriptor => Value::Token(node_token(node)),
                _ => Value::Top,
            };
            assign(&mut env, d, v);
        }
        _ => {}
    }
    for v in dead {
        env.remove(v);
    }
    env
}

fn rv_vars<'a>(rv: &'a Rv, out: &mut Vec<&'a str>) {
    match rv {
        Rv::Var(v) => out.push(v),
        Rv::Unary(_, a) => rv_vars(a, out),
        Rv::Binary(_, a, b) => {
            rv_vars(a, out);
            rv_vars(b, out);
        }
        Rv::Cond(a, b, c) => {
            rv_vars(a, out);
            rv_vars(b, out);
            rv_vars(c, out);
        }
        Rv::Int(_) | Rv::Ext(_) | Rv::Top => {}
    }
}

/// Per node, the variables read or written there (or live before it)
/// that no path from its successors reads before redefining.
pub fn dead_after(cfg: &Cfg) -> Vec<Vec<String>> {
    let mut names: BTreeMap<&str, usize> = BTreeMap::new();
    let mut uses: Vec<Vec<usize>> = Vec::with_capacity(cfg.nodes.len());
    let mut defs: Vec<Option<usize>> = Vec::with_capacity(cfg.nodes.len());
    for n in &cfg.nodes {
        let mut used = Vec::new();
        let def = match &n.kind {
            NodeKind::Assign { var, value } => {
                rv_vars(value, &mut used);
                Some(var.as_str())
            }
            NodeKind::Call { args, dest, .. } => {
                args.iter().for_each(|a| rv_vars(a, &mut used));
                dest.as_deref()
            }
            NodeKind::Branch { cond } => {
                rv_vars(cond, &mut used);
                None
            }
            _ => None,
        };
        let mut intern = |v| {
            let k = names.len();
            *names.entry(v).or_insert(k)
        };
        uses.push(used.into_iter().map(&mut intern).collect());
        defs.push(def.map(&mut intern));
    }
    let words = names.len().div_ceil(64);
    let mut live_in = vec![vec![0u64; words]; cfg.nodes.len()];
    let live_out_of = |live_in: &[Vec<u64>], i: usize| {
        let mut out = vec![0u64; words];
        for e in &cfg.nodes[i].succs {
            for (o, w) in out.iter_mut().zip(&live_in[e.to]) {
                *o |= w;
            }
        }
        out
    };
    let mut changed = true;
    while changed {
        changed = false;
        for i in (0..cfg.nodes.len()).rev() {
            let mut l = live_out_of(&live_in, i);
            if let Some(d) = defs[i] {
                l[d / 64] &= !(1 << (d % 64));
            }
            for &u in &uses[i] {
                l[u / 64] |= 1 << (u % 64);
            }
            if l != live_in[i] {
                live_in[i] = l;
                changed = true;
            }
        }
    }
    let by_id: Vec<&str> = {
        let mut v = vec![""; names.len()];
        for (k, i) in &names {
            v[*i] = k;
        }
        v
    };
    let bit = |set: &[u64], v: usize| set[v / 64] >> (v % 64) & 1 == 1;
    let live_out: Vec<Vec<u64>> = (0..cfg.nodes.len())
        .map(|i| live_out_of(&live_in, i))
        .collect();
    let mut dead: Vec<Vec<usize>> = (0..cfg.nodes.len())
        .map(|i| {
            let mut before = live_in[i].clone();
            if let Some(d) = defs[i] {
                before[d / 64] |= 1 << (d % 64);
            }
            (0..names.len())
                .filter(|&v| bit(&before, v) && !bit(&live_out[i], v))
                .collect()
        })
        .collect();
    // Edge feasibility reads a branch's condition after the branch, so its
    // variables die at the successors instead.
    for (i, n) in cfg.nodes.iter().enumerate() {
        if !matches!(n.kind, NodeKind::Branch { .. }) {
            continue;
        }
        let moved = std::mem::take(&mut dead[i]);
        for e in &n.succs {
            let s = e.to;
            dead[s].extend(moved.iter().copied().filter(|&v| !bit(&live_out[s], v)));
            dead[s].sort_unstable();
            dead[s].dedup();
        }
    }
    dead.into_iter()
        .map(|vs| vs.into_iter().map(|v| by_id[v].to_string()).collect())
        .collect()
}

/// Whether out-edge `edge` of `node` can be taken given the environment
/// after the node.
pub fn edge_allowed(cfg: &Cfg, set: &ThadSet, node: NodeId, edge: usize, output: &Env) -> bool {
    let n = &cfg.nodes[node];
    match &n.kind {
        NodeKind::Branch { cond } => {
            let c = eval(cond, output, set);
            let labels: Vec<EdgeLabel> = n.succs.iter().map(|e| e.label).collect();
            edge_feasible(&c, n.succs[edge].label, &labels)
        }
        _ => true,
    }
}

/// Event of a HAL call node evaluated in the environment before it.
pub fn event_in(cfg: &Cfg, set: &ThadSet, node: NodeId, input: &Env) -> Option<CallEvent> {
    match &cfg.nodes[node].kind {
        NodeKind::Call { callee, args, .. } => {
            let vals: Vec<Value> = args.iter().map(|a| eval(a, input, set)).collect();
            make_event(set, callee, &vals, node_token(node))
        }
        _ => None,
    }
}

/// Widening of environments at loop headers: variables whose value
/// changed become unknown.
pub fn widen_env(old: &Env, merged: Env) -> Env {
    merged
        .into_iter()
        .filter(|(k, v)| old.get(k) == Some(v))
        .collect()
}

/// Pointwise meet of environments.
pub fn meet_env(a: &Env, b: &Env) -> Env {
    if a.ptr_eq(b) || a == b {
        return a.clone();
    }
    let (a, b) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    a.iter()
        .filter_map(|(k, v)| {
            let m = v.meet(b.get(k)?);
            (m != Value::Top).then(|| (k.clone(), m))
        })
        .collect()
}

struct ValueAnalysis<'a> {
    set: &'a ThadSet,
    dead: &'a [Vec<String>],
}

impl ForwardAnalysis for ValueAnalysis<'_> {
    type State = Env;

    fn entry_state(&self) -> Env {
        Env::new()
    }

    fn transfer(&self, cfg: &Cfg, node: NodeId, input: &Env) -> Env {
        transfer_env(cfg, self.set, node, input, &self.dead[node])
    }

    fn edge(&self, cfg: &Cfg, node: NodeId, edge: usize, output: &Env) -> Option<Env> {
        edge_allowed(cfg, self.set, node, edge, output).then(|| output.clone())
    }

    fn meet(&self, a: &Env, b: &Env) -> Env {
        meet_env(a, b)
    }

    fn widen(&self, old: &Env, merged: Env) -> Env {
        widen_env(old, merged)
    }
}

/// Result of value analysis over an inlined program.
#[derive(Debug, Clone)]
pub struct Resolution {
    /// Environment before each node; `None` for nodes no feasible path
    /// reaches.
    pub input: Vec<Option<Env>>,
    /// Event of every reachable HAL call node.
    pub events: Vec<Option<CallEvent>>,
    /// Per node, per out-edge: can the edge be taken?
    pub feasible: Vec<Vec<bool>>,
    /// Per node, the variables dead after it (see [`dead_after`]).
    pub dead: Vec<Vec<String>>,
}

impl Resolution {
    pub fn reachable(&self, node: NodeId) -> bool {
        self.input[node].is_some()
    }
}

pub fn resolve(cfg: &Cfg, set: &ThadSet) -> Resolution {
    let dead = dead_after(cfg);
    let sol = solve(cfg, &ValueAnalysis { set, dead: &dead });
    let mut events = vec![None; cfg.nodes.len()];
    let mut feasible = Vec::with_capacity(cfg.nodes.len());
    for (i, n) in cfg.nodes.iter().enumerate() {
        let Some(inp) = &sol.input[i] else {
            feasible.push(vec![false; n.succs.len()]);
            continue;
        };
        events[i] = event_in(cfg, set, i, inp);
        let out = sol.output[i]
            .as_ref()
            .expect("reachable nodes have outputs");
        feasible.push(
            (0..n.succs.len())
                .map(|e| edge_allowed(cfg, set, i, e, out))
                .collect(),
        );
    }
    Resolution {
        input: sol.input,
        events,
        feasible,
        dead,
    }
}

/// Descriptor token flow: which call defines which token, and which
/// variables must hold which token before each node.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TokenFlow {
    pub definitions: BTreeMap<NodeId, Token>,
    pub must_alias: Vec<Option<BTreeMap<String, Token>>>,
}

pub fn token_flow(cfg: &Cfg, res: &Resolution) -> TokenFlow {
    let mut definitions = BTreeMap::new();
    for (i, ev) in res.events.iter().enumerate() {
        if let Some(t) = ev.as_ref().and_then(|e| e.produced) {
            definitions.insert(i, t);
        }
    }
    let must_alias = res
        .input
        .iter()
        .map(|env| {
            env.as_ref().map(|env| {
                env.iter()
                    .filter_map(|(k, v)| match v {
                        Value::Token(t) => Some((k.clone(), *t)),
                        _ => None,
                    })
                    .collect()
            })
        })
        .collect();
    debug_assert_eq!(res.input.len(), cfg.nodes.len());
    TokenFlow {
        definitions,
        must_alias,
    }
}
