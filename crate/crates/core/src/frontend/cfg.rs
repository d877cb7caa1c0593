//! Control-flow graphs and lowering from the syntax tree.
//!
//! Expressions are flattened into three-address form: calls and
//! assignments nested in an expression become their own nodes, evaluated
//! left to right, and what remains is a side-effect-free [`Rv`].

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::ast::*;
use super::{FrontendError, FrontendErrorKind};

pub type NodeId = usize;

/// Prefix of global variable names inside a CFG; locals never start with it.
pub const GLOBAL_PREFIX: &str = "::";
/// Variable receiving a function's return value.
pub const RETURN_VAR: &str = "$ret";

/// Routines that never return to their caller.
const HALTING: &[&str] = &[
    "exit",
    "abort",
    "_exit",
    "_Exit",
    "quick_exit",
    "pthread_exit",
];

/// Side-effect-free right-hand side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Rv {
    Int(i64),
    Var(String),
    /// Identifier declared nowhere in the program: resolved against the
    /// specification's constants, otherwise unknown.
    Ext(String),
    Top,
    Unary(UnOp, Box<Rv>),
    Binary(BinOp, Box<Rv>, Box<Rv>),
    Cond(Box<Rv>, Box<Rv>, Box<Rv>),
}

impl Rv {
    pub(crate) fn rename(&mut self, f: &impl Fn(&str) -> String) {
        match self {
            Rv::Var(v) => *v = f(v),
            Rv::Unary(_, a) => a.rename(f),
            Rv::Binary(_, a, b) => {
                a.rename(f);
                b.rename(f);
            }
            Rv::Cond(a, b, c) => {
                a.rename(f);
                b.rename(f);
                c.rename(f);
            }
            Rv::Int(_) | Rv::Ext(_) | Rv::Top => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    /// Call of a function defined in the program; removed by inlining.
    User,
    /// Never returns; its only successor is the exit node.
    Halting,
    /// Anything else, including HAL routines.
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NodeKind {
    Entry,
    Exit,
    Join,
    Assign {
        var: String,
        value: Rv,
    },
    Call {
        callee: String,
        args: Vec<Rv>,
        dest: Option<String>,
        call: CallKind,
    },
    Branch {
        cond: Rv,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    Seq,
    Then,
    Else,
    Case(i64),
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub to: NodeId,
    pub label: EdgeLabel,
    /// Closes a loop.
    pub back: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Node {
    pub kind: NodeKind,
    pub loc: Loc,
    /// Function the node was lowered from (before inlining).
    pub function: String,
    pub succs: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cfg {
    pub nodes: Vec<Node>,
    pub entry: NodeId,
    pub exit: NodeId,
}

impl Cfg {
    fn new(function: &str, start: Loc, end: Loc) -> Self {
        let mk = |kind, loc| Node {
            kind,
            loc,
            function: function.to_string(),
            succs: Vec::new(),
        };
        Cfg {
            nodes: vec![mk(NodeKind::Entry, start), mk(NodeKind::Exit, end)],
            entry: 0,
            exit: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(&mut self, kind: NodeKind, loc: Loc, function: &str) -> NodeId {
        self.nodes.push(Node {
            kind,
            loc,
            function: function.to_string(),
            succs: Vec::new(),
        });
        self.nodes.len() - 1
    }

    pub(crate) fn link(&mut self, from: NodeId, to: NodeId, label: EdgeLabel, back: bool) {
        self.nodes[from].succs.push(Edge { to, label, back });
    }

    pub fn preds(&self) -> Vec<Vec<NodeId>> {
        let mut p = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for e in &n.succs {
                p[e.to].push(i);
            }
        }
        p
    }

    pub fn has_loops(&self) -> bool {
        self.nodes.iter().any(|n| n.succs.iter().any(|e| e.back))
    }

    /// Ids of call nodes, in id order.
    pub fn call_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.kind, NodeKind::Call { .. }))
            .map(|(i, _)| i)
    }

    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.entry];
        seen[self.entry] = true;
        while let Some(n) = stack.pop() {
            for e in &self.nodes[n].succs {
                if !seen[e.to] {
                    seen[e.to] = true;
                    stack.push(e.to);
                }
            }
        }
        seen
    }

    /// Drop nodes unreachable from entry (the exit node is always kept) and
    /// renumber the rest, preserving relative order.
    pub fn prune(&mut self) {
        let mut keep = self.reachable();
        keep[self.exit] = true;
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for (i, k) in keep.iter().enumerate() {
            if *k {
                map[i] = next;
                next += 1;
            }
        }
        let nodes = std::mem::take(&mut self.nodes);
        self.nodes = nodes
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep[*i])
            .map(|(_, mut n)| {
                for e in &mut n.succs {
                    e.to = map[e.to];
                }
                n
            })
            .collect();
        self.entry = map[self.entry];
        self.exit = map[self.exit];
    }

    /// Structural well-formedness: exit has no successors, branch edges
    /// are labeled consistently, and every node but exit is reachable.
    pub fn check_well_formed(&self) -> Result<(), String> {
        if !self.nodes[self.exit].succs.is_empty() {
            return Err("exit node has successors".into());
        }
        let reach = self.reachable();
        for (i, n) in self.nodes.iter().enumerate() {
            if !reach[i] && i != self.exit {
                return Err(format!("node {i} is unreachable"));
            }
            match &n.kind {
                NodeKind::Branch { .. } => {
                    let labels: Vec<_> = n.succs.iter().map(|e| e.label).collect();
                    let if_shape = labels.len() == 2
                        && labels.contains(&EdgeLabel::Then)
                        && labels.contains(&EdgeLabel::Else);
                    let switch_shape = labels.iter().filter(|l| **l == EdgeLabel::Default).count()
                        == 1
                        && labels
                            .iter()
                            .all(|l| matches!(l, EdgeLabel::Case(_) | EdgeLabel::Default));
                    if !if_shape && !switch_shape {
                        return Err(format!("branch node {i} has edges {labels:?}"));
                    }
                }
                NodeKind::Exit => {}
                _ => {
                    if i != self.exit && (n.succs.len() != 1 || n.succs[0].label != EdgeLabel::Seq)
                    {
                        return Err(format!("node {i} must have exactly one plain successor"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionCfg {
    pub name: String,
    /// Unique variable names of the parameters, in order.
    pub params: Vec<String>,
    pub cfg: Cfg,
}

/// Lowering context shared by all functions of a unit.
pub(crate) struct UnitInfo<'a> {
    pub defines: HashMap<&'a str, &'a Expr>,
    pub user_functions: HashSet<&'a str>,
    pub noreturn: HashSet<&'a str>,
    pub globals: HashSet<&'a str>,
    pub global_addr_taken: HashSet<String>,
}

impl<'a> UnitInfo<'a> {
    pub fn new(unit: &'a Unit) -> Self {
        let mut global_addr_taken = HashSet::new();
        for f in &unit.functions {
            collect_addr_taken_stmts(&f.body, &mut global_addr_taken);
        }
        UnitInfo {
            defines: unit.defines.iter().map(|(n, e)| (n.as_str(), e)).collect(),
            user_functions: unit.functions.iter().map(|f| f.name.as_str()).collect(),
            noreturn: unit
                .prototypes
                .iter()
                .filter(|p| p.noreturn)
                .map(|p| p.name.as_str())
                .collect(),
            globals: unit.globals.iter().map(|g| g.name.as_str()).collect(),
            global_addr_taken,
        }
    }

    /// Fold an integer constant expression over `#define`s and enumerators.
    pub fn const_eval(&self, e: &Expr) -> Option<i64> {
        self.const_eval_depth(e, 0)
    }

    fn const_eval_depth(&self, e: &Expr, depth: usize) -> Option<i64> {
        if depth > 64 {
            return None;
        }
        match e {
            Expr::Int(v) => Some(*v),
            Expr::Ident(n, _) => self
                .defines
                .get(n.as_str())
                .and_then(|d| self.const_eval_depth(d, depth + 1)),
            Expr::Unary(op, a) => Some(op.fold(self.const_eval_depth(a, depth)?)),
            Expr::Binary(op, a, b) => op.fold(
                self.const_eval_depth(a, depth)?,
                self.const_eval_depth(b, depth)?,
            ),
            Expr::Cast(a) => self.const_eval_depth(a, depth),
            Expr::Cond(c, a, b) => {
                if self.const_eval_depth(c, depth)? != 0 {
                    self.const_eval_depth(a, depth)
                } else {
                    self.const_eval_depth(b, depth)
                }
            }
            _ => None,
        }
    }
}

fn collect_addr_taken_stmts(stmts: &[Stmt], out: &mut HashSet<String>) {
    for s in stmts {
        collect_addr_taken_stmt(s, out);
    }
}

fn collect_addr_taken_stmt(s: &Stmt, out: &mut HashSet<String>) {
    let mut e = |x: &Expr| collect_addr_taken(x, out);
    match s {
        Stmt::Decl { init: Some(i), .. } => e(i),
        Stmt::Expr(x, _) => e(x),
        Stmt::If {
            cond, then, els, ..
        } => {
            e(cond);
            collect_addr_taken_stmt(then, out);
            if let Some(x) = els {
                collect_addr_taken_stmt(x, out);
            }
        }
        Stmt::While { cond, body, .. } | Stmt::DoWhile { cond, body, .. } => {
            e(cond);
            collect_addr_taken_stmt(body, out);
        }
        Stmt::For {
            init,
            cond,
            step,
            body,
            ..
        } => {
            for x in [cond, step].into_iter().flatten() {
                collect_addr_taken(x, out);
            }
            collect_addr_taken_stmts(init, out);
            collect_addr_taken_stmt(body, out);
        }
        Stmt::Switch {
            scrutinee, arms, ..
        } => {
            e(scrutinee);
            for a in arms {
                collect_addr_taken_stmts(&a.body, out);
            }
        }
        Stmt::Return(Some(x), _) => e(x),
        Stmt::Block(b) => collect_addr_taken_stmts(b, out),
        _ => {}
    }
}

fn collect_addr_taken(e: &Expr, out: &mut HashSet<String>) {
    match e {
        Expr::AddrOf(inner) => {
            if let Expr::Ident(n, _) = inner.as_ref() {
                out.insert(n.clone());
            }
            collect_addr_taken(inner, out);
        }
        Expr::Call { args, .. } => args.iter().for_each(|a| collect_addr_taken(a, out)),
        Expr::Unary(_, a) | Expr::Cast(a) | Expr::Deref(a) | Expr::Member(a, _) => {
            collect_addr_taken(a, out)
        }
        Expr::Binary(_, a, b) | Expr::Comma(a, b) | Expr::Index(a, b) => {
            collect_addr_taken(a, out);
            collect_addr_taken(b, out);
        }
        Expr::Assign { target, value, .. } => {
            collect_addr_taken(target, out);
            collect_addr_taken(value, out);
        }
        Expr::IncDec { target, .. } => collect_addr_taken(target, out),
        Expr::Cond(a, b, c) => {
            collect_addr_taken(a, out);
            collect_addr_taken(b, out);
            collect_addr_taken(c, out);
        }
        Expr::InitList(items) => items.iter().for_each(|a| collect_addr_taken(a, out)),
        Expr::Int(_) | Expr::Float | Expr::Str | Expr::Ident(..) | Expr::SizeOf => {}
    }
}

fn has_side_effects(e: &Expr) -> bool {
    match e {
        Expr::Call { .. } | Expr::Assign { .. } | Expr::IncDec { .. } => true,
        Expr::Unary(_, a)
        | Expr::Cast(a)
        | Expr::Deref(a)
        | Expr::Member(a, _)
        | Expr::AddrOf(a) => has_side_effects(a),
        Expr::Binary(_, a, b) | Expr::Comma(a, b) | Expr::Index(a, b) => {
            has_side_effects(a) || has_side_effects(b)
        }
        Expr::Cond(a, b, c) => has_side_effects(a) || has_side_effects(b) || has_side_effects(c),
        Expr::InitList(items) => items.iter().any(has_side_effects),
        Expr::Int(_) | Expr::Float | Expr::Str | Expr::Ident(..) | Expr::SizeOf => false,
    }
}

type Pending = Vec<(NodeId, EdgeLabel)>;

enum Ctx {
    Loop { breaks: Pending, continues: Pending },
    Switch { breaks: Pending },
}

struct Lower<'u, 'a> {
    info: &'u UnitInfo<'a>,
    cfg: Cfg,
    func: String,
    frontier: Pending,
    returns: Pending,
    scopes: Vec<HashMap<String, String>>,
    uses: BTreeMap<String, usize>,
    temps: usize,
    addr_taken: HashSet<String>,
    ctx: Vec<Ctx>,
    expanding: Vec<String>,
}

fn unsupported(loc: Loc, what: &str) -> FrontendError {
    FrontendError {
        kind: FrontendErrorKind::UnsupportedConstruct,
        loc,
        message: format!("{what} is outside the supported C subset"),
    }
}

/// Lower one function definition into its own CFG.
pub(crate) fn lower_function(
    info: &UnitInfo<'_>,
    f: &Function,
) -> Result<FunctionCfg, FrontendError> {
    let mut addr_taken = HashSet::new();
    collect_addr_taken_stmts(&f.body, &mut addr_taken);
    let mut l = Lower {
        info,
        cfg: Cfg::new(&f.name, f.loc, f.end),
        func: f.name.clone(),
        frontier: vec![(0, EdgeLabel::Seq)],
        returns: Vec::new(),
        scopes: vec![HashMap::new()],
        uses: BTreeMap::new(),
        temps: 0,
        addr_taken,
        ctx: Vec::new(),
        expanding: Vec::new(),
    };
    let params = f.params.iter().map(|p| l.declare(p)).collect();
    l.block(&f.body)?;
    let mut tail = std::mem::take(&mut l.frontier);
    tail.append(&mut l.returns);
    let exit = l.cfg.exit;
    l.connect(tail, exit, f.end);
    l.cfg.prune();
    Ok(FunctionCfg {
        name: f.name.clone(),
        params,
        cfg: l.cfg,
    })
}

/// Lower the initializer of a global; the value must not have side effects.
pub(crate) fn lower_global_init(info: &UnitInfo<'_>, g: &Global) -> Result<Rv, FrontendError> {
    let Some(init) = &g.init else {
        return Ok(Rv::Int(0));
    };
    if has_side_effects(init) {
        return Err(unsupported(g.loc, "global initializer with side effects"));
    }
    if info.global_addr_taken.contains(&g.name) {
        return Ok(Rv::Top);
    }
    let mut l = Lower {
        info,
        cfg: Cfg::new("", g.loc, g.loc),
        func: String::new(),
        frontier: vec![(0, EdgeLabel::Seq)],
        returns: Vec::new(),
        scopes: vec![HashMap::new()],
        uses: BTreeMap::new(),
        temps: 0,
        addr_taken: HashSet::new(),
        ctx: Vec::new(),
        expanding: Vec::new(),
    };
    l.expr(init, g.loc)
}

impl<'u, 'a> Lower<'u, 'a> {
    fn declare(&mut self, name: &str) -> String {
        let n = self.uses.entry(name.to_string()).or_insert(0);
        let unique = if *n == 0 {
            name.to_string()
        } else {
            format!("{name}#{n}")
        };
        *n += 1;
        self.scopes
            .last_mut()
            .expect("scope stack is never empty")
            .insert(name.to_string(), unique.clone());
        unique
    }

    fn lookup(&self, name: &str) -> Option<&String> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn temp(&mut self) -> String {
        self.temps += 1;
        format!("$t{}", self.temps)
    }

    /// Connect pending edges to `target`, through a join node when several
    /// edges meet.
    fn connect(&mut self, pending: Pending, target: NodeId, loc: Loc) {
        if pending.len() > 1 {
            let j = self.cfg.push(NodeKind::Join, loc, &self.func);
            for (src, label) in pending {
                self.cfg.link(src, j, label, false);
            }
            self.cfg.link(j, target, EdgeLabel::Seq, false);
        } else {
            for (src, label) in pending {
                self.cfg.link(src, target, label, false);
            }
        }
    }

    fn add(&mut self, kind: NodeKind, loc: Loc) -> NodeId {
        let live = self.live();
        let id = self.cfg.push(kind, loc, &self.func);
        let pending = std::mem::take(&mut self.frontier);
        self.connect(pending, id, loc);
        if live {
            // A node added in dead code stays unreachable and is pruned.
            self.frontier = vec![(id, EdgeLabel::Seq)];
        }
        id
    }

    /// A join node that later back edges will target.
    fn loop_header(&mut self, loc: Loc) -> NodeId {
        self.add(NodeKind::Join, loc)
    }

    fn close_loop(&mut self, pending: Pending, header: NodeId) {
        for (src, label) in pending {
            self.cfg.link(src, header, label, true);
        }
    }

    fn live(&self) -> bool {
        !self.frontier.is_empty()
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), FrontendError> {
        self.scopes.push(HashMap::new());
        let r = stmts.iter().try_for_each(|s| self.stmt(s));
        self.scopes.pop();
        r
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), FrontendError> {
        if let Stmt::Decl { name, init, loc } = s {
            // Evaluate the initializer before the name comes into scope.
            let value = match init {
                Some(e) if self.live() => Some(self.expr(e, *loc)?),
                _ => None,
            };
            let var = self.declare(name);
            if let Some(v) = value {
                let v = if self.addr_taken.contains(name) {
                    Rv::Top
                } else {
                    v
                };
                self.add(NodeKind::Assign { var, value: v }, *loc);
            }
            return Ok(());
        }
        if !self.live() {
            // Dead code: nothing can reach it without labels.
            return Ok(());
        }
        match s {
            Stmt::Decl { .. } => unreachable!("handled above"),
            Stmt::Empty => Ok(()),
            Stmt::Expr(e, loc) => self.effect(e, *loc),
            Stmt::Block(b) => self.block(b),
            Stmt::If {
                cond,
                then,
                els,
                loc,
            } => {
                let c = self.expr(cond, *loc)?;
                if let Rv::Int(v) = c {
                    return match (v != 0, els) {
                        (true, _) => self.scoped(then),
                        (false, Some(e)) => self.scoped(e),
                        (false, None) => Ok(()),
                    };
                }
                let b = self.add(NodeKind::Branch { cond: c }, *loc);
                self.frontier = vec![(b, EdgeLabel::Then)];
                self.scoped(then)?;
                let mut after = std::mem::take(&mut self.frontier);
                self.frontier = vec![(b, EdgeLabel::Else)];
                if let Some(e) = els {
                    self.scoped(e)?;
                }
                after.append(&mut self.frontier);
                self.frontier = after;
                Ok(())
            }
            Stmt::While { cond, body, loc } => {
                let h = self.loop_header(*loc);
                let c = self.expr(cond, *loc)?;
                self.loop_body(h, c, body, None, *loc)
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
                loc,
            } => {
                self.scopes.push(HashMap::new());
                let r = (|| {
                    for s in init {
                        self.stmt(s)?;
                    }
                    if !self.live() {
                        return Ok(());
                    }
                    let h = self.loop_header(*loc);
                    let c = match cond {
                        Some(c) => self.expr(c, *loc)?,
                        None => Rv::Int(1),
                    };
                    self.loop_body(h, c, body, step.as_ref(), *loc)
                })();
                self.scopes.pop();
                r
            }
            Stmt::DoWhile { body, cond, loc } => {
                let h = self.loop_header(*loc);
                self.ctx.push(Ctx::Loop {
                    breaks: Vec::new(),
                    continues: Vec::new(),
                });
                let r = self.scoped(body);
                let Some(Ctx::Loop {
                    breaks,
                    mut continues,
                }) = self.ctx.pop()
                else {
                    unreachable!("loop context pushed above")
                };
                r?;
                self.frontier.append(&mut continues);
                if self.live() {
                    let c = self.expr(cond, *loc)?;
                    match c {
                        Rv::Int(v) if v != 0 => {
                            let p = std::mem::take(&mut self.frontier);
                            self.close_loop(p, h);
                        }
                        Rv::Int(_) => {}
                        c => {
                            let b = self.add(NodeKind::Branch { cond: c }, *loc);
                            self.close_loop(vec![(b, EdgeLabel::Then)], h);
                            self.frontier = vec![(b, EdgeLabel::Else)];
                        }
                    }
                }
                self.frontier.extend(breaks);
                Ok(())
            }
            Stmt::Switch {
                scrutinee,
                arms,
                loc,
            } => self.switch(scrutinee, arms, *loc),
            Stmt::Break(loc) => {
                let pending = std::mem::take(&mut self.frontier);
                match self.ctx.last_mut() {
                    Some(Ctx::Loop { breaks, .. }) | Some(Ctx::Switch { breaks }) => {
                        breaks.extend(pending);
                        Ok(())
                    }
                    None => Err(FrontendError {
                        kind: FrontendErrorKind::SyntaxError,
                        loc: *loc,
                        message: "`break` outside of a loop or switch".into(),
                    }),
                }
            }
            Stmt::Continue(loc) => {
                let pending = std::mem::take(&mut self.frontier);
                let target = self.ctx.iter_mut().rev().find_map(|c| match c {
                    Ctx::Loop { continues, .. } => Some(continues),
                    Ctx::Switch { .. } => None,
                });
                match target {
                    Some(c) => {
                        c.extend(pending);
                        Ok(())
                    }
                    None => Err(FrontendError {
                        kind: FrontendErrorKind::SyntaxError,
                        loc: *loc,
                        message: "`continue` outside of a loop".into(),
                    }),
                }
            }
            Stmt::Return(value, loc) => {
                if let Some(v) = value {
                    let rv = self.expr(v, *loc)?;
                    if self.live() {
                        self.add(
                            NodeKind::Assign {
                                var: RETURN_VAR.into(),
                                value: rv,
                            },
                            *loc,
                        );
                    }
                }
                let p = std::mem::take(&mut self.frontier);
                self.returns.extend(p);
                Ok(())
            }
        }
    }

    fn scoped(&mut self, s: &Stmt) -> Result<(), FrontendError> {
        self.scopes.push(HashMap::new());
        let r = self.stmt(s);
        self.scopes.pop();
        r
    }

    /// Shared tail of `while` and `for`: the condition value has been
    /// computed at the end of the header block.
    fn loop_body(
        &mut self,
        header: NodeId,
        cond: Rv,
        body: &Stmt,
        step: Option<&Expr>,
        loc: Loc,
    ) -> Result<(), FrontendError> {
        let mut exits = Vec::new();
        match cond {
            Rv::Int(0) => return Ok(()),
            Rv::Int(_) => {}
            c => {
                let b = self.add(NodeKind::Branch { cond: c }, loc);
                self.frontier = vec![(b, EdgeLabel::Then)];
                exits.push((b, EdgeLabel::Else));
            }
        }
        if !self.live() {
            // The condition itself never returns (e.g. calls exit).
            self.frontier = exits;
            return Ok(());
        }
        self.ctx.push(Ctx::Loop {
            breaks: Vec::new(),
            continues: Vec::new(),
        });
        let r = self.scoped(body);
        let Some(Ctx::Loop {
            breaks,
            mut continues,
        }) = self.ctx.pop()
        else {
            unreachable!("loop context pushed above")
        };
        r?;
        self.frontier.append(&mut continues);
        if let Some(step) = step {
            if self.live() {
                self.effect(step, loc)?;
            }
        }
        let p = std::mem::take(&mut self.frontier);
        self.close_loop(p, header);
        exits.extend(breaks);
        self.frontier = exits;
        Ok(())
    }

    fn switch(
        &mut self,
        scrutinee: &Expr,
        arms: &[SwitchArm],
        loc: Loc,
    ) -> Result<(), FrontendError> {
        let c = self.expr(scrutinee, loc)?;
        if !self.live() {
            return Ok(());
        }
        let s = self.add(NodeKind::Branch { cond: c }, loc);
        self.frontier.clear();
        let mut seen = HashSet::new();
        let mut has_default = false;
        self.ctx.push(Ctx::Switch { breaks: Vec::new() });
        self.scopes.push(HashMap::new());
        let r = (|| {
            for arm in arms {
                for label in &arm.labels {
                    match label {
                        CaseLabel::Default => {
                            has_default = true;
                            self.frontier.push((s, EdgeLabel::Default));
                        }
                        CaseLabel::Value(e) => {
                            let v = self
                                .info
                                .const_eval(e)
                                .ok_or_else(|| unsupported(arm.loc, "non-constant `case` label"))?;
                            if !seen.insert(v) {
                                return Err(FrontendError {
                                    kind: FrontendErrorKind::SyntaxError,
                                    loc: arm.loc,
                                    message: format!("duplicate `case` value {v}"),
                                });
                            }
                            self.frontier.push((s, EdgeLabel::Case(v)));
                        }
                    }
                }
                for st in &arm.body {
                    self.stmt(st)?;
                }
            }
            Ok(())
        })();
        self.scopes.pop();
        let Some(Ctx::Switch { breaks }) = self.ctx.pop() else {
            unreachable!("switch context pushed above")
        };
        r?;
        self.frontier.extend(breaks);
        if !has_default {
            self.frontier.push((s, EdgeLabel::Default));
        }
        Ok(())
    }

    /// Lower an expression evaluated only for its side effects.
    fn effect(&mut self, e: &Expr, loc: Loc) -> Result<(), FrontendError> {
        match e {
            Expr::Call { callee, args, loc } => self.call(callee, args, *loc, false).map(|_| ()),
            Expr::Cast(inner) => self.effect(inner, loc),
            Expr::Comma(a, b) => {
                self.effect(a, loc)?;
                self.effect(b, loc)
            }
            _ => self.expr(e, loc).map(|_| ()),
        }
    }

    fn call(
        &mut self,
        callee: &str,
        args: &[Expr],
        loc: Loc,
        want_value: bool,
    ) -> Result<Rv, FrontendError> {
        let mut rvs = Vec::with_capacity(args.len());
        for a in args {
            rvs.push(self.expr(a, loc)?);
        }
        if !self.live() {
            return Ok(Rv::Top);
        }
        let kind = if self.info.user_functions.contains(callee) {
            CallKind::User
        } else if HALTING.contains(&callee) || self.info.noreturn.contains(callee) {
            CallKind::Halting
        } else {
            CallKind::External
        };
        let dest = (want_value && kind != CallKind::Halting).then(|| self.temp());
        let id = self.add(
            NodeKind::Call {
                callee: callee.to_string(),
                args: rvs,
                dest: dest.clone(),
                call: kind,
            },
            loc,
        );
        if kind == CallKind::Halting {
            self.frontier.clear();
            let exit = self.cfg.exit;
            self.cfg.link(id, exit, EdgeLabel::Seq, false);
        }
        Ok(dest.map_or(Rv::Top, Rv::Var))
    }

    fn var_of(&self, name: &str) -> Option<String> {
        if let Some(v) = self.lookup(name) {
            return Some(v.clone());
        }
        self.info
            .globals
            .contains(name)
            .then(|| format!("{GLOBAL_PREFIX}{name}"))
    }

    fn is_addr_taken(&self, name: &str, var: &str) -> bool {
        if var.starts_with(GLOBAL_PREFIX) {
            self.info.global_addr_taken.contains(name)
        } else {
            self.addr_taken.contains(name)
        }
    }

    /// Lower an expression to its value, emitting nodes for nested side
    /// effects.
    fn expr(&mut self, e: &Expr, loc: Loc) -> Result<Rv, FrontendError> {
        Ok(match e {
            Expr::Int(v) => Rv::Int(*v),
            Expr::Float | Expr::Str | Expr::SizeOf => Rv::Top,
            Expr::Ident(name, at) => {
                if let Some(var) = self.var_of(name) {
                    if self.is_addr_taken(name, &var) {
                        Rv::Top
                    } else {
                        Rv::Var(var)
                    }
                } else if let Some(def) = self.info.defines.get(name.as_str()).copied() {
                    if self.expanding.iter().any(|n| n == name) {
                        return Err(FrontendError {
                            kind: FrontendErrorKind::SyntaxError,
                            loc: *at,
                            message: format!("recursive macro `{name}`"),
                        });
                    }
                    self.expanding.push(name.clone());
                    let r = self.expr(def, *at);
                    self.expanding.pop();
                    r?
                } else {
                    Rv::Ext(name.clone())
                }
            }
            Expr::Call { callee, args, loc } => self.call(callee, args, *loc, true)?,
            Expr::Unary(op, a) => {
                let a = self.expr(a, loc)?;
                match a {
                    Rv::Int(v) => Rv::Int(op.fold(v)),
                    a => Rv::Unary(*op, Box::new(a)),
                }
            }
            Expr::Binary(op, a, b) => {
                let a = self.expr(a, loc)?;
                if matches!(op, BinOp::And | BinOp::Or) && has_side_effects(b) {
                    return Err(unsupported(
                        loc,
                        "side effect in the right operand of `&&`/`||`",
                    ));
                }
                let b = self.expr(b, loc)?;
                match (&a, &b) {
                    (Rv::Int(x), Rv::Int(y)) => match op.fold(*x, *y) {
                        Some(v) => Rv::Int(v),
                        None => Rv::Top,
                    },
                    _ => Rv::Binary(*op, Box::new(a), Box::new(b)),
                }
            }
            Expr::Cond(c, a, b) => {
                if has_side_effects(a) || has_side_effects(b) {
                    return Err(unsupported(loc, "side effect in a `?:` arm"));
                }
                let c = self.expr(c, loc)?;
                let a = self.expr(a, loc)?;
                let b = self.expr(b, loc)?;
                match c {
                    Rv::Int(v) => {
                        if v != 0 {
                            a
                        } else {
                            b
                        }
                    }
                    c => Rv::Cond(Box::new(c), Box::new(a), Box::new(b)),
                }
            }
            Expr::Assign {
                op,
                target,
                value,
                loc,
            } => {
                let rhs = self.expr(value, *loc)?;
                match target.as_ref() {
                    Expr::Ident(name, _) if self.var_of(name).is_some() => {
                        let var = self.var_of(name).expect("checked above");
                        let value = if self.is_addr_taken(name, &var) {
                            Rv::Top
                        } else {
                            match op {
                                None => rhs,
                                Some(op) => {
                                    Rv::Binary(*op, Box::new(Rv::Var(var.clone())), Box::new(rhs))
                                }
                            }
                        };
                        if self.live() {
                            self.add(
                                NodeKind::Assign {
                                    var: var.clone(),
                                    value,
                                },
                                *loc,
                            );
                        }
                        Rv::Var(var)
                    }
                    Expr::Ident(name, at) => {
                        return Err(FrontendError {
                            kind: FrontendErrorKind::SyntaxError,
                            loc: *at,
                            message: format!("assignment to undeclared `{name}`"),
                        })
                    }
                    other => {
                        // Stores through memory are not tracked.
                        self.expr(other, *loc)?;
                        Rv::Top
                    }
                }
            }
            Expr::IncDec {
                target,
                delta,
                prefix,
                loc,
            } => match target.as_ref() {
                Expr::Ident(name, _) if self.var_of(name).is_some() => {
                    let var = self.var_of(name).expect("checked above");
                    if self.is_addr_taken(name, &var) {
                        return Ok(Rv::Top);
                    }
                    let old = if *prefix {
                        None
                    } else {
                        let t = self.temp();
                        self.add(
                            NodeKind::Assign {
                                var: t.clone(),
                                value: Rv::Var(var.clone()),
                            },
                            *loc,
                        );
                        Some(t)
                    };
                    self.add(
                        NodeKind::Assign {
                            var: var.clone(),
                            value: Rv::Binary(
                                BinOp::Add,
                                Box::new(Rv::Var(var.clone())),
                                Box::new(Rv::Int(*delta)),
                            ),
                        },
                        *loc,
                    );
                    Rv::Var(old.unwrap_or(var))
                }
                other => {
                    self.expr(other, *loc)?;
                    Rv::Top
                }
            },
            Expr::Comma(a, b) => {
                self.effect(a, loc)?;
                self.expr(b, loc)?
            }
            Expr::Cast(a) => self.expr(a, loc)?,
            Expr::AddrOf(a) => {
                if !matches!(a.as_ref(), Expr::Ident(..)) {
                    self.expr(a, loc)?;
                }
                Rv::Top
            }
            Expr::Deref(a) | Expr::Member(a, _) => {
                self.expr(a, loc)?;
                Rv::Top
            }
            Expr::Index(a, b) => {
                self.expr(a, loc)?;
                self.expr(b, loc)?;
                Rv::Top
            }
            Expr::InitList(items) => {
                for i in items {
                    self.expr(i, loc)?;
                }
                Rv::Top
            }
        })
    }
}
