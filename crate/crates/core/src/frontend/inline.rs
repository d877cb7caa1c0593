//! Interprocedural inlining by CFG splicing.

use std::collections::BTreeMap;

use super::ast::Loc;
use super::cfg::*;
use super::{FrontendError, FrontendErrorKind};

pub const DEFAULT_INLINE_DEPTH: usize = 16;

struct Inliner<'a> {
    functions: &'a BTreeMap<String, FunctionCfg>,
    limit: usize,
    instances: usize,
}

/// Expand every call of a user-defined function reachable from `entry`,
/// returning a single CFG free of user calls. `globals` are assigned their
/// initial values right after the entry node.
pub fn inline_program(
    functions: &BTreeMap<String, FunctionCfg>,
    globals: &[(String, Rv, Loc)],
    entry: &str,
    depth_limit: usize,
) -> Result<Cfg, FrontendError> {
    let root = functions.get(entry).ok_or_else(|| FrontendError {
        kind: FrontendErrorKind::MissingEntry,
        loc: Loc::default(),
        message: format!("entry function `{entry}` is not defined"),
    })?;
    let mut inl = Inliner {
        functions,
        limit: depth_limit,
        instances: 0,
    };
    let mut stack = vec![entry.to_string()];
    let mut cfg = inl.expand(&root.cfg, &mut stack)?;

    // Global initialisation between entry and the first statement.
    let first = std::mem::take(&mut cfg.nodes[cfg.entry].succs);
    let mut prev = cfg.entry;
    for (name, value, loc) in globals {
        let id = cfg.push(
            NodeKind::Assign {
                var: format!("{GLOBAL_PREFIX}{name}"),
                value: value.clone(),
            },
            *loc,
            "",
        );
        cfg.link(prev, id, EdgeLabel::Seq, false);
        prev = id;
    }
    cfg.nodes[prev].succs.extend(first);
    cfg.prune();
    Ok(cfg)
}

impl Inliner<'_> {
    fn expand(&mut self, base: &Cfg, stack: &mut Vec<String>) -> Result<Cfg, FrontendError> {
        let mut cfg = base.clone();
        let sites: Vec<NodeId> = (0..cfg.nodes.len())
            .filter(|&i| {
                matches!(
                    cfg.nodes[i].kind,
                    NodeKind::Call {
                        call: CallKind::User,
                        ..
                    }
                )
            })
            .collect();
        for site in sites {
            let NodeKind::Call {
                callee, args, dest, ..
            } = cfg.nodes[site].kind.clone()
            else {
                unreachable!("filtered above")
            };
            let loc = cfg.nodes[site].loc;
            if let Some(pos) = stack.iter().position(|f| *f == callee) {
                let mut cycle = stack[pos..].to_vec();
                cycle.push(callee.clone());
                return Err(FrontendError {
                    kind: FrontendErrorKind::RecursionDetected,
                    loc,
                    message: format!("recursive call cycle {}", cycle.join(" -> ")),
                });
            }
            if stack.len() > self.limit {
                return Err(FrontendError {
                    kind: FrontendErrorKind::DepthLimitExceeded,
                    loc,
                    message: format!(
                        "inlining `{callee}` exceeds the depth limit of {} (call chain {})",
                        self.limit,
                        stack.join(" -> ")
                    ),
                });
            }
            let f = &self.functions[&callee];
            stack.push(callee.clone());
            let body = self.expand(&f.cfg, stack)?;
            stack.pop();
            self.instances += 1;
            let prefix = format!("{callee}@{}.", self.instances);
            let rename = |v: &str| {
                if v.starts_with(GLOBAL_PREFIX) {
                    v.to_string()
                } else {
                    format!("{prefix}{v}")
                }
            };
            splice(&mut cfg, site, &body, f, &args, dest, loc, &rename);
        }
        cfg.prune();
        Ok(cfg)
    }
}

#[allow(clippy::too_many_arguments)]
fn splice(
    cfg: &mut Cfg,
    site: NodeId,
    body: &Cfg,
    f: &FunctionCfg,
    args: &[Rv],
    dest: Option<String>,
    loc: Loc,
    rename: &impl Fn(&str) -> String,
) {
    let after = std::mem::take(&mut cfg.nodes[site].succs);
    cfg.nodes[site].kind = NodeKind::Join;
    let base = cfg.nodes.len();
    for n in &body.nodes {
        let mut n = n.clone();
        match &mut n.kind {
            NodeKind::Assign { var, value } => {
                *var = rename(var);
                value.rename(rename);
            }
            NodeKind::Call { args, dest, .. } => {
                args.iter_mut().for_each(|a| a.rename(rename));
                if let Some(d) = dest {
                    *d = rename(d);
                }
            }
            NodeKind::Branch { cond } => cond.rename(rename),
            NodeKind::Entry | NodeKind::Exit => n.kind = NodeKind::Join,
            NodeKind::Join => {}
        }
        let halting = matches!(
            n.kind,
            NodeKind::Call {
                call: CallKind::Halting,
                ..
            }
        );
        for e in &mut n.succs {
            e.to = if halting && e.to == body.exit {
                // Program termination, not a return to the caller.
                usize::MAX
            } else {
                base + e.to
            };
        }
        cfg.nodes.push(n);
    }
    let exit = cfg.exit;
    for n in &mut cfg.nodes[base..] {
        for e in &mut n.succs {
            if e.to == usize::MAX {
                e.to = exit;
            }
        }
    }

    // Parameter passing.
    let mut prev = site;
    for (i, p) in f.params.iter().enumerate() {
        let value = args.get(i).cloned().unwrap_or(Rv::Top);
        let id = cfg.push(
            NodeKind::Assign {
                var: rename(p),
                value,
            },
            loc,
            &cfg.nodes[site].function.clone(),
        );
        cfg.link(prev, id, EdgeLabel::Seq, false);
        prev = id;
    }
    cfg.link(prev, base + body.entry, EdgeLabel::Seq, false);

    // Return value.
    let mut ret = base + body.exit;
    if let Some(d) = dest {
        let id = cfg.push(
            NodeKind::Assign {
                var: d,
                value: Rv::Var(rename(RETURN_VAR)),
            },
            loc,
            &cfg.nodes[site].function.clone(),
        );
        cfg.link(ret, id, EdgeLabel::Seq, false);
        ret = id;
    }
    cfg.nodes[ret].succs = after;
}
