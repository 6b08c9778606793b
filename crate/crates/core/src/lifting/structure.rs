//! Region detection on the Csharpminor CFG: natural loops, if-then-else
//! diamonds and chains of equality tests. Each region gets a synthetic
//! representative node carrying its compound statement.

use std::collections::{BTreeMap, BTreeSet};

use super::flow::{functions, stmts_at, FuncGraph};
use crate::engine::{premise, Emitter, EngineResult, Pass};
use crate::ir::{CExpr, Comparison, CshStmt, IRLevel, Stmt};
use crate::store::{NodeId, Store, Tuple, Value};

pub const STRUCTURE_PASS: &str = "structure_cfg";

pub const REGION_LOOP: &str = "Loop";
pub const REGION_ITE: &str = "IfThenElse";
pub const REGION_SWITCH: &str = "SwitchChain";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub kind: &'static str,
    pub header: NodeId,
    pub members: BTreeSet<NodeId>,
    /// Where control continues after an if-then-else; `None` when both arms
    /// leave the function.
    pub exit: Option<NodeId>,
}

/// Immediate post-dominators; nodes whose only post-dominator is the
/// virtual exit are absent.
pub fn ipdom(g: &FuncGraph) -> BTreeMap<NodeId, NodeId> {
    let nodes = &g.nodes;
    let all: BTreeSet<NodeId> = nodes.iter().copied().collect();
    // pdom(n) as sets; the virtual exit is implicit.
    let mut pdom: BTreeMap<NodeId, BTreeSet<NodeId>> = nodes.iter().map(|n| (*n, all.clone())).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for n in nodes.iter().rev() {
            let succs: Vec<NodeId> = g.succs(*n).filter(|m| all.contains(m)).collect();
            let mut set = if succs.is_empty() {
                BTreeSet::new()
            } else {
                let mut it = succs.iter();
                let mut acc = pdom[it.next().unwrap()].clone();
                for m in it {
                    acc = acc.intersection(&pdom[m]).copied().collect();
                }
                acc
            };
            set.insert(*n);
            if set != pdom[n] {
                pdom.insert(*n, set);
                changed = true;
            }
        }
    }
    let mut out = BTreeMap::new();
    for n in nodes {
        let strict: Vec<NodeId> = pdom[n].iter().copied().filter(|m| m != n).collect();
        // The immediate one is post-dominated by all the others.
        if let Some(i) = strict.iter().find(|c| strict.iter().all(|o| pdom[c].contains(o))) {
            out.insert(*n, *i);
        }
    }
    out
}

/// Natural loops keyed by header.
pub fn natural_loops(g: &FuncGraph, idom: &BTreeMap<NodeId, NodeId>) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
    let mut loops: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for t in &g.nodes {
        for h in g.succs(*t) {
            if !idom.contains_key(t) || !FuncGraph::dominates(idom, h, *t) {
                continue;
            }
            let body = loops.entry(h).or_insert_with(|| BTreeSet::from([h]));
            let mut work = vec![*t];
            while let Some(n) = work.pop() {
                if body.insert(n) {
                    work.extend(g.preds(n).iter().copied());
                }
            }
        }
    }
    loops
}

/// Nodes of one arm: reachable from `start` without passing `exit`.
/// `None` when the arm is not single-entry from `header` or loops back to it.
fn arm(g: &FuncGraph, header: NodeId, start: NodeId, exit: Option<NodeId>) -> Option<BTreeSet<NodeId>> {
    let mut members = BTreeSet::new();
    if Some(start) == exit {
        return Some(members);
    }
    let mut work = vec![start];
    while let Some(n) = work.pop() {
        if n == header {
            return None;
        }
        if Some(n) == exit || !members.insert(n) {
            continue;
        }
        work.extend(g.succs(n));
    }
    let entry_ok = members
        .iter()
        .all(|m| g.preds(*m).iter().all(|p| *p == header && *m == start || members.contains(p)));
    entry_ok.then_some(members)
}

fn eq_test(s: &CshStmt) -> Option<(u32, NodeId, NodeId)> {
    match s {
        CshStmt::Sifthenelse(CExpr::Ecmp(_, Comparison::Ceq, a, b), t, f) => match (&**a, &**b) {
            (CExpr::Evar(x), CExpr::Econst(_)) => Some((*x, *t, *f)),
            _ => None,
        },
        _ => None,
    }
}

/// Regions of one function, deterministic in the graph and statements.
pub fn regions(g: &FuncGraph, stmts: &BTreeMap<NodeId, CshStmt>) -> Vec<Region> {
    let idom = g.idom();
    let post = ipdom(g);
    let mut out = Vec::new();
    for (h, body) in natural_loops(g, &idom) {
        out.push(Region { kind: REGION_LOOP, header: h, members: body, exit: None });
    }
    for n in &g.nodes {
        let Some(CshStmt::Sifthenelse(_, t, f)) = stmts.get(n) else { continue };
        if t == f {
            continue;
        }
        let exit = post.get(n).copied();
        let (Some(a), Some(b)) = (arm(g, *n, *t, exit), arm(g, *n, *f, exit)) else { continue };
        if !a.is_disjoint(&b) {
            continue;
        }
        let members = a.union(&b).copied().collect();
        out.push(Region { kind: REGION_ITE, header: *n, members, exit });
    }
    // Chains of equality tests on one variable, each test the false
    // successor of the previous one.
    let mut in_chain = BTreeSet::new();
    for n in &g.nodes {
        if in_chain.contains(n) {
            continue;
        }
        let Some((x, _, mut next)) = stmts.get(n).and_then(eq_test) else { continue };
        let mut chain = vec![*n];
        while let Some((y, _, f)) = stmts.get(&next).and_then(eq_test) {
            if y != x || g.preds(next).len() != 1 || chain.contains(&next) {
                break;
            }
            chain.push(next);
            next = f;
        }
        if chain.len() >= 3 {
            in_chain.extend(chain.iter().copied());
            out.push(Region { kind: REGION_SWITCH, header: *n, members: chain.into_iter().collect(), exit: None });
        }
    }
    out
}

fn structure(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    for g in functions(store, IRLevel::Csharpminor)? {
        let mut stmts = BTreeMap::new();
        for n in &g.nodes {
            if let Some(Stmt::Csh(s)) = stmts_at(store, "csh_stmt", *n)?.into_iter().next() {
                stmts.insert(*n, s);
            }
        }
        let f = Value::text(&g.name);
        let entry = premise("cfg_entry", vec![Value::text(IRLevel::Csharpminor.name()), f.clone(), g.entry.into()]);
        for r in regions(&g, &stmts) {
            let rep = em.fresh_node();
            let header_stmt = Stmt::Csh(stmts[&r.header].clone());
            let header_fact = premise("csh_stmt", vec![r.header.into(), Value::stmt(header_stmt)]);
            let mut why: Vec<(String, Tuple)> = vec![entry.clone(), header_fact];
            for m in &r.members {
                for s in g.succs(*m) {
                    if let Some((_, k)) = g.succ[m].iter().find(|(x, _)| *x == s) {
                        why.push(premise("csh_succ", vec![(*m).into(), s.into(), Value::text(k)]));
                    }
                }
            }
            let members = Value::Tuple(r.members.iter().map(|m| Value::Node(*m)).collect());
            let tuple = vec![f.clone(), Value::text(r.kind), r.header.into(), members, rep.into()];
            em.derive("region", tuple.clone(), r.kind, why);
            let because = vec![premise("region", tuple)];
            em.derive("node_func", vec![rep.into(), f.clone()], "representative", because.clone());
            if let Some(x) = r.exit {
                em.derive("region_exit", vec![rep.into(), x.into()], "exit", because.clone());
            }
            let compound = match r.kind {
                REGION_LOOP => CshStmt::Sloop(r.header),
                _ => stmts[&r.header].clone(),
            };
            em.derive("csh_stmt", vec![rep.into(), Value::stmt(Stmt::Csh(compound))], "representative", because);
        }
    }
    Ok(())
}

/// Loop, if-then-else and switch-chain regions with their representatives.
pub fn structure_cfg() -> Pass {
    Pass::procedural(
        STRUCTURE_PASS,
        &["csh_stmt", "csh_succ", "cfg_entry"],
        &["region", "region_exit", "node_func", "csh_stmt"],
        structure,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::CmpKind;

    fn graph(edges: &[(u64, u64)]) -> FuncGraph {
        let mut succ: BTreeMap<NodeId, Vec<(NodeId, String)>> = BTreeMap::new();
        let mut pred: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let mut nodes = BTreeSet::new();
        for (a, b) in edges {
            succ.entry(NodeId(*a)).or_default().push((NodeId(*b), "fallthrough".into()));
            pred.entry(NodeId(*b)).or_default().push(NodeId(*a));
            nodes.insert(NodeId(*a));
            nodes.insert(NodeId(*b));
        }
        FuncGraph { name: "f".into(), entry: NodeId(1), nodes: nodes.into_iter().collect(), succ, pred }
    }

    fn cond(t: u64, f: u64) -> CshStmt {
        let c = CExpr::Ecmp(CmpKind::Int, Comparison::Cle, Box::new(CExpr::Evar(1)), Box::new(CExpr::Econst(0)));
        CshStmt::Sifthenelse(c, NodeId(t), NodeId(f))
    }

    #[test]
    fn diamond_is_one_if_then_else() {
        let g = graph(&[(1, 2), (1, 3), (2, 4), (3, 4)]);
        let stmts = BTreeMap::from([(NodeId(1), cond(2, 3))]);
        let rs = regions(&g, &stmts);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].kind, REGION_ITE);
        assert_eq!(rs[0].exit, Some(NodeId(4)));
        assert_eq!(rs[0].members, BTreeSet::from([NodeId(2), NodeId(3)]));
    }

    #[test]
    fn self_loop_and_irreducible_cycle() {
        let g = graph(&[(1, 2), (2, 2), (2, 3)]);
        let rs = regions(&g, &BTreeMap::new());
        assert_eq!(rs.iter().filter(|r| r.kind == REGION_LOOP).count(), 1);
        // 1 branches into both 2 and 3, which form a cycle: no header dominates it.
        let g = graph(&[(1, 2), (1, 3), (2, 3), (3, 2), (3, 4)]);
        let rs = regions(&g, &BTreeMap::from([(NodeId(1), cond(2, 3))]));
        assert!(rs.iter().all(|r| r.kind != REGION_LOOP));
    }
}
