//! Per-function control-flow views of a level and the dataflow solvers the
//! passes share.

use std::collections::{BTreeMap, BTreeSet};

use crate::ir::IRLevel;
use crate::store::{NodeId, Store, StoreResult, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncGraph {
    pub name: String,
    pub entry: NodeId,
    /// Nodes reachable from the entry, sorted.
    pub nodes: Vec<NodeId>,
    pub succ: BTreeMap<NodeId, Vec<(NodeId, String)>>,
    pub pred: BTreeMap<NodeId, Vec<NodeId>>,
}

impl FuncGraph {
    pub fn succs(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.succ.get(&n).into_iter().flatten().map(|(m, _)| *m)
    }

    pub fn preds(&self, n: NodeId) -> &[NodeId] {
        self.pred.get(&n).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn edge_to(&self, n: NodeId, kind: &str) -> Option<NodeId> {
        self.succ.get(&n)?.iter().find(|(_, k)| k == kind).map(|(m, _)| *m)
    }

    /// Reverse postorder from the entry; successors visited in edge order.
    pub fn rpo(&self) -> Vec<NodeId> {
        let mut seen = BTreeSet::new();
        let mut post = Vec::new();
        let mut stack = vec![(self.entry, 0usize)];
        seen.insert(self.entry);
        while let Some((n, i)) = stack.pop() {
            let succs: Vec<NodeId> = self.succs(n).collect();
            if i < succs.len() {
                stack.push((n, i + 1));
                let m = succs[i];
                if seen.insert(m) {
                    stack.push((m, 0));
                }
            } else {
                post.push(n);
            }
        }
        post.reverse();
        post
    }

    /// Immediate dominators by the iterative algorithm over reverse postorder.
    pub fn idom(&self) -> BTreeMap<NodeId, NodeId> {
        let order = self.rpo();
        let index: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut idom: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        idom.insert(self.entry, self.entry);
        let intersect = |idom: &BTreeMap<NodeId, NodeId>, mut a: NodeId, mut b: NodeId| {
            while a != b {
                while index[&a] > index[&b] {
                    a = idom[&a];
                }
                while index[&b] > index[&a] {
                    b = idom[&b];
                }
            }
            a
        };
        let mut changed = true;
        while changed {
            changed = false;
            for n in order.iter().skip(1) {
                let mut new: Option<NodeId> = None;
                for p in self.preds(*n) {
                    if !idom.contains_key(p) {
                        continue;
                    }
                    new = Some(match new {
                        None => *p,
                        Some(q) => intersect(&idom, *p, q),
                    });
                }
                if let Some(d) = new {
                    if idom.get(n) != Some(&d) {
                        idom.insert(*n, d);
                        changed = true;
                    }
                }
            }
        }
        idom
    }

    pub fn dominates(idom: &BTreeMap<NodeId, NodeId>, a: NodeId, mut b: NodeId) -> bool {
        loop {
            if a == b {
                return true;
            }
            match idom.get(&b) {
                Some(d) if *d != b => b = *d,
                _ => return false,
            }
        }
    }

    /// Maximal straight-line runs: a block ends at a node with several
    /// successors or before a node with several predecessors.
    pub fn blocks(&self) -> Vec<Vec<NodeId>> {
        let mut starts: BTreeSet<NodeId> = BTreeSet::new();
        starts.insert(self.entry);
        for n in &self.nodes {
            let succs: Vec<NodeId> = self.succs(*n).collect();
            if succs.len() != 1 {
                starts.extend(succs);
            } else if self.preds(succs[0]).len() != 1 {
                starts.insert(succs[0]);
            }
        }
        let mut out = Vec::new();
        for s in starts.iter().filter(|s| self.nodes.binary_search(s).is_ok()) {
            let mut block = vec![*s];
            let mut cur = *s;
            loop {
                let succs: Vec<NodeId> = self.succs(cur).collect();
                match succs.as_slice() {
                    [m] if !starts.contains(m) => {
                        block.push(*m);
                        cur = *m;
                    }
                    _ => break,
                }
            }
            out.push(block);
        }
        out
    }
}

/// Function graphs of `level`: entries from `cfg_entry`, edges from the
/// level's edge relation.
pub fn functions(store: &Store, level: IRLevel) -> StoreResult<Vec<FuncGraph>> {
    let level_name = level.name();
    let edge_rel = crate::ir::schema::edge_name(level);
    let mut all_succ: BTreeMap<NodeId, Vec<(NodeId, String)>> = BTreeMap::new();
    for (t, _) in store.relation(edge_rel)?.iter() {
        if let (Some(a), Some(b), Some(k)) = (t[0].as_node(), t[1].as_node(), t[2].as_text()) {
            all_succ.entry(a).or_default().push((b, k.to_string()));
        }
    }
    for v in all_succ.values_mut() {
        v.sort_by(|x, y| edge_rank(&x.1).cmp(&edge_rank(&y.1)).then(x.0.cmp(&y.0)));
        v.dedup();
    }
    let mut out = Vec::new();
    for (t, _) in store.relation("cfg_entry")?.iter() {
        if t[0].as_text() != Some(level_name) {
            continue;
        }
        let (Some(name), Some(entry)) = (t[1].as_text(), t[2].as_node()) else { continue };
        let mut seen = BTreeSet::new();
        let mut work = vec![entry];
        seen.insert(entry);
        while let Some(n) = work.pop() {
            for (m, _) in all_succ.get(&n).into_iter().flatten() {
                if seen.insert(*m) {
                    work.push(*m);
                }
            }
        }
        let mut succ = BTreeMap::new();
        let mut pred: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for n in &seen {
            if let Some(s) = all_succ.get(n) {
                succ.insert(*n, s.clone());
                for (m, _) in s {
                    pred.entry(*m).or_default().push(*n);
                }
            }
        }
        for p in pred.values_mut() {
            p.sort();
            p.dedup();
        }
        out.push(FuncGraph { name: name.to_string(), entry, nodes: seen.into_iter().collect(), succ, pred });
    }
    out.sort_by(|a, b| a.entry.cmp(&b.entry).then(a.name.cmp(&b.name)));
    Ok(out)
}

fn edge_rank(kind: &str) -> u8 {
    match kind {
        crate::ir::schema::EDGE_TRUE => 0,
        crate::ir::schema::EDGE_FALSE => 1,
        _ => 2,
    }
}

/// Where a definition happened; `None` is the function entry.
pub type DefSite = Option<NodeId>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Access<K> {
    pub uses: Vec<K>,
    pub defs: Vec<K>,
    /// Clobbered without a usable value.
    pub kills: Vec<K>,
}

impl<K> Default for Access<K> {
    fn default() -> Self {
        Access { uses: Vec::new(), defs: Vec::new(), kills: Vec::new() }
    }
}

pub type Reaching<K> = BTreeMap<NodeId, BTreeMap<K, BTreeSet<DefSite>>>;

/// Definitions reaching the start of each node. Every key in `entry_defs` is
/// defined at the entry.
pub fn reaching_defs<K: Ord + Clone>(
    g: &FuncGraph,
    acc: &BTreeMap<NodeId, Access<K>>,
    entry_defs: &[K],
) -> Reaching<K> {
    let mut inn: Reaching<K> = BTreeMap::new();
    let mut out: Reaching<K> = BTreeMap::new();
    let entry_state: BTreeMap<K, BTreeSet<DefSite>> =
        entry_defs.iter().map(|k| (k.clone(), BTreeSet::from([None]))).collect();
    let order = g.rpo();
    let mut changed = true;
    while changed {
        changed = false;
        for n in &order {
            let mut state: BTreeMap<K, BTreeSet<DefSite>> =
                if *n == g.entry { entry_state.clone() } else { BTreeMap::new() };
            for p in g.preds(*n) {
                if let Some(o) = out.get(p) {
                    for (k, s) in o {
                        state.entry(k.clone()).or_default().extend(s.iter().cloned());
                    }
                }
            }
            let mut o = state.clone();
            if let Some(a) = acc.get(n) {
                for k in &a.kills {
                    o.remove(k);
                }
                for k in &a.defs {
                    o.insert(k.clone(), BTreeSet::from([Some(*n)]));
                }
            }
            if inn.get(n) != Some(&state) {
                inn.insert(*n, state);
                changed = true;
            }
            if out.get(n) != Some(&o) {
                out.insert(*n, o);
                changed = true;
            }
        }
    }
    inn
}

/// Keys live at the exit of each node.
pub fn live_out<K: Ord + Clone>(g: &FuncGraph, acc: &BTreeMap<NodeId, Access<K>>) -> BTreeMap<NodeId, BTreeSet<K>> {
    let mut live_in: BTreeMap<NodeId, BTreeSet<K>> = BTreeMap::new();
    let mut live_out: BTreeMap<NodeId, BTreeSet<K>> = BTreeMap::new();
    let mut order = g.rpo();
    order.reverse();
    let mut changed = true;
    while changed {
        changed = false;
        for n in &order {
            let mut o = BTreeSet::new();
            for m in g.succs(*n) {
                if let Some(s) = live_in.get(&m) {
                    o.extend(s.iter().cloned());
                }
            }
            let mut i = o.clone();
            if let Some(a) = acc.get(n) {
                for k in a.defs.iter().chain(a.kills.iter()) {
                    i.remove(k);
                }
                i.extend(a.uses.iter().cloned());
            }
            if live_in.get(n) != Some(&i) {
                live_in.insert(*n, i);
                changed = true;
            }
            if live_out.get(n) != Some(&o) {
                live_out.insert(*n, o);
                changed = true;
            }
        }
    }
    live_out
}

/// Keys live at the function entry.
pub fn live_in_entry<K: Ord + Clone>(g: &FuncGraph, acc: &BTreeMap<NodeId, Access<K>>) -> BTreeSet<K> {
    let out = live_out(g, acc);
    let mut s = out.get(&g.entry).cloned().unwrap_or_default();
    if let Some(a) = acc.get(&g.entry) {
        for k in a.defs.iter().chain(a.kills.iter()) {
            s.remove(k);
        }
        s.extend(a.uses.iter().cloned());
    }
    s
}

/// `node → function` from `node_func`.
pub fn node_funcs(store: &Store) -> StoreResult<BTreeMap<NodeId, String>> {
    Ok(store
        .relation("node_func")?
        .iter()
        .filter_map(|(t, _)| Some((t[0].as_node()?, t[1].as_text()?.to_string())))
        .collect())
}

/// The statements at a node for a principal relation, in structural order.
pub fn stmts_at(store: &Store, rel: &str, n: NodeId) -> StoreResult<Vec<crate::ir::Stmt>> {
    let key = Value::Node(n);
    Ok(store.relation(rel)?.with_first(&key).filter_map(|(t, _)| t[1].as_stmt().cloned()).collect())
}

/// The LTL instruction a node stands for in dataflow: a builtin if one was
/// recognized there, otherwise the first candidate.
pub fn primary_ltl(store: &Store, n: NodeId) -> StoreResult<Option<crate::ir::LtlInst>> {
    let all: Vec<crate::ir::LtlInst> = stmts_at(store, "ltl_inst", n)?
        .into_iter()
        .filter_map(|s| match s {
            crate::ir::Stmt::Ltl(l) => Some(l),
            _ => None,
        })
        .collect();
    let builtin = all.iter().find(|l| matches!(l, crate::ir::LtlInst::Lbuiltin(..))).cloned();
    Ok(builtin.or_else(|| all.into_iter().next()))
}

#[cfg(test)]
mod tests {
    use super::*;

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

    #[test]
    fn diamond_dominators() {
        let g = graph(&[(1, 2), (1, 3), (2, 4), (3, 4)]);
        let idom = g.idom();
        assert_eq!(idom[&NodeId(4)], NodeId(1));
        assert!(FuncGraph::dominates(&idom, NodeId(1), NodeId(3)));
        assert!(!FuncGraph::dominates(&idom, NodeId(2), NodeId(4)));
        assert_eq!(g.blocks().len(), 4);
    }

    #[test]
    fn reaching_and_liveness() {
        let g = graph(&[(1, 2), (2, 3), (3, 2), (3, 4)]);
        let mut acc: BTreeMap<NodeId, Access<&str>> = BTreeMap::new();
        acc.insert(NodeId(1), Access { defs: vec!["a"], ..Default::default() });
        acc.insert(NodeId(3), Access { uses: vec!["a"], defs: vec!["a"], ..Default::default() });
        acc.insert(NodeId(4), Access { uses: vec!["a", "b"], ..Default::default() });
        let r = reaching_defs(&g, &acc, &["b"]);
        assert_eq!(r[&NodeId(3)]["a"], BTreeSet::from([Some(NodeId(1)), Some(NodeId(3))]));
        assert_eq!(r[&NodeId(4)]["b"], BTreeSet::from([None]));
        let live = live_in_entry(&g, &acc);
        assert_eq!(live, BTreeSet::from(["b"]));
    }
}
