//! RTL clean-up: temporaries folded into the variables they feed, copies
//! propagated inside blocks, parameter spills merged and dead definitions
//! dropped. Each rewrite is a new generation of the node's statement.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::{premise, Emitter, EngineResult, Pass};
use crate::ir::{IRLevel, Operation, RtlInst, Stmt};
use crate::lifting::flow::{functions, stmts_at, FuncGraph};
use crate::store::{NodeId, Store, StoreResult, Value};

pub const RTL_OPT_PASS: &str = "rtl_optimize";

fn original(store: &Store, n: NodeId) -> StoreResult<Option<RtlInst>> {
    Ok(stmts_at(store, "rtl_inst", n)?.into_iter().find_map(|s| match s {
        Stmt::Rtl(r) => Some(r),
        _ => None,
    }))
}

/// The statement chosen for each node of `g`: the selected generation when
/// the optimizer ran, the translated instruction otherwise.
pub fn selected_rtl(store: &Store, g: &FuncGraph) -> StoreResult<BTreeMap<NodeId, RtlInst>> {
    let mut sel: BTreeMap<NodeId, i64> = BTreeMap::new();
    for (t, _) in store.relation("rtl_sel")?.iter() {
        if let (Some(n), Some(k)) = (t[0].as_node(), t[1].as_int()) {
            sel.insert(n, k);
        }
    }
    let mut out = BTreeMap::new();
    for n in &g.nodes {
        let gen = sel.get(n).copied().unwrap_or(0);
        let inst = if gen == 0 {
            original(store, *n)?
        } else {
            store
                .relation("rtl_opt")?
                .with_first(&Value::Node(*n))
                .find(|(t, _)| t[1].as_int() == Some(gen))
                .and_then(|(t, _)| match t[2].as_stmt() {
                    Some(Stmt::Rtl(r)) => Some(r.clone()),
                    _ => None,
                })
        };
        if let Some(i) = inst {
            out.insert(*n, i);
        }
    }
    Ok(out)
}

/// Per-function facts the rewrites respect.
pub struct Frame {
    pub slots: BTreeSet<u32>,
    pub escaped: BTreeSet<u32>,
    pub params: BTreeSet<u32>,
}

fn use_counts(code: &BTreeMap<NodeId, RtlInst>) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for i in code.values() {
        for u in i.uses() {
            *m.entry(u).or_insert(0) += 1;
        }
    }
    m
}

fn def_counts(code: &BTreeMap<NodeId, RtlInst>) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for i in code.values() {
        if let Some(d) = i.def() {
            *m.entry(d).or_insert(0) += 1;
        }
    }
    m
}

fn touches(i: &RtlInst, p: u32) -> bool {
    i.def() == Some(p) || i.uses().contains(&p)
}

/// `t := e; ...; v := t` with `t` used once becomes `v := e`.
fn fold_temporaries(code: &mut BTreeMap<NodeId, RtlInst>, blocks: &[Vec<NodeId>], fr: &Frame) -> bool {
    let uses = use_counts(code);
    let defs = def_counts(code);
    for b in blocks {
        for (ai, a) in b.iter().enumerate() {
            let Some(t) = code.get(a).and_then(RtlInst::def) else { continue };
            if fr.slots.contains(&t) || fr.params.contains(&t) || uses.get(&t) != Some(&1) || defs.get(&t) != Some(&1) {
                continue;
            }
            for (bi, m) in b.iter().enumerate().skip(ai + 1) {
                let Some(inst) = code.get(m) else { continue };
                if let RtlInst::Iop(Operation::Omove, args, v) = inst {
                    if args == &[t] {
                        let (v, mid) = (*v, &b[ai + 1..bi]);
                        if mid.iter().any(|k| code.get(k).map(|i| touches(i, v)).unwrap_or(false)) {
                            break;
                        }
                        let folded = code[a].with_def(Some(v));
                        code.insert(*a, folded);
                        code.insert(*m, RtlInst::Inop);
                        return true;
                    }
                }
                if inst.uses().contains(&t) {
                    break;
                }
            }
        }
    }
    false
}

/// Replaces uses of `d` after `d := s` within a block until either changes.
fn propagate_copies(code: &mut BTreeMap<NodeId, RtlInst>, blocks: &[Vec<NodeId>], fr: &Frame) -> bool {
    let mut changed = false;
    for b in blocks {
        let mut avail: BTreeMap<u32, u32> = BTreeMap::new();
        for n in b {
            let Some(inst) = code.get(n).cloned() else { continue };
            let renamed = inst.rename_uses(&|p| avail.get(&p).copied().unwrap_or(p));
            if renamed != inst {
                code.insert(*n, renamed.clone());
                changed = true;
            }
            if let Some(d) = renamed.def() {
                avail.retain(|k, v| *k != d && *v != d);
                if let RtlInst::Iop(Operation::Omove, args, _) = &renamed {
                    let s = args[0];
                    if s != d && !fr.escaped.contains(&s) && !fr.slots.contains(&d) {
                        avail.insert(d, s);
                    }
                }
            }
            if matches!(renamed, RtlInst::Icall(..) | RtlInst::Istore(..) | RtlInst::Ibuiltin(..)) {
                avail.retain(|_, v| !fr.escaped.contains(v));
            }
        }
    }
    changed
}

/// `slot := param` as the only use of the parameter: the slot becomes the
/// parameter.
fn merge_param_spills(
    code: &mut BTreeMap<NodeId, RtlInst>,
    entry_block: &[NodeId],
    fr: &mut Frame,
    renames: &mut Vec<(u32, u32)>,
) -> bool {
    let uses = use_counts(code);
    for n in entry_block {
        let Some(RtlInst::Iop(Operation::Omove, args, s)) = code.get(n).cloned() else { continue };
        let p = args[0];
        if !fr.params.contains(&p) || uses.get(&p) != Some(&1) || !fr.slots.contains(&s) || fr.escaped.contains(&s) {
            continue;
        }
        code.insert(*n, RtlInst::Inop);
        for i in code.values_mut() {
            *i = i.rename(&|x| if x == s { p } else { x });
        }
        fr.slots.remove(&s);
        renames.push((s, p));
        return true;
    }
    false
}

fn drop_dead(code: &mut BTreeMap<NodeId, RtlInst>, fr: &Frame, dead: &mut Vec<(NodeId, u32)>) -> bool {
    let uses = use_counts(code);
    let mut changed = false;
    for (n, i) in code.iter_mut() {
        let Some(d) = i.def() else { continue };
        if uses.contains_key(&d) || fr.escaped.contains(&d) {
            continue;
        }
        let new = match i {
            RtlInst::Iop(..) | RtlInst::Iload(..) => RtlInst::Inop,
            RtlInst::Icall(..) => i.with_def(None),
            _ => continue,
        };
        *i = new;
        dead.push((*n, d));
        changed = true;
    }
    changed
}

fn optimize(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let mut slot_vars: BTreeMap<String, BTreeMap<i64, u32>> = BTreeMap::new();
    for (t, _) in store.relation("slot_var")?.iter() {
        if let (Some(f), Some(o), Some(p)) = (t[0].as_text(), t[1].as_int(), t[2].as_int()) {
            slot_vars.entry(f.to_string()).or_default().insert(o, p as u32);
        }
    }
    let mut params: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    for (t, _) in store.relation("param")?.iter() {
        if let (Some(f), Some(p)) = (t[0].as_text(), t[2].as_int()) {
            params.entry(f.to_string()).or_default().insert(p as u32);
        }
    }
    for g in functions(store, IRLevel::Rtl)? {
        let orig = selected_rtl(store, &g)?;
        let slots = slot_vars.get(&g.name).cloned().unwrap_or_default();
        let escaped: BTreeSet<u32> = orig
            .values()
            .filter_map(|i| match i {
                RtlInst::Iop(Operation::Oaddrstack(o), ..) => slots.get(o).copied(),
                _ => None,
            })
            .collect();
        let mut fr = Frame {
            slots: slots.values().copied().collect(),
            escaped,
            params: params.get(&g.name).cloned().unwrap_or_default(),
        };
        let blocks = g.blocks();
        let entry_block: Vec<NodeId> = blocks.iter().find(|b| b.first() == Some(&g.entry)).cloned().unwrap_or_default();
        let mut code = orig.clone();
        let mut gen_of: BTreeMap<NodeId, i64> = BTreeMap::new();
        let mut versions: BTreeMap<(NodeId, i64), RtlInst> = BTreeMap::new();
        let mut dead = Vec::new();
        let mut renames = Vec::new();
        for round in 1..=64 {
            let before = code.clone();
            let mut any = false;
            while fold_temporaries(&mut code, &blocks, &fr) {
                any = true;
            }
            any |= propagate_copies(&mut code, &blocks, &fr);
            while merge_param_spills(&mut code, &entry_block, &mut fr, &mut renames) {
                any = true;
            }
            any |= drop_dead(&mut code, &fr, &mut dead);
            for (n, i) in &code {
                if before.get(n) != Some(i) {
                    gen_of.insert(*n, round);
                    versions.insert((*n, round), i.clone());
                }
            }
            if !any {
                break;
            }
        }
        for (n, i) in &orig {
            let src = premise("rtl_inst", vec![(*n).into(), Value::stmt(Stmt::Rtl(i.clone()))]);
            let mut last = src.clone();
            for ((m, gen), v) in versions.range((*n, 1)..=(*n, i64::MAX)) {
                debug_assert_eq!(m, n);
                let t = vec![(*n).into(), Value::Int(*gen), Value::stmt(Stmt::Rtl(v.clone()))];
                em.derive("rtl_opt", t.clone(), "rewrite", vec![last.clone()]);
                last = premise("rtl_opt", t);
            }
            let gen = gen_of.get(n).copied().unwrap_or(0);
            em.derive("rtl_sel", vec![(*n).into(), Value::Int(gen)], "select", vec![last]);
        }
        for (n, p) in dead {
            let src = premise("rtl_inst", vec![n.into(), Value::stmt(Stmt::Rtl(orig[&n].clone()))]);
            em.derive("rtl_dead", vec![n.into(), Value::Int(p as i64)], "dead", vec![src]);
        }
        for (s, p) in renames {
            em.derive(
                "copy_edge",
                vec![Value::text(&g.name), Value::Int(p as i64), Value::Int(s as i64)],
                "param_spill",
                vec![premise("cfg_entry", vec![Value::text("RTL"), Value::text(&g.name), g.entry.into()])],
            );
        }
    }
    Ok(())
}

/// Runs the rewrites to a fixpoint per function and records every
/// intermediate generation.
pub fn rtl_optimize() -> Pass {
    Pass::procedural(
        RTL_OPT_PASS,
        &["rtl_inst", "rtl_succ", "cfg_entry", "slot_var", "param"],
        &["rtl_opt", "rtl_sel", "rtl_dead", "copy_edge"],
        optimize,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Addressing, BinOp, Chunk};

    fn frame(slots: &[u32], params: &[u32]) -> Frame {
        Frame { slots: slots.iter().copied().collect(), escaped: BTreeSet::new(), params: params.iter().copied().collect() }
    }

    #[test]
    fn folds_and_propagates() {
        let n = |i| NodeId(i);
        let mut code = BTreeMap::from([
            (n(1), RtlInst::Iop(Operation::Omove, vec![9], 2)),
            (n(2), RtlInst::Iload(Chunk::MInt32, Addressing::Aindexed(0), vec![2], 3)),
            (n(3), RtlInst::Iop(Operation::Binimm(BinOp::Oadd, 1), vec![3], 4)),
            (n(4), RtlInst::Iop(Operation::Omove, vec![4], 10)),
            (n(5), RtlInst::Ireturn(Some(10))),
        ]);
        let blocks = vec![vec![n(1), n(2), n(3), n(4), n(5)]];
        let fr = frame(&[9, 10], &[]);
        assert!(fold_temporaries(&mut code, &blocks, &fr));
        assert_eq!(code[&n(3)], RtlInst::Iop(Operation::Binimm(BinOp::Oadd, 1), vec![3], 10));
        assert_eq!(code[&n(4)], RtlInst::Inop);
        assert!(propagate_copies(&mut code, &blocks, &fr));
        assert_eq!(code[&n(2)], RtlInst::Iload(Chunk::MInt32, Addressing::Aindexed(0), vec![9], 3));
        let mut dead = Vec::new();
        assert!(drop_dead(&mut code, &fr, &mut dead));
        assert_eq!(dead, vec![(n(1), 2)]);
    }

    #[test]
    fn param_spill_becomes_param() {
        let n = |i| NodeId(i);
        let mut code = BTreeMap::from([
            (n(1), RtlInst::Iop(Operation::Omove, vec![1], 5)),
            (n(2), RtlInst::Ireturn(Some(5))),
        ]);
        let mut fr = frame(&[5], &[1]);
        let mut renames = Vec::new();
        assert!(merge_param_spills(&mut code, &[n(1), n(2)], &mut fr, &mut renames));
        assert_eq!(code[&n(2)], RtlInst::Ireturn(Some(1)));
        assert_eq!(renames, vec![(5, 1)]);
    }
}
