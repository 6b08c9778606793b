//! Stack-slot def-use chains and liveness, plus the register evidence for
//! parameter counts and return kinds.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::{premise, Emitter, EngineResult, Pass};
use crate::ir::{IRLevel, LtlInst, MachReg, Operation, Stmt};
use crate::lifting::flow::{functions, live_in_entry, live_out, primary_ltl, reaching_defs, Access, FuncGraph};
use crate::store::{NodeId, Store, Value};

pub const FRAME_PASS: &str = "stack_frame_analysis";
pub const CALL_PASS: &str = "collect_call_evidence";

fn ltl_fact(n: NodeId, l: &LtlInst) -> (String, Vec<Value>) {
    premise("ltl_inst", vec![n.into(), Value::stmt(Stmt::Ltl(l.clone()))])
}

pub(crate) fn ltl_insts(store: &Store, g: &FuncGraph) -> EngineResult<BTreeMap<NodeId, LtlInst>> {
    let mut out = BTreeMap::new();
    for n in &g.nodes {
        if let Some(l) = primary_ltl(store, *n)? {
            out.insert(*n, l);
        }
    }
    Ok(out)
}

fn slot_access(l: &LtlInst) -> Access<i64> {
    match l {
        LtlInst::Lgetstack(_, o, ..) => Access { uses: vec![*o], ..Default::default() },
        LtlInst::Lsetstack(_, _, o, _) => Access { defs: vec![*o], ..Default::default() },
        LtlInst::Lop(Operation::Oaddrstack(o), ..) => Access { uses: vec![*o], ..Default::default() },
        _ => Access::default(),
    }
}

fn slot_analysis(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    for g in functions(store, IRLevel::Ltl)? {
        let f = Value::text(&g.name);
        let insts = ltl_insts(store, &g)?;
        let acc: BTreeMap<NodeId, Access<i64>> = insts.iter().map(|(n, l)| (*n, slot_access(l))).collect();
        let escaped: BTreeSet<i64> = insts
            .values()
            .filter_map(|l| match l {
                LtlInst::Lop(Operation::Oaddrstack(o), ..) => Some(*o),
                _ => None,
            })
            .collect();
        let reach = reaching_defs(&g, &acc, &[]);
        for (n, a) in &acc {
            for o in &a.uses {
                for d in reach.get(n).and_then(|r| r.get(o)).into_iter().flatten().flatten() {
                    em.derive(
                        "slot_du",
                        vec![f.clone(), (*d).into(), (*n).into(), Value::Int(*o)],
                        "def_use",
                        vec![ltl_fact(*d, &insts[d]), ltl_fact(*n, &insts[n])],
                    );
                }
            }
        }
        let live = live_out(&g, &acc);
        for (n, slots) in &live {
            for o in slots {
                em.derive("slot_live", vec![(*n).into(), Value::Int(*o)], "live", vec![ltl_fact(*n, &insts[n])]);
            }
        }
        for (n, a) in &acc {
            for o in &a.defs {
                let is_live = live.get(n).map(|s| s.contains(o)).unwrap_or(false);
                if !is_live && !escaped.contains(o) {
                    em.derive("slot_dead", vec![(*n).into(), Value::Int(*o)], "dead_store", vec![ltl_fact(*n, &insts[n])]);
                }
            }
        }
    }
    Ok(())
}

/// Def-use pairs, live-out sets and dead stores for stack slots.
pub fn stack_frame_analysis() -> Pass {
    Pass::procedural(
        FRAME_PASS,
        &["ltl_inst", "ltl_succ", "cfg_entry"],
        &["slot_du", "slot_live", "slot_dead"],
        slot_analysis,
    )
}

/// Return kinds as written in `def_site` and `call_info`.
pub const RET_INT: &str = "int";
pub const RET_FLOAT: &str = "float";
pub const RET_VOID: &str = "void";

fn caller_saved() -> Vec<MachReg> {
    MachReg::ALL.iter().copied().filter(|r| r.is_caller_saved()).collect()
}

/// Register accesses of an LTL instruction; calls clobber caller-saved
/// registers and define the return register their callee is known to set.
pub(crate) fn reg_access(l: &LtlInst, call_ret: &dyn Fn(&str) -> Option<&'static str>) -> Access<MachReg> {
    match l {
        LtlInst::Lcall(callee) => {
            let ret = match call_ret(callee) {
                Some(RET_INT) => vec![MachReg::AX],
                Some(RET_FLOAT) => vec![MachReg::X0],
                _ => vec![],
            };
            let kills = caller_saved().into_iter().filter(|r| !ret.contains(r)).collect();
            Access { uses: vec![], defs: ret, kills }
        }
        other => Access { uses: other.uses(), defs: other.defs(), kills: vec![] },
    }
}

fn count_prefix(regs: &[MachReg], set: &BTreeSet<MachReg>) -> i64 {
    regs.iter().rposition(|r| set.contains(r)).map(|i| i as i64 + 1).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct DefSite {
    ints: i64,
    floats: i64,
    ret: &'static str,
}

/// A function returns a value in AX (or X0) when a definition of that
/// register reaches a return and nothing else reads it.
fn def_site(g: &FuncGraph, insts: &BTreeMap<NodeId, LtlInst>, call_ret: &dyn Fn(&str) -> Option<&'static str>) -> DefSite {
    let acc: BTreeMap<NodeId, Access<MachReg>> = insts.iter().map(|(n, l)| (*n, reg_access(l, call_ret))).collect();
    let live = live_in_entry(g, &acc);
    let reach = reaching_defs(g, &acc, &[]);
    let mut read: BTreeSet<(NodeId, MachReg)> = BTreeSet::new();
    for (n, a) in &acc {
        for r in &a.uses {
            for d in reach.get(n).and_then(|m| m.get(r)).into_iter().flatten().flatten() {
                read.insert((*d, *r));
            }
        }
    }
    let mut latest: Option<(NodeId, &'static str)> = None;
    for (n, l) in insts {
        if *l != LtlInst::Lreturn {
            continue;
        }
        let r = reach.get(n);
        for (reg, kind) in [(MachReg::AX, RET_INT), (MachReg::X0, RET_FLOAT)] {
            let last = r
                .and_then(|m| m.get(&reg))
                .and_then(|s| s.iter().flatten().filter(|d| !read.contains(&(**d, reg))).max().copied());
            if let Some(d) = last {
                if latest.map(|(p, _)| d > p).unwrap_or(true) {
                    latest = Some((d, kind));
                }
            }
        }
    }
    DefSite {
        ints: count_prefix(&MachReg::INT_ARGS, &live),
        floats: count_prefix(&MachReg::FLOAT_ARGS, &live),
        ret: latest.map(|(_, k)| k).unwrap_or(RET_VOID),
    }
}

fn seeded_ret(store: &Store) -> EngineResult<BTreeMap<String, &'static str>> {
    let types = store.types();
    let mut out = BTreeMap::new();
    for (t, _) in store.relation("sig_seed")?.iter() {
        let (Some(name), Some(ret)) = (t[0].as_text(), t[2].as_type()) else { continue };
        let kind = if ret == crate::ir::CTypeTable::VOID {
            RET_VOID
        } else if types.is_float(ret) {
            RET_FLOAT
        } else {
            RET_INT
        };
        out.insert(name.to_string(), kind);
    }
    Ok(out)
}

fn call_evidence(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let graphs = functions(store, IRLevel::Ltl)?;
    let insts: Vec<BTreeMap<NodeId, LtlInst>> = graphs.iter().map(|g| ltl_insts(store, g)).collect::<EngineResult<_>>()?;
    let seeds = seeded_ret(store)?;
    // Two rounds: the second knows the return kinds of defined callees.
    let mut known: BTreeMap<String, &'static str> = seeds.clone();
    let mut sites = Vec::new();
    for round in 0..2 {
        let snapshot = known.clone();
        let lookup = |c: &str| snapshot.get(c).copied();
        sites = graphs.iter().zip(&insts).map(|(g, i)| def_site(g, i, &lookup)).collect();
        if round == 0 {
            for (g, s) in graphs.iter().zip(&sites) {
                known.entry(g.name.clone()).or_insert(s.ret);
            }
        }
    }
    let lookup = |c: &str| known.get(c).copied();
    for ((g, ins), site) in graphs.iter().zip(&insts).zip(&sites) {
        let f = Value::text(&g.name);
        let entry = premise("cfg_entry", vec![Value::text("LTL"), f.clone(), g.entry.into()]);
        let mut premises = vec![entry];
        premises.extend(ins.iter().filter(|(_, l)| **l == LtlInst::Lreturn).map(|(n, l)| ltl_fact(*n, l)));
        em.derive(
            "def_site",
            vec![f.clone(), Value::Int(site.ints), Value::Int(site.floats), Value::text(site.ret)],
            "entry_liveness",
            premises,
        );
        let acc: BTreeMap<NodeId, Access<MachReg>> = ins.iter().map(|(n, l)| (*n, reg_access(l, &lookup))).collect();
        let live = live_out(g, &acc);
        for block in g.blocks() {
            let mut defined: BTreeSet<MachReg> = BTreeSet::new();
            for n in block {
                let Some(l) = ins.get(&n) else { continue };
                if let LtlInst::Lcall(callee) = l {
                    let after = live.get(&n).cloned().unwrap_or_default();
                    let ret = if after.contains(&MachReg::AX) {
                        RET_INT
                    } else if after.contains(&MachReg::X0) {
                        RET_FLOAT
                    } else {
                        RET_VOID
                    };
                    em.derive(
                        "call_info",
                        vec![
                            n.into(),
                            Value::text(callee),
                            Value::Int(count_prefix(&MachReg::INT_ARGS, &defined)),
                            Value::Int(count_prefix(&MachReg::FLOAT_ARGS, &defined)),
                            Value::text(ret),
                        ],
                        "call_site",
                        vec![ltl_fact(n, l)],
                    );
                    defined.clear();
                } else {
                    defined.extend(l.defs());
                }
            }
        }
    }
    Ok(())
}

/// `def_site` per function from entry liveness and the registers reaching
/// its returns; `call_info` per call from argument registers set in the
/// calling block and the return register live afterwards.
pub fn collect_call_evidence() -> Pass {
    Pass::procedural(
        CALL_PASS,
        &["ltl_inst", "ltl_succ", "cfg_entry", "sig_seed"],
        &["def_site", "call_info"],
        call_evidence,
    )
}
