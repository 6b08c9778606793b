//! Mach → LTL: frame recognition, slot descriptors and the LTL CFG.

use std::collections::{BTreeMap, BTreeSet};

use super::diag_tuple;
use super::flow::{functions, stmts_at, FuncGraph};
use crate::engine::{premise, Emitter, EngineResult, Pass};
use crate::ir::schema::EDGE_FALLTHROUGH;
use crate::ir::{Addressing, FrameOp, IRLevel, LtlInst, MachInst, MachReg, Operation, SlotKind, Stmt, Typ};
use crate::store::{NodeId, Store, Value};

pub const STACK_PASS: &str = "normalize_stack";
pub const LTL_CFG_PASS: &str = "build_cfg_ltl";

/// A recognized frame: size of the static allocation and callee-saved
/// registers pushed after the frame pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub size: i64,
    pub saved: Vec<MachReg>,
}

impl Frame {
    pub fn kind_of(&self, ofs: i64) -> SlotKind {
        if ofs >= 16 {
            SlotKind::Incoming
        } else {
            SlotKind::Local
        }
    }

    pub fn is_spill(&self, ofs: i64) -> bool {
        ofs < 0 && ofs % 8 == 0 && ((-ofs / 8) as usize) <= self.saved.len()
    }

    /// Frame-pointer relative offset of a stack-pointer relative access.
    pub fn sp_to_bp(&self, d: i64) -> i64 {
        d - 8 * self.saved.len() as i64 - self.size
    }

    pub fn to_value(&self) -> Value {
        Value::Tuple(self.saved.iter().map(|r| Value::Reg(*r)).collect())
    }
}

fn mach_stmts(store: &Store, n: NodeId) -> EngineResult<Vec<MachInst>> {
    Ok(stmts_at(store, "mach_inst", n)?
        .into_iter()
        .filter_map(|s| match s {
            Stmt::Mach(m) => Some(m),
            _ => None,
        })
        .collect())
}

fn fallthrough(g: &FuncGraph, n: NodeId) -> Option<NodeId> {
    g.edge_to(n, EDGE_FALLTHROUGH)
}

/// Matches `[nop] push %rbp; mov %rsp,%rbp; push <callee-saved>*; [sub $N,%rsp]`.
/// Returns the frame and the prologue nodes.
pub fn recognize_prologue(store: &Store, g: &FuncGraph) -> EngineResult<Option<(Frame, Vec<NodeId>)>> {
    let has = |n: NodeId, p: &dyn Fn(&MachInst) -> bool| -> EngineResult<bool> {
        Ok(mach_stmts(store, n)?.iter().any(p))
    };
    let mut nodes = Vec::new();
    let mut cur = Some(g.entry);
    if let Some(n) = cur {
        if has(n, &|m| *m == MachInst::Mnop)? {
            nodes.push(n);
            cur = fallthrough(g, n);
        }
    }
    let Some(n) = cur else { return Ok(None) };
    if !has(n, &|m| *m == MachInst::Mframe(FrameOp::Fpush(MachReg::BP)))? {
        return Ok(None);
    }
    nodes.push(n);
    let Some(n) = fallthrough(g, n) else { return Ok(None) };
    if !has(n, &|m| *m == MachInst::Mframe(FrameOp::Fsetfp))? {
        return Ok(None);
    }
    nodes.push(n);
    let mut saved = Vec::new();
    let mut size = 0;
    let mut cur = fallthrough(g, n);
    while let Some(n) = cur {
        let stmts = mach_stmts(store, n)?;
        let push = stmts.iter().find_map(|m| match m {
            MachInst::Mframe(FrameOp::Fpush(r)) if r.is_callee_saved() => Some(*r),
            _ => None,
        });
        if let Some(r) = push {
            saved.push(r);
            nodes.push(n);
            cur = fallthrough(g, n);
            continue;
        }
        if let Some(k) = stmts.iter().find_map(|m| match m {
            MachInst::Mframe(FrameOp::Falloc(k)) => Some(*k),
            _ => None,
        }) {
            size = k;
            nodes.push(n);
        }
        break;
    }
    Ok(Some((Frame { size, saved }, nodes)))
}

fn reads_frame_regs(args: &[MachReg]) -> bool {
    args.iter().any(|r| matches!(r, MachReg::SP | MachReg::BP))
}

/// LTL form of one Mach candidate; `Err` carries a diagnostic.
pub fn to_ltl(frame: &Frame, m: &MachInst) -> Result<LtlInst, String> {
    use LtlInst::*;
    Ok(match m {
        MachInst::Mgetstack(o, t, d) => Lgetstack(frame.kind_of(*o), *o, t.concretize(), *d),
        MachInst::Msetstack(s, o, t) => Lsetstack(*s, frame.kind_of(*o), *o, *t),
        MachInst::Mload(c, Addressing::Ainstack(d), _, r) => {
            if c.size() < 4 {
                return Err("sub-word outgoing slot access".into());
            }
            Lgetstack(SlotKind::Outgoing, frame.sp_to_bp(*d), c.typ().concretize(), *r)
        }
        MachInst::Mstore(c, Addressing::Ainstack(d), _, s) => {
            if c.size() < 4 {
                return Err("sub-word outgoing slot access".into());
            }
            Lsetstack(*s, SlotKind::Outgoing, frame.sp_to_bp(*d), c.typ())
        }
        MachInst::Mload(c, a, args, r) => {
            if reads_frame_regs(args) {
                return Err("frame register used as an address".into());
            }
            Lload(*c, a.clone(), args.clone(), *r)
        }
        MachInst::Mstore(c, a, args, s) => {
            if reads_frame_regs(args) {
                return Err("frame register used as an address".into());
            }
            Lstore(*c, a.clone(), args.clone(), *s)
        }
        MachInst::Mop(_, _, MachReg::SP) => Lnop,
        MachInst::Mop(op, args, d) => {
            if reads_frame_regs(args) || *d == MachReg::BP {
                return Err("stack or frame pointer escapes into a register".into());
            }
            if let Operation::Olea(Addressing::Ainstack(_)) = op {
                return Err("stack-pointer relative address".into());
            }
            Lop(op.clone(), args.clone(), *d)
        }
        MachInst::Mcall(f) => Lcall(f.clone()),
        MachInst::Mgoto(n) => Lgoto(*n),
        MachInst::Mcond(c, args, t, e) => Lcond(*c, args.clone(), *t, *e),
        MachInst::Mreturn => Lreturn,
        MachInst::Mbuiltin(name, args, d) => Lbuiltin(name.clone(), args.clone(), *d),
        MachInst::Mframe(_) | MachInst::Mnop => Lnop,
    })
}

fn slot_width(m: &MachInst) -> Option<(i64, Typ)> {
    match m {
        MachInst::Mgetstack(o, t, _) | MachInst::Msetstack(_, o, t) => Some((*o, *t)),
        _ => None,
    }
}

fn normalize(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    for g in functions(store, IRLevel::Mach)? {
        let f = Value::text(&g.name);
        let Some((frame, _)) = recognize_prologue(store, &g)? else {
            let entry = stmts_at(store, "mach_inst", g.entry)?;
            let mut premises = vec![premise("cfg_entry", vec![Value::text("Mach"), f.clone(), g.entry.into()])];
            if let Some(s) = entry.into_iter().next() {
                premises.push(premise("mach_inst", vec![g.entry.into(), Value::stmt(s)]));
            }
            em.derive(
                "diag",
                diag_tuple(g.entry, STACK_PASS, "error", format!("unrecognized frame setup in `{}`; function skipped", g.name)),
                "prologue",
                premises,
            );
            continue;
        };
        let entry_fact = premise("cfg_entry", vec![Value::text("Mach"), f.clone(), g.entry.into()]);
        let frame_tuple = vec![f.clone(), Value::Int(frame.size), frame.to_value()];
        em.derive("frame", frame_tuple.clone(), "prologue", vec![entry_fact]);
        let frame_fact = premise("frame", frame_tuple);
        for (i, _) in frame.saved.iter().enumerate() {
            let ofs = -8 * (i as i64 + 1);
            em.derive(
                "slot_desc",
                vec![f.clone(), Value::Int(ofs), Value::text(SlotKind::Local.name()), Value::Int(8), Value::Int(1)],
                "spill",
                vec![frame_fact.clone()],
            );
        }
        for n in &g.nodes {
            let stmts = mach_stmts(store, *n)?;
            let any_ok = stmts.iter().any(|m| to_ltl(&frame, m).is_ok());
            for m in stmts {
                let src = premise("mach_inst", vec![(*n).into(), Value::stmt(Stmt::Mach(m.clone()))]);
                if let Some((o, t)) = slot_width(&m) {
                    if !frame.is_spill(o) {
                        em.derive(
                            "slot_desc",
                            vec![
                                f.clone(),
                                Value::Int(o),
                                Value::text(frame.kind_of(o).name()),
                                Value::Int(t.size()),
                                Value::Int(0),
                            ],
                            "slot",
                            vec![src.clone(), frame_fact.clone()],
                        );
                    }
                }
                match to_ltl(&frame, &m) {
                    Ok(l) => {
                        if let LtlInst::Lgetstack(SlotKind::Outgoing, o, t, _) | LtlInst::Lsetstack(_, SlotKind::Outgoing, o, t) = &l {
                            em.derive(
                                "slot_desc",
                                vec![
                                    f.clone(),
                                    Value::Int(*o),
                                    Value::text(SlotKind::Outgoing.name()),
                                    Value::Int(t.size()),
                                    Value::Int(0),
                                ],
                                "slot",
                                vec![src.clone(), frame_fact.clone()],
                            );
                        }
                        em.derive(
                            "ltl_inst",
                            vec![(*n).into(), Value::stmt(Stmt::Ltl(l))],
                            "translate",
                            vec![src, frame_fact.clone()],
                        );
                    }
                    Err(_) if any_ok => {}
                    Err(msg) => em.derive("diag", diag_tuple(*n, STACK_PASS, "error", msg), "translate", vec![src]),
                }
            }
        }
    }
    Ok(())
}

/// Recognizes each function's frame, emits slot descriptors and rewrites
/// stack accesses frame-pointer relative.
pub fn normalize_stack() -> Pass {
    Pass::procedural(
        STACK_PASS,
        &["mach_inst", "mach_succ", "cfg_entry"],
        &["ltl_inst", "frame", "slot_desc", "diag"],
        normalize,
    )
}

fn ltl_cfg(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let framed: BTreeSet<String> =
        store.relation("frame")?.iter().filter_map(|(t, _)| Some(t[0].as_text()?.to_string())).collect();
    for g in functions(store, IRLevel::Mach)? {
        if !framed.contains(&g.name) {
            continue;
        }
        let f = Value::text(&g.name);
        let has_ltl = |n: NodeId| -> EngineResult<bool> { Ok(!stmts_at(store, "ltl_inst", n)?.is_empty()) };
        let mut joins: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for n in &g.nodes {
            if g.preds(*n).len() >= 2 && *n != g.entry && has_ltl(*n)? {
                let j = em.fresh_node();
                joins.insert(*n, j);
                let into: Vec<_> = g
                    .preds(*n)
                    .iter()
                    .flat_map(|p| {
                        g.succ[p]
                            .iter()
                            .filter(|(m, _)| m == n)
                            .map(|(m, k)| premise("mach_succ", vec![(*p).into(), (*m).into(), Value::text(k)]))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                em.derive("ltl_inst", vec![j.into(), Value::stmt(Stmt::Ltl(LtlInst::Lnop))], "join", into.clone());
                em.derive("node_func", vec![j.into(), f.clone()], "join", into);
                em.derive(
                    "ltl_succ",
                    vec![j.into(), (*n).into(), Value::text(EDGE_FALLTHROUGH)],
                    "join",
                    vec![premise("ltl_inst", vec![j.into(), Value::stmt(Stmt::Ltl(LtlInst::Lnop))])],
                );
            }
        }
        for (n, edges) in &g.succ {
            if !has_ltl(*n)? {
                continue;
            }
            for (m, k) in edges {
                if !has_ltl(*m)? {
                    continue;
                }
                let to = joins.get(m).copied().unwrap_or(*m);
                em.derive(
                    "ltl_succ",
                    vec![(*n).into(), to.into(), Value::text(k)],
                    "copy",
                    vec![premise("mach_succ", vec![(*n).into(), (*m).into(), Value::text(k)])],
                );
            }
        }
        let entry = premise("cfg_entry", vec![Value::text("Mach"), f.clone(), g.entry.into()]);
        em.derive("cfg_entry", vec![Value::text("LTL"), f.clone(), g.entry.into()], "entry", vec![entry]);
        for n in &g.nodes {
            for s in stmts_at(store, "ltl_inst", *n)? {
                if s == Stmt::Ltl(LtlInst::Lreturn) {
                    em.derive(
                        "cfg_exit",
                        vec![Value::text("LTL"), f.clone(), (*n).into()],
                        "exit",
                        vec![premise("ltl_inst", vec![(*n).into(), Value::stmt(s)])],
                    );
                }
            }
        }
    }
    Ok(())
}

/// LTL CFG: the Mach edges, with a synthetic join node in front of every
/// node that has several predecessors.
pub fn build_cfg_ltl() -> Pass {
    Pass::procedural(
        LTL_CFG_PASS,
        &["ltl_inst", "mach_succ", "cfg_entry", "frame"],
        &["ltl_succ", "ltl_inst", "node_func", "cfg_entry", "cfg_exit"],
        ltl_cfg,
    )
}
