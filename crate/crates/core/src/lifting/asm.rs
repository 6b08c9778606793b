//! Asm → Mach recognition and the Mach-level CFG.

use std::collections::BTreeMap;

use super::mach::{is_flag_user, lift_flag_user, lift_instruction, operands, Lift};
use super::{diag_tuple, str_err};
use crate::engine::{c, premise, v, EngineResult, Pass, Rule};
use crate::ir::schema::{EDGE_CALL, EDGE_FALLTHROUGH, EDGE_FALSE, EDGE_TRUE};
use crate::ir::{MachInst, Stmt};
use crate::store::{NodeId, Store, Value};

pub const LIFT_PASS: &str = "lift_asm_to_mach";
pub const MACH_CFG_PASS: &str = "build_cfg_mach";
/// Edge kind of an unconditional jump.
pub const EDGE_JUMP: &str = "jump";

fn lift_value(m: &Value, ops: &Value) -> Result<Vec<Vec<Value>>, String> {
    let m = m.as_text().ok_or("mnemonic is not text")?;
    Ok(match lift_instruction(m, &operands(ops)?) {
        Lift::Inst(i) => vec![vec![Value::stmt(Stmt::Mach(i))]],
        _ => Vec::new(),
    })
}

fn flag_value(a: &[Value]) -> Result<Vec<Vec<Value>>, String> {
    let (Some(m1), Some(m2), Some(k)) = (a[0].as_text(), a[2].as_text(), a[4].as_node()) else {
        return Err("bad flag-user bindings".into());
    };
    if !is_flag_user(m2) {
        return Ok(Vec::new());
    }
    Ok(match lift_flag_user(m1, &operands(&a[1])?, m2, &operands(&a[3])?, k) {
        Ok(i) => vec![vec![Value::stmt(Stmt::Mach(i))]],
        Err(_) => Vec::new(),
    })
}

/// Problems the rules cannot see: unsupported forms and flag consumers whose
/// setter is missing or untracked.
fn lift_diagnostics(store: &Store, em: &mut crate::engine::Emitter) -> EngineResult<()> {
    let instrs: BTreeMap<NodeId, (&str, &Value, &[Value])> = store
        .relation("instr")?
        .iter()
        .filter_map(|(t, _)| Some((t[0].as_node()?, (t[2].as_text()?, &t[3], t.as_slice()))))
        .collect();
    let mut pred = BTreeMap::new();
    let mut succ = BTreeMap::new();
    for (t, _) in store.relation("next_instr")?.iter() {
        if let (Some(a), Some(b)) = (t[0].as_node(), t[1].as_node()) {
            pred.insert(b, a);
            succ.insert(a, b);
        }
    }
    for (n, (m, ops, tuple)) in &instrs {
        let ops_list = operands(ops).map_err(|e| str_err(LIFT_PASS, e))?;
        let msg = match lift_instruction(m, &ops_list) {
            Lift::Inst(_) => continue,
            Lift::Unsupported(msg) => msg,
            Lift::Deferred => {
                let Some(k) = succ.get(n) else {
                    em.derive(
                        "diag",
                        diag_tuple(*n, LIFT_PASS, "error", format!("{m}: no fallthrough successor")),
                        "unsupported",
                        vec![premise("instr", tuple.to_vec())],
                    );
                    continue;
                };
                let setter = pred.get(n).and_then(|p| instrs.get(p));
                match setter {
                    None => format!("{m}: flags are not set before the branch"),
                    Some((m1, o1, _)) => {
                        let o1 = operands(o1).map_err(|e| str_err(LIFT_PASS, e))?;
                        match lift_flag_user(m1, &o1, m, &ops_list, *k) {
                            Ok(_) => continue,
                            Err(e) => e,
                        }
                    }
                }
            }
        };
        em.derive(
            "diag",
            diag_tuple(*n, LIFT_PASS, "error", msg),
            "unsupported",
            vec![premise("instr", tuple.to_vec())],
        );
    }
    Ok(())
}

/// Recognizes instructions as typed Mach candidates. Every `instr` node ends
/// up with a `mach_inst` candidate or a `diag` fact.
pub fn lift_asm_to_mach() -> EngineResult<Pass> {
    let single = Rule::builder("lift")
        .head("mach_inst", vec![v("n"), v("s")])
        .atom("instr", vec![v("n"), v("f"), v("m"), v("ops")])
        .compute("lift", &["m", "ops"], &["s"], |a| lift_value(&a[0], &a[1]))
        .build()?;
    let flag = Rule::builder("flag_user")
        .head("mach_inst", vec![v("j"), v("s")])
        .atom("instr", vec![v("c"), v("f"), v("m1"), v("o1")])
        .atom("next_instr", vec![v("c"), v("j")])
        .atom("instr", vec![v("j"), v("f"), v("m2"), v("o2")])
        .atom("next_instr", vec![v("j"), v("k")])
        .compute("lift_flags", &["m1", "o1", "m2", "o2", "k"], &["s"], flag_value)
        .build()?;
    let owner = Rule::builder("owner")
        .head("node_func", vec![v("n"), v("f")])
        .atom("instr", vec![v("n"), v("f"), v("m"), v("ops")])
        .build()?;
    Pass::procedural(LIFT_PASS, &["instr", "next_instr"], &["mach_inst", "diag", "node_func"], lift_diagnostics)
        .with_rules(vec![single, flag, owner])
}

fn mach_cfg(store: &Store, em: &mut crate::engine::Emitter) -> EngineResult<()> {
    let owner: BTreeMap<NodeId, String> = super::flow::node_funcs(store)?;
    let next: BTreeMap<NodeId, NodeId> = store
        .relation("next_instr")?
        .iter()
        .filter_map(|(t, _)| Some((t[0].as_node()?, t[1].as_node()?)))
        .collect();
    for (t, _) in store.relation("mach_inst")?.iter() {
        let (Some(n), Some(Stmt::Mach(s))) = (t[0].as_node(), t[1].as_stmt()) else { continue };
        let Some(f) = owner.get(&n) else { continue };
        let here = premise("mach_inst", t.clone());
        let edge = |to: NodeId, kind: &str, extra: (String, Vec<Value>), em: &mut crate::engine::Emitter| {
            em.derive(
                "mach_succ",
                vec![n.into(), to.into(), Value::text(kind)],
                kind,
                vec![here.clone(), extra],
            );
        };
        let targeted = |to: NodeId, kind: &str, em: &mut crate::engine::Emitter| {
            if owner.get(&to) == Some(f) {
                edge(to, kind, premise("node_func", vec![to.into(), Value::text(f)]), em);
            } else {
                em.derive(
                    "diag",
                    diag_tuple(n, MACH_CFG_PASS, "error", format!("branch to unknown node {to}")),
                    "unknown_target",
                    vec![here.clone()],
                );
            }
        };
        match s {
            MachInst::Mreturn => {
                em.derive(
                    "cfg_exit",
                    vec![Value::text("Mach"), Value::text(f), n.into()],
                    "exit",
                    vec![here.clone(), premise("node_func", vec![n.into(), Value::text(f)])],
                );
            }
            MachInst::Mgoto(to) => targeted(*to, EDGE_JUMP, em),
            MachInst::Mcond(_, _, to, fall) => {
                targeted(*to, EDGE_TRUE, em);
                targeted(*fall, EDGE_FALSE, em);
            }
            other => {
                let kind = if matches!(other, MachInst::Mcall(_)) { EDGE_CALL } else { EDGE_FALLTHROUGH };
                match next.get(&n) {
                    Some(m) => edge(*m, kind, premise("next_instr", vec![n.into(), (*m).into()]), em),
                    None => em.derive(
                        "diag",
                        diag_tuple(n, MACH_CFG_PASS, "warning", "control falls off the end of the function"),
                        "fall_off",
                        vec![here.clone()],
                    ),
                }
            }
        }
    }
    Ok(())
}

/// Mach CFG: fallthrough, branch, jump and call-return edges plus entry and
/// exit markers.
pub fn build_cfg_mach() -> EngineResult<Pass> {
    let entry = Rule::builder("entry")
        .head("cfg_entry", vec![c("Mach"), v("f"), v("e")])
        .atom("func", vec![v("f"), v("e")])
        .build()?;
    Pass::procedural(
        MACH_CFG_PASS,
        &["mach_inst", "next_instr", "node_func", "func"],
        &["mach_succ", "cfg_entry", "cfg_exit", "diag"],
        mach_cfg,
    )
    .with_rules(vec![entry])
}
