//! Type evidence from RTL operations, its propagation along copies, and
//! width defaults for variables nothing else constrains.

use std::collections::{BTreeMap, BTreeSet};

use super::rtlopt::selected_rtl;
use crate::engine::{premise, v, Emitter, EngineResult, Pass, Rule};
use crate::ir::{Addressing, BinOp, CTypeTable, Chunk, CmpKind, IRLevel, Operation, RtlInst, TypeIdx, UnOp};
use crate::lifting::flow::{functions, FuncGraph};
use crate::store::{NodeId, Store, StoreResult, Tuple, Value};

pub const TYPE_EV_PASS: &str = "type_evidence";
pub const DEFAULTS_PASS: &str = "type_defaults";

/// C type of the value a memory chunk moves.
pub fn chunk_ctype(c: Chunk) -> TypeIdx {
    match c {
        Chunk::MInt8s => CTypeTable::CHAR,
        Chunk::MInt8u => CTypeTable::UCHAR,
        Chunk::MInt16s => CTypeTable::SHORT,
        Chunk::MInt16u => CTypeTable::USHORT,
        Chunk::MInt32 => CTypeTable::INT,
        Chunk::MInt64 | Chunk::Many64 => CTypeTable::LONG,
        Chunk::MFloat32 => CTypeTable::FLOAT,
        Chunk::MFloat64 => CTypeTable::DOUBLE,
    }
}

/// The type evidence a value of this chunk gives its register.
fn loaded_type(c: Chunk) -> Option<TypeIdx> {
    match c {
        Chunk::MInt32 => Some(CTypeTable::INT),
        Chunk::MFloat32 => Some(CTypeTable::FLOAT),
        Chunk::MFloat64 => Some(CTypeTable::DOUBLE),
        _ => None,
    }
}

/// Integer evidence from an ordering comparison of this kind.
fn ordered_type(k: CmpKind) -> Option<TypeIdx> {
    match k {
        CmpKind::Int => Some(CTypeTable::INT),
        CmpKind::Intu => Some(CTypeTable::UINT),
        CmpKind::Long => Some(CTypeTable::LONG),
        CmpKind::Float => Some(CTypeTable::DOUBLE),
        CmpKind::Single => Some(CTypeTable::FLOAT),
        CmpKind::Longu => None,
    }
}

fn float_type(b: BinOp) -> TypeIdx {
    if b.is_single() {
        CTypeTable::FLOAT
    } else {
        CTypeTable::DOUBLE
    }
}

/// One piece of evidence found in a function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Evidence {
    Type(u32, TypeIdx, &'static str),
    Deref { base: u32, ofs: i64, ty: TypeIdx },
    Copy(u32, u32),
    Global(String, TypeIdx),
}

/// Evidence from one instruction.
pub fn evidence(types: &CTypeTable, i: &RtlInst) -> Vec<Evidence> {
    use Evidence::*;
    let mut out = Vec::new();
    let access = |c: Chunk, a: &Addressing, args: &[u32], out: &mut Vec<Evidence>| {
        let t = chunk_ctype(c);
        match a {
            Addressing::Aindexed(d) => {
                out.push(Deref { base: args[0], ofs: *d, ty: t });
                let target = if *d == 0 { t } else { CTypeTable::CHAR };
                out.push(Type(args[0], types.pointer(target), "deref"));
            }
            Addressing::Aindexed2scaled(s, _) if *s == c.size() => {
                out.push(Type(args[0], types.pointer(t), "index"));
                out.push(Type(args[1], CTypeTable::LONG, "index"));
            }
            Addressing::Aindexed2(_) | Addressing::Aindexed2scaled(..) => {
                out.push(Type(args[0], types.pointer(CTypeTable::CHAR), "index"));
                out.push(Type(args[1], CTypeTable::LONG, "index"));
            }
            Addressing::Aglobal(sym, 0) => out.push(Global(sym.clone(), t)),
            _ => {}
        }
    };
    match i {
        RtlInst::Iload(c, a, args, d) => {
            access(*c, a, args, &mut out);
            if let Some(t) = loaded_type(*c) {
                out.push(Type(*d, t, "load"));
            }
        }
        RtlInst::Istore(c, a, args, s) => {
            access(*c, a, args, &mut out);
            if let (crate::ir::RSrc::Pseudo(p), Some(t)) = (s, loaded_type(*c)) {
                out.push(Type(*p, t, "store"));
            }
        }
        RtlInst::Iop(op, args, d) => match op {
            Operation::Omove => out.push(Copy(*d, args[0])),
            Operation::Binimm(BinOp::Oaddl | BinOp::Osubl, _) => out.push(Copy(*d, args[0])),
            Operation::Oaddrsymbol(..) => out.push(Type(*d, types.pointer(CTypeTable::CHAR), "address")),
            Operation::Ocmp(c) if c.cmp.is_ordering() => {
                if let Some(t) = ordered_type(c.kind) {
                    out.extend(args.iter().map(|a| Type(*a, t, "compare")));
                }
            }
            Operation::Binop(b) | Operation::Binimm(b, _) if b.is_float() => {
                let t = float_type(*b);
                out.push(Type(*d, t, "float_op"));
                out.extend(args.iter().map(|a| Type(*a, t, "float_op")));
            }
            Operation::Binop(b) | Operation::Binimm(b, _) => {
                if let Some(signed) = b.signedness() {
                    let t = CTypeTable::int_of_size(if b.is_wide() { 8 } else { 4 }, signed);
                    out.push(Type(*d, t, "signedness"));
                    out.push(Type(args[0], t, "signedness"));
                }
            }
            Operation::Unop(u) => {
                use UnOp::*;
                let (a, r) = match u {
                    Olongofint => (Some(CTypeTable::INT), Some(CTypeTable::LONG)),
                    Olongofintu => (Some(CTypeTable::UINT), Some(CTypeTable::ULONG)),
                    Ofloatofsingle => (Some(CTypeTable::FLOAT), Some(CTypeTable::DOUBLE)),
                    Osingleoffloat => (Some(CTypeTable::DOUBLE), Some(CTypeTable::FLOAT)),
                    Onegf => (Some(CTypeTable::DOUBLE), Some(CTypeTable::DOUBLE)),
                    Onegfs => (Some(CTypeTable::FLOAT), Some(CTypeTable::FLOAT)),
                    _ => (None, None),
                };
                out.extend(a.map(|t| Type(args[0], t, "convert")));
                out.extend(r.map(|t| Type(*d, t, "convert")));
            }
            _ => {}
        },
        RtlInst::Icond(c, args, ..) if c.cmp.is_ordering() => {
            if let Some(t) = ordered_type(c.kind) {
                out.extend(args.iter().map(|a| Type(*a, t, "compare")));
            }
        }
        RtlInst::Ibuiltin(name, args, d) if name == "alloca" => {
            out.extend(args.iter().map(|a| Type(*a, CTypeTable::ULONG, "alloca")));
            out.extend(d.map(|d| Type(d, types.pointer(CTypeTable::VOID), "alloca")));
        }
        _ => {}
    }
    out
}

/// The premise standing for a node's selected statement: its `rtl_sel` fact.
pub(crate) fn sel_fact(store: &Store, n: NodeId) -> StoreResult<(String, Tuple)> {
    let key = Value::Node(n);
    let t = store.relation("rtl_sel")?.with_first(&key).next().map(|(t, _)| t.clone());
    Ok(match t {
        Some(t) => premise("rtl_sel", t),
        None => {
            let s = store.relation("rtl_inst")?.with_first(&key).next().map(|(t, _)| t.clone()).unwrap_or_default();
            premise("rtl_inst", s)
        }
    })
}

fn collect(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let types = store.types();
    // 32-bit and float widths rule out pointers; 64-bit integers stay open.
    for (t, _) in store.relation("var_width")?.iter() {
        let Some(w) = t[2].as_type() else { continue };
        if w == CTypeTable::INT || types.is_float(w) {
            em.derive(
                "type_ev",
                vec![t[0].clone(), t[1].clone(), t[2].clone(), Value::text("width")],
                "width",
                vec![premise("var_width", t.clone())],
            );
        }
    }
    for g in functions(store, IRLevel::Rtl)? {
        let f = Value::text(&g.name);
        for (n, i) in selected_rtl(store, &g)? {
            let src = sel_fact(store, n)?;
            for e in evidence(types, &i) {
                match e {
                    Evidence::Type(var, t, why) => em.derive(
                        "type_ev",
                        vec![f.clone(), Value::Int(var as i64), Value::Type(t), Value::text(why)],
                        why,
                        vec![src.clone()],
                    ),
                    Evidence::Deref { base, ofs, ty } => em.derive(
                        "deref",
                        vec![f.clone(), Value::Int(base as i64), Value::Int(ofs), Value::Type(ty), n.into()],
                        "deref",
                        vec![src.clone()],
                    ),
                    Evidence::Copy(d, s) => em.derive(
                        "copy_edge",
                        vec![f.clone(), Value::Int(d as i64), Value::Int(s as i64)],
                        "copy",
                        vec![src.clone()],
                    ),
                    Evidence::Global(sym, t) => {
                        em.derive("global_type", vec![Value::text(sym), Value::Type(t)], "global", vec![src.clone()])
                    }
                }
            }
        }
    }
    Ok(())
}

/// Evidence facts from the selected RTL of every function.
pub fn type_evidence() -> Pass {
    Pass::procedural(
        TYPE_EV_PASS,
        &["rtl_inst", "rtl_opt", "rtl_sel", "rtl_succ", "cfg_entry", "var_width"],
        &["type_ev", "deref", "copy_edge", "global_type"],
        collect,
    )
}

/// `var_type` from evidence, closed under copies in both directions.
pub fn type_propagation(name: &str) -> EngineResult<Pass> {
    let base = Rule::builder("evidence")
        .head("var_type", vec![v("f"), v("x"), v("t")])
        .atom("type_ev", vec![v("f"), v("x"), v("t"), v("why")])
        .build()?;
    let fwd = Rule::builder("copy_forward")
        .head("var_type", vec![v("f"), v("d"), v("t")])
        .atom("copy_edge", vec![v("f"), v("d"), v("s")])
        .atom("var_type", vec![v("f"), v("s"), v("t")])
        .build()?;
    let back = Rule::builder("copy_backward")
        .head("var_type", vec![v("f"), v("s"), v("t")])
        .atom("copy_edge", vec![v("f"), v("d"), v("s")])
        .atom("var_type", vec![v("f"), v("d"), v("t")])
        .build()?;
    Pass::declarative(name, &["type_ev", "copy_edge", "var_type"], &["var_type"], vec![base, fwd, back])
}

/// Variables of a function: everything its selected code and parameters
/// mention.
pub fn function_vars(store: &Store, g: &FuncGraph) -> StoreResult<BTreeSet<u32>> {
    let mut vars = BTreeSet::new();
    for i in selected_rtl(store, g)?.values() {
        vars.extend(i.uses());
        vars.extend(i.def());
    }
    for (t, _) in store.relation("param")?.iter() {
        if t[0].as_text() == Some(g.name.as_str()) {
            vars.extend(t[2].as_int().map(|p| p as u32));
        }
    }
    Ok(vars)
}

fn defaults(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let mut typed: BTreeSet<(String, i64)> = BTreeSet::new();
    for (t, _) in store.relation("var_type")?.iter() {
        if let (Some(f), Some(x)) = (t[0].as_text(), t[1].as_int()) {
            typed.insert((f.to_string(), x));
        }
    }
    let mut widths: BTreeMap<(String, i64), Vec<Tuple>> = BTreeMap::new();
    for (t, _) in store.relation("var_width")?.iter() {
        if let (Some(f), Some(x)) = (t[0].as_text(), t[1].as_int()) {
            widths.entry((f.to_string(), x)).or_default().push(t.clone());
        }
    }
    for g in functions(store, IRLevel::Rtl)? {
        let entry = premise("cfg_entry", vec![Value::text("RTL"), Value::text(&g.name), g.entry.into()]);
        for x in function_vars(store, &g)? {
            let key = (g.name.clone(), x as i64);
            if typed.contains(&key) {
                continue;
            }
            let ws = widths.get(&key).cloned().unwrap_or_default();
            if ws.is_empty() {
                em.derive(
                    "var_type",
                    vec![Value::text(&g.name), Value::Int(x as i64), Value::Type(CTypeTable::LONG)],
                    "no_width",
                    vec![entry.clone()],
                );
            }
            for w in ws {
                em.derive(
                    "var_type",
                    vec![w[0].clone(), w[1].clone(), w[2].clone()],
                    "width",
                    vec![premise("var_width", w)],
                );
            }
        }
    }
    Ok(())
}

/// Width-derived types for variables without any other candidate.
pub fn type_defaults() -> Pass {
    Pass::procedural(
        DEFAULTS_PASS,
        &["var_type", "var_width", "rtl_inst", "rtl_opt", "rtl_sel", "rtl_succ", "cfg_entry", "param"],
        &["var_type"],
        defaults,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Condition;

    #[test]
    fn load_gives_deref_and_pointer() {
        let types = CTypeTable::new();
        let ev = evidence(&types, &RtlInst::Iload(Chunk::MFloat32, Addressing::Aindexed(4), vec![1], 5));
        assert!(ev.contains(&Evidence::Deref { base: 1, ofs: 4, ty: CTypeTable::FLOAT }));
        assert!(ev.contains(&Evidence::Type(1, types.pointer(CTypeTable::CHAR), "deref")));
        assert!(ev.contains(&Evidence::Type(5, CTypeTable::FLOAT, "load")));
    }

    #[test]
    fn unsigned_compare() {
        let types = CTypeTable::new();
        let c = Condition { kind: CmpKind::Intu, cmp: crate::ir::Comparison::Clt, imm: None };
        let ev = evidence(&types, &RtlInst::Iop(Operation::Ocmp(c), vec![3, 4], 5));
        assert_eq!(ev, vec![Evidence::Type(3, CTypeTable::UINT, "compare"), Evidence::Type(4, CTypeTable::UINT, "compare")]);
    }
}
