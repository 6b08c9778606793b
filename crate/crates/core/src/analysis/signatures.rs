//! One signature per function from seeds, the definition, and call sites.

use std::collections::{BTreeMap, BTreeSet};

use super::rtlopt::selected_rtl;
use super::seeds::seeds_in;
use super::types::sel_fact;
use super::{RET_FLOAT, RET_VOID};
use crate::engine::{premise, Emitter, EngineResult, Pass};
use crate::ir::{CType, CTypeTable, IRLevel, RtlInst, TypeIdx};
use crate::lifting::flow::functions;
use crate::store::{NodeId, Store, Tuple, Value};

pub const SIG_PASS: &str = "reconcile_signatures";

pub const ORIGIN_SEED: &str = "external-seed";
pub const ORIGIN_DEF: &str = "definition-site";
pub const ORIGIN_CALL: &str = "call-site";

/// Widening rank used when evidence disagrees: higher wins.
pub fn rank(types: &CTypeTable, t: TypeIdx) -> u8 {
    match types.get(t) {
        CType::Pointer(p) => match types.get(p) {
            CType::Struct(_) => 9,
            CType::Void => 6,
            _ if p == CTypeTable::CHAR => 7,
            _ => 8,
        },
        CType::Float { bits: 64 } => 5,
        CType::Float { .. } => 4,
        CType::Long { signed: false } => 3,
        CType::Long { .. } | CType::Any64 => 2,
        CType::Int { bits: 32, signed: false } => 1,
        _ => 0,
    }
}

/// Widest of `cands`, ties to the smaller type index.
pub fn widest(types: &CTypeTable, cands: impl IntoIterator<Item = TypeIdx>) -> Option<TypeIdx> {
    cands.into_iter().max_by(|a, b| rank(types, *a).cmp(&rank(types, *b)).then(b.cmp(a)))
}

/// Candidates ordered for declaration: highest rank first, then by index.
pub fn by_preference(types: &CTypeTable, cands: impl IntoIterator<Item = TypeIdx>) -> Vec<TypeIdx> {
    let mut v: Vec<TypeIdx> = cands.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    v.sort_by(|a, b| rank(types, *b).cmp(&rank(types, *a)).then(a.cmp(b)));
    v
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Sig {
    params: Vec<TypeIdx>,
    ret: TypeIdx,
    variadic: bool,
    origin: &'static str,
}

type Facts = Vec<(String, Tuple)>;

struct Site {
    caller: String,
    node: NodeId,
    args: Vec<u32>,
    dst: Option<u32>,
}

fn reconcile(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let types = store.types();
    let mut var_types: BTreeMap<(String, u32), (BTreeSet<TypeIdx>, Facts)> = BTreeMap::new();
    for (t, _) in store.relation("var_type")?.iter() {
        let (Some(f), Some(x), Some(ty)) = (t[0].as_text(), t[1].as_int(), t[2].as_type()) else { continue };
        let e = var_types.entry((f.to_string(), x as u32)).or_default();
        e.0.insert(ty);
        e.1.push(premise("var_type", t.clone()));
    }
    let mut widths: BTreeMap<(String, u32), (TypeIdx, Tuple)> = BTreeMap::new();
    for (t, _) in store.relation("var_width")?.iter() {
        if let (Some(f), Some(x), Some(ty)) = (t[0].as_text(), t[1].as_int(), t[2].as_type()) {
            widths.insert((f.to_string(), x as u32), (ty, t.clone()));
        }
    }
    // Best type for a variable, with the facts supporting it.
    let best = |f: &str, x: u32, extra: &[TypeIdx]| -> (Option<TypeIdx>, Facts) {
        let key = (f.to_string(), x);
        let (set, facts) = var_types.get(&key).cloned().unwrap_or_default();
        let pick = widest(types, set.iter().copied().chain(extra.iter().copied()));
        match pick {
            Some(t) => (Some(t), facts),
            None => match widths.get(&key) {
                Some((w, wt)) => (Some(*w), vec![premise("var_width", wt.clone())]),
                None => (None, vec![]),
            },
        }
    };

    let mut params: BTreeMap<String, Vec<(u32, Tuple)>> = BTreeMap::new();
    for (t, _) in store.relation("param")?.iter() {
        if let (Some(f), Some(_), Some(p)) = (t[0].as_text(), t[1].as_int(), t[2].as_int()) {
            params.entry(f.to_string()).or_default().push((p as u32, t.clone()));
        }
    }
    for v in params.values_mut() {
        v.sort_by_key(|(_, t)| t[1].as_int());
    }
    let mut def_sites: BTreeMap<String, (String, Tuple)> = BTreeMap::new();
    for (t, _) in store.relation("def_site")?.iter() {
        if let (Some(f), Some(r)) = (t[0].as_text(), t[3].as_text()) {
            def_sites.insert(f.to_string(), (r.to_string(), t.clone()));
        }
    }
    let seeds = seeds_in(store)?;

    let graphs = functions(store, IRLevel::Rtl)?;
    let mut sites: BTreeMap<String, Vec<Site>> = BTreeMap::new();
    let mut returns: BTreeMap<String, Vec<(u32, NodeId)>> = BTreeMap::new();
    for g in &graphs {
        let insts = selected_rtl(store, g)?;
        for (n, i) in &insts {
            match i {
                RtlInst::Icall(callee, args, dst) => sites.entry(callee.clone()).or_default().push(Site {
                    caller: g.name.clone(),
                    node: *n,
                    args: args.clone(),
                    dst: *dst,
                }),
                RtlInst::Ireturn(Some(x)) => returns.entry(g.name.clone()).or_default().push((*x, *n)),
                _ => {}
            }
        }
    }

    // Parameter types a seeded callee expects of the caller's variables.
    let mut seeded_args: BTreeMap<(String, u32), (Vec<TypeIdx>, Facts)> = BTreeMap::new();
    for (callee, ss) in &sites {
        let Some((seed, st)) = seeds.get(callee) else { continue };
        for s in ss {
            for (a, t) in s.args.iter().zip(&seed.params) {
                let e = seeded_args.entry((s.caller.clone(), *a)).or_default();
                e.0.push(*t);
                e.1.push(premise("sig_seed", st.clone()));
            }
        }
    }

    let mut sigs: BTreeMap<String, (Sig, Facts)> = BTreeMap::new();
    for g in &graphs {
        let f = &g.name;
        let mut facts: Facts = vec![premise("cfg_entry", vec![Value::text("RTL"), Value::text(f), g.entry.into()])];
        let mut ps = Vec::new();
        for (i, (p, pt)) in params.get(f).into_iter().flatten().enumerate() {
            facts.push(premise("param", pt.clone()));
            // Argument types callers pass at this position.
            let mut from_calls = Vec::new();
            for s in sites.get(f).into_iter().flatten() {
                if let Some(a) = s.args.get(i) {
                    let (t, fs) = best(&s.caller, *a, &[]);
                    if let Some(t) = t {
                        from_calls.push(t);
                        facts.extend(fs);
                    }
                }
            }
            if let Some((ts, fs)) = seeded_args.get(&(f.clone(), *p)) {
                from_calls.extend(ts.iter().copied());
                facts.extend(fs.iter().cloned());
            }
            let (t, fs) = best(f, *p, &from_calls);
            facts.extend(fs);
            ps.push(t.unwrap_or(CTypeTable::LONG));
        }
        let (kind, dt) = def_sites.get(f).cloned().unwrap_or_else(|| (RET_VOID.to_string(), Tuple::new()));
        if !dt.is_empty() {
            facts.push(premise("def_site", dt));
        }
        let ret = if kind == RET_VOID {
            CTypeTable::VOID
        } else {
            let mut cands = BTreeSet::new();
            for (x, n) in returns.get(f).into_iter().flatten() {
                let (t, fs) = best(f, *x, &[]);
                cands.extend(t);
                facts.extend(fs);
                facts.push(sel_fact(store, *n)?);
            }
            let float = kind == RET_FLOAT;
            let fitting = cands.into_iter().filter(|t| types.is_float(*t) == float);
            widest(types, fitting).unwrap_or(if float { CTypeTable::DOUBLE } else { CTypeTable::INT })
        };
        let def = Sig { params: ps, ret, variadic: false, origin: ORIGIN_DEF };
        let chosen = match seeds.get(f) {
            Some((seed, st)) if seed.params.len() == def.params.len() => {
                facts.push(premise("sig_seed", st.clone()));
                Sig { params: seed.params.clone(), ret: seed.ret, variadic: seed.variadic, origin: ORIGIN_SEED }
            }
            Some((seed, st)) => {
                em.derive(
                    "diag",
                    vec![
                        g.entry.into(),
                        Value::text(SIG_PASS),
                        Value::text("warning"),
                        Value::text(format!(
                            "{f}: seed has {} parameters, definition reads {}; keeping the definition",
                            seed.params.len(),
                            def.params.len()
                        )),
                    ],
                    "arity_conflict",
                    vec![premise("sig_seed", st.clone()), facts[0].clone()],
                );
                def
            }
            None => def,
        };
        sigs.insert(f.clone(), (chosen, facts));
    }
    for (callee, ss) in &sites {
        if sigs.contains_key(callee) {
            continue;
        }
        if let Some((seed, st)) = seeds.get(callee) {
            let sig = Sig { params: seed.params.clone(), ret: seed.ret, variadic: seed.variadic, origin: ORIGIN_SEED };
            sigs.insert(callee.clone(), (sig, vec![premise("sig_seed", st.clone())]));
            continue;
        }
        // Nothing but the call sites: widest argument and result types seen.
        let arity = ss.iter().map(|s| s.args.len()).max().unwrap_or(0);
        let mut facts = Vec::new();
        let mut ps = Vec::new();
        for i in 0..arity {
            let mut cands = Vec::new();
            for s in ss {
                if let Some(a) = s.args.get(i) {
                    let (t, fs) = best(&s.caller, *a, &[]);
                    cands.extend(t);
                    facts.extend(fs);
                }
            }
            ps.push(widest(types, cands).unwrap_or(CTypeTable::LONG));
        }
        let mut rets = Vec::new();
        for s in ss {
            facts.push(sel_fact(store, s.node)?);
            if let Some(d) = s.dst {
                let (t, fs) = best(&s.caller, d, &[]);
                rets.extend(t);
                facts.extend(fs);
            }
        }
        let ret = widest(types, rets).unwrap_or(CTypeTable::VOID);
        sigs.insert(callee.clone(), (Sig { params: ps, ret, variadic: false, origin: ORIGIN_CALL }, facts));
    }

    for (name, (sig, facts)) in &sigs {
        let tuple = vec![
            Value::text(name),
            Value::Tuple(sig.params.iter().map(|t| Value::Type(*t)).collect()),
            Value::Type(sig.ret),
            Value::Int(sig.variadic as i64),
            Value::text(sig.origin),
        ];
        em.derive("signature", tuple.clone(), sig.origin, facts.clone());
        if sig.origin == ORIGIN_CALL {
            continue;
        }
        let because = vec![premise("signature", tuple)];
        let mut ev = |f: &str, x: u32, t: TypeIdx| {
            em.derive(
                "type_ev",
                vec![Value::text(f), Value::Int(x as i64), Value::Type(t), Value::text("signature")],
                "signature",
                because.clone(),
            );
        };
        for ((p, _), t) in params.get(name).into_iter().flatten().zip(&sig.params) {
            ev(name, *p, *t);
        }
        if sig.ret != CTypeTable::VOID {
            for (x, _) in returns.get(name).into_iter().flatten() {
                ev(name, *x, sig.ret);
            }
        }
        for s in sites.get(name).into_iter().flatten() {
            for (a, t) in s.args.iter().zip(&sig.params) {
                ev(&s.caller, *a, *t);
            }
            if let (Some(d), true) = (s.dst, sig.ret != CTypeTable::VOID) {
                ev(&s.caller, d, sig.ret);
            }
        }
    }
    Ok(())
}

/// Signatures for every defined and called function, plus the type evidence
/// they imply for parameters, returns, call arguments and results.
pub fn reconcile_signatures() -> Pass {
    Pass::procedural(
        SIG_PASS,
        &[
            "var_type", "var_width", "param", "def_site", "sig_seed", "rtl_inst", "rtl_opt", "rtl_sel", "rtl_succ",
            "cfg_entry",
        ],
        &["signature", "type_ev", "diag"],
        reconcile,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widening_prefers_pointers_then_wider() {
        let types = CTypeTable::new();
        let s = types.intern_struct(crate::ir::StructLayout::new(vec![(0, CTypeTable::INT), (4, CTypeTable::FLOAT)]));
        let cands = [CTypeTable::INT, CTypeTable::LONG, types.pointer(CTypeTable::CHAR), types.pointer(s)];
        assert_eq!(widest(&types, cands), Some(types.pointer(s)));
        assert_eq!(widest(&types, [CTypeTable::INT, CTypeTable::LONG]), Some(CTypeTable::LONG));
        assert_eq!(widest(&types, [CTypeTable::FLOAT, CTypeTable::DOUBLE]), Some(CTypeTable::DOUBLE));
        assert_eq!(widest(&types, []), None);
    }
}
