//! LTL → RTL: machine registers become pseudo-registers, one per web of
//! definitions and uses, and stack slots become variables.

use std::collections::{BTreeMap, BTreeSet};

use super::flow::{functions, reaching_defs, Access, DefSite, FuncGraph};
use crate::analysis::seeds::{seeds_in, Seed};
use crate::analysis::{ltl_insts, RET_FLOAT, RET_INT};
use crate::engine::{premise, Emitter, EngineResult, Pass};
use crate::ir::schema::{EDGE_FALLTHROUGH, EDGE_FALSE, EDGE_TRUE};
use crate::ir::{
    BinOp, CTypeTable, Chunk, CmpKind, IRLevel, LtlInst, MachReg, Operation, RSrc, RtlInst, Src, Stmt, Typ, TypeIdx,
    UnOp,
};
use crate::store::{NodeId, Store, Tuple, Value};

use super::asm::EDGE_JUMP;
use super::stack::Frame;

pub const PSEUDO_PASS: &str = "recover_pseudoregs";

/// How a call site passes arguments and returns its result.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CallConv {
    /// Argument registers in C parameter order.
    pub args: Vec<MachReg>,
    pub ret: Option<MachReg>,
    pub ret_width: Option<TypeIdx>,
}

/// Width class of a C type as seen by registers.
pub fn width_of(types: &CTypeTable, t: TypeIdx) -> Option<TypeIdx> {
    if t == CTypeTable::VOID {
        None
    } else if t == CTypeTable::FLOAT || t == CTypeTable::DOUBLE {
        Some(t)
    } else if types.size_of(t) == 8 {
        Some(CTypeTable::LONG)
    } else {
        Some(CTypeTable::INT)
    }
}

fn regs_for(ints: i64, floats: i64) -> Vec<MachReg> {
    let mut v: Vec<MachReg> = MachReg::INT_ARGS.iter().take(ints.max(0) as usize).copied().collect();
    v.extend(MachReg::FLOAT_ARGS.iter().take(floats.max(0) as usize).copied());
    v
}

fn ret_reg(kind: &str) -> Option<MachReg> {
    match kind {
        RET_INT => Some(MachReg::AX),
        RET_FLOAT => Some(MachReg::X0),
        _ => None,
    }
}

/// Call-site evidence: seeded signatures first, then the callee's own
/// definition, then what the call site shows.
pub(crate) struct CallEvidence {
    pub seeds: BTreeMap<String, (Seed, Tuple)>,
    pub sites: BTreeMap<String, (i64, i64, String, Tuple)>,
    pub infos: BTreeMap<NodeId, (i64, i64, String, Tuple)>,
}

impl CallEvidence {
    pub fn load(store: &Store) -> EngineResult<CallEvidence> {
        let seeds = seeds_in(store)?;
        let mut sites = BTreeMap::new();
        for (t, _) in store.relation("def_site")?.iter() {
            if let (Some(f), Some(i), Some(x), Some(r)) = (t[0].as_text(), t[1].as_int(), t[2].as_int(), t[3].as_text()) {
                sites.insert(f.to_string(), (i, x, r.to_string(), t.clone()));
            }
        }
        let mut infos = BTreeMap::new();
        for (t, _) in store.relation("call_info")?.iter() {
            if let (Some(n), Some(i), Some(x), Some(r)) = (t[0].as_node(), t[2].as_int(), t[3].as_int(), t[4].as_text()) {
                infos.insert(n, (i, x, r.to_string(), t.clone()));
            }
        }
        Ok(CallEvidence { seeds, sites, infos })
    }

    /// The convention at call node `n` and the fact it came from.
    pub fn conv(&self, types: &CTypeTable, callee: &str, n: NodeId) -> (CallConv, Option<(String, Tuple)>) {
        if let Some((seed, t)) = self.seeds.get(callee) {
            let mut ints = MachReg::INT_ARGS.iter();
            let mut floats = MachReg::FLOAT_ARGS.iter();
            let mut args: Vec<MachReg> = seed
                .params
                .iter()
                .filter_map(|p| if types.is_float(*p) { floats.next() } else { ints.next() }.copied())
                .collect();
            if seed.variadic {
                if let Some((i, x, ..)) = self.infos.get(&n) {
                    let fixed_i = args.iter().filter(|r| !r.is_float()).count() as i64;
                    let fixed_x = args.len() as i64 - fixed_i;
                    args.extend(ints.take((i - fixed_i).max(0) as usize));
                    args.extend(floats.take((x - fixed_x).max(0) as usize));
                }
            }
            let ret_width = width_of(types, seed.ret);
            let ret = ret_width.map(|w| if types.is_float(w) { MachReg::X0 } else { MachReg::AX });
            return (CallConv { args, ret, ret_width }, Some(premise("sig_seed", t.clone())));
        }
        if let Some((i, x, r, t)) = self.sites.get(callee) {
            return (CallConv { args: regs_for(*i, *x), ret: ret_reg(r), ret_width: None }, Some(premise("def_site", t.clone())));
        }
        if let Some((i, x, r, t)) = self.infos.get(&n) {
            return (CallConv { args: regs_for(*i, *x), ret: ret_reg(r), ret_width: None }, Some(premise("call_info", t.clone())));
        }
        (CallConv::default(), None)
    }
}

fn caller_saved() -> Vec<MachReg> {
    MachReg::ALL.iter().copied().filter(|r| r.is_caller_saved()).collect()
}

fn typ_width(t: Typ) -> TypeIdx {
    match t {
        Typ::Tint | Typ::Tany32 => CTypeTable::INT,
        Typ::Tlong | Typ::Tany64 => CTypeTable::LONG,
        Typ::Tsingle => CTypeTable::FLOAT,
        Typ::Tfloat => CTypeTable::DOUBLE,
    }
}

fn chunk_width(c: Chunk) -> TypeIdx {
    match c {
        Chunk::MInt64 | Chunk::Many64 => CTypeTable::LONG,
        Chunk::MFloat32 => CTypeTable::FLOAT,
        Chunk::MFloat64 => CTypeTable::DOUBLE,
        _ => CTypeTable::INT,
    }
}

fn cmp_width(k: CmpKind) -> TypeIdx {
    match k {
        CmpKind::Int | CmpKind::Intu => CTypeTable::INT,
        CmpKind::Long | CmpKind::Longu => CTypeTable::LONG,
        CmpKind::Float => CTypeTable::DOUBLE,
        CmpKind::Single => CTypeTable::FLOAT,
    }
}

fn binop_width(b: BinOp) -> TypeIdx {
    if b.is_single() {
        CTypeTable::FLOAT
    } else if b.is_float() {
        CTypeTable::DOUBLE
    } else if b.is_wide() {
        CTypeTable::LONG
    } else {
        CTypeTable::INT
    }
}

fn unop_widths(u: UnOp) -> (TypeIdx, TypeIdx) {
    use UnOp::*;
    let (i, l, f, s) = (CTypeTable::INT, CTypeTable::LONG, CTypeTable::DOUBLE, CTypeTable::FLOAT);
    match u {
        Oneg | Onot | Ocast8signed | Ocast8unsigned | Ocast16signed | Ocast16unsigned => (i, i),
        Onegl | Onotl => (l, l),
        Olongofint | Olongofintu => (i, l),
        Ointoflong => (l, i),
        Onegf => (f, f),
        Onegfs => (s, s),
        Ofloatofsingle => (s, f),
        Osingleoffloat => (f, s),
    }
}

/// Widths an instruction implies: `(defined width, [(used reg, width)])`.
pub fn widths(l: &LtlInst) -> (Option<TypeIdx>, Vec<(MachReg, TypeIdx)>) {
    use LtlInst::*;
    let all = |args: &[MachReg], w: TypeIdx| args.iter().map(|r| (*r, w)).collect::<Vec<_>>();
    let src = |s: &Src, w: TypeIdx| match s {
        Src::Reg(r) => vec![(*r, w)],
        Src::Imm(_) => vec![],
    };
    match l {
        Lgetstack(_, _, t, _) => (Some(typ_width(*t)), vec![]),
        Lsetstack(s, _, _, t) => (None, src(s, typ_width(*t))),
        Lload(c, _, args, _) => (Some(chunk_width(*c)), all(args, CTypeTable::LONG)),
        Lstore(c, _, args, s) => {
            let mut u = all(args, CTypeTable::LONG);
            u.extend(src(s, chunk_width(*c)));
            (None, u)
        }
        Lcond(c, args, ..) => (None, all(args, cmp_width(c.kind))),
        Lbuiltin(_, args, d) => (d.map(|_| CTypeTable::LONG), all(args, CTypeTable::LONG)),
        Lop(op, args, _) => match op {
            Operation::Omove => (None, vec![]),
            Operation::Ointconst(_) => (Some(CTypeTable::INT), vec![]),
            Operation::Olongconst(_) | Operation::Oaddrsymbol(..) | Operation::Oaddrstack(_) => {
                (Some(CTypeTable::LONG), vec![])
            }
            Operation::Olea(_) => (Some(CTypeTable::LONG), all(args, CTypeTable::LONG)),
            Operation::Unop(u) => {
                let (a, r) = unop_widths(*u);
                (Some(r), all(args, a))
            }
            Operation::Binop(b) if b.is_shift() => {
                let w = binop_width(*b);
                let mut u = vec![(args[0], w)];
                u.extend(args.get(1).map(|r| (*r, CTypeTable::INT)));
                (Some(w), u)
            }
            Operation::Binop(b) | Operation::Binimm(b, _) => (Some(binop_width(*b)), all(args, binop_width(*b))),
            Operation::Ocmp(c) => (Some(CTypeTable::INT), all(args, cmp_width(c.kind))),
            Operation::Odivmod(w) => {
                let w = if *w { CTypeTable::LONG } else { CTypeTable::INT };
                (Some(w), all(args, w))
            }
        },
        _ => (None, vec![]),
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let p = self.parent[x];
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.parent[x] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            self.parent[hi] = lo;
        }
    }
}

type Key = (DefSite, MachReg);

fn key_rank(k: &Key) -> (u8, usize, NodeId, MachReg) {
    match k.0 {
        None => {
            let pos = MachReg::INT_ARGS
                .iter()
                .chain(MachReg::FLOAT_ARGS.iter())
                .position(|r| *r == k.1)
                .unwrap_or(usize::MAX);
            (0, pos, NodeId(0), k.1)
        }
        Some(n) => (1, 0, n, k.1),
    }
}

/// Webs of one function: every def site and every use mapped to a pseudo.
struct Webs {
    uses: BTreeMap<(NodeId, MachReg), u32>,
    defs: BTreeMap<(NodeId, MachReg), u32>,
    entry: BTreeMap<MachReg, u32>,
    next: u32,
}

fn build_webs(
    g: &FuncGraph,
    acc: &BTreeMap<NodeId, Access<MachReg>>,
    params: &[MachReg],
) -> Webs {
    let reach = reaching_defs(g, acc, MachReg::ALL);
    let mut keys: BTreeMap<Key, usize> = BTreeMap::new();
    let mut order: Vec<Key> = Vec::new();
    let mut intern = |k: Key, keys: &mut BTreeMap<Key, usize>| -> usize {
        *keys.entry(k).or_insert_with(|| {
            order.push(k);
            order.len() - 1
        })
    };
    for r in params {
        intern((None, *r), &mut keys);
    }
    for (n, a) in acc {
        for r in &a.defs {
            intern((Some(*n), *r), &mut keys);
        }
    }
    let mut use_keys: BTreeMap<(NodeId, MachReg), Vec<usize>> = BTreeMap::new();
    for (n, a) in acc {
        for r in &a.uses {
            let sites: Vec<DefSite> = reach
                .get(n)
                .and_then(|m| m.get(r))
                .map(|s| s.iter().copied().collect())
                .filter(|s: &Vec<DefSite>| !s.is_empty())
                .unwrap_or_else(|| vec![None]);
            let ids = sites.into_iter().map(|d| intern((d, *r), &mut keys)).collect();
            use_keys.insert((*n, *r), ids);
        }
    }
    let mut uf = UnionFind { parent: (0..keys.len()).collect() };
    for ids in use_keys.values() {
        for w in ids.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    // Number classes by their smallest key.
    let mut best: BTreeMap<usize, (u8, usize, NodeId, MachReg)> = BTreeMap::new();
    for (k, i) in &keys {
        let root = uf.find(*i);
        let rank = key_rank(k);
        best.entry(root).and_modify(|b| *b = (*b).min(rank)).or_insert(rank);
    }
    let mut roots: Vec<(usize, (u8, usize, NodeId, MachReg))> = best.into_iter().collect();
    roots.sort_by_key(|(_, r)| *r);
    let ids: BTreeMap<usize, u32> = roots.iter().enumerate().map(|(i, (root, _))| (*root, i as u32 + 1)).collect();
    let mut id_of = |i: usize| ids[&uf.find(i)];
    let mut webs = Webs { uses: BTreeMap::new(), defs: BTreeMap::new(), entry: BTreeMap::new(), next: ids.len() as u32 + 1 };
    for (k, i) in &keys {
        let p = id_of(*i);
        match k.0 {
            Some(n) => {
                webs.defs.insert((n, k.1), p);
            }
            None => {
                webs.entry.insert(k.1, p);
            }
        }
    }
    for (u, ids) in use_keys {
        webs.uses.insert(u, id_of(ids[0]));
    }
    webs
}

fn ltl_fact(n: NodeId, l: &LtlInst) -> (String, Tuple) {
    premise("ltl_inst", vec![n.into(), Value::stmt(Stmt::Ltl(l.clone()))])
}

fn frames(store: &Store) -> EngineResult<BTreeMap<String, (Frame, Tuple)>> {
    let mut out = BTreeMap::new();
    for (t, _) in store.relation("frame")?.iter() {
        let (Some(f), Some(size), Some(saved)) = (t[0].as_text(), t[1].as_int(), t[2].as_tuple()) else { continue };
        let saved = saved.iter().filter_map(Value::as_reg).collect();
        out.insert(f.to_string(), (Frame { size, saved }, t.clone()));
    }
    Ok(out)
}

fn recover(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let types = store.types();
    let evidence = CallEvidence::load(store)?;
    let frames = frames(store)?;
    for g in functions(store, IRLevel::Ltl)? {
        let Some((frame, frame_tuple)) = frames.get(&g.name) else { continue };
        let frame_fact = premise("frame", frame_tuple.clone());
        let f = Value::text(&g.name);
        let insts = ltl_insts(store, &g)?;
        let (own_ints, own_floats, own_ret, site_fact) = match evidence.sites.get(&g.name) {
            Some((i, x, r, t)) => (*i, *x, r.clone(), Some(premise("def_site", t.clone()))),
            None => (0, 0, String::new(), None),
        };
        let params = regs_for(own_ints, own_floats);
        let own_ret = ret_reg(&own_ret);
        // Register accesses per node under the call model.
        let mut acc: BTreeMap<NodeId, Access<MachReg>> = BTreeMap::new();
        let mut convs: BTreeMap<NodeId, (CallConv, Option<(String, Tuple)>)> = BTreeMap::new();
        for (n, l) in &insts {
            let a = match l {
                LtlInst::Lcall(callee) => {
                    let (conv, fact) = evidence.conv(types, callee, *n);
                    let defs: Vec<MachReg> = conv.ret.into_iter().collect();
                    let kills = caller_saved().into_iter().filter(|r| !defs.contains(r)).collect();
                    let a = Access { uses: conv.args.clone(), defs, kills };
                    convs.insert(*n, (conv, fact));
                    a
                }
                LtlInst::Lreturn => Access { uses: own_ret.into_iter().collect(), ..Default::default() },
                LtlInst::Lgetstack(_, o, ..) | LtlInst::Lsetstack(_, _, o, _) if frame.is_spill(*o) => Access::default(),
                other => Access { uses: other.uses(), defs: other.defs(), kills: vec![] },
            };
            acc.insert(*n, a);
        }
        let mut webs = build_webs(&g, &acc, &params);
        // Stack slots become variables after the register webs.
        let mut slots: BTreeSet<i64> = BTreeSet::new();
        for l in insts.values() {
            match l {
                LtlInst::Lgetstack(_, o, ..) | LtlInst::Lsetstack(_, _, o, _) if !frame.is_spill(*o) => {
                    slots.insert(*o);
                }
                LtlInst::Lop(Operation::Oaddrstack(o), ..) => {
                    slots.insert(*o);
                }
                _ => {}
            }
        }
        let mut slot_ids: BTreeMap<i64, u32> = BTreeMap::new();
        for o in slots.iter().rev() {
            slot_ids.insert(*o, webs.next);
            em.derive("slot_var", vec![f.clone(), Value::Int(*o), Value::Int(webs.next as i64)], "slot", vec![frame_fact.clone()]);
            webs.next += 1;
        }
        for (i, r) in params.iter().enumerate() {
            em.derive(
                "param",
                vec![f.clone(), Value::Int(i as i64), Value::Int(webs.entry[r] as i64)],
                "entry_web",
                site_fact.clone().into_iter().collect(),
            );
        }
        // Widths.
        let mut width_facts: BTreeMap<(u32, TypeIdx), NodeId> = BTreeMap::new();
        let mut note = |p: u32, w: TypeIdx, n: NodeId| {
            width_facts.entry((p, w)).or_insert(n);
        };
        for (n, l) in &insts {
            if let LtlInst::Lgetstack(_, o, t, _) | LtlInst::Lsetstack(_, _, o, t) = l {
                if let Some(p) = slot_ids.get(o) {
                    note(*p, typ_width(*t), *n);
                }
            }
            if matches!(l, LtlInst::Lgetstack(_, o, ..) | LtlInst::Lsetstack(_, _, o, _) if frame.is_spill(*o)) {
                continue;
            }
            let (dw, uw) = widths(l);
            if let (Some(w), Some(d)) = (dw, l.defs().first()) {
                if let Some(p) = webs.defs.get(&(*n, *d)) {
                    note(*p, w, *n);
                }
            }
            for (r, w) in uw {
                if let Some(p) = webs.uses.get(&(*n, r)) {
                    note(*p, w, *n);
                }
            }
            if let Some((conv, _)) = convs.get(n) {
                if let (Some(r), Some(w)) = (conv.ret, conv.ret_width) {
                    if let Some(p) = webs.defs.get(&(*n, r)) {
                        note(*p, w, *n);
                    }
                }
                if let LtlInst::Lcall(callee) = l {
                    if let Some((seed, _)) = evidence.seeds.get(callee) {
                        for (r, t) in conv.args.iter().zip(&seed.params) {
                            if let (Some(p), Some(w)) = (webs.uses.get(&(*n, *r)), width_of(types, *t)) {
                                note(*p, w, *n);
                            }
                        }
                    }
                }
            }
        }
        for ((p, w), n) in &width_facts {
            em.derive(
                "var_width",
                vec![f.clone(), Value::Int(*p as i64), Value::Type(*w)],
                "width",
                vec![ltl_fact(*n, &insts[n])],
            );
        }
        // Instructions.
        let mut before: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut rtl: BTreeMap<NodeId, (RtlInst, Vec<(String, Tuple)>)> = BTreeMap::new();
        for (n, l) in &insts {
            let mut facts = vec![ltl_fact(*n, l)];
            let a = &acc[n];
            for r in &a.uses {
                let p = webs.uses[&(*n, *r)];
                let t = vec![f.clone(), (*n).into(), Value::Reg(*r), Value::Int(p as i64)];
                em.derive("pseudo_map", t.clone(), "use", vec![ltl_fact(*n, l)]);
                facts.push(premise("pseudo_map", t));
            }
            for r in &a.defs {
                let p = webs.defs[&(*n, *r)];
                let t = vec![f.clone(), (*n).into(), Value::Reg(*r), Value::Int(p as i64)];
                em.derive("pseudo_map", t.clone(), "def", vec![ltl_fact(*n, l)]);
                facts.push(premise("pseudo_map", t));
            }
            let u = |r: &MachReg| webs.uses[&(*n, *r)];
            let d = |r: &MachReg| webs.defs[&(*n, *r)];
            let us = |rs: &[MachReg]| rs.iter().map(u).collect::<Vec<u32>>();
            let slot_src = |s: &Src| match s {
                Src::Reg(r) => RSrc::Pseudo(u(r)),
                Src::Imm(k) => RSrc::Imm(*k),
            };
            let inst = match l {
                LtlInst::Lgetstack(_, o, ..) | LtlInst::Lsetstack(_, _, o, _) if frame.is_spill(*o) => RtlInst::Inop,
                LtlInst::Lgetstack(_, o, _, r) => {
                    facts.push(frame_fact.clone());
                    RtlInst::Iop(Operation::Omove, vec![slot_ids[o]], d(r))
                }
                LtlInst::Lsetstack(s, _, o, t) => {
                    facts.push(frame_fact.clone());
                    match slot_src(s) {
                        RSrc::Pseudo(p) => RtlInst::Iop(Operation::Omove, vec![p], slot_ids[o]),
                        RSrc::Imm(k) => {
                            let op = if t.size() == 8 { Operation::Olongconst(k) } else { Operation::Ointconst(k) };
                            RtlInst::Iop(op, vec![], slot_ids[o])
                        }
                    }
                }
                LtlInst::Lop(Operation::Odivmod(wide), args, r) => {
                    let (div, rem) = if *wide { (BinOp::Odivl, BinOp::Omodl) } else { (BinOp::Odiv, BinOp::Omod) };
                    let rem_used = webs.uses.values().any(|p| *p == d(&MachReg::DX));
                    if rem_used {
                        let s = em.fresh_node();
                        before.insert(*n, s);
                        rtl.insert(s, (RtlInst::Iop(Operation::Binop(rem), us(args), d(&MachReg::DX)), facts.clone()));
                    }
                    RtlInst::Iop(Operation::Binop(div), us(args), d(r))
                }
                LtlInst::Lop(op, args, r) => RtlInst::Iop(op.clone(), us(args), d(r)),
                LtlInst::Lload(c, ad, args, r) => RtlInst::Iload(*c, ad.clone(), us(args), d(r)),
                LtlInst::Lstore(c, ad, args, s) => RtlInst::Istore(*c, ad.clone(), us(args), slot_src(s)),
                LtlInst::Lcall(callee) => {
                    let (conv, fact) = &convs[n];
                    facts.extend(fact.clone());
                    RtlInst::Icall(callee.clone(), us(&conv.args), conv.ret.as_ref().map(d))
                }
                LtlInst::Lcond(c, args, ..) => {
                    let (Some(t), Some(e)) = (g.edge_to(*n, EDGE_TRUE), g.edge_to(*n, EDGE_FALSE)) else { continue };
                    RtlInst::Icond(*c, us(args), t, e)
                }
                LtlInst::Lgoto(_) => {
                    let Some(t) = g.edge_to(*n, EDGE_JUMP) else { continue };
                    RtlInst::Igoto(t)
                }
                LtlInst::Lreturn => {
                    facts.extend(site_fact.clone());
                    RtlInst::Ireturn(own_ret.as_ref().map(u))
                }
                LtlInst::Lbuiltin(name, args, r) => RtlInst::Ibuiltin(name.clone(), us(args), r.as_ref().map(d)),
                LtlInst::Lnop => RtlInst::Inop,
            };
            rtl.insert(*n, (inst, facts));
        }
        // Branch targets move to the synthetic node placed before a division.
        let retarget = |m: NodeId| before.get(&m).copied().unwrap_or(m);
        for (n, (inst, facts)) in &rtl {
            let inst = match inst {
                RtlInst::Icond(c, a, t, e) => RtlInst::Icond(*c, a.clone(), retarget(*t), retarget(*e)),
                RtlInst::Igoto(t) => RtlInst::Igoto(retarget(*t)),
                other => other.clone(),
            };
            em.derive("rtl_inst", vec![(*n).into(), Value::stmt(Stmt::Rtl(inst.clone()))], "translate", facts.clone());
            if let RtlInst::Ireturn(_) = inst {
                em.derive(
                    "cfg_exit",
                    vec![Value::text("RTL"), f.clone(), (*n).into()],
                    "exit",
                    vec![premise("rtl_inst", vec![(*n).into(), Value::stmt(Stmt::Rtl(inst))])],
                );
            }
        }
        for (n, s) in &before {
            let nf = premise("node_func", vec![(*n).into(), f.clone()]);
            em.derive("node_func", vec![(*s).into(), f.clone()], "divide", vec![nf]);
            em.derive(
                "rtl_succ",
                vec![(*s).into(), (*n).into(), Value::text(EDGE_FALLTHROUGH)],
                "divide",
                vec![premise("rtl_inst", vec![(*s).into(), Value::stmt(Stmt::Rtl(rtl[s].0.clone()))])],
            );
        }
        for (n, edges) in &g.succ {
            if !rtl.contains_key(n) {
                continue;
            }
            for (m, k) in edges {
                if !rtl.contains_key(m) {
                    continue;
                }
                em.derive(
                    "rtl_succ",
                    vec![(*n).into(), retarget(*m).into(), Value::text(k)],
                    "copy",
                    vec![premise("ltl_succ", vec![(*n).into(), (*m).into(), Value::text(k)])],
                );
            }
        }
        em.derive(
            "cfg_entry",
            vec![Value::text("RTL"), f.clone(), retarget(g.entry).into()],
            "entry",
            vec![premise("cfg_entry", vec![Value::text("LTL"), f.clone(), g.entry.into()])],
        );
    }
    Ok(())
}

/// Pseudo-register recovery: reaching definitions over machine registers,
/// webs joined through shared uses, stack slots as variables.
pub fn recover_pseudoregs() -> Pass {
    Pass::procedural(
        PSEUDO_PASS,
        &["ltl_inst", "ltl_succ", "cfg_entry", "frame", "def_site", "call_info", "sig_seed", "node_func"],
        &["pseudo_map", "slot_var", "param", "var_width", "rtl_inst", "rtl_succ", "cfg_entry", "cfg_exit", "node_func"],
        recover,
    )
}
