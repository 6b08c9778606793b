//! Csharpminor → Clight: one typed statement per combination of the type
//! candidates of the variables a statement mentions.

use std::collections::BTreeMap;

use super::cminor::{address, copy_graph};
use super::diag_tuple;
use super::flow::{functions, stmts_at};
use crate::analysis::{by_preference, chunk_ctype};
use crate::engine::{premise, Emitter, EngineResult, Pass};
use crate::ir::{
    BinOp, CBinop, CExpr, CType, CTypeTable, CUnop, Chunk, ClExpr, ClightStmt, CmpKind, Comparison, CshStmt, IRLevel,
    Stmt, TypeIdx, UnOp,
};
use crate::store::{Store, Value};

pub const CLIGHT_PASS: &str = "emit_clight";
pub const DEFAULT_CANDIDATE_CAP: usize = 16;

/// Translation of one statement under a fixed variable typing.
pub struct Lifter<'a> {
    pub types: &'a CTypeTable,
    /// Data symbols with a known type; other symbols are byte arrays.
    pub globals: &'a BTreeMap<String, TypeIdx>,
    pub env: &'a BTreeMap<u32, TypeIdx>,
}

fn bx(e: ClExpr) -> Box<ClExpr> {
    Box::new(e)
}

fn int_const(n: i64) -> ClExpr {
    let t = if i32::try_from(n).is_ok() { CTypeTable::INT } else { CTypeTable::LONG };
    ClExpr::Econst(n, t)
}

/// `(base, offset)` of an address of the form `base + const`.
fn split(addr: &CExpr) -> (&CExpr, i64) {
    match addr {
        CExpr::Ebinop(BinOp::Oaddl, a, b) => match &**b {
            CExpr::Econst(d) => (a, *d),
            _ => (addr, 0),
        },
        CExpr::Ebinop(BinOp::Osubl, a, b) => match &**b {
            CExpr::Econst(d) => (a, -*d),
            _ => (addr, 0),
        },
        _ => (addr, 0),
    }
}

fn cbinop(b: BinOp) -> CBinop {
    use BinOp::*;
    match b {
        Oadd | Oaddl | Oaddf | Oaddfs => CBinop::Add,
        Osub | Osubl | Osubf | Osubfs => CBinop::Sub,
        Omul | Omull | Omulf | Omulfs => CBinop::Mul,
        Odiv | Odivl | Odivf | Odivfs => CBinop::Div,
        Omod | Omodl => CBinop::Mod,
        Oand | Oandl => CBinop::And,
        Oor | Oorl => CBinop::Or,
        Oxor | Oxorl => CBinop::Xor,
        Oshl | Oshll => CBinop::Shl,
        Oshr | Oshrl | Oshru | Oshrlu => CBinop::Shr,
    }
}

fn ccmp(c: Comparison) -> CBinop {
    match c {
        Comparison::Ceq => CBinop::Eq,
        Comparison::Cne => CBinop::Ne,
        Comparison::Clt => CBinop::Lt,
        Comparison::Cle => CBinop::Le,
        Comparison::Cgt => CBinop::Gt,
        Comparison::Cge => CBinop::Ge,
    }
}

impl Lifter<'_> {
    fn var_ty(&self, v: u32) -> TypeIdx {
        self.env.get(&v).copied().unwrap_or(CTypeTable::LONG)
    }

    fn same_class(&self, a: TypeIdx, b: TypeIdx) -> bool {
        let t = self.types;
        t.size_of(a) == t.size_of(b)
            && t.is_float(a) == t.is_float(b)
            && !matches!(t.get(a), CType::Struct(_) | CType::Void)
            && !matches!(t.get(b), CType::Struct(_) | CType::Void)
    }

    fn cast(&self, e: ClExpr, t: TypeIdx) -> ClExpr {
        if e.ty() == t {
            e
        } else {
            ClExpr::Ecast(bx(e), t)
        }
    }

    /// Casts an integer operand whose signedness or width disagrees with `t`.
    fn as_int(&self, e: ClExpr, t: TypeIdx) -> ClExpr {
        let ty = e.ty();
        let agrees = self.types.is_integer(ty)
            && self.types.is_signed(ty) == self.types.is_signed(t)
            && self.types.size_of(ty) >= self.types.size_of(t);
        if agrees || matches!(e, ClExpr::Econst(..)) || self.types.is_float(ty) {
            e
        } else {
            self.cast(e, t)
        }
    }

    pub fn expr(&self, e: &CExpr) -> ClExpr {
        match e {
            CExpr::Econst(n) => int_const(*n),
            CExpr::Evar(v) => ClExpr::Evar(*v, self.var_ty(*v)),
            CExpr::Eaddrsym(s) => match self.globals.get(s) {
                Some(t) => ClExpr::Eaddrof(bx(ClExpr::Eglobal(s.clone(), *t)), self.types.pointer(*t)),
                None => ClExpr::Eglobal(s.clone(), self.types.pointer(CTypeTable::CHAR)),
            },
            CExpr::Eaddrof(v) => {
                let t = self.var_ty(*v);
                ClExpr::Eaddrof(bx(ClExpr::Evar(*v, t)), self.types.pointer(t))
            }
            CExpr::Eunop(u, a) => self.unop(*u, a),
            CExpr::Ebinop(op, a, b) => self.binop(*op, a, b),
            CExpr::Ecmp(k, c, a, b) => self.cmp(*k, *c, a, b),
            CExpr::Eload(c, a) => self.load(*c, a),
            CExpr::Eaddr(a, args) => match address(a, args) {
                Ok(x) => self.expr(&x),
                Err(_) => int_const(0),
            },
        }
    }

    /// The lvalue a chunk-sized access at `addr` reads or writes.
    pub fn load(&self, c: Chunk, addr: &CExpr) -> ClExpr {
        let t = chunk_ctype(c);
        let types = self.types;
        let (base, d) = split(addr);
        if let CExpr::Evar(b) = base {
            let bt = self.var_ty(*b);
            if let Some((_, layout)) = types.pointee_layout(bt) {
                if let Some(ft) = layout.field_at(d).filter(|ft| self.same_class(*ft, t)) {
                    let s = types.pointee(bt).unwrap_or(CTypeTable::VOID);
                    return ClExpr::Efield(bx(ClExpr::Ederef(bx(ClExpr::Evar(*b, bt)), s)), d, ft);
                }
            }
        }
        if let (CExpr::Eaddrsym(s), 0) = (base, d) {
            if let Some(g) = self.globals.get(s).filter(|g| self.same_class(**g, t)) {
                return ClExpr::Eglobal(s.clone(), *g);
            }
        }
        let a = self.expr(addr);
        match types.pointee(a.ty()) {
            Some(p) if self.same_class(p, t) => ClExpr::Ederef(bx(a), p),
            _ => {
                let pt = types.pointer(t);
                ClExpr::Ederef(bx(ClExpr::Ecast(bx(a), pt)), t)
            }
        }
    }

    fn unop(&self, u: UnOp, a: &CExpr) -> ClExpr {
        use UnOp::*;
        let x = self.expr(a);
        let promote = |t: TypeIdx| if self.types.is_integer(t) && self.types.size_of(t) < 4 { CTypeTable::INT } else { t };
        match u {
            Oneg | Onegl | Onegf | Onegfs => {
                let t = promote(x.ty());
                ClExpr::Eunop(CUnop::Neg, bx(x), t)
            }
            Onot | Onotl => {
                let t = promote(x.ty());
                ClExpr::Eunop(CUnop::Not, bx(x), t)
            }
            Ocast8signed => self.cast(x, CTypeTable::CHAR),
            Ocast8unsigned => self.cast(x, CTypeTable::UCHAR),
            Ocast16signed => self.cast(x, CTypeTable::SHORT),
            Ocast16unsigned => self.cast(x, CTypeTable::USHORT),
            Olongofint => ClExpr::Ecast(bx(self.as_int(x, CTypeTable::INT)), CTypeTable::LONG),
            Olongofintu => ClExpr::Ecast(bx(self.as_int(x, CTypeTable::UINT)), CTypeTable::ULONG),
            Ointoflong => ClExpr::Ecast(bx(x), CTypeTable::INT),
            Ofloatofsingle => ClExpr::Ecast(bx(x), CTypeTable::DOUBLE),
            Osingleoffloat => ClExpr::Ecast(bx(x), CTypeTable::FLOAT),
        }
    }

    /// `p ± k` on a typed pointer: element steps when `k` divides evenly,
    /// byte steps through `char *` otherwise.
    fn pointer_step(&self, x: ClExpr, op: CBinop, k: ClExpr, bytes: Option<i64>) -> ClExpr {
        let types = self.types;
        let pt = x.ty();
        let elem = types.pointee(pt).unwrap_or(CTypeTable::CHAR);
        let esz = if elem == CTypeTable::VOID { 1 } else { types.size_of(elem).max(1) };
        let char_ptr = types.pointer(CTypeTable::CHAR);
        match bytes {
            Some(d) if d % esz == 0 && elem != CTypeTable::VOID => ClExpr::Ebinop(op, bx(x), bx(int_const(d / esz)), pt),
            Some(d) => ClExpr::Ebinop(op, bx(self.cast(x, char_ptr)), bx(int_const(d)), char_ptr),
            None if esz == 1 && elem != CTypeTable::VOID => ClExpr::Ebinop(op, bx(x), bx(k), pt),
            None => ClExpr::Ebinop(op, bx(self.cast(x, char_ptr)), bx(k), char_ptr),
        }
    }

    fn binop(&self, op: BinOp, a: &CExpr, b: &CExpr) -> ClExpr {
        let types = self.types;
        let cop = cbinop(op);
        if matches!(op, BinOp::Oaddl | BinOp::Osubl) {
            let x = self.expr(a);
            if types.is_pointer(x.ty()) {
                let elem = types.pointee(x.ty()).unwrap_or(CTypeTable::CHAR);
                match b {
                    CExpr::Econst(d) => return self.pointer_step(x, cop, int_const(*d), Some(*d)),
                    CExpr::Ebinop(BinOp::Omull, i, s)
                        if op == BinOp::Oaddl
                            && elem != CTypeTable::VOID
                            && matches!(**s, CExpr::Econst(k) if k == types.size_of(elem)) =>
                    {
                        let i = self.expr(i);
                        let t = x.ty();
                        return ClExpr::Ebinop(CBinop::Add, bx(x), bx(i), t);
                    }
                    _ => {}
                }
                let y = self.expr(b);
                if types.is_pointer(y.ty()) && op == BinOp::Osubl {
                    let cp = types.pointer(CTypeTable::CHAR);
                    return ClExpr::Ebinop(CBinop::Sub, bx(self.cast(x, cp)), bx(self.cast(y, cp)), CTypeTable::LONG);
                }
                if types.is_integer(y.ty()) {
                    return self.pointer_step(x, cop, y, None);
                }
                let t = x.ty();
                return ClExpr::Ebinop(cop, bx(x), bx(y), t);
            }
            if op == BinOp::Oaddl {
                let y = self.expr(b);
                if types.is_pointer(y.ty()) && types.is_integer(x.ty()) {
                    return self.pointer_step(y, cop, x, None);
                }
            }
        }
        let mut x = self.expr(a);
        let mut y = self.expr(b);
        if op.is_float() {
            let t = if op.is_single() { CTypeTable::FLOAT } else { CTypeTable::DOUBLE };
            return ClExpr::Ebinop(cop, bx(x), bx(y), t);
        }
        let wide = op.is_wide();
        // Bit and multiplicative operators need integers.
        if !matches!(op, BinOp::Oadd | BinOp::Oaddl | BinOp::Osub | BinOp::Osubl) {
            let int_t = if wide { CTypeTable::LONG } else { CTypeTable::INT };
            if types.is_pointer(x.ty()) {
                x = ClExpr::Ecast(bx(x), int_t);
            }
            if types.is_pointer(y.ty()) {
                y = ClExpr::Ecast(bx(y), int_t);
            }
        }
        let mut unsigned = [x.ty(), y.ty()].iter().any(|t| types.is_integer(*t) && !types.is_signed(*t));
        if let Some(signed) = op.signedness() {
            let t = CTypeTable::int_of_size(if wide { 8 } else { 4 }, signed);
            x = self.as_int(x, t);
            if !op.is_shift() {
                y = self.as_int(y, t);
            }
            unsigned = !signed;
        }
        let t = CTypeTable::int_of_size(if wide { 8 } else { 4 }, !unsigned);
        ClExpr::Ebinop(cop, bx(x), bx(y), t)
    }

    fn cmp(&self, k: CmpKind, c: Comparison, a: &CExpr, b: &CExpr) -> ClExpr {
        let types = self.types;
        let mut x = self.expr(a);
        let mut y = self.expr(b);
        if !matches!(k, CmpKind::Float | CmpKind::Single) {
            let t = CTypeTable::int_of_size(if k.wide() { 8 } else { 4 }, k.signed());
            let fix = |e: ClExpr| {
                let pointer_ok = types.is_pointer(e.ty()) && k == CmpKind::Longu;
                if pointer_ok || (types.is_pointer(e.ty()) && !c.is_ordering()) {
                    e
                } else {
                    self.as_int(e, t)
                }
            };
            x = fix(x);
            y = fix(y);
        }
        ClExpr::Ebinop(ccmp(c), bx(x), bx(y), CTypeTable::INT)
    }

    fn cond(&self, e: &CExpr) -> ClExpr {
        let x = self.expr(e);
        match x {
            ClExpr::Ebinop(op, ..) if op.is_comparison() => x,
            other => ClExpr::Ebinop(CBinop::Ne, bx(other), bx(int_const(0)), CTypeTable::INT),
        }
    }

    pub fn stmt(&self, s: &CshStmt) -> ClightStmt {
        match s {
            CshStmt::Sset(d, e) => ClightStmt::Sset(*d, self.var_ty(*d), self.expr(e)),
            CshStmt::Sstore(c, a, v) => ClightStmt::Sassign(self.load(*c, a), self.expr(v)),
            CshStmt::Scall(d, f, args) => ClightStmt::Scall(
                d.map(|d| (d, self.var_ty(d))),
                f.clone(),
                args.iter().map(|a| self.expr(a)).collect(),
            ),
            CshStmt::Sifthenelse(e, t, f) => ClightStmt::Sifthenelse(self.cond(e), *t, *f),
            CshStmt::Sloop(n) => ClightStmt::Sloop(*n),
            CshStmt::Sgoto(n) => ClightStmt::Sgoto(*n),
            CshStmt::Sreturn(e) => ClightStmt::Sreturn(e.as_ref().map(|e| self.expr(e))),
            CshStmt::Sskip => ClightStmt::Sskip,
        }
    }
}

/// Every typing of `s`'s variables drawn from `cands`, in lexicographic order
/// of candidate positions, at most `cap` of them. The flag reports a cut.
pub fn enumerate(
    types: &CTypeTable,
    globals: &BTreeMap<String, TypeIdx>,
    cands: &BTreeMap<u32, Vec<TypeIdx>>,
    s: &CshStmt,
    cap: usize,
) -> (Vec<(BTreeMap<u32, TypeIdx>, ClightStmt)>, bool) {
    let vars = s.vars();
    let lists: Vec<Vec<TypeIdx>> = vars
        .iter()
        .map(|v| cands.get(v).filter(|l| !l.is_empty()).cloned().unwrap_or_else(|| vec![CTypeTable::LONG]))
        .collect();
    let mut out: Vec<(BTreeMap<u32, TypeIdx>, ClightStmt)> = Vec::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        if out.len() == cap {
            return (out, true);
        }
        let env: BTreeMap<u32, TypeIdx> = vars.iter().zip(&idx).zip(&lists).map(|((v, i), l)| (*v, l[*i])).collect();
        let lifted = Lifter { types, globals, env: &env }.stmt(s);
        if !out.iter().any(|(_, c)| *c == lifted) {
            out.push((env, lifted));
        }
        // Odometer step, last variable fastest.
        let mut k = vars.len();
        loop {
            if k == 0 {
                return (out, false);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn emit(store: &Store, em: &mut Emitter, cap: usize) -> EngineResult<()> {
    let types = store.types();
    let mut globals: BTreeMap<String, Vec<TypeIdx>> = BTreeMap::new();
    for (t, _) in store.relation("global_type")?.iter() {
        if let (Some(s), Some(ty)) = (t[0].as_text(), t[1].as_type()) {
            globals.entry(s.to_string()).or_default().push(ty);
        }
    }
    let globals: BTreeMap<String, TypeIdx> =
        globals.into_iter().filter_map(|(s, ts)| Some((s, *by_preference(types, ts).first()?))).collect();
    let mut var_types: BTreeMap<(String, u32), Vec<TypeIdx>> = BTreeMap::new();
    for (t, _) in store.relation("var_type")?.iter() {
        if let (Some(f), Some(x), Some(ty)) = (t[0].as_text(), t[1].as_int(), t[2].as_type()) {
            var_types.entry((f.to_string(), x as u32)).or_default().push(ty);
        }
    }
    let mut lifted = BTreeMap::new();
    for g in functions(store, IRLevel::Csharpminor)? {
        let f = Value::text(&g.name);
        let cands: BTreeMap<u32, Vec<TypeIdx>> = var_types
            .range((g.name.clone(), 0)..=(g.name.clone(), u32::MAX))
            .map(|((_, x), ts)| (*x, by_preference(types, ts.iter().copied())))
            .collect();
        for n in &g.nodes {
            let Some(s) = stmts_at(store, "csh_stmt", *n)?.into_iter().next() else { continue };
            let Stmt::Csh(c) = &s else { continue };
            let src = premise("csh_stmt", vec![(*n).into(), Value::stmt(s.clone())]);
            let (cs, capped) = enumerate(types, &globals, &cands, c, cap);
            for v in c.vars() {
                if !cands.contains_key(&v) {
                    let m = format!("v{v} has no type candidate; assuming long");
                    em.derive("diag", diag_tuple(*n, CLIGHT_PASS, "warning", m), "untyped", vec![src.clone()]);
                }
            }
            if capped {
                let m = format!("candidate cap {cap} reached");
                em.derive("diag", diag_tuple(*n, CLIGHT_PASS, "warning", m), "cap", vec![src.clone()]);
            }
            for (i, (env, cl)) in cs.into_iter().enumerate() {
                let mut why = vec![src.clone()];
                for (v, t) in &env {
                    if cands.contains_key(v) {
                        why.push(premise("var_type", vec![f.clone(), Value::Int(*v as i64), Value::Type(*t)]));
                    }
                }
                let st = Stmt::Clight(cl);
                em.derive("clight_stmt", vec![(*n).into(), Value::stmt(st.clone())], "typed", why);
                if i == 0 {
                    lifted.insert(*n, st);
                }
            }
        }
    }
    copy_graph(store, em, IRLevel::Csharpminor, IRLevel::Clight, &lifted)
}

/// Typed Clight candidates, at most `cap` per statement.
pub fn emit_clight(cap: usize) -> Pass {
    Pass::procedural(
        CLIGHT_PASS,
        &["csh_stmt", "csh_succ", "cfg_entry", "cfg_exit", "var_type", "global_type"],
        &["clight_stmt", "clight_succ", "cfg_entry", "cfg_exit", "diag"],
        move |s, e| emit(s, e, cap),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::StructLayout;
    use crate::term::Textual;

    fn load4(p: u32, d: u32) -> CshStmt {
        let addr = CExpr::binop(BinOp::Oaddl, CExpr::Evar(p), CExpr::Econst(4));
        CshStmt::Sset(d, CExpr::Eload(Chunk::MFloat32, Box::new(addr)))
    }

    #[test]
    fn struct_base_gives_member_access() {
        let types = CTypeTable::new();
        let s = types.intern_struct(StructLayout::new(vec![(0, CTypeTable::INT), (4, CTypeTable::FLOAT)]));
        let env = BTreeMap::from([(1, types.pointer(s)), (5, CTypeTable::FLOAT)]);
        let globals = BTreeMap::new();
        let l = Lifter { types: &types, globals: &globals, env: &env }.stmt(&load4(1, 5));
        match l {
            ClightStmt::Sset(5, t, ClExpr::Efield(_, 4, ft)) => {
                assert_eq!(t, CTypeTable::FLOAT);
                assert_eq!(ft, CTypeTable::FLOAT);
            }
            other => panic!("{}", other.render()),
        }
        let env = BTreeMap::from([(1, CTypeTable::LONG), (5, CTypeTable::FLOAT)]);
        let l = Lifter { types: &types, globals: &globals, env: &env }.stmt(&load4(1, 5));
        assert!(matches!(l, ClightStmt::Sset(5, _, ClExpr::Ederef(ref c, _)) if matches!(**c, ClExpr::Ecast(..))));
    }

    #[test]
    fn two_candidates_give_two_statements() {
        let types = CTypeTable::new();
        let ip = types.pointer(CTypeTable::INT);
        let cands = BTreeMap::from([(1, vec![ip, CTypeTable::LONG]), (2, vec![CTypeTable::LONG])]);
        let s = CshStmt::Sset(2, CExpr::Evar(1));
        let (cs, capped) = enumerate(&types, &BTreeMap::new(), &cands, &s, DEFAULT_CANDIDATE_CAP);
        assert!(!capped);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].0[&1], ip);
        let (cs, capped) = enumerate(&types, &BTreeMap::new(), &cands, &s, 1);
        assert!(capped);
        assert_eq!(cs.len(), 1);
    }
}
