//! The C-subset type checker used to steer selection. It re-types every
//! selected statement against the declarations a configuration makes, so
//! candidates built under other assumptions show up as diagnostics.

use std::collections::BTreeMap;
use std::fmt;

use crate::ir::{CBinop, CType, CTypeTable, CUnop, ClExpr, ClightStmt, TypeIdx};
use crate::store::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    PointerIntConversion,
    UndeclaredIdentifier,
    TypeMismatch,
    ArityMismatch,
    Other,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::PointerIntConversion => "pointer-int-conversion",
            Category::UndeclaredIdentifier => "undeclared-identifier",
            Category::TypeMismatch => "type-mismatch",
            Category::ArityMismatch => "arity-mismatch",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Diagnostic {
    pub node: NodeId,
    pub category: Category,
    pub message: String,
    /// Variables whose declarations the failing check depended on.
    pub vars: Vec<u32>,
}

/// A function prototype visible to the checked code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proto {
    pub params: Vec<TypeIdx>,
    pub ret: TypeIdx,
    pub variadic: bool,
}

/// How a global symbol is declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalDecl {
    Data(TypeIdx),
    /// `extern char sym[];`, for symbols only ever used as addresses.
    Bytes,
}

/// Everything outside the function body the checker can see.
#[derive(Debug, Clone)]
pub struct Scope<'a> {
    pub types: &'a CTypeTable,
    pub protos: &'a BTreeMap<String, Proto>,
    pub globals: &'a BTreeMap<String, GlobalDecl>,
}

struct Checker<'a, 'b> {
    scope: &'b Scope<'a>,
    decls: &'b BTreeMap<u32, TypeIdx>,
    node: NodeId,
    out: Vec<Diagnostic>,
}

fn vars_of(e: &ClExpr) -> Vec<u32> {
    let mut v = Vec::new();
    e.var_types(&mut v);
    let mut ids: Vec<u32> = v.into_iter().map(|(x, _)| x).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

fn is_null(e: &ClExpr) -> bool {
    match e {
        ClExpr::Econst(0, _) => true,
        ClExpr::Ecast(x, _) => is_null(x),
        _ => false,
    }
}

impl Checker<'_, '_> {
    fn types(&self) -> &CTypeTable {
        self.scope.types
    }

    fn report(&mut self, category: Category, message: String, vars: Vec<u32>) {
        self.out.push(Diagnostic { node: self.node, category, message, vars });
    }

    fn name(&self, t: TypeIdx) -> String {
        self.types().c_name(t)
    }

    fn is_int(&self, t: TypeIdx) -> bool {
        self.types().is_integer(t)
    }

    fn is_ptr(&self, t: TypeIdx) -> bool {
        self.types().is_pointer(t)
    }

    fn arith_result(&self, a: TypeIdx, b: TypeIdx) -> TypeIdx {
        let t = self.types();
        if t.is_float(a) || t.is_float(b) {
            return if a == CTypeTable::DOUBLE || b == CTypeTable::DOUBLE { CTypeTable::DOUBLE } else { CTypeTable::FLOAT };
        }
        let wide = t.size_of(a) == 8 || t.size_of(b) == 8;
        let unsigned = [a, b].iter().any(|x| t.size_of(*x) >= 4 && !t.is_signed(*x));
        CTypeTable::int_of_size(if wide { 8 } else { 4 }, !unsigned)
    }

    fn expr(&mut self, e: &ClExpr) -> TypeIdx {
        let types = self.scope.types;
        match e {
            ClExpr::Econst(_, t) => *t,
            ClExpr::Evar(v, _) => match self.decls.get(v) {
                Some(t) => *t,
                None => {
                    self.report(Category::UndeclaredIdentifier, format!("use of undeclared identifier 'v{v}'"), vec![*v]);
                    CTypeTable::LONG
                }
            },
            ClExpr::Eglobal(s, _) => match self.scope.globals.get(s) {
                Some(GlobalDecl::Data(t)) => *t,
                Some(GlobalDecl::Bytes) => types.pointer(CTypeTable::CHAR),
                None => {
                    self.report(Category::UndeclaredIdentifier, format!("use of undeclared identifier '{s}'"), vec![]);
                    CTypeTable::LONG
                }
            },
            ClExpr::Ederef(x, _) => {
                let t = self.expr(x);
                match types.pointee(t) {
                    Some(p) if p != CTypeTable::VOID => p,
                    Some(_) => {
                        self.report(Category::TypeMismatch, "dereference of 'void *'".into(), vars_of(x));
                        CTypeTable::LONG
                    }
                    None => {
                        let m = format!("indirection requires pointer operand ('{}' invalid)", self.name(t));
                        self.report(Category::TypeMismatch, m, vars_of(x));
                        CTypeTable::LONG
                    }
                }
            }
            ClExpr::Efield(x, ofs, _) => {
                let t = self.expr(x);
                match types.struct_layout(t).and_then(|l| l.field_at(*ofs)) {
                    Some(f) => f,
                    None => {
                        let m = format!("no member named 'ofs_{ofs}' in '{}'", self.name(t));
                        self.report(Category::TypeMismatch, m, vars_of(x));
                        CTypeTable::LONG
                    }
                }
            }
            ClExpr::Eaddrof(x, _) => {
                let t = self.expr(x);
                types.pointer(t)
            }
            ClExpr::Eunop(op, x, _) => {
                let t = self.expr(x);
                let ok = match op {
                    CUnop::Neg => types.is_arith(t),
                    CUnop::Not => self.is_int(t),
                };
                if !ok {
                    let m = format!("invalid argument type '{}' to unary expression", self.name(t));
                    self.report(Category::TypeMismatch, m, vars_of(x));
                    return CTypeTable::LONG;
                }
                if self.is_int(t) && types.size_of(t) < 4 {
                    CTypeTable::INT
                } else {
                    t
                }
            }
            ClExpr::Ecast(x, to) => {
                let t = self.expr(x);
                let bad = (types.is_float(t) && self.is_ptr(*to))
                    || (self.is_ptr(t) && types.is_float(*to))
                    || matches!(types.get(t), CType::Struct(_))
                    || matches!(types.get(*to), CType::Struct(_));
                if bad {
                    let m = format!("cannot cast from '{}' to '{}'", self.name(t), self.name(*to));
                    self.report(Category::TypeMismatch, m, vars_of(x));
                }
                *to
            }
            ClExpr::Ebinop(op, a, b, _) => {
                let ta = self.expr(a);
                let tb = self.expr(b);
                self.binop(*op, a, b, ta, tb)
            }
        }
    }

    fn binop(&mut self, op: CBinop, a: &ClExpr, b: &ClExpr, ta: TypeIdx, tb: TypeIdx) -> TypeIdx {
        let types = self.scope.types;
        let both = || {
            let mut v = vars_of(a);
            v.extend(vars_of(b));
            v.sort_unstable();
            v.dedup();
            v
        };
        let (pa, pb) = (self.is_ptr(ta), self.is_ptr(tb));
        let invalid = |s: &Self| format!("invalid operands to binary expression ('{}' and '{}')", s.name(ta), s.name(tb));
        if op.is_comparison() {
            if pa && pb {
                let compatible = ta == tb
                    || types.pointee(ta) == Some(CTypeTable::VOID)
                    || types.pointee(tb) == Some(CTypeTable::VOID);
                if !compatible {
                    let m = format!("comparison of distinct pointer types ('{}' and '{}')", self.name(ta), self.name(tb));
                    self.report(Category::TypeMismatch, m, both());
                }
            } else if pa || pb {
                let (other, ot) = if pa { (b, tb) } else { (a, ta) };
                if !is_null(other) {
                    let kind = if types.is_float(ot) { Category::TypeMismatch } else { Category::PointerIntConversion };
                    let m = format!("comparison between pointer and integer ('{}' and '{}')", self.name(ta), self.name(tb));
                    self.report(kind, m, both());
                }
            } else if !types.is_arith(ta) || !types.is_arith(tb) {
                let m = invalid(self);
                self.report(Category::TypeMismatch, m, both());
            }
            return CTypeTable::INT;
        }
        match op {
            CBinop::Add | CBinop::Sub if pa || pb => {
                if pa && pb {
                    if op == CBinop::Sub && ta == tb {
                        return CTypeTable::LONG;
                    }
                    let m = invalid(self);
                    self.report(Category::TypeMismatch, m, both());
                    return ta;
                }
                let (pt, other) = if pa { (ta, tb) } else { (tb, ta) };
                if !self.is_int(other) || (pb && op == CBinop::Sub) {
                    let m = invalid(self);
                    self.report(Category::TypeMismatch, m, both());
                }
                if types.pointee(pt) == Some(CTypeTable::VOID) {
                    let m = "arithmetic on a pointer to void".to_string();
                    self.report(Category::TypeMismatch, m, both());
                }
                pt
            }
            CBinop::Add | CBinop::Sub | CBinop::Mul | CBinop::Div => {
                if !types.is_arith(ta) || !types.is_arith(tb) {
                    let m = invalid(self);
                    self.report(Category::TypeMismatch, m, both());
                    return CTypeTable::LONG;
                }
                self.arith_result(ta, tb)
            }
            _ => {
                if !self.is_int(ta) || !self.is_int(tb) {
                    let m = invalid(self);
                    self.report(Category::TypeMismatch, m, both());
                    return CTypeTable::LONG;
                }
                if matches!(op, CBinop::Shl | CBinop::Shr) {
                    self.arith_result(ta, CTypeTable::INT)
                } else {
                    self.arith_result(ta, tb)
                }
            }
        }
    }

    /// Checks that a value of type `src` may initialize an object of type `dst`.
    fn assign(&mut self, dst: TypeIdx, src: TypeIdx, value: &ClExpr, mut vars: Vec<u32>, what: &str) {
        let types = self.scope.types;
        vars.extend(vars_of(value));
        vars.sort_unstable();
        vars.dedup();
        let (pd, ps) = (self.is_ptr(dst), self.is_ptr(src));
        let problem = if dst == src {
            None
        } else if pd && ps {
            let void = types.pointee(dst) == Some(CTypeTable::VOID) || types.pointee(src) == Some(CTypeTable::VOID);
            (!void).then_some((Category::TypeMismatch, "incompatible pointer types"))
        } else if pd && self.is_int(src) {
            (!is_null(value)).then_some((Category::PointerIntConversion, "incompatible integer to pointer conversion"))
        } else if ps && self.is_int(dst) {
            Some((Category::PointerIntConversion, "incompatible pointer to integer conversion"))
        } else if types.is_arith(dst) && types.is_arith(src) {
            None
        } else {
            Some((Category::TypeMismatch, "incompatible types"))
        };
        if let Some((cat, text)) = problem {
            let m = format!("{text} {what} '{}' from '{}'", self.name(dst), self.name(src));
            self.report(cat, m, vars);
        }
    }

    fn is_lvalue(e: &ClExpr) -> bool {
        matches!(e, ClExpr::Evar(..) | ClExpr::Eglobal(..) | ClExpr::Ederef(..) | ClExpr::Efield(..))
    }

    fn stmt(&mut self, s: &ClightStmt, ret: TypeIdx) {
        match s {
            ClightStmt::Sset(v, _, e) => {
                let t = self.expr(e);
                let Some(d) = self.decls.get(v).copied() else {
                    self.report(Category::UndeclaredIdentifier, format!("use of undeclared identifier 'v{v}'"), vec![*v]);
                    return;
                };
                self.assign(d, t, e, vec![*v], "assigning to");
            }
            ClightStmt::Sassign(l, r) => {
                let lt = self.expr(l);
                let rt = self.expr(r);
                if !Self::is_lvalue(l) {
                    self.report(Category::Other, "expression is not assignable".into(), vars_of(l));
                }
                self.assign(lt, rt, r, vars_of(l), "assigning to");
            }
            ClightStmt::Scall(d, f, args) => {
                let arg_types: Vec<TypeIdx> = args.iter().map(|a| self.expr(a)).collect();
                let Some(p) = self.scope.protos.get(f).cloned() else {
                    self.report(Category::UndeclaredIdentifier, format!("call to undeclared function '{f}'"), vec![]);
                    return;
                };
                let arity_ok = if p.variadic { args.len() >= p.params.len() } else { args.len() == p.params.len() };
                if !arity_ok {
                    let m = format!("'{f}' expects {} arguments, {} given", p.params.len(), args.len());
                    let mut vars: Vec<u32> = args.iter().flat_map(vars_of).collect();
                    vars.sort_unstable();
                    vars.dedup();
                    self.report(Category::ArityMismatch, m, vars);
                }
                for ((a, at), pt) in args.iter().zip(&arg_types).zip(&p.params) {
                    self.assign(*pt, *at, a, vec![], "passing to parameter of type");
                }
                if let Some((v, _)) = d {
                    match self.decls.get(v).copied() {
                        Some(_) if p.ret == CTypeTable::VOID => {
                            let m = format!("assigning result of void function '{f}'");
                            self.report(Category::TypeMismatch, m, vec![*v]);
                        }
                        Some(dt) => {
                            let call = ClExpr::Evar(*v, dt);
                            self.assign(dt, p.ret, &call, vec![*v], "assigning to");
                        }
                        None => {
                            let m = format!("use of undeclared identifier 'v{v}'");
                            self.report(Category::UndeclaredIdentifier, m, vec![*v]);
                        }
                    }
                }
            }
            ClightStmt::Sifthenelse(e, ..) => {
                let t = self.expr(e);
                if !self.types().is_arith(t) && !self.is_ptr(t) {
                    let m = format!("statement requires expression of scalar type ('{}' invalid)", self.name(t));
                    self.report(Category::TypeMismatch, m, vars_of(e));
                }
            }
            ClightStmt::Sreturn(Some(e)) => {
                let t = self.expr(e);
                if ret == CTypeTable::VOID {
                    self.report(Category::TypeMismatch, "void function should not return a value".into(), vars_of(e));
                } else {
                    self.assign(ret, t, e, vec![], "returning");
                }
            }
            ClightStmt::Sreturn(None) if ret != CTypeTable::VOID => {
                self.report(Category::TypeMismatch, "non-void function should return a value".into(), vec![]);
            }
            _ => {}
        }
    }
}

/// Type-checks the selected statements of one function.
pub fn typecheck(
    scope: &Scope<'_>,
    decls: &BTreeMap<u32, TypeIdx>,
    ret: TypeIdx,
    body: &[(NodeId, &ClightStmt)],
) -> Vec<Diagnostic> {
    let mut c = Checker { scope, decls, node: NodeId(0), out: Vec::new() };
    for (n, s) in body {
        c.node = *n;
        c.stmt(s, ret);
    }
    c.out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(types: &CTypeTable, decls: &BTreeMap<u32, TypeIdx>, s: &ClightStmt) -> Vec<Diagnostic> {
        let protos = BTreeMap::new();
        let globals = BTreeMap::new();
        let scope = Scope { types, protos: &protos, globals: &globals };
        typecheck(&scope, decls, CTypeTable::VOID, &[(NodeId(1), s)])
    }

    #[test]
    fn long_into_pointer_is_flagged() {
        let types = CTypeTable::new();
        let ip = types.pointer(CTypeTable::INT);
        let decls = BTreeMap::from([(1, ip), (2, CTypeTable::LONG)]);
        let s = ClightStmt::Sset(1, ip, ClExpr::Evar(2, CTypeTable::LONG));
        let d = check(&types, &decls, &s);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, Category::PointerIntConversion);
        assert_eq!(d[0].vars, vec![1, 2]);
        let null = ClightStmt::Sset(1, ip, ClExpr::Econst(0, CTypeTable::INT));
        assert!(check(&types, &decls, &null).is_empty());
    }

    #[test]
    fn unknown_callee_is_undeclared() {
        let types = CTypeTable::new();
        let s = ClightStmt::Scall(None, "mystery".into(), vec![]);
        let d = check(&types, &BTreeMap::new(), &s);
        assert_eq!(d[0].category, Category::UndeclaredIdentifier);
    }

    #[test]
    fn member_access_needs_a_struct() {
        let types = CTypeTable::new();
        let ip = types.pointer(CTypeTable::INT);
        let decls = BTreeMap::from([(1, ip), (2, CTypeTable::INT)]);
        let e = ClExpr::Efield(Box::new(ClExpr::Ederef(Box::new(ClExpr::Evar(1, ip)), CTypeTable::INT)), 4, CTypeTable::INT);
        let d = check(&types, &decls, &ClightStmt::Sset(2, CTypeTable::INT, e));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, Category::TypeMismatch);
    }
}
