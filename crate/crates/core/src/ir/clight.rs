//! Clight: typed C-like statements.

use super::csh::{parse_var, var_term};
use super::{node_term, parse_node, TypeIdx};
use crate::store::NodeId;
use crate::term::{err, Term, TermResult, Textual};
use crate::textual_enum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CUnop {
    Neg,
    Not,
}

textual_enum!(CUnop { Neg => "neg", Not => "not" });

impl CUnop {
    pub fn symbol(self) -> &'static str {
        match self {
            CUnop::Neg => "-",
            CUnop::Not => "~",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CBinop {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

textual_enum!(CBinop {
    Add => "add", Sub => "sub", Mul => "mul", Div => "div", Mod => "mod",
    And => "and", Or => "or", Xor => "xor", Shl => "shl", Shr => "shr",
    Eq => "eq", Ne => "ne", Lt => "lt", Le => "le", Gt => "gt", Ge => "ge",
});

impl CBinop {
    pub fn symbol(self) -> &'static str {
        use CBinop::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Div => "/",
            Mod => "%",
            And => "&",
            Or => "|",
            Xor => "^",
            Shl => "<<",
            Shr => ">>",
            Eq => "==",
            Ne => "!=",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
        }
    }

    pub fn is_comparison(self) -> bool {
        use CBinop::*;
        matches!(self, Eq | Ne | Lt | Le | Gt | Ge)
    }
}

/// Typed expression; the last component of every constructor is its type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClExpr {
    Econst(i64, TypeIdx),
    Evar(u32, TypeIdx),
    Eglobal(String, TypeIdx),
    Ederef(Box<ClExpr>, TypeIdx),
    /// Member `ofs_<offset>` of a struct-typed operand.
    Efield(Box<ClExpr>, i64, TypeIdx),
    Eaddrof(Box<ClExpr>, TypeIdx),
    Eunop(CUnop, Box<ClExpr>, TypeIdx),
    Ebinop(CBinop, Box<ClExpr>, Box<ClExpr>, TypeIdx),
    Ecast(Box<ClExpr>, TypeIdx),
}

impl ClExpr {
    pub fn ty(&self) -> TypeIdx {
        match self {
            ClExpr::Econst(_, t)
            | ClExpr::Evar(_, t)
            | ClExpr::Eglobal(_, t)
            | ClExpr::Ederef(_, t)
            | ClExpr::Efield(_, _, t)
            | ClExpr::Eaddrof(_, t)
            | ClExpr::Eunop(_, _, t)
            | ClExpr::Ebinop(_, _, _, t)
            | ClExpr::Ecast(_, t) => *t,
        }
    }

    pub fn var_types(&self, out: &mut Vec<(u32, TypeIdx)>) {
        match self {
            ClExpr::Evar(v, t) => out.push((*v, *t)),
            ClExpr::Econst(..) | ClExpr::Eglobal(..) => {}
            ClExpr::Ederef(e, _)
            | ClExpr::Efield(e, _, _)
            | ClExpr::Eaddrof(e, _)
            | ClExpr::Eunop(_, e, _)
            | ClExpr::Ecast(e, _) => e.var_types(out),
            ClExpr::Ebinop(_, a, b, _) => {
                a.var_types(out);
                b.var_types(out);
            }
        }
    }

    pub fn has_field_access(&self) -> bool {
        match self {
            ClExpr::Efield(..) => true,
            ClExpr::Econst(..) | ClExpr::Evar(..) | ClExpr::Eglobal(..) => false,
            ClExpr::Ederef(e, _) | ClExpr::Eaddrof(e, _) | ClExpr::Eunop(_, e, _) | ClExpr::Ecast(e, _) => {
                e.has_field_access()
            }
            ClExpr::Ebinop(_, a, b, _) => a.has_field_access() || b.has_field_access(),
        }
    }
}

fn ty_term(t: TypeIdx) -> Term {
    Term::TypeRef(t.0)
}

fn parse_ty(t: &Term) -> TermResult<TypeIdx> {
    match t {
        Term::TypeRef(i) => Ok(TypeIdx(*i)),
        other => err(format!("expected type, found `{other}`")),
    }
}

impl Textual for ClExpr {
    fn to_term(&self) -> Term {
        match self {
            ClExpr::Econst(n, t) => Term::app("Econst", vec![Term::Int(*n), ty_term(*t)]),
            ClExpr::Evar(v, t) => Term::app("Evar", vec![var_term(*v), ty_term(*t)]),
            ClExpr::Eglobal(s, t) => Term::app("Eglobal", vec![Term::Str(s.clone()), ty_term(*t)]),
            ClExpr::Ederef(e, t) => Term::app("Ederef", vec![e.to_term(), ty_term(*t)]),
            ClExpr::Efield(e, o, t) => {
                Term::app("Efield", vec![e.to_term(), Term::Int(*o), ty_term(*t)])
            }
            ClExpr::Eaddrof(e, t) => Term::app("Eaddrof", vec![e.to_term(), ty_term(*t)]),
            ClExpr::Eunop(op, e, t) => {
                Term::app("Eunop", vec![op.to_term(), e.to_term(), ty_term(*t)])
            }
            ClExpr::Ebinop(op, a, b, t) => Term::app(
                "Ebinop",
                vec![op.to_term(), a.to_term(), b.to_term(), ty_term(*t)],
            ),
            ClExpr::Ecast(e, t) => Term::app("Ecast", vec![e.to_term(), ty_term(*t)]),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        let b = |x: &Term| ClExpr::from_term(x).map(Box::new);
        Ok(match t.as_app()? {
            ("Econst", [n, ty]) => ClExpr::Econst(n.as_int()?, parse_ty(ty)?),
            ("Evar", [v, ty]) => ClExpr::Evar(parse_var(v)?, parse_ty(ty)?),
            ("Eglobal", [s, ty]) => ClExpr::Eglobal(s.as_str()?.to_string(), parse_ty(ty)?),
            ("Ederef", [e, ty]) => ClExpr::Ederef(b(e)?, parse_ty(ty)?),
            ("Efield", [e, o, ty]) => ClExpr::Efield(b(e)?, o.as_int()?, parse_ty(ty)?),
            ("Eaddrof", [e, ty]) => ClExpr::Eaddrof(b(e)?, parse_ty(ty)?),
            ("Eunop", [op, e, ty]) => ClExpr::Eunop(CUnop::from_term(op)?, b(e)?, parse_ty(ty)?),
            ("Ebinop", [op, x, y, ty]) => {
                ClExpr::Ebinop(CBinop::from_term(op)?, b(x)?, b(y)?, parse_ty(ty)?)
            }
            ("Ecast", [e, ty]) => ClExpr::Ecast(b(e)?, parse_ty(ty)?),
            _ => return err(format!("bad Clight expression `{t}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClightStmt {
    /// Assignment to a temporary declared with the given type.
    Sset(u32, TypeIdx, ClExpr),
    /// Assignment through memory.
    Sassign(ClExpr, ClExpr),
    Scall(Option<(u32, TypeIdx)>, String, Vec<ClExpr>),
    Sifthenelse(ClExpr, NodeId, NodeId),
    Sloop(NodeId),
    Sgoto(NodeId),
    Sreturn(Option<ClExpr>),
    Sskip,
}

impl ClightStmt {
    /// Every `(variable, assumed type)` pair the statement relies on, sorted.
    pub fn var_types(&self) -> Vec<(u32, TypeIdx)> {
        let mut out = Vec::new();
        match self {
            ClightStmt::Sset(v, t, e) => {
                out.push((*v, *t));
                e.var_types(&mut out);
            }
            ClightStmt::Sassign(a, b) => {
                a.var_types(&mut out);
                b.var_types(&mut out);
            }
            ClightStmt::Scall(d, _, args) => {
                out.extend(d.iter().copied());
                args.iter().for_each(|a| a.var_types(&mut out));
            }
            ClightStmt::Sifthenelse(e, ..) => e.var_types(&mut out),
            ClightStmt::Sreturn(Some(e)) => e.var_types(&mut out),
            _ => {}
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn has_field_access(&self) -> bool {
        match self {
            ClightStmt::Sset(_, _, e) | ClightStmt::Sifthenelse(e, ..) => e.has_field_access(),
            ClightStmt::Sassign(a, b) => a.has_field_access() || b.has_field_access(),
            ClightStmt::Scall(_, _, args) => args.iter().any(|a| a.has_field_access()),
            ClightStmt::Sreturn(Some(e)) => e.has_field_access(),
            _ => false,
        }
    }
}

impl Textual for ClightStmt {
    fn to_term(&self) -> Term {
        let exprs = |v: &[ClExpr]| Term::List(v.iter().map(|e| e.to_term()).collect());
        match self {
            ClightStmt::Sset(v, t, e) => {
                Term::app("Sset", vec![var_term(*v), ty_term(*t), e.to_term()])
            }
            ClightStmt::Sassign(a, b) => Term::app("Sassign", vec![a.to_term(), b.to_term()]),
            ClightStmt::Scall(d, f, args) => Term::app(
                "Scall",
                vec![
                    match d {
                        Some((v, t)) => Term::app("Some", vec![var_term(*v), ty_term(*t)]),
                        None => Term::ident("None"),
                    },
                    Term::Str(f.clone()),
                    exprs(args),
                ],
            ),
            ClightStmt::Sifthenelse(e, t, f) => {
                Term::app("Sifthenelse", vec![e.to_term(), node_term(*t), node_term(*f)])
            }
            ClightStmt::Sloop(n) => Term::app("Sloop", vec![node_term(*n)]),
            ClightStmt::Sgoto(n) => Term::app("Sgoto", vec![node_term(*n)]),
            ClightStmt::Sreturn(e) => Term::app(
                "Sreturn",
                vec![match e {
                    Some(e) => Term::app("Some", vec![e.to_term()]),
                    None => Term::ident("None"),
                }],
            ),
            ClightStmt::Sskip => Term::ident("Sskip"),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        Ok(match t.as_app()? {
            ("Sset", [v, ty, e]) => {
                ClightStmt::Sset(parse_var(v)?, parse_ty(ty)?, ClExpr::from_term(e)?)
            }
            ("Sassign", [a, b]) => ClightStmt::Sassign(ClExpr::from_term(a)?, ClExpr::from_term(b)?),
            ("Scall", [d, f, args]) => ClightStmt::Scall(
                match d.as_app()? {
                    ("None", []) => None,
                    ("Some", [v, ty]) => Some((parse_var(v)?, parse_ty(ty)?)),
                    _ => return err(format!("bad call destination `{d}`")),
                },
                f.as_str()?.to_string(),
                args.as_list()?.iter().map(ClExpr::from_term).collect::<TermResult<_>>()?,
            ),
            ("Sifthenelse", [e, tn, fnode]) => {
                ClightStmt::Sifthenelse(ClExpr::from_term(e)?, parse_node(tn)?, parse_node(fnode)?)
            }
            ("Sloop", [n]) => ClightStmt::Sloop(parse_node(n)?),
            ("Sgoto", [n]) => ClightStmt::Sgoto(parse_node(n)?),
            ("Sreturn", [e]) => ClightStmt::Sreturn(match e.as_app() {
                Ok(("None", [])) => None,
                Ok(("Some", [x])) => Some(ClExpr::from_term(x)?),
                _ => return err(format!("bad return `{t}`")),
            }),
            ("Sskip", []) => ClightStmt::Sskip,
            _ => return err(format!("bad Clight statement `{t}`")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn member_access_round_trip() {
        let p = ClExpr::Evar(1, TypeIdx(13));
        let e = ClExpr::Efield(Box::new(ClExpr::Ederef(Box::new(p), TypeIdx(12))), 4, TypeIdx(9));
        let s = ClightStmt::Sset(5, TypeIdx(9), e);
        let text = s.render();
        assert_eq!(text, "Sset(v5, $9, Efield(Ederef(Evar(v1, $13), $12), 4, $9))");
        assert_eq!(ClightStmt::parse_text(&text).unwrap(), s);
        assert_eq!(s.var_types(), vec![(1, TypeIdx(13)), (5, TypeIdx(9))]);
        assert!(s.has_field_access());
    }
}
