//! Statement datatype shared by Cminor and Csharpminor.

use super::{node_term, parse_node, Addressing, BinOp, Chunk, CmpKind, Comparison, UnOp};
use crate::store::NodeId;
use crate::term::{err, Term, TermError, TermResult, Textual};

pub(crate) fn var_term(v: u32) -> Term {
    Term::ident(format!("v{v}"))
}

pub(crate) fn parse_var(t: &Term) -> TermResult<u32> {
    let name = t.as_ident()?;
    name.strip_prefix('v')
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| TermError(format!("bad variable `{name}`")))
}

pub(crate) fn cmp_name(kind: CmpKind, cmp: Comparison) -> String {
    let k = match kind {
        CmpKind::Int => "",
        CmpKind::Intu => "u",
        CmpKind::Long => "l",
        CmpKind::Longu => "lu",
        CmpKind::Float => "f",
        CmpKind::Single => "fs",
    };
    format!("Ocmp{k}_{}", cmp.name())
}

pub(crate) fn parse_cmp_name(name: &str) -> Option<(CmpKind, Comparison)> {
    let rest = name.strip_prefix("Ocmp")?;
    let (k, c) = rest.rsplit_once('_')?;
    let kind = match k {
        "" => CmpKind::Int,
        "u" => CmpKind::Intu,
        "l" => CmpKind::Long,
        "lu" => CmpKind::Longu,
        "f" => CmpKind::Float,
        "fs" => CmpKind::Single,
        _ => return None,
    };
    Some((kind, Comparison::from_name(c)?))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CExpr {
    Econst(i64),
    Evar(u32),
    Eaddrsym(String),
    /// Address of a stack-slot variable.
    Eaddrof(u32),
    Eunop(UnOp, Box<CExpr>),
    Ebinop(BinOp, Box<CExpr>, Box<CExpr>),
    Ecmp(CmpKind, Comparison, Box<CExpr>, Box<CExpr>),
    Eload(Chunk, Box<CExpr>),
    /// Machine addressing mode; only present at the Cminor level.
    Eaddr(Addressing, Vec<CExpr>),
}

impl CExpr {
    pub fn var(v: u32) -> CExpr {
        CExpr::Evar(v)
    }

    pub fn binop(op: BinOp, a: CExpr, b: CExpr) -> CExpr {
        CExpr::Ebinop(op, Box::new(a), Box::new(b))
    }

    pub fn vars(&self, out: &mut Vec<u32>) {
        match self {
            CExpr::Evar(v) | CExpr::Eaddrof(v) => out.push(*v),
            CExpr::Econst(_) | CExpr::Eaddrsym(_) => {}
            CExpr::Eunop(_, a) | CExpr::Eload(_, a) => a.vars(out),
            CExpr::Ebinop(_, a, b) | CExpr::Ecmp(_, _, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            CExpr::Eaddr(_, args) => args.iter().for_each(|a| a.vars(out)),
        }
    }
}

impl Textual for CExpr {
    fn to_term(&self) -> Term {
        match self {
            CExpr::Econst(n) => Term::Int(*n),
            CExpr::Evar(v) => var_term(*v),
            CExpr::Eaddrsym(s) => Term::app("Eaddrsym", vec![Term::Str(s.clone())]),
            CExpr::Eaddrof(v) => Term::app("Eaddrof", vec![var_term(*v)]),
            CExpr::Eunop(op, a) => Term::app(op.name(), vec![a.to_term()]),
            CExpr::Ebinop(op, a, b) => Term::app(op.name(), vec![a.to_term(), b.to_term()]),
            CExpr::Ecmp(k, c, a, b) => Term::app(&cmp_name(*k, *c), vec![a.to_term(), b.to_term()]),
            CExpr::Eload(c, a) => Term::app("Eload", vec![c.to_term(), a.to_term()]),
            CExpr::Eaddr(a, args) => Term::app(
                "Eaddr",
                vec![a.to_term(), Term::List(args.iter().map(|e| e.to_term()).collect())],
            ),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        match t {
            Term::Int(n) => return Ok(CExpr::Econst(*n)),
            Term::Ident(_) => return Ok(CExpr::Evar(parse_var(t)?)),
            _ => {}
        }
        let (name, args) = t.as_app()?;
        let b = |x: &Term| CExpr::from_term(x).map(Box::new);
        Ok(match (name, args) {
            ("Eaddrsym", [s]) => CExpr::Eaddrsym(s.as_str()?.to_string()),
            ("Eaddrof", [v]) => CExpr::Eaddrof(parse_var(v)?),
            ("Eload", [c, a]) => CExpr::Eload(Chunk::from_term(c)?, b(a)?),
            ("Eaddr", [a, list]) => CExpr::Eaddr(
                Addressing::from_term(a)?,
                list.as_list()?.iter().map(CExpr::from_term).collect::<TermResult<_>>()?,
            ),
            (_, [a]) if UnOp::from_name(name).is_some() => {
                CExpr::Eunop(UnOp::from_name(name).unwrap(), b(a)?)
            }
            (_, [x, y]) => {
                if let Some(op) = BinOp::from_name(name) {
                    CExpr::Ebinop(op, b(x)?, b(y)?)
                } else if let Some((k, c)) = parse_cmp_name(name) {
                    CExpr::Ecmp(k, c, b(x)?, b(y)?)
                } else {
                    return err(format!("unknown operator `{name}`"));
                }
            }
            _ => return err(format!("bad expression `{t}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CshStmt {
    Sset(u32, CExpr),
    Sstore(Chunk, CExpr, CExpr),
    Scall(Option<u32>, String, Vec<CExpr>),
    Sifthenelse(CExpr, NodeId, NodeId),
    Sloop(NodeId),
    Sgoto(NodeId),
    Sreturn(Option<CExpr>),
    Sskip,
}

impl CshStmt {
    pub fn vars(&self) -> Vec<u32> {
        let mut out = Vec::new();
        match self {
            CshStmt::Sset(v, e) => {
                out.push(*v);
                e.vars(&mut out);
            }
            CshStmt::Sstore(_, a, b) => {
                a.vars(&mut out);
                b.vars(&mut out);
            }
            CshStmt::Scall(d, _, args) => {
                out.extend(d.iter().copied());
                args.iter().for_each(|a| a.vars(&mut out));
            }
            CshStmt::Sifthenelse(e, ..) => e.vars(&mut out),
            CshStmt::Sreturn(Some(e)) => e.vars(&mut out),
            _ => {}
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn exprs(v: &[CExpr]) -> Term {
    Term::List(v.iter().map(|e| e.to_term()).collect())
}

impl Textual for CshStmt {
    fn to_term(&self) -> Term {
        match self {
            CshStmt::Sset(v, e) => Term::app("Sset", vec![var_term(*v), e.to_term()]),
            CshStmt::Sstore(c, a, b) => {
                Term::app("Sstore", vec![c.to_term(), a.to_term(), b.to_term()])
            }
            CshStmt::Scall(d, f, args) => Term::app(
                "Scall",
                vec![
                    match d {
                        Some(v) => Term::app("Some", vec![var_term(*v)]),
                        None => Term::ident("None"),
                    },
                    Term::Str(f.clone()),
                    exprs(args),
                ],
            ),
            CshStmt::Sifthenelse(e, t, f) => {
                Term::app("Sifthenelse", vec![e.to_term(), node_term(*t), node_term(*f)])
            }
            CshStmt::Sloop(n) => Term::app("Sloop", vec![node_term(*n)]),
            CshStmt::Sgoto(n) => Term::app("Sgoto", vec![node_term(*n)]),
            CshStmt::Sreturn(e) => Term::app(
                "Sreturn",
                vec![match e {
                    Some(e) => Term::app("Some", vec![e.to_term()]),
                    None => Term::ident("None"),
                }],
            ),
            CshStmt::Sskip => Term::ident("Sskip"),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        Ok(match t.as_app()? {
            ("Sset", [v, e]) => CshStmt::Sset(parse_var(v)?, CExpr::from_term(e)?),
            ("Sstore", [c, a, b]) => {
                CshStmt::Sstore(Chunk::from_term(c)?, CExpr::from_term(a)?, CExpr::from_term(b)?)
            }
            ("Scall", [d, f, args]) => CshStmt::Scall(
                match d.as_app()? {
                    ("None", []) => None,
                    ("Some", [v]) => Some(parse_var(v)?),
                    _ => return err(format!("bad call destination `{d}`")),
                },
                f.as_str()?.to_string(),
                args.as_list()?.iter().map(CExpr::from_term).collect::<TermResult<_>>()?,
            ),
            ("Sifthenelse", [e, tn, fnode]) => {
                CshStmt::Sifthenelse(CExpr::from_term(e)?, parse_node(tn)?, parse_node(fnode)?)
            }
            ("Sloop", [n]) => CshStmt::Sloop(parse_node(n)?),
            ("Sgoto", [n]) => CshStmt::Sgoto(parse_node(n)?),
            ("Sreturn", [e]) => CshStmt::Sreturn(match e.as_app() {
                Ok(("None", [])) => None,
                Ok(("Some", [x])) => Some(CExpr::from_term(x)?),
                _ => return err(format!("bad return `{t}`")),
            }),
            ("Sskip", []) => CshStmt::Sskip,
            _ => return err(format!("bad Csharpminor statement `{t}`")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_rendering() {
        let s = CshStmt::Sset(3, CExpr::binop(BinOp::Oaddl, CExpr::var(1), CExpr::Econst(4)));
        assert_eq!(s.render(), "Sset(v3, Oaddl(v1, 4))");
        assert_eq!(CshStmt::parse_text("Sset(v3, Oaddl(v1, 4))").unwrap(), s);
    }

    #[test]
    fn load_and_compare_round_trip() {
        let e = CExpr::Eload(
            Chunk::MFloat32,
            Box::new(CExpr::binop(BinOp::Oaddl, CExpr::var(2), CExpr::Econst(4))),
        );
        assert_eq!(e.render(), "Eload(MFloat32, Oaddl(v2, 4))");
        let c = CExpr::Ecmp(CmpKind::Int, Comparison::Cle, Box::new(CExpr::var(4)), Box::new(CExpr::Econst(0)));
        let s = CshStmt::Sifthenelse(c, NodeId(0x401020), NodeId(0x401010));
        assert_eq!(s.render(), "Sifthenelse(Ocmp_le(v4, 0), @401020, @401010)");
        assert_eq!(CshStmt::parse_text(&s.render()).unwrap(), s);
        let call = CshStmt::Scall(Some(1), "f".into(), vec![e, CExpr::Eaddrof(3)]);
        assert_eq!(CshStmt::parse_text(&call.render()).unwrap(), call);
    }
}
