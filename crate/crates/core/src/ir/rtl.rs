use super::{node_term, parse_node, Addressing, Chunk, Condition, Operation};
use crate::store::NodeId;
use crate::term::{err, Term, TermError, TermResult, Textual};

/// Pseudo-register reference, rendered `x<id>`.
pub(crate) fn pseudo_term(p: u32) -> Term {
    Term::ident(format!("x{p}"))
}

pub(crate) fn parse_pseudo(t: &Term) -> TermResult<u32> {
    let name = t.as_ident()?;
    name.strip_prefix('x')
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| TermError(format!("bad pseudo-register `{name}`")))
}

fn pseudos(ps: &[u32]) -> Term {
    Term::List(ps.iter().map(|p| pseudo_term(*p)).collect())
}

fn parse_pseudos(t: &Term) -> TermResult<Vec<u32>> {
    t.as_list()?.iter().map(parse_pseudo).collect()
}

fn opt_pseudo(p: Option<u32>) -> Term {
    match p {
        Some(p) => Term::app("Some", vec![pseudo_term(p)]),
        None => Term::ident("None"),
    }
}

fn parse_opt_pseudo(t: &Term) -> TermResult<Option<u32>> {
    match t.as_app()? {
        ("None", []) => Ok(None),
        ("Some", [p]) => Ok(Some(parse_pseudo(p)?)),
        _ => err(format!("expected optional pseudo, found `{t}`")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RSrc {
    Pseudo(u32),
    Imm(i64),
}

impl Textual for RSrc {
    fn to_term(&self) -> Term {
        match self {
            RSrc::Pseudo(p) => pseudo_term(*p),
            RSrc::Imm(n) => Term::Int(*n),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        match t {
            Term::Int(n) => Ok(RSrc::Imm(*n)),
            _ => Ok(RSrc::Pseudo(parse_pseudo(t)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RtlInst {
    Iop(Operation, Vec<u32>, u32),
    Iload(Chunk, Addressing, Vec<u32>, u32),
    Istore(Chunk, Addressing, Vec<u32>, RSrc),
    Icall(String, Vec<u32>, Option<u32>),
    Icond(Condition, Vec<u32>, NodeId, NodeId),
    Ireturn(Option<u32>),
    Igoto(NodeId),
    Ibuiltin(String, Vec<u32>, Option<u32>),
    Inop,
}

impl Textual for RtlInst {
    fn to_term(&self) -> Term {
        use RtlInst::*;
        match self {
            Iop(op, args, d) => Term::app("Iop", vec![op.to_term(), pseudos(args), pseudo_term(*d)]),
            Iload(c, a, args, d) => Term::app(
                "Iload",
                vec![c.to_term(), a.to_term(), pseudos(args), pseudo_term(*d)],
            ),
            Istore(c, a, args, s) => Term::app(
                "Istore",
                vec![c.to_term(), a.to_term(), pseudos(args), s.to_term()],
            ),
            Icall(target, args, d) => Term::app(
                "Icall",
                vec![Term::Str(target.clone()), pseudos(args), opt_pseudo(*d)],
            ),
            Icond(c, args, t, f) => Term::app(
                "Icond",
                vec![c.to_term(), pseudos(args), node_term(*t), node_term(*f)],
            ),
            Ireturn(p) => Term::app("Ireturn", vec![opt_pseudo(*p)]),
            Igoto(n) => Term::app("Igoto", vec![node_term(*n)]),
            Ibuiltin(name, args, d) => Term::app(
                "Ibuiltin",
                vec![Term::Str(name.clone()), pseudos(args), opt_pseudo(*d)],
            ),
            Inop => Term::ident("Inop"),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        use RtlInst::*;
        Ok(match t.as_app()? {
            ("Iop", [op, args, d]) => {
                Iop(Operation::from_term(op)?, parse_pseudos(args)?, parse_pseudo(d)?)
            }
            ("Iload", [c, a, args, d]) => Iload(
                Chunk::from_term(c)?,
                Addressing::from_term(a)?,
                parse_pseudos(args)?,
                parse_pseudo(d)?,
            ),
            ("Istore", [c, a, args, s]) => Istore(
                Chunk::from_term(c)?,
                Addressing::from_term(a)?,
                parse_pseudos(args)?,
                RSrc::from_term(s)?,
            ),
            ("Icall", [target, args, d]) => Icall(
                target.as_str()?.to_string(),
                parse_pseudos(args)?,
                parse_opt_pseudo(d)?,
            ),
            ("Icond", [c, args, tn, fnode]) => Icond(
                Condition::from_term(c)?,
                parse_pseudos(args)?,
                parse_node(tn)?,
                parse_node(fnode)?,
            ),
            ("Ireturn", [p]) => Ireturn(parse_opt_pseudo(p)?),
            ("Igoto", [n]) => Igoto(parse_node(n)?),
            ("Ibuiltin", [name, args, d]) => Ibuiltin(
                name.as_str()?.to_string(),
                parse_pseudos(args)?,
                parse_opt_pseudo(d)?,
            ),
            ("Inop", []) => Inop,
            _ => return err(format!("bad RTL instruction `{t}`")),
        })
    }
}

impl RtlInst {
    pub fn uses(&self) -> Vec<u32> {
        use RtlInst::*;
        match self {
            Iop(_, args, _) | Iload(_, _, args, _) | Icall(_, args, _) | Icond(_, args, ..) => {
                args.clone()
            }
            Ibuiltin(_, args, _) => args.clone(),
            Istore(_, _, args, s) => {
                let mut v = args.clone();
                if let RSrc::Pseudo(p) = s {
                    v.push(*p);
                }
                v
            }
            Ireturn(Some(p)) => vec![*p],
            _ => Vec::new(),
        }
    }

    pub fn def(&self) -> Option<u32> {
        use RtlInst::*;
        match self {
            Iop(_, _, d) | Iload(_, _, _, d) => Some(*d),
            Icall(_, _, d) | Ibuiltin(_, _, d) => *d,
            _ => None,
        }
    }

    /// Rename every pseudo-register through `f`.
    pub fn rename(&self, f: &dyn Fn(u32) -> u32) -> RtlInst {
        use RtlInst::*;
        let m = |v: &[u32]| v.iter().map(|p| f(*p)).collect::<Vec<_>>();
        match self {
            Iop(op, args, d) => Iop(op.clone(), m(args), f(*d)),
            Iload(c, a, args, d) => Iload(*c, a.clone(), m(args), f(*d)),
            Istore(c, a, args, s) => Istore(
                *c,
                a.clone(),
                m(args),
                match s {
                    RSrc::Pseudo(p) => RSrc::Pseudo(f(*p)),
                    RSrc::Imm(n) => RSrc::Imm(*n),
                },
            ),
            Icall(t, args, d) => Icall(t.clone(), m(args), d.map(f)),
            Icond(c, args, t, e) => Icond(*c, m(args), *t, *e),
            Ireturn(p) => Ireturn(p.map(f)),
            Igoto(n) => Igoto(*n),
            Ibuiltin(n, args, d) => Ibuiltin(n.clone(), m(args), d.map(f)),
            Inop => Inop,
        }
    }

    /// The same instruction writing `d` instead of its destination.
    pub fn with_def(&self, d: Option<u32>) -> RtlInst {
        use RtlInst::*;
        match (self, d) {
            (Iop(op, args, _), Some(d)) => Iop(op.clone(), args.clone(), d),
            (Iload(c, a, args, _), Some(d)) => Iload(*c, a.clone(), args.clone(), d),
            (Icall(t, args, _), d) => Icall(t.clone(), args.clone(), d),
            (Ibuiltin(n, args, _), d) => Ibuiltin(n.clone(), args.clone(), d),
            (other, _) => other.clone(),
        }
    }

    /// Rename only the used operands, keeping the definition.
    pub fn rename_uses(&self, f: &dyn Fn(u32) -> u32) -> RtlInst {
        let def = self.def();
        let renamed = self.rename(f);
        match (def, renamed) {
            (Some(d), RtlInst::Iop(op, args, _)) => RtlInst::Iop(op, args, d),
            (Some(d), RtlInst::Iload(c, a, args, _)) => RtlInst::Iload(c, a, args, d),
            (Some(d), RtlInst::Icall(t, args, _)) => RtlInst::Icall(t, args, Some(d)),
            (Some(d), RtlInst::Ibuiltin(n, args, _)) => RtlInst::Ibuiltin(n, args, Some(d)),
            (_, other) => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_form() {
        let i = RtlInst::Iload(Chunk::MFloat32, Addressing::Aindexed(4), vec![1], 7);
        assert_eq!(i.render(), "Iload(MFloat32, Aindexed(4), [x1], x7)");
        assert_eq!(RtlInst::parse_text(&i.render()).unwrap(), i);
    }

    #[test]
    fn rename_uses_keeps_def() {
        let i = RtlInst::Iop(Operation::Omove, vec![2], 3);
        assert_eq!(i.rename_uses(&|p| p + 10), RtlInst::Iop(Operation::Omove, vec![12], 3));
    }
}
