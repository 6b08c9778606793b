use super::{node_term, parse_node, Addressing, Chunk, Condition, MachReg, Operation, SlotKind, Src, Typ};
use crate::store::NodeId;
use crate::term::{err, list_of, opt_term, parse_list, parse_opt, Term, TermResult, Textual};

/// LTL instructions; stack offsets are frame-pointer relative.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LtlInst {
    Lgetstack(SlotKind, i64, Typ, MachReg),
    Lsetstack(Src, SlotKind, i64, Typ),
    Lop(Operation, Vec<MachReg>, MachReg),
    Lload(Chunk, Addressing, Vec<MachReg>, MachReg),
    Lstore(Chunk, Addressing, Vec<MachReg>, Src),
    Lcall(String),
    Lgoto(NodeId),
    Lcond(Condition, Vec<MachReg>, NodeId, NodeId),
    Lreturn,
    Lbuiltin(String, Vec<MachReg>, Option<MachReg>),
    Lnop,
}

impl Textual for LtlInst {
    fn to_term(&self) -> Term {
        use LtlInst::*;
        match self {
            Lgetstack(k, ofs, ty, dst) => Term::app(
                "Lgetstack",
                vec![k.to_term(), Term::Int(*ofs), ty.to_term(), dst.to_term()],
            ),
            Lsetstack(src, k, ofs, ty) => Term::app(
                "Lsetstack",
                vec![src.to_term(), k.to_term(), Term::Int(*ofs), ty.to_term()],
            ),
            Lop(op, args, dst) => {
                Term::app("Lop", vec![op.to_term(), list_of(args), dst.to_term()])
            }
            Lload(c, a, args, dst) => Term::app(
                "Lload",
                vec![c.to_term(), a.to_term(), list_of(args), dst.to_term()],
            ),
            Lstore(c, a, args, src) => Term::app(
                "Lstore",
                vec![c.to_term(), a.to_term(), list_of(args), src.to_term()],
            ),
            Lcall(target) => Term::app("Lcall", vec![Term::Str(target.clone())]),
            Lgoto(n) => Term::app("Lgoto", vec![node_term(*n)]),
            Lcond(c, args, t, f) => Term::app(
                "Lcond",
                vec![c.to_term(), list_of(args), node_term(*t), node_term(*f)],
            ),
            Lreturn => Term::ident("Lreturn"),
            Lbuiltin(name, args, dst) => Term::app(
                "Lbuiltin",
                vec![Term::Str(name.clone()), list_of(args), opt_term(dst)],
            ),
            Lnop => Term::ident("Lnop"),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        use LtlInst::*;
        Ok(match t.as_app()? {
            ("Lgetstack", [k, o, ty, d]) => Lgetstack(
                SlotKind::from_term(k)?,
                o.as_int()?,
                Typ::from_term(ty)?,
                MachReg::from_term(d)?,
            ),
            ("Lsetstack", [s, k, o, ty]) => Lsetstack(
                Src::from_term(s)?,
                SlotKind::from_term(k)?,
                o.as_int()?,
                Typ::from_term(ty)?,
            ),
            ("Lop", [op, args, d]) => Lop(
                Operation::from_term(op)?,
                parse_list(args)?,
                MachReg::from_term(d)?,
            ),
            ("Lload", [c, a, args, d]) => Lload(
                Chunk::from_term(c)?,
                Addressing::from_term(a)?,
                parse_list(args)?,
                MachReg::from_term(d)?,
            ),
            ("Lstore", [c, a, args, s]) => Lstore(
                Chunk::from_term(c)?,
                Addressing::from_term(a)?,
                parse_list(args)?,
                Src::from_term(s)?,
            ),
            ("Lcall", [target]) => Lcall(target.as_str()?.to_string()),
            ("Lgoto", [n]) => Lgoto(parse_node(n)?),
            ("Lcond", [c, args, tn, fnode]) => Lcond(
                Condition::from_term(c)?,
                parse_list(args)?,
                parse_node(tn)?,
                parse_node(fnode)?,
            ),
            ("Lreturn", []) => Lreturn,
            ("Lbuiltin", [name, args, d]) => {
                Lbuiltin(name.as_str()?.to_string(), parse_list(args)?, parse_opt(d)?)
            }
            ("Lnop", []) => Lnop,
            _ => return err(format!("bad LTL instruction `{t}`")),
        })
    }
}

impl LtlInst {
    /// Registers read by the instruction. Calls and returns are handled by
    /// the callers, which know the signature.
    pub fn uses(&self) -> Vec<MachReg> {
        use LtlInst::*;
        let src = |s: &Src| match s {
            Src::Reg(r) => vec![*r],
            Src::Imm(_) => vec![],
        };
        match self {
            Lsetstack(s, ..) => src(s),
            Lop(_, args, _) | Lload(_, _, args, _) | Lcond(_, args, _, _) | Lbuiltin(_, args, _) => {
                args.clone()
            }
            Lstore(_, _, args, s) => {
                let mut v = args.clone();
                v.extend(src(s));
                v
            }
            _ => Vec::new(),
        }
    }

    /// Registers written by the instruction (calls excluded, see [`uses`](Self::uses)).
    pub fn defs(&self) -> Vec<MachReg> {
        use LtlInst::*;
        match self {
            Lgetstack(.., d) | Lload(.., d) => vec![*d],
            Lop(Operation::Odivmod(_), _, d) => vec![*d, MachReg::DX],
            Lop(_, _, d) => vec![*d],
            Lbuiltin(_, _, Some(d)) => vec![*d],
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_example_form() {
        let g = LtlInst::Lgetstack(SlotKind::Local, -8, Typ::Tlong, MachReg::AX);
        assert_eq!(g.render(), "Lgetstack(Local, -8, Tlong, AX)");
        assert_eq!(LtlInst::parse_text(&g.render()).unwrap(), g);
    }
}
