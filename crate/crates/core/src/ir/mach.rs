use super::{node_term, parse_node, Addressing, Chunk, Condition, MachReg, Operation, Typ};
use crate::store::NodeId;
use crate::term::{err, list_of, opt_term, parse_list, parse_opt, Term, TermResult, Textual};

/// Source operand of a store: a register or an immediate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Src {
    Reg(MachReg),
    Imm(i64),
}

impl Textual for Src {
    fn to_term(&self) -> Term {
        match self {
            Src::Reg(r) => r.to_term(),
            Src::Imm(n) => Term::Int(*n),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        match t {
            Term::Int(n) => Ok(Src::Imm(*n)),
            _ => Ok(Src::Reg(MachReg::from_term(t)?)),
        }
    }
}

/// Frame-management instructions recognized before stack normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameOp {
    Fpush(MachReg),
    Fpop(MachReg),
    /// `mov %rsp,%rbp`
    Fsetfp,
    /// `sub $n,%rsp`
    Falloc(i64),
    /// `add $n,%rsp`
    Ffree(i64),
    Fleave,
}

impl Textual for FrameOp {
    fn to_term(&self) -> Term {
        match self {
            FrameOp::Fpush(r) => Term::app("Fpush", vec![r.to_term()]),
            FrameOp::Fpop(r) => Term::app("Fpop", vec![r.to_term()]),
            FrameOp::Fsetfp => Term::ident("Fsetfp"),
            FrameOp::Falloc(n) => Term::app("Falloc", vec![Term::Int(*n)]),
            FrameOp::Ffree(n) => Term::app("Ffree", vec![Term::Int(*n)]),
            FrameOp::Fleave => Term::ident("Fleave"),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        Ok(match t.as_app()? {
            ("Fpush", [r]) => FrameOp::Fpush(MachReg::from_term(r)?),
            ("Fpop", [r]) => FrameOp::Fpop(MachReg::from_term(r)?),
            ("Fsetfp", []) => FrameOp::Fsetfp,
            ("Falloc", [n]) => FrameOp::Falloc(n.as_int()?),
            ("Ffree", [n]) => FrameOp::Ffree(n.as_int()?),
            ("Fleave", []) => FrameOp::Fleave,
            _ => return err(format!("bad frame op `{t}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MachInst {
    /// Frame-pointer relative read.
    Mgetstack(i64, Typ, MachReg),
    Msetstack(Src, i64, Typ),
    Mload(Chunk, Addressing, Vec<MachReg>, MachReg),
    Mstore(Chunk, Addressing, Vec<MachReg>, Src),
    Mop(Operation, Vec<MachReg>, MachReg),
    Mcall(String),
    Mgoto(NodeId),
    Mcond(Condition, Vec<MachReg>, NodeId, NodeId),
    Mreturn,
    Mbuiltin(String, Vec<MachReg>, Option<MachReg>),
    Mframe(FrameOp),
    /// Flag-setting instruction whose effect is folded into the next branch.
    Mnop,
}

impl Textual for MachInst {
    fn to_term(&self) -> Term {
        use MachInst::*;
        match self {
            Mgetstack(ofs, ty, dst) => {
                Term::app("Mgetstack", vec![Term::Int(*ofs), ty.to_term(), dst.to_term()])
            }
            Msetstack(src, ofs, ty) => {
                Term::app("Msetstack", vec![src.to_term(), Term::Int(*ofs), ty.to_term()])
            }
            Mload(c, a, args, dst) => Term::app(
                "Mload",
                vec![c.to_term(), a.to_term(), list_of(args), dst.to_term()],
            ),
            Mstore(c, a, args, src) => Term::app(
                "Mstore",
                vec![c.to_term(), a.to_term(), list_of(args), src.to_term()],
            ),
            Mop(op, args, dst) => {
                Term::app("Mop", vec![op.to_term(), list_of(args), dst.to_term()])
            }
            Mcall(target) => Term::app("Mcall", vec![Term::Str(target.clone())]),
            Mgoto(n) => Term::app("Mgoto", vec![node_term(*n)]),
            Mcond(c, args, t, f) => Term::app(
                "Mcond",
                vec![c.to_term(), list_of(args), node_term(*t), node_term(*f)],
            ),
            Mreturn => Term::ident("Mreturn"),
            Mbuiltin(name, args, dst) => Term::app(
                "Mbuiltin",
                vec![Term::Str(name.clone()), list_of(args), opt_term(dst)],
            ),
            Mframe(op) => Term::app("Mframe", vec![op.to_term()]),
            Mnop => Term::ident("Mnop"),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        use MachInst::*;
        Ok(match t.as_app()? {
            ("Mgetstack", [o, ty, d]) => {
                Mgetstack(o.as_int()?, Typ::from_term(ty)?, MachReg::from_term(d)?)
            }
            ("Msetstack", [s, o, ty]) => {
                Msetstack(Src::from_term(s)?, o.as_int()?, Typ::from_term(ty)?)
            }
            ("Mload", [c, a, args, d]) => Mload(
                Chunk::from_term(c)?,
                Addressing::from_term(a)?,
                parse_list(args)?,
                MachReg::from_term(d)?,
            ),
            ("Mstore", [c, a, args, s]) => Mstore(
                Chunk::from_term(c)?,
                Addressing::from_term(a)?,
                parse_list(args)?,
                Src::from_term(s)?,
            ),
            ("Mop", [op, args, d]) => Mop(
                Operation::from_term(op)?,
                parse_list(args)?,
                MachReg::from_term(d)?,
            ),
            ("Mcall", [target]) => Mcall(target.as_str()?.to_string()),
            ("Mgoto", [n]) => Mgoto(parse_node(n)?),
            ("Mcond", [c, args, tn, fneg]) => Mcond(
                Condition::from_term(c)?,
                parse_list(args)?,
                parse_node(tn)?,
                parse_node(fneg)?,
            ),
            ("Mreturn", []) => Mreturn,
            ("Mbuiltin", [name, args, d]) => {
                Mbuiltin(name.as_str()?.to_string(), parse_list(args)?, parse_opt(d)?)
            }
            ("Mframe", [op]) => Mframe(FrameOp::from_term(op)?),
            ("Mnop", []) => Mnop,
            _ => return err(format!("bad Mach instruction `{t}`")),
        })
    }
}

impl MachInst {
    /// Successor targets other than fallthrough.
    pub fn branch_targets(&self) -> Vec<NodeId> {
        match self {
            MachInst::Mgoto(n) => vec![*n],
            MachInst::Mcond(_, _, t, _) => vec![*t],
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_example_forms() {
        let s = MachInst::Msetstack(Src::Reg(MachReg::DI), -8, Typ::Tany64);
        assert_eq!(s.render(), "Msetstack(DI, -8, Tany64)");
        let l = MachInst::Mload(Chunk::MInt32, Addressing::Aindexed(0), vec![MachReg::AX], MachReg::AX);
        assert_eq!(l.render(), "Mload(MInt32, Aindexed(0), [AX], AX)");
        for s in [s, l] {
            assert_eq!(MachInst::parse_text(&s.render()).unwrap(), s);
        }
    }

    #[test]
    fn builtin_round_trip() {
        let b = MachInst::Mbuiltin("alloca".into(), vec![MachReg::AX], Some(MachReg::BX));
        assert_eq!(b.render(), "Mbuiltin(\"alloca\", [AX], Some(BX))");
        assert_eq!(MachInst::parse_text(&b.render()).unwrap(), b);
    }
}
