//! The IR tower: shared operators plus one statement datatype per level.

pub mod clight;
pub mod csh;
pub mod ctype;
pub mod ltl;
pub mod mach;
pub mod rtl;
pub mod schema;

use std::fmt;

use crate::store::NodeId;
use crate::term::{err, Term, TermError, TermResult, Textual};
use crate::textual_enum;

pub use clight::{ClExpr, ClightStmt, CBinop, CUnop};
pub use csh::{CExpr, CshStmt};
pub use ctype::{CType, CTypeTable, StructLayout, TypeIdx};
pub use ltl::LtlInst;
pub use mach::{FrameOp, MachInst, Src};
pub use rtl::{RSrc, RtlInst};
pub use schema::level_schemas;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IRLevel {
    Asm,
    Mach,
    Ltl,
    Rtl,
    Cminor,
    Csharpminor,
    Clight,
}

textual_enum!(IRLevel {
    Asm => "x86Asm",
    Mach => "Mach",
    Ltl => "LTL",
    Rtl => "RTL",
    Cminor => "Cminor",
    Csharpminor => "Csharpminor",
    Clight => "Clight",
});

impl IRLevel {
    /// Case-insensitive lookup used by the CLI.
    pub fn from_name_loose(s: &str) -> Option<IRLevel> {
        IRLevel::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("asm") && *l == IRLevel::Asm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MachReg {
    AX, BX, CX, DX, SI, DI, BP, SP,
    R8, R9, R10, R11, R12, R13, R14, R15,
    X0, X1, X2, X3, X4, X5, X6, X7,
    X8, X9, X10, X11, X12, X13, X14, X15,
}

textual_enum!(MachReg {
    AX => "AX", BX => "BX", CX => "CX", DX => "DX",
    SI => "SI", DI => "DI", BP => "BP", SP => "SP",
    R8 => "R8", R9 => "R9", R10 => "R10", R11 => "R11",
    R12 => "R12", R13 => "R13", R14 => "R14", R15 => "R15",
    X0 => "X0", X1 => "X1", X2 => "X2", X3 => "X3",
    X4 => "X4", X5 => "X5", X6 => "X6", X7 => "X7",
    X8 => "X8", X9 => "X9", X10 => "X10", X11 => "X11",
    X12 => "X12", X13 => "X13", X14 => "X14", X15 => "X15",
});

impl MachReg {
    pub fn is_float(self) -> bool {
        self >= MachReg::X0
    }

    /// SysV integer argument registers, in order.
    pub const INT_ARGS: [MachReg; 6] = [
        MachReg::DI, MachReg::SI, MachReg::DX, MachReg::CX, MachReg::R8, MachReg::R9,
    ];

    pub const FLOAT_ARGS: [MachReg; 8] = [
        MachReg::X0, MachReg::X1, MachReg::X2, MachReg::X3,
        MachReg::X4, MachReg::X5, MachReg::X6, MachReg::X7,
    ];

    pub fn is_callee_saved(self) -> bool {
        matches!(
            self,
            MachReg::BX | MachReg::BP | MachReg::R12 | MachReg::R13 | MachReg::R14 | MachReg::R15
        )
    }

    pub fn is_caller_saved(self) -> bool {
        !self.is_callee_saved() && self != MachReg::SP
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Typ {
    Tint,
    Tlong,
    Tfloat,
    Tsingle,
    Tany32,
    Tany64,
}

textual_enum!(Typ {
    Tint => "Tint",
    Tlong => "Tlong",
    Tfloat => "Tfloat",
    Tsingle => "Tsingle",
    Tany32 => "Tany32",
    Tany64 => "Tany64",
});

impl Typ {
    /// The LTL view of a Mach slot type; `any` types become concrete integers.
    pub fn concretize(self) -> Typ {
        match self {
            Typ::Tany64 => Typ::Tlong,
            Typ::Tany32 => Typ::Tint,
            t => t,
        }
    }

    pub fn size(self) -> i64 {
        match self {
            Typ::Tint | Typ::Tsingle | Typ::Tany32 => 4,
            _ => 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Typ::Tfloat | Typ::Tsingle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Chunk {
    MInt8s,
    MInt8u,
    MInt16s,
    MInt16u,
    MInt32,
    MInt64,
    MFloat32,
    MFloat64,
    Many64,
}

textual_enum!(Chunk {
    MInt8s => "MInt8s",
    MInt8u => "MInt8u",
    MInt16s => "MInt16s",
    MInt16u => "MInt16u",
    MInt32 => "MInt32",
    MInt64 => "MInt64",
    MFloat32 => "MFloat32",
    MFloat64 => "MFloat64",
    Many64 => "Many64",
});

impl Chunk {
    pub fn size(self) -> i64 {
        match self {
            Chunk::MInt8s | Chunk::MInt8u => 1,
            Chunk::MInt16s | Chunk::MInt16u => 2,
            Chunk::MInt32 | Chunk::MFloat32 => 4,
            Chunk::MInt64 | Chunk::MFloat64 | Chunk::Many64 => 8,
        }
    }

    pub fn signed(self) -> Option<bool> {
        match self {
            Chunk::MInt8s | Chunk::MInt16s => Some(true),
            Chunk::MInt8u | Chunk::MInt16u => Some(false),
            _ => None,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Chunk::MFloat32 | Chunk::MFloat64)
    }

    pub fn typ(self) -> Typ {
        match self {
            Chunk::MInt64 => Typ::Tlong,
            Chunk::Many64 => Typ::Tany64,
            Chunk::MFloat32 => Typ::Tsingle,
            Chunk::MFloat64 => Typ::Tfloat,
            _ => Typ::Tint,
        }
    }

    pub fn of_typ(t: Typ) -> Chunk {
        match t {
            Typ::Tint | Typ::Tany32 => Chunk::MInt32,
            Typ::Tlong => Chunk::MInt64,
            Typ::Tany64 => Chunk::Many64,
            Typ::Tsingle => Chunk::MFloat32,
            Typ::Tfloat => Chunk::MFloat64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotKind {
    Local,
    Incoming,
    Outgoing,
}

textual_enum!(SlotKind {
    Local => "Local",
    Incoming => "Incoming",
    Outgoing => "Outgoing",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Comparison {
    Ceq,
    Cne,
    Clt,
    Cle,
    Cgt,
    Cge,
}

textual_enum!(Comparison {
    Ceq => "eq",
    Cne => "ne",
    Clt => "lt",
    Cle => "le",
    Cgt => "gt",
    Cge => "ge",
});

impl Comparison {
    pub fn negate(self) -> Comparison {
        match self {
            Comparison::Ceq => Comparison::Cne,
            Comparison::Cne => Comparison::Ceq,
            Comparison::Clt => Comparison::Cge,
            Comparison::Cle => Comparison::Cgt,
            Comparison::Cgt => Comparison::Cle,
            Comparison::Cge => Comparison::Clt,
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, Comparison::Ceq | Comparison::Cne)
    }
}

/// Operand class of a comparison: signedness and width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpKind {
    Int,
    Intu,
    Long,
    Longu,
    Float,
    Single,
}

impl CmpKind {
    fn infix(self) -> &'static str {
        match self {
            CmpKind::Int => "",
            CmpKind::Intu => "u",
            CmpKind::Long => "l",
            CmpKind::Longu => "lu",
            CmpKind::Float => "f",
            CmpKind::Single => "fs",
        }
    }

    fn from_infix(s: &str) -> Option<CmpKind> {
        Some(match s {
            "" => CmpKind::Int,
            "u" => CmpKind::Intu,
            "l" => CmpKind::Long,
            "lu" => CmpKind::Longu,
            "f" => CmpKind::Float,
            "fs" => CmpKind::Single,
            _ => return None,
        })
    }

    pub fn signed(self) -> bool {
        matches!(self, CmpKind::Int | CmpKind::Long)
    }

    pub fn wide(self) -> bool {
        matches!(self, CmpKind::Long | CmpKind::Longu)
    }
}

/// Branch condition, e.g. `Ccompimm_le(0)` or `Ccomplu_gt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    pub kind: CmpKind,
    pub cmp: Comparison,
    pub imm: Option<i64>,
}

impl Condition {
    pub fn arity(&self) -> usize {
        if self.imm.is_some() {
            1
        } else {
            2
        }
    }

    pub fn negate(self) -> Condition {
        let negatable = !matches!(self.kind, CmpKind::Float | CmpKind::Single);
        Condition {
            cmp: if negatable { self.cmp.negate() } else { self.cmp },
            ..self
        }
    }
}

impl Textual for Condition {
    fn to_term(&self) -> Term {
        let imm = if self.imm.is_some() { "imm" } else { "" };
        let name = format!("Ccomp{}{}_{}", self.kind.infix(), imm, self.cmp.name());
        match self.imm {
            Some(n) => Term::app(&name, vec![Term::Int(n)]),
            None => Term::ident(name),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        let (name, args) = t.as_app()?;
        let rest = name
            .strip_prefix("Ccomp")
            .ok_or_else(|| TermError(format!("bad condition `{name}`")))?;
        let (prefix, cmp) = rest
            .rsplit_once('_')
            .ok_or_else(|| TermError(format!("bad condition `{name}`")))?;
        let cmp = Comparison::from_name(cmp)
            .ok_or_else(|| TermError(format!("bad comparison in `{name}`")))?;
        let (kind, imm) = match prefix.strip_suffix("imm") {
            Some(k) => (k, true),
            None => (prefix, false),
        };
        let kind = CmpKind::from_infix(kind)
            .ok_or_else(|| TermError(format!("bad comparison kind in `{name}`")))?;
        let imm = match (imm, args) {
            (true, [n]) => Some(n.as_int()?),
            (false, []) => None,
            _ => return err(format!("bad condition arguments in `{t}`")),
        };
        Ok(Condition { kind, cmp, imm })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnOp {
    Oneg,
    Onegl,
    Onot,
    Onotl,
    Ocast8signed,
    Ocast8unsigned,
    Ocast16signed,
    Ocast16unsigned,
    Olongofint,
    Olongofintu,
    Ointoflong,
    Onegf,
    Onegfs,
    Ofloatofsingle,
    Osingleoffloat,
}

textual_enum!(UnOp {
    Oneg => "Oneg",
    Onegl => "Onegl",
    Onot => "Onot",
    Onotl => "Onotl",
    Ocast8signed => "Ocast8signed",
    Ocast8unsigned => "Ocast8unsigned",
    Ocast16signed => "Ocast16signed",
    Ocast16unsigned => "Ocast16unsigned",
    Olongofint => "Olongofint",
    Olongofintu => "Olongofintu",
    Ointoflong => "Ointoflong",
    Onegf => "Onegf",
    Onegfs => "Onegfs",
    Ofloatofsingle => "Ofloatofsingle",
    Osingleoffloat => "Osingleoffloat",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Oadd,
    Oaddl,
    Osub,
    Osubl,
    Omul,
    Omull,
    Odiv,
    Odivl,
    Omod,
    Omodl,
    Oand,
    Oandl,
    Oor,
    Oorl,
    Oxor,
    Oxorl,
    Oshl,
    Oshll,
    Oshr,
    Oshrl,
    Oshru,
    Oshrlu,
    Oaddf,
    Osubf,
    Omulf,
    Odivf,
    Oaddfs,
    Osubfs,
    Omulfs,
    Odivfs,
}

textual_enum!(BinOp {
    Oadd => "Oadd",
    Oaddl => "Oaddl",
    Osub => "Osub",
    Osubl => "Osubl",
    Omul => "Omul",
    Omull => "Omull",
    Odiv => "Odiv",
    Odivl => "Odivl",
    Omod => "Omod",
    Omodl => "Omodl",
    Oand => "Oand",
    Oandl => "Oandl",
    Oor => "Oor",
    Oorl => "Oorl",
    Oxor => "Oxor",
    Oxorl => "Oxorl",
    Oshl => "Oshl",
    Oshll => "Oshll",
    Oshr => "Oshr",
    Oshrl => "Oshrl",
    Oshru => "Oshru",
    Oshrlu => "Oshrlu",
    Oaddf => "Oaddf",
    Osubf => "Osubf",
    Omulf => "Omulf",
    Odivf => "Odivf",
    Oaddfs => "Oaddfs",
    Osubfs => "Osubfs",
    Omulfs => "Omulfs",
    Odivfs => "Odivfs",
});

impl BinOp {
    pub fn is_wide(self) -> bool {
        use BinOp::*;
        matches!(
            self,
            Oaddl | Osubl | Omull | Odivl | Omodl | Oandl | Oorl | Oxorl | Oshll | Oshrl | Oshrlu
        )
    }

    pub fn is_float(self) -> bool {
        use BinOp::*;
        matches!(self, Oaddf | Osubf | Omulf | Odivf | Oaddfs | Osubfs | Omulfs | Odivfs)
    }

    pub fn is_single(self) -> bool {
        use BinOp::*;
        matches!(self, Oaddfs | Osubfs | Omulfs | Odivfs)
    }

    pub fn is_shift(self) -> bool {
        use BinOp::*;
        matches!(self, Oshl | Oshll | Oshr | Oshrl | Oshru | Oshrlu)
    }

    /// Whether the operator fixes the signedness of its integer operands.
    pub fn signedness(self) -> Option<bool> {
        use BinOp::*;
        match self {
            Odiv | Odivl | Omod | Omodl | Oshr | Oshrl => Some(true),
            Oshru | Oshrlu => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Addressing {
    /// `base + d`
    Aindexed(i64),
    /// `base + index + d`
    Aindexed2(i64),
    /// `base + index * scale + d`
    Aindexed2scaled(i64, i64),
    /// `index * scale + d`
    Ascaled(i64, i64),
    Aglobal(String, i64),
    /// Stack-pointer relative.
    Ainstack(i64),
}

impl Addressing {
    pub fn arity(&self) -> usize {
        match self {
            Addressing::Aindexed(_) | Addressing::Ascaled(..) => 1,
            Addressing::Aindexed2(_) | Addressing::Aindexed2scaled(..) => 2,
            Addressing::Aglobal(..) | Addressing::Ainstack(_) => 0,
        }
    }
}

impl Textual for Addressing {
    fn to_term(&self) -> Term {
        match self {
            Addressing::Aindexed(d) => Term::app("Aindexed", vec![Term::Int(*d)]),
            Addressing::Aindexed2(d) => Term::app("Aindexed2", vec![Term::Int(*d)]),
            Addressing::Aindexed2scaled(s, d) => {
                Term::app("Aindexed2scaled", vec![Term::Int(*s), Term::Int(*d)])
            }
            Addressing::Ascaled(s, d) => Term::app("Ascaled", vec![Term::Int(*s), Term::Int(*d)]),
            Addressing::Aglobal(sym, d) => {
                Term::app("Aglobal", vec![Term::Str(sym.clone()), Term::Int(*d)])
            }
            Addressing::Ainstack(d) => Term::app("Ainstack", vec![Term::Int(*d)]),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        Ok(match t.as_app()? {
            ("Aindexed", [d]) => Addressing::Aindexed(d.as_int()?),
            ("Aindexed2", [d]) => Addressing::Aindexed2(d.as_int()?),
            ("Aindexed2scaled", [s, d]) => Addressing::Aindexed2scaled(s.as_int()?, d.as_int()?),
            ("Ascaled", [s, d]) => Addressing::Ascaled(s.as_int()?, d.as_int()?),
            ("Aglobal", [s, d]) => Addressing::Aglobal(s.as_str()?.to_string(), d.as_int()?),
            ("Ainstack", [d]) => Addressing::Ainstack(d.as_int()?),
            _ => return err(format!("bad addressing `{t}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operation {
    Omove,
    Ointconst(i64),
    Olongconst(i64),
    Oaddrsymbol(String, i64),
    Oaddrstack(i64),
    Olea(Addressing),
    Unop(UnOp),
    Binop(BinOp),
    /// Binary operation with an immediate second operand.
    Binimm(BinOp, i64),
    Ocmp(Condition),
    /// Signed division writing the quotient to the destination and the
    /// remainder to DX.
    Odivmod(bool),
}

impl Operation {
    pub fn arity(&self) -> usize {
        match self {
            Operation::Omove | Operation::Unop(_) | Operation::Binimm(..) => 1,
            Operation::Ointconst(_)
            | Operation::Olongconst(_)
            | Operation::Oaddrsymbol(..)
            | Operation::Oaddrstack(_) => 0,
            Operation::Olea(a) => a.arity(),
            Operation::Binop(_) | Operation::Odivmod(_) => 2,
            Operation::Ocmp(c) => c.arity(),
        }
    }
}

impl Textual for Operation {
    fn to_term(&self) -> Term {
        match self {
            Operation::Omove => Term::ident("Omove"),
            Operation::Ointconst(n) => Term::app("Ointconst", vec![Term::Int(*n)]),
            Operation::Olongconst(n) => Term::app("Olongconst", vec![Term::Int(*n)]),
            Operation::Oaddrsymbol(s, d) => {
                Term::app("Oaddrsymbol", vec![Term::Str(s.clone()), Term::Int(*d)])
            }
            Operation::Oaddrstack(d) => Term::app("Oaddrstack", vec![Term::Int(*d)]),
            Operation::Olea(a) => Term::app("Olea", vec![a.to_term()]),
            Operation::Unop(u) => u.to_term(),
            Operation::Binop(b) => b.to_term(),
            Operation::Binimm(b, n) => Term::app(&format!("{}imm", b.name()), vec![Term::Int(*n)]),
            Operation::Ocmp(c) => Term::app("Ocmp", vec![c.to_term()]),
            Operation::Odivmod(false) => Term::ident("Odivmod"),
            Operation::Odivmod(true) => Term::ident("Odivmodl"),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        let (name, args) = t.as_app()?;
        Ok(match (name, args) {
            ("Omove", []) => Operation::Omove,
            ("Ointconst", [n]) => Operation::Ointconst(n.as_int()?),
            ("Olongconst", [n]) => Operation::Olongconst(n.as_int()?),
            ("Oaddrsymbol", [s, d]) => Operation::Oaddrsymbol(s.as_str()?.to_string(), d.as_int()?),
            ("Oaddrstack", [d]) => Operation::Oaddrstack(d.as_int()?),
            ("Olea", [a]) => Operation::Olea(Addressing::from_term(a)?),
            ("Ocmp", [c]) => Operation::Ocmp(Condition::from_term(c)?),
            ("Odivmod", []) => Operation::Odivmod(false),
            ("Odivmodl", []) => Operation::Odivmod(true),
            (_, []) => {
                if let Some(u) = UnOp::from_name(name) {
                    Operation::Unop(u)
                } else if let Some(b) = BinOp::from_name(name) {
                    Operation::Binop(b)
                } else {
                    return err(format!("unknown operation `{name}`"));
                }
            }
            (_, [n]) => match name.strip_suffix("imm").and_then(BinOp::from_name) {
                Some(b) => Operation::Binimm(b, n.as_int()?),
                None => return err(format!("unknown operation `{t}`")),
            },
            _ => return err(format!("unknown operation `{t}`")),
        })
    }
}

/// A statement at any level above assembly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stmt {
    Mach(MachInst),
    Ltl(LtlInst),
    Rtl(RtlInst),
    Cminor(CshStmt),
    Csh(CshStmt),
    Clight(ClightStmt),
}

impl Stmt {
    pub fn level(&self) -> IRLevel {
        match self {
            Stmt::Mach(_) => IRLevel::Mach,
            Stmt::Ltl(_) => IRLevel::Ltl,
            Stmt::Rtl(_) => IRLevel::Rtl,
            Stmt::Cminor(_) => IRLevel::Cminor,
            Stmt::Csh(_) => IRLevel::Csharpminor,
            Stmt::Clight(_) => IRLevel::Clight,
        }
    }

    /// Rendering of the inner statement without the level wrapper.
    pub fn render_inner(&self) -> String {
        match self {
            Stmt::Mach(s) => s.render(),
            Stmt::Ltl(s) => s.render(),
            Stmt::Rtl(s) => s.render(),
            Stmt::Cminor(s) | Stmt::Csh(s) => s.render(),
            Stmt::Clight(s) => s.render(),
        }
    }
}

impl Textual for Stmt {
    fn to_term(&self) -> Term {
        let (tag, inner) = match self {
            Stmt::Mach(s) => ("Mach", s.to_term()),
            Stmt::Ltl(s) => ("Ltl", s.to_term()),
            Stmt::Rtl(s) => ("Rtl", s.to_term()),
            Stmt::Cminor(s) => ("Cminor", s.to_term()),
            Stmt::Csh(s) => ("Csh", s.to_term()),
            Stmt::Clight(s) => ("Clight", s.to_term()),
        };
        Term::app(tag, vec![inner])
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        let (tag, args) = t.args_of(1)?;
        let inner = &args[0];
        Ok(match tag {
            "Mach" => Stmt::Mach(MachInst::from_term(inner)?),
            "Ltl" => Stmt::Ltl(LtlInst::from_term(inner)?),
            "Rtl" => Stmt::Rtl(RtlInst::from_term(inner)?),
            "Cminor" => Stmt::Cminor(CshStmt::from_term(inner)?),
            "Csh" => Stmt::Csh(CshStmt::from_term(inner)?),
            "Clight" => Stmt::Clight(ClightStmt::from_term(inner)?),
            _ => return err(format!("unknown statement level `{tag}`")),
        })
    }
}

/// Render a statement at a given level.
pub fn render(s: &Stmt) -> String {
    s.render_inner()
}

/// Parse a statement rendered by [`render`] at `level`.
pub fn parse(level: IRLevel, text: &str) -> TermResult<Stmt> {
    let t = Term::parse(text)?;
    Ok(match level {
        IRLevel::Mach => Stmt::Mach(MachInst::from_term(&t)?),
        IRLevel::Ltl => Stmt::Ltl(LtlInst::from_term(&t)?),
        IRLevel::Rtl => Stmt::Rtl(RtlInst::from_term(&t)?),
        IRLevel::Cminor => Stmt::Cminor(CshStmt::from_term(&t)?),
        IRLevel::Csharpminor => Stmt::Csh(CshStmt::from_term(&t)?),
        IRLevel::Clight => Stmt::Clight(ClightStmt::from_term(&t)?),
        IRLevel::Asm => return err("assembly has no statement syntax"),
    })
}

pub(crate) fn node_term(n: NodeId) -> Term {
    Term::Node(n.0)
}

pub(crate) fn parse_node(t: &Term) -> TermResult<NodeId> {
    Ok(NodeId(t.as_node()?))
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_inner())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_order() {
        assert!(IRLevel::Asm < IRLevel::Mach);
        assert!(IRLevel::Csharpminor < IRLevel::Clight);
    }

    #[test]
    fn condition_syntax() {
        let c = Condition { kind: CmpKind::Int, cmp: Comparison::Cle, imm: Some(0) };
        assert_eq!(c.render(), "Ccompimm_le(0)");
        assert_eq!(Condition::parse_text("Ccompimm_le(0)").unwrap(), c);
        let c = Condition { kind: CmpKind::Longu, cmp: Comparison::Cgt, imm: None };
        assert_eq!(c.render(), "Ccomplu_gt");
        assert_eq!(Condition::parse_text("Ccomplu_gt").unwrap(), c);
    }

    #[test]
    fn operation_syntax() {
        for op in [
            Operation::Omove,
            Operation::Binimm(BinOp::Oaddl, -4),
            Operation::Binop(BinOp::Omul),
            Operation::Unop(UnOp::Olongofint),
            Operation::Olea(Addressing::Aindexed2scaled(4, 8)),
            Operation::Oaddrsymbol("g".into(), 0),
            Operation::Odivmod(true),
            Operation::Ocmp(Condition { kind: CmpKind::Intu, cmp: Comparison::Clt, imm: None }),
        ] {
            let text = op.render();
            assert_eq!(Operation::parse_text(&text).unwrap(), op, "{text}");
        }
        assert_eq!(Operation::Binimm(BinOp::Oaddl, 4).render(), "Oaddlimm(4)");
    }
}
