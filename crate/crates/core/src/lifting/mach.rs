//! Asm → Mach: one typed Mach candidate per recognized instruction.

use crate::frontend::{jcc_cmp, operand_of_value, reg_info, setcc_cmp, Operand};
use crate::ir::{
    Addressing, BinOp, Chunk, CmpKind, Comparison, Condition, FrameOp, MachInst, MachReg, Operation, Src, Typ,
    UnOp,
};
use crate::store::{NodeId, Value};

/// Outcome of lifting one instruction in isolation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lift {
    Inst(MachInst),
    /// Conditional branches and `set<cc>` need the preceding flag setter.
    Deferred,
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Loc {
    Reg(MachReg, u8),
    Imm(i64),
    /// Frame-pointer relative.
    Stack(i64),
    /// Stack-pointer relative.
    SpRel(i64),
    Mem(Addressing, Vec<MachReg>),
}

fn reg(name: &str) -> Result<(MachReg, u8), String> {
    reg_info(name).ok_or_else(|| format!("register `{name}` not supported"))
}

fn loc(o: &Operand) -> Result<Loc, String> {
    Ok(match o {
        Operand::Reg { name, .. } => {
            let (r, w) = reg(name)?;
            Loc::Reg(r, w)
        }
        // Listings print 32-bit immediates unsigned; the encoding sign-extends.
        Operand::Imm(n) if (0x8000_0000..=0xffff_ffff).contains(n) => Loc::Imm(*n as u32 as i32 as i64),
        Operand::Imm(n) => Loc::Imm(*n),
        Operand::Mem { base, index, scale, disp, symbol } => {
            if let Some(s) = symbol {
                return Ok(Loc::Mem(Addressing::Aglobal(s.clone(), *disp), vec![]));
            }
            let base = base.as_deref().map(reg).transpose()?.map(|b| b.0);
            let index = index.as_deref().map(reg).transpose()?.map(|i| i.0);
            let scale = *scale as i64;
            match (base, index) {
                (Some(MachReg::BP), None) => Loc::Stack(*disp),
                (Some(MachReg::SP), None) => Loc::SpRel(*disp),
                (Some(MachReg::BP | MachReg::SP), Some(_)) => return Err("indexed frame access".into()),
                (Some(b), None) => Loc::Mem(Addressing::Aindexed(*disp), vec![b]),
                (Some(b), Some(i)) if scale == 1 => Loc::Mem(Addressing::Aindexed2(*disp), vec![b, i]),
                (Some(b), Some(i)) => Loc::Mem(Addressing::Aindexed2scaled(scale, *disp), vec![b, i]),
                (None, Some(i)) => Loc::Mem(Addressing::Ascaled(scale, *disp), vec![i]),
                (None, None) => return Err("absolute memory operand".into()),
            }
        }
        Operand::Target { .. } | Operand::Symbol(_) => return Err("unexpected branch target".into()),
    })
}

/// Width implied by an AT&T size suffix.
fn suffix_width(m: &str) -> Option<u8> {
    match m.chars().last()? {
        'b' => Some(8),
        'w' => Some(16),
        'l' => Some(32),
        'q' => Some(64),
        _ => None,
    }
}

fn int_chunk(w: u8) -> Chunk {
    match w {
        8 => Chunk::MInt8s,
        16 => Chunk::MInt16s,
        32 => Chunk::MInt32,
        _ => Chunk::MInt64,
    }
}

fn any_typ(w: u8) -> Typ {
    if w == 64 {
        Typ::Tany64
    } else {
        Typ::Tany32
    }
}

fn width_of(m: &str, locs: &[&Loc]) -> Option<u8> {
    locs.iter()
        .find_map(|l| match l {
            Loc::Reg(r, w) if !r.is_float() => Some(*w),
            _ => None,
        })
        .or_else(|| suffix_width(m))
}

fn src_of(l: &Loc) -> Option<Src> {
    match l {
        Loc::Reg(r, _) => Some(Src::Reg(*r)),
        Loc::Imm(n) => Some(Src::Imm(*n)),
        _ => None,
    }
}

fn mov(m: &str, src: &Loc, dst: &Loc, float: Option<Typ>) -> Result<MachInst, String> {
    use MachInst::*;
    let w = width_of(m, &[src, dst]).unwrap_or(64);
    let typ = float.unwrap_or_else(|| any_typ(w));
    let chunk = match float {
        Some(Typ::Tsingle) => Chunk::MFloat32,
        Some(_) => Chunk::MFloat64,
        None => int_chunk(w),
    };
    let word = float.is_some() || w >= 32;
    Ok(match (src, dst) {
        (Loc::Reg(MachReg::SP, _), Loc::Reg(MachReg::BP, _)) => Mframe(FrameOp::Fsetfp),
        (Loc::Reg(r, _), Loc::Reg(d, _)) => Mop(Operation::Omove, vec![*r], *d),
        (Loc::Imm(n), Loc::Reg(d, _)) if w == 64 => Mop(Operation::Olongconst(*n), vec![], *d),
        (Loc::Imm(n), Loc::Reg(d, _)) => Mop(Operation::Ointconst(*n), vec![], *d),
        (Loc::Stack(o), Loc::Reg(d, _)) if word => Mgetstack(*o, typ, *d),
        (Loc::Reg(_, _) | Loc::Imm(_), Loc::Stack(o)) if word => Msetstack(src_of(src).unwrap(), *o, typ),
        (Loc::Stack(_), _) | (_, Loc::Stack(_)) => return Err("sub-word stack access".into()),
        (Loc::SpRel(o), Loc::Reg(d, _)) => Mload(chunk, Addressing::Ainstack(*o), vec![], *d),
        (Loc::Reg(_, _) | Loc::Imm(_), Loc::SpRel(o)) => {
            Mstore(chunk, Addressing::Ainstack(*o), vec![], src_of(src).unwrap())
        }
        (Loc::Mem(..), Loc::Reg(..)) if !word => return Err("sub-word load without extension".into()),
        (Loc::Mem(a, args), Loc::Reg(d, _)) => Mload(chunk, a.clone(), args.clone(), *d),
        (Loc::Reg(..) | Loc::Imm(_), Loc::Mem(a, args)) => Mstore(chunk, a.clone(), args.clone(), src_of(src).unwrap()),
        _ => return Err("unsupported operand combination".into()),
    })
}

fn extend(src: &Loc, dst: &Loc, signed: bool, from: u8) -> Result<MachInst, String> {
    let Loc::Reg(d, _) = dst else {
        return Err("extension into memory".into());
    };
    let op = match (from, signed) {
        (8, true) => UnOp::Ocast8signed,
        (8, false) => UnOp::Ocast8unsigned,
        (16, true) => UnOp::Ocast16signed,
        (16, false) => UnOp::Ocast16unsigned,
        (_, true) => UnOp::Olongofint,
        (_, false) => UnOp::Olongofintu,
    };
    Ok(match src {
        Loc::Reg(r, _) => MachInst::Mop(Operation::Unop(op), vec![*r], *d),
        Loc::Mem(a, args) => {
            let chunk = match (from, signed) {
                (8, true) => Chunk::MInt8s,
                (8, false) => Chunk::MInt8u,
                (16, true) => Chunk::MInt16s,
                (16, false) => Chunk::MInt16u,
                _ => return Err("32-bit extension from memory".into()),
            };
            MachInst::Mload(chunk, a.clone(), args.clone(), *d)
        }
        Loc::Stack(_) | Loc::SpRel(_) => return Err("sub-word stack access".into()),
        Loc::Imm(_) => return Err("extension of an immediate".into()),
    })
}

fn arith_op(base: &str, wide: bool) -> Option<BinOp> {
    use BinOp::*;
    let (n, l) = match base {
        "add" => (Oadd, Oaddl),
        "sub" => (Osub, Osubl),
        "imul" => (Omul, Omull),
        "and" => (Oand, Oandl),
        "or" => (Oor, Oorl),
        "xor" => (Oxor, Oxorl),
        "shl" | "sal" => (Oshl, Oshll),
        "shr" => (Oshru, Oshrlu),
        "sar" => (Oshr, Oshrl),
        _ => return None,
    };
    Some(if wide { l } else { n })
}

fn float_op(m: &str) -> Option<BinOp> {
    use BinOp::*;
    Some(match m {
        "addss" => Oaddfs,
        "subss" => Osubfs,
        "mulss" => Omulfs,
        "divss" => Odivfs,
        "addsd" => Oaddf,
        "subsd" => Osubf,
        "mulsd" => Omulf,
        "divsd" => Odivf,
        _ => return None,
    })
}

/// Strips a size suffix from an integer mnemonic the lifter knows.
fn int_base(m: &str) -> Option<&str> {
    const BASES: &[&str] = &[
        "add", "sub", "imul", "and", "or", "xor", "shl", "sal", "shr", "sar", "not", "neg", "idiv", "cmp", "test",
        "push", "pop", "lea", "mov",
    ];
    if BASES.contains(&m) {
        return Some(m);
    }
    let stem = &m[..m.len().saturating_sub(1)];
    if suffix_width(m).is_some() && BASES.contains(&stem) {
        return Some(stem);
    }
    None
}

fn call_name(o: &Operand) -> Result<String, String> {
    match o {
        Operand::Target { label: Some(l), .. } => Ok(l.strip_suffix("@plt").unwrap_or(l).to_string()),
        Operand::Target { addr, label: None } => Ok(format!("sub_{addr:x}")),
        Operand::Symbol(s) => Ok(s.strip_suffix("@plt").unwrap_or(s).to_string()),
        _ => Err("indirect call".into()),
    }
}

/// Lift one instruction on its own.
pub fn lift_instruction(m: &str, ops: &[Operand]) -> Lift {
    match lift_inner(m, ops) {
        Ok(l) => l,
        Err(e) => Lift::Unsupported(format!("{m}: {e}")),
    }
}

fn lift_inner(m: &str, ops: &[Operand]) -> Result<Lift, String> {
    use MachInst::*;
    if jcc_cmp(m).is_some() || setcc_cmp(m).is_some() {
        return Ok(Lift::Deferred);
    }
    let locs = || ops.iter().map(loc).collect::<Result<Vec<Loc>, String>>();
    let inst = match m {
        "nop" | "nopl" | "nopw" | "endbr64" => Mnop,
        "ret" | "retq" => Mreturn,
        "leave" | "leaveq" => Mframe(FrameOp::Fleave),
        "cltq" | "cdqe" => Mop(Operation::Unop(UnOp::Olongofint), vec![MachReg::AX], MachReg::AX),
        "cltd" | "cdq" => Mop(Operation::Binimm(BinOp::Oshr, 31), vec![MachReg::AX], MachReg::DX),
        "cqto" | "cqo" => Mop(Operation::Binimm(BinOp::Oshrl, 63), vec![MachReg::AX], MachReg::DX),
        "jmp" | "jmpq" => match ops {
            [Operand::Target { addr, .. }] => Mgoto(NodeId(*addr)),
            _ => return Err("indirect jump".into()),
        },
        "call" | "callq" => match ops {
            [o] => Mcall(call_name(o)?),
            _ => return Err("bad call operands".into()),
        },
        "movss" | "movsd" => {
            let l = locs()?;
            let [s, d] = l.as_slice() else { return Err("expects two operands".into()) };
            let t = if m == "movss" { Typ::Tsingle } else { Typ::Tfloat };
            mov(m, s, d, Some(t))?
        }
        "movabs" => {
            let l = locs()?;
            let [s, d] = l.as_slice() else { return Err("expects two operands".into()) };
            mov("movq", s, d, None)?
        }
        "movzbl" | "movzbq" | "movzwl" | "movzwq" | "movsbl" | "movsbq" | "movswl" | "movswq" | "movslq" | "movsxd" => {
            let l = locs()?;
            let [s, d] = l.as_slice() else { return Err("expects two operands".into()) };
            let from = match &m[4..5] {
                "b" => 8,
                "w" => 16,
                _ => 32,
            };
            extend(s, d, m.starts_with("movs"), from)?
        }
        "movzx" | "movsx" => {
            let l = locs()?;
            let [s, d] = l.as_slice() else { return Err("expects two operands".into()) };
            let from = match s {
                Loc::Reg(_, w) => *w,
                _ => return Err("width of memory extension unknown".into()),
            };
            extend(s, d, m == "movsx", from)?
        }
        "cvtss2sd" | "cvtsd2ss" => {
            let l = locs()?;
            match l.as_slice() {
                [Loc::Reg(s, _), Loc::Reg(d, _)] => {
                    let op = if m == "cvtss2sd" { UnOp::Ofloatofsingle } else { UnOp::Osingleoffloat };
                    Mop(Operation::Unop(op), vec![*s], *d)
                }
                _ => return Err("memory operand in conversion".into()),
            }
        }
        _ if float_op(m).is_some() => {
            let l = locs()?;
            match l.as_slice() {
                [Loc::Reg(s, _), Loc::Reg(d, _)] => Mop(Operation::Binop(float_op(m).unwrap()), vec![*d, *s], *d),
                _ => return Err("memory operand in arithmetic".into()),
            }
        }
        _ => match int_base(m) {
            Some(base) => return lift_int(m, base, &locs()?).map(Lift::Inst),
            None => return Err("unsupported mnemonic".into()),
        },
    };
    Ok(Lift::Inst(inst))
}

fn lift_int(m: &str, base: &str, l: &[Loc]) -> Result<MachInst, String> {
    use MachInst::*;
    Ok(match (base, l) {
        ("cmp" | "test", _) => Mnop,
        ("push", [Loc::Reg(r, 64)]) => Mframe(FrameOp::Fpush(*r)),
        ("pop", [Loc::Reg(r, 64)]) => Mframe(FrameOp::Fpop(*r)),
        ("push" | "pop", _) => return Err("only 64-bit register push/pop".into()),
        ("mov", [s, d]) => mov(m, s, d, None)?,
        ("lea", [s, Loc::Reg(d, _)]) => match s {
            Loc::Stack(o) => Mop(Operation::Oaddrstack(*o), vec![], *d),
            Loc::Mem(Addressing::Aglobal(sym, o), _) => Mop(Operation::Oaddrsymbol(sym.clone(), *o), vec![], *d),
            Loc::Mem(a, args) => Mop(Operation::Olea(a.clone()), args.clone(), *d),
            _ => return Err("stack-pointer relative lea".into()),
        },
        ("sub", [Loc::Imm(n), Loc::Reg(MachReg::SP, _)]) => Mframe(FrameOp::Falloc(*n)),
        ("add", [Loc::Imm(n), Loc::Reg(MachReg::SP, _)]) => Mframe(FrameOp::Ffree(*n)),
        ("xor", [Loc::Reg(a, w), Loc::Reg(b, _)]) if a == b => {
            let op = if *w == 64 { Operation::Olongconst(0) } else { Operation::Ointconst(0) };
            Mop(op, vec![], *a)
        }
        ("not" | "neg", [Loc::Reg(d, w)]) => {
            let op = match (base, *w == 64) {
                ("not", false) => UnOp::Onot,
                ("not", true) => UnOp::Onotl,
                (_, false) => UnOp::Oneg,
                (_, true) => UnOp::Onegl,
            };
            Mop(Operation::Unop(op), vec![*d], *d)
        }
        ("idiv", [Loc::Reg(r, w)]) => Mop(Operation::Odivmod(*w == 64), vec![MachReg::AX, *r], MachReg::AX),
        ("imul", [Loc::Imm(n), Loc::Reg(s, w), Loc::Reg(d, _)]) => {
            let op = if *w == 64 { BinOp::Omull } else { BinOp::Omul };
            Mop(Operation::Binimm(op, *n), vec![*s], *d)
        }
        ("shl" | "sal" | "shr" | "sar", [Loc::Reg(d, w)]) => {
            Mop(Operation::Binimm(arith_op(base, *w == 64).unwrap(), 1), vec![*d], *d)
        }
        (_, [Loc::Imm(n), Loc::Reg(d, w)]) if arith_op(base, false).is_some() => {
            Mop(Operation::Binimm(arith_op(base, *w == 64).unwrap(), *n), vec![*d], *d)
        }
        (_, [Loc::Reg(s, _), Loc::Reg(d, w)]) if arith_op(base, false).is_some() => {
            let wide = *w == 64 || *d == MachReg::SP;
            Mop(Operation::Binop(arith_op(base, wide).unwrap()), vec![*d, *s], *d)
        }
        _ => return Err("memory operand or unsupported operand form".into()),
    })
}

fn cc_condition(cc: &str, wide: bool, imm: Option<i64>) -> Condition {
    use Comparison::*;
    let (cmp, signed) = match cc {
        "e" => (Ceq, true),
        "ne" => (Cne, true),
        "l" | "s" => (Clt, true),
        "le" => (Cle, true),
        "g" => (Cgt, true),
        "ge" | "ns" => (Cge, true),
        "b" => (Clt, false),
        "be" => (Cle, false),
        "a" => (Cgt, false),
        _ => (Cge, false),
    };
    let kind = match (wide, signed) {
        (false, true) => CmpKind::Int,
        (false, false) => CmpKind::Intu,
        (true, true) => CmpKind::Long,
        (true, false) => CmpKind::Longu,
    };
    Condition { kind, cmp, imm }
}

/// The condition tested by a flag consumer, from the `cmp`/`test` before it.
fn flag_condition(setter: &str, ops: &[Operand], cc: &str) -> Result<(Condition, Vec<MachReg>), String> {
    let base = int_base(setter).filter(|b| *b == "cmp" || *b == "test");
    let Some(base) = base else {
        return Err(format!("flags set by `{setter}` are not tracked"));
    };
    let l = ops.iter().map(loc).collect::<Result<Vec<Loc>, String>>()?;
    if matches!(cc, "s" | "ns") && base != "test" {
        return Err("sign test after cmp".into());
    }
    Ok(match (base, l.as_slice()) {
        ("test", [Loc::Reg(a, w), Loc::Reg(b, _)]) if a == b => (cc_condition(cc, *w == 64, Some(0)), vec![*a]),
        ("test", _) => return Err("bit test is not a comparison".into()),
        ("cmp", [Loc::Imm(k), Loc::Reg(d, w)]) => (cc_condition(cc, *w == 64, Some(*k)), vec![*d]),
        ("cmp", [Loc::Reg(s, _), Loc::Reg(d, w)]) => (cc_condition(cc, *w == 64, None), vec![*d, *s]),
        _ => return Err("memory operand in comparison".into()),
    })
}

/// Lifts a conditional branch or `set<cc>` together with its flag setter.
pub fn lift_flag_user(
    setter: &str,
    setter_ops: &[Operand],
    user: &str,
    user_ops: &[Operand],
    next: NodeId,
) -> Result<MachInst, String> {
    if let Some(cc) = jcc_cmp(user) {
        let target = match user_ops {
            [Operand::Target { addr, .. }] => NodeId(*addr),
            _ => return Err(format!("{user}: indirect conditional branch")),
        };
        let (cond, args) = flag_condition(setter, setter_ops, cc).map_err(|e| format!("{user}: {e}"))?;
        return Ok(MachInst::Mcond(cond, args, target, next));
    }
    if let Some(cc) = setcc_cmp(user) {
        let dst = match user_ops {
            [Operand::Reg { name, .. }] => reg(name)?.0,
            _ => return Err(format!("{user}: memory destination")),
        };
        let (cond, args) = flag_condition(setter, setter_ops, cc).map_err(|e| format!("{user}: {e}"))?;
        return Ok(MachInst::Mop(Operation::Ocmp(cond), args, dst));
    }
    Err(format!("{user} does not read flags"))
}

pub fn is_flag_user(m: &str) -> bool {
    jcc_cmp(m).is_some() || setcc_cmp(m).is_some()
}

pub(crate) fn operands(v: &Value) -> Result<Vec<Operand>, String> {
    let items = v.as_tuple().ok_or("operand list is not a tuple")?;
    Ok(items.iter().filter_map(operand_of_value).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_listing;
    use crate::term::Textual;

    fn lift_text(line: &str) -> Lift {
        let b = parse_listing(&format!("<fn f 0x10>\n{line}\n")).unwrap();
        let l = &b[0].lines[0];
        lift_instruction(&l.mnemonic, &l.operands)
    }

    fn rendered(line: &str) -> String {
        match lift_text(line) {
            Lift::Inst(i) => i.render(),
            other => format!("{other:?}"),
        }
    }

    #[test]
    fn running_example_instructions() {
        assert_eq!(rendered("10: mov %rdi,-0x8(%rbp)"), "Msetstack(DI, -8, Tany64)");
        assert_eq!(rendered("10: mov (%rax),%eax"), "Mload(MInt32, Aindexed(0), [AX], AX)");
        assert_eq!(rendered("10: movss 0x4(%rax),%xmm0"), "Mload(MFloat32, Aindexed(4), [AX], X0)");
        assert_eq!(rendered("10: mov -0x8(%rbp),%rax"), "Mgetstack(-8, Tany64, AX)");
        assert_eq!(rendered("10: movss .LC0(%rip),%xmm1"), "Mload(MFloat32, Aglobal(\".LC0\", 0), [], X1)");
    }

    #[test]
    fn frame_and_arith() {
        assert_eq!(rendered("10: push %rbp"), "Mframe(Fpush(BP))");
        assert_eq!(rendered("10: mov %rsp,%rbp"), "Mframe(Fsetfp)");
        assert_eq!(rendered("10: sub $0x20,%rsp"), "Mframe(Falloc(32))");
        assert_eq!(rendered("10: sub %rax,%rsp"), "Mop(Osubl, [SP, AX], SP)");
        assert_eq!(rendered("10: add %edx,%eax"), "Mop(Oadd, [AX, DX], AX)");
        assert_eq!(rendered("10: addq $0x1,%rax"), "Mop(Oaddlimm(1), [AX], AX)");
        assert_eq!(rendered("10: idiv %ecx"), "Mop(Odivmod, [AX, CX], AX)");
        assert_eq!(rendered("10: xor %eax,%eax"), "Mop(Ointconst(0), [], AX)");
        assert_eq!(rendered("10: call 401136 <helper>"), "Mcall(\"helper\")");
        assert_eq!(rendered("10: call puts@plt"), "Mcall(\"puts\")");
        assert_eq!(lift_text("10: jle 40"), Lift::Deferred);
    }

    #[test]
    fn unsupported_forms_explain_themselves() {
        for line in ["10: addl $0x1,-0x4(%rbp)", "10: movzbl -0x1(%rbp),%eax", "10: jmp *%rax"] {
            assert!(matches!(lift_text(line), Lift::Unsupported(_)), "{line}");
        }
    }

    #[test]
    fn conditions() {
        let eax = Operand::Reg { name: "%eax".into(), width: 32 };
        let test = [eax.clone(), eax];
        let jle = [Operand::Target { addr: 0x50, label: None }];
        let c = lift_flag_user("test", &test, "jle", &jle, NodeId(0x20)).unwrap();
        assert_eq!(c.render(), "Mcond(Ccompimm_le(0), [AX], @50, @20)");
        let cmp = [Operand::Reg { name: "%esi".into(), width: 32 }, Operand::Reg { name: "%edi".into(), width: 32 }];
        let c = lift_flag_user("cmp", &cmp, "jb", &jle, NodeId(0x20)).unwrap();
        assert_eq!(c.render(), "Mcond(Ccompu_lt, [DI, SI], @50, @20)");
        let set = [Operand::Reg { name: "%al".into(), width: 8 }];
        let c = lift_flag_user("cmpl", &cmp, "setg", &set, NodeId(0x20)).unwrap();
        assert_eq!(c.render(), "Mop(Ocmp(Ccomp_gt), [DI, SI], AX)");
        assert!(lift_flag_user("add", &cmp, "jle", &jle, NodeId(0x20)).is_err());
    }
}
