//! Dynamic stack allocation: `sub %reg,%rsp` followed by a capture of the
//! adjusted stack pointer.

use crate::engine::{v, EngineResult, Pass, Rule};
use crate::frontend::{reg_info, Operand};
use crate::ir::{MachInst, MachReg, Stmt};
use crate::lifting::operands;
use crate::store::Value;

pub const ALLOCA_PASS: &str = "recognize_alloca";

fn reg_of(o: &Operand) -> Option<MachReg> {
    match o {
        Operand::Reg { name, width: 64 } => reg_info(name).map(|r| r.0),
        _ => None,
    }
}

/// The builtin for a `sub`/`mov` pair, if it is an allocation.
pub fn match_alloca(m1: &str, o1: &[Operand], m2: &str, o2: &[Operand]) -> Option<MachInst> {
    if !matches!(m1, "sub" | "subq") || !matches!(m2, "mov" | "movq") {
        return None;
    }
    let [size, sp] = o1 else { return None };
    let (size, sp) = (reg_of(size)?, reg_of(sp)?);
    let [src, dst] = o2 else { return None };
    let (src, dst) = (reg_of(src)?, reg_of(dst)?);
    if sp != MachReg::SP || src != MachReg::SP || size == MachReg::SP || matches!(dst, MachReg::SP | MachReg::BP) {
        return None;
    }
    Some(MachInst::Mbuiltin("alloca".into(), vec![size], Some(dst)))
}

fn alloca_value(a: &[Value]) -> Result<Vec<Vec<Value>>, String> {
    let (Some(m1), Some(m2)) = (a[0].as_text(), a[2].as_text()) else {
        return Err("bad alloca bindings".into());
    };
    Ok(match match_alloca(m1, &operands(&a[1])?, m2, &operands(&a[3])?) {
        Some(i) => vec![vec![Value::stmt(Stmt::Mach(i))]],
        None => Vec::new(),
    })
}

/// Adds an `Mbuiltin("alloca", [size], Some(dst))` candidate at the capture.
pub fn recognize_alloca() -> EngineResult<Pass> {
    let r = Rule::builder("sub_capture")
        .head("mach_inst", vec![v("k"), v("s")])
        .atom("instr", vec![v("n"), v("f"), v("m1"), v("o1")])
        .atom("next_instr", vec![v("n"), v("k")])
        .atom("instr", vec![v("k"), v("f"), v("m2"), v("o2")])
        .compute("alloca", &["m1", "o1", "m2", "o2"], &["s"], alloca_value)
        .build()?;
    Pass::declarative(ALLOCA_PASS, &["instr", "next_instr"], &["mach_inst"], vec![r])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_listing;

    fn pair(a: &str, b: &str) -> Option<MachInst> {
        let blocks = parse_listing(&format!("<fn f 0x10>\n10: {a}\n14: {b}\n")).unwrap();
        let l = &blocks[0].lines;
        match_alloca(&l[0].mnemonic, &l[0].operands, &l[1].mnemonic, &l[1].operands)
    }

    #[test]
    fn register_sub_then_capture() {
        let m = pair("sub %rax,%rsp", "mov %rsp,%rbx").unwrap();
        assert_eq!(m, MachInst::Mbuiltin("alloca".into(), vec![MachReg::AX], Some(MachReg::BX)));
    }

    #[test]
    fn static_frame_is_not_alloca() {
        assert!(pair("sub $0x20,%rsp", "mov %rsp,%rbx").is_none());
        assert!(pair("sub %rax,%rsp", "mov %rsp,%rbp").is_none());
        assert!(pair("sub %rax,%rcx", "mov %rsp,%rbx").is_none());
    }
}
