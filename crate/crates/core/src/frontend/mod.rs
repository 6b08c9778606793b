//! Textual AT&T listings: parsing, validation and the extensional store.
//!
//! ```text
//! <fn classify 0x401000>
//! 401000: push %rbp
//! 401001: mov %rsp,%rbp        # comment
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ir::{level_schemas, MachReg};
use crate::provenance::SemiringTag;
use crate::store::{Store, StoreError, Value};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrontendError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate function `{0}`")]
    DuplicateFunction(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Reg { name: String, width: u8 },
    Imm(i64),
    Mem {
        base: Option<String>,
        index: Option<String>,
        scale: u8,
        disp: i64,
        /// RIP-relative symbol, `sym+disp(%rip)`.
        symbol: Option<String>,
    },
    /// Direct branch or call target, with the listing's `<label>` if any.
    Target { addr: u64, label: Option<String> },
    /// Named call target without an address.
    Symbol(String),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg { name, .. } => write!(f, "{name}"),
            Operand::Imm(n) => write!(f, "${}", hex(*n)),
            Operand::Mem { base, index, scale, disp, symbol } => {
                match symbol {
                    Some(s) if *disp != 0 => write!(f, "{s}{:+}", disp)?,
                    Some(s) => write!(f, "{s}")?,
                    None if *disp != 0 || (base.is_none() && index.is_none()) => write!(f, "{}", hex(*disp))?,
                    None => {}
                }
                if symbol.is_some() {
                    write!(f, "(%rip)")?;
                } else if base.is_some() || index.is_some() {
                    write!(f, "({}", base.as_deref().unwrap_or(""))?;
                    if let Some(i) = index {
                        write!(f, ",{i},{scale}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
            Operand::Target { addr, label: Some(l) } => write!(f, "{addr:x} <{l}>"),
            Operand::Target { addr, label: None } => write!(f, "{addr:x}"),
            Operand::Symbol(s) => write!(f, "{s}"),
        }
    }
}

fn hex(n: i64) -> String {
    if n < 0 {
        format!("-{:#x}", n.unsigned_abs())
    } else {
        format!("{n:#x}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListingLine {
    pub address: u64,
    pub mnemonic: String,
    pub operands: Vec<Operand>,
    pub raw: String,
    /// Outside the closed mnemonic set; kept as an opaque line.
    pub unsupported: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionBlock {
    pub name: String,
    pub entry: u64,
    pub lines: Vec<ListingLine>,
}

/// Register name (without `%`) → (machine register, width in bits).
pub fn reg_info(name: &str) -> Option<(MachReg, u8)> {
    use MachReg::*;
    let name = name.strip_prefix('%').unwrap_or(name);
    const LEGACY: [(MachReg, [&str; 4]); 8] = [
        (AX, ["rax", "eax", "ax", "al"]),
        (BX, ["rbx", "ebx", "bx", "bl"]),
        (CX, ["rcx", "ecx", "cx", "cl"]),
        (DX, ["rdx", "edx", "dx", "dl"]),
        (SI, ["rsi", "esi", "si", "sil"]),
        (DI, ["rdi", "edi", "di", "dil"]),
        (BP, ["rbp", "ebp", "bp", "bpl"]),
        (SP, ["rsp", "esp", "sp", "spl"]),
    ];
    const WIDTHS: [u8; 4] = [64, 32, 16, 8];
    for (r, names) in LEGACY {
        if let Some(i) = names.iter().position(|n| *n == name) {
            return Some((r, WIDTHS[i]));
        }
    }
    let numbered = [R8, R9, R10, R11, R12, R13, R14, R15];
    if let Some(rest) = name.strip_prefix('r') {
        let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
        if let Ok(k) = digits.parse::<usize>() {
            if (8..16).contains(&k) {
                let width = match &rest[digits.len()..] {
                    "" => 64,
                    "d" => 32,
                    "w" => 16,
                    "b" => 8,
                    _ => return None,
                };
                return Some((numbered[k - 8], width));
            }
        }
    }
    if let Some(k) = name.strip_prefix("xmm").and_then(|k| k.parse::<usize>().ok()) {
        let xs = [X0, X1, X2, X3, X4, X5, X6, X7, X8, X9, X10, X11, X12, X13, X14, X15];
        return xs.get(k).map(|r| (*r, 128));
    }
    None
}

/// The closed set of mnemonics the lifter understands, as written in AT&T
/// listings (with and without size suffixes).
pub fn is_supported(m: &str) -> bool {
    const PLAIN: &[&str] = &[
        "mov", "movl", "movq", "movb", "movw", "movabs", "movss", "movsd", "movzbl", "movzwl", "movzbq",
        "movzwq", "movsbl", "movswl", "movsbq", "movswq", "movslq", "movzx", "movsx", "movsxd", "lea",
        "leaq", "add", "addl", "addq", "sub", "subl", "subq", "imul", "imull", "imulq", "idiv", "idivl",
        "idivq", "and", "andl", "andq", "or", "orl", "orq", "xor", "xorl", "xorq", "not", "notl", "notq",
        "neg", "negl", "negq", "shl", "shll", "shlq", "sal", "sall", "salq", "shr", "shrl", "shrq", "sar",
        "sarl", "sarq", "cmp", "cmpl", "cmpq", "test", "testl", "testq", "jmp", "jmpq", "call", "callq",
        "ret", "retq", "push", "pushq", "pop", "popq", "cltd", "cdq", "cqto", "cqo", "cltq", "cdqe",
        "nop", "nopl", "nopw", "endbr64", "leave", "leaveq", "addss", "subss", "mulss", "divss", "addsd",
        "subsd", "mulsd", "divsd", "cvtss2sd", "cvtsd2ss", "pxor",
    ];
    PLAIN.contains(&m) || jcc_cmp(m).is_some() || setcc_cmp(m).is_some()
}

/// Condition code of a `j<cc>` mnemonic.
pub fn jcc_cmp(m: &str) -> Option<&'static str> {
    cc(m.strip_prefix('j')?)
}

pub fn setcc_cmp(m: &str) -> Option<&'static str> {
    cc(m.strip_prefix("set")?)
}

fn cc(c: &str) -> Option<&'static str> {
    Some(match c {
        "e" | "z" => "e",
        "ne" | "nz" => "ne",
        "l" => "l",
        "le" => "le",
        "g" => "g",
        "ge" => "ge",
        "b" => "b",
        "be" => "be",
        "a" => "a",
        "ae" => "ae",
        "s" => "s",
        "ns" => "ns",
        _ => return None,
    })
}

fn is_branch(m: &str) -> bool {
    matches!(m, "jmp" | "jmpq" | "call" | "callq") || jcc_cmp(m).is_some()
}

fn parse_int(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = match body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16).ok()? as i64,
        None => body.parse::<i64>().ok()?,
    };
    Some(if neg { v.wrapping_neg() } else { v })
}

fn split_operands(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn parse_reg(s: &str) -> Result<Operand, String> {
    let name = s.strip_prefix('%').ok_or_else(|| format!("expected register, got `{s}`"))?;
    if name == "rip" {
        return Ok(Operand::Reg { name: s.to_string(), width: 64 });
    }
    let (_, width) = reg_info(name).ok_or_else(|| format!("unknown register `{s}`"))?;
    Ok(Operand::Reg { name: s.to_string(), width })
}

fn parse_mem(s: &str) -> Result<Operand, String> {
    let (prefix, inner) = match s.find('(') {
        Some(i) => {
            let inner = s[i + 1..].strip_suffix(')').ok_or_else(|| format!("unbalanced `{s}`"))?;
            (&s[..i], Some(inner))
        }
        None => (s, None),
    };
    let mut symbol = None;
    let mut disp = 0;
    if !prefix.is_empty() {
        if let Some(n) = parse_int(prefix) {
            disp = n;
        } else {
            let cut = prefix[1..].find(['+', '-']).map(|i| i + 1);
            let (sym, off) = match cut {
                Some(i) => (&prefix[..i], Some(&prefix[i..])),
                None => (prefix, None),
            };
            if !sym.chars().all(|c| c.is_ascii_alphanumeric() || "_.$@".contains(c)) {
                return Err(format!("bad displacement `{prefix}`"));
            }
            symbol = Some(sym.to_string());
            if let Some(off) = off {
                disp = parse_int(off).ok_or_else(|| format!("bad displacement `{off}`"))?;
            }
        }
    }
    let (mut base, mut index, mut scale) = (None, None, 1u8);
    if let Some(inner) = inner {
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        let reg = |p: &str| -> Result<Option<String>, String> {
            if p.is_empty() {
                return Ok(None);
            }
            parse_reg(p)?;
            Ok(Some(p.to_string()))
        };
        match parts.as_slice() {
            [b] => base = reg(b)?,
            [b, i] => {
                base = reg(b)?;
                index = reg(i)?;
            }
            [b, i, sc] => {
                base = reg(b)?;
                index = reg(i)?;
                scale = match *sc {
                    "1" => 1,
                    "2" => 2,
                    "4" => 4,
                    "8" => 8,
                    _ => return Err(format!("bad scale `{sc}`")),
                };
            }
            _ => return Err(format!("bad memory operand `{s}`")),
        }
    }
    if base.as_deref() == Some("%rip") {
        if symbol.is_none() {
            return Err(format!("RIP-relative operand without symbol `{s}`"));
        }
        base = None;
    } else if symbol.is_some() {
        return Err(format!("symbolic displacement needs %rip: `{s}`"));
    }
    if base.is_none() && index.is_none() && symbol.is_none() && inner.is_some() {
        return Err(format!("memory operand without base or displacement `{s}`"));
    }
    Ok(Operand::Mem { base, index, scale, disp, symbol })
}

fn parse_target(s: &str) -> Result<Operand, String> {
    let (addr, label) = match s.find('<') {
        Some(i) => {
            let label = s[i + 1..].strip_suffix('>').ok_or_else(|| format!("bad label in `{s}`"))?;
            (s[..i].trim(), Some(label.to_string()))
        }
        None => (s.trim(), None),
    };
    match u64::from_str_radix(addr.trim_start_matches("0x"), 16) {
        Ok(a) if !addr.is_empty() => Ok(Operand::Target { addr: a, label }),
        _ if label.is_none() && addr.chars().all(|c| c.is_ascii_alphanumeric() || "_.@".contains(c)) => {
            Ok(Operand::Symbol(addr.to_string()))
        }
        _ => Err(format!("bad branch target `{s}`")),
    }
}

fn parse_operand(s: &str, branch: bool) -> Result<Operand, String> {
    if branch {
        if let Some(inner) = s.strip_prefix('*') {
            return parse_operand(inner, false);
        }
        if !s.starts_with('%') {
            return parse_target(s);
        }
    }
    if let Some(imm) = s.strip_prefix('$') {
        return parse_int(imm).map(Operand::Imm).ok_or_else(|| format!("bad immediate `{s}`"));
    }
    if s.starts_with('%') {
        return parse_reg(s);
    }
    parse_mem(s)
}

fn parse_body_line(text: &str) -> Result<ListingLine, String> {
    let (addr, rest) = text.split_once(':').ok_or("expected `ADDR: MNEMONIC`")?;
    let address =
        u64::from_str_radix(addr.trim().trim_start_matches("0x"), 16).map_err(|_| format!("bad address `{addr}`"))?;
    let rest = rest.trim();
    if rest.is_empty() {
        return Err("missing mnemonic".into());
    }
    let (mnemonic, ops) = match rest.find(char::is_whitespace) {
        Some(i) => (&rest[..i], rest[i..].trim()),
        None => (rest, ""),
    };
    let mnemonic = mnemonic.to_ascii_lowercase();
    let supported = is_supported(&mnemonic);
    let branch = is_branch(&mnemonic);
    let parsed: Result<Vec<Operand>, String> =
        split_operands(ops).iter().map(|o| parse_operand(o, branch)).collect();
    let operands = match parsed {
        Ok(v) => v,
        Err(e) if supported => return Err(e),
        Err(_) => Vec::new(),
    };
    Ok(ListingLine { address, mnemonic, operands, raw: text.to_string(), unsupported: !supported })
}

fn parse_header(text: &str) -> Result<(String, u64), String> {
    let inner = text
        .strip_prefix("<fn")
        .and_then(|s| s.strip_suffix('>'))
        .ok_or("bad function header")?;
    let parts: Vec<&str> = inner.split_whitespace().collect();
    let [name, addr] = parts.as_slice() else {
        return Err("function header needs a name and an address".into());
    };
    let addr = u64::from_str_radix(addr.trim_start_matches("0x"), 16).map_err(|_| format!("bad address `{addr}`"))?;
    Ok((name.to_string(), addr))
}

pub fn parse_listing(text: &str) -> Result<Vec<FunctionBlock>, FrontendError> {
    let mut blocks: Vec<FunctionBlock> = Vec::new();
    let mut open: Option<(FunctionBlock, usize)> = None;
    let mut names = BTreeSet::new();
    let close = |open: &mut Option<(FunctionBlock, usize)>, blocks: &mut Vec<FunctionBlock>| match open.take() {
        Some((b, line)) if b.lines.is_empty() => Err(FrontendError::Syntax {
            line,
            message: format!("function `{}` has no instructions", b.name),
        }),
        Some((b, _)) => {
            blocks.push(b);
            Ok(())
        }
        None => Ok(()),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            if raw.trim().is_empty() {
                close(&mut open, &mut blocks)?;
            }
            continue;
        }
        let syntax = |message: String| FrontendError::Syntax { line, message };
        if body.starts_with("<fn") {
            close(&mut open, &mut blocks)?;
            let (name, entry) = parse_header(body).map_err(syntax)?;
            if !names.insert(name.clone()) {
                return Err(FrontendError::DuplicateFunction(name));
            }
            open = Some((FunctionBlock { name, entry, lines: Vec::new() }, line));
            continue;
        }
        let Some((block, _)) = open.as_mut() else {
            return Err(syntax("instruction outside a function block".into()));
        };
        let mut l = parse_body_line(body).map_err(syntax)?;
        l.raw = body.to_string();
        block.lines.push(l);
    }
    close(&mut open, &mut blocks)?;
    Ok(blocks)
}

/// Canonical text of a listing; `parse_listing` of it gives back the blocks.
pub fn render_listing(blocks: &[FunctionBlock]) -> String {
    let mut out = String::new();
    for b in blocks {
        out.push_str(&format!("<fn {} {:#x}>\n", b.name, b.entry));
        for l in &b.lines {
            out.push_str(&render_line(l));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn render_line(l: &ListingLine) -> String {
    if l.unsupported && l.operands.is_empty() {
        return l.raw.clone();
    }
    let ops: Vec<String> = l.operands.iter().map(|o| o.to_string()).collect();
    if ops.is_empty() {
        format!("{:x}: {}", l.address, l.mnemonic)
    } else {
        format!("{:x}: {} {}", l.address, l.mnemonic, ops.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub address: u64,
    pub severity: &'static str,
    pub message: String,
}

pub fn validate(blocks: &[FunctionBlock]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let starts: BTreeSet<u64> = blocks.iter().flat_map(|b| b.lines.iter().map(|l| l.address)).collect();
    let ranges: Vec<(u64, u64)> = blocks
        .iter()
        .map(|b| {
            let lo = b.lines.iter().map(|l| l.address).min().unwrap_or(b.entry);
            let hi = b.lines.iter().map(|l| l.address).max().unwrap_or(b.entry);
            (lo, hi)
        })
        .collect();
    for b in blocks {
        let mut prev: Option<u64> = None;
        for l in &b.lines {
            if let Some(p) = prev {
                if l.address <= p {
                    out.push(Diagnostic {
                        address: l.address,
                        severity: "warning",
                        message: format!("address {:#x} does not increase in `{}`", l.address, b.name),
                    });
                }
            }
            prev = Some(l.address);
            if l.mnemonic == "endbr64" {
                out.push(Diagnostic { address: l.address, severity: "info", message: "ignored mnemonic endbr64".into() });
            } else if l.unsupported {
                out.push(Diagnostic {
                    address: l.address,
                    severity: "warning",
                    message: format!("unsupported mnemonic `{}`", l.mnemonic),
                });
            }
            let is_call = matches!(l.mnemonic.as_str(), "call" | "callq");
            for o in &l.operands {
                if let Operand::Target { addr, .. } = o {
                    let inside = ranges.iter().any(|(lo, hi)| lo <= addr && addr <= hi);
                    if inside && !starts.contains(addr) {
                        out.push(Diagnostic {
                            address: l.address,
                            severity: "warning",
                            message: format!("branch into the middle of an instruction at {addr:#x}"),
                        });
                    } else if !inside && !is_call {
                        out.push(Diagnostic {
                            address: l.address,
                            severity: "warning",
                            message: format!("jump to {addr:#x} outside any function"),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Operand encoding in `instr` tuples.
pub fn operand_value(o: &Operand) -> Value {
    let t = |s: &str| Value::text(s);
    Value::Tuple(match o {
        Operand::Reg { name, width } => vec![t("reg"), t(name), Value::Int(*width as i64)],
        Operand::Imm(n) => vec![t("imm"), Value::Int(*n)],
        Operand::Mem { base, index, scale, disp, symbol } => vec![
            t("mem"),
            t(base.as_deref().unwrap_or("")),
            t(index.as_deref().unwrap_or("")),
            Value::Int(*scale as i64),
            Value::Int(*disp),
            t(symbol.as_deref().unwrap_or("")),
        ],
        Operand::Target { addr, label } => vec![t("target"), Value::node(*addr), t(label.as_deref().unwrap_or(""))],
        Operand::Symbol(s) => vec![t("sym"), t(s)],
    })
}

/// Inverse of [`operand_value`].
pub fn operand_of_value(v: &Value) -> Option<Operand> {
    let items = v.as_tuple()?;
    let text = |i: usize| items.get(i).and_then(Value::as_text);
    let opt = |i: usize| text(i).filter(|s| !s.is_empty()).map(str::to_string);
    Some(match text(0)? {
        "reg" => Operand::Reg { name: text(1)?.to_string(), width: items.get(2)?.as_int()? as u8 },
        "imm" => Operand::Imm(items.get(1)?.as_int()?),
        "mem" => Operand::Mem {
            base: opt(1),
            index: opt(2),
            scale: items.get(3)?.as_int()? as u8,
            disp: items.get(4)?.as_int()?,
            symbol: opt(5),
        },
        "target" => Operand::Target { addr: items.get(1)?.as_node()?.0, label: opt(2) },
        "sym" => Operand::Symbol(text(1)?.to_string()),
        _ => return None,
    })
}

pub fn to_edb(blocks: &[FunctionBlock], semiring: SemiringTag) -> Result<Store, StoreError> {
    let mut store = Store::new(semiring);
    store.declare_all(level_schemas())?;
    let mut regs: BTreeMap<String, MachReg> = BTreeMap::new();
    for b in blocks {
        store.insert_edb("func", vec![Value::text(&b.name), Value::node(b.entry)])?;
        for l in &b.lines {
            let mut ops: Vec<Value> = l.operands.iter().map(operand_value).collect();
            if l.unsupported && l.operands.is_empty() {
                ops.push(Value::Tuple(vec![Value::text("raw"), Value::text(&l.raw)]));
            }
            store.insert_edb(
                "instr",
                vec![Value::node(l.address), Value::text(&b.name), Value::text(&l.mnemonic), Value::Tuple(ops)],
            )?;
            for o in &l.operands {
                let names: Vec<&String> = match o {
                    Operand::Reg { name, .. } => vec![name],
                    Operand::Mem { base, index, .. } => base.iter().chain(index.iter()).collect(),
                    _ => vec![],
                };
                for n in names {
                    if let Some((r, _)) = reg_info(n) {
                        regs.insert(n.clone(), r);
                    }
                }
            }
        }
        for w in b.lines.windows(2) {
            store.insert_edb("next_instr", vec![Value::node(w[0].address), Value::node(w[1].address)])?;
        }
    }
    for (name, r) in regs {
        store.insert_edb("reg_map", vec![Value::text(name), Value::Reg(r)])?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_example_operands() {
        let l = parse_body_line("401000: mov %rdi,-0x8(%rbp)").unwrap();
        assert_eq!(l.address, 0x401000);
        assert_eq!(l.mnemonic, "mov");
        assert_eq!(
            l.operands,
            vec![
                Operand::Reg { name: "%rdi".into(), width: 64 },
                Operand::Mem { base: Some("%rbp".into()), index: None, scale: 1, disp: -8, symbol: None },
            ]
        );
        let l = parse_body_line("401010: movss 0x4(%rax),%xmm0").unwrap();
        assert!(matches!(&l.operands[0], Operand::Mem { disp: 4, base: Some(b), .. } if b == "%rax"));
        assert!(matches!(&l.operands[1], Operand::Reg { name, .. } if name == "%xmm0"));
    }

    #[test]
    fn header_and_blocks() {
        let text = "<fn classify 401000>\n401000: push %rbp\n401001: ret\n\n<fn g 0x401010>\n401010: ret\n";
        let blocks = parse_listing(text).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].name, "classify");
        assert_eq!(blocks[1].entry, 0x401010);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_listing("<fn f 0x10>\n10: push %rbp\n11 ret\n").unwrap_err();
        assert_eq!(e, FrontendError::Syntax { line: 3, message: "expected `ADDR: MNEMONIC`".into() });
        let e = parse_listing("<fn f 0x10>\n10: ret\n\n<fn f 0x20>\n20: ret\n").unwrap_err();
        assert_eq!(e, FrontendError::DuplicateFunction("f".into()));
        let e = parse_listing("<fn f 0x10>\n10: mov %foo,%rax\n").unwrap_err();
        assert!(matches!(e, FrontendError::Syntax { line: 2, .. }));
    }

    #[test]
    fn unknown_mnemonics_are_kept_opaque() {
        let b = parse_listing("<fn f 0x10>\n10: rep stos %al,%es:(%rdi)\n11: ret\n").unwrap();
        assert!(b[0].lines[0].unsupported);
        assert!(!b[0].lines[1].unsupported);
        let d = validate(&b);
        assert!(d.iter().any(|d| d.message.contains("unsupported")));
    }

    #[test]
    fn operand_forms() {
        let l = parse_body_line("10: mov g+0x4(%rip),%eax").unwrap();
        assert!(matches!(&l.operands[0], Operand::Mem { symbol: Some(s), disp: 4, base: None, .. } if s == "g"));
        let l = parse_body_line("10: lea 0x0(,%rax,8),%rdx").unwrap();
        assert!(matches!(&l.operands[0], Operand::Mem { base: None, index: Some(_), scale: 8, .. }));
        let l = parse_body_line("10: call 401136 <helper>").unwrap();
        assert_eq!(l.operands[0], Operand::Target { addr: 0x401136, label: Some("helper".into()) });
        let l = parse_body_line("10: call strlen").unwrap();
        assert_eq!(l.operands[0], Operand::Symbol("strlen".into()));
        let l = parse_body_line("10: movl $0xffffffff,-0x4(%rbp)").unwrap();
        assert_eq!(l.operands[0], Operand::Imm(0xffffffff));
        let l = parse_body_line("10: add $-1,%eax").unwrap();
        assert_eq!(l.operands[0], Operand::Imm(-1));
    }

    #[test]
    fn edb_tokens_and_reg_map() {
        let text = "<fn f 0x10>\n10: mov %rdi,%rax\n13: movss %xmm0,%xmm1\n17: ret\n";
        let b = parse_listing(text).unwrap();
        let s = to_edb(&b, SemiringTag::Prov).unwrap();
        assert_eq!(s.len("instr"), 3);
        let facts: usize = s.relations().map(|r| r.len()).sum();
        assert_eq!(s.tokens_issued() as usize, facts);
        assert!(s.contains("reg_map", &[Value::text("%rdi"), Value::Reg(MachReg::DI)]));
        assert!(s.contains("reg_map", &[Value::text("%xmm0"), Value::Reg(MachReg::X0)]));
        let empty = to_edb(&[], SemiringTag::Prov).unwrap();
        assert!(empty.is_empty() && empty.is_declared("instr"));
    }

    #[test]
    fn validation() {
        let b = parse_listing("<fn f 0x10>\n10: endbr64\n14: jmp 500\n16: ret\n").unwrap();
        let d = validate(&b);
        assert!(d.iter().any(|d| d.severity == "info" && d.message.contains("endbr64")));
        assert!(d.iter().any(|d| d.message.contains("outside any function")));
    }
}
