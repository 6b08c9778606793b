//! External signature seeds: `name: (t1, t2, ...) -> tr`, one per line.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ir::{CTypeTable, TypeIdx};
use crate::store::{Store, StoreResult, Value};

/// The seed file shipped with the library.
pub const DEFAULT_SEEDS: &str = include_str!("../../data/libc.sigs");

#[derive(Debug, Error, PartialEq, Eq)]
#[error("seed line {line}: {message}")]
pub struct SeedError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    pub name: String,
    pub params: Vec<TypeIdx>,
    pub ret: TypeIdx,
    pub variadic: bool,
}

/// Parses a C type name such as `const char *` or `unsigned long`.
pub fn parse_type(types: &CTypeTable, text: &str) -> Option<TypeIdx> {
    let stars = text.chars().filter(|c| *c == '*').count();
    let words: Vec<&str> = text
        .split(|c: char| c.is_whitespace() || c == '*')
        .filter(|w| !w.is_empty() && *w != "const" && *w != "restrict")
        .collect();
    let base = match words.join(" ").as_str() {
        "void" => CTypeTable::VOID,
        "char" | "signed char" => CTypeTable::CHAR,
        "unsigned char" => CTypeTable::UCHAR,
        "short" => CTypeTable::SHORT,
        "unsigned short" => CTypeTable::USHORT,
        "int" | "signed" | "signed int" => CTypeTable::INT,
        "unsigned" | "unsigned int" => CTypeTable::UINT,
        "long" | "long int" | "long long" | "ssize_t" => CTypeTable::LONG,
        "unsigned long" | "unsigned long long" | "size_t" => CTypeTable::ULONG,
        "float" => CTypeTable::FLOAT,
        "double" => CTypeTable::DOUBLE,
        _ => return None,
    };
    Some((0..stars).fold(base, |t, _| types.pointer(t)))
}

pub fn parse_seeds(types: &CTypeTable, text: &str) -> Result<Vec<Seed>, SeedError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let bad = |m: &str| SeedError { line, message: m.to_string() };
        let (name, sig) = body.split_once(':').ok_or_else(|| bad("expected `name: (params) -> ret`"))?;
        let (params, ret) = sig.split_once("->").ok_or_else(|| bad("missing `->`"))?;
        let params = params
            .trim()
            .strip_prefix('(')
            .and_then(|p| p.strip_suffix(')'))
            .ok_or_else(|| bad("parameters must be parenthesized"))?;
        let mut tys = Vec::new();
        let mut variadic = false;
        for p in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if p == "..." {
                variadic = true;
                continue;
            }
            if variadic {
                return Err(bad("`...` must come last"));
            }
            let t = parse_type(types, p).ok_or_else(|| bad(&format!("unknown type `{p}`")))?;
            if t == CTypeTable::VOID {
                continue;
            }
            tys.push(t);
        }
        let ret = parse_type(types, ret.trim()).ok_or_else(|| bad(&format!("unknown type `{}`", ret.trim())))?;
        out.push(Seed { name: name.trim().to_string(), params: tys, ret, variadic });
    }
    Ok(out)
}

/// Loads seeds into `sig_seed` as extensional facts.
pub fn load_seeds(store: &mut Store, seeds: &[Seed]) -> StoreResult<()> {
    for s in seeds {
        store.insert_edb(
            "sig_seed",
            vec![
                Value::text(&s.name),
                Value::Tuple(s.params.iter().map(|t| Value::Type(*t)).collect()),
                Value::Type(s.ret),
                Value::Int(s.variadic as i64),
            ],
        )?;
    }
    Ok(())
}

/// Seeds currently in the store, by name.
pub fn seeds_in(store: &Store) -> StoreResult<BTreeMap<String, (Seed, Vec<Value>)>> {
    let mut out = BTreeMap::new();
    for (t, _) in store.relation("sig_seed")?.iter() {
        let (Some(name), Some(params), Some(ret), Some(var)) =
            (t[0].as_text(), t[1].as_tuple(), t[2].as_type(), t[3].as_int())
        else {
            continue;
        };
        let seed = Seed {
            name: name.to_string(),
            params: params.iter().filter_map(Value::as_type).collect(),
            ret,
            variadic: var != 0,
        };
        out.insert(name.to_string(), (seed, t.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pointer_and_variadic() {
        let types = CTypeTable::new();
        let s = parse_seeds(&types, "strlen: (const char *) -> unsigned long\nprintf: (char*, ...) -> int\n").unwrap();
        assert_eq!(s[0].params, vec![types.pointer(CTypeTable::CHAR)]);
        assert_eq!(s[0].ret, CTypeTable::ULONG);
        assert!(s[1].variadic && !s[0].variadic);
        let e = parse_seeds(&types, "f: (widget) -> int").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn bundled_file_parses() {
        let types = CTypeTable::new();
        let s = parse_seeds(&types, DEFAULT_SEEDS).unwrap();
        assert!(s.len() >= 30);
        let alloca = s.iter().find(|s| s.name == "alloca").unwrap();
        assert_eq!(alloca.ret, types.pointer(CTypeTable::VOID));
    }
}
