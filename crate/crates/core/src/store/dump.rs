//! Flat fact files: one tab-separated file per relation.
//!
//! The first line of `<relation>.facts` is the schema:
//!
//! ```text
//! #schema <TAB> name <TAB> level|- <TAB> principal(0|1) <TAB> semiring <TAB> col:tag ...
//! ```
//!
//! and each further line is the tuple's values followed by its annotation.
//! `_meta`, `_types` and `_edb` carry the counters, the type table and the
//! token map.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{RelationSchema, Store, StoreError, StoreResult, Value, ValueTag};
use crate::ir::{CType, CTypeTable, IRLevel, StructLayout};
use crate::provenance::{SemiringTag, SemiringValue, Token};
use crate::term::{Term, Textual};

fn bad(msg: impl Into<String>) -> StoreError {
    StoreError::Dump(msg.into())
}

pub fn render_schema(schema: &RelationSchema, semiring: SemiringTag) -> String {
    let mut line = format!(
        "#schema\t{}\t{}\t{}\t{}",
        schema.name,
        schema.level.map(|l| l.name().to_string()).unwrap_or_else(|| "-".into()),
        schema.principal as u8,
        semiring
    );
    for (c, t) in &schema.columns {
        line.push_str(&format!("\t{c}:{t}"));
    }
    line
}

fn parse_schema(line: &str) -> StoreResult<(RelationSchema, SemiringTag)> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 6 || fields[0] != "#schema" {
        return Err(bad(format!("bad schema line `{line}`")));
    }
    let level = match fields[2] {
        "-" => None,
        l => Some(IRLevel::from_name(l).ok_or_else(|| bad(format!("bad level `{l}`")))?),
    };
    let semiring: SemiringTag = fields[4].parse()?;
    let mut columns = Vec::new();
    for c in &fields[5..] {
        let (name, tag) = c.split_once(':').ok_or_else(|| bad(format!("bad column `{c}`")))?;
        let tag = ValueTag::from_name(tag).ok_or_else(|| bad(format!("bad tag `{tag}`")))?;
        columns.push((name.to_string(), tag));
    }
    Ok((
        RelationSchema {
            name: fields[1].to_string(),
            columns,
            level,
            principal: fields[3] == "1",
        },
        semiring,
    ))
}

/// Text of one relation's fact file.
pub fn render_relation(store: &Store, name: &str) -> StoreResult<String> {
    let rel = store.relation(name)?;
    let mut out = render_schema(&rel.schema, store.semiring());
    out.push('\n');
    for (t, k) in rel.iter() {
        for v in t {
            out.push_str(&v.render());
            out.push('\t');
        }
        out.push_str(&k.to_string());
        out.push('\n');
    }
    Ok(out)
}

pub fn render_types(types: &CTypeTable) -> String {
    let mut out = String::new();
    for (i, t) in types.types().iter().enumerate() {
        out.push_str(&format!("type\t${i}\t{}\n", t.render()));
    }
    for (i, l) in types.layouts().iter().enumerate() {
        out.push_str(&format!("layout\t{i}\t{}\n", l.render()));
    }
    out
}

/// Every file of a dump as `(file name, contents)`, optionally restricted to
/// one IR level.
pub fn render_files(store: &Store, level: Option<IRLevel>) -> StoreResult<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    files.insert(
        "_meta".to_string(),
        format!(
            "semiring\t{}\nnext_token\t{}\nnext_synthetic\t{}\n",
            store.semiring(),
            store.tokens_issued(),
            store.peek_synthetic()
        ),
    );
    files.insert("_types".to_string(), render_types(store.types()));
    let mut edb = String::new();
    for (tok, rel, t) in store.edb_tokens() {
        if level.is_none() || store.schema(rel).map(|s| s.level == level).unwrap_or(false) {
            edb.push_str(&format!("{tok}\t{rel}\t{}\n", Value::Tuple(t.clone()).render()));
        }
    }
    files.insert("_edb".to_string(), edb);
    for rel in store.relations() {
        if level.is_some() && rel.schema.level != level {
            continue;
        }
        files.insert(format!("{}.facts", rel.schema.name), render_relation(store, &rel.schema.name)?);
    }
    Ok(files)
}

pub fn dump(store: &Store, dir: &Path, level: Option<IRLevel>) -> StoreResult<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in render_files(store, level)? {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn parse_value(text: &str) -> StoreResult<Value> {
    Value::parse_text(text).map_err(|e| bad(e.to_string()))
}

pub fn load_files(files: &BTreeMap<String, String>) -> StoreResult<Store> {
    let meta = files.get("_meta").ok_or_else(|| bad("missing _meta"))?;
    let mut semiring = SemiringTag::Prov;
    let mut next_token = 0;
    let mut next_synthetic = super::SYNTHETIC_BASE;
    for line in meta.lines() {
        match line.split_once('\t') {
            Some(("semiring", v)) => semiring = v.parse()?,
            Some(("next_token", v)) => next_token = v.parse().map_err(|_| bad("bad next_token"))?,
            Some(("next_synthetic", v)) => {
                next_synthetic = v.parse().map_err(|_| bad("bad next_synthetic"))?
            }
            _ => return Err(bad(format!("bad meta line `{line}`"))),
        }
    }
    let mut types = Vec::new();
    let mut layouts = Vec::new();
    for line in files.get("_types").map(String::as_str).unwrap_or("").lines() {
        let f: Vec<&str> = line.splitn(3, '\t').collect();
        match f.as_slice() {
            ["type", _, t] => types.push(CType::parse_text(t).map_err(|e| bad(e.to_string()))?),
            ["layout", _, l] => {
                layouts.push(StructLayout::parse_text(l).map_err(|e| bad(e.to_string()))?)
            }
            _ => return Err(bad(format!("bad type line `{line}`"))),
        }
    }
    let table = if types.is_empty() { CTypeTable::new() } else { CTypeTable::from_parts(types, layouts) };
    let mut store = Store::from_parts(semiring, table, next_token, next_synthetic);

    for (name, text) in files {
        if !name.ends_with(".facts") {
            continue;
        }
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(format!("{name}: empty file")))?;
        let (schema, tag) = parse_schema(header)?;
        if tag != semiring {
            return Err(bad(format!("{name}: semiring {tag} differs from store {semiring}")));
        }
        let rel = schema.name.clone();
        let arity = schema.arity();
        store.declare(schema)?;
        for line in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != arity + 1 {
                return Err(bad(format!("{name}: bad row `{line}`")));
            }
            let tuple = fields[..arity].iter().map(|f| parse_value(f)).collect::<StoreResult<Vec<_>>>()?;
            let k = SemiringValue::parse(semiring, fields[arity])?;
            store.load_tuple(&rel, tuple, k)?;
        }
    }
    for line in files.get("_edb").map(String::as_str).unwrap_or("").lines() {
        let f: Vec<&str> = line.splitn(3, '\t').collect();
        let [tok, rel, tuple] = f.as_slice() else {
            return Err(bad(format!("bad edb line `{line}`")));
        };
        let id = tok
            .strip_prefix('x')
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(format!("bad token `{tok}`")))?;
        let tuple = match Term::parse(tuple).map_err(|e| bad(e.to_string()))? {
            t @ Term::List(_) => match Value::from_term(&t).map_err(|e| bad(e.to_string()))? {
                Value::Tuple(items) => items,
                _ => unreachable!("list terms parse to tuples"),
            },
            _ => return Err(bad(format!("bad edb tuple `{tuple}`"))),
        };
        store.restore_edb(Token(id), rel, tuple);
    }
    Ok(store)
}

pub fn load(dir: &Path) -> StoreResult<Store> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().to_string();
        if name.starts_with('_') || name.ends_with(".facts") {
            files.insert(name, fs::read_to_string(entry.path())?);
        }
    }
    load_files(&files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{MachInst, Stmt};

    #[test]
    fn dump_load_round_trip() {
        let mut s = Store::new(SemiringTag::Prov);
        s.declare_all(crate::ir::level_schemas()).unwrap();
        s.insert_edb("func", vec![Value::text("f"), Value::node(0x401000)]).unwrap();
        let t = s.insert_edb("next_instr", vec![Value::node(0x401000), Value::node(0x401001)]).unwrap();
        let k = SemiringValue::base(SemiringTag::Prov, t);
        s.insert("mach_inst", vec![Value::node(0x401000), Value::stmt(Stmt::Mach(MachInst::Mreturn))], k)
            .unwrap();
        s.types().pointer(CTypeTable::INT);
        let files = render_files(&s, None).unwrap();
        let back = load_files(&files).unwrap();
        assert_eq!(render_files(&back, None).unwrap(), files);
        assert!(s.leq(&back).unwrap() && back.leq(&s).unwrap());
    }
}
