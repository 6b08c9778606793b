//! Record and array hypotheses from the offsets a base pointer is
//! dereferenced at.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::{premise, Emitter, EngineResult, Pass};
use crate::ir::{CTypeTable, StructLayout, TypeIdx};
use crate::store::{Store, Tuple, Value};

pub const STRUCT_PASS: &str = "recover_structs";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    /// Nothing beyond the plain pointer evidence.
    Plain,
    Array { elem: TypeIdx, stride: i64 },
    Struct(StructLayout),
}

/// Classifies the `(offset, type)` accesses through one base.
pub fn classify_accesses(types: &CTypeTable, accesses: &BTreeSet<(i64, TypeIdx)>) -> Shape {
    let offsets: BTreeSet<i64> = accesses.iter().map(|a| a.0).collect();
    if offsets.iter().any(|o| *o < 0) {
        return Shape::Plain;
    }
    if offsets.len() == 1 && offsets.contains(&0) {
        return Shape::Plain;
    }
    if offsets.len() != accesses.len() {
        // Two types at one offset: no consistent layout.
        return Shape::Plain;
    }
    let tys: BTreeSet<TypeIdx> = accesses.iter().map(|a| a.1).collect();
    let fields: Vec<(i64, TypeIdx)> = accesses.iter().copied().collect();
    if tys.len() == 1 && fields.len() >= 2 {
        let elem = fields[0].1;
        let stride = types.size_of(elem);
        let regular = fields.windows(2).all(|w| w[1].0 - w[0].0 == stride) && fields[0].0 % stride == 0;
        if regular {
            return Shape::Array { elem, stride };
        }
    }
    let aligned = fields.iter().all(|(o, t)| o % types.align_of(*t) == 0);
    let disjoint = fields.windows(2).all(|w| w[0].0 + types.size_of(w[0].1) <= w[1].0);
    if aligned && disjoint {
        Shape::Struct(StructLayout::new(fields))
    } else {
        Shape::Plain
    }
}

fn find(parent: &mut BTreeMap<i64, i64>, x: i64) -> i64 {
    let p = *parent.entry(x).or_insert(x);
    if p == x {
        return x;
    }
    let r = find(parent, p);
    parent.insert(x, r);
    r
}

fn recover(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let types = store.types();
    // Bases joined by copies share one hypothesis.
    let mut parent: BTreeMap<(String, i64), BTreeMap<i64, i64>> = BTreeMap::new();
    for (t, _) in store.relation("copy_edge")?.iter() {
        let (Some(f), Some(d), Some(s)) = (t[0].as_text(), t[1].as_int(), t[2].as_int()) else { continue };
        let uf = parent.entry((f.to_string(), 0)).or_default();
        let (a, b) = (find(uf, d), find(uf, s));
        if a != b {
            uf.insert(a.max(b), a.min(b));
        }
    }
    let mut groups: BTreeMap<(String, i64), (BTreeSet<(i64, TypeIdx)>, BTreeSet<i64>, Vec<Tuple>)> = BTreeMap::new();
    for (t, _) in store.relation("deref")?.iter() {
        let (Some(f), Some(base), Some(ofs), Some(ty)) = (t[0].as_text(), t[1].as_int(), t[2].as_int(), t[3].as_type())
        else {
            continue;
        };
        let uf = parent.entry((f.to_string(), 0)).or_default();
        let root = find(uf, base);
        let g = groups.entry((f.to_string(), root)).or_default();
        g.0.insert((ofs, ty));
        g.1.insert(base);
        g.2.push(t.clone());
    }
    for ((f, _), (accesses, bases, facts)) in groups {
        let premises: Vec<(String, Tuple)> = facts.into_iter().map(|t| premise("deref", t)).collect();
        let fv = Value::text(&f);
        match classify_accesses(types, &accesses) {
            Shape::Plain => {}
            Shape::Array { elem, stride } => {
                for b in &bases {
                    em.derive(
                        "array_hyp",
                        vec![fv.clone(), Value::Int(*b), Value::Type(elem), Value::Int(stride)],
                        "uniform_stride",
                        premises.clone(),
                    );
                    let hyp = premise("array_hyp", vec![fv.clone(), Value::Int(*b), Value::Type(elem), Value::Int(stride)]);
                    em.derive(
                        "type_ev",
                        vec![fv.clone(), Value::Int(*b), Value::Type(types.pointer(elem)), Value::text("array")],
                        "array",
                        vec![hyp],
                    );
                }
            }
            Shape::Struct(layout) => {
                let degenerate = layout.degenerate;
                let s = types.intern_struct(layout);
                for b in &bases {
                    let hyp = vec![fv.clone(), Value::Int(*b), Value::Type(s), Value::Int(degenerate as i64)];
                    em.derive("struct_hyp", hyp.clone(), "layout", premises.clone());
                    em.derive(
                        "type_ev",
                        vec![fv.clone(), Value::Int(*b), Value::Type(types.pointer(s)), Value::text("struct")],
                        "struct",
                        vec![premise("struct_hyp", hyp)],
                    );
                }
            }
        }
    }
    Ok(())
}

/// Struct and array hypotheses per copy-connected base.
pub fn recover_structs() -> Pass {
    Pass::procedural(STRUCT_PASS, &["deref", "copy_edge"], &["struct_hyp", "array_hyp", "type_ev"], recover)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_offsets_make_a_struct() {
        let types = CTypeTable::new();
        let acc = BTreeSet::from([(0, CTypeTable::INT), (4, CTypeTable::FLOAT)]);
        match classify_accesses(&types, &acc) {
            Shape::Struct(l) => assert_eq!(l.fields, vec![(0, CTypeTable::INT), (4, CTypeTable::FLOAT)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn uniform_stride_makes_an_array() {
        let types = CTypeTable::new();
        let acc = BTreeSet::from([(0, CTypeTable::INT), (4, CTypeTable::INT), (8, CTypeTable::INT)]);
        assert_eq!(classify_accesses(&types, &acc), Shape::Array { elem: CTypeTable::INT, stride: 4 });
        let lone = BTreeSet::from([(8, CTypeTable::INT)]);
        assert!(matches!(classify_accesses(&types, &lone), Shape::Struct(l) if l.degenerate));
        let clash = BTreeSet::from([(0, CTypeTable::INT), (0, CTypeTable::LONG)]);
        assert_eq!(classify_accesses(&types, &clash), Shape::Plain);
    }
}
