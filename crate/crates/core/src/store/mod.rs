//! The annotated relation store.

pub mod dump;
mod value;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::ir::{CTypeTable, IRLevel, Stmt};
use crate::provenance::{ProvenanceError, SemiringTag, SemiringValue, Token};

pub use value::{Value, ValueTag};

/// First synthetic node id.
pub const SYNTHETIC_BASE: u64 = 1 << 63;

/// Program point: a concrete address below 2^63 or a synthetic node above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

impl NodeId {
    pub fn is_synthetic(self) -> bool {
        self.0 >= SYNTHETIC_BASE
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{:x}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{0}` redeclared with a different schema")]
    Redeclared(String),
    #[error("tuple does not match schema of `{rel}`: {detail}")]
    SchemaMismatch { rel: String, detail: String },
    #[error("zero annotation inserted into `{0}`")]
    ZeroAnnotation(String),
    #[error("relation `{0}` is already checked out")]
    CheckedOut(String),
    #[error("relation bundle does not belong to this store")]
    ForeignBundle,
    #[error("level {0} has no principal relation")]
    NoPrincipal(IRLevel),
    #[error("stores have different schemas for `{0}`")]
    IncomparableStores(String),
    #[error(transparent)]
    Semiring(#[from] ProvenanceError),
    #[error("fact dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type StoreResult<T> = Result<T, StoreError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSchema {
    pub name: String,
    pub columns: Vec<(String, ValueTag)>,
    pub level: Option<IRLevel>,
    pub principal: bool,
}

impl RelationSchema {
    pub fn new(name: &str, columns: &[(&str, ValueTag)]) -> RelationSchema {
        RelationSchema {
            name: name.to_string(),
            columns: columns.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
            level: None,
            principal: false,
        }
    }

    pub fn at_level(mut self, level: IRLevel) -> RelationSchema {
        self.level = Some(level);
        self
    }

    pub fn principal(mut self, level: IRLevel) -> RelationSchema {
        self.level = Some(level);
        self.principal = true;
        self
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    fn check(&self, tuple: &[Value]) -> StoreResult<()> {
        if tuple.len() != self.columns.len() {
            return Err(StoreError::SchemaMismatch {
                rel: self.name.clone(),
                detail: format!("arity {} expected, got {}", self.columns.len(), tuple.len()),
            });
        }
        for ((col, tag), v) in self.columns.iter().zip(tuple) {
            if v.tag() != *tag {
                return Err(StoreError::SchemaMismatch {
                    rel: self.name.clone(),
                    detail: format!("column `{col}` expects {tag}, got {}", v.tag()),
                });
            }
        }
        Ok(())
    }
}

pub type Tuple = Vec<Value>;

#[derive(Debug, Clone)]
pub struct Relation {
    pub schema: RelationSchema,
    tuples: BTreeMap<Tuple, SemiringValue>,
    version: u64,
}

impl Relation {
    fn new(schema: RelationSchema) -> Relation {
        Relation { schema, tuples: BTreeMap::new(), version: 0 }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tuple, &SemiringValue)> {
        self.tuples.iter()
    }

    /// Tuples whose first column equals `first`.
    pub fn with_first<'a>(
        &'a self,
        first: &'a Value,
    ) -> impl Iterator<Item = (&'a Tuple, &'a SemiringValue)> + 'a {
        self.tuples
            .range(vec![first.clone()]..)
            .take_while(move |(t, _)| &t[0] == first)
    }

    pub fn get(&self, t: &[Value]) -> Option<&SemiringValue> {
        self.tuples.get(t)
    }

    fn add(&mut self, t: Tuple, k: SemiringValue) -> StoreResult<bool> {
        let changed = match self.tuples.get_mut(&t) {
            Some(old) => {
                let new = old.plus(&k)?;
                let changed = new != *old;
                *old = new;
                changed
            }
            None => {
                self.tuples.insert(t, k);
                true
            }
        };
        if changed {
            self.version += 1;
        }
        Ok(changed)
    }
}

/// Relations detached from a store by [`Store::swap_out`].
#[derive(Debug)]
pub struct RelationBundle {
    store_id: u64,
    relations: BTreeMap<String, Relation>,
}

impl RelationBundle {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn insert(&mut self, rel: &str, t: Tuple, k: SemiringValue) -> StoreResult<bool> {
        let r = self
            .relations
            .get_mut(rel)
            .ok_or_else(|| StoreError::UnknownRelation(rel.to_string()))?;
        r.schema.check(&t)?;
        if k.is_zero() {
            return Err(StoreError::ZeroAnnotation(rel.to_string()));
        }
        r.add(t, k)
    }
}

/// First recorded derivation of a fact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Firing {
    pub rule: String,
    pub premises: Vec<(String, Tuple)>,
    pub bindings: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassStats {
    pub name: String,
    pub iterations: usize,
    pub new_tuples: usize,
    pub skipped: bool,
    pub micros: u128,
}

/// Per-relation counts plus the Clight candidate-per-node histogram.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreStats {
    pub counts: BTreeMap<String, usize>,
    pub histogram: BTreeMap<usize, usize>,
}

impl StoreStats {
    pub fn nodes(&self) -> usize {
        self.histogram.values().sum()
    }

    pub fn single_fraction(&self) -> f64 {
        let total = self.nodes();
        if total == 0 {
            return 0.0;
        }
        *self.histogram.get(&1).unwrap_or(&0) as f64 / total as f64
    }

    pub fn multi_nodes(&self) -> usize {
        self.histogram.iter().filter(|(k, _)| **k >= 2).map(|(_, v)| v).sum()
    }
}

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
pub struct Store {
    id: u64,
    semiring: SemiringTag,
    relations: BTreeMap<String, Relation>,
    checked_out: BTreeSet<String>,
    next_token: u64,
    next_synthetic: u64,
    edb: BTreeMap<Token, (String, Tuple)>,
    edb_by_fact: BTreeMap<(String, Tuple), Token>,
    firing_log: Option<BTreeMap<(String, Tuple), Firing>>,
    types: Arc<CTypeTable>,
    pub(crate) pass_stats: Vec<PassStats>,
    pub(crate) memo: BTreeMap<String, Vec<u64>>,
}

impl Clone for Store {
    fn clone(&self) -> Self {
        Store {
            id: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            semiring: self.semiring,
            relations: self.relations.clone(),
            checked_out: self.checked_out.clone(),
            next_token: self.next_token,
            next_synthetic: self.next_synthetic,
            edb: self.edb.clone(),
            edb_by_fact: self.edb_by_fact.clone(),
            firing_log: self.firing_log.clone(),
            types: Arc::new((*self.types).clone()),
            pass_stats: self.pass_stats.clone(),
            memo: self.memo.clone(),
        }
    }
}

impl Store {
    pub fn new(semiring: SemiringTag) -> Store {
        Store {
            id: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            semiring,
            relations: BTreeMap::new(),
            checked_out: BTreeSet::new(),
            next_token: 0,
            next_synthetic: SYNTHETIC_BASE,
            edb: BTreeMap::new(),
            edb_by_fact: BTreeMap::new(),
            firing_log: None,
            types: Arc::new(CTypeTable::new()),
            pass_stats: Vec::new(),
            memo: BTreeMap::new(),
        }
    }

    pub fn semiring(&self) -> SemiringTag {
        self.semiring
    }

    pub fn types(&self) -> &CTypeTable {
        &self.types
    }

    pub fn zero(&self) -> SemiringValue {
        SemiringValue::zero(self.semiring)
    }

    pub fn one(&self) -> SemiringValue {
        SemiringValue::one(self.semiring)
    }

    pub fn declare(&mut self, schema: RelationSchema) -> StoreResult<()> {
        if schema.columns.is_empty() {
            return Err(StoreError::SchemaMismatch {
                rel: schema.name.clone(),
                detail: "a relation needs at least one column".into(),
            });
        }
        if let Some(existing) = self.relations.get(&schema.name) {
            if existing.schema != schema {
                return Err(StoreError::Redeclared(schema.name));
            }
            return Ok(());
        }
        if schema.principal {
            let clash = self
                .relations
                .values()
                .any(|r| r.schema.principal && r.schema.level == schema.level);
            if clash {
                return Err(StoreError::Redeclared(schema.name));
            }
        }
        self.relations.insert(schema.name.clone(), Relation::new(schema));
        Ok(())
    }

    pub fn declare_all(&mut self, schemas: impl IntoIterator<Item = RelationSchema>) -> StoreResult<()> {
        schemas.into_iter().try_for_each(|s| self.declare(s))
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.relations.contains_key(name)
    }

    pub fn schema(&self, name: &str) -> StoreResult<&RelationSchema> {
        Ok(&self.relation(name)?.schema)
    }

    pub fn relation(&self, name: &str) -> StoreResult<&Relation> {
        self.relations
            .get(name)
            .ok_or_else(|| StoreError::UnknownRelation(name.to_string()))
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn version(&self, name: &str) -> u64 {
        self.relations.get(name).map(|r| r.version).unwrap_or(0)
    }

    /// `D(rel)(t) := D(rel)(t) ⊕ k`; returns whether the annotation changed.
    pub fn insert(&mut self, rel: &str, t: Tuple, k: SemiringValue) -> StoreResult<bool> {
        if k.tag() != self.semiring {
            return Err(ProvenanceError::Mixed(self.semiring, k.tag()).into());
        }
        let r = self
            .relations
            .get_mut(rel)
            .ok_or_else(|| StoreError::UnknownRelation(rel.to_string()))?;
        r.schema.check(&t)?;
        if k.is_zero() {
            return Err(StoreError::ZeroAnnotation(rel.to_string()));
        }
        r.add(t, k)
    }

    /// Insert an extensional fact annotated with a fresh token.
    pub fn insert_edb(&mut self, rel: &str, t: Tuple) -> StoreResult<Token> {
        self.schema(rel)?.check(&t)?;
        let token = Token(self.next_token);
        self.next_token += 1;
        let k = SemiringValue::base(self.semiring, token);
        self.insert(rel, t.clone(), k)?;
        self.edb.insert(token, (rel.to_string(), t.clone()));
        self.edb_by_fact.entry((rel.to_string(), t)).or_insert(token);
        Ok(token)
    }

    pub fn tokens_issued(&self) -> u64 {
        self.next_token
    }

    pub fn token_fact(&self, token: Token) -> Option<(&str, &Tuple)> {
        self.edb.get(&token).map(|(r, t)| (r.as_str(), t))
    }

    pub fn fact_token(&self, rel: &str, t: &[Value]) -> Option<Token> {
        self.edb_by_fact.get(&(rel.to_string(), t.to_vec())).copied()
    }

    pub fn edb_tokens(&self) -> impl Iterator<Item = (Token, &str, &Tuple)> {
        self.edb.iter().map(|(k, (r, t))| (*k, r.as_str(), t))
    }

    pub fn annotation_of(&self, rel: &str, t: &[Value]) -> StoreResult<SemiringValue> {
        Ok(self.relation(rel)?.get(t).cloned().unwrap_or_else(|| self.zero()))
    }

    pub fn contains(&self, rel: &str, t: &[Value]) -> bool {
        self.relations.get(rel).and_then(|r| r.get(t)).is_some()
    }

    pub fn len(&self, rel: &str) -> usize {
        self.relations.get(rel).map(|r| r.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.relations.values().all(|r| r.is_empty())
    }

    pub fn principal(&self, level: IRLevel) -> StoreResult<&Relation> {
        self.relations
            .values()
            .find(|r| r.schema.principal && r.schema.level == Some(level))
            .ok_or(StoreError::NoPrincipal(level))
    }

    /// `Cand_ℓ(n)`: statements at node `n` with their annotations, in
    /// structural order.
    pub fn candidates(&self, level: IRLevel, n: NodeId) -> StoreResult<Vec<(Stmt, SemiringValue)>> {
        let rel = self.principal(level)?;
        let key = Value::Node(n);
        Ok(rel
            .with_first(&key)
            .filter_map(|(t, k)| t.get(1).and_then(Value::as_stmt).map(|s| (s.clone(), k.clone())))
            .collect())
    }

    pub fn fresh_synthetic(&mut self) -> NodeId {
        let n = NodeId(self.next_synthetic);
        self.next_synthetic += 1;
        n
    }

    pub fn peek_synthetic(&self) -> u64 {
        self.next_synthetic
    }

    pub(crate) fn set_next_synthetic(&mut self, next: u64) {
        self.next_synthetic = self.next_synthetic.max(next);
    }

    pub fn swap_out(&mut self, names: &[&str]) -> StoreResult<RelationBundle> {
        for n in names {
            if self.checked_out.contains(*n) {
                return Err(StoreError::CheckedOut(n.to_string()));
            }
            self.relation(n)?;
        }
        let mut relations = BTreeMap::new();
        for n in names {
            let r = self.relations.get_mut(*n).expect("checked above");
            let taken = Relation {
                schema: r.schema.clone(),
                tuples: std::mem::take(&mut r.tuples),
                version: r.version,
            };
            relations.insert(n.to_string(), taken);
            self.checked_out.insert(n.to_string());
        }
        Ok(RelationBundle { store_id: self.id, relations })
    }

    pub fn swap_in(&mut self, bundle: RelationBundle) -> StoreResult<()> {
        if bundle.store_id != self.id {
            return Err(StoreError::ForeignBundle);
        }
        for (name, mut back) in bundle.relations {
            let r = self.relations.get_mut(&name).expect("bundle names are declared");
            let concurrent = std::mem::take(&mut r.tuples);
            for (t, k) in concurrent {
                back.add(t, k)?;
            }
            r.tuples = back.tuples;
            r.version = r.version.max(back.version) + 1;
            self.checked_out.remove(&name);
        }
        Ok(())
    }

    /// Pointwise natural order on annotations.
    pub fn leq(&self, other: &Store) -> StoreResult<bool> {
        for (name, r) in &self.relations {
            let o = other
                .relations
                .get(name)
                .ok_or_else(|| StoreError::IncomparableStores(name.clone()))?;
            if o.schema != r.schema {
                return Err(StoreError::IncomparableStores(name.clone()));
            }
            for (t, k) in &r.tuples {
                let ok = match o.tuples.get(t) {
                    Some(k2) => k.leq(k2)?,
                    None => k.is_zero(),
                };
                if !ok {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn stats(&self) -> StoreStats {
        let counts = self.relations.iter().map(|(n, r)| (n.clone(), r.len())).collect();
        let mut per_node: BTreeMap<NodeId, usize> = BTreeMap::new();
        if let Ok(rel) = self.principal(IRLevel::Clight) {
            for (t, _) in rel.iter() {
                if let Some(n) = t[0].as_node() {
                    *per_node.entry(n).or_default() += 1;
                }
            }
        }
        let mut histogram = BTreeMap::new();
        for c in per_node.values() {
            *histogram.entry(*c).or_default() += 1;
        }
        StoreStats { counts, histogram }
    }

    pub fn pass_stats(&self) -> &[PassStats] {
        &self.pass_stats
    }

    pub fn enable_firing_log(&mut self) {
        if self.firing_log.is_none() {
            self.firing_log = Some(BTreeMap::new());
        }
    }

    pub fn firing_log_enabled(&self) -> bool {
        self.firing_log.is_some()
    }

    pub fn firing(&self, rel: &str, t: &[Value]) -> Option<&Firing> {
        self.firing_log.as_ref()?.get(&(rel.to_string(), t.to_vec()))
    }

    /// Record the first firing for a tuple; later firings are ignored.
    pub(crate) fn log_firing(&mut self, rel: &str, t: &[Value], firing: Firing) {
        if let Some(log) = &mut self.firing_log {
            log.entry((rel.to_string(), t.to_vec())).or_insert(firing);
        }
    }

    /// Same schemas, types and counters, no facts, in semiring `tag`.
    pub fn empty_like(&self, tag: SemiringTag) -> Store {
        let mut s = Store::from_parts(tag, (*self.types).clone(), self.next_token, self.next_synthetic);
        for (name, r) in &self.relations {
            s.relations.insert(name.clone(), Relation::new(r.schema.clone()));
        }
        s.edb = self.edb.clone();
        s.edb_by_fact = self.edb_by_fact.clone();
        s
    }

    pub(crate) fn from_parts(
        semiring: SemiringTag,
        types: CTypeTable,
        next_token: u64,
        next_synthetic: u64,
    ) -> Store {
        let mut s = Store::new(semiring);
        s.types = Arc::new(types);
        s.next_token = next_token;
        s.next_synthetic = next_synthetic;
        s
    }

    pub(crate) fn restore_edb(&mut self, token: Token, rel: &str, t: Tuple) {
        self.edb_by_fact.entry((rel.to_string(), t.clone())).or_insert(token);
        self.edb.insert(token, (rel.to_string(), t));
    }

    /// Raw insertion used by the fact loader; bypasses version bookkeeping
    /// differences so a reloaded store dumps identically.
    pub(crate) fn load_tuple(&mut self, rel: &str, t: Tuple, k: SemiringValue) -> StoreResult<()> {
        self.insert(rel, t, k).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provenance::Polynomial;

    fn schema() -> RelationSchema {
        RelationSchema::new("r", &[("a", ValueTag::Int), ("b", ValueTag::Text)])
    }

    fn tok(i: u64) -> SemiringValue {
        SemiringValue::Poly(Polynomial::from_token(Token(i)))
    }

    #[test]
    fn declare_is_idempotent_but_checks_shape() {
        let mut s = Store::new(SemiringTag::Prov);
        s.declare(schema()).unwrap();
        s.declare(schema()).unwrap();
        let other = RelationSchema::new("r", &[("a", ValueTag::Int)]);
        assert!(matches!(s.declare(other), Err(StoreError::Redeclared(_))));
    }

    #[test]
    fn insert_aggregates_with_plus() {
        let mut s = Store::new(SemiringTag::Prov);
        s.declare(schema()).unwrap();
        let t = vec![Value::Int(1), Value::text("a")];
        assert!(s.annotation_of("r", &t).unwrap().is_zero());
        s.insert("r", t.clone(), tok(1)).unwrap();
        assert_eq!(s.annotation_of("r", &t).unwrap(), tok(1));
        s.insert("r", t.clone(), tok(2)).unwrap();
        assert_eq!(s.annotation_of("r", &t).unwrap().to_string(), "x1 + x2");
        assert!(matches!(
            s.insert("r", t, SemiringValue::zero(SemiringTag::Prov)),
            Err(StoreError::ZeroAnnotation(_))
        ));
        assert!(s.insert("r", vec![Value::Int(1)], tok(3)).is_err());
        assert!(s.insert("r", vec![Value::text("x"), Value::text("a")], tok(3)).is_err());
    }

    #[test]
    fn leq_follows_inserts() {
        let mut a = Store::new(SemiringTag::Prov);
        a.declare(schema()).unwrap();
        a.insert("r", vec![Value::Int(1), Value::text("a")], tok(1)).unwrap();
        let mut b = a.clone();
        assert!(a.leq(&a).unwrap());
        b.insert("r", vec![Value::Int(1), Value::text("a")], tok(2)).unwrap();
        assert!(a.leq(&b).unwrap());
        assert!(!b.leq(&a).unwrap());
    }

    #[test]
    fn swap_round_trip_and_double_checkout() {
        let mut s = Store::new(SemiringTag::Prov);
        s.declare(schema()).unwrap();
        s.insert("r", vec![Value::Int(1), Value::text("a")], tok(1)).unwrap();
        let before = s.clone();
        let b = s.swap_out(&["r"]).unwrap();
        assert!(matches!(s.swap_out(&["r"]), Err(StoreError::CheckedOut(_))));
        s.swap_in(b).unwrap();
        assert!(before.leq(&s).unwrap() && s.leq(&before).unwrap());

        let mut b = s.swap_out(&["r"]).unwrap();
        let handle = std::thread::spawn(move || {
            b.insert("r", vec![Value::Int(2), Value::text("b")], tok(5)).unwrap();
            b
        });
        let b = handle.join().unwrap();
        s.swap_in(b).unwrap();
        assert!(s.contains("r", &[Value::Int(2), Value::text("b")]));

        let mut other = Store::new(SemiringTag::Prov);
        other.declare(schema()).unwrap();
        let foreign = other.swap_out(&["r"]).unwrap();
        assert!(matches!(s.swap_in(foreign), Err(StoreError::ForeignBundle)));
    }

    #[test]
    fn empty_store_has_empty_histogram() {
        let mut s = Store::new(SemiringTag::Bool);
        s.declare_all(crate::ir::level_schemas()).unwrap();
        assert!(s.stats().histogram.is_empty());
    }

    #[test]
    fn synthetic_nodes_are_monotone() {
        let mut s = Store::new(SemiringTag::Bool);
        let a = s.fresh_synthetic();
        let b = s.fresh_synthetic();
        assert!(a.is_synthetic() && b.is_synthetic() && a < b);
        assert!(!NodeId(0x401000).is_synthetic());
    }
}
