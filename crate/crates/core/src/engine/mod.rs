//! Pass evaluation: declarative rules run semi-naively to a fixpoint,
//! procedural passes emit derivations that the engine annotates.

mod rule;
pub mod witness;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::provenance::{eval_hom, ProvenanceError, SemiringTag, SemiringValue, Token};
use crate::store::{Firing, NodeId, PassStats, Store, StoreError, Tuple, Value};
use crate::term::Textual;

pub use rule::{c, v, Arg, Atom, ComputeFn, GuardFn, Literal, Rule, RuleBuilder, A};
pub use witness::{validate_witness, witness, DerivationTree};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Semiring(#[from] ProvenanceError),
    #[error("rule `{rule}` is malformed: {message}")]
    InvalidRule { rule: String, message: String },
    #[error("pass `{pass}` is malformed: {message}")]
    InvalidPass { pass: String, message: String },
    #[error("rule `{rule}` failed under {bindings}: {message}")]
    Rule { rule: String, bindings: String, message: String },
    #[error("pass `{pass}` derived into `{relation}`, which is not one of its outputs")]
    NotOutput { pass: String, relation: String },
    #[error("rule `{rule}` cites premise {relation}{tuple} which is not in the store")]
    MissingPremise { rule: String, relation: String, tuple: String },
    #[error("pass `{pass}` did not converge within {limit} iterations")]
    IterationLimit { pass: String, limit: usize },
    #[error("pass `{pass}` failed: {message}")]
    Procedural { pass: String, message: String },
    #[error("witness: {0}")]
    Witness(String),
}

pub type EngineResult<T> = Result<T, EngineError>;

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub iteration_limit: usize,
    /// Iterations run after the support stops growing, refining annotations
    /// of recursive relations whose polynomials would otherwise grow forever.
    pub extra_iterations: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { iteration_limit: 1_000_000, extra_iterations: 3 }
    }
}

pub type ProceduralFn = Arc<dyn Fn(&Store, &mut Emitter) -> EngineResult<()> + Send + Sync>;

/// A pass `(I, O, P)`. The procedural part, if any, runs before the rules.
#[derive(Clone)]
pub struct Pass {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub rules: Vec<Rule>,
    pub procedural: Option<ProceduralFn>,
}

impl std::fmt::Debug for Pass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pass")
            .field("name", &self.name)
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .field("rules", &self.rules.len())
            .field("procedural", &self.procedural.is_some())
            .finish()
    }
}

fn names(xs: &[&str]) -> Vec<String> {
    let set: BTreeSet<String> = xs.iter().map(|s| s.to_string()).collect();
    set.into_iter().collect()
}

impl Pass {
    pub fn declarative(name: &str, inputs: &[&str], outputs: &[&str], rules: Vec<Rule>) -> EngineResult<Pass> {
        let p = Pass {
            name: name.to_string(),
            inputs: names(inputs),
            outputs: names(outputs),
            rules,
            procedural: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn procedural<F>(name: &str, inputs: &[&str], outputs: &[&str], f: F) -> Pass
    where
        F: Fn(&Store, &mut Emitter) -> EngineResult<()> + Send + Sync + 'static,
    {
        Pass {
            name: name.to_string(),
            inputs: names(inputs),
            outputs: names(outputs),
            rules: Vec::new(),
            procedural: Some(Arc::new(f)),
        }
    }

    /// Adds rules that run after the procedural part.
    pub fn with_rules(mut self, rules: Vec<Rule>) -> EngineResult<Pass> {
        self.rules.extend(rules);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> EngineResult<()> {
        for r in &self.rules {
            if !self.outputs.contains(&r.head.relation) {
                return Err(EngineError::InvalidPass {
                    pass: self.name.clone(),
                    message: format!("rule `{}` derives `{}` outside the outputs", r.id, r.head.relation),
                });
            }
            for a in r.atoms() {
                if !self.inputs.contains(&a.relation) {
                    return Err(EngineError::InvalidPass {
                        pass: self.name.clone(),
                        message: format!("rule `{}` reads `{}` outside the inputs", r.id, a.relation),
                    });
                }
            }
        }
        Ok(())
    }

    fn touched(&self) -> impl Iterator<Item = &String> {
        self.inputs.iter().chain(self.outputs.iter())
    }
}

/// One derivation emitted by a procedural pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub relation: String,
    pub tuple: Tuple,
    pub rule: String,
    pub premises: Vec<(String, Tuple)>,
}

/// Collects the derivations of a procedural pass.
#[derive(Debug)]
pub struct Emitter {
    pass: String,
    next_synthetic: u64,
    derivations: Vec<Derivation>,
}

pub fn premise(rel: &str, tuple: Tuple) -> (String, Tuple) {
    (rel.to_string(), tuple)
}

impl Emitter {
    fn new(pass: &str, next_synthetic: u64) -> Emitter {
        Emitter { pass: pass.to_string(), next_synthetic, derivations: Vec::new() }
    }

    /// Derive `rel(tuple)` from `premises`. The premises must be in the
    /// store or derived earlier by this emitter.
    pub fn derive(&mut self, rel: &str, tuple: Tuple, rule: &str, mut premises: Vec<(String, Tuple)>) {
        premises.sort();
        premises.dedup();
        self.derivations.push(Derivation {
            relation: rel.to_string(),
            tuple,
            rule: format!("{}.{}", self.pass, rule),
            premises,
        });
    }

    pub fn fresh_node(&mut self) -> NodeId {
        let n = NodeId(self.next_synthetic);
        self.next_synthetic += 1;
        n
    }

    pub fn len(&self) -> usize {
        self.derivations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.derivations.is_empty()
    }

    pub fn derivations(&self) -> &[Derivation] {
        &self.derivations
    }
}

/// `T_P(D)` restricted to one application: facts with their contributed
/// annotation.
pub type Delta = BTreeMap<(String, Tuple), SemiringValue>;

type Contrib = BTreeMap<(String, Tuple), (SemiringValue, Firing)>;
type DeltaMap = BTreeMap<String, BTreeMap<Tuple, SemiringValue>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Full,
    Old,
    Delta,
}

struct RuleEval<'a> {
    store: &'a Store,
    rule: &'a Rule,
    modes: &'a [Mode],
    delta: &'a DeltaMap,
    out: Contrib,
}

fn render_bindings(rule: &Rule, subst: &[Option<Value>]) -> String {
    let parts: Vec<String> = rule
        .vars
        .iter()
        .zip(subst)
        .filter_map(|(n, v)| v.as_ref().map(|v| format!("{n}={}", v.render())))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

fn matches(args: &[Arg], t: &[Value], subst: &mut [Option<Value>], bound_here: &mut Vec<usize>) -> bool {
    for (a, val) in args.iter().zip(t) {
        match a {
            Arg::Const(c) => {
                if c != val {
                    return false;
                }
            }
            Arg::Var(i) => match &subst[*i] {
                Some(b) => {
                    if b != val {
                        return false;
                    }
                }
                None => {
                    subst[*i] = Some(val.clone());
                    bound_here.push(*i);
                }
            },
        }
    }
    true
}

impl<'a> RuleEval<'a> {
    fn first_key(&self, a: &Atom, subst: &[Option<Value>]) -> Option<Value> {
        match a.args.first()? {
            Arg::Const(c) => Some(c.clone()),
            Arg::Var(i) => subst[*i].clone(),
        }
    }

    /// Candidate tuples for body atom `ai` in its mode, with the annotation
    /// that mode assigns them.
    fn candidates(&self, ai: usize, a: &Atom, subst: &[Option<Value>]) -> EngineResult<Vec<(Tuple, SemiringValue)>> {
        let key = self.first_key(a, subst);
        let mode = self.modes[ai];
        let empty = BTreeMap::new();
        let delta = self.delta.get(&a.relation).unwrap_or(&empty);
        let mut out = Vec::new();
        match mode {
            Mode::Delta => {
                let it: Box<dyn Iterator<Item = (&Tuple, &SemiringValue)>> = match &key {
                    Some(k) => {
                        let k = k.clone();
                        Box::new(delta.range(vec![k.clone()]..).take_while(move |(t, _)| t[0] == k))
                    }
                    None => Box::new(delta.iter()),
                };
                for (t, s) in it {
                    out.push((t.clone(), s.clone()));
                }
            }
            Mode::Full | Mode::Old => {
                let rel = self.store.relation(&a.relation)?;
                let it: Box<dyn Iterator<Item = (&Tuple, &SemiringValue)>> = match &key {
                    Some(k) => Box::new(rel.with_first(k)),
                    None => Box::new(rel.iter()),
                };
                for (t, s) in it {
                    if mode == Mode::Old {
                        if let Some(d) = delta.get(t) {
                            let old = d.increment_to(s)?;
                            if !old.is_zero() {
                                out.push((t.clone(), old));
                            }
                            continue;
                        }
                    }
                    out.push((t.clone(), s.clone()));
                }
            }
        }
        Ok(out)
    }

    fn step(
        &mut self,
        li: usize,
        ai: usize,
        subst: &mut Vec<Option<Value>>,
        acc: SemiringValue,
        premises: &mut Vec<(String, Tuple)>,
    ) -> EngineResult<()> {
        if li == self.rule.body.len() {
            return self.fire(subst, acc, premises);
        }
        match &self.rule.body[li] {
            Literal::Atom(a) => {
                for (t, k) in self.candidates(ai, a, subst)? {
                    if t.len() != a.args.len() {
                        continue;
                    }
                    let mut bound = Vec::new();
                    if matches(&a.args, &t, subst, &mut bound) {
                        let next = acc.times(&k)?;
                        if !next.is_zero() {
                            premises.push((a.relation.clone(), t.clone()));
                            self.step(li + 1, ai + 1, subst, next, premises)?;
                            premises.pop();
                        }
                    }
                    for i in bound {
                        subst[i] = None;
                    }
                }
                Ok(())
            }
            Literal::Compute { label, inputs, outputs, f } => {
                let args: Vec<Value> = inputs.iter().map(|i| subst[*i].clone().expect("bound by builder")).collect();
                let results = f(&args).map_err(|m| self.fail(subst, format!("{label}: {m}")))?;
                for r in results {
                    if r.len() != outputs.len() {
                        return Err(self.fail(
                            subst,
                            format!("{label}: returned {} values for {} outputs", r.len(), outputs.len()),
                        ));
                    }
                    let mut bound = Vec::new();
                    let mut ok = true;
                    for (o, val) in outputs.iter().zip(r) {
                        match &subst[*o] {
                            Some(b) if *b != val => ok = false,
                            Some(_) => {}
                            None => {
                                subst[*o] = Some(val);
                                bound.push(*o);
                            }
                        }
                    }
                    if ok {
                        self.step(li + 1, ai, subst, acc.clone(), premises)?;
                    }
                    for i in bound {
                        subst[i] = None;
                    }
                }
                Ok(())
            }
            Literal::Guard { label, inputs, f } => {
                let args: Vec<Value> = inputs.iter().map(|i| subst[*i].clone().expect("bound by builder")).collect();
                if f(&args).map_err(|m| self.fail(subst, format!("{label}: {m}")))? {
                    self.step(li + 1, ai, subst, acc, premises)?;
                }
                Ok(())
            }
        }
    }

    fn fail(&self, subst: &[Option<Value>], message: String) -> EngineError {
        EngineError::Rule {
            rule: self.rule.id.clone(),
            bindings: render_bindings(self.rule, subst),
            message,
        }
    }

    fn fire(&mut self, subst: &[Option<Value>], acc: SemiringValue, premises: &[(String, Tuple)]) -> EngineResult<()> {
        let head: Tuple = self
            .rule
            .head
            .args
            .iter()
            .map(|a| match a {
                Arg::Const(c) => c.clone(),
                Arg::Var(i) => subst[*i].clone().expect("head vars are bound"),
            })
            .collect();
        let key = (self.rule.head.relation.clone(), head);
        match self.out.get_mut(&key) {
            Some((k, _)) => *k = k.plus(&acc)?,
            None => {
                let firing = Firing {
                    rule: self.rule.id.clone(),
                    premises: premises.to_vec(),
                    bindings: self
                        .rule
                        .vars
                        .iter()
                        .zip(subst)
                        .filter_map(|(n, v)| v.clone().map(|v| (n.clone(), v)))
                        .collect(),
                };
                self.out.insert(key, (acc, firing));
            }
        }
        Ok(())
    }
}

fn eval_rule(store: &Store, rule: &Rule, modes: &[Mode], delta: &DeltaMap) -> EngineResult<Contrib> {
    let mut ev = RuleEval { store, rule, modes, delta, out: BTreeMap::new() };
    let mut subst = vec![None; rule.vars.len()];
    ev.step(0, 0, &mut subst, store.one(), &mut Vec::new())?;
    Ok(ev.out)
}

/// Evaluate `tasks` (rule, modes) in parallel and merge in task order.
fn eval_tasks(store: &Store, tasks: &[(&Rule, Vec<Mode>)], delta: &DeltaMap) -> EngineResult<Contrib> {
    let parts: Vec<EngineResult<Contrib>> =
        tasks.par_iter().map(|(r, modes)| eval_rule(store, r, modes, delta)).collect();
    let mut merged: Contrib = BTreeMap::new();
    for part in parts {
        for (key, (k, firing)) in part? {
            match merged.get_mut(&key) {
                Some((acc, _)) => *acc = acc.plus(&k)?,
                None => {
                    merged.insert(key, (k, firing));
                }
            }
        }
    }
    Ok(merged)
}

fn full_tasks(rules: &[Rule]) -> Vec<(&Rule, Vec<Mode>)> {
    rules.iter().map(|r| (r, vec![Mode::Full; r.atoms().count()])).collect()
}

/// Telescoping decomposition: for each atom position `i` reading a changed
/// relation, `Old` before `i`, `Delta` at `i`, `Full` after.
fn delta_tasks<'r>(rules: &'r [Rule], delta: &DeltaMap) -> Vec<(&'r Rule, Vec<Mode>)> {
    let mut tasks = Vec::new();
    for r in rules {
        let atoms: Vec<&Atom> = r.atoms().collect();
        for (i, a) in atoms.iter().enumerate() {
            if delta.get(&a.relation).map(|d| !d.is_empty()).unwrap_or(false) {
                let modes = (0..atoms.len())
                    .map(|j| match j.cmp(&i) {
                        std::cmp::Ordering::Less => Mode::Old,
                        std::cmp::Ordering::Equal => Mode::Delta,
                        std::cmp::Ordering::Greater => Mode::Full,
                    })
                    .collect();
                tasks.push((r, modes));
            }
        }
    }
    tasks
}

/// Adds contributions to the store; returns the annotation increments and
/// the number of new tuples.
fn apply(store: &mut Store, contrib: Contrib) -> EngineResult<(DeltaMap, usize)> {
    let mut delta: DeltaMap = BTreeMap::new();
    let mut fresh = 0;
    for ((rel, t), (k, firing)) in contrib {
        if k.is_zero() {
            continue;
        }
        let before = store.annotation_of(&rel, &t)?;
        store.insert(&rel, t.clone(), k)?;
        let after = store.annotation_of(&rel, &t)?;
        let inc = before.increment_to(&after)?;
        if before.is_zero() {
            fresh += 1;
            store.log_firing(&rel, &t, firing);
        }
        if !inc.is_zero() {
            delta.entry(rel).or_default().insert(t, inc);
        }
    }
    Ok((delta, fresh))
}

fn run_procedural(pass: &Pass, f: &ProceduralFn, store: &mut Store) -> EngineResult<usize> {
    let mut em = Emitter::new(&pass.name, store.peek_synthetic());
    f(store, &mut em)?;
    store.set_next_synthetic(em.next_synthetic);
    let mut fresh = 0;
    for d in em.derivations {
        if !pass.outputs.contains(&d.relation) {
            return Err(EngineError::NotOutput { pass: pass.name.clone(), relation: d.relation });
        }
        let k = premise_product(store, &d)?;
        let new = !store.contains(&d.relation, &d.tuple);
        store.insert(&d.relation, d.tuple.clone(), k)?;
        if new {
            fresh += 1;
            store.log_firing(
                &d.relation,
                &d.tuple,
                Firing { rule: d.rule, premises: d.premises, bindings: Vec::new() },
            );
        }
    }
    Ok(fresh)
}

fn premise_product(store: &Store, d: &Derivation) -> EngineResult<SemiringValue> {
    let mut k = store.one();
    for (rel, t) in &d.premises {
        let a = store.annotation_of(rel, t)?;
        if a.is_zero() {
            return Err(EngineError::MissingPremise {
                rule: d.rule.clone(),
                relation: rel.clone(),
                tuple: Value::Tuple(t.clone()).render(),
            });
        }
        k = k.times(&a)?;
    }
    Ok(k)
}

fn versions(pass: &Pass, store: &Store) -> Vec<u64> {
    pass.inputs.iter().map(|r| store.version(r)).collect()
}

pub fn run_pass(pass: &Pass, store: &mut Store) -> EngineResult<()> {
    run_pass_with(pass, store, &EngineConfig::default())
}

/// Runs `pass` to its fixpoint. A rerun on unchanged inputs is
/// skipped, so running a pass twice is the same as running it once.
pub fn run_pass_with(pass: &Pass, store: &mut Store, cfg: &EngineConfig) -> EngineResult<()> {
    for r in pass.touched() {
        store.relation(r)?;
    }
    let start = Instant::now();
    if store.memo.get(&pass.name) == Some(&versions(pass, store)) {
        store.pass_stats.push(PassStats {
            name: pass.name.clone(),
            iterations: 0,
            new_tuples: 0,
            skipped: true,
            micros: start.elapsed().as_micros(),
        });
        return Ok(());
    }
    let mut new_tuples = 0;
    if let Some(f) = &pass.procedural {
        new_tuples += run_procedural(pass, f, store)?;
    }
    let mut iterations = 0;
    if !pass.rules.is_empty() {
        let contrib = eval_tasks(store, &full_tasks(&pass.rules), &BTreeMap::new())?;
        let (mut delta, fresh) = apply(store, contrib)?;
        new_tuples += fresh;
        iterations = 1;
        let mut stable = if fresh == 0 { 1 } else { 0 };
        while !delta.is_empty() && stable <= cfg.extra_iterations {
            if iterations >= cfg.iteration_limit {
                return Err(EngineError::IterationLimit { pass: pass.name.clone(), limit: cfg.iteration_limit });
            }
            let tasks = delta_tasks(&pass.rules, &delta);
            let contrib = eval_tasks(store, &tasks, &delta)?;
            let (next, fresh) = apply(store, contrib)?;
            new_tuples += fresh;
            iterations += 1;
            stable = if fresh == 0 { stable + 1 } else { 0 };
            delta = next;
        }
    }
    let memo = versions(pass, store);
    store.memo.insert(pass.name.clone(), memo);
    store.pass_stats.push(PassStats {
        name: pass.name.clone(),
        iterations,
        new_tuples,
        skipped: false,
        micros: start.elapsed().as_micros(),
    });
    Ok(())
}

pub fn run_pipeline(passes: &[Pass], store: &mut Store) -> EngineResult<()> {
    passes.iter().try_for_each(|p| run_pass(p, store))
}

/// One application of the pass's immediate-consequence operator to `store`.
pub fn immediate_consequence(pass: &Pass, store: &Store) -> EngineResult<Delta> {
    let mut out: Delta = BTreeMap::new();
    if let Some(f) = &pass.procedural {
        let mut em = Emitter::new(&pass.name, store.peek_synthetic());
        f(store, &mut em)?;
        for d in em.derivations() {
            if !pass.outputs.contains(&d.relation) {
                return Err(EngineError::NotOutput { pass: pass.name.clone(), relation: d.relation.clone() });
            }
            let k = premise_product(store, d)?;
            add_delta(&mut out, (d.relation.clone(), d.tuple.clone()), k)?;
        }
    }
    for (key, (k, _)) in eval_tasks(store, &full_tasks(&pass.rules), &BTreeMap::new())? {
        add_delta(&mut out, key, k)?;
    }
    Ok(out)
}

fn add_delta(out: &mut Delta, key: (String, Tuple), k: SemiringValue) -> EngineResult<()> {
    match out.get_mut(&key) {
        Some(acc) => *acc = acc.plus(&k)?,
        None => {
            out.insert(key, k);
        }
    }
    Ok(())
}

/// Kleene iteration `X_{k+1} = D ⊕ T_P(X_k)` from scratch each round; the
/// reference the semi-naive evaluator is checked against.
pub fn run_pass_naive(pass: &Pass, store: &Store, limit: usize) -> EngineResult<Store> {
    let mut x = store.clone();
    for _ in 0..limit {
        let mut next = store.clone();
        for ((rel, t), k) in immediate_consequence(pass, &x)? {
            if !k.is_zero() {
                next.insert(&rel, t, k)?;
            }
        }
        if next.leq(&x)? && x.leq(&next)? {
            return Ok(next);
        }
        x = next;
    }
    Err(EngineError::IterationLimit { pass: pass.name.clone(), limit })
}

/// Outcome of comparing a provenance run against a run in another semiring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Universality {
    Holds { facts: usize },
    Fails { relation: String, tuple: String, expected: String, found: String },
}

/// Runs `passes` once over ℕ[X] and once over `target` with base facts
/// valued by `valuation`, then checks `h_v(D_prov(t)) = D_K(t)` for every
/// fact of either result.
pub fn check_universality<F>(passes: &[Pass], d0: &Store, valuation: F, target: SemiringTag) -> EngineResult<Universality>
where
    F: Fn(Token) -> SemiringValue,
{
    if d0.semiring() != SemiringTag::Prov {
        return Err(EngineError::Semiring(ProvenanceError::Mixed(SemiringTag::Prov, d0.semiring())));
    }
    let mut prov = d0.clone();
    run_pipeline(passes, &mut prov)?;

    let mut k = d0.empty_like(target);
    for r in d0.relations() {
        for (t, a) in r.iter() {
            let val = eval_hom(a.as_poly().expect("prov store"), |tok| Some(valuation(tok)), target)?;
            if !val.is_zero() {
                k.insert(&r.schema.name, t.clone(), val)?;
            }
        }
    }
    run_pipeline(passes, &mut k)?;

    let mut facts = 0;
    for r in prov.relations() {
        let name = &r.schema.name;
        for (t, a) in r.iter() {
            let expected = eval_hom(a.as_poly().expect("prov store"), |tok| Some(valuation(tok)), target)?;
            let found = k.annotation_of(name, t)?;
            facts += 1;
            if expected != found {
                return Ok(Universality::Fails {
                    relation: name.clone(),
                    tuple: Value::Tuple(t.clone()).render(),
                    expected: expected.to_string(),
                    found: found.to_string(),
                });
            }
        }
        for (t, found) in k.relation(name)?.iter() {
            if !r.get(t).is_some() {
                return Ok(Universality::Fails {
                    relation: name.clone(),
                    tuple: Value::Tuple(t.clone()).render(),
                    expected: SemiringValue::zero(target).to_string(),
                    found: found.to_string(),
                });
            }
        }
    }
    Ok(Universality::Holds { facts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provenance::{Monomial, Polynomial};
    use crate::store::{RelationSchema, ValueTag};

    fn graph_store(tag: SemiringTag, edges: &[(i64, i64)]) -> Store {
        let mut s = Store::new(tag);
        s.declare(RelationSchema::new("edge", &[("a", ValueTag::Int), ("b", ValueTag::Int)])).unwrap();
        s.declare(RelationSchema::new("path", &[("a", ValueTag::Int), ("b", ValueTag::Int)])).unwrap();
        for (a, b) in edges {
            s.insert_edb("edge", vec![Value::Int(*a), Value::Int(*b)]).unwrap();
        }
        s
    }

    fn tc() -> Pass {
        let base = Rule::builder("tc.base")
            .head("path", vec![v("x"), v("y")])
            .atom("edge", vec![v("x"), v("y")])
            .build()
            .unwrap();
        let step = Rule::builder("tc.step")
            .head("path", vec![v("x"), v("y")])
            .atom("edge", vec![v("x"), v("z")])
            .atom("path", vec![v("z"), v("y")])
            .build()
            .unwrap();
        Pass::declarative("tc", &["edge", "path"], &["path"], vec![base, step]).unwrap()
    }

    #[test]
    fn chain_closure() {
        let mut s = graph_store(SemiringTag::Prov, &[(1, 2), (2, 3), (3, 4)]);
        run_pass(&tc(), &mut s).unwrap();
        assert_eq!(s.len("path"), 6);
        let stats = s.pass_stats().last().unwrap().clone();
        assert!(stats.iterations <= 4, "{stats:?}");
        let k = s.annotation_of("path", &[Value::Int(1), Value::Int(4)]).unwrap();
        assert_eq!(k.to_string(), "x0·x1·x2");
    }

    #[test]
    fn rerun_is_skipped() {
        let mut s = graph_store(SemiringTag::Prov, &[(1, 2), (2, 1)]);
        run_pass(&tc(), &mut s).unwrap();
        let once = s.clone();
        run_pass(&tc(), &mut s).unwrap();
        assert!(s.pass_stats().last().unwrap().skipped);
        assert!(once.leq(&s).unwrap() && s.leq(&once).unwrap());
    }

    #[test]
    fn conjunction_multiplies_and_alternatives_add() {
        let mut s = Store::new(SemiringTag::Prov);
        for r in ["a", "b", "r"] {
            s.declare(RelationSchema::new(r, &[("x", ValueTag::Int)])).unwrap();
        }
        s.insert_edb("a", vec![Value::Int(1)]).unwrap();
        s.insert_edb("b", vec![Value::Int(1)]).unwrap();
        s.insert_edb("a", vec![Value::Int(2)]).unwrap();
        let both = Rule::builder("both")
            .head("r", vec![v("x")])
            .atom("a", vec![v("x")])
            .atom("b", vec![v("x")])
            .build()
            .unwrap();
        let only_a = Rule::builder("only_a").head("r", vec![v("x")]).atom("a", vec![v("x")]).build().unwrap();
        let p = Pass::declarative("p", &["a", "b"], &["r"], vec![both, only_a]).unwrap();
        run_pass(&p, &mut s).unwrap();
        assert_eq!(s.annotation_of("r", &[Value::Int(1)]).unwrap().to_string(), "x0 + x0·x1");
        assert_eq!(s.annotation_of("r", &[Value::Int(2)]).unwrap().to_string(), "x2");
    }

    #[test]
    fn empty_pass_changes_nothing() {
        let mut s = graph_store(SemiringTag::Bool, &[(1, 2)]);
        let before = s.clone();
        let p = Pass::declarative("nothing", &[], &[], vec![]).unwrap();
        run_pass(&p, &mut s).unwrap();
        assert!(before.leq(&s).unwrap() && s.leq(&before).unwrap());
    }

    #[test]
    fn compute_error_names_rule_and_bindings() {
        let mut s = graph_store(SemiringTag::Bool, &[(1, 2)]);
        let r = Rule::builder("boom")
            .head("path", vec![v("x"), v("y")])
            .atom("edge", vec![v("x"), v("y")])
            .compute("explode", &["x"], &["w"], |_| Err("no".into()))
            .build()
            .unwrap();
        let p = Pass::declarative("boom", &["edge"], &["path"], vec![r]).unwrap();
        let e = run_pass(&p, &mut s).unwrap_err().to_string();
        assert!(e.contains("boom") && e.contains("x=1"), "{e}");
    }

    #[test]
    fn rule_outside_outputs_is_rejected() {
        let r = Rule::builder("r").head("edge", vec![v("x"), v("y")]).atom("path", vec![v("x"), v("y")]).build().unwrap();
        assert!(Pass::declarative("bad", &["path"], &["path"], vec![r]).is_err());
    }

    #[test]
    fn procedural_annotations_and_outputs() {
        let mut s = graph_store(SemiringTag::Prov, &[(1, 2), (2, 3)]);
        let p = Pass::procedural("proc", &["edge"], &["path"], |st, em| {
            let r = st.relation("edge")?;
            let edges: Vec<Tuple> = r.iter().map(|(t, _)| t.clone()).collect();
            for a in &edges {
                for b in &edges {
                    if a[1] == b[0] {
                        em.derive(
                            "path",
                            vec![a[0].clone(), b[1].clone()],
                            "compose",
                            vec![premise("edge", a.clone()), premise("edge", b.clone())],
                        );
                    }
                }
            }
            let n = em.fresh_node();
            assert!(n.is_synthetic());
            Ok(())
        });
        let before = s.peek_synthetic();
        run_pass(&p, &mut s).unwrap();
        assert_eq!(s.peek_synthetic(), before + 1);
        let k = s.annotation_of("path", &[Value::Int(1), Value::Int(3)]).unwrap();
        assert_eq!(k, SemiringValue::Poly(Polynomial::from_monomial(Monomial::from_tokens(vec![Token(0), Token(1)]), 1)));
        assert_eq!(s.firing("path", &[Value::Int(1), Value::Int(3)]), None);

        let bad = Pass::procedural("bad", &["edge"], &["path"], |_, em| {
            em.derive("edge", vec![Value::Int(9), Value::Int(9)], "x", vec![]);
            Ok(())
        });
        assert!(matches!(run_pass(&bad, &mut s), Err(EngineError::NotOutput { .. })));
    }

    #[test]
    fn semi_naive_matches_naive_on_dag() {
        let s = graph_store(SemiringTag::Count, &[(1, 2), (2, 3), (1, 3), (3, 4), (2, 4)]);
        let mut semi = s.clone();
        run_pass(&tc(), &mut semi).unwrap();
        let naive = run_pass_naive(&tc(), &s, 100).unwrap();
        assert!(semi.leq(&naive).unwrap() && naive.leq(&semi).unwrap());
        assert_eq!(semi.annotation_of("path", &[Value::Int(1), Value::Int(4)]).unwrap(), SemiringValue::Count(3));
    }

    #[test]
    fn cyclic_prov_terminates() {
        let mut s = graph_store(SemiringTag::Prov, &[(1, 2), (2, 1)]);
        run_pass(&tc(), &mut s).unwrap();
        assert_eq!(s.len("path"), 4);
    }

    #[test]
    fn universality_on_closure() {
        let s = graph_store(SemiringTag::Prov, &[(1, 2), (2, 3), (1, 3), (3, 4)]);
        let r = check_universality(&[tc()], &s, |t| SemiringValue::Count(t.0 + 1), SemiringTag::Count).unwrap();
        assert!(matches!(r, Universality::Holds { .. }), "{r:?}");
        let r = check_universality(&[tc()], &s, |t| SemiringValue::Bool(t.0 != 1), SemiringTag::Bool).unwrap();
        assert!(matches!(r, Universality::Holds { .. }), "{r:?}");
    }
}
