#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;

use supdec::engine::{v, Pass, Rule};
use supdec::provenance::{Monomial, Polynomial, SemiringTag, Token};
use supdec::store::{RelationSchema, Store, Value, ValueTag};

pub const FIXTURES: &[&str] = &["arith", "branches", "calls", "classify", "globals", "loops", "structs", "vla"];

pub fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}.lst", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// Domain size for random programs.
pub const DOMAIN: i64 = 6;

/// A rule over variables named by single letters; relations `e` (binary)
/// and `f` (unary) are extensional, `p` and `q` (binary) intensional.
#[derive(Debug, Clone)]
pub struct Template {
    pub id: &'static str,
    pub head: (&'static str, Vec<&'static str>),
    pub body: Vec<(&'static str, Vec<&'static str>)>,
}

/// Rule shapes whose derivations stay finite when `e` only links a smaller
/// constant to a larger one.
pub fn templates() -> Vec<Template> {
    let t = |id, head: (&'static str, Vec<&'static str>), body: Vec<(&'static str, Vec<&'static str>)>| Template {
        id,
        head,
        body,
    };
    vec![
        t("p_edge", ("p", vec!["x", "y"]), vec![("e", vec!["x", "y"])]),
        t("p_step", ("p", vec!["x", "y"]), vec![("e", vec!["x", "z"]), ("p", vec!["z", "y"])]),
        t("q_both", ("q", vec!["x", "y"]), vec![("p", vec!["x", "y"]), ("e", vec!["x", "y"])]),
        t("q_join", ("q", vec!["x", "y"]), vec![("p", vec!["x", "z"]), ("p", vec!["z", "y"])]),
        t("q_loop", ("q", vec!["x", "x"]), vec![("f", vec!["x"]), ("e", vec!["x", "y"])]),
        t("p_marked", ("p", vec!["x", "y"]), vec![("f", vec!["x"]), ("e", vec!["x", "y"])]),
        t("q_step", ("q", vec!["x", "y"]), vec![("e", vec!["x", "z"]), ("q", vec!["z", "y"])]),
        t("p_trans", ("p", vec!["x", "z"]), vec![("p", vec!["x", "y"]), ("p", vec!["y", "z"])]),
    ]
}

pub fn arity(rel: &str) -> usize {
    if rel == "f" {
        1
    } else {
        2
    }
}

pub fn is_edb(rel: &str) -> bool {
    rel == "e" || rel == "f"
}

/// A random non-empty program that derives at least something from `e`.
pub fn random_program(rng: &mut StdRng) -> Vec<Template> {
    let all = templates();
    let mut prog: Vec<Template> = all.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
    if !prog.iter().any(|t| t.id == "p_edge" || t.id == "p_marked") {
        prog.push(all[0].clone());
    }
    prog
}

pub fn to_pass(prog: &[Template]) -> Pass {
    let rules = prog
        .iter()
        .map(|t| {
            let mut b = Rule::builder(t.id).head(t.head.0, t.head.1.iter().map(|x| v(x)).collect());
            for (rel, args) in &t.body {
                b = b.atom(rel, args.iter().map(|x| v(x)).collect());
            }
            b.build().unwrap()
        })
        .collect();
    Pass::declarative("random", &["e", "f", "p", "q"], &["p", "q"], rules).unwrap()
}

pub fn empty_store(tag: SemiringTag) -> Store {
    let mut s = Store::new(tag);
    for rel in ["e", "f", "p", "q"] {
        let cols: Vec<(&str, ValueTag)> = ["a", "b"][..arity(rel)].iter().map(|c| (*c, ValueTag::Int)).collect();
        s.declare(RelationSchema::new(rel, &cols)).unwrap();
    }
    s
}

/// Random forward edges and marks over the domain.
pub fn random_edb(rng: &mut StdRng) -> (Vec<(i64, i64)>, Vec<i64>) {
    let mut edges = Vec::new();
    for a in 0..DOMAIN {
        for b in a + 1..DOMAIN {
            if rng.gen_bool(0.35) {
                edges.push((a, b));
            }
        }
    }
    let marks = (0..DOMAIN).filter(|_| rng.gen_bool(0.3)).collect();
    (edges, marks)
}

pub fn load_edb(s: &mut Store, edges: &[(i64, i64)], marks: &[i64]) {
    for (a, b) in edges {
        s.insert_edb("e", vec![Value::Int(*a), Value::Int(*b)]).unwrap();
    }
    for m in marks {
        s.insert_edb("f", vec![Value::Int(*m)]).unwrap();
    }
}

/// Naive evaluation over every ground fact of the domain: each round
/// recomputes all polynomials from the previous round until nothing changes.
pub struct BruteForce<'a> {
    pub prog: &'a [Template],
    pub store: &'a Store,
    table: Option<BTreeMap<(String, Vec<i64>), Polynomial>>,
}

impl<'a> BruteForce<'a> {
    /// `store` holds the extensional facts, whose tokens become the variables.
    pub fn new(prog: &'a [Template], store: &'a Store) -> Self {
        BruteForce { prog, store, table: None }
    }

    /// The provenance polynomial summing every derivation of `rel(args)`.
    pub fn poly(&mut self, rel: &str, args: &[i64]) -> Polynomial {
        if is_edb(rel) {
            return self.edb(rel, args);
        }
        if self.table.is_none() {
            self.table = Some(self.fixpoint());
        }
        let table = self.table.as_ref().unwrap();
        table.get(&(rel.to_string(), args.to_vec())).cloned().unwrap_or_else(Polynomial::zero)
    }

    fn edb(&self, rel: &str, args: &[i64]) -> Polynomial {
        let tuple: Vec<Value> = args.iter().map(|a| Value::Int(*a)).collect();
        match self.store.fact_token(rel, &tuple) {
            Some(t) => Polynomial::from_token(t),
            None => Polynomial::zero(),
        }
    }

    fn fixpoint(&self) -> BTreeMap<(String, Vec<i64>), Polynomial> {
        let mut cur: BTreeMap<(String, Vec<i64>), Polynomial> = BTreeMap::new();
        // Forward-only edges bound derivation height well below this.
        for _ in 0..4 * DOMAIN * DOMAIN {
            let mut next = BTreeMap::new();
            for rel in ["p", "q"] {
                for a in 0..DOMAIN {
                    for b in 0..DOMAIN {
                        let mut acc = Polynomial::zero();
                        for t in self.prog.iter().filter(|t| t.head.0 == rel) {
                            for env in assignments(t, &[a, b]) {
                                let mut term = Polynomial::one();
                                for (brel, bargs) in &t.body {
                                    let vals: Vec<i64> = bargs.iter().map(|x| env[x]).collect();
                                    let p = if is_edb(brel) {
                                        self.edb(brel, &vals)
                                    } else {
                                        cur.get(&(brel.to_string(), vals)).cloned().unwrap_or_else(Polynomial::zero)
                                    };
                                    term = term.times(&p);
                                    if term.is_zero() {
                                        break;
                                    }
                                }
                                acc = acc.plus(&term);
                            }
                        }
                        if !acc.is_zero() {
                            next.insert((rel.to_string(), vec![a, b]), acc);
                        }
                    }
                }
            }
            if next == cur {
                return cur;
            }
            cur = next;
        }
        panic!("no fixpoint: program derives infinitely many trees");
    }

    /// Leaf tokens of one derivation of `rel(args)`, if any exists.
    pub fn one_derivation(&mut self, rel: &str, args: &[i64]) -> Option<Vec<Token>> {
        if self.poly(rel, args).is_zero() {
            return None;
        }
        if is_edb(rel) {
            let tuple: Vec<Value> = args.iter().map(|a| Value::Int(*a)).collect();
            return Some(vec![self.store.fact_token(rel, &tuple)?]);
        }
        for t in self.prog.iter().filter(|t| t.head.0 == rel) {
            'env: for env in assignments(t, args) {
                let mut leaves = Vec::new();
                for (brel, bargs) in &t.body {
                    let vals: Vec<i64> = bargs.iter().map(|x| env[x]).collect();
                    if self.poly(brel, &vals).is_zero() {
                        continue 'env;
                    }
                }
                for (brel, bargs) in &t.body {
                    let vals: Vec<i64> = bargs.iter().map(|x| env[x]).collect();
                    leaves.extend(self.one_derivation(brel, &vals)?);
                }
                return Some(leaves);
            }
        }
        None
    }

    /// Every derivable intensional fact with its polynomial.
    pub fn all(&mut self) -> Vec<(String, Vec<i64>, Polynomial)> {
        let mut out = Vec::new();
        for rel in ["p", "q"] {
            for a in 0..DOMAIN {
                for b in 0..DOMAIN {
                    let p = self.poly(rel, &[a, b]);
                    if !p.is_zero() {
                        out.push((rel.to_string(), vec![a, b], p));
                    }
                }
            }
        }
        out
    }
}

/// Variable bindings of a template agreeing with the head arguments.
fn assignments(t: &Template, head: &[i64]) -> Vec<BTreeMap<&'static str, i64>> {
    let mut base = BTreeMap::new();
    for (x, a) in t.head.1.iter().zip(head) {
        if let Some(old) = base.insert(*x, *a) {
            if old != *a {
                return vec![];
            }
        }
    }
    let mut free: Vec<&'static str> = t.body.iter().flat_map(|(_, xs)| xs.iter().copied()).collect();
    free.sort_unstable();
    free.dedup();
    free.retain(|x| !base.contains_key(x));
    let mut envs = vec![base];
    for x in free {
        envs = envs
            .into_iter()
            .flat_map(|e| {
                (0..DOMAIN).map(move |c| {
                    let mut e = e.clone();
                    e.insert(x, c);
                    e
                })
            })
            .collect();
    }
    envs
}

pub fn random_poly(rng: &mut StdRng) -> Polynomial {
    let mut p = Polynomial::zero();
    for _ in 0..rng.gen_range(0..4) {
        let tokens: Vec<Token> = (0..rng.gen_range(0..4)).map(|_| Token(rng.gen_range(0..6))).collect();
        p = p.plus(&Polynomial::from_monomial(Monomial::from_tokens(tokens), rng.gen_range(1..4)));
    }
    p
}
