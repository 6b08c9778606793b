//! Derivation trees rebuilt from the firing log.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Arg, EngineError, EngineResult, Literal, Pass, Rule};
use crate::provenance::{Monomial, SemiringValue, Token};
use crate::store::{Store, Tuple, Value};
use crate::term::Textual;

const MAX_TREE_NODES: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationTree {
    pub relation: String,
    pub tuple: Tuple,
    /// `None` for a base fact.
    pub rule: Option<String>,
    pub token: Option<Token>,
    pub bindings: Vec<(String, Value)>,
    pub children: Vec<DerivationTree>,
}

impl DerivationTree {
    pub fn is_leaf(&self) -> bool {
        self.rule.is_none()
    }

    pub fn leaf_tokens(&self) -> Vec<Token> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out.sort();
        out
    }

    fn collect_tokens(&self, out: &mut Vec<Token>) {
        if let Some(t) = self.token {
            out.push(t);
        }
        for c in &self.children {
            c.collect_tokens(out);
        }
    }

    pub fn monomial(&self) -> Monomial {
        Monomial::from_tokens(self.leaf_tokens())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Indented text, one fact per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(0, &mut out);
        out
    }

    fn render_into(&self, indent: usize, out: &mut String) {
        let fact = format!("{}{}", self.relation, Value::Tuple(self.tuple.clone()).render());
        let _ = match (&self.rule, self.token) {
            (None, Some(t)) => writeln!(out, "{:indent$}{fact}  [{t}]", ""),
            (Some(r), _) => writeln!(out, "{:indent$}{fact}  by {r}", ""),
            (None, None) => writeln!(out, "{:indent$}{fact}", ""),
        };
        for c in &self.children {
            c.render_into(indent + 2, out);
        }
    }
}

/// The first recorded derivation of `rel(t)`, unfolded down to base facts.
/// Needs the firing log to have been enabled before the passes ran.
pub fn witness(store: &Store, rel: &str, t: &[Value]) -> EngineResult<DerivationTree> {
    if !store.contains(rel, t) {
        return Err(EngineError::Witness(format!(
            "{rel}{} is not in the store",
            Value::Tuple(t.to_vec()).render()
        )));
    }
    let mut budget = MAX_TREE_NODES;
    let mut stack = Vec::new();
    build(store, rel, t, &mut stack, &mut budget)
}

fn build(
    store: &Store,
    rel: &str,
    t: &[Value],
    stack: &mut Vec<(String, Tuple)>,
    budget: &mut usize,
) -> EngineResult<DerivationTree> {
    if *budget == 0 {
        return Err(EngineError::Witness("derivation tree too large".into()));
    }
    *budget -= 1;
    if let Some(tok) = store.fact_token(rel, t) {
        return Ok(DerivationTree {
            relation: rel.to_string(),
            tuple: t.to_vec(),
            rule: None,
            token: Some(tok),
            bindings: Vec::new(),
            children: Vec::new(),
        });
    }
    let key = (rel.to_string(), t.to_vec());
    if stack.contains(&key) {
        return Err(EngineError::Witness(format!("cyclic firing log at {rel}")));
    }
    let firing = store.firing(rel, t).ok_or_else(|| {
        EngineError::Witness(format!(
            "no recorded firing for {rel}{}",
            Value::Tuple(t.to_vec()).render()
        ))
    })?;
    stack.push(key);
    let mut children = Vec::new();
    for (prel, pt) in &firing.premises {
        children.push(build(store, prel, pt, stack, budget)?);
    }
    stack.pop();
    Ok(DerivationTree {
        relation: rel.to_string(),
        tuple: t.to_vec(),
        rule: Some(firing.rule.clone()),
        token: None,
        bindings: firing.bindings.clone(),
        children,
    })
}

fn instantiate(rule: &Rule, args: &[Arg], env: &BTreeMap<&str, &Value>) -> Option<Tuple> {
    args.iter()
        .map(|a| match a {
            Arg::Const(c) => Some(c.clone()),
            Arg::Var(i) => env.get(rule.vars[*i].as_str()).map(|v| (*v).clone()),
        })
        .collect()
}

fn check_rule_instance(rule: &Rule, node: &DerivationTree) -> Result<(), String> {
    let env: BTreeMap<&str, &Value> = node.bindings.iter().map(|(n, v)| (n.as_str(), v)).collect();
    let head = instantiate(rule, &rule.head.args, &env).ok_or("unbound head variable")?;
    if head != node.tuple || rule.head.relation != node.relation {
        return Err("head does not match the fact".into());
    }
    let mut children = node.children.iter();
    for lit in &rule.body {
        match lit {
            Literal::Atom(a) => {
                let c = children.next().ok_or("fewer premises than body atoms")?;
                let t = instantiate(rule, &a.args, &env).ok_or("unbound body variable")?;
                if c.relation != a.relation || c.tuple != t {
                    return Err(format!("premise {} does not match body atom {}", c.relation, a.relation));
                }
            }
            Literal::Compute { label, inputs, outputs, f } => {
                let get = |i: &usize| env.get(rule.vars[*i].as_str()).map(|v| (*v).clone());
                let ins: Option<Vec<Value>> = inputs.iter().map(get).collect();
                let outs: Option<Vec<Value>> = outputs.iter().map(get).collect();
                let (ins, outs) = (ins.ok_or("unbound input")?, outs.ok_or("unbound output")?);
                let results = f(&ins).map_err(|e| format!("{label}: {e}"))?;
                if !results.contains(&outs) {
                    return Err(format!("{label} does not produce the recorded bindings"));
                }
            }
            Literal::Guard { label, inputs, f } => {
                let ins: Option<Vec<Value>> =
                    inputs.iter().map(|i| env.get(rule.vars[*i].as_str()).map(|v| (*v).clone())).collect();
                if !f(&ins.ok_or("unbound input")?).map_err(|e| format!("{label}: {e}"))? {
                    return Err(format!("guard {label} rejects the recorded bindings"));
                }
            }
        }
    }
    if children.next().is_some() {
        return Err("more premises than body atoms".into());
    }
    Ok(())
}

/// Re-checks every step of `tree` against the rules of `passes` and the
/// store, and checks that its leaf tokens form a monomial of each node's
/// annotation (support only where the polynomial was capped).
pub fn validate_witness(store: &Store, passes: &[Pass], tree: &DerivationTree) -> EngineResult<()> {
    let rules: BTreeMap<&str, &Rule> =
        passes.iter().flat_map(|p| p.rules.iter()).map(|r| (r.id.as_str(), r)).collect();
    validate_node(store, passes, &rules, tree)
}

fn validate_node(
    store: &Store,
    passes: &[Pass],
    rules: &BTreeMap<&str, &Rule>,
    node: &DerivationTree,
) -> EngineResult<()> {
    let fail = |m: String| {
        EngineError::Witness(format!("{}{}: {m}", node.relation, Value::Tuple(node.tuple.clone()).render()))
    };
    let k = store.annotation_of(&node.relation, &node.tuple)?;
    if k.is_zero() {
        return Err(fail("fact is not in the store".into()));
    }
    match (&node.rule, node.token) {
        (None, Some(tok)) => {
            if store.token_fact(tok) != Some((node.relation.as_str(), &node.tuple)) {
                return Err(fail(format!("token {tok} names a different fact")));
            }
        }
        (Some(id), _) => {
            if let Some(rule) = rules.get(id.as_str()) {
                check_rule_instance(rule, node).map_err(fail)?;
            } else {
                let owner = passes.iter().find(|p| {
                    p.procedural.is_some()
                        && id.strip_prefix(&p.name).map(|r| r.starts_with('.')).unwrap_or(false)
                });
                match owner {
                    Some(p) if p.outputs.contains(&node.relation) => {}
                    Some(_) => return Err(fail(format!("{id} derives outside its pass outputs"))),
                    None => return Err(fail(format!("unknown rule {id}"))),
                }
            }
        }
        (None, None) => return Err(fail("leaf without a token".into())),
    }
    if let SemiringValue::Poly(p) = &k {
        let m = node.monomial();
        if !p.is_capped() && p.coefficient(&m) == 0 {
            return Err(fail(format!("leaf monomial {m} is not a term of {p}")));
        }
    }
    for c in &node.children {
        validate_node(store, passes, rules, c)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::store::{RelationSchema, ValueTag};

    #[test]
    fn closure_witness_leaves_are_edges() {
        let mut s = Store::new(SemiringTag::Prov);
        s.declare(RelationSchema::new("edge", &[("a", ValueTag::Int), ("b", ValueTag::Int)])).unwrap();
        s.declare(RelationSchema::new("path", &[("a", ValueTag::Int), ("b", ValueTag::Int)])).unwrap();
        for (a, b) in [(1, 2), (2, 3), (3, 4), (1, 3)] {
            s.insert_edb("edge", vec![Value::Int(a), Value::Int(b)]).unwrap();
        }
        s.enable_firing_log();
        let base = Rule::builder("tc.base")
            .head("path", vec![v("x"), v("y")])
            .atom("edge", vec![v("x"), v("y")])
            .build()
            .unwrap();
        let step = Rule::builder("tc.step")
            .head("path", vec![v("x"), v("y")])
            .atom("path", vec![v("x"), v("z")])
            .atom("edge", vec![v("z"), v("y")])
            .build()
            .unwrap();
        let p = Pass::declarative("tc", &["edge", "path"], &["path"], vec![base, step]).unwrap();
        run_pass(&p, &mut s).unwrap();
        let t = [Value::Int(1), Value::Int(4)];
        let w = witness(&s, "path", &t).unwrap();
        assert!(w.children.len() == 2 && !w.is_leaf());
        validate_witness(&s, std::slice::from_ref(&p), &w).unwrap();
        let k = s.annotation_of("path", &t).unwrap();
        assert!(k.as_poly().unwrap().coefficient(&w.monomial()) > 0);
        assert!(w.render().contains("by tc.step"));

        let mut forged = w.clone();
        forged.children.pop();
        assert!(validate_witness(&s, &[p], &forged).is_err());
    }
}
