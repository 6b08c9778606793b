use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{EngineError, EngineResult};
use crate::store::Value;
use crate::term::Textual;

/// Atom argument: a rule variable (by index) or a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Var(usize),
    Const(Value),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Arg>,
}

/// Native function computing zero or more output bindings from its inputs.
pub type ComputeFn = Arc<dyn Fn(&[Value]) -> Result<Vec<Vec<Value>>, String> + Send + Sync>;
pub type GuardFn = Arc<dyn Fn(&[Value]) -> Result<bool, String> + Send + Sync>;

#[derive(Clone)]
pub enum Literal {
    Atom(Atom),
    Compute {
        label: String,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        f: ComputeFn,
    },
    Guard {
        label: String,
        inputs: Vec<usize>,
        f: GuardFn,
    },
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom(a) => write!(f, "{a:?}"),
            Literal::Compute { label, .. } => write!(f, "{{{label}}}"),
            Literal::Guard { label, .. } => write!(f, "{{{label}?}}"),
        }
    }
}

/// A positive rule. Body literals bind left to right.
#[derive(Debug, Clone)]
pub struct Rule {
    pub id: String,
    pub head: Atom,
    pub body: Vec<Literal>,
    pub vars: Vec<String>,
}

impl Rule {
    pub fn builder(id: &str) -> RuleBuilder {
        RuleBuilder {
            id: id.to_string(),
            vars: Vec::new(),
            head: None,
            body: Vec::new(),
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(|l| match l {
            Literal::Atom(a) => Some(a),
            _ => None,
        })
    }

    fn render_atom(&self, a: &Atom) -> String {
        let args: Vec<String> = a
            .args
            .iter()
            .map(|x| match x {
                Arg::Var(i) => self.vars[*i].clone(),
                Arg::Const(v) => v.render(),
            })
            .collect();
        format!("{}({})", a.relation, args.join(", "))
    }
}

impl fmt::Display for Rule {
    /// `H(...) ← B1(...), B2(...), {computed}`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ← ", self.render_atom(&self.head))?;
        let body: Vec<String> = self
            .body
            .iter()
            .map(|l| match l {
                Literal::Atom(a) => self.render_atom(a),
                Literal::Compute { label, inputs, outputs, .. } => {
                    let ins: Vec<_> = inputs.iter().map(|i| self.vars[*i].as_str()).collect();
                    let outs: Vec<_> = outputs.iter().map(|i| self.vars[*i].as_str()).collect();
                    format!("{{{} = {}({})}}", outs.join(", "), label, ins.join(", "))
                }
                Literal::Guard { label, inputs, .. } => {
                    let ins: Vec<_> = inputs.iter().map(|i| self.vars[*i].as_str()).collect();
                    format!("{{{}({})}}", label, ins.join(", "))
                }
            })
            .collect();
        write!(f, "{}", body.join(", "))
    }
}

/// Argument spec used by the builder.
#[derive(Debug, Clone)]
pub enum A {
    V(String),
    C(Value),
}

pub fn v(name: &str) -> A {
    A::V(name.to_string())
}

pub fn c(value: impl Into<Value>) -> A {
    A::C(value.into())
}

pub struct RuleBuilder {
    id: String,
    vars: Vec<String>,
    head: Option<(String, Vec<A>)>,
    body: Vec<BodySpec>,
}

enum BodySpec {
    Atom(String, Vec<A>),
    Compute(String, Vec<String>, Vec<String>, ComputeFn),
    Guard(String, Vec<String>, GuardFn),
}

impl RuleBuilder {
    pub fn head(mut self, rel: &str, args: Vec<A>) -> Self {
        self.head = Some((rel.to_string(), args));
        self
    }

    pub fn atom(mut self, rel: &str, args: Vec<A>) -> Self {
        self.body.push(BodySpec::Atom(rel.to_string(), args));
        self
    }

    pub fn compute<F>(mut self, label: &str, inputs: &[&str], outputs: &[&str], f: F) -> Self
    where
        F: Fn(&[Value]) -> Result<Vec<Vec<Value>>, String> + Send + Sync + 'static,
    {
        self.body.push(BodySpec::Compute(
            label.to_string(),
            inputs.iter().map(|s| s.to_string()).collect(),
            outputs.iter().map(|s| s.to_string()).collect(),
            Arc::new(f),
        ));
        self
    }

    pub fn guard<F>(mut self, label: &str, inputs: &[&str], f: F) -> Self
    where
        F: Fn(&[Value]) -> Result<bool, String> + Send + Sync + 'static,
    {
        self.body.push(BodySpec::Guard(
            label.to_string(),
            inputs.iter().map(|s| s.to_string()).collect(),
            Arc::new(f),
        ));
        self
    }

    fn var(&mut self, name: &str) -> usize {
        match self.vars.iter().position(|v| v == name) {
            Some(i) => i,
            None => {
                self.vars.push(name.to_string());
                self.vars.len() - 1
            }
        }
    }

    pub fn build(mut self) -> EngineResult<Rule> {
        let id = self.id.clone();
        let invalid = |msg: String| EngineError::InvalidRule { rule: id.clone(), message: msg };
        let mut bound: BTreeMap<String, ()> = BTreeMap::new();
        let mut body = Vec::new();
        for spec in std::mem::take(&mut self.body) {
            match spec {
                BodySpec::Atom(rel, args) => {
                    let args = args
                        .into_iter()
                        .map(|a| match a {
                            A::V(n) => {
                                bound.insert(n.clone(), ());
                                Arg::Var(self.var(&n))
                            }
                            A::C(v) => Arg::Const(v),
                        })
                        .collect();
                    body.push(Literal::Atom(Atom { relation: rel, args }));
                }
                BodySpec::Compute(label, ins, outs, f) => {
                    for i in &ins {
                        if !bound.contains_key(i) {
                            return Err(invalid(format!("computed premise `{label}` reads unbound `{i}`")));
                        }
                    }
                    let inputs = ins.iter().map(|n| self.var(n)).collect();
                    let outputs = outs
                        .iter()
                        .map(|n| {
                            bound.insert(n.clone(), ());
                            self.var(n)
                        })
                        .collect();
                    body.push(Literal::Compute { label, inputs, outputs, f });
                }
                BodySpec::Guard(label, ins, f) => {
                    for i in &ins {
                        if !bound.contains_key(i) {
                            return Err(invalid(format!("guard `{label}` reads unbound `{i}`")));
                        }
                    }
                    let inputs = ins.iter().map(|n| self.var(n)).collect();
                    body.push(Literal::Guard { label, inputs, f });
                }
            }
        }
        let (rel, args) = self.head.take().ok_or_else(|| invalid("missing head".into()))?;
        let mut head_args = Vec::new();
        for a in args {
            head_args.push(match a {
                A::V(n) => {
                    if !bound.contains_key(&n) {
                        return Err(invalid(format!("head variable `{n}` is not bound by the body")));
                    }
                    Arg::Var(self.var(&n))
                }
                A::C(v) => Arg::Const(v),
            });
        }
        Ok(Rule {
            id: self.id,
            head: Atom { relation: rel, args: head_args },
            body,
            vars: self.vars,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering() {
        let r = Rule::builder("tc.step")
            .head("path", vec![v("x"), v("y")])
            .atom("edge", vec![v("x"), v("z")])
            .atom("path", vec![v("z"), v("y")])
            .compute("succ", &["y"], &["w"], |a| Ok(vec![a.to_vec()]))
            .build()
            .unwrap();
        assert_eq!(r.to_string(), "path(x, y) ← edge(x, z), path(z, y), {w = succ(y)}");
    }

    #[test]
    fn unbound_head_rejected() {
        let r = Rule::builder("bad").head("r", vec![v("x")]).atom("a", vec![v("y")]).build();
        assert!(matches!(r, Err(EngineError::InvalidRule { .. })));
        let r = Rule::builder("bad2")
            .head("r", vec![v("x")])
            .compute("f", &["q"], &["x"], |_| Ok(vec![]))
            .build();
        assert!(r.is_err());
    }
}
