use std::fmt;
use std::sync::Arc;

use super::NodeId;
use crate::ir::{Chunk, MachReg, Stmt, TypeIdx};
use crate::term::{err, Term, TermResult, Textual};
use crate::textual_enum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueTag {
    Node,
    Int,
    Reg,
    Chunk,
    Stmt,
    Type,
    Text,
    Tuple,
}

textual_enum!(ValueTag {
    Node => "node",
    Int => "int",
    Reg => "reg",
    Chunk => "chunk",
    Stmt => "stmt",
    Type => "type",
    Text => "text",
    Tuple => "tuple",
});

/// A column value. Equality, ordering and hashing are structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Node(NodeId),
    Int(i64),
    Reg(MachReg),
    Chunk(Chunk),
    Stmt(Arc<Stmt>),
    Type(TypeIdx),
    Text(String),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn tag(&self) -> ValueTag {
        match self {
            Value::Node(_) => ValueTag::Node,
            Value::Int(_) => ValueTag::Int,
            Value::Reg(_) => ValueTag::Reg,
            Value::Chunk(_) => ValueTag::Chunk,
            Value::Stmt(_) => ValueTag::Stmt,
            Value::Type(_) => ValueTag::Type,
            Value::Text(_) => ValueTag::Text,
            Value::Tuple(_) => ValueTag::Tuple,
        }
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn stmt(s: Stmt) -> Value {
        Value::Stmt(Arc::new(s))
    }

    pub fn node(n: u64) -> Value {
        Value::Node(NodeId(n))
    }

    pub fn as_node(&self) -> Option<NodeId> {
        match self {
            Value::Node(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_stmt(&self) -> Option<&Stmt> {
        match self {
            Value::Stmt(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_type(&self) -> Option<TypeIdx> {
        match self {
            Value::Type(t) => Some(*t),
            _ => None,
        }
    }

    pub fn as_reg(&self) -> Option<MachReg> {
        match self {
            Value::Reg(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[Value]> {
        match self {
            Value::Tuple(v) => Some(v),
            _ => None,
        }
    }
}

impl From<NodeId> for Value {
    fn from(n: NodeId) -> Self {
        Value::Node(n)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<MachReg> for Value {
    fn from(r: MachReg) -> Self {
        Value::Reg(r)
    }
}

impl From<TypeIdx> for Value {
    fn from(t: TypeIdx) -> Self {
        Value::Type(t)
    }
}

impl Textual for Value {
    fn to_term(&self) -> Term {
        match self {
            Value::Node(n) => Term::Node(n.0),
            Value::Int(n) => Term::Int(*n),
            Value::Reg(r) => r.to_term(),
            Value::Chunk(c) => c.to_term(),
            Value::Stmt(s) => s.to_term(),
            Value::Type(t) => Term::TypeRef(t.0),
            Value::Text(s) => Term::Str(s.clone()),
            Value::Tuple(items) => Term::List(items.iter().map(|v| v.to_term()).collect()),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        Ok(match t {
            Term::Node(n) => Value::Node(NodeId(*n)),
            Term::Int(n) => Value::Int(*n),
            Term::TypeRef(i) => Value::Type(TypeIdx(*i)),
            Term::Str(s) => Value::Text(s.clone()),
            Term::List(items) => {
                Value::Tuple(items.iter().map(Value::from_term).collect::<TermResult<_>>()?)
            }
            Term::Ident(name) => {
                if let Some(r) = MachReg::from_name(name) {
                    Value::Reg(r)
                } else if let Some(c) = Chunk::from_name(name) {
                    Value::Chunk(c)
                } else {
                    return err(format!("unknown atom `{name}`"));
                }
            }
            Term::App(..) => Value::Stmt(Arc::new(Stmt::from_term(t)?)),
        })
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{MachInst, Src, Typ};

    #[test]
    fn values_round_trip() {
        let vals = vec![
            Value::node(0x401000),
            Value::Int(-3),
            Value::Reg(MachReg::X0),
            Value::Chunk(Chunk::MFloat32),
            Value::stmt(Stmt::Mach(MachInst::Msetstack(Src::Reg(MachReg::DI), -8, Typ::Tany64))),
            Value::Type(TypeIdx(12)),
            Value::text("a\tb"),
            Value::Tuple(vec![Value::Int(1), Value::text("%rax")]),
        ];
        for v in vals {
            let text = v.render();
            assert_eq!(Value::parse_text(&text).unwrap(), v, "{text}");
            assert!(!text.contains('\t'));
        }
    }
}
