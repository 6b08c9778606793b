//! Generic textual term syntax.
//!
//! Every IR statement and store value renders to a [`Term`] and parses back
//! from one. The grammar is small:
//!
//! ```text
//! term  := int | '@' hex | '$' int | string | ident [ '(' terms ')' ] | '[' terms ']'
//! terms := [ term { ',' term } ]
//! ```
//!
//! `@` introduces a node id, `$` a C-type index.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("term syntax: {0}")]
pub struct TermError(pub String);

pub type TermResult<T> = Result<T, TermError>;

pub fn err<T>(msg: impl Into<String>) -> TermResult<T> {
    Err(TermError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Int(i64),
    Node(u64),
    TypeRef(u32),
    Str(String),
    Ident(String),
    App(String, Vec<Term>),
    List(Vec<Term>),
}

impl Term {
    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(name.to_string(), args)
    }

    pub fn ident(name: impl Into<String>) -> Term {
        Term::Ident(name.into())
    }

    pub fn as_int(&self) -> TermResult<i64> {
        match self {
            Term::Int(i) => Ok(*i),
            other => err(format!("expected integer, found `{other}`")),
        }
    }

    pub fn as_node(&self) -> TermResult<u64> {
        match self {
            Term::Node(n) => Ok(*n),
            other => err(format!("expected node, found `{other}`")),
        }
    }

    pub fn as_ident(&self) -> TermResult<&str> {
        match self {
            Term::Ident(s) => Ok(s),
            other => err(format!("expected identifier, found `{other}`")),
        }
    }

    pub fn as_str(&self) -> TermResult<&str> {
        match self {
            Term::Str(s) => Ok(s),
            other => err(format!("expected string, found `{other}`")),
        }
    }

    pub fn as_list(&self) -> TermResult<&[Term]> {
        match self {
            Term::List(items) => Ok(items),
            other => err(format!("expected list, found `{other}`")),
        }
    }

    /// Head name and arguments; a bare identifier is a nullary application.
    pub fn as_app(&self) -> TermResult<(&str, &[Term])> {
        match self {
            Term::App(name, args) => Ok((name, args)),
            Term::Ident(name) => Ok((name, &[])),
            other => err(format!("expected constructor, found `{other}`")),
        }
    }

    /// Like [`as_app`](Self::as_app) but checks the argument count.
    pub fn args_of(&self, arity: usize) -> TermResult<(&str, &[Term])> {
        let (name, args) = self.as_app()?;
        if args.len() != arity {
            return err(format!(
                "`{name}` expects {arity} argument(s), found {}",
                args.len()
            ));
        }
        Ok((name, args))
    }

    pub fn parse(text: &str) -> TermResult<Term> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let t = p.term()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return err(format!("trailing input at offset {} in `{text}`", p.pos));
        }
        Ok(t)
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[Term]) -> fmt::Result {
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(i) => write!(f, "{i}"),
            Term::Node(n) => write!(f, "@{n:x}"),
            Term::TypeRef(t) => write!(f, "${t}"),
            Term::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\t' => f.write_str("\\t")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Term::Ident(s) => f.write_str(s),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                write_list(f, args)?;
                f.write_str(")")
            }
            Term::List(items) => {
                f.write_str("[")?;
                write_list(f, items)?;
                f.write_str("]")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn take_while(&mut self, f: impl Fn(u8) -> bool) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && f(self.src[self.pos]) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn terms_until(&mut self, close: u8) -> TermResult<Vec<Term>> {
        let mut items = Vec::new();
        if self.eat(close) {
            return Ok(items);
        }
        loop {
            items.push(self.term()?);
            if self.eat(close) {
                return Ok(items);
            }
            if !self.eat(b',') {
                return err(format!("expected `,` or `{}` at offset {}", close as char, self.pos));
            }
        }
    }

    fn term(&mut self) -> TermResult<Term> {
        self.skip_ws();
        match self.peek() {
            None => err("unexpected end of input"),
            Some(b'[') => {
                self.pos += 1;
                Ok(Term::List(self.terms_until(b']')?))
            }
            Some(b'@') => {
                self.pos += 1;
                let digits = self.take_while(|c| c.is_ascii_hexdigit()).to_string();
                u64::from_str_radix(&digits, 16)
                    .map(Term::Node)
                    .or_else(|_| err(format!("bad node literal `@{digits}`")))
            }
            Some(b'$') => {
                self.pos += 1;
                let digits = self.take_while(|c| c.is_ascii_digit()).to_string();
                digits
                    .parse()
                    .map(Term::TypeRef)
                    .or_else(|_| err(format!("bad type literal `${digits}`")))
            }
            Some(b'"') => {
                self.pos += 1;
                let mut out = String::new();
                loop {
                    let rest = std::str::from_utf8(&self.src[self.pos..])
                        .map_err(|_| TermError("invalid utf-8".into()))?;
                    let mut chars = rest.chars();
                    let c = chars.next().ok_or_else(|| TermError("unterminated string".into()))?;
                    self.pos += c.len_utf8();
                    match c {
                        '"' => return Ok(Term::Str(out)),
                        '\\' => {
                            let e = self.peek().ok_or_else(|| TermError("bad escape".into()))?;
                            self.pos += 1;
                            out.push(match e {
                                b'n' => '\n',
                                b't' => '\t',
                                b'"' => '"',
                                b'\\' => '\\',
                                _ => return err("bad escape"),
                            });
                        }
                        c => out.push(c),
                    }
                }
            }
            Some(c) if c == b'-' || c.is_ascii_digit() => {
                let neg = c == b'-';
                if neg {
                    self.pos += 1;
                }
                let hex = self.src[self.pos..].starts_with(b"0x");
                if hex {
                    self.pos += 2;
                }
                let digits = self.take_while(|c| c.is_ascii_hexdigit()).to_string();
                let magnitude = if hex {
                    u64::from_str_radix(&digits, 16)
                } else {
                    digits.parse::<u64>()
                }
                .map_err(|_| TermError(format!("bad integer `{digits}`")))?;
                let value = if neg {
                    (magnitude as i64).wrapping_neg()
                } else {
                    magnitude as i64
                };
                Ok(Term::Int(value))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self
                    .take_while(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'.')
                    .to_string();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    Ok(Term::App(name, self.terms_until(b')')?))
                } else {
                    Ok(Term::Ident(name))
                }
            }
            Some(c) => err(format!("unexpected `{}` at offset {}", c as char, self.pos)),
        }
    }
}

/// Conversion to and from the term syntax.
pub trait Textual: Sized {
    fn to_term(&self) -> Term;
    fn from_term(t: &Term) -> TermResult<Self>;

    fn render(&self) -> String {
        self.to_term().to_string()
    }

    fn parse_text(text: &str) -> TermResult<Self> {
        Self::from_term(&Term::parse(text)?)
    }
}

/// Implements [`Textual`] for a fieldless enum as bare identifiers.
#[macro_export]
macro_rules! textual_enum {
    ($ty:ty { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub fn name(&self) -> &'static str {
                match self { $(Self::$variant => $name),* }
            }

            pub fn from_name(s: &str) -> Option<Self> {
                match s { $($name => Some(Self::$variant),)* _ => None }
            }

            pub const ALL: &'static [$ty] = &[$(Self::$variant),*];
        }

        impl $crate::term::Textual for $ty {
            fn to_term(&self) -> $crate::term::Term {
                $crate::term::Term::ident(self.name())
            }

            fn from_term(t: &$crate::term::Term) -> $crate::term::TermResult<Self> {
                let name = t.as_ident()?;
                Self::from_name(name).ok_or_else(|| {
                    $crate::term::TermError(format!(
                        "unknown {} `{}`", stringify!($ty), name
                    ))
                })
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

pub fn list_of<T: Textual>(items: &[T]) -> Term {
    Term::List(items.iter().map(Textual::to_term).collect())
}

pub fn parse_list<T: Textual>(t: &Term) -> TermResult<Vec<T>> {
    t.as_list()?.iter().map(T::from_term).collect()
}

pub fn opt_term<T: Textual>(v: &Option<T>) -> Term {
    match v {
        Some(x) => Term::app("Some", vec![x.to_term()]),
        None => Term::ident("None"),
    }
}

pub fn parse_opt<T: Textual>(t: &Term) -> TermResult<Option<T>> {
    match t.as_app()? {
        ("None", []) => Ok(None),
        ("Some", [x]) => Ok(Some(T::from_term(x)?)),
        _ => err(format!("expected option, found `{t}`")),
    }
}

impl Textual for i64 {
    fn to_term(&self) -> Term {
        Term::Int(*self)
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        t.as_int()
    }
}

impl Textual for String {
    fn to_term(&self) -> Term {
        Term::Str(self.clone())
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        t.as_str().map(str::to_string)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_round_trip() {
        let text = "Sset(v3, Oaddl(v1, 4))";
        let t = Term::parse(text).unwrap();
        assert_eq!(t.to_string(), text);
    }

    #[test]
    fn literals() {
        let t = Term::parse("[@401000, $7, -0x8, \"a\\\"b\", None]").unwrap();
        assert_eq!(
            t,
            Term::List(vec![
                Term::Node(0x401000),
                Term::TypeRef(7),
                Term::Int(-8),
                Term::Str("a\"b".into()),
                Term::Ident("None".into()),
            ])
        );
        assert_eq!(t.to_string(), "[@401000, $7, -8, \"a\\\"b\", None]");
    }

    #[test]
    fn rejects_trailing_garbage() {
        assert!(Term::parse("f(1) x").is_err());
        assert!(Term::parse("f(1").is_err());
    }
}
