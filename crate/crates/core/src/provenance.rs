//! Commutative semirings used to annotate facts.
//!
//! The central carrier is [`Polynomial`], the free commutative semiring
//! ℕ[X] over provenance [`Token`]s: a monomial is one derivation path (the
//! multiset of base facts it used) and a sum collects alternative
//! derivations. [`SemiringValue`] wraps it together with the Boolean and
//! counting semirings so a whole store can be evaluated under any of them,
//! and [`eval_hom`] is the homomorphism that maps polynomials into the
//! coarser semirings.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

/// Default maximum number of terms a polynomial keeps before it is capped.
pub const DEFAULT_TERM_CAP: usize = 4096;

static TERM_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_TERM_CAP);

/// Sets the process-wide term cap used by `plus`/`times`.
pub fn set_term_cap(cap: usize) {
    TERM_CAP.store(cap.max(1), Ordering::Relaxed);
}

pub fn term_cap() -> usize {
    TERM_CAP.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvenanceError {
    #[error("semiring mismatch: cannot combine {0} with {1}")]
    Mixed(SemiringTag, SemiringTag),
    #[error("valuation has no value for token {0}")]
    MissingToken(Token),
    #[error("valuation for token {token} is in {found}, expected {expected}")]
    WrongTarget {
        token: Token,
        found: SemiringTag,
        expected: SemiringTag,
    },
    #[error("cannot parse annotation `{0}`")]
    Parse(String),
}

/// Identifies one extensional base fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(pub u64);

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// A multiset of tokens kept sorted, so equality is structural.
///
/// Ordered by degree, then by the sorted token sequence. Multiplying both
/// sides by the same monomial preserves this order, which lets a capped
/// product be built from its smallest terms only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<Token>);

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Monomial {
    pub fn unit() -> Self {
        Monomial(Vec::new())
    }

    pub fn from_tokens(mut tokens: Vec<Token>) -> Self {
        tokens.sort_unstable();
        Monomial(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiset union; duplicates are kept.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            if self.0[i] <= other.0[j] {
                out.push(self.0[i]);
                i += 1;
            } else {
                out.push(other.0[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("·")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Element of ℕ[X].
///
/// `capped` records that the term cap was hit and some monomials were
/// dropped; `saturated` records a coefficient that reached `u64::MAX`.
/// Neither flag affects whether the polynomial is zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, u64>,
    capped: bool,
    saturated: bool,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_monomial(Monomial::unit(), 1)
    }

    pub fn from_token(t: Token) -> Self {
        Self::from_monomial(Monomial(vec![t]), 1)
    }

    pub fn from_monomial(m: Monomial, coefficient: u64) -> Self {
        let mut terms = BTreeMap::new();
        if coefficient > 0 {
            terms.insert(m, coefficient);
        }
        Polynomial {
            terms,
            capped: false,
            saturated: false,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_capped(&self) -> bool {
        self.capped
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, u64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn coefficient(&self, m: &Monomial) -> u64 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    /// Sum of all coefficients; the number of recorded derivations.
    pub fn derivation_count(&self) -> u64 {
        self.terms
            .values()
            .fold(0u64, |acc, c| acc.saturating_add(*c))
    }

    fn add_term(&mut self, m: Monomial, c: u64) {
        let entry = self.terms.entry(m).or_insert(0);
        let (sum, overflow) = entry.overflowing_add(c);
        if overflow {
            *entry = u64::MAX;
            self.saturated = true;
        } else {
            *entry = sum;
        }
    }

    fn enforce_cap(&mut self, cap: usize) {
        while self.terms.len() > cap {
            self.terms.pop_last();
            self.capped = true;
        }
    }

    pub fn plus(&self, other: &Polynomial) -> Polynomial {
        self.plus_with_cap(other, term_cap())
    }

    pub fn plus_with_cap(&self, other: &Polynomial, cap: usize) -> Polynomial {
        let mut out = self.clone();
        out.capped |= other.capped;
        out.saturated |= other.saturated;
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out.enforce_cap(cap);
        out
    }

    pub fn times(&self, other: &Polynomial) -> Polynomial {
        self.times_with_cap(other, term_cap())
    }

    /// Product keeping the `cap` smallest monomials. Rows `a_i · b_j` are
    /// ascending in `j`, so a heap merge yields products in order and stops
    /// once `cap` distinct monomials are complete.
    pub fn times_with_cap(&self, other: &Polynomial, cap: usize) -> Polynomial {
        let mut out = Polynomial {
            terms: BTreeMap::new(),
            capped: self.capped || other.capped,
            saturated: self.saturated || other.saturated,
        };
        let a: Vec<(&Monomial, u64)> = self.terms().collect();
        let b: Vec<(&Monomial, u64)> = other.terms().collect();
        if a.is_empty() || b.is_empty() {
            return out;
        }
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((a[0].0.mul(b[0].0), 0usize, 0usize)));
        while let Some(Reverse((m, i, j))) = heap.pop() {
            if out.terms.len() == cap && !out.terms.contains_key(&m) {
                out.capped = true;
                break;
            }
            if j + 1 < b.len() {
                heap.push(Reverse((a[i].0.mul(b[j + 1].0), i, j + 1)));
            }
            if j == 0 && i + 1 < a.len() {
                heap.push(Reverse((a[i + 1].0.mul(b[0].0), i + 1, 0)));
            }
            let (c, overflow) = a[i].1.overflowing_mul(b[j].1);
            if overflow {
                out.saturated = true;
            }
            out.add_term(m, if overflow { u64::MAX } else { c });
        }
        out
    }

    /// Natural order of ℕ[X]: coefficient-wise `≤` on every monomial.
    ///
    /// A capped right-hand side has lost monomials, so against it only the
    /// support is compared.
    pub fn leq(&self, other: &Polynomial) -> bool {
        if other.capped {
            return self.is_zero() || !other.is_zero();
        }
        self.terms
            .iter()
            .all(|(m, c)| other.coefficient(m) >= *c)
    }

    /// `other - self` when `self ≤ other`; monomials are subtracted
    /// coefficient-wise.
    pub fn difference(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial {
            terms: BTreeMap::new(),
            capped: other.capped,
            saturated: other.saturated,
        };
        for (m, c) in &other.terms {
            let d = c.saturating_sub(self.coefficient(m));
            if d > 0 {
                out.terms.insert(m.clone(), d);
            }
        }
        out
    }

    fn scale(&self, n: u64) -> Polynomial {
        if n == 0 {
            return Polynomial::zero();
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            let (v, overflow) = c.overflowing_mul(n);
            if overflow {
                *c = u64::MAX;
                out.saturated = true;
            } else {
                *c = v;
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            f.write_str("0")?;
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            match (*c, m.is_unit()) {
                (c, true) => write!(f, "{c}")?,
                (1, false) => write!(f, "{m}")?,
                (c, false) => write!(f, "{c}·{m}")?,
            }
        }
        if self.capped {
            f.write_str(" [capped]")?;
        }
        if self.saturated {
            f.write_str(" [saturated]")?;
        }
        Ok(())
    }
}

impl FromStr for Polynomial {
    type Err = ProvenanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ProvenanceError::Parse(s.to_string());
        let mut body = s.trim();
        let mut capped = false;
        let mut saturated = false;
        loop {
            if let Some(rest) = body.strip_suffix("[saturated]") {
                saturated = true;
                body = rest.trim_end();
            } else if let Some(rest) = body.strip_suffix("[capped]") {
                capped = true;
                body = rest.trim_end();
            } else {
                break;
            }
        }
        let mut p = Polynomial::zero();
        if body != "0" {
            for term in body.split(" + ") {
                let mut coefficient = 1u64;
                let mut tokens = Vec::new();
                for (i, factor) in term.trim().split('·').enumerate() {
                    if let Some(id) = factor.strip_prefix('x') {
                        tokens.push(Token(id.parse().map_err(|_| err())?));
                    } else if i == 0 {
                        coefficient = factor.parse().map_err(|_| err())?;
                    } else {
                        return Err(err());
                    }
                }
                if coefficient == 0 {
                    return Err(err());
                }
                p.add_term(Monomial::from_tokens(tokens), coefficient);
            }
        }
        p.capped = capped;
        p.saturated |= saturated;
        Ok(p)
    }
}

/// Which semiring a value, store or run lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SemiringTag {
    Bool,
    Count,
    Prov,
}

impl fmt::Display for SemiringTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SemiringTag::Bool => "bool",
            SemiringTag::Count => "count",
            SemiringTag::Prov => "prov",
        })
    }
}

impl FromStr for SemiringTag {
    type Err = ProvenanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bool" => Ok(SemiringTag::Bool),
            "count" => Ok(SemiringTag::Count),
            "prov" => Ok(SemiringTag::Prov),
            _ => Err(ProvenanceError::Parse(s.to_string())),
        }
    }
}

/// A value in one of the supported semirings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SemiringValue {
    Bool(bool),
    /// Saturating natural number.
    Count(u64),
    Poly(Polynomial),
}

impl SemiringValue {
    pub fn zero(tag: SemiringTag) -> Self {
        match tag {
            SemiringTag::Bool => SemiringValue::Bool(false),
            SemiringTag::Count => SemiringValue::Count(0),
            SemiringTag::Prov => SemiringValue::Poly(Polynomial::zero()),
        }
    }

    pub fn one(tag: SemiringTag) -> Self {
        match tag {
            SemiringTag::Bool => SemiringValue::Bool(true),
            SemiringTag::Count => SemiringValue::Count(1),
            SemiringTag::Prov => SemiringValue::Poly(Polynomial::one()),
        }
    }

    /// The annotation given to a fresh extensional fact.
    pub fn base(tag: SemiringTag, token: Token) -> Self {
        match tag {
            SemiringTag::Prov => SemiringValue::Poly(Polynomial::from_token(token)),
            _ => SemiringValue::one(tag),
        }
    }

    pub fn tag(&self) -> SemiringTag {
        match self {
            SemiringValue::Bool(_) => SemiringTag::Bool,
            SemiringValue::Count(_) => SemiringTag::Count,
            SemiringValue::Poly(_) => SemiringTag::Prov,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SemiringValue::Bool(b) => !b,
            SemiringValue::Count(n) => *n == 0,
            SemiringValue::Poly(p) => p.is_zero(),
        }
    }

    pub fn as_poly(&self) -> Option<&Polynomial> {
        match self {
            SemiringValue::Poly(p) => Some(p),
            _ => None,
        }
    }

    pub fn plus(&self, other: &SemiringValue) -> Result<SemiringValue, ProvenanceError> {
        Ok(match (self, other) {
            (SemiringValue::Bool(a), SemiringValue::Bool(b)) => SemiringValue::Bool(*a || *b),
            (SemiringValue::Count(a), SemiringValue::Count(b)) => {
                SemiringValue::Count(a.saturating_add(*b))
            }
            (SemiringValue::Poly(a), SemiringValue::Poly(b)) => SemiringValue::Poly(a.plus(b)),
            _ => return Err(ProvenanceError::Mixed(self.tag(), other.tag())),
        })
    }

    pub fn times(&self, other: &SemiringValue) -> Result<SemiringValue, ProvenanceError> {
        Ok(match (self, other) {
            (SemiringValue::Bool(a), SemiringValue::Bool(b)) => SemiringValue::Bool(*a && *b),
            (SemiringValue::Count(a), SemiringValue::Count(b)) => {
                SemiringValue::Count(a.saturating_mul(*b))
            }
            (SemiringValue::Poly(a), SemiringValue::Poly(b)) => SemiringValue::Poly(a.times(b)),
            _ => return Err(ProvenanceError::Mixed(self.tag(), other.tag())),
        })
    }

    /// Natural order: `a ≤ b` iff `b = a ⊕ c` for some `c`.
    pub fn leq(&self, other: &SemiringValue) -> Result<bool, ProvenanceError> {
        Ok(match (self, other) {
            (SemiringValue::Bool(a), SemiringValue::Bool(b)) => !a || *b,
            (SemiringValue::Count(a), SemiringValue::Count(b)) => a <= b,
            (SemiringValue::Poly(a), SemiringValue::Poly(b)) => a.leq(b),
            _ => return Err(ProvenanceError::Mixed(self.tag(), other.tag())),
        })
    }

    /// The part of `other` not already in `self`, for `self ≤ other`.
    ///
    /// Booleans have no subtraction; the increment of `false → true` is
    /// `true`, and anything else is zero.
    pub fn increment_to(&self, other: &SemiringValue) -> Result<SemiringValue, ProvenanceError> {
        Ok(match (self, other) {
            (SemiringValue::Bool(a), SemiringValue::Bool(b)) => SemiringValue::Bool(!a && *b),
            (SemiringValue::Count(a), SemiringValue::Count(b)) => {
                SemiringValue::Count(b.saturating_sub(*a))
            }
            (SemiringValue::Poly(a), SemiringValue::Poly(b)) => {
                SemiringValue::Poly(a.difference(b))
            }
            _ => return Err(ProvenanceError::Mixed(self.tag(), other.tag())),
        })
    }

    /// `n`-fold sum of `self`.
    pub fn scale(&self, n: u64) -> SemiringValue {
        match self {
            SemiringValue::Bool(b) => SemiringValue::Bool(*b && n > 0),
            SemiringValue::Count(c) => SemiringValue::Count(c.saturating_mul(n)),
            SemiringValue::Poly(p) => SemiringValue::Poly(p.scale(n)),
        }
    }

    pub fn parse(tag: SemiringTag, s: &str) -> Result<SemiringValue, ProvenanceError> {
        let s = s.trim();
        match tag {
            SemiringTag::Bool => match s {
                "true" => Ok(SemiringValue::Bool(true)),
                "false" => Ok(SemiringValue::Bool(false)),
                _ => Err(ProvenanceError::Parse(s.to_string())),
            },
            SemiringTag::Count => s
                .parse()
                .map(SemiringValue::Count)
                .map_err(|_| ProvenanceError::Parse(s.to_string())),
            SemiringTag::Prov => s.parse().map(SemiringValue::Poly),
        }
    }
}

impl fmt::Display for SemiringValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemiringValue::Bool(b) => write!(f, "{b}"),
            SemiringValue::Count(n) => write!(f, "{n}"),
            SemiringValue::Poly(p) => write!(f, "{p}"),
        }
    }
}

/// Sum of two provenance polynomials.
pub fn plus(p: &Polynomial, q: &Polynomial) -> Polynomial {
    p.plus(q)
}

pub fn times(p: &Polynomial, q: &Polynomial) -> Polynomial {
    p.times(q)
}

pub fn from_token(t: Token) -> Polynomial {
    Polynomial::from_token(t)
}

pub fn is_zero(v: &SemiringValue) -> bool {
    v.is_zero()
}

/// The universal homomorphism `h_v : ℕ[X] → K` extending the valuation `v`.
pub fn eval_hom<F>(
    p: &Polynomial,
    valuation: F,
    target: SemiringTag,
) -> Result<SemiringValue, ProvenanceError>
where
    F: Fn(Token) -> Option<SemiringValue>,
{
    let mut acc = SemiringValue::zero(target);
    for (m, c) in p.terms() {
        let mut term = SemiringValue::one(target);
        for &t in m.tokens() {
            let v = valuation(t).ok_or(ProvenanceError::MissingToken(t))?;
            if v.tag() != target {
                return Err(ProvenanceError::WrongTarget {
                    token: t,
                    found: v.tag(),
                    expected: target,
                });
            }
            term = term.times(&v)?;
        }
        acc = acc.plus(&term.scale(c))?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u64) -> Polynomial {
        from_token(Token(i))
    }

    #[test]
    fn generator_and_like_terms() {
        assert_eq!(x(1).to_string(), "x1");
        assert_eq!(plus(&x(1), &x(1)).to_string(), "2·x1");
        assert_eq!(times(&x(1), &x(2)).to_string(), "x1·x2");
        assert_eq!(plus(&times(&x(1), &x(2)), &x(3)).to_string(), "x3 + x1·x2");
    }

    #[test]
    fn capped_product_keeps_smallest_terms() {
        let a = (0..6).fold(Polynomial::one(), |acc, i| acc.plus(&x(i)));
        let b = (3..9).fold(x(1), |acc, i| acc.plus(&times(&x(i), &x(i + 1))));
        let mut full = a.times_with_cap(&b, usize::MAX);
        assert!(!full.is_capped());
        for cap in [1, 5, 17, full.len()] {
            let mut want = full.clone();
            want.enforce_cap(cap);
            assert_eq!(a.times_with_cap(&b, cap), want, "cap {cap}");
        }
        full.enforce_cap(full.len() + 1);
        assert_eq!(a.times_with_cap(&b, full.len() + 1), full);
    }

    #[test]
    fn identities_and_annihilation() {
        let p = plus(&x(4), &times(&x(2), &x(9)));
        assert_eq!(plus(&Polynomial::zero(), &p), p);
        assert_eq!(times(&Polynomial::one(), &p), p);
        assert!(times(&p, &Polynomial::zero()).is_zero());
    }

    #[test]
    fn distributes_over_sum() {
        let lhs = times(&plus(&x(1), &x(2)), &x(3));
        assert_eq!(lhs.to_string(), "x1·x3 + x2·x3");
    }

    #[test]
    fn repeated_tokens_are_kept() {
        let sq = times(&x(5), &x(5));
        assert_eq!(sq.to_string(), "x5·x5");
    }

    #[test]
    fn zero_tests() {
        assert!(is_zero(&SemiringValue::Poly(Polynomial::zero())));
        assert!(!is_zero(&SemiringValue::Poly(x(1))));
        assert!(is_zero(&SemiringValue::Count(0)));
        assert!(is_zero(&SemiringValue::Bool(false)));
    }

    #[test]
    fn homomorphism_examples() {
        let p = plus(&times(&x(1), &x(2)), &x(3));
        let counted = eval_hom(&p, |_| Some(SemiringValue::Count(1)), SemiringTag::Count).unwrap();
        assert_eq!(counted, SemiringValue::Count(2));

        let q = times(&x(1), &x(2));
        let b = eval_hom(
            &q,
            |t| Some(SemiringValue::Bool(t == Token(1))),
            SemiringTag::Bool,
        )
        .unwrap();
        assert_eq!(b, SemiringValue::Bool(false));
    }

    #[test]
    fn missing_token_is_named() {
        let err = eval_hom(&x(7), |_| None, SemiringTag::Bool).unwrap_err();
        assert_eq!(err, ProvenanceError::MissingToken(Token(7)));
        assert!(err.to_string().contains("x7"));
    }

    #[test]
    fn mixed_semirings_are_rejected() {
        let a = SemiringValue::Bool(true);
        let b = SemiringValue::Count(3);
        assert!(a.plus(&b).is_err());
        assert!(a.times(&b).is_err());
    }

    #[test]
    fn cap_keeps_smallest_monomials_and_flags() {
        let mut p = Polynomial::zero();
        for i in 0..10 {
            p = p.plus_with_cap(&x(i), 4);
        }
        assert!(p.is_capped());
        assert_eq!(p.len(), 4);
        assert_eq!(p.to_string(), "x0 + x1 + x2 + x3 [capped]");
        assert!(!p.is_zero());
    }

    #[test]
    fn coefficients_saturate() {
        let big = Polynomial::from_monomial(Monomial::unit(), u64::MAX - 1);
        let s = big.plus(&Polynomial::from_monomial(Monomial::unit(), 5));
        assert!(s.is_saturated());
        assert_eq!(s.coefficient(&Monomial::unit()), u64::MAX);
    }

    #[test]
    fn render_parse_round_trip() {
        let p = plus(
            &times(&times(&x(3), &x(7)), &Polynomial::from_monomial(Monomial::unit(), 2)),
            &plus(&x(2), &Polynomial::one()),
        );
        let text = p.to_string();
        assert_eq!(text, "1 + x2 + 2·x3·x7");
        assert_eq!(text.parse::<Polynomial>().unwrap(), p);
        assert_eq!("0".parse::<Polynomial>().unwrap(), Polynomial::zero());
    }
}
