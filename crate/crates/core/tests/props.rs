use proptest::prelude::*;

use supdec::provenance::{Monomial, Polynomial, Token};
use supdec::select::sanitize;
use supdec::store::Value;
use supdec::term::Textual;

fn poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0u64..5, 0..3), 1u64..4), 0..4).prop_map(|terms| {
        terms.into_iter().fold(Polynomial::zero(), |acc, (toks, c)| {
            acc.plus(&Polynomial::from_monomial(Monomial::from_tokens(toks.into_iter().map(Token).collect()), c))
        })
    })
}

proptest! {
    #[test]
    fn sanitize_gives_c_identifiers(sym in "[.$@A-Za-z0-9_]{0,12}") {
        let s = sanitize(&sym);
        prop_assert!(!s.is_empty());
        prop_assert!(!s.starts_with(|c: char| c.is_ascii_digit()));
        prop_assert!(s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
        prop_assert_eq!(sanitize(&s), s.clone());
    }

    #[test]
    fn polynomial_distributes(a in poly(), b in poly(), c in poly()) {
        prop_assert_eq!(a.times(&b.plus(&c)), a.times(&b).plus(&a.times(&c)));
    }

    #[test]
    fn derivation_count_is_a_homomorphism(a in poly(), b in poly()) {
        prop_assert_eq!(a.plus(&b).derivation_count(), a.derivation_count() + b.derivation_count());
        prop_assert_eq!(a.times(&b).derivation_count(), a.derivation_count() * b.derivation_count());
    }

    #[test]
    fn addition_is_monotone(a in poly(), b in poly()) {
        prop_assert!(a.leq(&a.plus(&b)));
    }

    #[test]
    fn value_text_round_trip(i in any::<i64>(), s in "[a-z_.]{1,8}") {
        let t = Value::Tuple(vec![Value::Int(i), Value::text(&s)]);
        prop_assert_eq!(Value::parse_text(&t.render()).unwrap(), t);
    }
}
