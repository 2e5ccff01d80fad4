use proptest::prelude::*;
use stirflow_core::braid::{
    burau_at_minus_one, classify, entropy_lower_bound, parse_braid, BraidWord, IntMatrix2, Letter,
    TnClass,
};

/// Independent 2×2 integer product.
fn mul(a: [[i64; 2]; 2], b: [[i64; 2]; 2]) -> [[i64; 2]; 2] {
    let mut c = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn as_array(m: &IntMatrix2) -> [[i64; 2]; 2] {
    [[m.a, m.b], [m.c, m.d]]
}

/// Reference images written out by hand: σ1 ↦ [[1,1],[0,1]], σ2 ↦ [[1,0],[-1,1]].
fn reference(word: &BraidWord) -> [[i64; 2]; 2] {
    word.letters().iter().fold([[1, 0], [0, 1]], |acc, l| {
        let m = match (l.generator(), l.is_inverse()) {
            (1, false) => [[1, 1], [0, 1]],
            (1, true) => [[1, -1], [0, 1]],
            (2, false) => [[1, 0], [-1, 1]],
            _ => [[1, 0], [1, 1]],
        };
        mul(acc, m)
    })
}

fn words_up_to(len: usize) -> Vec<BraidWord> {
    (0..=len).flat_map(BraidWord::all_of_length).collect()
}

fn arb_word(max: usize) -> impl Strategy<Value = BraidWord> {
    prop::collection::vec((1u8..=2, any::<bool>()), 0..=max).prop_map(|v| {
        BraidWord::new(
            v.into_iter()
                .map(|(g, inv)| Letter::new(g, inv).unwrap())
                .collect(),
        )
    })
}

#[test]
fn generator_images() {
    let s1 = burau_at_minus_one(&parse_braid("1").unwrap()).unwrap();
    let s2 = burau_at_minus_one(&parse_braid("2").unwrap()).unwrap();
    assert_eq!(as_array(&s1), [[1, 1], [0, 1]]);
    assert_eq!(as_array(&s2), [[1, 0], [-1, 1]]);
    let center = burau_at_minus_one(&parse_braid("1 2 1 2 1 2").unwrap()).unwrap();
    assert_eq!(as_array(&center), [[-1, 0], [0, -1]]);
}

#[test]
fn canonical_pseudo_anosov_word() {
    let w = parse_braid("1 -2").unwrap();
    let class = classify(&w).unwrap();
    assert_eq!(class.trace(), 3);
    let lambda = (3.0 + 5f64.sqrt()) / 2.0;
    match class {
        TnClass::PseudoAnosov { expansion, .. } => {
            assert!((expansion - lambda).abs() < 1e-12);
            // λ · λ⁻¹ = 1 for the smaller eigenvalue of a det-1 matrix.
            let small = (3.0 - 5f64.sqrt()) / 2.0;
            assert!((expansion * small - 1.0).abs() < 1e-12);
        }
        other => panic!("expected pA, got {other:?}"),
    }
    assert!((entropy_lower_bound(&w).unwrap() - 0.9624236501192069).abs() < 1e-12);
}

#[test]
fn exhaustive_short_words_match_reference() {
    for w in words_up_to(4) {
        let m = burau_at_minus_one(&w).unwrap();
        assert_eq!(as_array(&m), reference(&w), "{w}");
        assert_eq!(m.det(), Some(1), "{w}");
        let inv = burau_at_minus_one(&w.inverse()).unwrap();
        assert_eq!(inv, m.sl2_inverse(), "{w}");
    }
}

#[test]
fn exhaustive_homomorphism_and_conjugacy() {
    let words = words_up_to(4);
    for u in &words {
        let mu = burau_at_minus_one(u).unwrap();
        let tu = mu.trace().unwrap();
        for v in &words {
            let mv = burau_at_minus_one(v).unwrap();
            let muv = burau_at_minus_one(&u.concat(v)).unwrap();
            assert_eq!(Some(muv), mu.checked_mul(&mv), "{u} · {v}");
            let conj = v.concat(u).concat(&v.inverse());
            assert_eq!(
                burau_at_minus_one(&conj).unwrap().trace(),
                Some(tu),
                "{v} {u} {v}⁻¹"
            );
        }
    }
}

#[test]
fn finite_order_and_hold_controls() {
    let fo = parse_braid("1 2").unwrap().power(6);
    assert!(matches!(
        classify(&fo).unwrap(),
        TnClass::Parabolic { identity: true, .. }
    ));
    assert!(matches!(
        classify(&parse_braid("1 2").unwrap()).unwrap(),
        TnClass::FiniteOrder { trace: 1 }
    ));
    assert!(!classify(&BraidWord::empty()).unwrap().is_pseudo_anosov());
}

proptest! {
    #[test]
    fn homomorphism_up_to_six(u in arb_word(6), v in arb_word(6)) {
        let mu = burau_at_minus_one(&u).unwrap();
        let mv = burau_at_minus_one(&v).unwrap();
        prop_assert_eq!(Some(burau_at_minus_one(&u.concat(&v)).unwrap()), mu.checked_mul(&mv));
        prop_assert_eq!(as_array(&mu), reference(&u));
    }

    #[test]
    fn inverse_and_det(w in arb_word(12)) {
        let m = burau_at_minus_one(&w).unwrap();
        prop_assert_eq!(m.det(), Some(1));
        prop_assert_eq!(burau_at_minus_one(&w.inverse()).unwrap(), m.sl2_inverse());
        prop_assert_eq!(burau_at_minus_one(&w.reduced()).unwrap(), m);
    }

    #[test]
    fn classification_is_conjugation_invariant(g in arb_word(4), w in arb_word(4)) {
        let conj = g.concat(&w).concat(&g.inverse());
        prop_assert_eq!(classify(&conj).unwrap().trace(), classify(&w).unwrap().trace());
        prop_assert_eq!(
            classify(&conj).unwrap().is_pseudo_anosov(),
            classify(&w).unwrap().is_pseudo_anosov()
        );
    }

    #[test]
    fn display_parse_round_trip(w in arb_word(10)) {
        prop_assert_eq!(parse_braid(&w.to_string()).unwrap(), w);
    }
}
