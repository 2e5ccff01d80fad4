use proptest::prelude::*;
use stirflow_core::braid::{burau_at_minus_one, BraidWord, Letter};
use stirflow_core::protocol::{
    build_protocol, extract_braid, set_distance, validate, StirrerConfig,
};

fn words_up_to(len: usize) -> Vec<BraidWord> {
    (0..=len).flat_map(BraidWord::all_of_length).collect()
}

#[test]
fn round_trip_all_short_words() {
    let words = words_up_to(4);
    assert_eq!(words.len(), 1 + 4 + 16 + 64 + 256);
    for w in words {
        let p = build_protocol(&w, StirrerConfig::default(), 1.0).unwrap();
        assert_eq!(p.extract_braid(64).unwrap().reduced(), w.reduced(), "{w}");
    }
}

#[test]
fn trace_is_stable_under_axis_rotation() {
    for w in words_up_to(3)
        .into_iter()
        .chain(["1 -2 1 -2 2 1".parse().unwrap()])
    {
        let p = build_protocol(&w, StirrerConfig::default(), 1.0).unwrap();
        let expected = burau_at_minus_one(&w).unwrap().trace();
        for angle in [-0.2, -0.1, 0.05, 0.1, 0.2] {
            let got = extract_braid(&p, 64, angle).unwrap();
            assert_eq!(
                burau_at_minus_one(&got).unwrap().trace(),
                expected,
                "{w} at {angle}"
            );
        }
    }
}

#[test]
fn period_closure_and_permutation_bookkeeping() {
    for w in words_up_to(4) {
        let p = build_protocol(&w, StirrerConfig::default(), 1.0).unwrap();
        let start = p.positions(0.0);
        let end = p.positions(p.period());
        assert!(set_distance(&start, &end) < 1e-12, "{w}");
        // Stirrer i sits at σ^k(i)'s initial site after k periods.
        let sigma = p.permutation();
        let mut acc = [0usize, 1, 2];
        for k in 1..=4 {
            acc = [sigma[acc[0]], sigma[acc[1]], sigma[acc[2]]];
            let now = p.positions(k as f64 * p.period() + 0.3);
            let first = p.positions(0.3);
            for i in 0..3 {
                assert!((now[i] - first[acc[i]]).norm() < 1e-12, "{w} k={k}");
            }
        }
    }
}

#[test]
fn admissibility_of_all_short_words() {
    for w in words_up_to(3) {
        let p = build_protocol(&w, StirrerConfig::default(), 1.0).unwrap();
        let r = validate(&p, 100);
        assert!(r.passed(), "{w}: {r:?}");
    }
}

fn arb_word(max: usize) -> impl Strategy<Value = BraidWord> {
    prop::collection::vec((1u8..=2, any::<bool>()), 1..=max).prop_map(|v| {
        BraidWord::new(
            v.into_iter()
                .map(|(g, inv)| Letter::new(g, inv).unwrap())
                .collect(),
        )
    })
}

proptest! {
    #[test]
    fn positions_are_c1(w in arb_word(5), frac in 0.0f64..1.0) {
        let p = build_protocol(&w, StirrerConfig::default(), 1.0).unwrap();
        let t = frac * p.period();
        let h = 1e-5;
        let (a, b) = (p.positions(t - h), p.positions(t + h));
        let v = p.velocities(t);
        for i in 0..3 {
            let fd = (b[i] - a[i]) / (2.0 * h);
            // Third derivative of the swap path is bounded by r (2π)³ π / 2.
            prop_assert!((fd - v[i]).norm() < 1e-7, "{} vs {:?}", fd.x, v[i]);
        }
    }

    #[test]
    fn round_trip_longer_words(w in arb_word(8)) {
        let p = build_protocol(&w, StirrerConfig::default(), 1.0).unwrap();
        prop_assert_eq!(p.extract_braid(64).unwrap().reduced(), w.reduced());
    }
}
