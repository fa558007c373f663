use mclab_core::pliss::{cocycle_lower_bound, detect_h, pliss_select, pliss_select_with, LastIndex, PlissInput};
use mclab_core::{Point, SkewProductMap};
use proptest::prelude::*;

/// Quadratic oracle: `i` is selected iff every forward window average from
/// `i` stays at or below `A + ε`.
fn brute_force(a: &[f64], level: f64) -> Vec<usize> {
    (0..a.len())
        .filter(|&i| {
            let mut s = 0.0;
            (i..a.len()).all(|n| {
                s += a[n];
                s <= level * (n + 1 - i) as f64
            })
        })
        .collect()
}

fn input() -> impl Strategy<Value = PlissInput> {
    (prop::collection::vec(-1.0..3.0f64, 1..60), 0.0..1.0f64, 0.01..1.0f64).prop_map(|(a, slack, eps)| {
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        PlissInput::new(a, -1.0, mean + slack + 1e-9, eps)
    })
}

proptest! {
    #[test]
    fn selection_matches_the_quadratic_oracle(inp in input()) {
        let sel = pliss_select(&inp).unwrap();
        let level = inp.big_a + inp.eps;
        // the oracle compares sums rather than averages; skip near-ties
        let tie = (0..inp.a.len()).any(|i| {
            let mut s = 0.0;
            (i..inp.a.len()).any(|n| {
                s += inp.a[n] - level;
                s.abs() < 1e-9
            })
        });
        prop_assume!(!tie);
        prop_assert_eq!(&sel.indices, &brute_force(&inp.a, level));
    }

    #[test]
    fn selection_meets_the_count_bound(inp in input()) {
        let sel = pliss_select(&inp).unwrap();
        prop_assert!(sel.indices.len() as f64 >= sel.bound - 1e-9);
        prop_assert!(sel.indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn strict_reading_only_drops_the_last_index(inp in input()) {
        let k = inp.a.len();
        let loose = pliss_select(&inp).unwrap().indices;
        let strict = pliss_select_with(&inp, LastIndex::Excluded).unwrap().indices;
        let expected: Vec<usize> = loose.into_iter().filter(|&i| i + 1 < k).collect();
        prop_assert_eq!(strict, expected);
    }
}

#[test]
fn membership_depth_grows_with_the_tolerance() {
    let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
    let h = cocycle_lower_bound(&f);
    assert!((h - 0.5f64.ln()).abs() < 1e-8);
    let x = Point::new(0.2, 0.3);
    let mut last = 0;
    for eps in [0.0, 0.01, 0.05, 0.2] {
        let m = detect_h(&f, x, 20, -0.0693, eps, 50).unwrap();
        assert!(m.passed_blocks >= last, "eps {eps}: {} < {last}", m.passed_blocks);
        assert_eq!(m.member, m.passed_blocks == 50);
        last = m.passed_blocks;
    }
}
