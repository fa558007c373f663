use std::f64::consts::TAU;

use mclab_core::hyperbolicity::{
    auto_aperture, boundary_exponent, central_lyapunov, check_cone_invariance, unstable_exponent,
};
use mclab_core::{Point, SkewProductMap};
use proptest::prelude::*;

/// Midpoint rule for the mean of `log(1 + α cos 2πθ)` over the circle.
fn quadrature(alpha: f64) -> f64 {
    let m = 200_000;
    (0..m)
        .map(|k| (1.0 + alpha * (TAU * (k as f64 + 0.5) / m as f64).cos()).ln())
        .sum::<f64>()
        / m as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn boundary_exponent_matches_quadrature(alpha in 0.0..0.95f64) {
        prop_assert!((boundary_exponent(alpha) - quadrature(alpha)).abs() < 1e-10);
        prop_assert!(boundary_exponent(alpha) <= 0.0);
    }

    #[test]
    fn auto_aperture_cone_is_invariant(alpha in 0.0..0.95f64, seed in any::<u64>()) {
        let f = SkewProductMap::kan_cylinder(3, alpha).unwrap();
        let r = check_cone_invariance(&f, auto_aperture(&f), 2000, seed).unwrap();
        prop_assert!(r.cone_invariant);
        prop_assert!(r.tau_hat < 1.0);
    }
}

#[test]
fn unstable_exponent_is_log_degree() {
    for d in [2, 3, 5] {
        let f = SkewProductMap::kan_cylinder(d, 0.3).unwrap();
        assert_eq!(unstable_exponent(&f), f64::from(d).ln());
    }
}

#[test]
fn boundary_orbits_converge_to_the_closed_form() {
    let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
    let target = boundary_exponent(0.5);
    for t in [0.0, 1.0] {
        let e = central_lyapunov(&f, Point::new(0.1, t), 200_000).unwrap();
        assert!(
            (e.lambda_hat - target).abs() < 5e-3,
            "t = {t}: {} vs {target}",
            e.lambda_hat
        );
    }
}

#[test]
fn product_map_has_zero_central_exponent() {
    let f = SkewProductMap::kan_cylinder(3, 0.0).unwrap();
    let e = central_lyapunov(&f, Point::new(0.3, 0.4), 10_000).unwrap();
    assert_eq!(e.lambda_hat, 0.0);
}
