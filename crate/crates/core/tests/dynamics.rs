use std::f64::consts::TAU;

use mclab_core::{Point, SkewProductMap, Space};
use proptest::prelude::*;

/// Fiber map written out independently of the library.
fn fiber(alpha: f64, theta: f64, t: f64) -> f64 {
    t + alpha * t * (1.0 - t) * (TAU * theta).cos()
}

proptest! {
    #[test]
    fn step_matches_the_formula(alpha in 0.0..0.95f64, theta in 0.0..1.0f64, t in 0.0..=1.0f64) {
        let f = SkewProductMap::kan_cylinder(3, alpha).unwrap();
        let q = f.step(Point::new(theta, t));
        prop_assert!((q.theta - (3.0 * theta).rem_euclid(1.0)).abs() < 1e-12);
        prop_assert!((q.t - fiber(alpha, theta, t)).abs() < 1e-14);
    }

    #[test]
    fn cylinder_fiber_is_an_orientation_preserving_self_map(
        alpha in 0.0..0.95f64, theta in 0.0..1.0f64, s in 0.0..=1.0f64, u in 0.0..=1.0f64,
    ) {
        let f = SkewProductMap::kan_cylinder(3, alpha).unwrap();
        let (lo, hi) = (s.min(u), s.max(u));
        let (a, b) = (f.fiber(theta, lo), f.fiber(theta, hi));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(a <= b);
        prop_assert_eq!(f.fiber(theta, 0.0), 0.0);
        prop_assert_eq!(f.fiber(theta, 1.0), 1.0);
    }

    #[test]
    fn tangent_matches_central_differences(alpha in 0.0..0.95f64, theta in 0.01..0.99f64, t in 0.01..0.99f64) {
        let f = SkewProductMap::kan_cylinder(3, alpha).unwrap();
        let d = f.tangent(Point::new(theta, t));
        let h = 1e-6;
        let dt = (fiber(alpha, theta, t + h) - fiber(alpha, theta, t - h)) / (2.0 * h);
        let dtheta = (fiber(alpha, theta + h, t) - fiber(alpha, theta - h, t)) / (2.0 * h);
        prop_assert_eq!(d.du, 3.0);
        prop_assert!((d.dc - dt).abs() < 1e-7, "{} vs {}", d.dc, dt);
        prop_assert!((d.dcu - dtheta).abs() < 1e-7, "{} vs {}", d.dcu, dtheta);
        let b = f.derivative_bounds();
        prop_assert!(d.dc <= b.sup_dt + 1e-15 && d.dc >= b.inf_dt - 1e-15);
        prop_assert!(d.dcu.abs() <= b.sup_dtheta + 1e-15);
    }

    #[test]
    fn torus_map_commutes_with_the_mirror(alpha in 0.0..0.95f64, theta in 0.0..1.0f64, t in 0.0..2.0f64) {
        let f = SkewProductMap::kan_cylinder(3, alpha).unwrap().torus_double().unwrap();
        prop_assert_eq!(f.space(), Space::Torus);
        let p = Point::new(theta, t);
        let a = f.step(f.mirror(p));
        let b = f.mirror(f.step(p));
        let gap = (a.t - b.t).rem_euclid(2.0);
        prop_assert!(gap.min(2.0 - gap) < 1e-12);
        prop_assert!((a.theta - b.theta).abs() < 1e-12);
    }
}

#[test]
fn iterated_tangent_follows_the_chain_rule() {
    let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
    let p = Point::new(0.123, 0.456);
    let (_, v) = f.iterate_tangent(p, [0.0, 1.0], 4);
    // fiber-direction derivative of the 4-step fiber coordinate
    let h = 1e-6;
    let up = f.iterate(Point::new(p.theta, p.t + h), 4).t;
    let down = f.iterate(Point::new(p.theta, p.t - h), 4).t;
    let fd = (up - down) / (2.0 * h);
    assert_eq!(v[0], 0.0);
    assert!((v[1] - fd).abs() < 1e-6 * fd.abs().max(1.0), "{} vs {fd}", v[1]);
}

#[test]
fn orbit_agrees_with_iterate() {
    let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
    let p = Point::new(0.31, 0.7);
    let orbit = f.orbit(p, 25);
    assert_eq!(orbit.len(), 26);
    assert_eq!(orbit[25], f.iterate(p, 25));
}
