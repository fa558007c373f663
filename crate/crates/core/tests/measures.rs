use mclab_core::carriers::Carrier;
use mclab_core::measures::*;
use mclab_core::{Point, SkewProductMap};
use proptest::prelude::*;

fn kan() -> SkewProductMap {
    SkewProductMap::kan_cylinder(3, 0.5).unwrap()
}

#[test]
fn kan_has_two_boundary_measures_on_a_coarse_grid() {
    let d = TestDictionary::default();
    let r = extract_physical_measures(&kan(), &GridSpec::new(12, 1), 100_000, 0.02, 0.2, &d).unwrap();
    assert_eq!(r.n_measures(), 2, "{:?}", r.basin_fractions);
    assert_eq!(r.total(), 144);
    // each centroid sits on the analytic moments of Lebesgue on one boundary circle
    let mut matched = [false; 2];
    for m in &r.measures {
        for (k, c) in [0.0, 1.0].into_iter().enumerate() {
            if d.distance(m.moments(), &d.circle_moments(c)) < 5e-3 {
                matched[k] = true;
            }
        }
    }
    assert_eq!(matched, [true, true]);
    assert!(r.basin_fractions.iter().all(|&f| f > 0.2));
}

#[test]
fn tiny_horizon_leaves_everything_unresolved() {
    let d = TestDictionary::default();
    let r = extract_physical_measures(&kan(), &GridSpec::new(10, 0), 2, 0.02, 0.2, &d).unwrap();
    assert!(r.unresolved_fraction >= 0.95, "{}", r.unresolved_fraction);
}

#[test]
fn decoupled_product_is_reported_as_many_clusters() {
    // every horizontal circle is invariant: no finite list of measures covers the grid
    let d = TestDictionary::default();
    let f = SkewProductMap::kan_cylinder(3, 0.0).unwrap();
    let r = extract_physical_measures(&f, &GridSpec::new(50, 0), 2000, 0.02, 0.2, &d).unwrap();
    assert!(r.n_measures() > 2, "{}", r.n_measures());
    assert_eq!(r.total(), 2500);
}

#[test]
fn unresolved_fraction_does_not_grow_with_the_horizon() {
    let d = TestDictionary::default();
    let grid = GridSpec::new(16, 2);
    let mut last = f64::INFINITY;
    for n in [1_000, 4_000, 16_000] {
        let r = extract_physical_measures(&kan(), &grid, n, 0.02, 0.2, &d).unwrap();
        assert!(
            r.unresolved_fraction <= last,
            "n = {n}: {} > {last}",
            r.unresolved_fraction
        );
        last = r.unresolved_fraction;
    }
}

#[test]
fn basin_map_is_deterministic_and_consistent_with_the_report() {
    let d = TestDictionary::new(4);
    let grid = GridSpec::new(10, 9);
    let r = extract_physical_measures(&kan(), &grid, 20_000, 0.03, 0.2, &d).unwrap();
    let b = basin_map(&kan(), &grid, &r, &d).unwrap();
    assert_eq!(b, basin_map(&kan(), &grid, &r, &d).unwrap());
    for (k, &count) in r.counts.iter().enumerate() {
        assert_eq!(b.cells.iter().filter(|c| c.label == Some(k)).count(), count);
    }
    assert!(b.cells.iter().all(|c| c.converged == c.label.is_some()));

    // with a single measure every converged point carries its label
    let mut single = r.clone();
    single.measures.truncate(1);
    let b1 = basin_map(&kan(), &grid, &single, &d).unwrap();
    assert!(b1.cells.iter().all(|c| c.label == c.converged.then_some(0)));

    single.measures.clear();
    assert!(basin_map(&kan(), &grid, &single, &d).is_err());
}

#[test]
fn holonomy_between_nearby_curves_is_nearly_isometric() {
    let shape = |s: f64| {
        move |x: f64| {
            let u = x - 0.4;
            (0.06 + 0.4 * u + s * (1.0 + 3.0 * u), 0.4 + 3.0 * s)
        }
    };
    let g1 = Carrier::from_graph(0.4, 0.08, 6, shape(0.0)).unwrap();
    let mut fits = Vec::new();
    for s in [1e-3, 2e-3, 4e-3] {
        let g2 = Carrier::from_graph(0.4, 0.08, 6, shape(s)).unwrap();
        let r = holonomy_probe(&g1, &g2, &kan(), 1000).unwrap();
        assert!(r.paired_fraction > 0.99, "{r:?}");
        let c = r.c_fit.unwrap();
        assert!(r.max_jacobian_deviation <= c * r.curve_distance * (1.0 + 1e-12));
        fits.push(c);
    }
    // the envelope is linear: the fitted constant does not grow as the curves approach
    assert!(fits[0] <= 1.5 * fits[2] && fits[2] <= 1.5 * fits[0], "{fits:?}");
}

#[test]
fn curves_straddling_the_basin_boundary_do_not_all_pair() {
    let torus = kan().torus_double().unwrap();
    let g1 = Carrier::horizontal(Point::new(0.3, 0.1), 0.1, 7).unwrap();
    let g2 = Carrier::horizontal(Point::new(0.3, 0.9), 0.1, 7).unwrap();
    let r = holonomy_probe(&g1, &g2, &torus, 400).unwrap();
    assert!(r.paired_fraction < 1.0, "{r:?}");
}

fn synthetic(seed_moments: &[Vec<f64>], picks: &[(usize, f64, f64, f64)]) -> Vec<GridSample> {
    picks
        .iter()
        .enumerate()
        .map(|(index, &(c, noise, drift, pos))| {
            let mut m = seed_moments[c % seed_moments.len()].clone();
            m[1] += noise;
            GridSample {
                index,
                start: Point::new(pos, (index as f64 * 0.618).fract()),
                moments: m,
                drift,
                lambda_hat: 0.0,
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clustering_invariants(
        picks in prop::collection::vec((0usize..3, -0.1f64..0.1, 0.0f64..0.04, 0.0f64..1.0), 1..60),
        rotate in 0usize..60,
    ) {
        let d = TestDictionary::new(2);
        let centres = vec![d.circle_moments(0.0), d.circle_moments(1.0), d.circle_moments(0.5)];
        let samples = synthetic(&centres, &picks);
        let params = ExtractParams { n: 2, grid: GridSpec::new(1, 0), tol_conv: 0.02, delta_cluster: 0.2, degree: 2 };
        let r = cluster_samples(&samples, params, &d).unwrap();
        prop_assert_eq!(r.total(), samples.len());
        let sum: f64 = r.basin_fractions.iter().sum::<f64>() + r.unresolved_fraction;
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for i in 0..r.n_measures() {
            for j in i + 1..r.n_measures() {
                prop_assert!(d.distance(r.measures[i].moments(), r.measures[j].moments()) > 0.2);
            }
        }
        let mut permuted = samples.clone();
        permuted.rotate_left(rotate % samples.len());
        prop_assert_eq!(cluster_samples(&permuted, params, &d).unwrap(), r);
    }
}
