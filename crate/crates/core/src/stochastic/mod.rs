//! Random perturbations by absolutely continuous `ε`-local noise, their
//! stationary distributions and the zero-noise limit.

pub mod simplex;

pub use simplex::{simplex_fit, simplex_fit_exhaustive, SimplexFit};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{wrap, Point, SkewProductMap, Space};
use crate::error::{invalid, Error, Result};
use crate::measures::{EmpiricalMeasure, OrbitAccumulator, PhysicalMeasureReport, TestDictionary};
use crate::seed::{self, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Perturb the fiber coordinate only.
    FiberOnly,
    /// Perturb both coordinates.
    Full,
}

/// Uniform noise on the sup-norm `ε`-box around the deterministic image.
/// On the cylinder the fiber coordinate is reflected at `0` and `1`, which
/// keeps the kernel absolutely continuous (density at most `2/(2ε)` per
/// coordinate) and the orbit inside the trapping region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseScheme {
    pub eps: f64,
    pub kind: NoiseKind,
}

impl NoiseScheme {
    /// `0 < ε ≤ 1/2`, so a single reflection always suffices.
    pub fn new(eps: f64, kind: NoiseKind) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(invalid("eps", format!("noise level must lie in (0, 0.5], got {eps}")));
        }
        Ok(Self { eps, kind })
    }
}

fn reflect_unit(t: f64) -> f64 {
    if t < 0.0 {
        -t
    } else if t > 1.0 {
        2.0 - t
    } else {
        t
    }
}

/// `f(x)` plus a uniform sample of the noise box.
pub fn random_step(map: &SkewProductMap, noise: &NoiseScheme, x: Point, rng: &mut impl Rng) -> Point {
    let y = map.step(x);
    perturb(map, noise, y, rng)
}

fn perturb(map: &SkewProductMap, noise: &NoiseScheme, y: Point, rng: &mut impl Rng) -> Point {
    let eps = noise.eps;
    let theta = match noise.kind {
        NoiseKind::FiberOnly => y.theta,
        NoiseKind::Full => wrap(y.theta + rng.gen_range(-eps..eps), 1.0),
    };
    let t = y.t + rng.gen_range(-eps..eps);
    let t = match map.space() {
        Space::Cylinder => reflect_unit(t),
        Space::Torus => wrap(t, 2.0),
    };
    let out = Point::new(theta, t);
    debug_assert!(
        circle_gap(out.theta, y.theta, 1.0) <= eps * (1.0 + 1e-12)
            && circle_gap(out.t, y.t, map.space().fiber_length()) <= eps * (1.0 + 1e-12),
        "noise left the ε-box"
    );
    out
}

fn circle_gap(a: f64, b: f64, period: f64) -> f64 {
    let d = wrap(a - b, period);
    d.min(period - d)
}

/// Kronecker sequence with the plastic-number increments, scaled to the
/// trapping region.
pub fn kronecker_starts(map: &SkewProductMap, count: usize) -> Vec<Point> {
    const G: f64 = 1.324_717_957_244_746;
    let (a1, a2) = (1.0 / G, 1.0 / (G * G));
    let height = map.space().fiber_length();
    (0..count)
        .map(|c| {
            let k = c as f64 + 1.0;
            Point::new((0.5 + a1 * k).fract(), (0.5 + a2 * k).fract() * height)
        })
        .collect()
}

/// Largest pooled sample kept as atoms (exact moments); larger runs stream.
pub const ATOM_LIMIT: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryEstimate {
    pub measure: EmpiricalMeasure,
    pub eps: f64,
    pub kind: NoiseKind,
    pub n_burn: usize,
    pub n_samp: usize,
    pub n_chains: usize,
    pub seed: u64,
    /// Standard error of the pooled moments in weak distance, from the
    /// spread of the per-chain moment vectors; absent for a single chain.
    pub stderr: Option<f64>,
}

/// Pools `n_samp` post-burn-in states of `n_chains` independent chains
/// started from [`kronecker_starts`]. Chain `c` draws from
/// `derive(seed, NOISE_CHAIN, c)`.
pub fn stationary_estimate(
    map: &SkewProductMap,
    noise: &NoiseScheme,
    n_burn: usize,
    n_samp: usize,
    n_chains: usize,
    seed: u64,
    dict: &TestDictionary,
) -> Result<StationaryEstimate> {
    if n_samp == 0 || n_chains == 0 {
        return Err(invalid("n_samp, n_chains", "need positive sample and chain counts"));
    }
    let keep_atoms = n_samp * n_chains <= ATOM_LIMIT;
    let starts = kronecker_starts(map, n_chains);
    let chains: Vec<(Vec<f64>, Vec<Point>)> = starts
        .par_iter()
        .enumerate()
        .map(|(c, &x0)| {
            let mut rng = seed::derived_rng(seed, stream::NOISE_CHAIN, c as u64);
            let mut x = x0;
            for _ in 0..n_burn {
                x = random_step(map, noise, x, &mut rng);
            }
            let mut acc = OrbitAccumulator::new(dict);
            let mut atoms = Vec::new();
            for _ in 0..n_samp {
                let (s, co) = (std::f64::consts::TAU * x.theta).sin_cos();
                acc.push(s, co, x.t);
                if keep_atoms {
                    atoms.push(x);
                }
                x = random_step(map, noise, x, &mut rng);
            }
            (acc.moments(dict), atoms)
        })
        .collect();

    let per_chain: Vec<&Vec<f64>> = chains.iter().map(|c| &c.0).collect();
    let measure = if keep_atoms {
        let atoms: Vec<Point> = chains.iter().flat_map(|c| c.1.iter().copied()).collect();
        EmpiricalMeasure::uniform(&atoms, dict)?
    } else {
        EmpiricalMeasure::from_moments(pairwise_mean(&per_chain), dict)?
    };
    let stderr = (n_chains > 1).then(|| {
        let var: f64 = per_chain
            .iter()
            .map(|m| dict.distance(m, measure.moments()).powi(2))
            .sum::<f64>()
            / (n_chains * (n_chains - 1)) as f64;
        var.sqrt()
    });
    Ok(StationaryEstimate {
        measure,
        eps: noise.eps,
        kind: noise.kind,
        n_burn,
        n_samp,
        n_chains,
        seed,
        stderr,
    })
}

/// Componentwise mean by pairwise summation in chain order.
fn pairwise_mean(rows: &[&Vec<f64>]) -> Vec<f64> {
    fn sum(rows: &[&Vec<f64>]) -> Vec<f64> {
        if rows.len() == 1 {
            return rows[0].clone();
        }
        let (a, b) = rows.split_at(rows.len() / 2);
        let (mut l, r) = (sum(a), sum(b));
        l.iter_mut().zip(&r).for_each(|(x, y)| *x += y);
        l
    }
    let n = rows.len() as f64;
    sum(rows).into_iter().map(|v| v / n).collect()
}

/// Run lengths of a zero-noise test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub kind: NoiseKind,
    pub n_burn: usize,
    pub n_samp: usize,
    pub n_chains: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroNoiseRow {
    pub eps: f64,
    /// Weak distance from `μ_ε` to the simplex of physical measures.
    pub residual: f64,
    pub alpha: Vec<f64>,
    pub n_samp: usize,
    pub stderr: Option<f64>,
}

/// Distance from `μ_ε` to the convex hull of the report's measures.
pub fn simplex_residual(
    mu: &EmpiricalMeasure,
    report: &PhysicalMeasureReport,
    dict: &TestDictionary,
) -> Result<SimplexFit> {
    if report.measures.is_empty() {
        return Err(Error::EmptyReport);
    }
    if mu.degree() != dict.max_degree() {
        return Err(Error::DictionaryMismatch {
            left: mu.degree(),
            right: dict.max_degree(),
        });
    }
    for m in &report.measures {
        if m.degree() != dict.max_degree() {
            return Err(Error::DictionaryMismatch {
                left: m.degree(),
                right: dict.max_degree(),
            });
        }
    }
    let vertices: Vec<Vec<f64>> = report.measures.iter().map(|m| m.moments().to_vec()).collect();
    simplex_fit(&vertices, mu.moments(), dict.weights())
}

/// Residuals `r(ε)` for decreasing noise levels. Every level reuses the
/// same root seed.
pub fn zero_noise_test(
    map: &SkewProductMap,
    noise_levels: &[f64],
    report: &PhysicalMeasureReport,
    params: &ChainParams,
    dict: &TestDictionary,
) -> Result<Vec<ZeroNoiseRow>> {
    if report.measures.is_empty() {
        return Err(Error::EmptyReport);
    }
    if noise_levels.len() < 2 || noise_levels.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("noise_levels", "need at least two strictly decreasing levels"));
    }
    noise_levels
        .iter()
        .map(|&eps| {
            let noise = NoiseScheme::new(eps, params.kind)?;
            let est = stationary_estimate(
                map,
                &noise,
                params.n_burn,
                params.n_samp,
                params.n_chains,
                params.seed,
                dict,
            )?;
            let fit = simplex_residual(&est.measure, report, dict)?;
            Ok(ZeroNoiseRow {
                eps,
                residual: fit.residual,
                alpha: fit.alpha,
                n_samp: params.n_samp,
                stderr: est.stderr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kan() -> SkewProductMap {
        SkewProductMap::kan_cylinder(3, 0.5).unwrap()
    }

    #[test]
    fn tiny_noise_is_the_deterministic_step() {
        let f = kan();
        let noise = NoiseScheme::new(1e-300, NoiseKind::Full).unwrap();
        let mut rng = seed::rng(1);
        let x = Point::new(0.3, 0.4);
        let y = random_step(&f, &noise, x, &mut rng);
        assert_eq!(y, f.step(x));
        assert!(NoiseScheme::new(0.0, NoiseKind::Full).is_err());
        assert!(NoiseScheme::new(0.6, NoiseKind::Full).is_err());
    }

    #[test]
    fn reflection_at_the_boundary() {
        let f = kan();
        let noise = NoiseScheme::new(0.05, NoiseKind::FiberOnly).unwrap();
        let mut rng = seed::rng(2);
        let x = Point::new(0.2, 0.0);
        for _ in 0..10_000 {
            let y = random_step(&f, &noise, x, &mut rng);
            assert!(y.t >= 0.0 && y.t <= 0.05);
            assert_eq!(y.theta, f.base(0.2));
        }
    }

    #[test]
    fn torus_noise_wraps() {
        let f = kan().torus_double().unwrap();
        let noise = NoiseScheme::new(0.1, NoiseKind::Full).unwrap();
        let mut rng = seed::rng(3);
        let mut x = Point::new(0.0, 0.0);
        for _ in 0..10_000 {
            x = random_step(&f, &noise, x, &mut rng);
            assert!((0.0..1.0).contains(&x.theta) && (0.0..2.0).contains(&x.t));
        }
    }

    #[test]
    fn single_atom_estimate() {
        let f = kan();
        let d = TestDictionary::new(3);
        let noise = NoiseScheme::new(0.01, NoiseKind::FiberOnly).unwrap();
        let e = stationary_estimate(&f, &noise, 0, 1, 1, 7, &d).unwrap();
        assert_eq!(e.measure.atoms().len(), 1);
        let p = kronecker_starts(&f, 1)[0];
        assert_eq!(e.measure.atoms()[0].point, p);
        assert!(d.distance(e.measure.moments(), &d.eval(p)) < 1e-15);
        assert_eq!(e.stderr, None);
    }

    #[test]
    fn estimates_are_reproducible() {
        let f = kan();
        let d = TestDictionary::new(4);
        let noise = NoiseScheme::new(0.02, NoiseKind::Full).unwrap();
        let a = stationary_estimate(&f, &noise, 100, 2000, 4, 11, &d).unwrap();
        let b = stationary_estimate(&f, &noise, 100, 2000, 4, 11, &d).unwrap();
        assert_eq!(a, b);
        assert!(a.measure.is_streamed() && a.stderr.unwrap() > 0.0);
        let c = stationary_estimate(&f, &noise, 100, 2000, 4, 12, &d).unwrap();
        assert_ne!(a.measure.moments(), c.measure.moments());
    }

    #[test]
    fn pairwise_mean_matches_plain_mean() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, 1.0]).collect();
        let refs: Vec<&Vec<f64>> = rows.iter().collect();
        assert_eq!(pairwise_mean(&refs), vec![3.0, 1.0]);
    }
}
