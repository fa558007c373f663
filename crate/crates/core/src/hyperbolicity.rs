//! Partial-hyperbolicity certificates, central Lyapunov exponents and the
//! finite-horizon mostly-contracting test.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{LogProduct, Point, SkewProductMap};
use crate::error::{invalid, Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::seed::{self, stream};

/// Unstable cone `S^u = {|v_t| ≤ α_cone |v_θ|}`: tangent vectors whose slope
/// against the horizontal is at most the aperture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeField {
    alpha_cone: f64,
}

impl ConeField {
    pub fn new(alpha_cone: f64) -> Result<Self> {
        if !(alpha_cone > 0.0 && alpha_cone.is_finite()) {
            return Err(invalid("alpha_cone", "aperture must be positive and finite"));
        }
        Ok(Self { alpha_cone })
    }

    pub fn aperture(&self) -> f64 {
        self.alpha_cone
    }

    pub fn contains_slope(&self, slope: f64) -> bool {
        slope.abs() <= self.alpha_cone
    }

    /// Slack `α_cone |v_θ| − |v_t|`; positive inside the cone.
    pub fn margin(&self, v: [f64; 2]) -> f64 {
        self.alpha_cone * v[0].abs() - v[1].abs()
    }
}

/// Smallest self-consistent aperture `sup|∂_θ h| / (d − sup ∂_t h)`, doubled.
/// Floored at `10⁻³` so product maps still get a proper cone.
pub fn auto_aperture(map: &SkewProductMap) -> ConeField {
    let b = map.derivative_bounds();
    let d = f64::from(map.base_degree());
    let a = 2.0 * b.sup_dtheta / (d - b.sup_dt);
    ConeField {
        alpha_cone: a.max(1e-3),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperbolicityReport {
    pub tau_hat: f64,
    pub n0_hat: usize,
    pub cone_invariant: bool,
    pub samples: usize,
    /// Samples where an extreme cone vector left the open cone.
    pub failures: usize,
    /// Smallest image margin, normalized by `|v_θ|` of the image.
    pub min_margin: f64,
    /// A failing sample, if any.
    pub witness: Option<Point>,
    pub aperture: f64,
}

const CHUNK: usize = 4096;
const N0_SEARCH: usize = 16;

/// Checks strict invariance `Df S^u ⊂ int S^u` at random points and measures
/// the domination rate `max(sup ∂_t h / d, 1 / d)`.
pub fn check_cone_invariance(
    map: &SkewProductMap,
    cone: ConeField,
    n_samples: usize,
    seed: u64,
) -> Result<HyperbolicityReport> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "need at least one sample"));
    }
    let d = f64::from(map.base_degree());
    let fiber = map.space().fiber_length();
    let a = cone.alpha_cone;
    let chunks: Vec<ChunkStats> = (0..n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::derived_rng(seed, stream::CONE_SAMPLES, c as u64);
            let mut st = ChunkStats::default();
            for _ in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                let p = Point::new(rng.gen::<f64>(), rng.gen::<f64>() * fiber);
                let tb = map.tangent(p);
                st.sup_dc = st.sup_dc.max(tb.dc.abs());
                for sign in [1.0, -1.0] {
                    let w = tb.apply([1.0, sign * a]);
                    let m = cone.margin(w) / w[0].abs();
                    if m < st.min_margin {
                        st.min_margin = m;
                    }
                    if m <= 0.0 {
                        st.failures += 1;
                        st.witness.get_or_insert(p);
                        break;
                    }
                }
            }
            st
        })
        .collect();
    let mut total = ChunkStats::default();
    for c in chunks {
        total.sup_dc = total.sup_dc.max(c.sup_dc);
        total.min_margin = total.min_margin.min(c.min_margin);
        total.failures += c.failures;
        if total.witness.is_none() {
            total.witness = c.witness;
        }
    }
    let tau_hat = (total.sup_dc / d).max(1.0 / d);
    // n₀: first horizon whose worst-case rate sup(∂_t h)ⁿ / dⁿ drops below 1
    let n0_hat = (0..=N0_SEARCH)
        .find(|&n| n > 0 && (total.sup_dc / d).powi(n as i32) < 1.0)
        .map_or(N0_SEARCH, |n| n - 1);
    Ok(HyperbolicityReport {
        tau_hat,
        n0_hat,
        cone_invariant: total.failures == 0,
        samples: n_samples,
        failures: total.failures,
        min_margin: total.min_margin,
        witness: total.witness,
        aperture: a,
    })
}

struct ChunkStats {
    sup_dc: f64,
    min_margin: f64,
    failures: usize,
    witness: Option<Point>,
}

impl Default for ChunkStats {
    fn default() -> Self {
        Self {
            sup_dc: 0.0,
            min_margin: f64::INFINITY,
            failures: 0,
            witness: None,
        }
    }
}

/// Birkhoff average of `log ∂_t h` with a batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub lambda_hat: f64,
    pub n: usize,
    pub x0: Point,
    /// Batch-means standard error (0 when fewer than two batches fit).
    pub stderr: f64,
}

const BATCHES: usize = 32;

/// `(1/n) Σ_{k<n} log ∂_t h(fᵏ x₀)`.
pub fn central_lyapunov(map: &SkewProductMap, x0: Point, n: usize) -> Result<ExponentEstimate> {
    if n == 0 {
        return Err(invalid("n", "horizon must be at least 1"));
    }
    let batches = BATCHES.min(n);
    let mut x = map.normalize(x0);
    let mut means = Vec::with_capacity(batches);
    let mut total = 0.0;
    for b in 0..batches {
        let len = (b + 1) * n / batches - b * n / batches;
        let mut acc = LogProduct::default();
        for _ in 0..len {
            let (next, dc) = map.step_with_dc(x);
            acc.push(dc);
            x = next;
        }
        let s = acc.total();
        total += s;
        means.push(s / len as f64);
    }
    let stderr = if batches >= 2 {
        let mean = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    } else {
        0.0
    };
    Ok(ExponentEstimate {
        lambda_hat: total / n as f64,
        n,
        x0,
        stderr,
    })
}

/// Unstable exponent `log d` (the base derivative is constant).
pub fn unstable_exponent(map: &SkewProductMap) -> f64 {
    f64::from(map.base_degree()).ln()
}

/// `∫ log(1 + α cos 2πθ) dθ`, the central exponent of Lebesgue measure on a
/// boundary circle.
pub fn boundary_exponent(alpha: f64) -> f64 {
    ((1.0 + (1.0 - alpha * alpha).sqrt()) / 2.0).ln()
}

/// A curve tangent to the unstable cone, sampled by normalized arclength.
pub trait CurveSeed: Sync {
    /// Point at arclength fraction `u ∈ [0, 1]`.
    fn point_at(&self, u: f64) -> Point;
    fn length(&self) -> f64;
    /// Largest `|dt/dθ|` along the curve.
    fn max_slope(&self) -> f64;
}

/// The horizontal circle `{t = c}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HorizontalCircle {
    pub t: f64,
}

impl CurveSeed for HorizontalCircle {
    fn point_at(&self, u: f64) -> Point {
        Point::new(u.rem_euclid(1.0), self.t)
    }

    fn length(&self) -> f64 {
        1.0
    }

    fn max_slope(&self) -> f64 {
        0.0
    }
}

/// Negativity threshold for finite-horizon exponents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Margin {
    Fixed(f64),
    /// Multiple of each estimate's own standard error.
    Stderr(f64),
}

impl Default for Margin {
    fn default() -> Self {
        Margin::Stderr(10.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MostlyContractingReport {
    pub fraction_negative: f64,
    pub n: usize,
    pub m_points: usize,
    pub margin: Margin,
    pub mean_lambda: f64,
    pub max_lambda: f64,
    pub estimates: Vec<ExponentEstimate>,
}

/// Fraction of `m_points` arclength-uniform points on `curve` whose horizon-`n`
/// central exponent is below `−margin`. Points are stratified with jitter
/// drawn from `seed`.
pub fn mostly_contracting_test(
    map: &SkewProductMap,
    curve: &dyn CurveSeed,
    n: usize,
    m_points: usize,
    margin: Margin,
    seed: u64,
) -> Result<MostlyContractingReport> {
    if !(curve.length() > 0.0) {
        return Err(Error::DegenerateCurve("curve has zero length".into()));
    }
    if m_points == 0 {
        return Err(invalid("m_points", "need at least one point"));
    }
    let cone = auto_aperture(map);
    if !cone.contains_slope(curve.max_slope()) {
        return Err(Error::Inadmissible(format!(
            "curve slope {} exceeds cone aperture {}",
            curve.max_slope(),
            cone.aperture()
        )));
    }
    let estimates = (0..m_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::derived_rng(seed, stream::CURVE_POINTS, i as u64);
            let u = (i as f64 + rng.gen::<f64>()) / m_points as f64;
            central_lyapunov(map, curve.point_at(u), n)
        })
        .collect::<Result<Vec<_>>>()?;
    let negative = estimates
        .iter()
        .filter(|e| {
            let thr = match margin {
                Margin::Fixed(m) => m,
                Margin::Stderr(k) => k * e.stderr,
            };
            e.lambda_hat < -thr
        })
        .count();
    let mean_lambda = estimates.iter().map(|e| e.lambda_hat).sum::<f64>() / m_points as f64;
    let max_lambda = estimates.iter().map(|e| e.lambda_hat).fold(f64::NEG_INFINITY, f64::max);
    Ok(MostlyContractingReport {
        fraction_negative: negative as f64 / m_points as f64,
        n,
        m_points,
        margin,
        mean_lambda,
        max_lambda,
        estimates,
    })
}

/// `∫ (1/N) log Π_{k<N} ∂_t h(fᵏ x) dμ(x)` over the atoms of `mu`.
pub fn integrated_exponent(map: &SkewProductMap, mu: &EmpiricalMeasure, block: usize) -> Result<f64> {
    if block == 0 {
        return Err(invalid("N", "block length must be at least 1"));
    }
    if mu.atoms().is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let total = mu
        .atoms()
        .iter()
        .map(|a| {
            let mut x = map.normalize(a.point);
            let mut acc = LogProduct::default();
            for _ in 0..block {
                let (next, dc) = map.step_with_dc(x);
                acc.push(dc);
                x = next;
            }
            a.weight * acc.total()
        })
        .sum::<f64>();
    Ok(total / block as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::TestDictionary;

    fn kan() -> SkewProductMap {
        SkewProductMap::kan_cylinder(3, 0.5).unwrap()
    }

    #[test]
    fn product_map_cone() {
        let f = SkewProductMap::kan_cylinder(3, 0.0).unwrap();
        let r = check_cone_invariance(&f, ConeField::new(1.0).unwrap(), 1000, 1).unwrap();
        assert!(r.cone_invariant);
        assert!((r.tau_hat - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.n0_hat, 0);
    }

    #[test]
    fn auto_aperture_is_invariant_and_thin_cone_fails() {
        let f = kan();
        let cone = auto_aperture(&f);
        let expected = 2.0 * (std::f64::consts::PI * 0.25) / 1.5;
        assert!((cone.aperture() - expected).abs() < 1e-15);
        let r = check_cone_invariance(&f, cone, 100_000, 2).unwrap();
        assert!(r.cone_invariant);
        assert!(r.tau_hat <= 0.5 + 1e-9 && r.tau_hat > 0.49);
        let thin = check_cone_invariance(&f, ConeField::new(1e-6).unwrap(), 1000, 2).unwrap();
        assert!(!thin.cone_invariant);
        let w = thin.witness.unwrap();
        let tb = f.tangent(w);
        let img = tb.apply([1.0, 1e-6]);
        let img2 = tb.apply([1.0, -1e-6]);
        assert!(img[1].abs() >= 1e-6 * img[0] || img2[1].abs() >= 1e-6 * img2[0]);
        assert!(ConeField::new(0.0).is_err());
        assert!(check_cone_invariance(&f, cone, 0, 1).is_err());
    }

    #[test]
    fn torus_cone_report() {
        let f = kan().torus_double().unwrap();
        let r = check_cone_invariance(&f, auto_aperture(&f), 10_000, 4).unwrap();
        assert!(r.cone_invariant);
        assert!(r.tau_hat <= 0.5 + 1e-9);
    }

    #[test]
    fn boundary_exponent_closed_form() {
        assert!((boundary_exponent(0.5) - (-0.069_336_464_195)).abs() < 1e-11);
        // midpoint quadrature of the defining integral
        let m = 100_000;
        let q = (0..m)
            .map(|i| (1.0 + 0.5 * (std::f64::consts::TAU * (i as f64 + 0.5) / m as f64).cos()).ln())
            .sum::<f64>()
            / m as f64;
        assert!((q - boundary_exponent(0.5)).abs() < 1e-10);
    }

    #[test]
    fn exponents_of_simple_orbits() {
        let f0 = SkewProductMap::kan_cylinder(3, 0.0).unwrap();
        let e = central_lyapunov(&f0, Point::new(0.123, 0.456), 1000).unwrap();
        assert_eq!(e.lambda_hat, 0.0);
        assert_eq!(e.stderr, 0.0);
        let fixed = central_lyapunov(&kan(), Point::new(0.0, 0.0), 100).unwrap();
        assert!((fixed.lambda_hat - 1.5f64.ln()).abs() < 1e-12);
        assert_eq!(unstable_exponent(&kan()), 3f64.ln());
        assert!(central_lyapunov(&kan(), Point::new(0.0, 0.0), 0).is_err());
        let one = central_lyapunov(&kan(), Point::new(0.2, 0.3), 1).unwrap();
        assert_eq!(one.stderr, 0.0);
    }

    #[test]
    fn exponent_is_reproducible() {
        let x = Point::new(0.31, 0.42);
        assert_eq!(central_lyapunov(&kan(), x, 5000), central_lyapunov(&kan(), x, 5000));
    }

    #[test]
    fn horizon_doubling_stays_within_noise() {
        for i in 0..5 {
            let x = Point::new(0.1 + 0.17 * i as f64, 0.2 + 0.1 * i as f64);
            let a = central_lyapunov(&kan(), x, 20_000).unwrap();
            let b = central_lyapunov(&kan(), x, 40_000).unwrap();
            assert!(b.lambda_hat <= a.lambda_hat + 3.0 * a.stderr + 1e-12);
        }
    }

    #[test]
    fn mostly_contracting_on_a_horizontal_circle() {
        let c = HorizontalCircle { t: 0.5 };
        let r = mostly_contracting_test(&kan(), &c, 10_000, 100, Margin::default(), 7).unwrap();
        assert!(r.fraction_negative >= 0.99, "{}", r.fraction_negative);
        let f0 = SkewProductMap::kan_cylinder(3, 0.0).unwrap();
        let r0 = mostly_contracting_test(&f0, &c, 1000, 20, Margin::default(), 7).unwrap();
        assert_eq!(r0.fraction_negative, 0.0);
        let tiny = mostly_contracting_test(&kan(), &c, 1, 1, Margin::default(), 7).unwrap();
        assert!(tiny.fraction_negative == 0.0 || tiny.fraction_negative == 1.0);
    }

    #[test]
    fn integrated_exponents() {
        let d = TestDictionary::new(2);
        let f = kan();
        let circle: Vec<Point> = (0..100_000).map(|i| Point::new((i as f64 + 0.5) / 1e5, 0.0)).collect();
        let mu = EmpiricalMeasure::uniform(&circle, &d).unwrap();
        assert!((integrated_exponent(&f, &mu, 1).unwrap() - boundary_exponent(0.5)).abs() < 2e-3);
        let dirac = EmpiricalMeasure::dirac(Point::new(0.0, 0.0), &d);
        for n in [1, 7] {
            assert!((integrated_exponent(&f, &dirac, n).unwrap() - 1.5f64.ln()).abs() < 1e-12);
        }
        let f0 = SkewProductMap::kan_cylinder(3, 0.0).unwrap();
        assert_eq!(integrated_exponent(&f0, &mu, 3).unwrap(), 0.0);
        let streamed = EmpiricalMeasure::from_moments(vec![0.0; d.len()], &d).unwrap();
        assert_eq!(integrated_exponent(&f, &streamed, 1), Err(Error::EmptyMeasure));
    }
}
