//! Trigonometric test functions metrizing the weak topology.
//!
//! The dictionary of degree `p` holds the constant function and, for every
//! frequency pair `(k, l)` in the half plane `l > 0` or `l = 0, k > 0` with
//! `|k|, |l| ≤ p`, the pair `cos`, `sin` of `2π(kθ + l t / 2)`. The fiber
//! period is 2 for both phase spaces, so the two boundary circles of the
//! cylinder are told apart by odd `l`. Degree 8 gives 289 functions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dynamics::Point;

pub const DEFAULT_DEGREE: usize = 8;

/// Fiber period used by the dictionary.
pub const FIBER_PERIOD: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestDictionary {
    max_degree: usize,
    pairs: Vec<(i32, i32)>,
    weights: Vec<f64>,
}

impl Default for TestDictionary {
    fn default() -> Self {
        Self::new(DEFAULT_DEGREE)
    }
}

impl TestDictionary {
    pub fn new(max_degree: usize) -> Self {
        let p = max_degree as i32;
        let mut pairs = Vec::new();
        for k in 1..=p {
            pairs.push((k, 0));
        }
        for l in 1..=p {
            for k in -p..=p {
                pairs.push((k, l));
            }
        }
        let mut weights = Vec::with_capacity(1 + 2 * pairs.len());
        weights.push(1.0);
        for &(k, l) in &pairs {
            let w = 1.0 / f64::from(1 + k * k + l * l);
            weights.push(w);
            weights.push(w);
        }
        Self {
            max_degree,
            pairs,
            weights,
        }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of real test functions.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pairs(&self) -> &[(i32, i32)] {
        &self.pairs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Human-readable label of function `i`, e.g. `cos(2,-1)`.
    pub fn label(&self, i: usize) -> String {
        if i == 0 {
            return "const".to_string();
        }
        let (k, l) = self.pairs[(i - 1) / 2];
        if (i - 1) % 2 == 0 {
            format!("cos({k},{l})")
        } else {
            format!("sin({k},{l})")
        }
    }

    /// Weighted Euclidean distance between moment vectors.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Values of all test functions at `p`, written into `out`.
    pub fn eval_into(&self, p: Point, out: &mut [f64]) {
        let deg = self.max_degree;
        let (zt_re, zt_im) = powers((PI * p.t).sin_cos(), deg);
        let (zb_re, zb_im) = powers((2.0 * PI * p.theta).sin_cos(), deg);
        out[0] = 1.0;
        for (j, &(k, l)) in self.pairs.iter().enumerate() {
            let ka = k.unsigned_abs() as usize;
            let (br, bi) = if k >= 0 {
                (zb_re[ka], zb_im[ka])
            } else {
                (zb_re[ka], -zb_im[ka])
            };
            let (tr, ti) = (zt_re[l as usize], zt_im[l as usize]);
            out[1 + 2 * j] = br * tr - bi * ti;
            out[2 + 2 * j] = br * ti + bi * tr;
        }
    }

    pub fn eval(&self, p: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(p, &mut out);
        out
    }

    /// Moments of normalized Lebesgue measure on the horizontal circle `t = c`.
    pub fn circle_moments(&self, c: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        out[0] = 1.0;
        for (j, &(k, l)) in self.pairs.iter().enumerate() {
            if k == 0 {
                let (s, co) = (PI * f64::from(l) * c).sin_cos();
                out[1 + 2 * j] = co;
                out[2 + 2 * j] = s;
            }
        }
        out
    }
}

/// `z^0 … z^deg` for `z = cos + i sin`, given `(sin, cos)`.
fn powers((s, c): (f64, f64), deg: usize) -> (Vec<f64>, Vec<f64>) {
    let mut re = vec![1.0; deg + 1];
    let mut im = vec![0.0; deg + 1];
    for k in 1..=deg {
        re[k] = re[k - 1] * c - im[k - 1] * s;
        im[k] = re[k - 1] * s + im[k - 1] * c;
    }
    (re, im)
}

/// Streaming accumulator of dictionary moments along long orbits.
///
/// The fiber coordinate is binned on `[0, 2)` and each bin stores the base
/// power sums `Σ δ^r z^k` for `r = 0, 1, 2`, where `δ` is the offset from the
/// bin centre. Moments are reassembled from a second-order expansion of
/// `e^{iπlδ}`, whose remainder is below `(πpδ_max)³/6 ≈ 3·10⁻⁷` at the
/// default resolution. The per-step cost is `O(p)` instead of `O(p²)`.
#[derive(Clone, Debug)]
pub struct OrbitAccumulator {
    degree: usize,
    nbins: usize,
    width: f64,
    rows: Vec<f64>,
    touched: Vec<u32>,
    is_touched: Vec<bool>,
    inv_width: f64,
    count: u64,
}

const DEFAULT_BINS: usize = 2048;

/// Largest dictionary degree the accumulator supports.
pub const MAX_ACC_DEGREE: usize = 16;

impl OrbitAccumulator {
    pub fn new(dict: &TestDictionary) -> Self {
        Self::with_bins(dict, DEFAULT_BINS)
    }

    pub fn with_bins(dict: &TestDictionary, nbins: usize) -> Self {
        let degree = dict.max_degree();
        assert!(
            degree <= MAX_ACC_DEGREE,
            "accumulator supports degree ≤ {MAX_ACC_DEGREE}"
        );
        assert!(nbins > 0);
        Self {
            degree,
            nbins,
            width: FIBER_PERIOD / nbins as f64,
            rows: vec![0.0; nbins * row_len(degree)],
            touched: Vec::new(),
            is_touched: vec![false; nbins],
            inv_width: nbins as f64 / FIBER_PERIOD,
            count: 0,
        }
    }

    pub fn reset(&mut self) {
        let len = row_len(self.degree);
        for &b in &self.touched {
            let b = b as usize;
            self.rows[b * len..(b + 1) * len].fill(0.0);
            self.is_touched[b] = false;
        }
        self.touched.clear();
        self.count = 0;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Add the point with base phase `(sin 2πθ, cos 2πθ)` and fiber `t`.
    #[inline]
    pub fn push(&mut self, sin: f64, cos: f64, t: f64) {
        let tw = crate::dynamics::wrap(t, FIBER_PERIOD);
        let bin = ((tw * self.inv_width) as usize).min(self.nbins - 1);
        let delta = tw - (bin as f64 + 0.5) * self.width;
        if !self.is_touched[bin] {
            self.is_touched[bin] = true;
            self.touched.push(bin as u32);
        }
        let len = row_len(self.degree);
        let row = &mut self.rows[bin * len..(bin + 1) * len];
        match self.degree {
            DEFAULT_DEGREE => accumulate_fixed::<{ DEFAULT_DEGREE + 1 }>(row, sin, cos, delta),
            deg => accumulate(row, deg + 1, sin, cos, delta),
        }
        self.count += 1;
    }

    /// Time-averaged moments of everything pushed so far.
    pub fn moments(&self, dict: &TestDictionary) -> Vec<f64> {
        assert_eq!(dict.max_degree(), self.degree);
        let deg = self.degree;
        let m = deg + 1;
        let len = row_len(deg);
        let mut sums = vec![0.0; dict.len()];
        if self.count == 0 {
            return sums;
        }
        let mut bins: Vec<u32> = self.touched.clone();
        bins.sort_unstable();
        let mut ct_re = vec![0.0; m];
        let mut ct_im = vec![0.0; m];
        for &b in &bins {
            let b = b as usize;
            let row = &self.rows[b * len..(b + 1) * len];
            let centre = (b as f64 + 0.5) * self.width;
            let (pr, pi) = powers((PI * centre).sin_cos(), deg);
            ct_re.copy_from_slice(&pr);
            ct_im.copy_from_slice(&pi);
            sums[0] += row[0];
            for (j, &(k, l)) in dict.pairs().iter().enumerate() {
                let ka = k.unsigned_abs() as usize;
                let sign = if k >= 0 { 1.0 } else { -1.0 };
                let get = |r: usize| (row[2 * (r * m + ka)], sign * row[2 * (r * m + ka) + 1]);
                let (a0r, a0i) = get(0);
                let (a1r, a1i) = get(1);
                let (a2r, a2i) = get(2);
                let lf = PI * f64::from(l);
                // Σ_r A_r (iπl)^r / r!
                let sr = a0r - lf * a1i - 0.5 * lf * lf * a2r;
                let si = a0i + lf * a1r - 0.5 * lf * lf * a2i;
                let (cr, ci) = (ct_re[l as usize], ct_im[l as usize]);
                sums[1 + 2 * j] += sr * cr - si * ci;
                sums[2 + 2 * j] += sr * ci + si * cr;
            }
        }
        let inv = 1.0 / self.count as f64;
        sums.iter_mut().for_each(|s| *s *= inv);
        sums
    }
}

fn row_len(degree: usize) -> usize {
    6 * (degree + 1)
}

// A row holds three blocks (Σ z^k, Σ δ z^k, Σ δ² z^k) of m interleaved
// (re, im) pairs. Powers use z^k = z^⌊k/2⌋ · z^⌈k/2⌉ to keep the dependency
// chain short.

#[inline(always)]
fn accumulate_fixed<const M: usize>(row: &mut [f64], sin: f64, cos: f64, delta: f64) {
    let mut pw = [[1.0, 0.0]; M];
    if M > 1 {
        pw[1] = [cos, sin];
    }
    for k in 2..M {
        let (a, b) = (pw[k / 2], pw[k - k / 2]);
        pw[k] = [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]];
    }
    let delta2 = delta * delta;
    let (r0, rest) = row[..6 * M].split_at_mut(2 * M);
    let (r1, r2) = rest.split_at_mut(2 * M);
    for (k, z) in pw.iter().enumerate() {
        for c in 0..2 {
            r0[2 * k + c] += z[c];
            r1[2 * k + c] += delta * z[c];
            r2[2 * k + c] += delta2 * z[c];
        }
    }
}

fn accumulate(row: &mut [f64], m: usize, sin: f64, cos: f64, delta: f64) {
    let mut pw = [[0.0; 2]; MAX_ACC_DEGREE + 1];
    pw[0] = [1.0, 0.0];
    if m > 1 {
        pw[1] = [cos, sin];
    }
    for k in 2..m {
        let (a, b) = (pw[k / 2], pw[k - k / 2]);
        pw[k] = [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]];
    }
    let delta2 = delta * delta;
    let (r0, rest) = row[..6 * m].split_at_mut(2 * m);
    let (r1, r2) = rest.split_at_mut(2 * m);
    for (k, z) in pw[..m].iter().enumerate() {
        for c in 0..2 {
            r0[2 * k + c] += z[c];
            r1[2 * k + c] += delta * z[c];
            r2[2 * k + c] += delta2 * z[c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn sizes_and_weights() {
        let d = TestDictionary::default();
        assert_eq!(d.len(), 289);
        assert_eq!(d.weights()[0], 1.0);
        assert!(d.weights().iter().all(|&w| w > 0.0));
        assert_eq!(d.label(0), "const");
        assert_eq!(d.label(1), "cos(1,0)");
        assert_eq!(d.label(2), "sin(1,0)");
    }

    #[test]
    fn eval_matches_direct_trig() {
        let d = TestDictionary::new(4);
        let p = Point::new(0.3123, 0.771);
        let v = d.eval(p);
        for (j, &(k, l)) in d.pairs().iter().enumerate() {
            let arg = 2.0 * PI * (f64::from(k) * p.theta + f64::from(l) * p.t / 2.0);
            assert!((v[1 + 2 * j] - arg.cos()).abs() < 1e-13);
            assert!((v[2 + 2 * j] - arg.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn circle_moments_separate_the_boundaries() {
        let d = TestDictionary::default();
        let a = d.circle_moments(0.0);
        let b = d.circle_moments(1.0);
        assert!(d.distance(&a, &b) > 1.0);
    }

    #[test]
    fn binned_accumulator_matches_exact_sums() {
        let d = TestDictionary::default();
        let mut rng = crate::seed::rng(11);
        let mut acc = OrbitAccumulator::new(&d);
        let mut exact = vec![0.0; d.len()];
        let mut buf = vec![0.0; d.len()];
        let n = 20_000;
        for _ in 0..n {
            let p = Point::new(rng.gen::<f64>(), rng.gen::<f64>() * 2.0);
            let (s, c) = (2.0 * PI * p.theta).sin_cos();
            acc.push(s, c, p.t);
            d.eval_into(p, &mut buf);
            exact.iter_mut().zip(&buf).for_each(|(e, b)| *e += b);
        }
        let m = acc.moments(&d);
        for (i, (a, e)) in m.iter().zip(&exact).enumerate() {
            assert!((a - e / n as f64).abs() < 1e-6, "{} {a} {}", d.label(i), e / n as f64);
        }
        acc.reset();
        assert_eq!(acc.count(), 0);
        assert!(acc.moments(&d).iter().all(|&x| x == 0.0));
    }
}
