//! Pliss times, the uniformly contracting set `H(g)`, and stable-disc radii.
//!
//! Window convention: index `k_i` is selected when every forward window
//! average `(a_{k_i} + … + a_{n−1}) / (n − k_i)` with `k_i < n ≤ k` is at most
//! `A + ε`.

use serde::Serialize;

use crate::dynamics::{Point, SkewProductMap};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlissInput {
    pub a: Vec<f64>,
    /// Lower bound `h ≤ min aᵢ`.
    pub h: f64,
    /// Mean bound `Σ aᵢ ≤ k A`.
    pub big_a: f64,
    pub eps: f64,
}

/// Whether the last index `k − 1` may be selected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum LastIndex {
    /// Windows end anywhere in `(k_i, k]`; `k − 1` is admissible.
    #[default]
    Admissible,
    /// Strict reading: selected indices satisfy `k_i < k − 1`.
    Excluded,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlissSelection {
    pub indices: Vec<usize>,
    /// Guaranteed count `k ε / (A + ε − h)`.
    pub bound: f64,
}

impl PlissInput {
    pub fn new(a: Vec<f64>, h: f64, big_a: f64, eps: f64) -> Self {
        Self { a, h, big_a, eps }
    }

    fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(Error::PlissHypothesis("empty sequence".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::PlissHypothesis(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.h < self.big_a) {
            return Err(Error::PlissHypothesis(format!(
                "need h < A, got h = {} and A = {}",
                self.h, self.big_a
            )));
        }
        let min = self.a.iter().copied().fold(f64::INFINITY, f64::min);
        if min < self.h || self.a.iter().any(|x| !x.is_finite()) {
            return Err(Error::PlissHypothesis(format!(
                "min(a) = {min} is below h = {}",
                self.h
            )));
        }
        let k = self.a.len() as f64;
        let sum: f64 = self.a.iter().sum();
        // relative slack absorbs rounding in the caller's mean
        if sum > k * self.big_a + 1e-12 * k * (1.0 + self.big_a.abs()) {
            return Err(Error::PlissHypothesis(format!(
                "mean {} exceeds A = {}",
                sum / k,
                self.big_a
            )));
        }
        Ok(())
    }

    pub fn count_bound(&self) -> f64 {
        self.a.len() as f64 * self.eps / (self.big_a + self.eps - self.h)
    }
}

/// All Pliss times of `input`, in increasing order.
///
/// Runs in `O(k)`: with `b_j = a_j − (A + ε)`, the largest forward window sum
/// starting at `i` obeys `S_i = b_i + max(0, S_{i+1})`, and `i` is selected
/// iff `S_i ≤ 0`.
pub fn pliss_select(input: &PlissInput) -> Result<PlissSelection> {
    pliss_select_with(input, LastIndex::default())
}

pub fn pliss_select_with(input: &PlissInput, last: LastIndex) -> Result<PlissSelection> {
    input.validate()?;
    let level = input.big_a + input.eps;
    let k = input.a.len();
    let mut selected = vec![false; k];
    let mut best = f64::NEG_INFINITY;
    for i in (0..k).rev() {
        let b = input.a[i] - level;
        best = if i + 1 == k { b } else { b + best.max(0.0) };
        selected[i] = best <= 0.0;
    }
    if last == LastIndex::Excluded {
        selected[k - 1] = false;
    }
    Ok(PlissSelection {
        indices: (0..k).filter(|&i| selected[i]).collect(),
        bound: input.count_bound(),
    })
}

/// Membership of `x` in `H_m(g)`: `Π_{j<n} ‖D^c g^N(g^{Nj} x)‖ ≤ e^{nN(λ+3ε)}`
/// for every `1 ≤ n ≤ m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperbolicMembership {
    pub x: Point,
    pub block: usize,
    pub lam: f64,
    pub eps: f64,
    pub depth: usize,
    pub member: bool,
    /// Largest `n ≤ depth` for which all prefixes up to `n` pass.
    pub passed_blocks: usize,
}

pub fn detect_h(
    map: &SkewProductMap,
    x: Point,
    block: usize,
    lam: f64,
    eps: f64,
    depth: usize,
) -> Result<HyperbolicMembership> {
    if block == 0 {
        return Err(invalid("N", "block length must be at least 1"));
    }
    if depth == 0 {
        return Err(invalid("m", "depth must be at least 1"));
    }
    let rate = block as f64 * (lam + 3.0 * eps);
    let mut y = map.normalize(x);
    let mut log_sum = 0.0;
    let mut passed = 0;
    for n in 1..=depth {
        for _ in 0..block {
            let (next, dc) = map.step_with_dc(y);
            log_sum += dc.ln();
            y = next;
        }
        if log_sum > n as f64 * rate {
            break;
        }
        passed = n;
    }
    Ok(HyperbolicMembership {
        x,
        block,
        lam,
        eps,
        depth,
        member: passed == depth,
        passed_blocks: passed,
    })
}

/// Lower bound `h` for `(1/N) log ‖D^c g^N‖` used by the Pliss argument,
/// slightly relaxed for rounding.
pub fn cocycle_lower_bound(map: &SkewProductMap) -> f64 {
    map.derivative_bounds().inf_dt.ln() - 1e-9
}

/// `δ = ε / (λ + 4ε − h)` from the density argument for `H(g)`.
pub fn pliss_density(lam: f64, eps: f64, h: f64) -> f64 {
    eps / (lam + 4.0 * eps - h)
}

/// Parameters of the stable-disc search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StableDiscParams {
    pub block: usize,
    pub lam: f64,
    pub eps: f64,
    /// Depth at which `x` is certified in `H`.
    pub depth: usize,
    /// Fiber points sampled per candidate radius.
    pub samples: usize,
}

/// Largest radius `K` in `k_grid` such that every fiber point `y` with
/// `|t_y − t_x| ≤ K` contracts by `σ = e^{N(λ+4ε)/2}` per block along the
/// tested blocks, i.e. `Π_{i<j} ‖D^c g^N(g^{iN} y)‖ ≤ σ^j` for `j ≤ depth`.
/// Returns 0 for an empty grid or when no radius passes.
pub fn stable_disc_radius(map: &SkewProductMap, x: Point, params: &StableDiscParams, k_grid: &[f64]) -> Result<f64> {
    let membership = detect_h(map, x, params.block, params.lam, params.eps, params.depth)?;
    if !membership.member {
        return Err(Error::NotHyperbolic { depth: params.depth });
    }
    if k_grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("K_grid", "candidate radii must be decreasing"));
    }
    let log_sigma = params.block as f64 * (params.lam + 4.0 * params.eps) / 2.0;
    let samples = params.samples.max(2);
    let fiber_len = map.space().fiber_length();
    let periodic = map.space() == crate::Space::Torus;
    let contracts = |y: Point| {
        let mut z = y;
        let mut log_sum = 0.0;
        for j in 1..=params.depth {
            for _ in 0..params.block {
                let (next, dc) = map.step_with_dc(z);
                log_sum += dc.ln();
                z = next;
            }
            if log_sum > j as f64 * log_sigma {
                return false;
            }
        }
        true
    };
    for &k in k_grid {
        if !(k > 0.0) {
            continue;
        }
        let ok = (0..samples).all(|s| {
            let u = -k + 2.0 * k * s as f64 / (samples - 1) as f64;
            let t = x.t + u;
            if !periodic && !(0.0..=fiber_len).contains(&t) {
                return true;
            }
            contracts(map.normalize(Point::new(x.theta, t)))
        });
        if ok {
            return Ok(k);
        }
    }
    Ok(0.0)
}
