use serde::Serialize;

use super::curve::Carrier;
use crate::error::{invalid, Error, Result};

/// `(Γ, φ)`: a density on a carrier with respect to normalized arclength
/// `(Γ, 1)`, linear between nodes and normalized by the trapezoid rule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimpleAdmissibleMeasure {
    carrier: Carrier,
    density: Vec<f64>,
}

/// Trapezoid weights of the nodes with respect to normalized arclength.
pub(crate) fn trapezoid_weights(s: &[f64]) -> Vec<f64> {
    let total = s[s.len() - 1] - s[0];
    let mut w = vec![0.0; s.len()];
    for i in 1..s.len() {
        let h = 0.5 * (s[i] - s[i - 1]) / total;
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

impl SimpleAdmissibleMeasure {
    /// Rescales `density` so that `∫ φ d(Γ, 1) = 1`.
    pub fn new(carrier: Carrier, mut density: Vec<f64>) -> Result<Self> {
        if density.len() != carrier.len() {
            return Err(invalid(
                "density",
                format!("{} values for {} nodes", density.len(), carrier.len()),
            ));
        }
        if density.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("density", "values must be positive and finite"));
        }
        let s: Vec<f64> = carrier.nodes().iter().map(|n| n.s).collect();
        let mass: f64 = trapezoid_weights(&s).iter().zip(&density).map(|(w, v)| w * v).sum();
        density.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { carrier, density })
    }

    pub fn uniform(carrier: Carrier) -> Self {
        let n = carrier.len();
        Self {
            carrier,
            density: vec![1.0; n],
        }
    }

    /// Requires the density to lie in `[1/D, D]`.
    pub fn check_density_bounds(&self, big_d: f64) -> Result<()> {
        let (lo, hi) = self.density_range();
        if lo < 1.0 / big_d || hi > big_d {
            return Err(Error::DensityOutOfRange { d: big_d });
        }
        Ok(())
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn density_range(&self) -> (f64, f64) {
        self.density
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Density at arclength `s` (linear between nodes).
    pub fn density_at(&self, s: f64) -> f64 {
        let nodes = self.carrier.nodes();
        let i = nodes.partition_point(|n| n.s <= s).clamp(1, nodes.len() - 1) - 1;
        let h = nodes[i + 1].s - nodes[i].s;
        let u = ((s - nodes[i].s) / h).clamp(0.0, 1.0);
        self.density[i] * (1.0 - u) + self.density[i + 1] * u
    }

    pub fn weights(&self) -> Vec<f64> {
        let s: Vec<f64> = self.carrier.nodes().iter().map(|n| n.s).collect();
        trapezoid_weights(&s)
    }

    /// Rows `(s, θ, t, slope, φ)`.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 5]> + '_ {
        self.carrier
            .nodes()
            .iter()
            .zip(&self.density)
            .map(|(n, &phi)| [n.s, n.theta, n.t, n.slope, phi])
    }

    /// Inverse of [`rows`](Self::rows); the arclength column is recomputed
    /// and must agree with the given one to `10⁻⁶` relative.
    pub fn from_rows(rows: &[[f64; 5]]) -> Result<Self> {
        let pts: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r[1], r[2], r[3])).collect();
        let carrier = Carrier::from_nodes(&pts)?;
        let scale = carrier.arclength();
        for (r, n) in rows.iter().zip(carrier.nodes()) {
            if (r[0] - rows[0][0] - n.s).abs() > 1e-6 * scale {
                return Err(invalid(
                    "s",
                    format!("arclength column disagrees with the curve at s = {}", r[0]),
                ));
            }
        }
        Self::new(carrier, rows.iter().map(|r| r[4]).collect())
    }
}
