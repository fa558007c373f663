//! Weighted least squares over the probability simplex.
//!
//! Minimizes `‖Σⱼ αⱼ vⱼ − b‖²_w` over `α ≥ 0, Σα = 1` with a primal
//! active-set method; [`simplex_fit_exhaustive`] enumerates supports and
//! serves as an oracle.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexFit {
    pub alpha: Vec<f64>,
    /// `‖Σ αⱼ vⱼ − b‖_w`.
    pub residual: f64,
}

struct Problem<'a> {
    vertices: &'a [Vec<f64>],
    target: &'a [f64],
    weights: &'a [f64],
    gram: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(vertices: &'a [Vec<f64>], target: &'a [f64], weights: &'a [f64]) -> Result<Self> {
        if vertices.is_empty() {
            return Err(invalid("vertices", "need at least one vertex"));
        }
        let dim = target.len();
        if weights.len() != dim || vertices.iter().any(|v| v.len() != dim) {
            return Err(invalid("vertices", "dimension mismatch"));
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(weights).map(|((x, y), w)| w * x * y).sum::<f64>();
        let gram = vertices
            .iter()
            .map(|u| vertices.iter().map(|v| dot(u, v)).collect())
            .collect();
        let rhs = vertices.iter().map(|v| dot(v, target)).collect();
        Ok(Self {
            vertices,
            target,
            weights,
            gram,
            rhs,
        })
    }

    fn residual(&self, alpha: &[f64]) -> f64 {
        let mut sq = 0.0;
        for (i, (&b, &w)) in self.target.iter().zip(self.weights).enumerate() {
            let m: f64 = alpha.iter().zip(self.vertices).map(|(a, v)| a * v[i]).sum();
            sq += w * (m - b) * (m - b);
        }
        sq.sqrt()
    }

    /// Minimizer on the affine hull of `support` (others zero).
    fn solve_on(&self, support: &[usize]) -> Option<Vec<f64>> {
        let k = support.len();
        // KKT system [G 1; 1ᵀ 0] [α; ν] = [c; 1]
        let mut a = vec![vec![0.0; k + 2]; k + 1];
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                a[r][c] = self.gram[i][j];
            }
            a[r][k] = 1.0;
            a[r][k + 1] = self.rhs[i];
        }
        for c in 0..k {
            a[k][c] = 1.0;
        }
        a[k][k + 1] = 1.0;
        let sol = gauss_solve(a)?;
        let mut alpha = vec![0.0; self.vertices.len()];
        for (r, &i) in support.iter().enumerate() {
            alpha[i] = sol[r];
        }
        Some(alpha)
    }
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    let scale = a.iter().flat_map(|r| r[..n].iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    Some(x)
}

/// Active-set solution of the simplex-constrained least-squares problem.
pub fn simplex_fit(vertices: &[Vec<f64>], target: &[f64], weights: &[f64]) -> Result<SimplexFit> {
    let p = Problem::new(vertices, target, weights)?;
    let n = vertices.len();
    // start from the best vertex: feasible, and the support never degenerates
    let best = (0..n)
        .min_by(|&i, &j| {
            let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
            a[i] = 1.0;
            b[j] = 1.0;
            p.residual(&a).total_cmp(&p.residual(&b))
        })
        .unwrap_or(0);
    let mut alpha = vec![0.0; n];
    alpha[best] = 1.0;
    let mut free = vec![false; n];
    free[best] = true;

    for _ in 0..50 * n + 50 {
        let support: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let Some(target_alpha) = p.solve_on(&support) else {
            // affinely dependent support: keep the current feasible iterate
            break;
        };
        if support.iter().all(|&i| target_alpha[i] >= 0.0) {
            alpha = target_alpha;
            // multipliers of the bounds αⱼ ≥ 0 for fixed j
            let grad: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| p.gram[i][j] * alpha[j]).sum::<f64>() - p.rhs[i])
                .collect();
            let nu = support.iter().map(|&i| grad[i]).sum::<f64>() / support.len() as f64;
            let tol = 1e-13 * (1.0 + grad.iter().fold(0.0f64, |m, g| m.max(g.abs())));
            let release = (0..n)
                .filter(|&j| !free[j] && grad[j] - nu < -tol)
                .min_by(|&x, &y| grad[x].total_cmp(&grad[y]));
            match release {
                Some(j) => free[j] = true,
                None => break,
            }
        } else {
            // move towards the subproblem minimizer until a weight hits zero
            let mut step = 1.0;
            let mut blocking = None;
            for &i in &support {
                if target_alpha[i] < 0.0 {
                    let s = alpha[i] / (alpha[i] - target_alpha[i]);
                    if s < step {
                        step = s;
                        blocking = Some(i);
                    }
                }
            }
            for i in 0..n {
                alpha[i] += step * (target_alpha[i] - alpha[i]);
            }
            if let Some(i) = blocking {
                free[i] = false;
                alpha[i] = 0.0;
            }
            for i in 0..n {
                if free[i] && alpha[i] <= 0.0 {
                    free[i] = false;
                    alpha[i] = 0.0;
                }
            }
        }
    }
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);
    Ok(SimplexFit {
        residual: p.residual(&alpha),
        alpha,
    })
}

/// Oracle: best feasible affine-hull minimizer over every support.
pub fn simplex_fit_exhaustive(vertices: &[Vec<f64>], target: &[f64], weights: &[f64]) -> Result<SimplexFit> {
    let p = Problem::new(vertices, target, weights)?;
    let n = vertices.len();
    if n > 20 {
        return Err(invalid("vertices", "exhaustive fit is limited to 20 vertices"));
    }
    let mut best: Option<SimplexFit> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let Some(alpha) = p.solve_on(&support) else { continue };
        if alpha.iter().any(|&a| a < -1e-12) {
            continue;
        }
        let alpha: Vec<f64> = alpha.iter().map(|a| a.max(0.0)).collect();
        let residual = p.residual(&alpha);
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(SimplexFit { alpha, residual });
        }
    }
    best.ok_or_else(|| invalid("vertices", "no feasible support"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_mixture_is_recovered() {
        let v = vec![vec![1.0, 0.0, 0.5], vec![0.0, 1.0, -0.5]];
        let b: Vec<f64> = (0..3).map(|i| 0.3 * v[0][i] + 0.7 * v[1][i]).collect();
        let f = simplex_fit(&v, &b, &[1.0, 0.5, 0.25]).unwrap();
        assert!(f.residual < 1e-14);
        assert!((f.alpha[0] - 0.3).abs() < 1e-14 && (f.alpha[1] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn single_vertex_is_the_distance() {
        let v = vec![vec![1.0, 2.0]];
        let f = simplex_fit(&v, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(f.alpha, vec![1.0]);
        assert!((f.residual - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn projection_outside_the_hull_lands_on_an_edge() {
        // triangle in the plane, target beyond the edge between v1 and v2
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let f = simplex_fit(&v, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(f.alpha[0].abs() < 1e-15);
        assert!((f.alpha[1] - 0.5).abs() < 1e-14 && (f.alpha[2] - 0.5).abs() < 1e-14);
        assert!((f.residual - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        assert!(simplex_fit(&[vec![1.0]], &[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(simplex_fit(&[], &[1.0], &[1.0]).is_err());
    }
}
