//! One-dimensional model of the disintegration on `(0, ∞)` with
//! `R(x) = x/2`: windows `I_x = (x/2, 3x/2)`, `V_y = (2y/3, 2y)`.

use crate::error::{invalid, Result};

const LN3: f64 = 1.098_612_288_668_109_8;

/// Normalized child density `φ_x(y) = x / (y log 3)` on `I_x`.
pub fn toy_density(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(invalid("x, y", "toy model needs positive arguments"));
    }
    Ok(x / (y * LN3))
}

/// The constant family weight `¾ log 3`.
pub fn toy_rho() -> f64 {
    0.75 * LN3
}

/// Unnormalized Step-1 density `m(I_x) / m(V_y) = 3x / 4y`.
fn toy_tilde(x: f64, y: f64) -> f64 {
    3.0 * x / (4.0 * y)
}

/// `ρ(x) = ∫ φ̃_x dm_x` by quadrature; constant in `x`.
pub fn toy_rho_at(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid("x", "toy model needs x > 0"));
    }
    Ok(adaptive_simpson(|y| toy_tilde(x, y), 0.5 * x, 1.5 * x, 1e-13) / x)
}

/// `|∫ (φ_x m_x)(E) d(ρ m)(x) − m(E)|` for `E = (lo, hi)`, both integrals by
/// adaptive quadrature. The outer range `(2lo/3, 2hi)` is exactly where
/// `I_x` meets `E`; the integrand has kinks where the ends of `I_x` cross
/// those of `E`, which are used as breakpoints.
pub fn verify_toy_identity(lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(invalid("E", format!("need 0 < lo < hi < ∞, got ({lo}, {hi})")));
    }
    let rho = toy_rho();
    let inner = |x: f64| {
        let (a, b) = ((0.5 * x).max(lo), (1.5 * x).min(hi));
        if b <= a {
            return 0.0;
        }
        // (φ_x m_x)(E) with m_x normalized on I_x, m(I_x) = x
        adaptive_simpson(|y| x / (y * LN3), a, b, 1e-14) / x
    };
    let mut breaks = vec![2.0 * lo / 3.0, 2.0 * lo, 2.0 * hi / 3.0, 2.0 * hi];
    breaks.sort_by(f64::total_cmp);
    let outer: f64 = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| adaptive_simpson(|x| rho * inner(x), w[0], w[1], 1e-12))
        .sum();
    Ok((outer - (hi - lo)).abs())
}

/// Adaptive Simpson quadrature with Richardson correction.
fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((toy_rho() - 0.823_959_216_5).abs() < 1e-10);
        assert!((toy_density(1.0, 1.0).unwrap() - 0.910_239_226_6).abs() < 1e-10);
        assert!(toy_density(0.0, 1.0).is_err());
        assert!(toy_rho_at(-1.0).is_err());
    }

    #[test]
    fn rho_is_constant() {
        for i in 0..100 {
            let x = 0.1 * (100f64).powf(i as f64 / 99.0);
            assert!((toy_rho_at(x).unwrap() - toy_rho()).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn child_densities_are_normalized() {
        for x in [0.2, 1.0, 7.5] {
            let mass = adaptive_simpson(|y| toy_density(x, y).unwrap(), 0.5 * x, 1.5 * x, 1e-14) / x;
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_holds() {
        assert!(verify_toy_identity(1.0, 2.0).unwrap() <= 1e-8);
        assert!(verify_toy_identity(0.1, 10.0).unwrap() <= 1e-8);
        assert!(verify_toy_identity(3.0, 3.001).unwrap() <= 1e-8);
        assert!(verify_toy_identity(2.0, 1.0).is_err());
    }

    #[test]
    fn simpson_on_kinked_integrand() {
        let v = adaptive_simpson(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-13);
        assert!((v - (0.045 + 0.245)).abs() < 1e-11);
    }
}
