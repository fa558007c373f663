use serde::Serialize;

use super::curve::{AdmissibilityConstants, Carrier};
use crate::dynamics::{Point, SkewProductMap};
use crate::error::{invalid, Result};

/// Slope Lipschitz constants of `fⁿ(Γ)` against `K0` and the recursive bound
/// `L_{n+1} ≤ C/d² + (sup ∂_t h / d²) L_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureGrowthReport {
    pub k0: f64,
    pub n: Vec<usize>,
    pub lip: Vec<f64>,
    pub bound: Vec<f64>,
    /// Every measured constant is at most `K0`.
    pub within_k0: bool,
    /// Every measured constant is at most its recursive bound.
    pub within_bound: bool,
}

/// Sample points per segment used to probe the curve.
const PROBES: usize = 4;

/// Propagates slope `m` and curvature `κ = dm/dθ` of the graph along orbits:
/// `m' = (∂_θ h + ∂_t h m) / d`,
/// `κ' = (∂_θθ h + 2 ∂_θt h m + ∂_tt h m² + ∂_t h κ) / d²`.
pub fn curvature_growth_check(g: &Carrier, map: &SkewProductMap, n_list: &[usize]) -> Result<CurvatureGrowthReport> {
    let consts = AdmissibilityConstants::for_map(map);
    g.check_admissible(&consts)?;
    if n_list.is_empty() {
        return Err(invalid("n_list", "need at least one iterate"));
    }
    let n_max = *n_list.iter().max().unwrap_or(&0);
    let d = f64::from(map.base_degree());
    let mut state: Vec<(Point, f64, f64)> = Vec::new();
    for i in 0..g.len() - 1 {
        let (a, b) = (g.nodes()[i].theta, g.nodes()[i + 1].theta);
        for k in 0..PROBES {
            let theta = a + (b - a) * k as f64 / PROBES as f64;
            let (t, m) = g.eval_theta(theta);
            state.push((map.normalize(Point::new(theta, t)), m, g.curvature_at(theta)));
        }
    }
    let last = g.nodes()[g.len() - 1];
    state.push((
        map.normalize(Point::new(last.theta, last.t)),
        last.slope,
        g.curvature_at(last.theta),
    ));

    let mut lip_by_n = vec![state.iter().map(|s| s.2.abs()).fold(0.0, f64::max)];
    for _ in 0..n_max {
        for (p, m, kappa) in state.iter_mut() {
            let tb = map.tangent(*p);
            let h = map.hessian(*p);
            let q = h.theta_theta + 2.0 * h.t_theta * *m + h.tt * *m * *m;
            *kappa = (q + tb.dc * *kappa) / (d * d);
            *m = (tb.dcu + tb.dc * *m) / d;
            *p = map.step(*p);
        }
        lip_by_n.push(state.iter().map(|s| s.2.abs()).fold(0.0, f64::max));
    }
    let c = consts.curvature_source / (d * d);
    let mut bound = vec![g.lip_const().max(lip_by_n[0])];
    for k in 0..n_max {
        bound.push(c + consts.curvature_rate * bound[k]);
    }
    let lip: Vec<f64> = n_list.iter().map(|&n| lip_by_n[n]).collect();
    let bnd: Vec<f64> = n_list.iter().map(|&n| bound[n]).collect();
    let slack = 1e-9 * (1.0 + consts.k0);
    Ok(CurvatureGrowthReport {
        k0: consts.k0,
        n: n_list.to_vec(),
        within_k0: lip.iter().all(|&l| l <= consts.k0 + slack),
        within_bound: lip.iter().zip(&bnd).all(|(l, b)| *l <= b + slack),
        lip,
        bound: bnd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn straight_line_of_product_map_stays_straight() {
        let f = SkewProductMap::kan_cylinder(3, 0.0).unwrap();
        let g = Carrier::horizontal(Point::new(0.2, 0.3), 0.1, 5).unwrap();
        let r = curvature_growth_check(&g, &f, &[0, 1, 5, 10]).unwrap();
        assert!(r.lip.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn kan_curves_respect_k0_and_the_recursive_bound() {
        let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
        let consts = AdmissibilityConstants::for_map(&f);
        let mut rng = crate::seed::rng(11);
        let ns: Vec<usize> = (0..=12).collect();
        for _ in 0..5 {
            let g = Carrier::random(&consts, 0.1, 6, &mut rng).unwrap();
            let r = curvature_growth_check(&g, &f, &ns).unwrap();
            assert!(r.within_k0 && r.within_bound, "{r:?}");
            assert!(r.bound[1..].windows(2).all(|w| w[1] <= w[0] + 1e-12) || r.bound[1] <= consts.k0);
        }
    }

    #[test]
    fn propagated_curvature_matches_finite_differences() {
        let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
        let g = Carrier::from_graph(0.4, 0.05, 6, |x| (0.3 + 0.1 * (x - 0.4), 0.1)).unwrap();
        // slope of the image graph at nearby image points
        let slope_at = |theta: f64| {
            let (t, m) = g.eval_theta(theta);
            let (_, v) = f.iterate_tangent(Point::new(theta, t), [1.0, m], 1);
            v[1] / v[0]
        };
        let h = 1e-5;
        let theta = 0.41;
        let fd = (slope_at(theta + h) - slope_at(theta - h)) / (2.0 * h * 3.0);
        let (t, m) = g.eval_theta(theta);
        let p = Point::new(theta, t);
        let hs = f.hessian(p);
        let tb = f.tangent(p);
        let exact = (hs.theta_theta + 2.0 * hs.t_theta * m + hs.tt * m * m + tb.dc * g.curvature_at(theta)) / 9.0;
        assert!((fd - exact).abs() < 1e-5, "{fd} vs {exact}");
    }

    #[test]
    fn cone_violation_is_rejected() {
        let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
        let g = Carrier::from_graph(0.5, 0.05, 4, |x| (0.5 + 2.5 * (x - 0.5), 2.5)).unwrap();
        assert!(matches!(
            curvature_growth_check(&g, &f, &[1]),
            Err(Error::Inadmissible(_))
        ));
    }
}
