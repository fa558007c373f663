//! Holonomy between two carriers along the vertical fibers.
//!
//! Points with equal base coordinate share their base orbit, so their
//! separation evolves in the fiber alone; when it contracts they lie on a
//! common stable set and the vertical slide is the stable holonomy.

use serde::Serialize;

use crate::carriers::Carrier;
use crate::dynamics::{wrap, Point, SkewProductMap, Space};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolonomyOptions {
    /// Pair samples across the common base interval.
    pub samples: usize,
    /// Windows for the length-ratio Jacobian.
    pub windows: usize,
    /// A pair counts as forward asymptotic when its fiber distance after
    /// `n` steps is at most this fraction of the initial one.
    pub contraction: f64,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        Self {
            samples: 257,
            windows: 16,
            contraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolonomyReport {
    pub n: usize,
    /// Common base interval in the unwrapped coordinate of `g1`.
    pub overlap: (f64, f64),
    pub samples: usize,
    pub paired: usize,
    pub paired_fraction: f64,
    /// Largest fiber distance after `n` steps among paired points.
    pub max_final_distance: f64,
    /// Length ratio `|h(W)| / |W|` per window.
    pub jacobian: Vec<f64>,
    pub max_jacobian_deviation: f64,
    /// `C¹` distance of the two graphs on the overlap.
    pub curve_distance: f64,
    /// `max |Jac − 1| / curve_distance`, absent for identical curves.
    pub c_fit: Option<f64>,
}

fn base_interval(g: &Carrier) -> (f64, f64) {
    let nodes = g.nodes();
    (nodes[0].theta, nodes[nodes.len() - 1].theta)
}

fn fiber_distance(map: &SkewProductMap, a: f64, b: f64) -> f64 {
    match map.space() {
        Space::Cylinder => (a - b).abs(),
        Space::Torus => {
            let d = wrap(a - b, 2.0);
            d.min(2.0 - d)
        }
    }
}

pub fn holonomy_probe(g1: &Carrier, g2: &Carrier, map: &SkewProductMap, n: usize) -> Result<HolonomyReport> {
    holonomy_probe_with(g1, g2, map, n, HolonomyOptions::default())
}

/// Slides `g1` vertically onto `g2`, tests forward asymptoticity of each
/// pair over `n` steps and measures the Jacobian of the slide.
pub fn holonomy_probe_with(
    g1: &Carrier,
    g2: &Carrier,
    map: &SkewProductMap,
    n: usize,
    opts: HolonomyOptions,
) -> Result<HolonomyReport> {
    if opts.samples < 2 || opts.windows == 0 {
        return Err(invalid("options", "need at least 2 samples and 1 window"));
    }
    if !(opts.contraction > 0.0 && opts.contraction < 1.0) {
        return Err(invalid("contraction", "must lie in (0, 1)"));
    }
    let (a1, b1) = base_interval(g1);
    let (a2, b2) = base_interval(g2);
    // shift g2 by whole turns onto g1's unwrapped coordinate
    let shift = (-2..=2)
        .map(f64::from)
        .map(|k| (k, (b1.min(b2 + k) - a1.max(a2 + k))))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(k, _)| k)
        .unwrap_or(0.0);
    let (lo, hi) = (a1.max(a2 + shift), b1.min(b2 + shift));
    if !(hi > lo) {
        return Err(Error::DisjointCurves);
    }

    let mut paired = 0;
    let mut max_final: f64 = 0.0;
    let mut curve_distance: f64 = 0.0;
    for k in 0..opts.samples {
        let theta = lo + (hi - lo) * k as f64 / (opts.samples - 1) as f64;
        let (t1, m1) = g1.eval_theta(theta);
        let (t2, m2) = g2.eval_theta(theta - shift);
        curve_distance = curve_distance.max((t1 - t2).abs()).max((m1 - m2).abs());
        let d0 = fiber_distance(map, t1, t2);
        let (mut p, mut q) = (
            map.normalize(Point::new(theta, t1)),
            map.normalize(Point::new(theta, t2)),
        );
        for _ in 0..n {
            p = map.step(p);
            q = Point::new(p.theta, map.step(q).t);
        }
        let dn = fiber_distance(map, p.t, q.t);
        if dn <= opts.contraction * d0 || dn == 0.0 {
            paired += 1;
            max_final = max_final.max(dn);
        }
    }

    let jacobian: Vec<f64> = (0..opts.windows)
        .map(|w| {
            let x0 = lo + (hi - lo) * w as f64 / opts.windows as f64;
            let x1 = lo + (hi - lo) * (w + 1) as f64 / opts.windows as f64;
            let l1 = g1.arclength_at_theta(x1) - g1.arclength_at_theta(x0);
            let l2 = g2.arclength_at_theta(x1 - shift) - g2.arclength_at_theta(x0 - shift);
            l2 / l1
        })
        .collect();
    let max_dev = jacobian.iter().map(|j| (j - 1.0).abs()).fold(0.0, f64::max);
    Ok(HolonomyReport {
        n,
        overlap: (lo, hi),
        samples: opts.samples,
        paired,
        paired_fraction: paired as f64 / opts.samples as f64,
        max_final_distance: max_final,
        jacobian,
        max_jacobian_deviation: max_dev,
        curve_distance,
        c_fit: (curve_distance > 0.0).then(|| max_dev / curve_distance),
    })
}
