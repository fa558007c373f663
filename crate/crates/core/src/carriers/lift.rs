//! Disintegration of `fⁿ_*(Γ, φ)` into a weighted family of admissible
//! measures carried by sub-arcs of the image curve.
//!
//! Each source point `x` gets the window `W_x = {y : |σ(y) − σ(x)| ≤ R(x)}` in
//! the pullback arclength `σ` of `fⁿ`, with radius
//! `R(x) = min(a, ½ dist_σ(x, ∂Γ))`. Writing `V_y = {x : y ∈ W_x}`, the source
//! density is split as `q(y) = φ(y) / |V_y|`; the family weight is
//! `ρ(x) = ∫_{W_x} q` and the child is `fⁿ_*(q 1_{W_x}) / ρ(x)`. Fubini on the
//! pairs `(x, y)` with `y ∈ W_x` recovers the push-forward exactly.
//!
//! Everything runs on a working grid refined until consecutive nodes are at
//! most `a/8` apart in `σ`; past the node cap the grid is marked unresolved
//! and windows shrink towards single nodes, where `ρ → φ`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use super::curve::{AdmissibilityConstants, Carrier};
use super::measure::{trapezoid_weights, SimpleAdmissibleMeasure};
use crate::dynamics::{FiberKind, Point, SkewProductMap, Space};
use crate::error::{invalid, Error, Result};
use crate::measures::{EmpiricalMeasure, TestDictionary};

/// Working-grid cap for a single disintegration.
pub const MAX_WORKING_NODES: usize = 1 << 22;
/// Working-grid cap per Cesàro component.
pub const CESARO_WORKING_NODES: usize = 1 << 16;

/// Resolution of the working grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GridOptions {
    pub max_nodes: usize,
    /// Target pullback spacing is `a / nodes_per_radius`.
    pub nodes_per_radius: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            max_nodes: MAX_WORKING_NODES,
            nodes_per_radius: 8,
        }
    }
}
/// Nodes of each child carrier.
pub const CHILD_NODES: usize = 17;
const CHILD_SAMPLES: usize = 33;

/// `|Dfⁿ(p) T|` for the unit tangent of slope `m`, and `fⁿ(p)`.
fn stretch(map: &SkewProductMap, p: Point, m: f64, n: usize) -> (f64, Point) {
    let (img, v) = map.iterate_tangent(p, [1.0, m], n);
    (v[0].hypot(v[1]) / m.hypot(1.0), img)
}

/// Cumulative pullback arclength `σ` of `fⁿ` at the carrier nodes,
/// integrated per segment with Gauss–Legendre.
pub fn pullback_metric(g: &Carrier, map: &SkewProductMap, n: usize) -> Vec<f64> {
    let pieces: Vec<f64> = (0..g.len() - 1)
        .into_par_iter()
        .map(|i| {
            g.quadrature_points(i)
                .map(|(theta, t, m, w)| {
                    let (_, v) = map.iterate_tangent(Point::new(theta, t), [1.0, m], n);
                    w * v[0].hypot(v[1])
                })
                .sum()
        })
        .collect();
    let mut sigma = Vec::with_capacity(g.len());
    sigma.push(0.0);
    for p in pieces {
        sigma.push(sigma[sigma.len() - 1] + p);
    }
    sigma
}

fn radius_at(sigma: f64, total: f64, a: f64) -> f64 {
    a.min(0.5 * sigma.min(total - sigma)).max(0.0)
}

/// `R_a(x) = min(a, ½ dist_σ(x, ∂Γ))` at the carrier nodes.
pub fn radius_function(g: &Carrier, map: &SkewProductMap, n: usize, a: f64) -> Result<Vec<f64>> {
    check_a(a)?;
    let sigma = pullback_metric(g, map, n);
    let total = sigma[sigma.len() - 1];
    Ok(sigma.iter().map(|&s| radius_at(s, total, a)).collect())
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a < super::curve::R0) {
        return Err(invalid("a", format!("need 0 < a < r0 = {}, got {a}", super::curve::R0)));
    }
    Ok(())
}

/// Source points, pullback data and windows on the working grid.
struct Grid {
    a: f64,
    s: Vec<f64>,
    w: Vec<f64>,
    stretch: Vec<f64>,
    image: Vec<Point>,
    sigma: Vec<f64>,
    /// Working index of each carrier node.
    node_index: Vec<usize>,
    radius: Vec<f64>,
    lo: Vec<usize>,
    hi: Vec<usize>,
    q: Vec<f64>,
    rho: Vec<f64>,
    /// `Σ_{W_x} w · stretch`.
    smass: Vec<f64>,
}

impl Grid {
    fn build(src: &SimpleAdmissibleMeasure, map: &SkewProductMap, n: usize, a: f64, opts: GridOptions) -> Self {
        let g = src.carrier();
        let table = pullback_metric(g, map, n);
        let target = a / opts.nodes_per_radius as f64;
        let cap = opts.max_nodes;
        let mut counts: Vec<usize> = table
            .windows(2)
            .map(|w| ((w[1] - w[0]) / target).ceil().max(1.0) as usize)
            .collect();
        let total: usize = counts.iter().sum::<usize>() + 1;
        if total > cap {
            let scale = (cap - 1) as f64 / (total - 1) as f64;
            counts
                .iter_mut()
                .for_each(|c| *c = ((*c as f64 * scale).floor() as usize).max(1));
        }
        let mut node_index = Vec::with_capacity(g.len());
        let mut pts = Vec::with_capacity(counts.iter().sum::<usize>() + 1);
        for (i, &m) in counts.iter().enumerate() {
            node_index.push(pts.len());
            pts.extend(g.refine(i, m));
        }
        node_index.push(pts.len());
        let last = g.nodes()[g.len() - 1];
        pts.push((last.theta, last.t, last.slope, last.s));

        let (stretch, image): (Vec<f64>, Vec<Point>) = pts
            .par_iter()
            .map(|&(theta, t, m, _)| stretch(map, Point::new(theta, t), m, n))
            .unzip();
        let s: Vec<f64> = pts.iter().map(|p| p.3).collect();
        let w = trapezoid_weights(&s);
        let mut phi: Vec<f64> = s.iter().map(|&x| src.density_at(x)).collect();
        // renormalize on the working quadrature so that Σ ρ w = 1 exactly
        let mass: f64 = phi.iter().zip(&w).map(|(p, w)| p * w).sum();
        phi.iter_mut().for_each(|p| *p /= mass);
        let mut sigma = Vec::with_capacity(s.len());
        sigma.push(0.0);
        for i in 1..s.len() {
            sigma.push(sigma[i - 1] + 0.5 * (stretch[i - 1] + stretch[i]) * (s[i] - s[i - 1]));
        }
        let total = sigma[sigma.len() - 1];
        let radius: Vec<f64> = sigma.iter().map(|&x| radius_at(x, total, a)).collect();
        let lo: Vec<usize> = (0..s.len())
            .map(|x| sigma.partition_point(|&y| y < sigma[x] - radius[x]).min(x))
            .collect();
        let hi: Vec<usize> = (0..s.len())
            .map(|x| (sigma.partition_point(|&y| y <= sigma[x] + radius[x]) - 1).max(x))
            .collect();
        // |V_y| = Σ_{x : lo_x ≤ y ≤ hi_x} w_x via a difference array
        let mut diff = vec![0.0; s.len() + 1];
        for x in 0..s.len() {
            diff[lo[x]] += w[x];
            diff[hi[x] + 1] -= w[x];
        }
        let mut vmass = Vec::with_capacity(s.len());
        let mut run = 0.0;
        for d in &diff[..s.len()] {
            run += d;
            vmass.push(run);
        }
        let q: Vec<f64> = phi.iter().zip(&vmass).map(|(p, v)| p / v).collect();
        let prefix = |f: &dyn Fn(usize) -> f64| {
            let mut out = Vec::with_capacity(s.len() + 1);
            out.push(0.0);
            for i in 0..s.len() {
                out.push(out[i] + f(i));
            }
            out
        };
        let pqw = prefix(&|i| q[i] * w[i]);
        let pws = prefix(&|i| w[i] * stretch[i]);
        let rho = (0..s.len()).map(|x| pqw[hi[x] + 1] - pqw[lo[x]]).collect();
        let smass = (0..s.len()).map(|x| pws[hi[x] + 1] - pws[lo[x]]).collect();
        Self {
            a,
            s,
            w,
            stretch,
            image,
            sigma,
            node_index,
            radius,
            lo,
            hi,
            q,
            rho,
            smass,
        }
    }

    fn len(&self) -> usize {
        self.s.len()
    }

    fn total(&self) -> f64 {
        self.sigma[self.sigma.len() - 1]
    }

    fn max_gap(&self) -> f64 {
        self.sigma.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Child density `φ_x(fⁿ y) = q(y) S_x / (ρ(x) stretch(y))` with respect
    /// to the child's normalized arclength.
    fn child_density(&self, x: usize, y: usize) -> f64 {
        self.q[y] * self.smass[x] / (self.rho[x] * self.stretch[y])
    }

    /// `q` interpolated linearly in `σ`.
    fn q_at(&self, sigma: f64) -> f64 {
        let i = self.sigma.partition_point(|&v| v <= sigma).clamp(1, self.len() - 1) - 1;
        let h = self.sigma[i + 1] - self.sigma[i];
        let u = if h > 0.0 {
            ((sigma - self.sigma[i]) / h).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.q[i] * (1.0 - u) + self.q[i + 1] * u
    }

    /// `V_y = [left, right]` when the window ends are monotone.
    fn v_range(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        let monotone = self.lo.windows(2).all(|w| w[0] <= w[1]) && self.hi.windows(2).all(|w| w[0] <= w[1]);
        if !monotone {
            return None;
        }
        let left = (0..self.len()).map(|y| self.hi.partition_point(|&h| h < y)).collect();
        let right = (0..self.len())
            .map(|y| self.lo.partition_point(|&l| l <= y) - 1)
            .collect();
        Some((left, right))
    }
}

/// Observed containment `B_{R/2}(y) ⊂ V_y ⊂ B_{3R}(y)` in pullback distance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub checked: usize,
    pub violations: usize,
    /// Smallest `dist(y, Γ ∖ V_y) / R(y)`; must exceed `1/2`.
    pub min_inner_ratio: f64,
    /// Largest `sup_{x ∈ V_y} dist(x, y) / R(y)`; must not exceed 3.
    pub max_outer_ratio: f64,
    pub contiguous: bool,
}

fn sandwich(grid: &Grid) -> SandwichReport {
    let Some((left, right)) = grid.v_range() else {
        return SandwichReport {
            checked: grid.len(),
            violations: grid.len(),
            min_inner_ratio: 0.0,
            max_outer_ratio: f64::INFINITY,
            contiguous: false,
        };
    };
    let n = grid.len();
    let sg = &grid.sigma;
    let (mut violations, mut inner, mut outer) = (0, f64::INFINITY, 0.0f64);
    for y in 0..n {
        let r = grid.radius[y];
        let gap_l = if left[y] == 0 {
            f64::INFINITY
        } else {
            sg[y] - sg[left[y] - 1]
        };
        let gap_r = if right[y] + 1 == n {
            f64::INFINITY
        } else {
            sg[right[y] + 1] - sg[y]
        };
        let reach = (sg[y] - sg[left[y]]).max(sg[right[y]] - sg[y]);
        let ok = gap_l.min(gap_r) > 0.5 * r && reach <= 3.0 * r;
        if !ok {
            violations += 1;
        }
        if r > 0.0 {
            inner = inner.min(gap_l.min(gap_r) / r);
            outer = outer.max(reach / r);
        }
    }
    SandwichReport {
        checked: n,
        violations,
        min_inner_ratio: inner,
        max_outer_ratio: outer,
        contiguous: true,
    }
}

/// One member of the lifted family, at a carrier node `x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftEntry {
    pub node: usize,
    pub x: Point,
    pub image: Point,
    /// Family weight density `ρ(x)`.
    pub rho: f64,
    pub radius: f64,
    /// `None` when `R(x)` vanishes (the endpoints): the child is a point.
    pub child: Option<SimpleAdmissibleMeasure>,
}

/// Measured constants of the child-density envelope
/// `D² e^{3a C0} C1² · 42`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeConstants {
    /// Lipschitz constant of `log stretch` in pullback distance.
    pub c0: f64,
    /// Largest stretch ratio within a single window.
    pub c1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftedMeasure {
    source: SimpleAdmissibleMeasure,
    map: SkewProductMap,
    n: usize,
    a: f64,
    opts: GridOptions,
    entries: Vec<LiftEntry>,
    working_nodes: usize,
    resolved: bool,
    total_pullback: f64,
    full_radius_mass: f64,
    weight_mass: f64,
    sandwich: SandwichReport,
    /// Extremes of `φ_x(y)` over all working pairs.
    pair_density_range: (f64, f64),
    constants: EnvelopeConstants,
}

impl LiftedMeasure {
    pub fn source(&self) -> &SimpleAdmissibleMeasure {
        &self.source
    }

    pub fn map(&self) -> &SkewProductMap {
        &self.map
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn entries(&self) -> &[LiftEntry] {
        &self.entries
    }

    pub fn grid_options(&self) -> GridOptions {
        self.opts
    }

    pub fn working_nodes(&self) -> usize {
        self.working_nodes
    }

    /// Whether consecutive working nodes are within `a/4` in pullback
    /// distance.
    pub fn resolved(&self) -> bool {
        self.resolved
    }

    pub fn total_pullback_length(&self) -> f64 {
        self.total_pullback
    }

    /// `∫_{R(x) = a} ρ d(Γ, 1)`: the family mass carried by full-radius
    /// children.
    pub fn full_radius_mass(&self) -> f64 {
        self.full_radius_mass
    }

    /// `Σ ρ(x) w_x` over the working grid; 1 up to rounding.
    pub fn weight_mass(&self) -> f64 {
        self.weight_mass
    }

    pub fn sandwich(&self) -> &SandwichReport {
        &self.sandwich
    }

    pub fn constants(&self) -> EnvelopeConstants {
        self.constants
    }

    /// Replaces the child density of entry `i` (renormalized); for probing
    /// the density checks.
    pub fn with_child_density(mut self, i: usize, density: Vec<f64>) -> Result<Self> {
        let entry = self
            .entries
            .get_mut(i)
            .ok_or_else(|| invalid("entry", format!("no entry {i}")))?;
        let child = entry
            .child
            .as_ref()
            .ok_or_else(|| invalid("entry", format!("entry {i} has a point child")))?;
        entry.child = Some(SimpleAdmissibleMeasure::new(child.carrier().clone(), density)?);
        Ok(self)
    }

    /// `Σ_x w_x ρ(x) ∫ Φ dφ_x` over the working grid: each pair `(x, y)`
    /// with `y ∈ W_x` contributes `w_x ρ(x) · φ_x(y) · J_x(y) w_y`, where
    /// `J_x(y) = stretch(y) / S_x` maps source weight to child arclength.
    pub fn evaluate(&self, dict: &TestDictionary) -> Result<EmpiricalMeasure> {
        let grid = Grid::build(&self.source, &self.map, self.n, self.a, self.opts);
        let (left, right) = grid
            .v_range()
            .ok_or_else(|| Error::Resolution("windows are not monotone".into()))?;
        let weights: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|y| {
                (left[y]..=right[y])
                    .filter(|&x| grid.lo[x] <= y && y <= grid.hi[x])
                    .map(|x| {
                        let jac = grid.stretch[y] / grid.smass[x];
                        grid.w[x] * grid.rho[x] * grid.child_density(x, y) * jac * grid.w[y]
                    })
                    .sum()
            })
            .collect();
        weighted_moments(&grid.image, &weights, dict)
    }
}

/// Normalized moments of weighted points, accumulated in parallel chunks.
pub(crate) fn weighted_moments(points: &[Point], weights: &[f64], dict: &TestDictionary) -> Result<EmpiricalMeasure> {
    const CHUNK: usize = 1 << 14;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyMeasure);
    }
    let moments = points
        .par_chunks(CHUNK)
        .zip(weights.par_chunks(CHUNK))
        .map(|(ps, ws)| {
            let mut acc = vec![0.0; dict.len()];
            let mut buf = vec![0.0; dict.len()];
            for (p, w) in ps.iter().zip(ws) {
                dict.eval_into(*p, &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += w * b);
            }
            acc
        })
        .reduce(
            || vec![0.0; dict.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    EmpiricalMeasure::from_moments(moments.into_iter().map(|m| m / total).collect(), dict)
}

/// Disintegrates `fⁿ_*(Γ, φ)` at scale `a`. Children are built at every
/// carrier node and must be admissible.
pub fn disintegrate(src: &SimpleAdmissibleMeasure, map: &SkewProductMap, n: usize, a: f64) -> Result<LiftedMeasure> {
    disintegrate_with(src, map, n, a, GridOptions::default())
}

/// [`disintegrate`] with explicit working-grid resolution.
pub fn disintegrate_with(
    src: &SimpleAdmissibleMeasure,
    map: &SkewProductMap,
    n: usize,
    a: f64,
    opts: GridOptions,
) -> Result<LiftedMeasure> {
    check_a(a)?;
    if opts.max_nodes < src.carrier().len() || opts.nodes_per_radius == 0 {
        return Err(Error::Resolution(format!(
            "node cap {} is below the carrier's {} nodes",
            opts.max_nodes,
            src.carrier().len()
        )));
    }
    if map.space() != Space::Cylinder || map.fiber_kind() != FiberKind::Kan {
        return Err(invalid("map", "disintegration is implemented for cylinder maps"));
    }
    let consts = AdmissibilityConstants::for_map(map);
    src.carrier().check_admissible(&consts)?;
    let grid = Grid::build(src, map, n, a, opts);
    let total = grid.total();
    if !(total > 0.0) {
        return Err(Error::Resolution("pullback length vanishes".into()));
    }
    let entries = (0..src.carrier().len())
        .into_par_iter()
        .map(|i| entry_at(src, map, n, &grid, i))
        .collect::<Result<Vec<_>>>()?;
    for e in &entries {
        if let Some(c) = &e.child {
            c.carrier().check_admissible(&consts)?;
        }
    }
    let weight_mass: f64 = (0..grid.len()).map(|x| grid.rho[x] * grid.w[x]).sum();
    let full_radius_mass = (0..grid.len())
        .filter(|&x| grid.radius[x] >= a)
        .map(|x| grid.rho[x] * grid.w[x])
        .sum::<f64>()
        / weight_mass;
    let pair_density_range = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            (grid.lo[x]..=grid.hi[x])
                .map(|y| grid.child_density(x, y))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)))
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        );
    let c0 = (1..grid.len())
        .filter(|&i| grid.sigma[i] > grid.sigma[i - 1])
        .map(|i| (grid.stretch[i] / grid.stretch[i - 1]).ln().abs() / (grid.sigma[i] - grid.sigma[i - 1]))
        .fold(0.0, f64::max);
    let c1 = (0..grid.len())
        .map(|x| {
            let (lo, hi) = grid.stretch[grid.lo[x]..=grid.hi[x]]
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
            hi / lo
        })
        .fold(1.0, f64::max);
    Ok(LiftedMeasure {
        source: src.clone(),
        map: *map,
        n,
        a,
        opts,
        entries,
        working_nodes: grid.len(),
        resolved: grid.max_gap() <= a / 4.0,
        total_pullback: total,
        full_radius_mass,
        weight_mass,
        sandwich: sandwich(&grid),
        pair_density_range,
        constants: EnvelopeConstants { c0, c1 },
    })
}

/// Offset orbit of `y = x + (δ, γ(θ_x + δ) − γ(θ_x))` along the orbit of a
/// carrier node, kept as exact base offsets `δ dʲ` and fiber differences so
/// that windows far below the resolution of `θ` stay resolved.
struct NodeOrbit {
    cos: Vec<f64>,
    sin: Vec<f64>,
    t: Vec<f64>,
    alpha: f64,
    d: f64,
}

impl NodeOrbit {
    fn new(map: &SkewProductMap, x: Point, n: usize) -> Self {
        let mut p = map.normalize(x);
        let (mut cos, mut sin, mut t) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n + 1));
        for _ in 0..n {
            let (s, c) = (TAU * p.theta).sin_cos();
            cos.push(c);
            sin.push(s);
            t.push(p.t);
            p = map.step(p);
        }
        t.push(p.t);
        Self {
            cos,
            sin,
            t,
            alpha: map.coupling(),
            d: f64::from(map.base_degree()),
        }
    }

    /// Image fiber offset and image tangent `(v_θ, v_t)` for source offset
    /// `δ` with fiber offset `dt` and source slope `m`.
    fn push(&self, delta: f64, dt: f64, m: f64) -> (f64, [f64; 2]) {
        let (mut o, mut dt, mut v) = (delta, dt, [1.0, m]);
        for j in 0..self.cos.len() {
            let (c, s, t) = (self.cos[j], self.sin[j], self.t[j]);
            let (so, co) = (TAU * o).sin_cos();
            let sh = (std::f64::consts::PI * o).sin();
            let c2 = c * co - s * so;
            let s2 = s * co + c * so;
            let dc = -2.0 * c * sh * sh - s * so;
            let t2 = t + dt;
            v = [
                self.d * v[0],
                -TAU * self.alpha * t2 * (1.0 - t2) * s2 * v[0] + (1.0 + self.alpha * (1.0 - 2.0 * t2) * c2) * v[1],
            ];
            dt += self.alpha * (dt * (1.0 - t - t2) * c2 + t * (1.0 - t) * dc);
            o *= self.d;
        }
        (dt, v)
    }
}

fn entry_at(src: &SimpleAdmissibleMeasure, map: &SkewProductMap, n: usize, grid: &Grid, i: usize) -> Result<LiftEntry> {
    let g = src.carrier();
    let node = g.nodes()[i];
    let xi = grid.node_index[i];
    let r = grid.radius[xi];
    let mut entry = LiftEntry {
        node: i,
        x: map.normalize(Point::new(node.theta, node.t)),
        image: grid.image[xi],
        rho: grid.rho[xi],
        radius: r,
        child: None,
    };
    if r <= 1e-9 * grid.a {
        return Ok(entry);
    }
    let orbit = NodeOrbit::new(map, Point::new(node.theta, node.t), n);
    let dn = orbit.d.powi(n as i32);
    let half = CHILD_SAMPLES / 2;
    // image graph over the base offset u ∈ [−R, R]; |dσ/du| ≥ 1 covers the window
    let local: Vec<(f64, f64, f64)> = (0..CHILD_SAMPLES)
        .map(|k| {
            let u = r * (k as f64 - half as f64) / half as f64;
            let delta = u / dn;
            let (dt0, m0) = g.offset_from_node(i, delta);
            let (dt, v) = orbit.push(delta, dt0, m0);
            (u, dt, v[1] / v[0])
        })
        .collect();
    let graph = Carrier::from_nodes(&local)?;
    let sc = graph.nodes()[half].s;
    let theta_n = entry.image.theta;
    let t_n = orbit.t[n];
    let mut pts = Vec::with_capacity(CHILD_NODES);
    let mut density = Vec::with_capacity(CHILD_NODES);
    for j in 0..CHILD_NODES {
        let off = r * (2.0 * j as f64 / (CHILD_NODES - 1) as f64 - 1.0);
        let (u, dt, m) = graph.at_arclength(sc + off);
        let (_, m0) = g.offset_from_node(i, u / dn);
        let stretch = dn * m.hypot(1.0) / m0.hypot(1.0);
        pts.push((theta_n + u, t_n + dt, m));
        density.push(grid.q_at(grid.sigma[xi] + off) / stretch);
    }
    let child = Carrier::from_nodes(&pts)?;
    entry.child = Some(SimpleAdmissibleMeasure::new(child, density)?);
    Ok(entry)
}

/// Analytic density envelope for the children.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityBoundsReport {
    pub big_d: f64,
    pub envelope: f64,
    pub constants: EnvelopeConstants,
    pub min_density: f64,
    pub max_density: f64,
    pub passed: bool,
}

/// Checks `1/E ≤ φ_x ≤ E` with `E = D² e^{3a C0} C1² · 42`, over all working
/// pairs and all stored children.
pub fn density_bounds_check(lift: &LiftedMeasure, big_d: f64) -> Result<DensityBoundsReport> {
    if !(big_d >= 1.0) {
        return Err(invalid("D", "density bound must be at least 1"));
    }
    lift.source.check_density_bounds(big_d)?;
    let k = lift.constants;
    let envelope = big_d * big_d * (3.0 * lift.a * k.c0).exp() * k.c1 * k.c1 * 42.0;
    let (mut lo, mut hi) = lift.pair_density_range;
    for e in &lift.entries {
        if let Some(c) = &e.child {
            let (l, h) = c.density_range();
            lo = lo.min(l);
            hi = hi.max(h);
        }
    }
    Ok(DensityBoundsReport {
        big_d,
        envelope,
        constants: k,
        min_density: lo,
        max_density: hi,
        passed: lo >= 1.0 / envelope && hi <= envelope,
    })
}

/// Independent oracle for the lift: midpoint quadrature of `∫ Φ(fⁿ γ(θ)) φ ds` with
/// `samples` points uniform in the base coordinate.
pub fn direct_pushforward(
    src: &SimpleAdmissibleMeasure,
    map: &SkewProductMap,
    n: usize,
    samples: usize,
    dict: &TestDictionary,
) -> Result<EmpiricalMeasure> {
    if samples == 0 {
        return Err(invalid("samples", "need at least one sample"));
    }
    let g = src.carrier();
    let (t0, t1) = (g.nodes()[0].theta, g.nodes()[g.len() - 1].theta);
    let h = (t1 - t0) / samples as f64;
    let (points, weights): (Vec<Point>, Vec<f64>) = (0..samples)
        .into_par_iter()
        .map(|k| {
            let theta = t0 + (k as f64 + 0.5) * h;
            let (t, m) = g.eval_theta(theta);
            let s = g.arclength_at_theta(theta);
            (map.iterate(Point::new(theta, t), n), src.density_at(s) * m.hypot(1.0))
        })
        .unzip();
    weighted_moments(&points, &weights, dict)
}

/// Uniform Cesàro average `(1/n) Σ_{k<n} fᵏ_*(Γ, φ)`, each term disintegrated.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CesaroLift {
    pub components: Vec<LiftedMeasure>,
}

impl CesaroLift {
    /// Average full-radius mass over the components.
    pub fn full_radius_fraction(&self) -> f64 {
        self.components.iter().map(|c| c.full_radius_mass()).sum::<f64>() / self.components.len() as f64
    }

    pub fn evaluate(&self, dict: &TestDictionary) -> Result<EmpiricalMeasure> {
        let parts = self
            .components
            .iter()
            .map(|c| c.evaluate(dict))
            .collect::<Result<Vec<_>>>()?;
        let w = 1.0 / parts.len() as f64;
        let refs: Vec<(f64, &EmpiricalMeasure)> = parts.iter().map(|p| (w, p)).collect();
        EmpiricalMeasure::mixture(&refs, dict)
    }
}

pub fn cesaro_lift(src: &SimpleAdmissibleMeasure, map: &SkewProductMap, n: usize, a: f64) -> Result<CesaroLift> {
    if n == 0 {
        return Err(invalid("n", "Cesàro horizon must be at least 1"));
    }
    let components = (0..n)
        .map(|k| {
            let opts = GridOptions {
                max_nodes: CESARO_WORKING_NODES.max(src.carrier().len()),
                ..GridOptions::default()
            };
            disintegrate_with(src, map, k, a, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CesaroLift { components })
}
