use serde::{Deserialize, Serialize};

use crate::dynamics::{Point, SkewProductMap};
use crate::error::{invalid, Error, Result};
use crate::hyperbolicity::{auto_aperture, CurveSeed};

/// Largest admissible carrier radius (base-coordinate arclength).
pub const R0: f64 = 0.1;

// 8-point Gauss–Legendre rule on [0, 1].
const GL_X: [f64; 8] = [
    0.019_855_071_751_231_856,
    0.101_666_761_293_186_6,
    0.237_233_795_041_835_5,
    0.408_282_678_752_175_1,
    0.591_717_321_247_824_9,
    0.762_766_204_958_164_5,
    0.898_333_238_706_813_4,
    0.980_144_928_248_768_2,
];
const GL_W: [f64; 8] = [
    0.050_614_268_145_188_13,
    0.111_190_517_226_687_24,
    0.156_853_322_938_943_64,
    0.181_341_891_689_180_99,
    0.181_341_891_689_180_99,
    0.156_853_322_938_943_64,
    0.111_190_517_226_687_24,
    0.050_614_268_145_188_13,
];

/// `∫₀ʰ f` by 8-point Gauss–Legendre.
pub(crate) fn gauss_legendre(h: f64, f: impl Fn(f64) -> f64) -> f64 {
    GL_X.iter().zip(&GL_W).map(|(x, w)| w * f(x * h)).sum::<f64>() * h
}

/// A node of a carrier curve: arclength, unwrapped base coordinate, fiber
/// coordinate and slope `dt/dθ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarrierNode {
    pub s: f64,
    pub theta: f64,
    pub t: f64,
    pub slope: f64,
}

/// A `u = 1` carrier: a short curve `t = γ(θ)` tangent to the unstable cone,
/// stored as cubic Hermite nodes over an unwrapped base interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Carrier {
    centre: Point,
    radius: f64,
    nodes: Vec<CarrierNode>,
    lip_const: f64,
}

/// Cubic `t_i + m_i τ + c2 τ² + c3 τ³` on one segment.
#[derive(Clone, Copy, Debug)]
struct Segment {
    t0: f64,
    m0: f64,
    c2: f64,
    c3: f64,
    h: f64,
}

impl Segment {
    fn new(a: &CarrierNode, b: &CarrierNode) -> Self {
        let h = b.theta - a.theta;
        let q = (b.t - a.t) / h;
        Self {
            t0: a.t,
            m0: a.slope,
            c2: (3.0 * q - 2.0 * a.slope - b.slope) / h,
            c3: (a.slope + b.slope - 2.0 * q) / (h * h),
            h,
        }
    }

    fn value(&self, tau: f64) -> f64 {
        self.t0 + tau * (self.m0 + tau * (self.c2 + tau * self.c3))
    }

    fn slope(&self, tau: f64) -> f64 {
        self.m0 + tau * (2.0 * self.c2 + 3.0 * self.c3 * tau)
    }

    /// `p(τ + ε) − p(τ)` without cancellation for small `ε`.
    fn diff(&self, tau: f64, eps: f64) -> f64 {
        eps * (self.m0 + self.c2 * (2.0 * tau + eps) + self.c3 * (3.0 * tau * tau + 3.0 * tau * eps + eps * eps))
    }

    fn arclength(&self, tau: f64) -> f64 {
        gauss_legendre(tau, |x| self.slope(x).hypot(1.0))
    }

    fn max_curvature(&self) -> f64 {
        (2.0 * self.c2)
            .abs()
            .max((2.0 * self.c2 + 6.0 * self.c3 * self.h).abs())
    }
}

impl Carrier {
    /// Builds a carrier from `(θ, t, slope)` triples with strictly increasing
    /// unwrapped `θ`. The node count must be odd so the centre is a node.
    pub fn from_nodes(points: &[(f64, f64, f64)]) -> Result<Self> {
        if points.len() < 3 || points.len() % 2 == 0 {
            return Err(Error::Resolution(format!(
                "carrier needs an odd number (≥ 3) of nodes, got {}",
                points.len()
            )));
        }
        if points
            .iter()
            .any(|p| !(p.0.is_finite() && p.1.is_finite() && p.2.is_finite()))
        {
            return Err(invalid("nodes", "non-finite node coordinates"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::DegenerateCurve("base coordinates must increase strictly".into()));
        }
        let mut nodes: Vec<CarrierNode> = points
            .iter()
            .map(|&(theta, t, slope)| CarrierNode {
                s: 0.0,
                theta,
                t,
                slope,
            })
            .collect();
        let mut lip: f64 = 0.0;
        for i in 1..nodes.len() {
            let seg = Segment::new(&nodes[i - 1], &nodes[i]);
            nodes[i].s = nodes[i - 1].s + seg.arclength(seg.h);
            lip = lip.max(seg.max_curvature());
        }
        let radius = nodes[nodes.len() - 1].s / 2.0;
        if radius > R0 * (1.0 + 1e-9) {
            return Err(invalid("radius", format!("carrier radius {radius} exceeds r0 = {R0}")));
        }
        let mid = nodes[nodes.len() / 2];
        Ok(Self {
            centre: Point::new(mid.theta, mid.t),
            radius,
            nodes,
            lip_const: lip,
        })
    }

    /// Samples the graph `θ ↦ (γ(θ), γ'(θ))` with `2^k + 1` nodes, uniform in
    /// `θ` on each side of `theta_c`, each side of arclength `r`.
    pub fn from_graph(theta_c: f64, r: f64, k: u32, gamma: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        if !(r > 0.0 && r <= R0) {
            return Err(invalid("radius", format!("need 0 < r ≤ {R0}, got {r}")));
        }
        if !(1..=24).contains(&k) {
            return Err(invalid("k", "node exponent must be in 1..=24"));
        }
        let speed = |x: f64| gamma(x).1.hypot(1.0);
        // arclength of [θc, θc + e] by composite Gauss–Legendre
        let length = |e: f64| {
            let panels = 64;
            let h = e / panels as f64;
            (0..panels)
                .map(|p| gauss_legendre(h, |x| speed(theta_c + p as f64 * h + x)))
                .sum::<f64>()
        };
        let extent = |sign: f64| {
            let mut e = sign * r;
            for _ in 0..50 {
                let g = sign * length(e) - r;
                let step = g / speed(theta_c + e);
                e -= sign * step;
                if step.abs() < 1e-15 * r {
                    break;
                }
            }
            e
        };
        let (lo, hi) = (extent(-1.0), extent(1.0));
        let half = 1usize << (k - 1);
        let mut pts = Vec::with_capacity(2 * half + 1);
        for i in 0..=2 * half {
            let theta = if i <= half {
                theta_c + lo * (half - i) as f64 / half as f64
            } else {
                theta_c + hi * (i - half) as f64 / half as f64
            };
            let (t, slope) = gamma(theta);
            pts.push((theta, t, slope));
        }
        Self::from_nodes(&pts)
    }

    /// Horizontal segment `t = c.t` of half-length `r` centred at `c`.
    pub fn horizontal(c: Point, r: f64, k: u32) -> Result<Self> {
        Self::from_graph(c.theta, r, k, |_| (c.t, 0.0))
    }

    /// Parabolic arc `t = t_c + b₁(θ−θ_c) + b₂(θ−θ_c)²` with random
    /// coefficients, admissible for `consts`.
    pub fn random(consts: &AdmissibilityConstants, r: f64, k: u32, rng: &mut impl rand::Rng) -> Result<Self> {
        let theta_c: f64 = rng.gen();
        let t_c = rng.gen_range(0.25..0.75);
        let b1 = rng.gen_range(-0.5..0.5) * consts.aperture;
        let b2_max = (0.25 * consts.k0).min((0.4 * consts.aperture) / (2.0 * 1.5 * r));
        let b2 = rng.gen_range(-1.0..1.0) * b2_max;
        Self::from_graph(theta_c, r, k, |x| {
            let u = x - theta_c;
            (t_c + b1 * u + b2 * u * u, b1 + 2.0 * b2 * u)
        })
    }

    pub fn centre(&self) -> Point {
        self.centre
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> &[CarrierNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Total arclength.
    pub fn arclength(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].s
    }

    /// Measured Lipschitz constant of the slope field, `sup |γ''|`.
    pub fn lip_const(&self) -> f64 {
        self.lip_const
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.nodes.iter().map(|n| n.slope.abs()).fold(0.0, f64::max)
    }

    fn segment(&self, i: usize) -> Segment {
        Segment::new(&self.nodes[i], &self.nodes[i + 1])
    }

    /// Index of the segment containing base coordinate `theta` (clamped).
    fn segment_at_theta(&self, theta: f64) -> usize {
        let i = self.nodes.partition_point(|n| n.theta <= theta);
        i.clamp(1, self.nodes.len() - 1) - 1
    }

    fn segment_at_s(&self, s: f64) -> usize {
        let i = self.nodes.partition_point(|n| n.s <= s);
        i.clamp(1, self.nodes.len() - 1) - 1
    }

    /// `(γ(θ), γ'(θ))` for `θ` inside the base interval.
    pub fn eval_theta(&self, theta: f64) -> (f64, f64) {
        let i = self.segment_at_theta(theta);
        let seg = self.segment(i);
        let tau = theta - self.nodes[i].theta;
        (seg.value(tau), seg.slope(tau))
    }

    /// `γ''(θ)` of the Hermite interpolant.
    pub fn curvature_at(&self, theta: f64) -> f64 {
        let i = self.segment_at_theta(theta);
        let seg = self.segment(i);
        let tau = (theta - self.nodes[i].theta).clamp(0.0, seg.h);
        2.0 * seg.c2 + 6.0 * seg.c3 * tau
    }

    /// `(γ(θᵢ + ε) − γ(θᵢ), γ'(θᵢ + ε))` relative to node `i`, accurate for
    /// tiny `ε`.
    pub fn offset_from_node(&self, i: usize, eps: f64) -> (f64, f64) {
        let theta = self.nodes[i].theta + eps;
        let j = self.segment_at_theta(theta);
        let seg = self.segment(j);
        let tau = theta - self.nodes[j].theta;
        let dt = if j == i {
            seg.diff(0.0, eps)
        } else if j + 1 == i {
            seg.diff(seg.h, eps)
        } else {
            seg.value(tau) - self.nodes[i].t
        };
        (dt, seg.slope(tau))
    }

    /// `(θ, t, slope)` at arclength `s ∈ [0, L]`.
    pub fn at_arclength(&self, s: f64) -> (f64, f64, f64) {
        let s = s.clamp(0.0, self.arclength());
        let i = self.segment_at_s(s);
        let seg = self.segment(i);
        let target = s - self.nodes[i].s;
        let seg_len = self.nodes[i + 1].s - self.nodes[i].s;
        let mut tau = seg.h * (target / seg_len).clamp(0.0, 1.0);
        for _ in 0..30 {
            let g = seg.arclength(tau) - target;
            let step = g / seg.slope(tau).hypot(1.0);
            tau = (tau - step).clamp(0.0, seg.h);
            if step.abs() <= 1e-16 * seg.h.max(1e-300) {
                break;
            }
        }
        (self.nodes[i].theta + tau, seg.value(tau), seg.slope(tau))
    }

    /// Arclength from the first node to base coordinate `theta`.
    pub fn arclength_at_theta(&self, theta: f64) -> f64 {
        let i = self.segment_at_theta(theta);
        let seg = self.segment(i);
        self.nodes[i].s + seg.arclength((theta - self.nodes[i].theta).clamp(0.0, seg.h))
    }

    /// Gauss–Legendre points of segment `i` as `(θ, t, slope, dθ-weight)`.
    pub(crate) fn quadrature_points(&self, i: usize) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        let seg = self.segment(i);
        let theta0 = self.nodes[i].theta;
        GL_X.iter().zip(&GL_W).map(move |(x, w)| {
            let tau = x * seg.h;
            (theta0 + tau, seg.value(tau), seg.slope(tau), w * seg.h)
        })
    }

    /// `m` points `(θ, t, slope, s)` uniform in `θ` on segment `i`, starting
    /// at node `i` and excluding node `i + 1`.
    pub(crate) fn refine(&self, i: usize, m: usize) -> Vec<(f64, f64, f64, f64)> {
        let seg = self.segment(i);
        let step = seg.h / m as f64;
        let mut s = self.nodes[i].s;
        let mut out = Vec::with_capacity(m);
        for j in 0..m {
            let tau = j as f64 * step;
            if j > 0 {
                let a = tau - step;
                s += gauss_legendre(step, |x| seg.slope(a + x).hypot(1.0));
            }
            out.push((self.nodes[i].theta + tau, seg.value(tau), seg.slope(tau), s));
        }
        out
    }

    /// Cone and curvature gates.
    pub fn check_admissible(&self, consts: &AdmissibilityConstants) -> Result<()> {
        let slope = self.max_abs_slope();
        if slope > consts.aperture {
            return Err(Error::Inadmissible(format!(
                "slope {slope} outside the unstable cone (aperture {})",
                consts.aperture
            )));
        }
        if self.lip_const > consts.k0 {
            return Err(Error::Inadmissible(format!(
                "slope Lipschitz constant {} exceeds K0 = {}",
                self.lip_const, consts.k0
            )));
        }
        if self.radius > consts.r0 * (1.0 + 1e-9) {
            return Err(Error::Inadmissible(format!(
                "radius {} exceeds r0 = {}",
                self.radius, consts.r0
            )));
        }
        Ok(())
    }
}

impl CurveSeed for Carrier {
    fn point_at(&self, u: f64) -> Point {
        let (theta, t, _) = self.at_arclength(u * self.arclength());
        Point::new(theta.rem_euclid(1.0), t)
    }

    fn length(&self) -> f64 {
        self.arclength()
    }

    fn max_slope(&self) -> f64 {
        self.max_abs_slope()
    }
}

/// Global constants of the admissible class: cone aperture, the slope
/// Lipschitz bound `K0` and the carrier radius bound `r0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibilityConstants {
    pub aperture: f64,
    pub k0: f64,
    pub r0: f64,
    /// `sup |h_θθ + 2 h_θt m + h_tt m²|` over the phase space and the cone.
    pub curvature_source: f64,
    /// Curvature contraction `sup ∂_t h / d²` of the graph transform.
    pub curvature_rate: f64,
}

impl AdmissibilityConstants {
    /// The graph transform acts on curvature `κ = γ''` by
    /// `κ' = (h_θθ + 2h_θt m + h_tt m² + ∂_t h κ) / d²`, so `K* = C / (d² − sup ∂_t h)`
    /// is invariant; `K0 = 2 K*` (floored at 1 for decoupled maps).
    pub fn for_map(map: &SkewProductMap) -> Self {
        let aperture = auto_aperture(map).aperture();
        let d2 = f64::from(map.base_degree()).powi(2);
        let sup_dt = map.derivative_bounds().sup_dt;
        let fiber = map.space().fiber_length();
        let grid = 256;
        let mut c: f64 = 0.0;
        for i in 0..=grid {
            for j in 0..=grid {
                let p = Point::new(i as f64 / grid as f64, fiber * j as f64 / grid as f64);
                let h = map.hessian(p);
                let q = |m: f64| (h.theta_theta + 2.0 * h.t_theta * m + h.tt * m * m).abs();
                c = c.max(q(aperture)).max(q(-aperture)).max(q(0.0));
                if h.tt != 0.0 {
                    let vertex = -h.t_theta / h.tt;
                    if vertex.abs() <= aperture {
                        c = c.max(q(vertex));
                    }
                }
            }
        }
        let k_star = c / (d2 - sup_dt);
        Self {
            aperture,
            k0: (2.0 * k_star).max(1.0),
            r0: R0,
            curvature_source: c,
            curvature_rate: sup_dt / d2,
        }
    }
}
