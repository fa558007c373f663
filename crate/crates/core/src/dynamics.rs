//! Skew-product local diffeomorphisms `(θ, t) ↦ (dθ mod 1, h_θ(t))` on the
//! cylinder `S¹ × [0, 1]` and on the torus `S¹ × ℝ/2ℤ`.
//!
//! The base is the linear expanding map `θ ↦ dθ`, so the unstable direction is
//! horizontal and the central direction is the fiber. The tangent map in these
//! block coordinates is lower triangular:
//!
//! ```text
//! Df = | d      0     |
//!      | ∂_θ h  ∂_t h |
//! ```

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point `(θ, t)`; `θ` is taken mod 1, `t` lives in `[0, 1]` (cylinder) or
/// mod 2 (torus).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub theta: f64,
    pub t: f64,
}

impl Point {
    pub const fn new(theta: f64, t: f64) -> Self {
        Self { theta, t }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// Fiber `[0, 1]` with invariant boundary circles.
    Cylinder,
    /// Two mirrored cylinders glued along their boundaries, fiber `ℝ/2ℤ`.
    Torus,
}

impl Space {
    /// Length of the fiber coordinate range.
    pub fn fiber_length(self) -> f64 {
        match self {
            Space::Cylinder => 1.0,
            Space::Torus => 2.0,
        }
    }
}

/// Fiber families `h_θ(t)` on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberKind {
    /// `h_θ(t) = t + α t (1 − t) cos 2πθ`.
    Kan,
}

/// One-step tangent map in `E^u ⊕ E^c` block coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentBlock {
    /// Unstable (base) entry, equal to the base degree.
    pub du: f64,
    /// Central (fiber) entry `∂_t h`.
    pub dc: f64,
    /// Mixed entry `∂_θ h`.
    pub dcu: f64,
}

impl TangentBlock {
    /// Image of the tangent vector `(v_θ, v_t)`.
    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.du * v[0], self.dcu * v[0] + self.dc * v[1]]
    }

    pub fn jacobian(&self) -> f64 {
        self.du * self.dc
    }
}

/// Second derivatives of the fiber map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberHessian {
    pub tt: f64,
    pub t_theta: f64,
    pub theta_theta: f64,
}

/// Analytic bounds on the fiber derivatives over the whole phase space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivativeBounds {
    pub sup_dt: f64,
    pub inf_dt: f64,
    pub sup_dtheta: f64,
}

/// A `C²` skew-product local diffeomorphism over `θ ↦ dθ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewProductMap {
    base_degree: u32,
    coupling: f64,
    space: Space,
    fiber_kind: FiberKind,
}

impl fmt::Display for SkewProductMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.space {
            Space::Cylinder => "kan_cylinder",
            Space::Torus => "kan_torus",
        };
        write!(f, "{name}(d={}, alpha={})", self.base_degree, self.coupling)
    }
}

impl SkewProductMap {
    /// Kan-type cylinder map `(θ, t) ↦ (dθ, t + α t(1−t) cos 2πθ)`.
    pub fn kan_cylinder(d: u32, alpha: f64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("d", format!("base degree must be at least 2, got {d}")));
        }
        if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
            return Err(invalid(
                "alpha",
                format!("coupling must lie in [0, 1) to keep fibers invertible, got {alpha}"),
            ));
        }
        if alpha + 1.0 >= f64::from(d) {
            return Err(invalid(
                "alpha",
                format!("alpha + 1 = {} must be below d = {d} for domination", alpha + 1.0),
            ));
        }
        Ok(Self {
            base_degree: d,
            coupling: alpha,
            space: Space::Cylinder,
            fiber_kind: FiberKind::Kan,
        })
    }

    /// Glue the cylinder map to its mirror image `t ↦ 2 − t`, giving a local
    /// diffeomorphism of the torus with fiber `ℝ/2ℤ`.
    pub fn torus_double(&self) -> Result<Self> {
        match self.space {
            Space::Torus => Err(Error::AlreadyTorus),
            Space::Cylinder => Ok(Self {
                space: Space::Torus,
                ..*self
            }),
        }
    }

    pub fn base_degree(&self) -> u32 {
        self.base_degree
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn fiber_kind(&self) -> FiberKind {
        self.fiber_kind
    }

    #[inline]
    fn degree(&self) -> f64 {
        f64::from(self.base_degree)
    }

    /// Bring a point back to its canonical coordinate ranges.
    #[inline]
    pub fn normalize(&self, p: Point) -> Point {
        let theta = wrap(p.theta, 1.0);
        let t = match self.space {
            Space::Cylinder => p.t.clamp(0.0, 1.0),
            Space::Torus => wrap(p.t, 2.0),
        };
        Point { theta, t }
    }

    #[inline]
    pub fn base(&self, theta: f64) -> f64 {
        let x = self.degree() * theta;
        // truncating cast avoids a libm `floor` call on baseline x86-64
        if (0.0..1e15).contains(&x) {
            x - (x as u64) as f64
        } else {
            x - x.floor()
        }
    }

    /// Cylinder fiber value `h_θ(t)` for `t ∈ [0, 1]`, given `cos 2πθ`.
    #[inline]
    fn h(&self, cos: f64, t: f64) -> f64 {
        match self.fiber_kind {
            FiberKind::Kan => t + self.coupling * t * (1.0 - t) * cos,
        }
    }

    #[inline]
    fn h_t(&self, cos: f64, t: f64) -> f64 {
        match self.fiber_kind {
            FiberKind::Kan => 1.0 + self.coupling * (1.0 - 2.0 * t) * cos,
        }
    }

    #[inline]
    fn h_theta(&self, sin: f64, t: f64) -> f64 {
        match self.fiber_kind {
            FiberKind::Kan => -TAU * self.coupling * t * (1.0 - t) * sin,
        }
    }

    /// Fiber map `h_θ(t)` in the map's own space.
    #[inline]
    pub fn fiber(&self, theta: f64, t: f64) -> f64 {
        let cos = (TAU * theta).cos();
        self.fiber_with_cos(cos, t)
    }

    #[inline]
    fn fiber_with_cos(&self, cos: f64, t: f64) -> f64 {
        match self.space {
            Space::Cylinder => self.h(cos, t),
            Space::Torus => {
                let t = wrap(t, 2.0);
                let v = if t <= 1.0 {
                    self.h(cos, t)
                } else {
                    2.0 - self.h(cos, 2.0 - t)
                };
                wrap(v, 2.0)
            }
        }
    }

    #[inline]
    pub fn step(&self, p: Point) -> Point {
        self.step_with_dc(p).0
    }

    /// One step together with the central derivative `∂_t h` at `p`; the
    /// hot path for cocycle sums.
    #[inline]
    pub fn step_with_dc(&self, p: Point) -> (Point, f64) {
        self.step_given_cos(p, (TAU * p.theta).cos())
    }

    /// [`step_with_dc`](Self::step_with_dc) with `cos 2πθ` supplied by the
    /// caller.
    #[inline]
    pub fn step_given_cos(&self, p: Point, cos: f64) -> (Point, f64) {
        let (t_img, dc) = match self.space {
            Space::Cylinder => (self.h(cos, p.t), self.h_t(cos, p.t)),
            Space::Torus => {
                let t = wrap(p.t, 2.0);
                if t <= 1.0 {
                    (self.h(cos, t), self.h_t(cos, t))
                } else {
                    (2.0 - self.h(cos, 2.0 - t), self.h_t(cos, 2.0 - t))
                }
            }
        };
        let t_img = match self.space {
            Space::Cylinder => t_img.clamp(0.0, 1.0),
            Space::Torus => wrap(t_img, 2.0),
        };
        (
            Point {
                theta: self.base(p.theta),
                t: t_img,
            },
            dc,
        )
    }

    pub fn tangent(&self, p: Point) -> TangentBlock {
        let (sin, cos) = (TAU * p.theta).sin_cos();
        let (dc, dcu) = match self.space {
            Space::Cylinder => (self.h_t(cos, p.t), self.h_theta(sin, p.t)),
            Space::Torus => {
                let t = wrap(p.t, 2.0);
                if t <= 1.0 {
                    (self.h_t(cos, t), self.h_theta(sin, t))
                } else {
                    (self.h_t(cos, 2.0 - t), -self.h_theta(sin, 2.0 - t))
                }
            }
        };
        TangentBlock {
            du: self.degree(),
            dc,
            dcu,
        }
    }

    /// Second derivatives of the fiber map at `p`. On the torus the mirror
    /// copy flips the sign of `∂_tt` and `∂_θθ`, so these are one-sided at the
    /// seams `t ∈ {0, 1}`.
    pub fn hessian(&self, p: Point) -> FiberHessian {
        let (sin, cos) = (TAU * p.theta).sin_cos();
        let a = self.coupling;
        let kan = |t: f64| FiberHessian {
            tt: -2.0 * a * cos,
            t_theta: -TAU * a * (1.0 - 2.0 * t) * sin,
            theta_theta: -TAU * TAU * a * t * (1.0 - t) * cos,
        };
        match self.space {
            Space::Cylinder => kan(p.t),
            Space::Torus => {
                let t = wrap(p.t, 2.0);
                if t <= 1.0 {
                    kan(t)
                } else {
                    let h = kan(2.0 - t);
                    FiberHessian {
                        tt: -h.tt,
                        t_theta: h.t_theta,
                        theta_theta: -h.theta_theta,
                    }
                }
            }
        }
    }

    /// Sharp bounds on the fiber derivatives (attained on the boundary
    /// circles and at `t = 1/2`).
    pub fn derivative_bounds(&self) -> DerivativeBounds {
        match self.fiber_kind {
            FiberKind::Kan => DerivativeBounds {
                sup_dt: 1.0 + self.coupling,
                inf_dt: 1.0 - self.coupling,
                sup_dtheta: PI * self.coupling / 2.0,
            },
        }
    }

    /// `sup|∂_t h| / d`, the domination rate with `n₀ = 0`.
    pub fn domination_ratio(&self) -> f64 {
        self.derivative_bounds().sup_dt / self.degree()
    }

    /// `orbit(p, n) = [p, f(p), …, fⁿ(p)]`.
    pub fn orbit(&self, p: Point, n: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(n + 1);
        let mut x = self.normalize(p);
        out.push(x);
        for _ in 0..n {
            x = self.step(x);
            out.push(x);
        }
        out
    }

    /// `fⁿ(p)`.
    pub fn iterate(&self, p: Point, n: usize) -> Point {
        (0..n).fold(self.normalize(p), |x, _| self.step(x))
    }

    /// `fⁿ(p)` and `Dfⁿ(p) v`.
    pub fn iterate_tangent(&self, p: Point, v: [f64; 2], n: usize) -> (Point, [f64; 2]) {
        let mut x = self.normalize(p);
        let mut v = v;
        for _ in 0..n {
            v = self.tangent(x).apply(v);
            x = self.step(x);
        }
        (x, v)
    }

    /// Reflection `(θ, t) ↦ (θ, 2 − t)` conjugating the torus map to itself.
    pub fn mirror(&self, p: Point) -> Point {
        Point {
            theta: p.theta,
            t: wrap(2.0 - p.t, 2.0),
        }
    }
}

/// Sum of logarithms of positive factors, taking one `ln` per block of
/// factors instead of one per factor.
#[derive(Clone, Copy, Debug)]
pub struct LogProduct {
    sum: f64,
    block: f64,
    len: u32,
}

impl Default for LogProduct {
    fn default() -> Self {
        Self {
            sum: 0.0,
            block: 1.0,
            len: 0,
        }
    }
}

impl LogProduct {
    // factors lie in [1 − α, 1 + α] ⊂ (0, 2); 32 of them stay far from
    // overflow and underflow
    const BLOCK: u32 = 32;

    #[inline]
    pub fn push(&mut self, factor: f64) {
        self.block *= factor;
        self.len += 1;
        if self.len == Self::BLOCK {
            self.flush();
        }
    }

    #[inline]
    fn flush(&mut self) {
        self.sum += self.block.ln();
        self.block = 1.0;
        self.len = 0;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.block.ln()
    }
}

#[inline]
pub(crate) fn wrap(x: f64, period: f64) -> f64 {
    if (0.0..period).contains(&x) {
        return x;
    }
    let y = x.rem_euclid(period);
    if y >= period {
        0.0
    } else {
        y
    }
}
