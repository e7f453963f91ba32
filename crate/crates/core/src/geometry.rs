//! Strictly convex C² tables parametrized by arc length.
//!
//! Every table is described internally by an analytic closed curve
//! `u ↦ γ(u)`, `u ∈ [0, 2π)`, traversed counterclockwise with `u = 0` at the
//! rightmost point. Arc length `S(u)` is tabulated on a dense `u` grid with
//! Gauss–Legendre panels and inverted by Hermite cubic interpolation plus a
//! Newton correction, so positions, tangents and curvatures at arc length
//! `s` come from the exact curve rather than from interpolated samples.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, Vec2, TAU};
use crate::tolerances::{Tolerances, DEFAULT_RESOLUTION};

/// The family and parameters of a table boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum TableKind {
    Circle {
        radius: f64,
    },
    Ellipse {
        semi_axis_a: f64,
        semi_axis_b: f64,
    },
    /// `|x/a|^p + |y/b|^p = 1`, `p ≥ 2`.
    Superellipse {
        semi_axis_a: f64,
        semi_axis_b: f64,
        exponent: f64,
    },
    /// Star-shaped boundary `r(φ) = Σ_k cos[k]·cos(kφ) + sin[k]·sin(kφ)` in
    /// polar coordinates about the origin (`sin[0]` is ignored).
    PolarFourier {
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub kind: TableKind,
    /// Nodes in the arc-length table.
    pub resolution: usize,
}

impl TableSpec {
    pub fn circle(radius: f64) -> Self {
        Self::with_default_resolution(TableKind::Circle { radius })
    }

    pub fn ellipse(semi_axis_a: f64, semi_axis_b: f64) -> Self {
        Self::with_default_resolution(TableKind::Ellipse { semi_axis_a, semi_axis_b })
    }

    pub fn superellipse(semi_axis_a: f64, semi_axis_b: f64, exponent: f64) -> Self {
        Self::with_default_resolution(TableKind::Superellipse { semi_axis_a, semi_axis_b, exponent })
    }

    pub fn polar_fourier(cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self::with_default_resolution(TableKind::PolarFourier { cos, sin })
    }

    fn with_default_resolution(kind: TableKind) -> Self {
        Self { kind, resolution: DEFAULT_RESOLUTION }
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }
}

/// Position and first two parameter derivatives of the boundary curve.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub pos: Vec2,
    pub d1: Vec2,
    pub d2: Vec2,
    /// `d1 / |d1|`.
    pub tangent: Vec2,
}

impl Frame {
    #[inline]
    pub fn curvature(&self) -> f64 {
        let speed = self.d1.norm();
        self.d1.cross(self.d2) / (speed * speed * speed)
    }

    #[inline]
    pub fn unit_tangent(&self) -> Vec2 {
        self.tangent
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Circle { r: f64 },
    Ellipse { a: f64, b: f64 },
    Superellipse { a: f64, b: f64, p: f64 },
    PolarFourier { cos: Vec<f64>, sin: Vec<f64>, phase: f64 },
}

/// Frame of the polar curve `r(φ)(cos φ, sin φ)` from `r`, `r'`, `r''`.
#[inline]
fn polar_frame(phi: f64, r: f64, r1: f64, r2: f64) -> Frame {
    let (s, c) = math::sin_cos(phi);
    let radial = Vec2::new(c, s);
    let normal = Vec2::new(-s, c);
    let d1 = radial.scale(r1) + normal.scale(r);
    Frame { pos: radial.scale(r), d1, d2: radial.scale(r2 - r) + normal.scale(2.0 * r1), tangent: d1.normalized() }
}

/// `r`, `r'`, `r''` of the superellipse in polar form.
#[inline]
fn superellipse_radius(a: f64, b: f64, p: f64, phi: f64) -> (f64, f64, f64) {
    let (s, c) = math::sin_cos(phi);
    let x = c / a;
    let y = s / b;
    let ax = x.abs();
    let ay = y.abs();
    // |x|^(p-2), finite for p >= 2 (0^0 = 1).
    let px2 = math::powf(ax, p - 2.0);
    let py2 = math::powf(ay, p - 2.0);
    let fx = px2 * ax * ax;
    let fy = py2 * ay * ay;
    let f = fx + fy;
    // d/dφ |c/a|^p = -p |x|^(p-2) x (s/a); d/dφ |s/b|^p = p |y|^(p-2) y (c/b)
    let f1 = p * (-px2 * x * (s / a) + py2 * y * (c / b));
    let f2 = p * (p - 1.0) * (px2 * (s / a) * (s / a) + py2 * (c / b) * (c / b)) - p * f;
    let r = math::powf(f, -1.0 / p);
    let r1 = -r * f1 / (p * f);
    let r2 = -(r1 * f1 + r * f2) / (p * f) + r * f1 * f1 / (p * f * f);
    (r, r1, r2)
}

/// `r`, `r'`, `r''` of a finite Fourier series.
#[inline]
fn fourier_radius(cos: &[f64], sin: &[f64], phi: f64) -> (f64, f64, f64) {
    let mut r = cos.first().copied().unwrap_or(0.0);
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    let (s1, c1) = math::sin_cos(phi);
    let (mut sk, mut ck) = (0.0, 1.0);
    let n = cos.len().max(sin.len());
    for k in 1..n {
        let next_s = sk * c1 + ck * s1;
        let next_c = ck * c1 - sk * s1;
        sk = next_s;
        ck = next_c;
        let a = cos.get(k).copied().unwrap_or(0.0);
        let b = sin.get(k).copied().unwrap_or(0.0);
        let kf = k as f64;
        r += a * ck + b * sk;
        r1 += kf * (-a * sk + b * ck);
        r2 -= kf * kf * (a * ck + b * sk);
    }
    (r, r1, r2)
}

impl Shape {
    #[inline]
    fn frame(&self, u: f64) -> Frame {
        match self {
            Shape::Circle { r } => {
                let (s, c) = math::sin_cos(u);
                Frame {
                    pos: Vec2::new(r * c, r * s),
                    d1: Vec2::new(-r * s, r * c),
                    d2: Vec2::new(-r * c, -r * s),
                    tangent: Vec2::new(-s, c),
                }
            }
            Shape::Ellipse { a, b } => {
                let (s, c) = math::sin_cos(u);
                let d1 = Vec2::new(-a * s, b * c);
                Frame { pos: Vec2::new(a * c, b * s), d1, d2: Vec2::new(-a * c, -b * s), tangent: d1.normalized() }
            }
            Shape::Superellipse { a, b, p } => {
                let (r, r1, r2) = superellipse_radius(*a, *b, *p, u);
                polar_frame(u, r, r1, r2)
            }
            Shape::PolarFourier { cos, sin, phase } => {
                let phi = u + phase;
                let (r, r1, r2) = fourier_radius(cos, sin, phi);
                polar_frame(phi, r, r1, r2)
            }
        }
    }

    #[inline]
    fn speed(&self, u: f64) -> f64 {
        match self {
            Shape::Circle { r } => *r,
            Shape::Ellipse { a, b } => {
                let (s, c) = math::sin_cos(u);
                math::sqrt(a * a * s * s + b * b * c * c)
            }
            _ => self.frame(u).d1.norm(),
        }
    }

    /// Curvature in closed form where it is cheaper than the generic frame.
    #[inline]
    fn curvature(&self, u: f64) -> f64 {
        match self {
            Shape::Circle { r } => 1.0 / r,
            Shape::Ellipse { a, b } => {
                let (s, c) = math::sin_cos(u);
                let q = a * a * s * s + b * b * c * c;
                a * b / (q * math::sqrt(q))
            }
            _ => self.frame(u).curvature(),
        }
    }
}

/// Boundary data at one arc-length position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    /// Arc length reduced into `[0, |Γ|)`.
    pub s: f64,
    pub position: Vec2,
    /// Unit tangent in the direction of increasing `s`.
    pub tangent: Vec2,
    /// Angle of the oriented tangent, in `[0, 2π)`.
    pub tangent_angle: f64,
    pub curvature: f64,
}

/// An immutable arc-length parametrized table.
#[derive(Debug, Clone)]
pub struct Table {
    spec: TableSpec,
    shape: Shape,
    tol: Tolerances,
    length: f64,
    /// Parameter step between nodes.
    h: f64,
    /// Arc length at node `i` (`resolution + 1` entries, last is `|Γ|`).
    s_nodes: Vec<f64>,
    /// `|γ'(u_i)|`, same indexing as `s_nodes`.
    speed_nodes: Vec<f64>,
    positions: Vec<Vec2>,
    tangent_angles: Vec<f64>,
    curvatures: Vec<f64>,
}

/// Convexity summary of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub min_curvature: f64,
    /// Arc length where the minimum curvature occurs.
    pub min_at: f64,
    /// Arc-length locations of isolated null-curvature points.
    pub zero_curvature_points: Vec<f64>,
    /// True when the curvature drops below the negative tolerance.
    pub negative: bool,
}

impl Table {
    /// Builds a table with the default tolerances.
    pub fn build(spec: &TableSpec) -> Result<Self> {
        Self::build_with(spec, Tolerances::DEFAULT)
    }

    pub fn build_with(spec: &TableSpec, tol: Tolerances) -> Result<Self> {
        if spec.resolution < tol.min_resolution {
            return Err(Error::BadSpec(alloc::format!(
                "resolution {} is below the minimum {}",
                spec.resolution,
                tol.min_resolution
            )));
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::BadSpec(alloc::format!("{name} must be positive and finite, got {v}")))
            }
        };
        let shape = match &spec.kind {
            TableKind::Circle { radius } => {
                positive("radius", *radius)?;
                Shape::Circle { r: *radius }
            }
            TableKind::Ellipse { semi_axis_a, semi_axis_b } => {
                positive("semi_axis_a", *semi_axis_a)?;
                positive("semi_axis_b", *semi_axis_b)?;
                Shape::Ellipse { a: *semi_axis_a, b: *semi_axis_b }
            }
            TableKind::Superellipse { semi_axis_a, semi_axis_b, exponent } => {
                positive("semi_axis_a", *semi_axis_a)?;
                positive("semi_axis_b", *semi_axis_b)?;
                if !(exponent.is_finite() && *exponent >= 2.0) {
                    return Err(Error::BadSpec(alloc::format!("superellipse exponent must be >= 2, got {exponent}")));
                }
                Shape::Superellipse { a: *semi_axis_a, b: *semi_axis_b, p: *exponent }
            }
            TableKind::PolarFourier { cos, sin } => build_polar_fourier(cos, sin, spec.resolution, tol)?,
        };

        let n = spec.resolution;
        let h = TAU / n as f64;
        let mut s_nodes = Vec::with_capacity(n + 1);
        let mut speed_nodes = Vec::with_capacity(n + 1);
        // Neumaier-compensated running sum keeps node arc lengths correctly
        // rounded over thousands of panels.
        let (mut acc, mut comp) = (0.0f64, 0.0f64);
        for i in 0..=n {
            let u = i as f64 * h;
            s_nodes.push(acc + comp);
            speed_nodes.push(shape.speed(u));
            if i < n {
                let panel = math::gauss_legendre8(u, (i + 1) as f64 * h, |v| shape.speed(v));
                let sum = acc + panel;
                if acc.abs() >= panel.abs() {
                    comp += (acc - sum) + panel;
                } else {
                    comp += (panel - sum) + acc;
                }
                acc = sum;
            }
        }
        let length = acc + comp;

        let mut positions = Vec::with_capacity(n);
        let mut tangent_angles = Vec::with_capacity(n);
        let mut curvatures = Vec::with_capacity(n);
        for i in 0..n {
            let u = i as f64 * h;
            let f = shape.frame(u);
            positions.push(f.pos);
            tangent_angles.push(math::wrap(math::atan2(f.d1.y, f.d1.x), TAU));
            curvatures.push(shape.curvature(u));
        }

        let table = Self {
            spec: spec.clone(),
            shape,
            tol,
            length,
            h,
            s_nodes,
            speed_nodes,
            positions,
            tangent_angles,
            curvatures,
        };

        if let Some((i, &k)) = table.curvatures.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
            if k < tol.negative_curvature {
                return Err(Error::NonConvex { min_curvature: k, at: table.s_nodes[i] });
            }
        }
        Ok(table)
    }

    /// Total boundary length `|Γ|`.
    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spec(&self) -> &TableSpec {
        &self.spec
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn resolution(&self) -> usize {
        self.spec.resolution
    }

    /// Arc length at each node.
    pub fn node_arc_lengths(&self) -> &[f64] {
        &self.s_nodes[..self.spec.resolution]
    }

    pub fn node_positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn node_tangent_angles(&self) -> &[f64] {
        &self.tangent_angles
    }

    pub fn node_curvatures(&self) -> &[f64] {
        &self.curvatures
    }

    /// Reduces an arc length into `[0, |Γ|)`.
    #[inline]
    pub fn wrap_s(&self, s: f64) -> f64 {
        math::wrap(s, self.length)
    }

    /// Boundary position, tangent and curvature at arc length `s` (any real).
    pub fn point_at(&self, s: f64) -> BoundaryPoint {
        let s = self.wrap_s(s);
        let u = self.param_of_arc(s);
        let f = self.shape.frame(u);
        let tangent = f.unit_tangent();
        BoundaryPoint {
            s,
            position: f.pos,
            tangent,
            tangent_angle: math::wrap(math::atan2(tangent.y, tangent.x), TAU),
            curvature: self.shape.curvature(u),
        }
    }

    /// Curvature at arc length `s`.
    pub fn curvature_at(&self, s: f64) -> f64 {
        self.shape.curvature(self.param_of_arc(self.wrap_s(s)))
    }

    #[inline]
    pub(crate) fn frame(&self, u: f64) -> Frame {
        self.shape.frame(u)
    }

    #[inline]
    pub(crate) fn curvature_param(&self, u: f64) -> f64 {
        self.shape.curvature(u)
    }

    /// Arc length `S(u)` for a curve parameter `u` (any real).
    pub(crate) fn arc_of_param(&self, u: f64) -> f64 {
        let u = math::wrap(u, TAU);
        let n = self.spec.resolution;
        let i = ((u / self.h) as usize).min(n - 1);
        let ui = i as f64 * self.h;
        let s = self.s_nodes[i] + math::gauss_legendre8(ui, u, |v| self.shape.speed(v));
        if s >= self.length {
            s - self.length
        } else {
            s
        }
    }

    /// Curve parameter `u ∈ [0, 2π)` at arc length `s ∈ [0, |Γ|)`.
    pub(crate) fn param_of_arc(&self, s: f64) -> f64 {
        let n = self.spec.resolution;
        // First node with s_i > s, minus one.
        let i = self.s_nodes[..=n].partition_point(|&v| v <= s).clamp(1, n) - 1;
        let (s0, s1) = (self.s_nodes[i], self.s_nodes[i + 1]);
        let (u0, u1) = (i as f64 * self.h, (i + 1) as f64 * self.h);
        let ds = s1 - s0;
        let m0 = ds / self.speed_nodes[i];
        let m1 = ds / self.speed_nodes[i + 1];
        let t = (s - s0) / ds;
        let t2 = t * t;
        let t3 = t2 * t;
        let mut u =
            (2.0 * t3 - 3.0 * t2 + 1.0) * u0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * u1 + (t3 - t2) * m1;
        for _ in 0..4 {
            let base = self.s_nodes[i] + math::gauss_legendre8(u0, u, |v| self.shape.speed(v));
            let du = (base - s) / self.shape.speed(u);
            u -= du;
            // Quadratic convergence: the next correction would be O(du²).
            if du.abs() <= 1e-9 {
                break;
            }
        }
        math::wrap(u, TAU)
    }

    /// Radius when the table is a circle. Its bounce has the closed form
    /// `s₁ = s + 2Rθ`, `θ₁ = θ`, which keeps `θ` exact in floating point.
    pub(crate) fn circle_radius(&self) -> Option<f64> {
        match self.shape {
            Shape::Circle { r } => Some(r),
            _ => None,
        }
    }

    /// Parameter of the next boundary hit of the ray from `γ(u0)` along the
    /// unit direction `dir` (pointing into the table).
    pub(crate) fn next_hit(&self, u0: f64, q: Vec2, dir: Vec2) -> Result<f64> {
        match &self.shape {
            Shape::Circle { .. } => {
                let t = -2.0 * q.dot(dir) / dir.dot(dir);
                let hit = q + dir.scale(t);
                Ok(math::atan2(hit.y, hit.x))
            }
            Shape::Ellipse { a, b } => {
                let (a2, b2) = (a * a, b * b);
                let num = q.x * dir.x / a2 + q.y * dir.y / b2;
                let den = dir.x * dir.x / a2 + dir.y * dir.y / b2;
                let t = -2.0 * num / den;
                let hit = q + dir.scale(t);
                Ok(math::atan2(hit.y / b, hit.x / a))
            }
            Shape::Superellipse { a, b, p } => match superellipse_hit(*a, *b, *p, q, dir) {
                Some(phi) => Ok(self.polish_hit(phi, q, dir)),
                None => self.next_hit_generic(u0, q, dir),
            },
            Shape::PolarFourier { .. } => self.next_hit_generic(u0, q, dir),
        }
    }

    /// Newton polish of a hit parameter on `cross(dir, γ(u) - q) = 0`.
    fn polish_hit(&self, mut u: f64, q: Vec2, dir: Vec2) -> f64 {
        for _ in 0..2 {
            let f = self.shape.frame(u);
            let g = dir.cross(f.pos - q);
            let dg = dir.cross(f.d1);
            if dg <= 0.0 {
                break;
            }
            let step = g / dg;
            if step.abs() > 1e-6 {
                break;
            }
            u -= step;
        }
        math::wrap(u, TAU)
    }

    /// Shape-independent collision solver: coarse sign scan of
    /// `cross(dir, γ(u) - q)` on `(u0, u0 + 2π)`, bisection, Newton polish.
    pub(crate) fn next_hit_generic(&self, u0: f64, q: Vec2, dir: Vec2) -> Result<f64> {
        let g = |u: f64| dir.cross(self.shape.frame(u).pos - q);
        let probes = self.tol.bracket_probes.max(2);
        let step = TAU / probes as f64;
        let mut lo = u0;
        let mut hi = None;
        for k in 1..probes {
            let u = u0 + k as f64 * step;
            if g(u) > 0.0 {
                hi = Some(u);
                break;
            }
            lo = u;
        }
        let mut hi = match hi {
            Some(h) => h,
            // Root between the last probe and u0 + 2π.
            None => u0 + TAU,
        };
        let mut iters = 0;
        while hi - lo > self.tol.bisection_width {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            iters += 1;
            if iters > 200 {
                let b = self.shape.frame(u0);
                let theta = math::atan2(b.d1.cross(dir), b.d1.dot(dir));
                return Err(Error::SolverFailed { s: self.arc_of_param(u0), theta });
            }
        }
        let mut u = 0.5 * (lo + hi);
        let f = self.shape.frame(u);
        let dg = dir.cross(f.d1);
        if dg > 0.0 {
            let cand = u - dir.cross(f.pos - q) / dg;
            if cand > lo - self.tol.bisection_width && cand < hi + self.tol.bisection_width {
                u = cand;
            }
        }
        Ok(math::wrap(u, TAU))
    }

    /// Curvature scan with refinement of every local minimum.
    pub fn validate_convexity(&self) -> ConvexityReport {
        let n = self.spec.resolution;
        let k = &self.curvatures;
        let kmax = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let kmin_nodes = k.iter().copied().fold(f64::INFINITY, f64::min);

        let (min_i, _) = k.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("resolution >= 256");
        let mut min_curvature = kmin_nodes;
        let mut min_at = self.s_nodes[min_i];
        let mut zeros: Vec<f64> = Vec::new();

        // Constant curvature: nothing to refine.
        if kmax - kmin_nodes <= 1e-12 * kmax.abs().max(1.0) {
            return ConvexityReport {
                min_curvature,
                min_at,
                zero_curvature_points: zeros,
                negative: min_curvature < self.tol.negative_curvature,
            };
        }

        let zero_level = self.tol.curvature_zero * kmax.max(1e-300);
        for i in 0..n {
            let prev = k[(i + n - 1) % n];
            let next = k[(i + 1) % n];
            if !(k[i] < prev && k[i] <= next) {
                continue;
            }
            let (u, kv) = golden_min(|u| self.shape.curvature(u), (i as f64 - 1.0) * self.h, (i as f64 + 1.0) * self.h);
            let s = self.arc_of_param(u);
            if kv < min_curvature {
                min_curvature = kv;
                min_at = s;
            }
            if kv.abs() <= zero_level {
                let dup = zeros
                    .iter()
                    .any(|&z| math::wrapped_diff(z, s, self.length).abs() < 2.0 * self.h * self.speed_nodes[i]);
                if !dup {
                    zeros.push(s);
                }
            }
        }
        zeros.sort_by(f64::total_cmp);
        ConvexityReport {
            min_curvature,
            min_at,
            zero_curvature_points: zeros,
            negative: min_curvature < self.tol.negative_curvature,
        }
    }
}

/// Golden-section minimization on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Hit of the ray `q + t·dir` with `|x/a|^p + |y/b|^p = 1`, by Newton on the
/// ray parameter started outside the curve. The implicit function is convex
/// along the ray, so the iterates decrease monotonically to the far root.
fn superellipse_hit(a: f64, b: f64, p: f64, q: Vec2, dir: Vec2) -> Option<f64> {
    let g = |t: f64| -> (f64, f64) {
        let x = (q.x + t * dir.x) / a;
        let y = (q.y + t * dir.y) / b;
        let (ax, ay) = (x.abs(), y.abs());
        let px = math::powf(ax, p - 1.0);
        let py = math::powf(ay, p - 1.0);
        let val = px * ax + py * ay - 1.0;
        let dval = p * (px * x.signum() * dir.x / a + py * y.signum() * dir.y / b);
        (val, dval)
    };
    let mut t = 2.0 * math::hypot(a, b);
    for _ in 0..400 {
        let (v, dv) = g(t);
        if !(dv > 0.0) {
            return None;
        }
        let step = v / dv;
        t -= step;
        if step.abs() <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    if !(t > 0.0) {
        return None;
    }
    let hit = q + dir.scale(t);
    Some(math::wrap(math::atan2(hit.y, hit.x), TAU))
}

fn build_polar_fourier(cos: &[f64], sin: &[f64], resolution: usize, tol: Tolerances) -> Result<Shape> {
    if cos.is_empty() || !(cos[0] > 0.0) {
        return Err(Error::BadSpec("polar_fourier needs a positive constant term cos[0]".into()));
    }
    if cos.iter().chain(sin.iter()).any(|c| !c.is_finite()) {
        return Err(Error::BadSpec("polar_fourier coefficients must be finite".into()));
    }
    let cos: Vec<f64> = cos.to_vec();
    let sin: Vec<f64> = sin.to_vec();
    let scan = 8 * resolution;
    let dphi = TAU / scan as f64;

    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..scan {
        let phi = i as f64 * dphi;
        let (r, _, _) = fourier_radius(&cos, &sin, phi);
        if !(r > 0.0) {
            return Err(Error::BadSpec(alloc::format!("polar_fourier radius is not positive at phi = {phi}")));
        }
        let x = r * math::cos(phi);
        if x > best.1 {
            best = (phi, x);
        }
    }
    // Rightmost point: maximize x(φ) = r(φ) cos φ.
    let (phase, _) = golden_min(
        |phi| {
            let (r, _, _) = fourier_radius(&cos, &sin, phi);
            -r * math::cos(phi)
        },
        best.0 - dphi,
        best.0 + dphi,
    );
    let shape = Shape::PolarFourier { cos, sin, phase: math::wrap(phase, TAU) };

    let mut run = 0usize;
    let mut kmax: f64 = 0.0;
    let kappas: Vec<f64> = (0..scan).map(|i| shape.curvature(i as f64 * dphi)).collect();
    for &k in &kappas {
        kmax = kmax.max(k);
    }
    for (i, &k) in kappas.iter().enumerate() {
        if k < tol.negative_curvature {
            return Err(Error::NonConvex { min_curvature: k, at: i as f64 * dphi });
        }
        if k <= tol.curvature_zero * kmax {
            run += 1;
            if run > 3 {
                return Err(Error::NonConvex { min_curvature: k, at: i as f64 * dphi });
            }
        } else {
            run = 0;
        }
    }
    Ok(shape)
}
