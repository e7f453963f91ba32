//! The deterministic billiard map on the phase cylinder `M = [0, |Γ|) × [0, π]`.
//!
//! A phase point `(s, θ)` is a boundary position `s` (arc length) and the
//! angle `θ` between the outgoing velocity and the oriented tangent. The
//! outgoing direction therefore has absolute angle `ψ(s) + θ`. Points with
//! `θ ∈ {0, π}` (and, numerically, within the grazing tolerance of them) are
//! fixed points of the map.

use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::math::{self, Vec2, PI};

/// A point `(s, θ)` of the phase cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhasePoint {
    pub s: f64,
    pub theta: f64,
}

impl PhasePoint {
    #[inline]
    pub const fn new(s: f64, theta: f64) -> Self {
        Self { s, theta }
    }

    /// `min(θ, π - θ)`.
    #[inline]
    pub fn distance_to_boundary(&self) -> f64 {
        self.theta.min(PI - self.theta)
    }
}

impl Table {
    /// Validates `θ ∈ [0, π]` and reduces `s` into `[0, |Γ|)`.
    pub fn phase_point(&self, s: f64, theta: f64) -> Result<PhasePoint> {
        if !(s.is_finite() && (0.0..=PI).contains(&theta)) {
            return Err(Error::InvalidPoint { s, theta });
        }
        Ok(PhasePoint::new(self.wrap_s(s), theta))
    }

    /// True when `θ` is within the grazing tolerance of `0` or `π`.
    #[inline]
    pub fn is_grazing(&self, theta: f64) -> bool {
        let g = self.tolerances().grazing_angle;
        theta < g || theta > PI - g
    }
}

/// `D_xT` in `(s, θ)` coordinates, rows indexed by `(s₁, θ₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian2x2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Jacobian2x2 {
    #[inline]
    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }
}

/// One bounce with the intermediate geometric quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounce {
    pub next: PhasePoint,
    /// Chord length `t(x) = |q(Tx) - q(x)|`.
    pub chord: f64,
    /// Arc advance `s₁ - s` reduced into `[0, |Γ|)`. See [`lifted_advance`]
    /// for the continuous lift near `θ = π`.
    pub advance: f64,
    pub curvature_from: f64,
    pub curvature_to: f64,
}

/// Full bounce computation shared by every map-level operation.
pub fn bounce(table: &Table, x: PhasePoint) -> Result<Bounce> {
    if table.is_grazing(x.theta) {
        let k = table.curvature_at(x.s);
        return Ok(Bounce { next: x, chord: 0.0, advance: 0.0, curvature_from: k, curvature_to: k });
    }
    let s = table.wrap_s(x.s);
    if let Some(r) = table.circle_radius() {
        // Generic reflection carries a rounding bias in θ₁ of a fraction of
        // an ulp, which periodic orbits accumulate quadratically in s.
        let advance = 2.0 * r * x.theta;
        let s1 = table.wrap_s(s + advance);
        return Ok(Bounce {
            next: PhasePoint::new(s1, x.theta),
            chord: 2.0 * r * math::sin(x.theta),
            advance: math::wrap(advance, table.length()),
            curvature_from: 1.0 / r,
            curvature_to: 1.0 / r,
        });
    }
    let u0 = table.param_of_arc(s);
    let f0 = table.frame(u0);
    let tangent = f0.unit_tangent();
    let (st, ct) = math::sin_cos(x.theta);
    let dir = tangent.rotate_sc(st, ct);
    let u1 = table.next_hit(u0, f0.pos, dir)?;
    let f1 = table.frame(u1);
    // Reflection keeps the tangential component and flips the normal one.
    let theta1 = outgoing_angle(f1.unit_tangent(), dir);
    let s1 = table.arc_of_param(u1);
    let chord = (f1.pos - f0.pos).norm();
    Ok(Bounce {
        next: PhasePoint::new(s1, theta1),
        chord,
        advance: math::wrap(s1 - s, table.length()),
        curvature_from: table.curvature_param(u0),
        curvature_to: table.curvature_param(u1),
    })
}

/// Angle of the reflected velocity with the tangent `t1` for an incoming
/// direction `dir`, in `[0, π]`.
#[inline]
fn outgoing_angle(t1: Vec2, dir: Vec2) -> f64 {
    let sin_part = -t1.cross(dir);
    let cos_part = t1.dot(dir);
    math::atan2(sin_part.max(0.0), cos_part)
}

/// `T x` and the chord length `t(x)`. Grazing points are returned unchanged
/// with `t = 0`.
pub fn map_step(table: &Table, x: PhasePoint) -> Result<(PhasePoint, f64)> {
    let b = bounce(table, x)?;
    Ok((b.next, b.chord))
}

/// Arc advance `s₁ - s` lifted to the universal cover, in `[0, |Γ|]`.
///
/// The advance grows strictly from `0` at `θ = 0` to `|Γ|` at `θ = π`. An
/// interior chord always advances by a value in `(0, |Γ|)`, so only a
/// reduction that rounded to zero near `θ = π` needs lifting.
pub fn lifted_advance(table: &Table, x: PhasePoint) -> Result<f64> {
    if table.is_grazing(x.theta) {
        return Ok(if x.theta > 0.5 * PI { table.length() } else { 0.0 });
    }
    let b = bounce(table, x)?;
    let mut adv = b.advance;
    if x.theta > 0.5 * PI && adv < 1e-9 * table.length() {
        adv += table.length();
    }
    Ok(adv)
}

/// `D_xT` from curvatures, chord length and the two angles.
pub fn differential(table: &Table, x: PhasePoint) -> Result<Jacobian2x2> {
    let g = table.tolerances().grazing_angle;
    if x.theta < g || x.theta > PI - g {
        return Err(Error::BoundaryPoint { s: x.s, theta: x.theta });
    }
    let b = bounce(table, x)?;
    let th1 = b.next.theta;
    if th1 < g || th1 > PI - g {
        return Err(Error::BoundaryPoint { s: b.next.s, theta: th1 });
    }
    let (k0, k1, t) = (b.curvature_from, b.curvature_to, b.chord);
    let sin0 = math::sin(x.theta);
    let sin1 = math::sin(th1);
    let a11 = (k0 * t - sin0) / sin1;
    Ok(Jacobian2x2 { a11, a12: t / sin1, a21: k1 * a11 - k0, a22: k1 * t / sin1 - 1.0 })
}

/// `∂s₁/∂θ = t(x)/sin θ₁(x)`; on `∂M` the continuous extension `2/κ(x)`
/// (infinite at a null-curvature point).
pub fn twist_derivative(table: &Table, x: PhasePoint) -> Result<f64> {
    if table.is_grazing(x.theta) {
        let k = table.curvature_at(x.s);
        return Ok(if k > 0.0 { 2.0 / k } else { f64::INFINITY });
    }
    let b = bounce(table, x)?;
    let sin1 = math::sin(b.next.theta);
    if sin1 <= 0.0 {
        let k = b.curvature_to;
        return Ok(if k > 0.0 { 2.0 / k } else { f64::INFINITY });
    }
    Ok(b.chord / sin1)
}

/// `I(s, θ) = (s, π - θ)`.
#[inline]
pub fn involution(x: PhasePoint) -> PhasePoint {
    PhasePoint::new(x.s, PI - x.theta)
}

/// `T⁻¹ = I ∘ T ∘ I`.
pub fn inverse_map(table: &Table, x: PhasePoint) -> Result<PhasePoint> {
    let (y, _) = map_step(table, involution(x))?;
    Ok(involution(y))
}

/// `Tⁿ x` by repeated bounces.
pub fn iterate(table: &Table, x: PhasePoint, n: usize) -> Result<PhasePoint> {
    let mut p = x;
    for _ in 0..n {
        p = map_step(table, p)?.0;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TableSpec;
    use crate::math::{FRAC_PI_2, TAU};

    fn circle() -> Table {
        Table::build(&TableSpec::circle(1.0)).unwrap()
    }

    fn ellipse() -> Table {
        Table::build(&TableSpec::ellipse(2.0, 1.0)).unwrap()
    }

    #[test]
    fn circle_step_closed_form() {
        let t = circle();
        let (y, chord) = map_step(&t, PhasePoint::new(0.0, PI / 3.0)).unwrap();
        assert!((y.s - 2.0 * PI / 3.0).abs() < 1e-14);
        assert!((y.theta - PI / 3.0).abs() < 1e-14);
        assert!((chord - 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn circle_diameter() {
        let t = circle();
        for s in [0.0, 1.0, 4.0] {
            let (y, chord) = map_step(&t, PhasePoint::new(s, FRAC_PI_2)).unwrap();
            assert!(math::wrapped_diff(y.s, s + PI, TAU).abs() < 1e-13);
            assert!((y.theta - FRAC_PI_2).abs() < 1e-14);
            assert!((chord - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ellipse_major_axis_two_periodic() {
        let t = ellipse();
        let (y, chord) = map_step(&t, PhasePoint::new(0.0, FRAC_PI_2)).unwrap();
        assert!((y.s - t.length() / 2.0).abs() < 1e-12);
        assert!((y.theta - FRAC_PI_2).abs() < 1e-12);
        assert!((chord - 4.0).abs() < 1e-12);
        let (z, _) = map_step(&t, y).unwrap();
        assert!(math::wrapped_diff(z.s, 0.0, t.length()).abs() < 1e-12);
    }

    #[test]
    fn circle_differential_is_shear() {
        let t = circle();
        let j = differential(&t, PhasePoint::new(0.7, 1.1)).unwrap();
        let want = [1.0, 2.0, 0.0, 1.0];
        for (a, b) in j.entries().iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{:?}", j);
        }
    }

    #[test]
    fn grazing_points_are_fixed() {
        let t = ellipse();
        let x = PhasePoint::new(1.0, 0.0);
        assert_eq!(map_step(&t, x).unwrap(), (x, 0.0));
        let x = PhasePoint::new(1.0, PI);
        assert_eq!(map_step(&t, x).unwrap(), (x, 0.0));
        assert!(matches!(differential(&t, PhasePoint::new(0.0, 1e-12)), Err(Error::BoundaryPoint { .. })));
    }

    #[test]
    fn twist_boundary_limits() {
        let t = circle();
        assert!((twist_derivative(&t, PhasePoint::new(0.0, FRAC_PI_2)).unwrap() - 2.0).abs() < 1e-13);
        assert_eq!(twist_derivative(&t, PhasePoint::new(0.0, 0.0)).unwrap(), 2.0);
        let e = ellipse();
        let v = twist_derivative(&e, PhasePoint::new(0.0, 1e-7)).unwrap();
        assert!((v - 1.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn involution_examples() {
        let y = involution(PhasePoint::new(1.0, 0.3));
        assert_eq!(y.s, 1.0);
        assert!((y.theta - (PI - 0.3)).abs() < 1e-16);
        assert_eq!(involution(involution(PhasePoint::new(2.0, 0.25))), PhasePoint::new(2.0, 0.25));
    }

    #[test]
    fn inverse_undoes_step() {
        let t = ellipse();
        let x = PhasePoint::new(1.3, 0.8);
        let y = map_step(&t, inverse_map(&t, x).unwrap()).unwrap().0;
        assert!(math::wrapped_diff(y.s, x.s, t.length()).abs() < 1e-10);
        assert!((y.theta - x.theta).abs() < 1e-10);
    }

    #[test]
    fn lifted_advance_is_continuous_near_pi() {
        let t = ellipse();
        let a = lifted_advance(&t, PhasePoint::new(0.3, PI - 1e-6)).unwrap();
        assert!(a > 0.99 * t.length() && a <= t.length(), "{a}");
        assert_eq!(lifted_advance(&t, PhasePoint::new(0.3, PI)).unwrap(), t.length());
    }
}
