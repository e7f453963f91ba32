use billiard_mc_core::math::{Vec2, PI, TAU};
use billiard_mc_core::{Error, Table, TableSpec};
use proptest::prelude::*;
use std::sync::LazyLock;

static TABLES: LazyLock<Vec<Table>> = LazyLock::new(|| {
    [
        TableSpec::circle(1.0),
        TableSpec::ellipse(2.0, 1.0),
        TableSpec::superellipse(1.0, 1.0, 4.0),
        TableSpec::superellipse(2.0, 1.5, 3.0),
        TableSpec::polar_fourier(vec![1.0, 0.0, 0.08, 0.02], vec![0.0, 0.0, 0.0, 0.03]),
    ]
    .iter()
    .map(|s| Table::build(s).unwrap())
    .collect()
});

fn tables() -> &'static [Table] {
    &TABLES
}

/// Adaptive Simpson quadrature.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[test]
fn ellipse_perimeter_matches_quadrature() {
    let (a, b) = (2.0f64, 1.0f64);
    let oracle =
        4.0 * simpson(&|t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt(), 0.0, PI / 2.0, 1e-14);
    assert!((oracle - 9.6884482205).abs() < 1e-9, "{oracle}");
    let t = Table::build(&TableSpec::ellipse(a, b)).unwrap();
    assert!((t.length() - oracle).abs() < 1e-9, "{} vs {oracle}", t.length());
}

#[test]
fn circle_reference_points() {
    let t = Table::build(&TableSpec::circle(1.0)).unwrap();
    assert!((t.length() - TAU).abs() < 1e-12);
    let p = t.point_at(0.0);
    assert!((p.position.x - 1.0).abs() < 1e-14 && p.position.y.abs() < 1e-14);
    assert!((p.tangent_angle - PI / 2.0).abs() < 1e-12);
    assert!((p.curvature - 1.0).abs() < 1e-12);
    let p = t.point_at(PI);
    assert!((p.position.x + 1.0).abs() < 1e-12 && p.position.y.abs() < 1e-12);
    assert!((p.tangent_angle - 1.5 * PI).abs() < 1e-12);
    let r = t.validate_convexity();
    assert!((r.min_curvature - 1.0).abs() < 1e-12);
    assert!(r.zero_curvature_points.is_empty() && !r.negative);
}

#[test]
fn ellipse_curvature_extremes() {
    let t = Table::build(&TableSpec::ellipse(2.0, 1.0)).unwrap();
    let p = t.point_at(0.0);
    assert!((p.position.x - 2.0).abs() < 1e-14);
    // ab / (a² sin² + b² cos²)^{3/2} at the vertex.
    assert!((p.curvature - 2.0).abs() < 1e-12);
    let r = t.validate_convexity();
    assert!((r.min_curvature - 0.25).abs() < 1e-9, "{}", r.min_curvature);
    assert!(r.zero_curvature_points.is_empty());
}

#[test]
fn superellipse_flat_points_on_the_axes() {
    let t = Table::build(&TableSpec::superellipse(1.0, 1.0, 4.0)).unwrap();
    let r = t.validate_convexity();
    assert_eq!(r.zero_curvature_points.len(), 4, "{:?}", r.zero_curvature_points);
    for (k, &s) in r.zero_curvature_points.iter().enumerate() {
        let want = k as f64 * t.length() / 4.0;
        assert!((s - want).abs() < 1e-6, "zero {k} at {s}, expected {want}");
        let p = t.point_at(s).position;
        assert!(p.x.abs().min(p.y.abs()) < 1e-6);
    }
    // Implicit-curve curvature of x⁴ + y⁴ = 1: 3x²y² / (x⁶ + y⁶)^{3/2}.
    for i in 0..997 {
        let s = (i as f64 + 0.5) / 997.0 * t.length();
        let p = t.point_at(s);
        let (x, y) = (p.position.x, p.position.y);
        assert!((x.powi(4) + y.powi(4) - 1.0).abs() < 1e-10);
        let want = 3.0 * x * x * y * y / (x.powi(6) + y.powi(6)).powf(1.5);
        assert!((p.curvature - want).abs() < 1e-7 * (1.0 + want), "s={s}: {} vs {want}", p.curvature);
        let on_axis = x.abs() < 1e-3 || y.abs() < 1e-3;
        assert!(on_axis || p.curvature > 0.0);
    }
}

#[test]
fn total_curvature_is_two_pi() {
    for t in tables() {
        let n = 4096;
        let h = t.length() / n as f64;
        // Composite Simpson over a periodic integrand.
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 * h;
            acc += h / 6.0 * (t.curvature_at(a) + 4.0 * t.curvature_at(a + 0.5 * h) + t.curvature_at(a + h));
        }
        assert!((acc - TAU).abs() < 1e-6, "{:?}: {acc}", t.spec().kind);
    }
}

#[test]
fn tangent_angle_winds_once() {
    for t in tables() {
        let angles = t.node_tangent_angles();
        let mut total = 0.0;
        for w in angles.windows(2) {
            let d = billiard_mc_core::math::wrapped_diff(w[1], w[0], TAU);
            assert!(d >= -1e-12, "{:?}", t.spec().kind);
            total += d;
        }
        total += billiard_mc_core::math::wrapped_diff(angles[0], angles[angles.len() - 1], TAU);
        assert!((total - TAU).abs() < 1e-9);
    }
}

#[test]
fn unit_speed_in_arc_length() {
    for t in tables() {
        let h = 1e-5;
        for &s in t.node_arc_lengths().iter().step_by(97) {
            let d = (t.point_at(s + h).position - t.point_at(s - h).position).norm() / (2.0 * h);
            assert!((d - 1.0).abs() < 1e-8, "{:?} at {s}: {d}", t.spec().kind);
        }
    }
}

#[test]
fn invalid_specs_rejected() {
    assert!(matches!(Table::build(&TableSpec::circle(-1.0)), Err(Error::BadSpec(_))));
    assert!(matches!(Table::build(&TableSpec::ellipse(2.0, 0.0)), Err(Error::BadSpec(_))));
    assert!(matches!(Table::build(&TableSpec::superellipse(1.0, 1.0, 1.5)), Err(Error::BadSpec(_))));
    assert!(matches!(Table::build(&TableSpec::circle(1.0).with_resolution(100)), Err(Error::BadSpec(_))));
    // A deep dent makes the boundary concave.
    let dented = TableSpec::polar_fourier(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.3], vec![]);
    assert!(matches!(Table::build(&dented), Err(Error::NonConvex { .. })));
}

fn inside(t: &Table, p: Vec2) -> bool {
    // Supporting half-planes at every node.
    t.node_positions().iter().zip(t.node_tangent_angles()).all(|(&q, &psi)| {
        let outward = Vec2::new(psi.sin(), -psi.cos());
        (p - q).dot(outward) <= 1e-12
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn boundary_is_periodic(s in -50.0f64..50.0) {
        for t in tables().iter().take(3) {
            let a = t.point_at(s).position;
            let b = t.point_at(s + t.length()).position;
            prop_assert!((a - b).norm() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chords_stay_inside(u in 0.0f64..1.0, v in 0.0f64..1.0) {
        for t in tables() {
            let a = t.point_at(u * t.length()).position;
            let b = t.point_at(v * t.length()).position;
            for k in 1..=100 {
                let f = k as f64 / 101.0;
                prop_assert!(inside(t, a + (b - a).scale(f)));
            }
        }
    }
}
