use billiard_mc_core::billiard_map::{
    differential, inverse_map, involution, iterate, lifted_advance, map_step, twist_derivative,
};
use billiard_mc_core::chain::sample_nu;
use billiard_mc_core::diagnostics::{chi_square, Grid, GridMeasure};
use billiard_mc_core::math::{wrapped_diff, PI, TAU};
use billiard_mc_core::rng::ChainRng;
use billiard_mc_core::{PhasePoint, Table, TableSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn ellipse() -> Table {
    Table::build(&TableSpec::ellipse(2.0, 1.0)).unwrap()
}

fn superellipse() -> Table {
    Table::build(&TableSpec::superellipse(1.0, 1.0, 4.0)).unwrap()
}

fn random_interior(t: &Table, rng: &mut ChainRng, margin: f64) -> PhasePoint {
    PhasePoint::new(rng.unit() * t.length(), margin + rng.unit() * (PI - 2.0 * margin))
}

/// Central differences of `T` in `(s, θ)` with the `s₁` difference taken on the cylinder.
fn fd_jacobian(t: &Table, x: PhasePoint, h: f64) -> [f64; 4] {
    let f = |p: PhasePoint| map_step(t, p).unwrap().0;
    let (sp, sm) = (f(PhasePoint::new(x.s + h, x.theta)), f(PhasePoint::new(x.s - h, x.theta)));
    let (tp, tm) = (f(PhasePoint::new(x.s, x.theta + h)), f(PhasePoint::new(x.s, x.theta - h)));
    let l = t.length();
    [
        wrapped_diff(sp.s, sm.s, l) / (2.0 * h),
        wrapped_diff(tp.s, tm.s, l) / (2.0 * h),
        (sp.theta - sm.theta) / (2.0 * h),
        (tp.theta - tm.theta) / (2.0 * h),
    ]
}

fn rel_err(a: [f64; 4], b: [f64; 4]) -> f64 {
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm
}

#[test]
fn differential_matches_finite_differences() {
    for (k, t) in [ellipse(), superellipse()].iter().enumerate() {
        let mut rng = ChainRng::new(11, k as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let x = random_interior(t, &mut rng, 0.05);
            let j = differential(t, x).unwrap();
            worst = worst.max(rel_err(j.entries(), fd_jacobian(t, x, 1e-6)));
        }
        assert!(worst < 1e-5, "{:?}: worst relative error {worst}", t.spec().kind);
    }
}

#[test]
fn ellipse_differential_at_quarter_angle() {
    let t = ellipse();
    let x = PhasePoint::new(0.0, PI / 4.0);
    let e = rel_err(differential(&t, x).unwrap().entries(), fd_jacobian(&t, x, 1e-6));
    assert!(e < 1e-5, "{e}");
}

#[test]
fn determinant_is_sine_ratio() {
    for (k, t) in [ellipse(), superellipse()].iter().enumerate() {
        let mut rng = ChainRng::new(12, k as u64);
        for _ in 0..1000 {
            let x = random_interior(t, &mut rng, 1e-3);
            let y = map_step(t, x).unwrap().0;
            let d = differential(t, x).unwrap().det();
            let want = x.theta.sin() / y.theta.sin();
            assert!((d - want).abs() < 1e-8 * want.max(1.0), "{x:?}: {d} vs {want}");
        }
    }
}

#[test]
fn twist_equals_upper_right_entry() {
    let t = ellipse();
    let mut rng = ChainRng::new(13, 0);
    for _ in 0..200 {
        let x = random_interior(&t, &mut rng, 0.01);
        let a12 = differential(&t, x).unwrap().a12;
        let tw = twist_derivative(&t, x).unwrap();
        assert!(tw > 0.0 && (tw - a12).abs() < 1e-12 * a12);
    }
}

#[test]
fn twist_extends_to_the_boundary() {
    let t = ellipse();
    for s in [0.0, 1.0, 2.5, t.length() / 4.0, 7.0] {
        for (theta_of, to_image_of) in [(1.0, 0.0), (-1.0, PI)] {
            let mut prev = f64::INFINITY;
            for d in [1e-3, 1e-5, 1e-7] {
                let x = PhasePoint::new(s, to_image_of + theta_of * d);
                let limit = 2.0 / t.curvature_at(s);
                let err = (twist_derivative(&t, x).unwrap() - limit).abs();
                // Shrinks until the chord length hits roundoff.
                assert!(err < prev + 1e-8, "s={s} d={d}: error {err} did not shrink");
                prev = err;
            }
            assert!(prev < 1e-3, "s={s}: {prev}");
        }
    }
}

#[test]
fn landing_point_increases_with_angle() {
    for t in [ellipse(), superellipse()] {
        for s in [0.0, 0.4, 1.9, 3.3] {
            let mut prev = -1.0;
            for i in 0..=1000 {
                let theta = PI * i as f64 / 1000.0;
                let a = lifted_advance(&t, PhasePoint::new(s, theta)).unwrap();
                if i > 0 {
                    assert!(a > prev, "s={s} θ={theta}: {a} <= {prev}");
                }
                prev = a;
            }
            assert!((prev - t.length()).abs() < 1e-12);
        }
    }
}

#[test]
fn circle_orbits_follow_closed_form() {
    let t = Table::build(&TableSpec::circle(1.0)).unwrap();
    for (s0, theta) in [(0.5, 0.1), (0.5, 1.0), (0.0, PI / 3.0), (0.5, PI / 3.0), (3.0, 2.9)] {
        let x0 = PhasePoint::new(s0, theta);
        let y = iterate(&t, x0, 10_000).unwrap();
        let want = (s0 + 2.0 * 10_000.0 * theta).rem_euclid(TAU);
        assert!(wrapped_diff(y.s, want, TAU).abs() < 1e-9, "θ={theta}: {} vs {want}, θ drift {}", y.s, y.theta - theta);
        assert!((y.theta - theta).abs() < 1e-9);
    }
}

#[test]
fn generic_solver_tracks_a_round_table() {
    // A one-term Fourier radius is a unit circle handled by the generic path.
    let t = Table::build(&TableSpec::polar_fourier(vec![1.0], vec![])).unwrap();
    assert!((t.length() - TAU).abs() < 1e-12);
    for (s0, theta) in [(0.5, 0.1), (0.0, PI / 3.0), (2.0, 2.5)] {
        let y = iterate(&t, PhasePoint::new(s0, theta), 1000).unwrap();
        let want = (s0 + 2.0 * 1000.0 * theta).rem_euclid(TAU);
        let ds = wrapped_diff(y.s, want, TAU).abs();
        assert!(ds < 1e-8, "θ={theta}: |Δs| = {ds:e}");
        assert!((y.theta - theta).abs() < 1e-10);
    }
}

#[test]
fn inverse_is_conjugated_map() {
    for t in [ellipse(), superellipse()] {
        let mut rng = ChainRng::new(14, 0);
        for _ in 0..1000 {
            let x = random_interior(&t, &mut rng, 1e-3);
            let xx = involution(involution(x));
            assert!(xx.s == x.s && (xx.theta - x.theta).abs() < 1e-15);
            let back = involution(map_step(&t, involution(map_step(&t, x).unwrap().0)).unwrap().0);
            assert!(wrapped_diff(back.s, x.s, t.length()).abs() < 1e-8);
            assert!((back.theta - x.theta).abs() < 1e-8);
            let z = map_step(&t, inverse_map(&t, x).unwrap()).unwrap().0;
            assert!(wrapped_diff(z.s, x.s, t.length()).abs() < 1e-8);
            assert!((z.theta - x.theta).abs() < 1e-8);
        }
    }
}

#[test]
fn superellipse_pushes_nu_forward_to_itself() {
    let t = superellipse();
    let grid = Grid::for_table(&t, (16, 16)).unwrap();
    let nu = GridMeasure::nu(grid);
    let mut rng = ChainRng::new(15, 0);
    let mut counts = vec![0u64; grid.cells()];
    for _ in 0..200_000 {
        let x = sample_nu(&t, rng.unit(), rng.unit());
        counts[grid.cell_of(&map_step(&t, x).unwrap().0)] += 1;
    }
    let stat = chi_square(&counts, &nu.masses);
    let crit = ChiSquared::new((grid.cells() - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(stat < crit, "{stat} >= {crit}");
}
