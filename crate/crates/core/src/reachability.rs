//! Reachable sets of ε-angular perturbed orbits on a grid, band inclusion
//! certificates, empirical Doeblin bounds and the exact two-step density.
//!
//! An ε-angular perturbed orbit follows the billiard map but may turn the
//! outgoing angle by less than `ε` at every bounce, so one step from `x`
//! reaches `{s(Tx)} × (θ(Tx) − ε, θ(Tx) + ε) ∩ [0, π]`. Reach masks
//! approximate these sets cell by cell from a lattice of sample points in
//! every marked cell; images of neighbouring samples are joined so that the
//! twist does not leave gaps between them.

use alloc::vec;
use alloc::vec::Vec;

use crate::billiard_map::{bounce, inverse_map, lifted_advance, map_step, PhasePoint};
use crate::chain::{run_ensemble, ChainConfig, InitialLaw};
use crate::diagnostics::{start_key, Grid};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::Table;
use crate::kernel::Kernel;
use crate::math::{self, FRAC_PI_2, PI};
use crate::tolerances::DEFAULT_SUBSAMPLE;

/// Boolean cell mask of a reachable set after `generation` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachMask {
    pub grid: Grid,
    pub cells: Vec<bool>,
    pub generation: usize,
}

impl ReachMask {
    pub fn empty(grid: Grid, generation: usize) -> Self {
        Self { grid, cells: vec![false; grid.cells()], generation }
    }

    /// Generation-0 mask holding the cell of `x`.
    pub fn from_point(grid: Grid, x: PhasePoint) -> Self {
        let mut m = Self::empty(grid, 0);
        m.cells[grid.cell_of(&x)] = true;
        m
    }

    #[inline]
    pub fn get(&self, i_s: usize, i_theta: usize) -> bool {
        self.cells[i_s * self.grid.n_theta + i_theta]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn coverage(&self) -> f64 {
        self.count() as f64 / self.cells.len() as f64
    }

    pub fn is_full(&self) -> bool {
        self.cells.iter().all(|&c| c)
    }

    /// True when every cell marked in `other` is marked here.
    pub fn contains(&self, other: &ReachMask) -> bool {
        self.cells.iter().zip(&other.cells).all(|(&a, &b)| a || !b)
    }

    pub fn union_with(&mut self, other: &ReachMask) {
        for (a, &b) in self.cells.iter_mut().zip(&other.cells) {
            *a |= b;
        }
    }

    /// Indices of marked cells.
    pub fn marked(&self) -> Vec<usize> {
        self.cells.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i).collect()
    }
}

/// The band `M_a = [0, |Γ|) × [a, π − a]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderBand {
    a: f64,
}

impl CylinderBand {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < FRAC_PI_2) {
            return Err(Error::InvalidArgument(alloc::format!("band half-width must lie in (0, pi/2), got {a}")));
        }
        Ok(Self { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn contains(&self, x: &PhasePoint) -> bool {
        x.theta >= self.a && x.theta <= PI - self.a
    }
}

/// A rectangle of cells: a run of columns starting at `col` and a θ range.
#[derive(Debug, Clone, Copy)]
struct Stamp {
    col: usize,
    cols: usize,
    j_lo: usize,
    j_hi: usize,
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(alloc::format!("epsilon must lie in (0, pi/2), got {eps}")))
    }
}

/// Cells met by the segment from `a.s` to `b.s` (shorter way round the
/// cylinder) times `(min θ − ε, max θ + ε) ∩ [0, π]`.
fn stamp_between(grid: &Grid, a: PhasePoint, b: PhasePoint, eps: f64) -> Stamp {
    let d = math::wrapped_diff(b.s, a.s, grid.length);
    let (start, span) = if d >= 0.0 { (a.s, d) } else { (b.s, -d) };
    let col = grid.s_index(start);
    let end = grid.s_index(start + span);
    let cols = (end + grid.n_s - col) % grid.n_s + 1;
    let lo = (a.theta.min(b.theta) - eps).max(0.0);
    let hi = (a.theta.max(b.theta) + eps).min(PI);
    Stamp { col, cols, j_lo: grid.theta_index(lo), j_hi: open_upper_index(grid, hi) }
}

/// Last row meeting `[.., hi)`: a bound that lands on a row edge excludes
/// the row above it.
#[inline]
fn open_upper_index(grid: &Grid, hi: f64) -> usize {
    let j = grid.theta_index(hi);
    let (lo_edge, _) = grid.theta_bounds(j);
    if j > 0 && hi <= lo_edge && hi < PI {
        j - 1
    } else {
        j
    }
}

fn apply(mask: &mut ReachMask, st: &Stamp) {
    let g = mask.grid;
    for k in 0..st.cols.min(g.n_s) {
        let i = (st.col + k) % g.n_s;
        for j in st.j_lo..=st.j_hi {
            mask.cells[i * g.n_theta + j] = true;
        }
    }
}

/// Stamps produced by the lattice samples of one cell.
fn cell_stamps(table: &Table, grid: &Grid, eps: f64, cell: usize, k: usize) -> Result<Vec<Stamp>> {
    let (i, j) = grid.split(cell);
    let (s0, s1) = grid.s_bounds(i);
    let (t0, t1) = grid.theta_bounds(j);
    let frac = |p: usize| if k == 1 { 0.5 } else { p as f64 / (k - 1) as f64 };
    let mut images = Vec::with_capacity(k * k);
    for p in 0..k {
        for q in 0..k {
            let x = PhasePoint::new(s0 + frac(p) * (s1 - s0), (t0 + frac(q) * (t1 - t0)).min(PI));
            images.push(map_step(table, x)?.0);
        }
    }
    let mut out = Vec::with_capacity(2 * k * k);
    if k == 1 {
        out.push(stamp_between(grid, images[0], images[0], eps));
        return Ok(out);
    }
    for p in 0..k {
        for q in 0..k {
            let here = images[p * k + q];
            if q + 1 < k {
                out.push(stamp_between(grid, here, images[p * k + q + 1], eps));
            }
            if p + 1 < k {
                out.push(stamp_between(grid, here, images[(p + 1) * k + q], eps));
            }
        }
    }
    Ok(out)
}

/// Settings shared by the grid reachability operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachConfig {
    pub epsilon: f64,
    /// Lattice points per cell side.
    pub subsample: usize,
}

impl ReachConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self { epsilon, subsample: DEFAULT_SUBSAMPLE })
    }

    pub fn subsample(mut self, k: usize) -> Self {
        self.subsample = k.max(1);
        self
    }
}

/// Mask of the one-step reachable set of a single point.
pub fn reach_from_point(table: &Table, cfg: &ReachConfig, grid: Grid, x: PhasePoint) -> Result<ReachMask> {
    check_epsilon(cfg.epsilon)?;
    let y = map_step(table, x)?.0;
    let mut m = ReachMask::empty(grid, 1);
    apply(&mut m, &stamp_between(&grid, y, y, cfg.epsilon));
    Ok(m)
}

/// One generation of `T̂_ε` applied to every marked cell.
pub fn reach_step<E: Executor>(table: &Table, cfg: &ReachConfig, mask: &ReachMask, exec: &E) -> Result<ReachMask> {
    check_epsilon(cfg.epsilon)?;
    let grid = mask.grid;
    let marked = mask.marked();
    let stamps: Vec<Result<Vec<Stamp>>> =
        exec.map_indexed(marked.len(), |n| cell_stamps(table, &grid, cfg.epsilon, marked[n], cfg.subsample));
    let mut out = ReachMask::empty(grid, mask.generation + 1);
    for st in stamps {
        for s in st? {
            apply(&mut out, &s);
        }
    }
    Ok(out)
}

/// Coverage history of the reachable sets from one start point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// First generation with every cell marked.
    pub n_full: Option<usize>,
    /// Coverage fraction of generations `0, 1, …`.
    pub coverage: Vec<f64>,
    pub final_mask: ReachMask,
}

/// Iterates reach masks from `start` until full coverage or `n_max`.
pub fn coverage_horizon<E: Executor>(
    table: &Table,
    cfg: &ReachConfig,
    start: PhasePoint,
    dims: (usize, usize),
    n_max: usize,
    exec: &E,
) -> Result<CoverageReport> {
    let grid = Grid::for_table(table, dims)?;
    let x = table.phase_point(start.s, start.theta)?;
    let mut mask = ReachMask::from_point(grid, x);
    let mut coverage = vec![mask.coverage()];
    let mut n_full = None;
    for n in 1..=n_max {
        mask = if n == 1 { reach_from_point(table, cfg, grid, x)? } else { reach_step(table, cfg, &mask, exec)? };
        coverage.push(mask.coverage());
        if mask.is_full() {
            n_full = Some(n);
            break;
        }
    }
    Ok(CoverageReport { n_full, coverage, final_mask: mask })
}

/// Band inclusion certificate `0 < c₂ < c₁ < ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCertificate {
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
    /// Minimum of `min(θ, π − θ)` of `T⁻¹x` over sampled `x ∈ M_ε`.
    pub min_inverse_on_eps: f64,
    /// Same for `T⁻²x` over `x ∈ M_{c₁}`.
    pub min_inverse2_on_c1: f64,
    /// Same for `T²x` over `x ∈ M_{c₁}`.
    pub min_forward2_on_c1: f64,
    /// Points of the validation lattice violating an inclusion.
    pub failures: Vec<PhasePoint>,
    pub validation_points: usize,
}

impl BandCertificate {
    pub fn holds(&self) -> bool {
        self.failures.is_empty() && 0.0 < self.c2 && self.c2 < self.c1 && self.c1 < self.epsilon
    }
}

fn band_lattice(table: &Table, a: f64, n_s: usize, n_theta: usize, offset: f64) -> Vec<PhasePoint> {
    let l = table.length();
    let mut out = Vec::with_capacity(n_s * n_theta);
    for i in 0..n_s {
        let s = (i as f64 + offset) / n_s as f64 * l;
        for j in 0..n_theta {
            let f = if n_theta == 1 { 0.5 } else { (j as f64 + offset * 0.5) / (n_theta - 1) as f64 };
            out.push(PhasePoint::new(s, a + f.min(1.0) * (PI - 2.0 * a)));
        }
    }
    out
}

fn min_boundary_distance<F>(points: &[PhasePoint], f: F) -> Result<f64>
where
    F: Fn(PhasePoint) -> Result<PhasePoint>,
{
    let mut m = f64::INFINITY;
    for &x in points {
        m = m.min(f(x)?.distance_to_boundary());
    }
    Ok(m)
}

fn forward2(table: &Table, x: PhasePoint) -> Result<PhasePoint> {
    map_step(table, map_step(table, x)?.0).map(|r| r.0)
}

fn inverse2(table: &Table, x: PhasePoint) -> Result<PhasePoint> {
    inverse_map(table, inverse_map(table, x)?)
}

/// Finds `c₁, c₂` with `M_ε ⊆ T(M_{c₁})`, `M_{c₁} ⊆ T²(M_{c₂})` and
/// `T²(M_{c₁}) ⊆ M_{c₂}` on an `n_s × n_θ` lattice, taking half of each
/// observed margin, then re-checks the inclusions on an offset lattice.
pub fn band_inclusion_check(table: &Table, epsilon: f64, n_s: usize, n_theta: usize) -> Result<BandCertificate> {
    check_epsilon(epsilon)?;
    if n_s == 0 || n_theta < 2 {
        return Err(Error::BadGrid(n_s, n_theta));
    }
    let m_eps = band_lattice(table, epsilon, n_s, n_theta, 0.0);
    let m1 = min_boundary_distance(&m_eps, |x| inverse_map(table, x))?;
    let c1 = 0.5 * m1.min(epsilon);
    let m_c1 = band_lattice(table, c1, n_s, n_theta, 0.0);
    let m2 = min_boundary_distance(&m_c1, |x| inverse2(table, x))?;
    let m3 = min_boundary_distance(&m_c1, |x| forward2(table, x))?;
    let c2 = 0.5 * m2.min(m3).min(c1);

    let band1 = CylinderBand::new(c1)?;
    let band2 = CylinderBand::new(c2)?;
    let mut failures = Vec::new();
    let check_eps = band_lattice(table, epsilon, n_s, n_theta, 0.5);
    let check_c1 = band_lattice(table, c1, n_s, n_theta, 0.5);
    for &x in &check_eps {
        if !band1.contains(&inverse_map(table, x)?) {
            failures.push(x);
        }
    }
    for &x in &check_c1 {
        if !band2.contains(&inverse2(table, x)?) || !band2.contains(&forward2(table, x)?) {
            failures.push(x);
        }
    }
    Ok(BandCertificate {
        epsilon,
        c1,
        c2,
        min_inverse_on_eps: m1,
        min_inverse2_on_c1: m2,
        min_forward2_on_c1: m3,
        failures,
        validation_points: check_eps.len() + check_c1.len(),
    })
}

/// Empirical `N`-step density summary from one start.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDensity {
    pub start: PhasePoint,
    /// Minimum over cells of cell mass over cell area.
    pub min_density: f64,
    /// `(i_s, i_θ)` of the minimizing cell.
    pub min_cell: (usize, usize),
    pub min_count: u64,
    /// Lower confidence bound of `min_density`.
    pub min_density_lower: f64,
    pub unhit_cells: usize,
}

/// Empirical Doeblin constant over a set of starts.
#[derive(Debug, Clone, PartialEq)]
pub struct DoeblinReport {
    pub n: usize,
    pub chains: usize,
    /// Minimum of the empirical `N`-step density over starts and cells.
    pub b_hat: f64,
    /// Minimum of the per-start lower confidence bounds.
    pub b_lower: f64,
    pub probes: Vec<ProbeDensity>,
}

/// Wilson score lower bound for a binomial proportion.
pub fn wilson_lower(k: u64, n: u64, z: f64) -> f64 {
    if n == 0 || k == 0 {
        return 0.0;
    }
    let (kf, nf) = (k as f64, n as f64);
    let z2 = z * z;
    let centre = kf + 0.5 * z2;
    let spread = z * math::sqrt(kf * (1.0 - kf / nf) + 0.25 * z2);
    ((centre - spread) / (nf + z2)).max(0.0)
}

/// Eight starts spread over the table, three of them nearly tangential.
pub fn default_probe_starts(table: &Table) -> Vec<PhasePoint> {
    let l = table.length();
    [
        (0.0, 1e-3),
        (0.5 * l, PI - 1e-3),
        (0.25 * l, 0.05),
        (0.0, FRAC_PI_2),
        (0.125 * l, 0.3),
        (l / 3.0, 1.0),
        (0.6 * l, 2.0),
        (0.8 * l, 2.8),
    ]
    .iter()
    .map(|&(s, theta)| PhasePoint::new(s, theta))
    .collect()
}

/// Minimum over probe starts and grid cells of the empirical `N`-step
/// density. `b_hat = 0` means some cell was never hit.
#[allow(clippy::too_many_arguments)]
pub fn doeblin_lower_bound<E: Executor>(
    table: &Table,
    kernel: &Kernel,
    n: usize,
    probe_starts: &[PhasePoint],
    dims: (usize, usize),
    chains: usize,
    seed: u64,
    exec: &E,
) -> Result<DoeblinReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("Doeblin bound needs N >= 2".into()));
    }
    if probe_starts.is_empty() {
        return Err(Error::EmptyInput("probe starts"));
    }
    let grid = Grid::for_table(table, dims)?;
    let area = grid.cell_area();
    // z for a one-sided 99.5% bound.
    let z = 2.5758;
    let mut probes = Vec::with_capacity(probe_starts.len());
    for &start in probe_starts {
        let cfg = ChainConfig::new(table, kernel, InitialLaw::Point(start))
            .seed(start_key(seed, &start))
            .steps(n)
            .chains(chains);
        let finals = run_ensemble(&cfg, exec)?;
        let mut counts = vec![0u64; grid.cells()];
        for p in &finals {
            counts[grid.cell_of(p)] += 1;
        }
        let (cell, &k) = counts.iter().enumerate().min_by_key(|(_, &c)| c).expect("grid is nonempty");
        let total = chains as u64;
        probes.push(ProbeDensity {
            start,
            min_density: k as f64 / total as f64 / area,
            min_cell: grid.split(cell),
            min_count: k,
            min_density_lower: wilson_lower(k, total, z) / area,
            unhit_cells: counts.iter().filter(|&&c| c == 0).count(),
        });
    }
    let b_hat = probes.iter().map(|p| p.min_density).fold(f64::INFINITY, f64::min);
    let b_lower = probes.iter().map(|p| p.min_density_lower).fold(f64::INFINITY, f64::min);
    Ok(DoeblinReport { n, chains, b_hat, b_lower, probes })
}

/// Two-step transition structure from `x` restricted to the column `s'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepColumn {
    /// Intermediate outgoing angle `θ'` whose bounce lands at `s'`.
    pub theta_mid: f64,
    /// Deterministic angle `θ₁'` at `s'` before the second perturbation.
    pub theta_landing: f64,
    /// Marginal density of `s'`: `sin θ₁' / (t · |supp₁|)`.
    pub weight: f64,
    /// Support of the second perturbation; the density in `θ` is
    /// `weight / (hi − lo)` on it.
    pub support: (f64, f64),
}

/// Bisection tolerance on `θ'`.
const MID_ANGLE_TOL: f64 = 1e-12;

/// Solves `s(T(s₁, θ')) = s'` for `θ'` in the first perturbation's support.
/// Returns `None` when `s'` is not reached.
pub fn two_step_column(table: &Table, kernel: &Kernel, x: PhasePoint, s_target: f64) -> Result<Option<TwoStepColumn>> {
    let first = bounce(table, x)?.next;
    let theta1 = first.theta.clamp(0.0, PI);
    let (a, b) = kernel.support(theta1);
    if b - a <= 0.0 {
        return Ok(None);
    }
    let s1 = first.s;
    let l = table.length();
    let target = math::wrap(s_target - s1, l);
    let adv = |th: f64| lifted_advance(table, PhasePoint::new(s1, th));
    let (fa, fb) = (adv(a)?, adv(b)?);
    if !(target >= fa && target <= fb) {
        return Ok(None);
    }
    let (mut lo, mut hi) = (a, b);
    let mut iterations = 0;
    while hi - lo > MID_ANGLE_TOL {
        let mid = 0.5 * (lo + hi);
        if adv(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::RootBracketFailed(target));
        }
    }
    let theta_mid = 0.5 * (lo + hi);
    let z = PhasePoint::new(s1, theta_mid);
    // ds'/dθ' = t / sin θ₁'; at a grazing intermediate point the ratio tends to 2/κ.
    let (theta_landing, jac) = if table.is_grazing(theta_mid) {
        (theta_mid, 0.5 * table.curvature_at(s1))
    } else {
        let bz = bounce(table, z)?;
        let sin1 = math::sin(bz.next.theta);
        let ratio = if bz.chord > 0.0 && sin1 > 0.0 { sin1 / bz.chord } else { 0.5 * bz.curvature_to };
        (bz.next.theta.clamp(0.0, PI), ratio)
    };
    let support = kernel.support(theta_landing);
    Ok(Some(TwoStepColumn { theta_mid, theta_landing, weight: jac / (b - a), support }))
}

/// Density `p²_ε(x, y)` of the two-step transition with respect to `ds dθ`.
pub fn two_step_density(table: &Table, kernel: &Kernel, x: PhasePoint, y: PhasePoint) -> Result<f64> {
    let Some(col) = two_step_column(table, kernel, x, y.s)? else {
        return Ok(0.0);
    };
    let (lo, hi) = col.support;
    if hi - lo <= 0.0 || y.theta < lo || y.theta > hi {
        return Ok(0.0);
    }
    Ok(col.weight / (hi - lo))
}

/// Lifted range `[s₁ + A(lo), s₁ + A(hi)]` of second landing points from
/// `x`, where `A` is the arc advance over the first perturbation's support.
pub fn two_step_s_range(table: &Table, kernel: &Kernel, x: PhasePoint) -> Result<Option<(f64, f64)>> {
    let first = bounce(table, x)?.next;
    let (a, b) = kernel.support(first.theta.clamp(0.0, PI));
    if b - a <= 0.0 {
        return Ok(None);
    }
    let s1 = first.s;
    Ok(Some((s1 + lifted_advance(table, PhasePoint::new(s1, a))?, s1 + lifted_advance(table, PhasePoint::new(s1, b))?)))
}

/// Cell masses of `p²_ε(x, ·)` on a grid: the θ integral is exact per
/// column and the `s'` integral uses composite Gauss–Legendre panels split
/// at cell edges and at the ends of the reachable range.
pub fn two_step_cell_masses(
    table: &Table,
    kernel: &Kernel,
    x: PhasePoint,
    grid: Grid,
    panels_per_cell: usize,
) -> Result<Vec<f64>> {
    let mut masses = vec![0.0; grid.cells()];
    let Some((lo, hi)) = two_step_s_range(table, kernel, x)? else {
        return Ok(masses);
    };
    let w = grid.length / grid.n_s as f64;
    let first = math::floor(lo / w) as i64;
    let last = math::floor(hi / w) as i64;
    let panels = panels_per_cell.max(1);
    for c in first..=last {
        let a = (c as f64 * w).max(lo);
        let b = ((c + 1) as f64 * w).min(hi);
        if b <= a {
            continue;
        }
        let row0 = grid.s_index(0.5 * (a + b)) * grid.n_theta;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let pa = a + p as f64 * h;
            let half = 0.5 * h;
            let mid = pa + half;
            for &(node, wt) in math::GL8.iter() {
                let Some(col) = two_step_column(table, kernel, x, mid + half * node)? else {
                    continue;
                };
                let (slo, shi) = col.support;
                if shi <= slo {
                    continue;
                }
                let scale = wt * half * col.weight / (shi - slo);
                for j in grid.theta_index(slo)..=grid.theta_index(shi) {
                    let (tl, th) = grid.theta_bounds(j);
                    let ov = (shi.min(th) - slo.max(tl)).max(0.0);
                    masses[row0 + j] += scale * ov;
                }
            }
        }
    }
    Ok(masses)
}
