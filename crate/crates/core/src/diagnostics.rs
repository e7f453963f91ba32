//! Ergodicity diagnostics: grid histograms, total-variation distances,
//! exponential decay fits, stationary-law estimates and absorption summaries.
//!
//! Total variation between continuous laws is estimated on a fixed
//! rectangular `(s, θ)` grid as half the L¹ distance of cell masses. The
//! sampling noise of that estimator has known multinomial statistics, which
//! is what the decay fit uses to decide where the signal ends.

use alloc::vec;
use alloc::vec::Vec;

use crate::billiard_map::PhasePoint;
use crate::chain::{fold_chain, ChainConfig, ChainRun, InitialLaw};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::Table;
use crate::kernel::Kernel;
use crate::math::{self, PI};
use crate::rng::{mix64, ChainRng};
use crate::tolerances::DEFAULT_BOOTSTRAP;

/// Rectangular grid over `[0, |Γ|) × [0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n_s: usize,
    pub n_theta: usize,
    pub length: f64,
}

impl Grid {
    pub fn new(n_s: usize, n_theta: usize, length: f64) -> Result<Self> {
        if n_s < 2 || n_theta < 2 {
            return Err(Error::BadGrid(n_s, n_theta));
        }
        Ok(Self { n_s, n_theta, length })
    }

    pub fn for_table(table: &Table, dims: (usize, usize)) -> Result<Self> {
        Self::new(dims.0, dims.1, table.length())
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.n_s * self.n_theta
    }

    #[inline]
    pub fn s_index(&self, s: f64) -> usize {
        let i = (math::wrap(s, self.length) / self.length * self.n_s as f64) as usize;
        i.min(self.n_s - 1)
    }

    #[inline]
    pub fn theta_index(&self, theta: f64) -> usize {
        let j = (theta / PI * self.n_theta as f64).max(0.0) as usize;
        j.min(self.n_theta - 1)
    }

    /// Row-major cell index `i_s * n_theta + i_theta`.
    #[inline]
    pub fn cell_of(&self, p: &PhasePoint) -> usize {
        self.s_index(p.s) * self.n_theta + self.theta_index(p.theta)
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        (self.length / self.n_s as f64) * (PI / self.n_theta as f64)
    }

    #[inline]
    pub fn s_bounds(&self, i_s: usize) -> (f64, f64) {
        let w = self.length / self.n_s as f64;
        (i_s as f64 * w, (i_s + 1) as f64 * w)
    }

    #[inline]
    pub fn theta_bounds(&self, i_theta: usize) -> (f64, f64) {
        let w = PI / self.n_theta as f64;
        (i_theta as f64 * w, (i_theta + 1) as f64 * w)
    }

    /// Splits a cell index into `(i_s, i_theta)`.
    #[inline]
    pub fn split(&self, cell: usize) -> (usize, usize) {
        (cell / self.n_theta, cell % self.n_theta)
    }
}

/// Normalized histogram on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub grid: Grid,
    pub masses: Vec<f64>,
    pub samples: u64,
}

impl GridMeasure {
    /// Empirical measure of a point cloud.
    pub fn from_points(points: &[PhasePoint], grid: Grid) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("empirical measure needs at least one point"));
        }
        let mut counts = vec![0u64; grid.cells()];
        for p in points {
            counts[grid.cell_of(p)] += 1;
        }
        Self::from_counts(&counts, grid)
    }

    pub fn from_counts(counts: &[u64], grid: Grid) -> Result<Self> {
        if counts.len() != grid.cells() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} counts for a grid with {} cells",
                counts.len(),
                grid.cells()
            )));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput("empirical measure needs at least one point"));
        }
        let inv = 1.0 / total as f64;
        Ok(Self { grid, masses: counts.iter().map(|&c| c as f64 * inv).collect(), samples: total })
    }

    /// Exact cell masses of `ν = sin θ ds dθ / (2|Γ|)`.
    pub fn nu(grid: Grid) -> Self {
        let mut masses = Vec::with_capacity(grid.cells());
        let s_frac = 1.0 / grid.n_s as f64;
        for _ in 0..grid.n_s {
            for j in 0..grid.n_theta {
                let (lo, hi) = grid.theta_bounds(j);
                masses.push(s_frac * 0.5 * (math::cos(lo) - math::cos(hi)));
            }
        }
        Self { grid, masses, samples: 0 }
    }

    /// Uniform cell masses.
    pub fn uniform(grid: Grid) -> Self {
        let m = 1.0 / grid.cells() as f64;
        Self { grid, masses: vec![m; grid.cells()], samples: 0 }
    }

    #[inline]
    pub fn mass(&self, i_s: usize, i_theta: usize) -> f64 {
        self.masses[i_s * self.grid.n_theta + i_theta]
    }

    pub fn s_marginal(&self) -> Vec<f64> {
        self.masses.chunks(self.grid.n_theta).map(|row| row.iter().sum()).collect()
    }

    pub fn theta_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_theta];
        for row in self.masses.chunks(self.grid.n_theta) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += m;
            }
        }
        out
    }

    /// Merges `factor × factor` blocks of cells.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let g = self.grid;
        if factor == 0 || !g.n_s.is_multiple_of(factor) || !g.n_theta.is_multiple_of(factor) {
            return Err(Error::InvalidArgument(alloc::format!(
                "cannot coarsen a {}x{} grid by {factor}",
                g.n_s,
                g.n_theta
            )));
        }
        let coarse = Grid::new(g.n_s / factor, g.n_theta / factor, g.length)?;
        let mut masses = vec![0.0; coarse.cells()];
        for i in 0..g.n_s {
            for j in 0..g.n_theta {
                masses[(i / factor) * coarse.n_theta + j / factor] += self.mass(i, j);
            }
        }
        Ok(Self { grid: coarse, masses, samples: self.samples })
    }

    /// Density estimate (mass over area) of every cell.
    pub fn densities(&self) -> Vec<f64> {
        let area = self.grid.cell_area();
        self.masses.iter().map(|m| m / area).collect()
    }
}

/// Total-variation distance: half the L¹ distance of cell masses.
pub fn tv_distance(a: &GridMeasure, b: &GridMeasure) -> Result<f64> {
    if a.grid.n_s != b.grid.n_s || a.grid.n_theta != b.grid.n_theta {
        return Err(Error::DimMismatch(a.grid.n_s, a.grid.n_theta, b.grid.n_s, b.grid.n_theta));
    }
    Ok(tv_of_masses(&a.masses, &b.masses))
}

#[inline]
fn tv_of_masses(a: &[f64], b: &[f64]) -> f64 {
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    (0.5 * l1).min(1.0)
}

/// Expected TV between two independent empirical measures of sizes `n_a`
/// and `n_b` drawn from the cell law `pooled` (normal approximation of the
/// multinomial differences).
pub fn tv_noise_floor(pooled: &[f64], n_a: u64, n_b: u64) -> f64 {
    let inv = 1.0 / n_a as f64 + 1.0 / n_b as f64;
    let k = math::sqrt(2.0 / PI);
    0.5 * pooled.iter().map(|&p| k * math::sqrt(p * (1.0 - p) * inv)).sum::<f64>()
}

/// One-sample Kolmogorov–Smirnov statistic against the uniform law on
/// `[lo, hi]`. Sorts `samples` in place.
pub fn ks_uniform(samples: &mut [f64], lo: f64, hi: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let w = hi - lo;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = ((x - lo) / w).clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Two-sample Kolmogorov–Smirnov statistic. Sorts both slices in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic KS critical value `c(α)·scale`, with `scale = 1/√n` for one
/// sample or `√((n+m)/(nm))` for two samples; `c(α) = √(−ln(α/2)/2)`.
pub fn ks_critical(alpha: f64, scale: f64) -> f64 {
    math::sqrt(-0.5 * math::ln(0.5 * alpha)) * scale
}

/// Pearson chi-square statistic of `counts` against cell probabilities.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let nf = n as f64;
    counts
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&c, &p)| {
            let e = nf * p;
            (c as f64 - e) * (c as f64 - e) / e
        })
        .sum()
}

/// Settings for [`tv_decay_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecayConfig {
    /// Step counts at which the two laws are compared.
    pub n_list: Vec<usize>,
    pub chains_per_start: usize,
    pub seed: u64,
    pub dims: (usize, usize),
    pub bootstrap: usize,
    /// Steps below this are excluded from the fit.
    pub transient: usize,
    /// Fit only while TV exceeds this multiple of the noise floor.
    pub floor_factor: f64,
}

impl DecayConfig {
    pub fn new(n_max: usize, chains_per_start: usize, seed: u64) -> Self {
        Self {
            n_list: (0..=n_max).collect(),
            chains_per_start,
            seed,
            dims: crate::tolerances::DEFAULT_GRID,
            bootstrap: DEFAULT_BOOTSTRAP,
            transient: 5,
            floor_factor: 3.0,
        }
    }
}

/// Result of a TV decay experiment and its log-linear fit.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub n: Vec<usize>,
    pub tv: Vec<f64>,
    /// Bootstrap 95% half-widths.
    pub ci_half_width: Vec<f64>,
    pub noise_floor: Vec<f64>,
    /// Fitted rate, clamped at zero.
    pub gamma: f64,
    /// Raw slope of `log TV` against `n`.
    pub slope: f64,
    /// Intercept `log C` of the fit.
    pub log_prefactor: f64,
    pub window: (usize, usize),
    pub r_squared: f64,
    pub fit_points: usize,
}

impl DecayFit {
    /// Smallest listed `n` whose TV estimate is below `level`.
    pub fn first_below(&self, level: f64) -> Option<usize> {
        self.n.iter().zip(&self.tv).find(|(_, &tv)| tv < level).map(|(&n, _)| n)
    }
}

/// Stream key for the ensemble started at `x`, independent of argument order.
pub(crate) fn start_key(seed: u64, x: &PhasePoint) -> u64 {
    mix64(seed ^ mix64(x.s.to_bits() ^ mix64(x.theta.to_bits())))
}

/// Cell index of every chain at every listed step, laid out `[k][chain]`.
#[allow(clippy::too_many_arguments)]
fn ensemble_cells<E: Executor>(
    table: &Table,
    kernel: &Kernel,
    start: PhasePoint,
    n_list: &[usize],
    chains: usize,
    seed: u64,
    grid: Grid,
    exec: &E,
) -> Result<Vec<Vec<u16>>> {
    let n_max = n_list.last().copied().unwrap_or(0);
    let cfg = ChainConfig::new(table, kernel, InitialLaw::Point(start)).seed(seed).steps(n_max).chains(chains);
    cfg.validate()?;
    let per_chain: Vec<Result<Vec<u16>>> = exec.map_indexed(chains, |c| {
        let mut out = Vec::with_capacity(n_list.len());
        let mut k = 0;
        fold_chain(&cfg, c as u64, |step, x, _| {
            while k < n_list.len() && n_list[k] == step {
                out.push(grid.cell_of(x) as u16);
                k += 1;
            }
        })?;
        Ok(out)
    });
    let mut by_step = vec![Vec::with_capacity(chains); n_list.len()];
    for chain in per_chain {
        for (k, cell) in chain?.into_iter().enumerate() {
            by_step[k].push(cell);
        }
    }
    Ok(by_step)
}

/// Multiplicities of a bootstrap resample of `n` items.
fn resample_weights(n: usize, rng: &mut ChainRng) -> Vec<u32> {
    let mut w = vec![0u32; n];
    for _ in 0..n {
        let i = ((rng.unit() * n as f64) as usize).min(n - 1);
        w[i] += 1;
    }
    w
}

fn weighted_masses(cells: &[u16], weights: Option<&[u32]>, n_cells: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.resize(n_cells, 0.0);
    let mut total = 0.0;
    match weights {
        None => {
            for &c in cells {
                buf[c as usize] += 1.0;
            }
            total = cells.len() as f64;
        }
        Some(w) => {
            for (&c, &k) in cells.iter().zip(w) {
                buf[c as usize] += k as f64;
                total += k as f64;
            }
        }
    }
    let inv = 1.0 / total;
    buf.iter_mut().for_each(|m| *m *= inv);
}

/// Estimates `‖δ_{x_a} Pⁿ − δ_{x_b} Pⁿ‖` on a grid for each listed `n` and
/// fits `log TV = log C − γ n` on the window where TV is resolved above the
/// multinomial noise floor.
pub fn tv_decay_experiment<E: Executor>(
    table: &Table,
    kernel: &Kernel,
    start_a: PhasePoint,
    start_b: PhasePoint,
    cfg: &DecayConfig,
    exec: &E,
) -> Result<DecayFit> {
    let grid = Grid::for_table(table, cfg.dims)?;
    if grid.cells() > u16::MAX as usize + 1 {
        return Err(Error::InvalidArgument("TV decay grids are limited to 65536 cells".into()));
    }
    if cfg.chains_per_start == 0 {
        return Err(Error::InvalidArgument("chains_per_start must be positive".into()));
    }
    let mut n_list = cfg.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    if n_list.is_empty() {
        return Err(Error::EmptyInput("n_list"));
    }

    let key_a = start_key(cfg.seed, &start_a);
    let key_b = start_key(cfg.seed, &start_b);
    let chains = cfg.chains_per_start;
    let cells_a = ensemble_cells(table, kernel, start_a, &n_list, chains, key_a, grid, exec)?;
    let cells_b = ensemble_cells(table, kernel, start_b, &n_list, chains, key_b, grid, exec)?;

    let n_cells = grid.cells();
    let mut tv = Vec::with_capacity(n_list.len());
    let mut floor = Vec::with_capacity(n_list.len());
    let (mut ma, mut mb) = (Vec::new(), Vec::new());
    for k in 0..n_list.len() {
        weighted_masses(&cells_a[k], None, n_cells, &mut ma);
        weighted_masses(&cells_b[k], None, n_cells, &mut mb);
        tv.push(tv_of_masses(&ma, &mb));
        let pooled: Vec<f64> = ma.iter().zip(&mb).map(|(x, y)| 0.5 * (x + y)).collect();
        floor.push(tv_noise_floor(&pooled, chains as u64, chains as u64));
    }

    // Bootstrap over chains; each resample is keyed to its start so that
    // swapping the starts swaps the resamples too.
    let replicates: Vec<Vec<f64>> = exec.map_indexed(cfg.bootstrap, |r| {
        let mut rng_a = ChainRng::for_initial(key_a, r as u64);
        let mut rng_b = ChainRng::for_initial(key_b, r as u64);
        let wa = resample_weights(chains, &mut rng_a);
        let wb = resample_weights(chains, &mut rng_b);
        let (mut ma, mut mb) = (Vec::new(), Vec::new());
        (0..n_list.len())
            .map(|k| {
                weighted_masses(&cells_a[k], Some(&wa), n_cells, &mut ma);
                weighted_masses(&cells_b[k], Some(&wb), n_cells, &mut mb);
                tv_of_masses(&ma, &mb)
            })
            .collect()
    });
    let ci_half_width: Vec<f64> = (0..n_list.len())
        .map(|k| {
            if replicates.is_empty() {
                return 0.0;
            }
            let mut v: Vec<f64> = replicates.iter().map(|r| r[k]).collect();
            v.sort_by(f64::total_cmp);
            let q = |p: f64| v[((p * (v.len() - 1) as f64) + 0.5) as usize];
            0.5 * (q(0.975) - q(0.025))
        })
        .collect();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..n_list.len() {
        if n_list[k] < cfg.transient {
            continue;
        }
        if tv[k] < cfg.floor_factor * floor[k] || tv[k] <= 0.0 {
            break;
        }
        xs.push(n_list[k] as f64);
        ys.push(math::ln(tv[k]));
    }
    if xs.len() < 3 {
        return Err(Error::NoiseFloorReached { points: xs.len() });
    }
    let (intercept, slope, r2) = math::linear_fit(&xs, &ys).ok_or(Error::NoiseFloorReached { points: xs.len() })?;
    Ok(DecayFit {
        n: n_list,
        tv,
        ci_half_width,
        noise_floor: floor,
        gamma: (-slope).max(0.0),
        slope,
        log_prefactor: intercept,
        window: (xs[0] as usize, xs[xs.len() - 1] as usize),
        r_squared: r2,
        fit_points: xs.len(),
    })
}

/// Settings for [`invariant_measure_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryConfig {
    pub burn_in: usize,
    /// Post-burn-in states recorded per chain.
    pub samples_per_chain: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub dims: (usize, usize),
    pub initial: InitialLaw,
    pub bootstrap: usize,
}

impl StationaryConfig {
    pub fn new(burn_in: usize, samples_per_chain: usize, n_chains: usize, seed: u64) -> Self {
        Self {
            burn_in,
            samples_per_chain,
            n_chains,
            seed,
            dims: crate::tolerances::DEFAULT_GRID,
            initial: InitialLaw::Uniform,
            bootstrap: DEFAULT_BOOTSTRAP,
        }
    }
}

/// Time-average estimate of the stationary law with a two-seed agreement check.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryEstimate {
    pub measure: GridMeasure,
    /// Estimate from an independent seed.
    pub replicate: GridMeasure,
    pub tv_between_seeds: f64,
    /// Mean TV between the estimate and its chain-bootstrap resamples.
    pub bootstrap_noise: f64,
    /// `tv_between_seeds < 2 × bootstrap_noise`.
    pub seeds_agree: bool,
}

fn stationary_counts<E: Executor>(
    table: &Table,
    kernel: &Kernel,
    cfg: &StationaryConfig,
    seed: u64,
    grid: Grid,
    exec: &E,
) -> Result<Vec<Vec<u32>>> {
    let chain_cfg = ChainConfig::new(table, kernel, cfg.initial.clone())
        .seed(seed)
        .steps(cfg.burn_in + cfg.samples_per_chain)
        .chains(cfg.n_chains);
    chain_cfg.validate()?;
    exec.map_indexed(cfg.n_chains, |c| {
        let mut counts = vec![0u32; grid.cells()];
        fold_chain(&chain_cfg, c as u64, |step, x, _| {
            if step > cfg.burn_in {
                counts[grid.cell_of(x)] += 1;
            }
        })?;
        Ok(counts)
    })
    .into_iter()
    .collect()
}

fn sum_counts(per_chain: &[Vec<u32>], weights: Option<&[u32]>, n_cells: usize) -> Vec<u64> {
    let mut total = vec![0u64; n_cells];
    for (c, counts) in per_chain.iter().enumerate() {
        let w = weights.map_or(1, |w| w[c]) as u64;
        if w == 0 {
            continue;
        }
        for (t, &k) in total.iter_mut().zip(counts) {
            *t += w * k as u64;
        }
    }
    total
}

/// Histogram of post-burn-in states of `n_chains` chains, repeated with an
/// independent seed, plus a chain-bootstrap noise level.
pub fn invariant_measure_estimate<E: Executor>(
    table: &Table,
    kernel: &Kernel,
    cfg: &StationaryConfig,
    exec: &E,
) -> Result<StationaryEstimate> {
    if cfg.samples_per_chain == 0 || cfg.n_chains == 0 {
        return Err(Error::EmptyInput("stationary estimate needs samples"));
    }
    let grid = Grid::for_table(table, cfg.dims)?;
    let n_cells = grid.cells();
    let seeds = [cfg.seed, mix64(cfg.seed ^ 0x5EED_0F5E_C04D)];
    let mut estimates = Vec::with_capacity(2);
    let mut noises = Vec::with_capacity(2);
    for (idx, &seed) in seeds.iter().enumerate() {
        let per_chain = stationary_counts(table, kernel, cfg, seed, grid, exec)?;
        let measure = GridMeasure::from_counts(&sum_counts(&per_chain, None, n_cells), grid)?;
        let tvs: Vec<f64> = exec.map_indexed(cfg.bootstrap, |r| {
            let mut rng = ChainRng::for_initial(mix64(seed ^ idx as u64), r as u64);
            let w = resample_weights(cfg.n_chains, &mut rng);
            let counts = sum_counts(&per_chain, Some(&w), n_cells);
            let total: u64 = counts.iter().sum();
            let inv = 1.0 / total as f64;
            let masses: Vec<f64> = counts.iter().map(|&k| k as f64 * inv).collect();
            tv_of_masses(&masses, &measure.masses)
        });
        let noise = if tvs.is_empty() { 0.0 } else { tvs.iter().sum::<f64>() / tvs.len() as f64 };
        estimates.push(measure);
        noises.push(noise);
    }
    let replicate = estimates.pop().expect("two estimates");
    let measure = estimates.pop().expect("two estimates");
    let tv_between_seeds = tv_of_masses(&measure.masses, &replicate.masses);
    let bootstrap_noise = 0.5 * (noises[0] + noises[1]);
    Ok(StationaryEstimate {
        measure,
        replicate,
        tv_between_seeds,
        bootstrap_noise,
        seeds_agree: tv_between_seeds < 2.0 * bootstrap_noise,
    })
}

/// Summary of how close chains come to the boundary of the phase cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionStats {
    /// Median over runs of `min_k min(θ_k, π − θ_k)`.
    pub median_min_theta: f64,
    /// Fraction of runs whose minimum distance falls below `threshold`.
    pub fraction_below: f64,
    /// Fraction of runs whose last state is within `threshold` of the boundary.
    pub final_fraction_below: f64,
    pub threshold: f64,
    /// Least-squares slope per step of `E[log min(θ, π − θ)]`.
    pub log_distance_drift: f64,
    /// `E[log min(θ, π − θ)]` at every step (floored at the smallest
    /// positive double before taking logs).
    pub mean_log_distance: Vec<f64>,
}

/// Absorption summary of a set of recorded runs.
pub fn absorption_statistics(runs: &[ChainRun], threshold: f64) -> Result<AbsorptionStats> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("absorption statistics need at least one run"));
    }
    let mut mins: Vec<f64> =
        runs.iter().map(|r| r.states.iter().map(|x| x.distance_to_boundary()).fold(f64::INFINITY, f64::min)).collect();
    let below = mins.iter().filter(|&&m| m < threshold).count();
    let final_below =
        runs.iter().filter(|r| r.states.last().is_some_and(|x| x.distance_to_boundary() < threshold)).count();
    mins.sort_by(f64::total_cmp);
    let mid = mins.len() / 2;
    let median = if mins.len() % 2 == 1 { mins[mid] } else { 0.5 * (mins[mid - 1] + mins[mid]) };

    let len = runs.iter().map(|r| r.states.len()).min().unwrap_or(0);
    let mut mean_log = vec![0.0; len];
    for r in runs {
        for (m, x) in mean_log.iter_mut().zip(&r.states) {
            *m += math::ln(x.distance_to_boundary().max(f64::MIN_POSITIVE));
        }
    }
    let inv = 1.0 / runs.len() as f64;
    mean_log.iter_mut().for_each(|m| *m *= inv);
    let xs: Vec<f64> = (0..len).map(|k| k as f64).collect();
    let drift = math::linear_fit(&xs, &mean_log).map_or(0.0, |(_, slope, _)| slope);
    Ok(AbsorptionStats {
        median_min_theta: median,
        fraction_below: below as f64 / runs.len() as f64,
        final_fraction_below: final_below as f64 / runs.len() as f64,
        threshold,
        log_distance_drift: drift,
        mean_log_distance: mean_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 1.0).unwrap()
    }

    #[test]
    fn single_point_is_one_cell() {
        let m = GridMeasure::from_points(&[PhasePoint::new(0.3, 1.0)], grid(4)).unwrap();
        assert_eq!(m.masses.iter().filter(|&&x| x == 1.0).count(), 1);
        assert!(GridMeasure::from_points(&[], grid(4)).is_err());
    }

    #[test]
    fn tv_examples() {
        let g = grid(2);
        let a = GridMeasure { grid: g, masses: vec![0.5, 0.5, 0.0, 0.0], samples: 2 };
        let b = GridMeasure { grid: g, masses: vec![1.0, 0.0, 0.0, 0.0], samples: 1 };
        let c = GridMeasure { grid: g, masses: vec![0.0, 0.0, 0.0, 1.0], samples: 1 };
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(tv_distance(&b, &c).unwrap(), 1.0);
        assert!((tv_distance(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        let d = GridMeasure::uniform(grid(3));
        assert!(matches!(tv_distance(&a, &d), Err(Error::DimMismatch(..))));
    }

    #[test]
    fn nu_masses_sum_to_one() {
        let m = GridMeasure::nu(grid(16));
        assert!((m.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_grid_rejected() {
        assert!(Grid::new(1, 4, 1.0).is_err());
    }

    #[test]
    fn ks_uniform_on_grid_points() {
        let mut v: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&mut v, 0.0, 1.0) - 0.005).abs() < 1e-12);
        assert!((ks_critical(0.01, 1.0) - 1.6276).abs() < 1e-3);
    }

    #[test]
    fn absorption_threshold_above_half_pi_counts_everything() {
        let run = ChainRun {
            states: vec![PhasePoint::new(0.0, 1.5), PhasePoint::new(0.0, 1.4)],
            chord_lengths: vec![1.0],
            min_theta_distance_to_boundary: 1.4,
            steps: 1,
        };
        let st = absorption_statistics(&[run], 2.0).unwrap();
        assert_eq!(st.fraction_below, 1.0);
        assert!(absorption_statistics(&[], 1e-3).is_err());
    }
}
