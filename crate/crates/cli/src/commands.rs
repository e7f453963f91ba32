//! Subcommand definitions and their implementations.

use std::io::Write;

use anyhow::{bail, Result};
use billiard_mc_core::chain::{run_chain, ChainConfig};
use billiard_mc_core::diagnostics::{
    invariant_measure_estimate, tv_decay_experiment, tv_distance, DecayConfig, Grid, GridMeasure, StationaryConfig,
};
use billiard_mc_core::exec::Executor;
use billiard_mc_core::math::FRAC_PI_2;
use billiard_mc_core::reachability::{
    band_inclusion_check, coverage_horizon, default_probe_starts, doeblin_lower_bound, two_step_cell_masses,
    two_step_density, ReachConfig,
};
use billiard_mc_core::tolerances::{DEFAULT_BOOTSTRAP, DEFAULT_SUBSAMPLE};
use billiard_mc_core::{PhasePoint, Table};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::exec::Pool;
use crate::output::Outputs;
use crate::parse;
use crate::plot;

/// Chains simulated per parallel batch when streaming trajectories.
const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TableArg {
    /// circle:R, ellipse:A,B, superellipse:A,B,P or a JSON spec file
    #[arg(long)]
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArg,
    /// example1, example2, example3 or a JSON file {"lo": [[θ, v], …], "hi": […]}
    #[arg(long, default_value = "example1")]
    pub kernel: String,
    /// Perturbation half-width ε ∈ (0, π/2)
    #[arg(long, default_value_t = 0.3)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ChainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// "s,theta", uniform or nu
    #[arg(long, default_value = "uniform")]
    pub init: String,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PortraitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
    /// Keep every k-th step
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub thin: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TvDecayArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "0,0.05")]
    pub start_a: String,
    #[arg(long, default_value_t = format!("0,{}", FRAC_PI_2))]
    pub start_b: String,
    #[arg(long, default_value_t = 200)]
    pub n_max: usize,
    /// Chains per start
    #[arg(long, default_value_t = 100_000)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "32,32")]
    pub grid: String,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
    /// TV level whose first crossing is reported
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct StationaryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    /// Recorded states per chain after burn-in
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 1000)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "32,32")]
    pub grid: String,
    /// "s,theta", uniform or nu
    #[arg(long, default_value = "uniform")]
    pub init: String,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReachabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArg,
    #[arg(long, default_value_t = 0.3)]
    pub epsilon: f64,
    #[arg(long, default_value = "0,1")]
    pub start: String,
    #[arg(long, default_value = "32,32")]
    pub grid: String,
    #[arg(long, default_value_t = 100)]
    pub n_max: usize,
    /// Sample points per cell side
    #[arg(long, default_value_t = DEFAULT_SUBSAMPLE)]
    pub subsample: usize,
    /// Also search a band inclusion certificate on an n_s,n_theta lattice
    #[arg(long)]
    pub band: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DensityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "0,1")]
    pub start: String,
    /// Evaluation grid; density is sampled at cell centres
    #[arg(long, default_value = "64,64")]
    pub grid: String,
    /// Gauss-Legendre panels per cell for the cell masses
    #[arg(long, default_value_t = 4)]
    pub panels: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DoeblinArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Step count; default is the coverage horizon plus --margin
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub margin: usize,
    /// "s,theta;s,theta;…"; default is eight starts, three nearly tangential
    #[arg(long)]
    pub probes: Option<String>,
    #[arg(long, default_value = "16,16")]
    pub grid: String,
    /// Grid for the coverage horizon
    #[arg(long, default_value = "32,32")]
    pub reach_grid: String,
    #[arg(long, default_value_t = 100)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
pub enum RunCommand {
    /// Build a table and report its length and convexity
    ValidateTable(TableArg),
    /// Simulate chains; CSV chain,step,s,theta
    Simulate(ChainArgs),
    /// Simulate chains and draw the (s, θ) scatter as SVG
    PhasePortrait(PortraitArgs),
    /// TV distance between the n-step laws from two starts, with a log-linear fit
    TvDecay(TvDecayArgs),
    /// Time-average histogram of the stationary law with a two-seed check
    Stationary(StationaryArgs),
    /// Reachable-set coverage by generation
    Reachability(ReachabilityArgs),
    /// Two-step transition density from a start point on a grid
    Density(DensityArgs),
    /// Empirical minorization constant of the N-step kernel
    Doeblin(DoeblinArgs),
}

impl RunCommand {
    pub fn seed(&self) -> Option<u64> {
        match self {
            RunCommand::Simulate(a) => Some(a.seed),
            RunCommand::PhasePortrait(a) => Some(a.chain.seed),
            RunCommand::TvDecay(a) => Some(a.seed),
            RunCommand::Stationary(a) => Some(a.seed),
            RunCommand::Doeblin(a) => Some(a.seed),
            _ => None,
        }
    }

    pub fn table_arg(&self) -> &str {
        match self {
            RunCommand::ValidateTable(t) => &t.table,
            RunCommand::Simulate(a) => &a.model.table.table,
            RunCommand::PhasePortrait(a) => &a.chain.model.table.table,
            RunCommand::TvDecay(a) => &a.model.table.table,
            RunCommand::Stationary(a) => &a.model.table.table,
            RunCommand::Reachability(a) => &a.table.table,
            RunCommand::Density(a) => &a.model.table.table,
            RunCommand::Doeblin(a) => &a.model.table.table,
        }
    }

    pub fn run(&self, pool: &Pool, out: &mut Outputs) -> Result<()> {
        match self {
            RunCommand::ValidateTable(a) => validate_table(a, out),
            RunCommand::Simulate(a) => simulate(a, pool, out),
            RunCommand::PhasePortrait(a) => phase_portrait(a, pool, out),
            RunCommand::TvDecay(a) => tv_decay(a, pool, out),
            RunCommand::Stationary(a) => stationary(a, pool, out),
            RunCommand::Reachability(a) => reachability(a, pool, out),
            RunCommand::Density(a) => density(a, out),
            RunCommand::Doeblin(a) => doeblin(a, pool, out),
        }
    }
}

fn write_json(w: &mut dyn Write, v: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, v)?;
    writeln!(w)?;
    Ok(())
}

fn validate_table(a: &TableArg, out: &mut Outputs) -> Result<()> {
    let table = parse::table(&a.table)?;
    let r = table.validate_convexity();
    let report = json!({
        "table": parse::spec_json(table.spec()),
        "length": table.length(),
        "min_curvature": r.min_curvature,
        "min_curvature_at": r.min_at,
        "zero_curvature_points": r.zero_curvature_points,
        "convex": !r.negative,
    });
    out.emit("table.json", true, |w| write_json(w, &report))
}

fn chain_setup(a: &ChainArgs) -> Result<(Table, billiard_mc_core::Kernel)> {
    let table = parse::table(&a.model.table.table)?;
    let kernel = parse::kernel(&a.model.kernel, a.model.epsilon)?;
    Ok((table, kernel))
}

/// Runs chains in batches and hands each trajectory, in chain order, to `visit`.
fn for_each_trajectory<F>(
    a: &ChainArgs,
    table: &Table,
    kernel: &billiard_mc_core::Kernel,
    pool: &Pool,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(u64, &[PhasePoint]) -> Result<()>,
{
    let initial = parse::initial(&a.init, table)?;
    let cfg = ChainConfig::new(table, kernel, initial).seed(a.seed).steps(a.steps).chains(a.chains);
    cfg.validate()?;
    let mut first = 0;
    while first < a.chains {
        let n = BATCH.min(a.chains - first);
        let runs = pool.map_indexed(n, |i| run_chain(&cfg, (first + i) as u64));
        for (i, run) in runs.into_iter().enumerate() {
            visit((first + i) as u64, &run?.states)?;
        }
        first += n;
    }
    Ok(())
}

fn simulate(a: &ChainArgs, pool: &Pool, out: &mut Outputs) -> Result<()> {
    let (table, kernel) = chain_setup(a)?;
    out.emit("trajectories.csv", true, |w| {
        writeln!(w, "chain,step,s,theta")?;
        for_each_trajectory(a, &table, &kernel, pool, |c, states| {
            for (step, x) in states.iter().enumerate() {
                writeln!(w, "{c},{step},{},{}", x.s, x.theta)?;
            }
            Ok(())
        })
    })
}

fn phase_portrait(a: &PortraitArgs, pool: &Pool, out: &mut Outputs) -> Result<()> {
    let (table, kernel) = chain_setup(&a.chain)?;
    let mut chains = Vec::with_capacity(a.chain.chains);
    for_each_trajectory(&a.chain, &table, &kernel, pool, |_, states| {
        chains.push(states.iter().step_by(a.thin as usize).copied().collect::<Vec<_>>());
        Ok(())
    })?;
    let title = format!(
        "{}  {} ε = {}  {} chains × {} steps",
        a.chain.model.table.table, a.chain.model.kernel, a.chain.model.epsilon, a.chain.chains, a.chain.steps
    );
    out.emit("portrait.svg", true, |w| plot::phase_portrait(w, table.length(), &title, &chains))
}

fn tv_decay(a: &TvDecayArgs, pool: &Pool, out: &mut Outputs) -> Result<()> {
    let table = parse::table(&a.model.table.table)?;
    let kernel = parse::kernel(&a.model.kernel, a.model.epsilon)?;
    let xa = parse::point(&a.start_a, "--start-a")?;
    let xb = parse::point(&a.start_b, "--start-b")?;
    let mut cfg = DecayConfig::new(a.n_max, a.chains, a.seed);
    cfg.dims = parse::grid(&a.grid, "--grid")?;
    cfg.bootstrap = a.bootstrap;
    let fit = tv_decay_experiment(&table, &kernel, xa, xb, &cfg, pool)?;
    out.emit("tv.csv", true, |w| {
        writeln!(w, "n,tv,ci,noise_floor")?;
        for i in 0..fit.n.len() {
            writeln!(w, "{},{},{},{}", fit.n[i], fit.tv[i], fit.ci_half_width[i], fit.noise_floor[i])?;
        }
        Ok(())
    })?;
    let summary = json!({
        "gamma": fit.gamma,
        "slope": fit.slope,
        "log_prefactor": fit.log_prefactor,
        "window": [fit.window.0, fit.window.1],
        "fit_points": fit.fit_points,
        "r_squared": fit.r_squared,
        "level": a.level,
        "first_below_level": fit.first_below(a.level),
        "transient": cfg.transient,
        "floor_factor": cfg.floor_factor,
    });
    out.emit("fit.json", false, |w| write_json(w, &summary))
}

fn stationary(a: &StationaryArgs, pool: &Pool, out: &mut Outputs) -> Result<()> {
    let table = parse::table(&a.model.table.table)?;
    let kernel = parse::kernel(&a.model.kernel, a.model.epsilon)?;
    let mut cfg = StationaryConfig::new(a.burn_in, a.samples, a.chains, a.seed);
    cfg.dims = parse::grid(&a.grid, "--grid")?;
    cfg.initial = parse::initial(&a.init, &table)?;
    cfg.bootstrap = a.bootstrap;
    let est = invariant_measure_estimate(&table, &kernel, &cfg, pool)?;
    let grid = est.measure.grid;
    let nu = GridMeasure::nu(grid);
    out.emit("stationary.csv", true, |w| {
        writeln!(w, "i_s,i_theta,s_lo,s_hi,theta_lo,theta_hi,mass,replicate_mass,nu_mass")?;
        for i in 0..grid.n_s {
            let (s0, s1) = grid.s_bounds(i);
            for j in 0..grid.n_theta {
                let (t0, t1) = grid.theta_bounds(j);
                writeln!(
                    w,
                    "{i},{j},{s0},{s1},{t0},{t1},{},{},{}",
                    est.measure.mass(i, j),
                    est.replicate.mass(i, j),
                    nu.mass(i, j)
                )?;
            }
        }
        Ok(())
    })?;
    let summary = json!({
        "tv_between_seeds": est.tv_between_seeds,
        "bootstrap_noise": est.bootstrap_noise,
        "seeds_agree": est.seeds_agree,
        "tv_to_nu": tv_distance(&est.measure, &nu)?,
        "samples": est.measure.samples,
    });
    out.emit("stationary.json", false, |w| write_json(w, &summary))
}

fn reachability(a: &ReachabilityArgs, pool: &Pool, out: &mut Outputs) -> Result<()> {
    let table = parse::table(&a.table.table)?;
    let start = parse::point(&a.start, "--start")?;
    let dims = parse::grid(&a.grid, "--grid")?;
    let band = a.band.as_deref().map(|b| parse::grid(b, "--band")).transpose()?;
    if a.subsample == 0 {
        bail!(parse::UsageError("--subsample must be positive".into()));
    }
    let cfg =
        ReachConfig::new(a.epsilon).map_err(|e| parse::UsageError(format!("--epsilon: {e}")))?.subsample(a.subsample);
    let report = coverage_horizon(&table, &cfg, start, dims, a.n_max, pool)?;
    let cells = report.final_mask.grid.cells();
    out.emit("coverage.csv", true, |w| {
        writeln!(w, "generation,coverage,cells")?;
        for (n, c) in report.coverage.iter().enumerate() {
            writeln!(w, "{n},{c},{}", (c * cells as f64).round() as usize)?;
        }
        Ok(())
    })?;
    let title = format!("{}  ε = {}  generation {}", a.table.table, a.epsilon, report.coverage.len() - 1);
    out.emit("mask.pgm", false, |w| plot::mask_pgm(w, &report.final_mask))?;
    out.emit("mask.svg", false, |w| plot::mask_svg(w, &report.final_mask, &title))?;
    let certificate = match band {
        Some((n_s, n_theta)) => {
            let c = band_inclusion_check(&table, a.epsilon, n_s, n_theta)?;
            json!({
                "holds": c.holds(),
                "c1": c.c1,
                "c2": c.c2,
                "min_inverse_on_eps": c.min_inverse_on_eps,
                "min_inverse2_on_c1": c.min_inverse2_on_c1,
                "min_forward2_on_c1": c.min_forward2_on_c1,
                "failures": c.failures.iter().map(|p| [p.s, p.theta]).collect::<Vec<_>>(),
                "validation_points": c.validation_points,
            })
        }
        None => serde_json::Value::Null,
    };
    let summary = json!({
        "n_full": report.n_full,
        "generations": report.coverage.len() - 1,
        "final_coverage": report.coverage.last(),
        "band_certificate": certificate,
    });
    out.emit("reachability.json", false, |w| write_json(w, &summary))
}

fn density(a: &DensityArgs, out: &mut Outputs) -> Result<()> {
    let table = parse::table(&a.model.table.table)?;
    let kernel = parse::kernel(&a.model.kernel, a.model.epsilon)?;
    let p = parse::point(&a.start, "--start")?;
    let x = table.phase_point(p.s, p.theta)?;
    let grid = Grid::for_table(&table, parse::grid(&a.grid, "--grid")?)?;
    let masses = two_step_cell_masses(&table, &kernel, x, grid, a.panels.max(1))?;
    out.emit("density.csv", true, |w| {
        writeln!(w, "i_s,i_theta,s,theta,density,cell_mass")?;
        for i in 0..grid.n_s {
            let (s0, s1) = grid.s_bounds(i);
            for j in 0..grid.n_theta {
                let (t0, t1) = grid.theta_bounds(j);
                let y = PhasePoint::new(0.5 * (s0 + s1), 0.5 * (t0 + t1));
                let d = two_step_density(&table, &kernel, x, y)?;
                writeln!(w, "{i},{j},{},{},{d},{}", y.s, y.theta, masses[i * grid.n_theta + j])?;
            }
        }
        Ok(())
    })?;
    let summary = json!({ "start": [x.s, x.theta], "total_mass": masses.iter().sum::<f64>() });
    out.emit("density.json", false, |w| write_json(w, &summary))
}

fn doeblin(a: &DoeblinArgs, pool: &Pool, out: &mut Outputs) -> Result<()> {
    let table = parse::table(&a.model.table.table)?;
    let kernel = parse::kernel(&a.model.kernel, a.model.epsilon)?;
    let dims = parse::grid(&a.grid, "--grid")?;
    let probes = match &a.probes {
        Some(p) => parse::points(p, "--probes")?
            .into_iter()
            .map(|x| table.phase_point(x.s, x.theta))
            .collect::<billiard_mc_core::Result<Vec<_>>>()?,
        None => default_probe_starts(&table),
    };
    let (n, n_full) = match a.n {
        Some(n) => (n, None),
        None => {
            let reach_dims = parse::grid(&a.reach_grid, "--reach-grid")?;
            let cfg = ReachConfig::new(a.model.epsilon).map_err(|e| parse::UsageError(format!("--epsilon: {e}")))?;
            let mut worst = 0;
            for &x in &probes {
                match coverage_horizon(&table, &cfg, x, reach_dims, a.n_max, pool)?.n_full {
                    Some(k) => worst = worst.max(k),
                    None => bail!(
                        "start ({}, {}) does not reach full coverage within {} generations",
                        x.s,
                        x.theta,
                        a.n_max
                    ),
                }
            }
            (worst + a.margin, Some(worst))
        }
    };
    let r = doeblin_lower_bound(&table, &kernel, n, &probes, dims, a.chains, a.seed, pool)?;
    out.emit("doeblin.csv", true, |w| {
        writeln!(w, "s,theta,min_density,min_density_lower,min_cell_s,min_cell_theta,min_count,unhit_cells")?;
        for p in &r.probes {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p.start.s,
                p.start.theta,
                p.min_density,
                p.min_density_lower,
                p.min_cell.0,
                p.min_cell.1,
                p.min_count,
                p.unhit_cells
            )?;
        }
        Ok(())
    })?;
    let summary = json!({
        "n": r.n,
        "n_full": n_full,
        "chains": r.chains,
        "b_hat": r.b_hat,
        "b_lower": r.b_lower,
        "positive": r.b_hat > 0.0,
    });
    out.emit("doeblin.json", false, |w| write_json(w, &summary))
}
