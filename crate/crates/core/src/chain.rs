//! The perturbed billiard as a Markov chain: a deterministic bounce followed
//! by a kernel draw for the outgoing angle.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::billiard_map::{bounce, PhasePoint};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::Table;
use crate::kernel::Kernel;
use crate::math::{self, PI};
use crate::rng::ChainRng;
use crate::tolerances::DEFAULT_STEP_BUDGET;

/// Law of the initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    /// Point mass.
    Point(PhasePoint),
    /// Chain `c` starts at `points[c % points.len()]`.
    List(Vec<PhasePoint>),
    /// Uniform on `[0, |Γ|) × [0, π]`.
    Uniform,
    /// The billiard-invariant law `sin θ ds dθ / (2|Γ|)`.
    Nu,
}

impl InitialLaw {
    /// Initial state of chain `chain`, drawn from the chain's own stream.
    pub fn draw(&self, table: &Table, seed: u64, chain: u64) -> PhasePoint {
        match self {
            InitialLaw::Point(p) => *p,
            InitialLaw::List(ps) => ps[(chain as usize) % ps.len()],
            InitialLaw::Uniform => {
                let mut rng = ChainRng::for_initial(seed, chain);
                let s = rng.unit() * table.length();
                let theta = rng.unit() * PI;
                PhasePoint::new(s, theta)
            }
            InitialLaw::Nu => {
                let mut rng = ChainRng::for_initial(seed, chain);
                sample_nu(table, rng.unit(), rng.unit())
            }
        }
    }
}

/// Maps two unit uniforms to a draw from `ν`: `s` uniform, `cos θ` uniform.
#[inline]
pub fn sample_nu(table: &Table, u_s: f64, u_theta: f64) -> PhasePoint {
    let s = u_s * table.length();
    let theta = math::acos((1.0 - 2.0 * u_theta).clamp(-1.0, 1.0));
    PhasePoint::new(s, theta)
}

/// Everything needed to run seeded chains.
#[derive(Debug, Clone)]
pub struct ChainConfig<'a> {
    pub table: &'a Table,
    pub kernel: &'a Kernel,
    pub seed: u64,
    pub n_steps: usize,
    pub n_chains: usize,
    pub initial: InitialLaw,
    /// Upper bound on `n_steps * n_chains`.
    pub budget: u128,
}

impl<'a> ChainConfig<'a> {
    pub fn new(table: &'a Table, kernel: &'a Kernel, initial: InitialLaw) -> Self {
        Self { table, kernel, seed: 0, n_steps: 0, n_chains: 1, initial, budget: DEFAULT_STEP_BUDGET }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self
    }

    pub fn chains(mut self, n_chains: usize) -> Self {
        self.n_chains = n_chains;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidArgument("n_chains must be at least 1".into()));
        }
        if let InitialLaw::List(ps) = &self.initial {
            if ps.is_empty() {
                return Err(Error::EmptyInput("initial point list"));
            }
        }
        if let InitialLaw::Point(p) = &self.initial {
            self.table.phase_point(p.s, p.theta)?;
        }
        if let InitialLaw::List(ps) = &self.initial {
            for p in ps {
                self.table.phase_point(p.s, p.theta)?;
            }
        }
        let requested = self.n_steps as u128 * self.n_chains as u128;
        if requested > self.budget {
            return Err(Error::BudgetExceeded { requested, budget: self.budget });
        }
        Ok(())
    }
}

/// A recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    /// `n_steps + 1` states, starting with the initial one.
    pub states: Vec<PhasePoint>,
    /// Chord length of each bounce (`n_steps` entries).
    pub chord_lengths: Vec<f64>,
    /// Minimum over visited states of `min(θ, π - θ)`.
    pub min_theta_distance_to_boundary: f64,
    pub steps: usize,
}

/// Brings an angle that rounding pushed just outside `[0, π]` back inside.
#[inline]
pub fn settle_angle(theta: f64, slack: f64) -> Result<f64> {
    if (0.0..=PI).contains(&theta) {
        Ok(theta)
    } else if theta >= -slack && theta <= PI + slack {
        Ok(theta.clamp(0.0, PI))
    } else {
        Err(Error::AngleExcursion(theta))
    }
}

/// One transition of `P_ε`: bounce, then redraw the outgoing angle.
pub fn chain_step<R: RngCore + ?Sized>(
    table: &Table,
    kernel: &Kernel,
    x: PhasePoint,
    rng: &mut R,
) -> Result<PhasePoint> {
    Ok(chain_step_detailed(table, kernel, x, rng)?.0)
}

/// [`chain_step`] that also returns the chord length of the bounce.
pub fn chain_step_detailed<R: RngCore + ?Sized>(
    table: &Table,
    kernel: &Kernel,
    x: PhasePoint,
    rng: &mut R,
) -> Result<(PhasePoint, f64)> {
    let b = bounce(table, x)?;
    let slack = table.tolerances().angle_rounding;
    let theta1 = settle_angle(b.next.theta, slack)?;
    let theta = settle_angle(kernel.sample(theta1, rng), slack)?;
    Ok((PhasePoint::new(b.next.s, theta), b.chord))
}

/// [`chain_step`] driven by an explicit unit uniform instead of a stream.
pub fn chain_step_with_uniform(table: &Table, kernel: &Kernel, x: PhasePoint, u: f64) -> Result<PhasePoint> {
    let b = bounce(table, x)?;
    let slack = table.tolerances().angle_rounding;
    let theta1 = settle_angle(b.next.theta, slack)?;
    Ok(PhasePoint::new(b.next.s, settle_angle(kernel.sample_with_uniform(theta1, u), slack)?))
}

/// Runs chain `chain` and feeds every state to `visit(step, state, chord)`
/// without storing the trajectory. The initial state is visited with step 0
/// and chord 0.
pub fn fold_chain<F>(config: &ChainConfig<'_>, chain: u64, mut visit: F) -> Result<PhasePoint>
where
    F: FnMut(usize, &PhasePoint, f64),
{
    let mut rng = ChainRng::new(config.seed, chain);
    let mut x = config.initial.draw(config.table, config.seed, chain);
    visit(0, &x, 0.0);
    for step in 1..=config.n_steps {
        let (y, chord) = chain_step_detailed(config.table, config.kernel, x, &mut rng)?;
        x = y;
        visit(step, &x, chord);
    }
    Ok(x)
}

/// Runs one chain and records its trajectory.
pub fn run_chain(config: &ChainConfig<'_>, chain: u64) -> Result<ChainRun> {
    config.validate()?;
    let mut states = Vec::with_capacity(config.n_steps + 1);
    let mut chord_lengths = Vec::with_capacity(config.n_steps);
    let mut min_d = f64::INFINITY;
    fold_chain(config, chain, |step, x, chord| {
        states.push(*x);
        if step > 0 {
            chord_lengths.push(chord);
        }
        min_d = min_d.min(x.distance_to_boundary());
    })?;
    Ok(ChainRun { states, chord_lengths, min_theta_distance_to_boundary: min_d, steps: config.n_steps })
}

/// Final states of chains `0..n_chains`, in chain order.
pub fn run_ensemble<E: Executor>(config: &ChainConfig<'_>, exec: &E) -> Result<Vec<PhasePoint>> {
    config.validate()?;
    exec.map_indexed(config.n_chains, |c| fold_chain(config, c as u64, |_, _, _| {})).into_iter().collect()
}

/// Full trajectories of chains `0..n_chains`, in chain order.
pub fn run_chains<E: Executor>(config: &ChainConfig<'_>, exec: &E) -> Result<Vec<ChainRun>> {
    config.validate()?;
    exec.map_indexed(config.n_chains, |c| run_chain(config, c as u64)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::geometry::TableSpec;
    use crate::math::FRAC_PI_2;

    #[test]
    fn midpoint_draw_reproduces_bounce() {
        let t = Table::build(&TableSpec::circle(1.0)).unwrap();
        let k = Kernel::example1(0.1).unwrap();
        let y = chain_step_with_uniform(&t, &k, PhasePoint::new(0.0, FRAC_PI_2), 0.5).unwrap();
        assert!((y.s - PI).abs() < 1e-13 && (y.theta - FRAC_PI_2).abs() < 1e-13);
        let y = chain_step_with_uniform(&t, &k, PhasePoint::new(0.0, FRAC_PI_2), 1.0).unwrap();
        assert!((y.s - PI).abs() < 1e-13 && (y.theta - (FRAC_PI_2 + 0.1)).abs() < 1e-13);
    }

    #[test]
    fn zero_steps_is_initial_point() {
        let t = Table::build(&TableSpec::circle(1.0)).unwrap();
        let k = Kernel::example1(0.1).unwrap();
        let x = PhasePoint::new(1.0, 1.0);
        let run = run_chain(&ChainConfig::new(&t, &k, InitialLaw::Point(x)), 0).unwrap();
        assert_eq!(run.states, alloc::vec![x]);
        assert!(run.chord_lengths.is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let t = Table::build(&TableSpec::circle(1.0)).unwrap();
        let k = Kernel::example1(0.1).unwrap();
        let mut cfg = ChainConfig::new(&t, &k, InitialLaw::Uniform).steps(10).chains(10);
        cfg.budget = 50;
        assert!(matches!(run_ensemble(&cfg, &Sequential), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn settle_angle_clamps_only_rounding() {
        assert_eq!(settle_angle(-1e-13, 1e-12).unwrap(), 0.0);
        assert_eq!(settle_angle(PI + 1e-13, 1e-12).unwrap(), PI);
        assert!(settle_angle(-1e-9, 1e-12).is_err());
    }

    #[test]
    fn invalid_initial_point_rejected() {
        let t = Table::build(&TableSpec::circle(1.0)).unwrap();
        let k = Kernel::example1(0.1).unwrap();
        let cfg = ChainConfig::new(&t, &k, InitialLaw::Point(PhasePoint::new(0.0, 4.0)));
        assert!(run_chain(&cfg, 0).is_err());
    }
}
