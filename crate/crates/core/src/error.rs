use alloc::string::String;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid table specification: {0}")]
    BadSpec(String),
    #[error("table is not convex: curvature {min_curvature:e} at s = {at:.6}")]
    NonConvex { min_curvature: f64, at: f64 },
    #[error("collision solver failed to bracket the next boundary hit (s = {s}, theta = {theta})")]
    SolverFailed { s: f64, theta: f64 },
    #[error("phase point ({s}, {theta}) is too close to the boundary of the phase cylinder")]
    BoundaryPoint { s: f64, theta: f64 },
    #[error("invalid phase point ({s}, {theta})")]
    InvalidPoint { s: f64, theta: f64 },
    #[error("invalid kernel: {0}")]
    BadKernel(String),
    #[error("angle {0} left [0, pi] by more than rounding")]
    AngleExcursion(f64),
    #[error("run budget exceeded: {requested} chain steps requested, budget is {budget}")]
    BudgetExceeded { requested: u128, budget: u128 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("grid dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("invalid grid {0}x{1}: both dimensions must be at least 2")]
    BadGrid(usize, usize),
    #[error("TV estimates hit the noise floor with only {points} usable fit points (need 3); add chains")]
    NoiseFloorReached { points: usize },
    #[error("root bracketing failed in two-step density at s' = {0}")]
    RootBracketFailed(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
