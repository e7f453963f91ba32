//! Numerical tolerances and defaults shared across modules.

/// Tolerances used by table construction, the collision solver and chain
/// bookkeeping. [`Tolerances::DEFAULT`] holds the values every module uses
/// unless a caller overrides them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Curvature below this (negative) value rejects a table.
    pub negative_curvature: f64,
    /// Relative curvature (against the maximum) below which a local minimum
    /// is reported as a null-curvature point.
    pub curvature_zero: f64,
    /// Angles this close to 0 or pi are fixed points of the map.
    pub grazing_angle: f64,
    /// Parameter-space width at which the generic collision bisection stops.
    pub bisection_width: f64,
    /// Number of coarse probes used to bracket the generic collision root.
    pub bracket_probes: usize,
    /// Rounding slack tolerated when an angle leaves `[0, pi]`.
    pub angle_rounding: f64,
    /// Minimum arc-length table resolution.
    pub min_resolution: usize,
}

impl Tolerances {
    pub const DEFAULT: Self = Self {
        negative_curvature: -1e-10,
        curvature_zero: 1e-8,
        grazing_angle: 1e-9,
        bisection_width: 1e-12,
        bracket_probes: 64,
        angle_rounding: 1e-12,
        min_resolution: 256,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Default arc-length table resolution.
pub const DEFAULT_RESOLUTION: usize = 4096;
/// Default histogram grid for TV estimates.
pub const DEFAULT_GRID: (usize, usize) = (32, 32);
/// Default per-cell sub-sampling lattice for reachability.
pub const DEFAULT_SUBSAMPLE: usize = 3;
/// Default bootstrap resample count.
pub const DEFAULT_BOOTSTRAP: usize = 200;
/// Default absorption threshold on `min(theta, pi - theta)`.
pub const DEFAULT_ABSORPTION_THRESHOLD: f64 = 1e-3;
/// Default bound on `n_steps * n_chains` for a single configuration.
pub const DEFAULT_STEP_BUDGET: u128 = 100_000_000_000;
