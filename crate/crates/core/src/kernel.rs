//! Perturbation laws for the outgoing angle.
//!
//! Every law is uniform on an interval `[lo(θ), hi(θ)] ⊆ [0, π]` that depends
//! only on the deterministic outgoing angle `θ`.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::math::{FRAC_PI_2, PI};

/// Piecewise-linear function of `θ ∈ [0, π]` given by sorted knots, constant
/// beyond the first and last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::BadKernel("piecewise-linear table needs at least one knot".into()));
        }
        if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::BadKernel("piecewise-linear knots must be finite".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::BadKernel("piecewise-linear knots must have distinct abscissae".into()));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|p| p.0 <= x);
        if i == 0 {
            return k[0].1;
        }
        if i == k.len() {
            return k[k.len() - 1].1;
        }
        let (x0, y0) = k[i - 1];
        let (x1, y1) = k[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// User-supplied support bounds `θ ↦ [lo(θ), hi(θ)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomSupport {
    pub lo: PiecewiseLinear,
    pub hi: PiecewiseLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    /// Uniform on `[θ^ε - ε, θ^ε + ε]`, `θ^ε = min(max(θ, ε), π - ε)`.
    Example1,
    /// Uniform on `[max(θ - ε, 0), min(θ + ε, π)]`.
    Example2,
    /// Uniform on `[0, 2θ]` for `θ < ε`, on `[2θ - π, π]` for `θ > π - ε`,
    /// and on `[θ - ε, θ + ε]` otherwise.
    Example3,
    Custom(CustomSupport),
}

/// A perturbation law with its half-width `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    epsilon: f64,
}

/// Number of `θ` values checked when validating a custom support.
const CUSTOM_VALIDATION_SAMPLES: usize = 10_000;

impl Kernel {
    pub fn new(family: KernelFamily, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < FRAC_PI_2) {
            return Err(Error::BadKernel(alloc::format!("epsilon must lie in (0, pi/2), got {epsilon}")));
        }
        let kernel = Self { family, epsilon };
        if let KernelFamily::Custom(_) = &kernel.family {
            for i in 0..=CUSTOM_VALIDATION_SAMPLES {
                let theta = PI * i as f64 / CUSTOM_VALIDATION_SAMPLES as f64;
                let (lo, hi) = kernel.support(theta);
                if !(0.0 <= lo && lo < hi && hi <= PI) {
                    return Err(Error::BadKernel(alloc::format!(
                        "custom support [{lo}, {hi}] at theta = {theta} is not a nonempty subinterval of [0, pi]"
                    )));
                }
            }
        }
        Ok(kernel)
    }

    pub fn example1(epsilon: f64) -> Result<Self> {
        Self::new(KernelFamily::Example1, epsilon)
    }

    pub fn example2(epsilon: f64) -> Result<Self> {
        Self::new(KernelFamily::Example2, epsilon)
    }

    pub fn example3(epsilon: f64) -> Result<Self> {
        Self::new(KernelFamily::Example3, epsilon)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Support `[lo, hi]` of the outgoing angle given deterministic angle `θ`.
    pub fn support(&self, theta: f64) -> (f64, f64) {
        let eps = self.epsilon;
        let theta = theta.clamp(0.0, PI);
        match &self.family {
            KernelFamily::Example1 => {
                let c = theta.max(eps).min(PI - eps);
                (c - eps, c + eps)
            }
            KernelFamily::Example2 => ((theta - eps).max(0.0), (theta + eps).min(PI)),
            KernelFamily::Example3 => {
                if theta < eps {
                    (0.0, 2.0 * theta)
                } else if theta > PI - eps {
                    (PI - 2.0 * (PI - theta), PI)
                } else {
                    (theta - eps, theta + eps)
                }
            }
            KernelFamily::Custom(c) => (c.lo.eval(theta), c.hi.eval(theta)),
        }
    }

    /// Inverse-CDF draw from a unit uniform `u ∈ [0, 1]`.
    pub fn sample_with_uniform(&self, theta: f64, u: f64) -> f64 {
        let (lo, hi) = self.support(theta);
        let w = hi - lo;
        // Anchor on the nearer endpoint so u = 0 and u = 1 are exact.
        let v = if u <= 0.5 { lo + u * w } else { hi - (1.0 - u) * w };
        v.clamp(lo, hi)
    }

    /// Draws the perturbed outgoing angle.
    pub fn sample<R: RngCore + ?Sized>(&self, theta: f64, rng: &mut R) -> f64 {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        self.sample_with_uniform(theta, u)
    }

    /// Conditional density of `θ'` given `θ`; zero outside the support and
    /// for a degenerate (point) support.
    pub fn density(&self, theta: f64, theta_out: f64) -> f64 {
        let (lo, hi) = self.support(theta);
        let w = hi - lo;
        if w > 0.0 && theta_out >= lo && theta_out <= hi {
            1.0 / w
        } else {
            0.0
        }
    }

    /// Length of the support at `θ`.
    pub fn support_length(&self, theta: f64) -> f64 {
        let (lo, hi) = self.support(theta);
        hi - lo
    }
}
