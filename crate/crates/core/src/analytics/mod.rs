//! First-passage analytics of the limit dynamics: planar-Brownian survival
//! and exit laws on the positive quadrant, price-change count and price-range
//! distributions, and the interface PDE for the cross-border direction
//! change.

pub mod bessel;
pub mod pde;
pub mod range;
pub mod wedge;

use thiserror::Error;

pub use pde::{
    interface_exit_tail, interface_survival, interface_survival_field, InterfaceParams,
    PdeControl,
};
pub use range::{
    price_change_count_dist, range_distribution, walk_range_cdf, walk_range_delta, SummedReinit,
};
pub use wedge::{
    exit_location_density, survival_probability, upward_probability, SeriesControl, UpwardProb,
    WedgeParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
    #[error("series not converged after {j_reached} terms")]
    SeriesNotConverged { j_reached: usize },
    #[error("hitting is not almost sure (a_t = {a_t})")]
    HittingNotAlmostSure { a_t: f64 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("grid too coarse: refinement changed the value by {estimate}")]
    GridTooCoarse { estimate: f64 },
    #[error("explicit scheme violates the CFL bound, dt must be <= {dt_max}")]
    CflViolation { dt_max: f64 },
}

/// Standard normal CDF.
pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln Phi(z)`, stable far into the left tail.
pub(crate) fn ln_norm_cdf(z: f64) -> f64 {
    if z > -35.0 {
        // erfc is accurate down to the underflow threshold near -37.
        norm_cdf(z).ln()
    } else {
        // Asymptotic expansion of Mills' ratio.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
    }
}

/// Survival of a one-dimensional Brownian motion with drift above zero:
/// `P[min_{s<=t} (x + mu s + sigma B_s) > 0]`.
pub fn survival_1d(x: f64, mu: f64, sigma: f64, t: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if sigma <= 0.0 {
        return if x + mu * t > 0.0 { 1.0 } else { 0.0 };
    }
    let s = sigma * t.sqrt();
    let main = norm_cdf((x + mu * t) / s);
    let reflected = (-2.0 * mu * x / (sigma * sigma) + ln_norm_cdf((-x + mu * t) / s)).exp();
    (main - reflected).clamp(0.0, 1.0)
}
