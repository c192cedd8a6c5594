//! First exit of a planar Brownian motion from the positive quadrant.
//!
//! In polar coordinates adapted to the covariance, the quadrant becomes a
//! wedge of angle `alpha` and the exit-time law has a Bessel series
//! representation. The driftless series reduces to closed radial integrals
//! (two scaled Bessel evaluations per term); drift enters through an
//! exponential tilt and a double quadrature.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::bessel::ive;
use super::AnalyticsError;
use crate::rng::{rng_for, Purpose};

/// Polar parameters of the quadrant-exit problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeParams {
    /// Wedge angle in (0, pi).
    pub alpha: f64,
    /// Initial angle in (0, alpha).
    pub theta0: f64,
    /// Exponential tilt coefficients of the drift.
    pub a1: f64,
    pub a2: f64,
    /// Drift projections entering the radial integrand.
    pub d1: f64,
    pub d2: f64,
    /// Squared Mahalanobis radius of the start point.
    pub u: f64,
    /// Time tilt coefficient (nonpositive for any proper covariance).
    pub a_t: f64,
}

fn decompose_sigma(sigma: &[[f64; 2]; 2]) -> Result<(f64, f64, f64), AnalyticsError> {
    let s1 = sigma[0][0];
    let s2 = sigma[1][1];
    if (sigma[0][1] - sigma[1][0]).abs() > 1e-12 {
        return Err(AnalyticsError::DegenerateCovariance(
            "covariance not symmetric".into(),
        ));
    }
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(AnalyticsError::DegenerateCovariance(format!(
            "nonpositive diagonal ({s1}, {s2})"
        )));
    }
    let sigma1 = s1.sqrt();
    let sigma2 = s2.sqrt();
    let rho = sigma[0][1] / (sigma1 * sigma2);
    if rho.abs() >= 1.0 - 1e-12 {
        return Err(AnalyticsError::DegenerateCovariance(format!(
            "correlation {rho} too close to +-1"
        )));
    }
    Ok((sigma1, sigma2, rho))
}

/// Compute the wedge parameters for start `x` (open positive quadrant),
/// drift `mu`, covariance `sigma`.
pub fn wedge_params(
    x: [f64; 2],
    mu: [f64; 2],
    sigma: [[f64; 2]; 2],
) -> Result<WedgeParams, AnalyticsError> {
    let (s1, s2, rho) = decompose_sigma(&sigma)?;
    if x[0] <= 0.0 || x[1] <= 0.0 {
        return Err(AnalyticsError::DomainError(format!(
            "start {x:?} must lie in the open positive quadrant"
        )));
    }
    let root = (1.0 - rho * rho).sqrt();
    let alpha = if rho == 0.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        let base = (-root / rho).atan();
        if rho > 0.0 {
            std::f64::consts::PI + base
        } else {
            base
        }
    };
    let den = x[0] * s2 - rho * x[1] * s1;
    let theta0 = if den == 0.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        let base = (x[1] * s1 * root / den).atan();
        if den < 0.0 {
            std::f64::consts::PI + base
        } else {
            base
        }
    };
    let om = 1.0 - rho * rho;
    let a1 = (rho * mu[1] * s1 - mu[0] * s2) / (om * s1 * s1 * s2);
    let a2 = (rho * mu[0] * s2 - mu[1] * s1) / (om * s2 * s2 * s1);
    let d1 = a1 * s1 + rho * a2 * s2;
    let d2 = a2 * s2 * root;
    let u = (x[0] * x[0] / (s1 * s1) + x[1] * x[1] / (s2 * s2)
        - 2.0 * rho * x[0] * x[1] / (s1 * s2))
        / om;
    let a_t = 0.5 * a1 * a1 * s1 * s1
        + rho * a1 * a2 * s1 * s2
        + 0.5 * a2 * a2 * s2 * s2
        + a1 * mu[0]
        + a2 * mu[1];
    Ok(WedgeParams {
        alpha,
        theta0,
        a1,
        a2,
        d1,
        d2,
        u,
        a_t,
    })
}

/// Truncation and quadrature controls for the exit-time series, plus the
/// Monte Carlo budget used where no closed form exists.
#[derive(Debug, Clone, Copy)]
pub struct SeriesControl {
    /// Stop the outer series once two consecutive terms fall below this
    /// fraction of the running sum.
    pub term_tol: f64,
    pub j_max: usize,
    /// Radial Gauss-Legendre panels per standard deviation.
    pub radial_refine: usize,
    /// Monte Carlo paths / step size / seed for drifted direction
    /// probabilities.
    pub mc_paths: usize,
    pub mc_dt: f64,
    pub mc_t_cap: f64,
    pub mc_seed: u64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            term_tol: 1e-12,
            j_max: 600,
            radial_refine: 2,
            mc_paths: 40_000,
            mc_dt: 1e-4,
            mc_t_cap: 1_000.0,
            mc_seed: 0x5eed,
        }
    }
}

/// `P[tau > t]` for the first exit time `tau` of the quadrant.
pub fn survival_probability(
    x: [f64; 2],
    mu: [f64; 2],
    sigma: [[f64; 2]; 2],
    t: f64,
    ctl: &SeriesControl,
) -> Result<f64, AnalyticsError> {
    if t <= 0.0 {
        return Ok(1.0);
    }
    let w = wedge_params(x, mu, sigma)?;
    // Deep-interior shortcut: if both coordinates are many standard
    // deviations away from their axes over [0, t], the exit probability is
    // below double precision and the series would need thousands of terms.
    let far = |xi: f64, mui: f64, sii: f64| (xi + (mui * t).min(0.0)) / (sii * t.sqrt()) >= 8.5;
    if far(x[0], mu[0], sigma[0][0].sqrt()) && far(x[1], mu[1], sigma[1][1].sqrt()) {
        return Ok(1.0);
    }
    let p = if mu[0] == 0.0 && mu[1] == 0.0 {
        driftless_survival(&w, t, ctl)?
    } else {
        drifted_survival(&w, w.a1 * x[0] + w.a2 * x[1], t, ctl)?
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Driftless series: the angular integral is explicit and the radial one has
/// a closed form in two scaled Bessel functions of half-shifted order.
fn driftless_survival(w: &WedgeParams, t: f64, ctl: &SeriesControl) -> Result<f64, AnalyticsError> {
    let arg = w.u / (4.0 * t);
    let radial_scale = (std::f64::consts::PI * t * w.u / 8.0).sqrt();
    let mut sum = 0.0;
    let mut small_streak = 0;
    let mut j = 1;
    while j <= ctl.j_max {
        let nu = j as f64 * std::f64::consts::PI / w.alpha;
        let term = (j as f64 * std::f64::consts::PI * w.theta0 / w.alpha).sin()
            * (2.0 * w.alpha / (j as f64 * std::f64::consts::PI))
            * radial_scale
            * (ive((nu - 1.0) / 2.0, arg) + ive((nu + 1.0) / 2.0, arg));
        sum += term;
        if term.abs() <= ctl.term_tol * (sum.abs() + ctl.term_tol) {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(2.0 / (w.alpha * t) * sum);
            }
        } else {
            small_streak = 0;
        }
        j += 2; // even terms vanish
    }
    Err(AnalyticsError::SeriesNotConverged { j_reached: j })
}

/// Gauss-Legendre nodes/weights on [-1, 1], 16 points.
const GL16: [(f64, f64); 8] = [
    (0.09501250983763744, 0.189450610455068496),
    (0.28160355077925891, 0.182603415044923589),
    (0.45801677765722739, 0.169156519395002532),
    (0.61787624440264375, 0.149595988816576731),
    (0.75540440835500303, 0.124628971255533872),
    (0.86563120238783174, 0.095158511682492785),
    (0.94457502307323258, 0.062253523938647894),
    (0.98940093499164993, 0.027152459411754095),
];

fn gl16_nodes(a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    for &(x, w) in &GL16 {
        out.push((c - h * x, w * h));
        out.push((c + h * x, w * h));
    }
}

/// Drifted series: exponential tilt outside, double quadrature inside. The
/// Gaussian factor is centered by absorbing `exp(-U/2t)` into
/// `exp(-(r - sqrt(U))^2 / 2t)` with scaled Bessel functions; `tilt` is the
/// spatial part `a1 x1 + a2 x2` of the exponent.
fn drifted_survival(
    w: &WedgeParams,
    tilt: f64,
    t: f64,
    ctl: &SeriesControl,
) -> Result<f64, AnalyticsError> {
    let sqrt_u = w.u.sqrt();
    let dmax = w.d1.abs() + w.d2.abs();
    let r_max = sqrt_u + dmax * t + (2.0 * t * (1e18f64).ln()).sqrt();
    // Radial panels: resolve the Gaussian peak width sqrt(t).
    let panel = (t.sqrt() * 0.5).min(r_max / 8.0).max(r_max / 512.0);
    let mut r_nodes = Vec::new();
    let mut lo = 0.0;
    while lo < r_max {
        let hi = (lo + panel * ctl.radial_refine as f64).min(r_max);
        gl16_nodes(lo, hi, &mut r_nodes);
        lo = hi;
    }
    // Gaussian part of the radial integrand, shared across j and theta.
    let gauss: Vec<f64> = r_nodes
        .iter()
        .map(|&(r, wt)| wt * r * (-(r - sqrt_u) * (r - sqrt_u) / (2.0 * t)).exp())
        .collect();

    let mut sum = 0.0;
    let mut small_streak = 0;
    let mut j = 1;
    while j <= ctl.j_max {
        let jf = j as f64;
        let nu = jf * std::f64::consts::PI / w.alpha;
        let sin0 = (jf * std::f64::consts::PI * w.theta0 / w.alpha).sin();
        if sin0 != 0.0 {
            // Bessel values reusable across the angular nodes.
            let bess: Vec<f64> = r_nodes
                .iter()
                .map(|&(r, _)| ive(nu, r * sqrt_u / t))
                .collect();
            // Angular panels refine with the oscillation count.
            let theta_panels = 2 + (jf * 0.75) as usize;
            let mut t_nodes = Vec::new();
            for p in 0..theta_panels {
                let a = w.alpha * p as f64 / theta_panels as f64;
                let b = w.alpha * (p + 1) as f64 / theta_panels as f64;
                gl16_nodes(a, b, &mut t_nodes);
            }
            let mut tj = 0.0;
            for &(theta, wt) in &t_nodes {
                let d_eff = w.d1 * (w.alpha - theta).sin() + w.d2 * (w.alpha - theta).cos();
                let mut radial = 0.0;
                for (idx, &(r, _)) in r_nodes.iter().enumerate() {
                    radial += gauss[idx] * (-d_eff * r).exp() * bess[idx];
                }
                tj += wt * (jf * std::f64::consts::PI * theta / w.alpha).sin() * radial;
            }
            let term = sin0 * tj;
            sum += term;
            if term.abs() <= ctl.term_tol * (sum.abs() + ctl.term_tol) {
                small_streak += 1;
                if small_streak >= 2 {
                    break;
                }
            } else {
                small_streak = 0;
            }
        }
        j += 1;
        if j > ctl.j_max {
            return Err(AnalyticsError::SeriesNotConverged { j_reached: j });
        }
    }
    Ok(2.0 / (w.alpha * t) * sum * (tilt + w.a_t * t).exp())
}

/// Probability that the first exit leaves through the horizontal axis with
/// positive first coordinate, i.e. the first price move is upward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpwardProb {
    pub value: f64,
    /// Zero for the closed form, the binomial standard error for Monte
    /// Carlo.
    pub std_error: f64,
    /// Paths censored at the time cap (Monte Carlo only).
    pub censored: usize,
}

/// `P[W_1(tau) > 0]`: closed form `(alpha - theta0)/alpha` without drift, a
/// first-exit Monte Carlo with drift.
pub fn upward_probability(
    x: [f64; 2],
    mu: [f64; 2],
    sigma: [[f64; 2]; 2],
    ctl: &SeriesControl,
) -> Result<UpwardProb, AnalyticsError> {
    let w = wedge_params(x, mu, sigma)?;
    if w.a_t > 1e-12 {
        return Err(AnalyticsError::HittingNotAlmostSure { a_t: w.a_t });
    }
    if mu[0] == 0.0 && mu[1] == 0.0 {
        return Ok(UpwardProb {
            value: (w.alpha - w.theta0) / w.alpha,
            std_error: 0.0,
            censored: 0,
        });
    }
    mc_upward(x, mu, sigma, ctl)
}

/// First-exit Monte Carlo on the grid (used for drifted direction
/// probabilities and as the independent check of the closed form).
pub fn mc_upward(
    x: [f64; 2],
    mu: [f64; 2],
    sigma: [[f64; 2]; 2],
    ctl: &SeriesControl,
) -> Result<UpwardProb, AnalyticsError> {
    let (s1, s2, rho) = decompose_sigma(&sigma)?;
    // Cholesky factor of the 2x2 covariance.
    let l11 = s1;
    let l21 = rho * s2;
    let l22 = s2 * (1.0 - rho * rho).sqrt();
    let dt = ctl.mc_dt;
    let sdt = dt.sqrt();
    let max_steps = (ctl.mc_t_cap / dt) as usize;
    let results: Vec<(u8, bool)> = (0..ctl.mc_paths as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(ctl.mc_seed, Purpose::BrownianPath, rep);
            let mut w1 = x[0];
            let mut w2 = x[1];
            for _ in 0..max_steps {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                w1 += mu[0] * dt + sdt * l11 * z1;
                w2 += mu[1] * dt + sdt * (l21 * z1 + l22 * z2);
                if w1 <= 0.0 || w2 <= 0.0 {
                    // Exit through the horizontal axis means w2 hit first.
                    return (1u8, w2 <= 0.0 && w1 > 0.0);
                }
            }
            (0u8, false)
        })
        .collect();
    let hits = results.iter().filter(|r| r.0 == 1).count();
    let ups = results.iter().filter(|r| r.1).count();
    if hits == 0 {
        return Err(AnalyticsError::DomainError(
            "no path exited within the time cap".into(),
        ));
    }
    let p = ups as f64 / hits as f64;
    Ok(UpwardProb {
        value: p,
        std_error: (p * (1.0 - p) / hits as f64).sqrt(),
        censored: results.len() - hits,
    })
}

/// Density of the exit location `W_1(tau)` on `(0, infinity)` in the
/// driftless case.
pub fn exit_location_density(
    x: [f64; 2],
    sigma: [[f64; 2]; 2],
    z: f64,
) -> Result<f64, AnalyticsError> {
    if z <= 0.0 {
        return Err(AnalyticsError::DomainError(format!(
            "exit location must be positive, got {z}"
        )));
    }
    let w = wedge_params(x, [0.0, 0.0], sigma)?;
    let pi = std::f64::consts::PI;
    let num = (pi * w.theta0 / w.alpha).sin();
    let den = ((pi / w.alpha) * (w.u.sqrt() / z).ln()).cosh() - (pi * w.theta0 / w.alpha).cos();
    Ok(num / (2.0 * z * w.alpha * den))
}
