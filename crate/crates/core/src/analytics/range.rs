//! Price-change count and bid-price range distributions.
//!
//! With i.i.d. restarts, the times between price changes are i.i.d. with
//! distribution `G` (one minus the quadrant survival integrated over the
//! restart law), so the number of changes `K(T)` is a renewal count and the
//! bid price observed at change times is a Bernoulli walk with the
//! integrated upward probability `p`. The price range is then a mixture of
//! exact random-walk range probabilities.

use super::wedge::{survival_probability, upward_probability, SeriesControl};
use super::AnalyticsError;
use crate::reinit::ReinitDist;

/// Distribution of the summed (bid, ask) restart vector: finitely many
/// weighted support points.
#[derive(Debug, Clone, PartialEq)]
pub struct SummedReinit {
    /// `(bid_sum, ask_sum, weight)`, weights summing to one.
    pub points: Vec<(f64, f64, f64)>,
}

impl SummedReinit {
    pub fn point(b: f64, a: f64) -> Self {
        Self {
            points: vec![(b, a, 1.0)],
        }
    }

    /// Sum of two independent uniforms on `{lo..=hi}`, per side, scaled by
    /// `unit` (triangular weights).
    fn from_uniform_steps(lo: i64, hi: i64, unit: f64) -> Self {
        let span = (hi - lo) as usize;
        let m = span + 1;
        let mut sums = Vec::with_capacity(2 * span + 1);
        for s in (2 * lo)..=(2 * hi) {
            let k = (s - 2 * lo) as usize;
            let count = if k <= span { k + 1 } else { 2 * span + 1 - k };
            sums.push((s as f64 * unit, count as f64 / (m * m) as f64));
        }
        let mut points = Vec::with_capacity(sums.len() * sums.len());
        for &(b, wb) in &sums {
            for &(a, wa) in &sums {
                points.push((b, a, wb * wa));
            }
        }
        Self { points }
    }

    /// Build from a per-component restart distribution (components
    /// independent, both sides alike). `unit` converts grid steps to volume.
    pub fn from_dist(dist: &ReinitDist, unit: f64) -> Result<Self, AnalyticsError> {
        match dist {
            ReinitDist::PointMass { value } => {
                Ok(Self::point(value[0] + value[2], value[1] + value[3]))
            }
            ReinitDist::UniformSteps { lo, hi } => Ok(Self::from_uniform_steps(*lo, *hi, unit)),
            ReinitDist::UniformBox { .. } => Err(AnalyticsError::DomainError(
                "continuous restart laws are not supported by the count/range analytics".into(),
            )),
        }
    }
}

/// Eigen-sum of the confined-walk decomposition (folded over the symmetric
/// half of the spectrum):
///
/// `delta(n,k) = 1/(2 n r^n) * sum_{0<m<n/2, e=+-1}
///    [2 (e sqrt(r))^n + (-1)^(m+1) (1 + r^n)] / (1 - 2 e sqrt(pq) cos(m pi/n))^2
///    * e^(k+1-n) cos(m pi/n)^(k-1) sin(m pi/n)^2`.
pub fn walk_range_delta(n: usize, k: usize, p: f64) -> f64 {
    let q = 1.0 - p;
    let r = q / p;
    let rn = r.powi(n as i32);
    let sqpq = (p * q).sqrt();
    let sqr = r.sqrt();
    let mut total = 0.0;
    let mut m = 1usize;
    while 2 * m < n {
        let c = (m as f64 * std::f64::consts::PI / n as f64).cos();
        let s = (m as f64 * std::f64::consts::PI / n as f64).sin();
        let alt = if m % 2 == 1 { 1.0 } else { -1.0 }; // (-1)^(m+1)
        for eps in [1.0f64, -1.0] {
            let num = 2.0 * (eps * sqr).powi(n as i32) + alt * (1.0 + rn);
            let den = (1.0 - 2.0 * eps * sqpq * c).powi(2);
            // eps^(k+1-n) by parity.
            let eps_pow = if eps > 0.0 || (k + 1).wrapping_sub(n) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            total += num / den * eps_pow * c.powi(k as i32 - 1) * s * s;
        }
        m += 1;
    }
    total / (2.0 * n as f64 * rn)
}

/// `P[max - min of a k-step Bernoulli(p) walk <= n]`, exact.
pub fn walk_range_cdf(n: usize, k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if n == 0 {
        return 0.0;
    }
    if n >= k {
        return 1.0;
    }
    if p <= 0.0 || p >= 1.0 {
        // Monotone walk: range equals k.
        return if n >= k { 1.0 } else { 0.0 };
    }
    let q = 1.0 - p;
    let r = q / p;
    let v = (2.0 * (p * q).sqrt()).powi(k as i32 + 2)
        * r.powf((n + 1) as f64 / 2.0)
        * (r.sqrt() * walk_range_delta(n + 2, k + 1, p) - walk_range_delta(n + 1, k + 1, p));
    v.clamp(0.0, 1.0)
}

/// Grid controls for the renewal convolution.
#[derive(Debug, Clone, Copy)]
pub struct CountControl {
    /// Convolution grid bins over `[0, T]`.
    pub bins: usize,
    /// Survival-evaluation nodes (interpolated to the full grid).
    pub nodes: usize,
    /// Drop the tail when `P[K = k]` falls below this.
    pub tail_tol: f64,
}

impl Default for CountControl {
    fn default() -> Self {
        Self {
            bins: 4096,
            nodes: 320,
            tail_tol: 1e-10,
        }
    }
}

/// Monotone cubic (Fritsch-Carlson) interpolation of `(xs, ys)` at `x`.
fn pchip_eval(xs: &[f64], ys: &[f64], slopes: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let mut i = xs.partition_point(|&v| v <= x) - 1;
    i = i.min(n - 2);
    let h = xs[i + 1] - xs[i];
    let s = (x - xs[i]) / h;
    let (y0, y1, m0, m1) = (ys[i], ys[i + 1], slopes[i], slopes[i + 1]);
    let s2 = s * s;
    let s3 = s2 * s;
    y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + m0 * h * (s3 - 2.0 * s2 + s)
        + y1 * (-2.0 * s3 + 3.0 * s2)
        + m1 * h * (s3 - s2)
}

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut d = vec![0.0; n - 1];
    for i in 0..n - 1 {
        d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    }
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * (xs[i + 1] - xs[i]) + (xs[i] - xs[i - 1]);
            let w2 = (xs[i + 1] - xs[i]) + 2.0 * (xs[i] - xs[i - 1]);
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    m
}

/// Inter-change distribution `G(t) = 1 - int survival(x; t) dF(x)` sampled
/// on the convolution grid.
fn renewal_cdf(
    reinit: &SummedReinit,
    mu_h: [f64; 2],
    sigma_h: [[f64; 2]; 2],
    horizon: f64,
    ctl: &CountControl,
    series: &SeriesControl,
) -> Result<Vec<f64>, AnalyticsError> {
    let nodes = ctl.nodes.max(8);
    let mut xs = Vec::with_capacity(nodes + 1);
    let mut ys = Vec::with_capacity(nodes + 1);
    for i in 0..=nodes {
        let t = horizon * i as f64 / nodes as f64;
        let mut g = 0.0;
        if t > 0.0 {
            for &(b, a, w) in &reinit.points {
                g += w * (1.0 - survival_probability([b, a], mu_h, sigma_h, t, series)?);
            }
        }
        xs.push(t);
        ys.push(g.clamp(0.0, 1.0));
    }
    // Enforce monotonicity before interpolating (guards quadrature noise).
    for i in 1..ys.len() {
        if ys[i] < ys[i - 1] {
            ys[i] = ys[i - 1];
        }
    }
    let slopes = pchip_slopes(&xs, &ys);
    let mut out = Vec::with_capacity(ctl.bins + 1);
    for i in 0..=ctl.bins {
        let t = horizon * i as f64 / ctl.bins as f64;
        out.push(pchip_eval(&xs, &ys, &slopes, t).clamp(0.0, 1.0));
    }
    Ok(out)
}

/// `P[K(T) = k]` for `k = 0..=k_max`: renewal count of the inter-change law.
pub fn price_change_count_dist(
    reinit: &SummedReinit,
    mu_h: [f64; 2],
    sigma_h: [[f64; 2]; 2],
    horizon: f64,
    k_max: usize,
    ctl: &CountControl,
    series: &SeriesControl,
) -> Result<Vec<f64>, AnalyticsError> {
    let cdf = renewal_cdf(reinit, mu_h, sigma_h, horizon, ctl, series)?;
    let bins = ctl.bins;
    // Bin masses of G (mass of bin i sits at its right edge; the convolution
    // below is therefore a slight over-count of times, i.e. conservative for
    // G^{*k}(T)).
    let mut g_mass = vec![0.0; bins + 1];
    for i in 1..=bins {
        g_mass[i] = (cdf[i] - cdf[i - 1]).max(0.0);
    }
    let mut out = Vec::with_capacity(k_max + 1);
    // conv holds the sub-distribution of the k-fold sum restricted to [0, T].
    let mut conv = vec![0.0; bins + 1];
    conv[0] = 1.0;
    let mut prev_total = 1.0; // G^{*0}(T)
    for _k in 0..=k_max {
        // Convolve with G, truncating beyond T.
        let mut next = vec![0.0; bins + 1];
        for i in 0..=bins {
            if conv[i] == 0.0 {
                continue;
            }
            let ci = conv[i];
            for j in 1..=(bins - i) {
                next[i + j] += ci * g_mass[j];
            }
        }
        let total: f64 = next.iter().sum(); // G^{*(k+1)}(T)
        out.push((prev_total - total).max(0.0));
        prev_total = total;
        conv = next;
        if prev_total < ctl.tail_tol {
            break;
        }
    }
    Ok(out)
}

/// `P[range of the bid price over [0, T] <= n ticks]`.
#[allow(clippy::too_many_arguments)]
pub fn range_distribution(
    reinit: &SummedReinit,
    mu_h: [f64; 2],
    sigma_h: [[f64; 2]; 2],
    horizon: f64,
    n: usize,
    ctl: &CountControl,
    series: &SeriesControl,
) -> Result<f64, AnalyticsError> {
    // Integrated upward probability over the restart law.
    let mut p_up = 0.0;
    for &(b, a, w) in &reinit.points {
        let up = upward_probability([b, a], mu_h, sigma_h, series)?;
        p_up += w * up.value;
    }
    // Generous k range: the walk-range factor decays geometrically in k once
    // k >> n, and the count tail is cut at tail_tol.
    let k_max = 4096;
    let counts = price_change_count_dist(reinit, mu_h, sigma_h, horizon, k_max, ctl, series)?;
    let mut prob = 0.0;
    for (k, &pk) in counts.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        prob += pk * walk_range_cdf(n, k, p_up);
    }
    Ok(prob.clamp(0.0, 1.0))
}
