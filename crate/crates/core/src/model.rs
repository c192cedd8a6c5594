//! Market model parameters, state types, validation, and moment derivations.
//!
//! Unit conventions used throughout the crate:
//!
//! - time step `dt = 1/n`, volume unit `dv = n^(-1/2)`;
//! - queue sizes and capacity are stored as `i64` multiples of `dv` in the
//!   event engine (exactness of the engine/path-map equivalence depends on
//!   integer arithmetic);
//! - prices are stored as `i64` multiples of the tick `delta`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Order-type index order used for every 4-vector in this crate:
/// `0 = (bid,F)`, `1 = (ask,F)`, `2 = (bid,G)`, `3 = (ask,G)`.
pub const TYPE_LABELS: [&str; 4] = ["bid_f", "ask_f", "bid_g", "ask_g"];

pub const BID_F: usize = 0;
pub const ASK_F: usize = 1;
pub const BID_G: usize = 2;
pub const ASK_G: usize = 3;

/// Sentinel for unbounded transmission capacity.
pub const UNBOUNDED_CAPACITY: i64 = i64::MAX / 4;

/// Flow distribution of a single regime: type probabilities and, per type,
/// the conditional probability that an order is a market order (size `-dv`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowProbs {
    /// P[(side, origin)] for the four order types, summing to 1.
    pub event_probs: [f64; 4],
    /// Conditional market-order probability per type.
    pub market_prob: [f64; 4],
}

impl FlowProbs {
    pub fn uniform(market_prob: f64) -> Self {
        Self {
            event_probs: [0.25; 4],
            market_prob: [market_prob; 4],
        }
    }
}

/// All market, scaling, and flow parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Scaling index; `dt = 1/n`, `dv = n^(-1/2)`.
    pub n: u32,
    /// Trading horizon, a multiple of `dt`.
    pub horizon_t: f64,
    /// Price tick `delta > 0`.
    pub tick_delta: f64,
    /// Capacity bound for exports from F (capacity may fall to `-kappa_minus`).
    pub kappa_minus: f64,
    /// Capacity bound for imports to F (capacity may rise to `kappa_plus`).
    pub kappa_plus: f64,
    /// Active-regime (and default) order flow.
    pub flow: FlowProbs,
    /// m >= 0; 0 means i.i.d. order flow.
    #[serde(default)]
    pub dependence_order: u32,
    /// Alternative flow used while the books are decoupled.
    #[serde(default)]
    pub regime_overrides: Option<FlowProbs>,
}

impl ModelParams {
    /// The balanced configuration used by the simulation studies:
    /// uniform types, market probability `1/2 + drift_steps * dv` per type.
    pub fn balanced(n: u32, horizon_t: f64, market_drift_steps: f64) -> Self {
        let dv = 1.0 / (n as f64).sqrt();
        Self {
            n,
            horizon_t,
            tick_delta: 0.1,
            kappa_minus: 0.5,
            kappa_plus: 0.5,
            flow: FlowProbs::uniform(0.5 + market_drift_steps * dv),
            dependence_order: 0,
            regime_overrides: None,
        }
    }
}

/// One violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("tick_delta must be strictly positive, got {0}")]
    NonPositiveTick(f64),
    #[error("{name} = {value} is not a positive multiple of dv = {dv}")]
    CapacityNotMultipleOfDv {
        name: &'static str,
        value: f64,
        dv: f64,
    },
    #[error("probabilities invalid: {0}")]
    ProbabilitiesInvalid(String),
    #[error("horizon_t = {horizon} is not a positive multiple of dt = {dt}")]
    HorizonNotMultipleOfDt { horizon: f64, dt: f64 },
    #[error("n must be positive")]
    NonPositiveN,
    #[error("dependence_order {0} exceeds the supported maximum {1}")]
    DependenceTooLarge(u32, u32),
    #[error("analytic moments are unavailable for dependence_order > 0; estimate them empirically")]
    UnsupportedDependence,
}

/// Structured validation failure listing every violated invariant.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid model parameters: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors(pub Vec<ModelError>);

pub const MAX_DEPENDENCE_ORDER: u32 = 16;

/// Normalized parameters with derived integer quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedParams {
    pub n: u32,
    /// Number of order events, `horizon_t * n`.
    pub steps: usize,
    pub dt: f64,
    pub dv: f64,
    pub horizon_t: f64,
    pub tick_delta: f64,
    /// Capacity bounds in `dv` units ([`UNBOUNDED_CAPACITY`] for infinite).
    pub kappa_minus_units: i64,
    pub kappa_plus_units: i64,
    pub flow: FlowProbs,
    pub dependence_order: u32,
    pub regime_overrides: Option<FlowProbs>,
}

impl ValidatedParams {
    pub fn flow_for(&self, regime: Regime) -> &FlowProbs {
        match (regime, &self.regime_overrides) {
            (Regime::Inactive, Some(f)) => f,
            _ => &self.flow,
        }
    }

    pub fn capacity_bounds(&self) -> (i64, i64) {
        (-self.kappa_minus_units, self.kappa_plus_units)
    }
}

const PROB_TOL: f64 = 1e-12;

fn check_flow(flow: &FlowProbs, label: &str, errors: &mut Vec<ModelError>) {
    let sum: f64 = flow.event_probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        errors.push(ModelError::ProbabilitiesInvalid(format!(
            "{label} event_probs sum to {sum}, expected 1"
        )));
    }
    for (i, &p) in flow.event_probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            errors.push(ModelError::ProbabilitiesInvalid(format!(
                "{label} event_probs[{}] = {p} outside [0,1]",
                TYPE_LABELS[i]
            )));
        }
    }
    for (i, &p) in flow.market_prob.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            errors.push(ModelError::ProbabilitiesInvalid(format!(
                "{label} market_prob[{}] = {p} outside [0,1]",
                TYPE_LABELS[i]
            )));
        }
    }
}

/// Round `value` to dv units, failing unless it is (numerically) a positive
/// multiple of dv or infinite.
fn capacity_units(
    name: &'static str,
    value: f64,
    dv: f64,
    errors: &mut Vec<ModelError>,
) -> i64 {
    if value.is_infinite() && value > 0.0 {
        return UNBOUNDED_CAPACITY;
    }
    let units = value / dv;
    let rounded = units.round();
    if value <= 0.0 || !value.is_finite() || (units - rounded).abs() > 1e-9 || rounded < 1.0 {
        errors.push(ModelError::CapacityNotMultipleOfDv { name, value, dv });
        return 0;
    }
    rounded as i64
}

/// Check every parameter invariant; on success return the normalized form,
/// otherwise an error listing all violations.
pub fn validate_params(params: &ModelParams) -> Result<ValidatedParams, ValidationErrors> {
    let mut errors = Vec::new();
    if params.n == 0 {
        errors.push(ModelError::NonPositiveN);
        return Err(ValidationErrors(errors));
    }
    let n = params.n as f64;
    let dt = 1.0 / n;
    let dv = 1.0 / n.sqrt();

    if !(params.tick_delta > 0.0) || !params.tick_delta.is_finite() {
        errors.push(ModelError::NonPositiveTick(params.tick_delta));
    }

    let steps_f = params.horizon_t / dt;
    if !(params.horizon_t > 0.0) || (steps_f - steps_f.round()).abs() > 1e-6 {
        errors.push(ModelError::HorizonNotMultipleOfDt {
            horizon: params.horizon_t,
            dt,
        });
    }

    let kappa_minus_units = capacity_units("kappa_minus", params.kappa_minus, dv, &mut errors);
    let kappa_plus_units = capacity_units("kappa_plus", params.kappa_plus, dv, &mut errors);

    check_flow(&params.flow, "", &mut errors);
    if let Some(overrides) = &params.regime_overrides {
        check_flow(overrides, "regime_overrides", &mut errors);
    }

    if params.dependence_order > MAX_DEPENDENCE_ORDER {
        errors.push(ModelError::DependenceTooLarge(
            params.dependence_order,
            MAX_DEPENDENCE_ORDER,
        ));
    }

    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    Ok(ValidatedParams {
        n: params.n,
        steps: steps_f.round() as usize,
        dt,
        dv,
        horizon_t: params.horizon_t,
        tick_delta: params.tick_delta,
        kappa_minus_units,
        kappa_plus_units,
        flow: params.flow,
        dependence_order: params.dependence_order,
        regime_overrides: params.regime_overrides,
    })
}

/// Per-type drift/variance and cross terms of the order flow at scaling
/// level `n`, in the normalization where the net order flow converges to a
/// linear Brownian motion with drift `mu` and covariance `Sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub mu: [f64; 4],
    pub sigma2: [f64; 4],
    /// Symmetric cross terms; diagonal entries are zero.
    pub cross: [[f64; 4]; 4],
}

impl MomentSet {
    /// The full 4x4 covariance matrix of the limiting Brownian motion.
    pub fn covariance(&self) -> [[f64; 4]; 4] {
        let mut sigma = self.cross;
        for i in 0..4 {
            sigma[i][i] = self.sigma2[i];
        }
        sigma
    }
}

/// Derive the exact per-type moments for i.i.d. flow: each step draws one of
/// the four types (multinomial), then a sign from `market_prob`. Exactly one
/// type is nonzero per step, so cross moments reduce to `-E[V_a] E[V_b]`.
pub fn derive_event_moments(params: &ValidatedParams) -> Result<MomentSet, ModelError> {
    if params.dependence_order > 0 {
        return Err(ModelError::UnsupportedDependence);
    }
    moments_of_flow(&params.flow, params.dv)
}

/// Moments of an explicit flow distribution (used for regime overrides too).
pub fn moments_of_flow(flow: &FlowProbs, dv: f64) -> Result<MomentSet, ModelError> {
    let mut mu = [0.0; 4];
    let mut sigma2 = [0.0; 4];
    // E[V_i] = dv * p_i * (1 - 2 q_i), with mu_i = E[V_i] / dv^2.
    let mut mean_v = [0.0; 4];
    for i in 0..4 {
        let p = flow.event_probs[i];
        let q = flow.market_prob[i];
        mean_v[i] = dv * p * (1.0 - 2.0 * q);
        mu[i] = mean_v[i] / (dv * dv);
        // Var[V_i]/dv^2 = p - (p(1-2q))^2
        sigma2[i] = p - (p * (1.0 - 2.0 * q)).powi(2);
    }
    let mut cross = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                // Cov[V_i, V_j] = -E[V_i] E[V_j] since V_i V_j = 0.
                cross[i][j] = -(mean_v[i] / dv) * (mean_v[j] / dv);
            }
        }
    }
    let set = MomentSet { mu, sigma2, cross };
    Ok(set)
}

/// Empirical moment estimation for dependent flows: long-run (co)variances
/// with lag window `dependence_order` (exact in expectation for m-dependent
/// streams). Pass several independently seeded streams for stable estimates.
pub fn estimate_event_moments(
    params: &ValidatedParams,
    streams: &[crate::order_flow::OrderStream],
) -> MomentSet {
    let m = params.dependence_order as usize;
    let total: usize = streams.iter().map(|s| s.events.len()).sum();
    // Per-step signed type indicators in dv units: v[i] in {-1, 0, +1}.
    let mut mean = [0.0f64; 4];
    // raw[lag][i][j] accumulates v_i[k] * v_j[k + lag].
    let mut raw = vec![[[0.0f64; 4]; 4]; m + 1];
    let mut pair_count = vec![0usize; m + 1];
    for s in streams {
        let steps: Vec<(usize, f64)> = s
            .events
            .iter()
            .map(|e| (e.type_index(), e.size as f64))
            .collect();
        for (k, &(ti, vi)) in steps.iter().enumerate() {
            mean[ti] += vi;
            for lag in 0..=m.min(steps.len() - 1 - k) {
                let (tj, vj) = steps[k + lag];
                raw[lag][ti][tj] += vi * vj;
                pair_count[lag] += 1;
            }
        }
    }
    for x in &mut mean {
        *x /= total as f64;
    }
    // gamma_{ij}(lag) = E[v_i(k) v_j(k+lag)] - mean_i mean_j; the long-run
    // value sums lag 0 once and each positive lag in both orders.
    let gamma = |lag: usize, i: usize, j: usize| -> f64 {
        raw[lag][i][j] / pair_count[lag] as f64 - mean[i] * mean[j]
    };
    let mut sigma2 = [0.0; 4];
    let mut cross = [[0.0; 4]; 4];
    for i in 0..4 {
        sigma2[i] = gamma(0, i, i);
        for lag in 1..=m {
            sigma2[i] += 2.0 * gamma(lag, i, i);
        }
        for j in 0..4 {
            if i == j {
                continue;
            }
            cross[i][j] = gamma(0, i, j);
            for lag in 1..=m {
                cross[i][j] += gamma(lag, i, j) + gamma(lag, j, i);
            }
        }
    }
    // Symmetrize against finite-sample asymmetry.
    for i in 0..4 {
        for j in (i + 1)..4 {
            let v = 0.5 * (cross[i][j] + cross[j][i]);
            cross[i][j] = v;
            cross[j][i] = v;
        }
    }
    let mu = mean.map(|x| x / params.dv);
    MomentSet { mu, sigma2, cross }
}

/// Drift and covariance of the summed (cumulative bid, cumulative ask) flow.
pub fn aggregate_shared_moments(m: &MomentSet) -> ([f64; 2], [[f64; 2]; 2]) {
    let mu_h = [m.mu[BID_F] + m.mu[BID_G], m.mu[ASK_F] + m.mu[ASK_G]];
    let s = m.covariance();
    let var_b = s[BID_F][BID_F] + 2.0 * s[BID_F][BID_G] + s[BID_G][BID_G];
    let var_a = s[ASK_F][ASK_F] + 2.0 * s[ASK_F][ASK_G] + s[ASK_G][ASK_G];
    let off = s[BID_F][ASK_F] + s[BID_F][ASK_G] + s[BID_G][ASK_F] + s[BID_G][ASK_G];
    (mu_h, [[var_b, off], [off, var_a]])
}

/// Coupling regime of the cross-border market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Active,
    Inactive,
}

/// Full market state in integer units (queues/capacity in `dv`, prices in
/// ticks).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarketState {
    /// Best bid prices of F and G in ticks.
    pub bid_ticks: [i64; 2],
    /// Queue sizes `(bid_f, ask_f, bid_g, ask_g)` in `dv` units.
    pub q: [i64; 4],
    /// Net cross-border volume in `dv` units.
    pub cap: i64,
    pub regime: Regime,
    /// Cumulative price-change count.
    pub price_changes: u64,
}

impl MarketState {
    pub fn new_active(q: [i64; 4]) -> Self {
        Self {
            bid_ticks: [0, 0],
            q,
            cap: 0,
            regime: Regime::Active,
            price_changes: 0,
        }
    }

    /// Cumulative (shared-book) bid and ask queues.
    pub fn cumulative(&self) -> [i64; 2] {
        [self.q[BID_F] + self.q[BID_G], self.q[ASK_F] + self.q[ASK_G]]
    }
}
