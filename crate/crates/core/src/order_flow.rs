//! Order stream generation and the piecewise-constant net order flow path.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Regime, ValidatedParams};
use crate::num::PathScalar;
use crate::rng::{rng_for, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Country {
    F,
    G,
}

/// One incoming order: `size = +1` places a limit order of one volume unit,
/// `size = -1` is a market order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderEvent {
    pub side: Side,
    pub origin: Country,
    /// Signed size in `dv` units, exactly +-1.
    pub size: i8,
}

impl OrderEvent {
    pub fn from_type_index(idx: usize, size: i8) -> Self {
        debug_assert!(idx < 4 && (size == 1 || size == -1));
        let side = if idx % 2 == 0 { Side::Bid } else { Side::Ask };
        let origin = if idx < 2 { Country::F } else { Country::G };
        Self { side, origin, size }
    }

    /// Index into 4-vectors: `(bid,F) (ask,F) (bid,G) (ask,G)`.
    pub fn type_index(&self) -> usize {
        let side = matches!(self.side, Side::Ask) as usize;
        let origin = matches!(self.origin, Country::G) as usize;
        2 * origin + side
    }

    pub fn is_market(&self) -> bool {
        self.size < 0
    }
}

/// Interpolation convention of a sampled path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    /// Value on `[t_k, t_{k+1})` equals `values[k]` (event paths).
    PiecewiseConstant,
    /// `values[k]` samples a continuous path at `t_k` (Brownian paths).
    GridSamples,
}

/// A d-dimensional path on the uniform grid `0, dt, 2 dt, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath<S, const D: usize> {
    pub dt: f64,
    pub values: Vec<[S; D]>,
    pub interp: Interp,
}

impl<S: PathScalar, const D: usize> GridPath<S, D> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    /// Componentwise shift by a constant start vector.
    pub fn shifted(&self, start: [S; D]) -> Self {
        let values = self
            .values
            .iter()
            .map(|v| {
                let mut w = *v;
                for i in 0..D {
                    w[i] += start[i];
                }
                w
            })
            .collect();
        Self {
            dt: self.dt,
            values,
            interp: self.interp,
        }
    }
}

/// A full stream of order events for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderStream {
    pub dt: f64,
    pub events: Vec<OrderEvent>,
}

/// Draw a single order. With `regime == Inactive` and overrides present, the
/// override flow applies; the engine queries this at every step so that
/// regime-dependent flow stays consistent with the current regime.
pub fn sample_order(rng: &mut ChaCha8Rng, params: &ValidatedParams, regime: Regime) -> OrderEvent {
    let flow = params.flow_for(regime);
    let idx = sample_type(rng, &flow.event_probs);
    let market: bool = rng.gen_bool(flow.market_prob[idx]);
    OrderEvent::from_type_index(idx, if market { -1 } else { 1 })
}

fn sample_type(rng: &mut ChaCha8Rng, probs: &[f64; 4]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    3
}

/// Deterministic stream of `steps` events for replication `replication` of
/// the run seeded with `seed`. Uses the active-regime flow throughout; the
/// regime-switching engine draws orders itself when overrides are present.
pub fn generate_stream(seed: u64, params: &ValidatedParams) -> OrderStream {
    generate_stream_for_replication(seed, 0, params)
}

pub fn generate_stream_for_replication(
    seed: u64,
    replication: u64,
    params: &ValidatedParams,
) -> OrderStream {
    let mut rng = rng_for(seed, Purpose::OrderFlow, replication);
    let events = if params.dependence_order == 0 {
        (0..params.steps)
            .map(|_| sample_order(&mut rng, params, Regime::Active))
            .collect()
    } else {
        generate_m_dependent(&mut rng, params)
    };
    OrderStream {
        dt: params.dt,
        events,
    }
}

impl OrderStream {
    pub fn generate(seed: u64, params: &ValidatedParams) -> Self {
        generate_stream(seed, params)
    }

    /// CSV dump for replay debugging, columns `k,side,origin,size`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,side,origin,size\n");
        for (k, e) in self.events.iter().enumerate() {
            let side = match e.side {
                Side::Bid => "b",
                Side::Ask => "a",
            };
            let origin = match e.origin {
                Country::F => "F",
                Country::G => "G",
            };
            out.push_str(&format!("{k},{side},{origin},{}\n", e.size));
        }
        out
    }
}

/// m-dependent sign generator: the market/limit decision at step k uses the
/// probability-integral transform of the mean of uniforms U_k..U_{k+m}
/// (Irwin-Hall), so the marginal market probability is exact while signs at
/// lag <= m are dependent. Type draws stay independent.
fn generate_m_dependent(rng: &mut ChaCha8Rng, params: &ValidatedParams) -> Vec<OrderEvent> {
    let m = params.dependence_order as usize;
    let steps = params.steps;
    let uniforms: Vec<f64> = (0..steps + m).map(|_| rng.gen()).collect();
    let flow = &params.flow;
    let mut events = Vec::with_capacity(steps);
    for k in 0..steps {
        let idx = sample_type(rng, &flow.event_probs);
        let mean: f64 = uniforms[k..=k + m].iter().sum::<f64>() / (m as f64 + 1.0);
        let w = irwin_hall_cdf(mean * (m as f64 + 1.0), m + 1);
        let market = w < flow.market_prob[idx];
        events.push(OrderEvent::from_type_index(idx, if market { -1 } else { 1 }));
    }
    events
}

/// CDF of the sum of `n` independent U(0,1) variables at `x`.
fn irwin_hall_cdf(x: f64, n: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= n as f64 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut binom = 1.0;
    for k in 0..=(x.floor() as usize) {
        let term = binom * (x - k as f64).powi(n as i32);
        sum += if k % 2 == 0 { term } else { -term };
        binom *= (n - k) as f64 / (k as f64 + 1.0);
    }
    let mut fact = 1.0;
    for i in 2..=n {
        fact *= i as f64;
    }
    (sum / fact).clamp(0.0, 1.0)
}

/// Net order flow `X`: component (i,I) at step k is the signed sum of all
/// type-(i,I) order sizes among the first k events, in `dv` units.
pub fn net_flow_path(stream: &OrderStream) -> GridPath<i64, 4> {
    let mut values = Vec::with_capacity(stream.events.len() + 1);
    let mut acc = [0i64; 4];
    values.push(acc);
    for e in &stream.events {
        acc[e.type_index()] += e.size as i64;
        values.push(acc);
    }
    GridPath {
        dt: stream.dt,
        values,
        interp: Interp::PiecewiseConstant,
    }
}
