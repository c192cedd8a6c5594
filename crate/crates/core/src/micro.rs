//! Exact event-by-event simulation in integer units.
//!
//! Three dynamics share the same order stream format:
//!
//! - [`run_active`]: the books are coupled for the whole period. A market
//!   order finding its domestic queue empty executes against the foreign
//!   queue (a cross-border trade, moving the capacity count); when a side's
//!   *cumulative* queue is depleted both bid prices move one tick and all
//!   four queues are reinitialized.
//! - [`run_inactive`]: the books are decoupled. An order only ever touches
//!   its own national book; depleting a national queue moves that country's
//!   price and reinitializes that country's queue pair. Capacity is frozen.
//! - [`run_regime_switching`]: alternates between the two. Active dynamics
//!   run until a cross-border trade would push the capacity outside
//!   `[-kappa_minus, kappa_plus]`; at that event the triggering country's
//!   price and queues are adjusted (see [`compute_z`]) and the books
//!   decouple. They re-couple at the first event finding both bid prices
//!   equal again.
//!
//! All quantities are `i64`: queues and capacity in `dv` units, prices in
//! ticks. This makes the equivalence with the path-map representation an
//! exact integer statement, which the test suite checks verbatim.

use thiserror::Error;

use crate::model::{MarketState, Regime, ValidatedParams, ASK_F, ASK_G, BID_F, BID_G};
use crate::order_flow::{Country, OrderEvent, OrderStream, Side};
use crate::reinit::{PriceDir, ReinitEngine, ReinitSource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invariant violated at event {index}: {detail}")]
    InvariantViolation { index: usize, detail: String },
}

/// Which book(s) a price change touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeScope {
    /// Coupled books: both prices move together.
    Shared,
    Country(Country),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceChange {
    pub index: usize,
    pub dir: PriceDir,
    pub scope: ChangeScope,
    /// Queue vector right after the change.
    pub queues_after: [i64; 4],
}

/// Direction indicator of the price adjustment at a regime switch: per
/// country, +1 if its ask queue is the depleted one, -1 for its bid queue,
/// 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZIndicator {
    pub z_f: i8,
    pub z_g: i8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchKind {
    Decouple { z: ZIndicator },
    Recouple,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSwitch {
    pub index: usize,
    pub kind: SwitchKind,
}

/// Counters for events that are possible in principle but outside the
/// regular micro dynamics; they are logged rather than assumed away.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Both components of the switch indicator nonzero at a decoupling.
    pub double_z: u32,
    /// The re-coupling order was applied to an empty queue (run rejected).
    pub recouple_negative: u32,
}

/// Full simulation record on the event grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub dv: f64,
    pub tick: f64,
    /// State after k events; index 0 is the initial state.
    pub states: Vec<MarketState>,
    /// Cross-border trade counts per order type, in `dv` units.
    pub m_counters: Vec<[i64; 4]>,
    pub price_changes: Vec<PriceChange>,
    pub switches: Vec<RegimeSwitch>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn price_change_count(&self) -> usize {
        self.price_changes.len()
    }

    /// max - min of the bid price of `country`, in ticks.
    pub fn bid_range_ticks(&self, country: Country) -> i64 {
        let idx = matches!(country, Country::G) as usize;
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for s in &self.states {
            lo = lo.min(s.bid_ticks[idx]);
            hi = hi.max(s.bid_ticks[idx]);
        }
        hi - lo
    }

    pub fn decouple_count(&self) -> usize {
        self.switches
            .iter()
            .filter(|s| matches!(s.kind, SwitchKind::Decouple { .. }))
            .count()
    }
}

/// Outcome classification of one active-dynamics event.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ActiveCase {
    Limit,
    DomesticExec,
    /// Market order against the foreign queue; `cap_delta` is +-1.
    CrossBorder { cap_delta: i64 },
    /// Cumulative side depleted: price change. The final execution may itself
    /// be a cross-border trade.
    Deplete { cross_border: bool, cap_delta: i64 },
}

fn foreign_index(type_index: usize) -> usize {
    // Same side, other country: (b,F)<->(b,G), (a,F)<->(a,G).
    (type_index + 2) % 4
}

/// Capacity effect of one cross-border execution of `type_index`:
/// imports to F (types (a,F),(b,G)) raise the count, exports lower it.
fn cap_delta_for(type_index: usize) -> i64 {
    match type_index {
        ASK_F | BID_G => 1,
        BID_F | ASK_G => -1,
        _ => unreachable!(),
    }
}

fn classify_active(q: &[i64; 4], e: &OrderEvent) -> Result<ActiveCase, String> {
    let idx = e.type_index();
    if !e.is_market() {
        return Ok(ActiveCase::Limit);
    }
    let dom = q[idx];
    let cum = dom + q[foreign_index(idx)];
    if cum <= 0 {
        return Err(format!("cumulative queue empty before market order: {q:?}"));
    }
    if dom >= 1 && cum > 1 {
        Ok(ActiveCase::DomesticExec)
    } else if dom == 0 && cum > 1 {
        Ok(ActiveCase::CrossBorder {
            cap_delta: cap_delta_for(idx),
        })
    } else {
        // cum == 1: the order depletes the shared side.
        let cross_border = dom == 0;
        Ok(ActiveCase::Deplete {
            cross_border,
            cap_delta: if cross_border { cap_delta_for(idx) } else { 0 },
        })
    }
}

/// Effects of one step, reported alongside the new state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEffect {
    pub price_change: Option<(PriceDir, [i64; 4])>,
    /// The order executed cross-border (counts toward `m_counters`).
    pub cross_border: bool,
}

/// One event of the coupled dynamics. `reinit` is consulted only when the
/// event depletes a cumulative queue.
pub fn step_active(
    s: &MarketState,
    e: &OrderEvent,
    reinit: &mut dyn ReinitSource<i64>,
) -> Result<(MarketState, StepEffect), EngineError> {
    debug_assert_eq!(s.regime, Regime::Active);
    debug_assert_eq!(s.bid_ticks[0], s.bid_ticks[1]);
    let case = classify_active(&s.q, e).map_err(|detail| EngineError::InvariantViolation {
        index: 0,
        detail,
    })?;
    let idx = e.type_index();
    let mut next = *s;
    let mut effect = StepEffect {
        price_change: None,
        cross_border: false,
    };
    match case {
        ActiveCase::Limit => next.q[idx] += 1,
        ActiveCase::DomesticExec => next.q[idx] -= 1,
        ActiveCase::CrossBorder { cap_delta } => {
            next.q[foreign_index(idx)] -= 1;
            next.cap += cap_delta;
            effect.cross_border = true;
        }
        ActiveCase::Deplete {
            cross_border,
            cap_delta,
        } => {
            let dir = match e.side {
                Side::Bid => PriceDir::Down,
                Side::Ask => PriceDir::Up,
            };
            let r = reinit.draw(dir, &s.q);
            next.q = r;
            next.cap += cap_delta;
            let tick_step = if matches!(dir, PriceDir::Up) { 1 } else { -1 };
            next.bid_ticks = [s.bid_ticks[0] + tick_step, s.bid_ticks[1] + tick_step];
            next.price_changes += 1;
            effect.price_change = Some((dir, r));
            effect.cross_border = cross_border;
        }
    }
    if next.q.iter().any(|&x| x < 0) {
        return Err(EngineError::InvariantViolation {
            index: 0,
            detail: format!("negative queue after active step: {:?}", next.q),
        });
    }
    Ok((next, effect))
}

/// One event of the decoupled dynamics: only the order's national book is
/// touched, and the capacity never moves.
pub fn step_inactive(
    s: &MarketState,
    e: &OrderEvent,
    reinit: &mut dyn ReinitSource<i64>,
) -> Result<(MarketState, StepEffect), EngineError> {
    let idx = e.type_index();
    let mut next = *s;
    let mut effect = StepEffect {
        price_change: None,
        cross_border: false,
    };
    if !e.is_market() {
        next.q[idx] += 1;
    } else if s.q[idx] > 1 {
        next.q[idx] -= 1;
    } else {
        // The national queue (0 or 1 unit) cannot absorb the order: price
        // change in this country only.
        let dir = match e.side {
            Side::Bid => PriceDir::Down,
            Side::Ask => PriceDir::Up,
        };
        let r = reinit.draw(dir, &s.q);
        let (b, a, c) = match e.origin {
            Country::F => (BID_F, ASK_F, 0usize),
            Country::G => (BID_G, ASK_G, 1usize),
        };
        next.q[b] = r[b];
        next.q[a] = r[a];
        next.bid_ticks[c] += if matches!(dir, PriceDir::Up) { 1 } else { -1 };
        next.price_changes += 1;
        effect.price_change = Some((dir, next.q));
    }
    Ok((next, effect))
}

/// Switch indicator at the event that pushes the capacity outside its
/// bounds: apply the order to its own country's pair and read off which
/// queue went negative.
pub fn compute_z(s_pre: &MarketState, e: &OrderEvent) -> ZIndicator {
    let z_for = |bid: i64, ask: i64| -> i8 {
        if bid >= 0 && ask == -1 {
            1
        } else if bid == -1 && ask >= 0 {
            -1
        } else {
            0
        }
    };
    let v = e.size as i64;
    let idx = e.type_index();
    let mut pair_f = [s_pre.q[BID_F], s_pre.q[ASK_F]];
    let mut pair_g = [s_pre.q[BID_G], s_pre.q[ASK_G]];
    match idx {
        BID_F => pair_f[0] += v,
        ASK_F => pair_f[1] += v,
        BID_G => pair_g[0] += v,
        ASK_G => pair_g[1] += v,
        _ => unreachable!(),
    }
    ZIndicator {
        z_f: z_for(pair_f[0], pair_f[1]),
        z_g: z_for(pair_g[0], pair_g[1]),
    }
}

fn check_active_start(s0: &MarketState) -> Result<(), EngineError> {
    if s0.regime != Regime::Active || s0.bid_ticks[0] != s0.bid_ticks[1] {
        return Err(EngineError::InvariantViolation {
            index: 0,
            detail: "active start requires coupled books with equal bid prices".into(),
        });
    }
    if s0.q.iter().any(|&x| x < 0)
        || s0.q[BID_F] + s0.q[BID_G] < 1
        || s0.q[ASK_F] + s0.q[ASK_G] < 1
    {
        return Err(EngineError::InvariantViolation {
            index: 0,
            detail: format!("invalid initial queues {:?}", s0.q),
        });
    }
    Ok(())
}

fn new_trajectory(params: &ValidatedParams, s0: MarketState, steps: usize) -> Trajectory {
    let mut t = Trajectory {
        dt: params.dt,
        dv: params.dv,
        tick: params.tick_delta,
        states: Vec::with_capacity(steps + 1),
        m_counters: Vec::with_capacity(steps + 1),
        price_changes: Vec::new(),
        switches: Vec::new(),
        diagnostics: Diagnostics::default(),
    };
    t.states.push(s0);
    t.m_counters.push([0; 4]);
    t
}

/// Coupled dynamics over a whole stream.
pub fn run_active(
    s0: MarketState,
    stream: &OrderStream,
    reinit: &mut ReinitEngine,
    params: &ValidatedParams,
) -> Result<Trajectory, EngineError> {
    check_active_start(&s0)?;
    let mut traj = new_trajectory(params, s0, stream.events.len());
    let mut state = s0;
    let mut m = [0i64; 4];
    for (k, e) in stream.events.iter().enumerate() {
        let (next, effect) =
            step_active(&state, e, reinit).map_err(|err| at_index(err, k + 1))?;
        if effect.cross_border {
            m[e.type_index()] += 1;
        }
        if let Some((dir, r)) = effect.price_change {
            traj.price_changes.push(PriceChange {
                index: k + 1,
                dir,
                scope: ChangeScope::Shared,
                queues_after: r,
            });
        }
        state = next;
        traj.states.push(state);
        traj.m_counters.push(m);
    }
    Ok(traj)
}

/// Decoupled dynamics over a whole stream.
pub fn run_inactive(
    s0: MarketState,
    stream: &OrderStream,
    reinit: &mut ReinitEngine,
    params: &ValidatedParams,
) -> Result<Trajectory, EngineError> {
    let mut s0 = s0;
    s0.regime = Regime::Inactive;
    let mut traj = new_trajectory(params, s0, stream.events.len());
    let mut state = s0;
    for (k, e) in stream.events.iter().enumerate() {
        let (next, effect) =
            step_inactive(&state, e, reinit).map_err(|err| at_index(err, k + 1))?;
        if let Some((dir, r)) = effect.price_change {
            traj.price_changes.push(PriceChange {
                index: k + 1,
                dir,
                scope: ChangeScope::Country(e.origin),
                queues_after: r,
            });
        }
        state = next;
        traj.states.push(state);
        traj.m_counters.push([0; 4]);
    }
    Ok(traj)
}

fn at_index(err: EngineError, index: usize) -> EngineError {
    match err {
        EngineError::InvariantViolation { detail, .. } => {
            EngineError::InvariantViolation { index, detail }
        }
    }
}

/// How the order arriving at a regime-switch boundary is applied on top of
/// the adjusted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HandoffRule {
    /// Apply the boundary formulas verbatim: the triggering/re-coupling order
    /// size is added to its queue slot after the adjustment.
    #[default]
    Verbatim,
    /// Alternative reading: the boundary order is considered already consumed
    /// and is not re-applied.
    SkipOrderTerm,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EngineConfig {
    pub handoff: HandoffRule,
}

/// Supplies orders to the regime-switching engine; queried with the current
/// regime so that flow overrides take effect while books are decoupled.
pub trait OrderSource {
    fn next_order(&mut self, regime: Regime) -> OrderEvent;
    fn remaining(&self) -> usize;
}

/// Replays a fixed stream regardless of regime.
pub struct StreamSource<'a> {
    stream: &'a OrderStream,
    pos: usize,
}

impl<'a> StreamSource<'a> {
    pub fn new(stream: &'a OrderStream) -> Self {
        Self { stream, pos: 0 }
    }
}

impl OrderSource for StreamSource<'_> {
    fn next_order(&mut self, _regime: Regime) -> OrderEvent {
        let e = self.stream.events[self.pos];
        self.pos += 1;
        e
    }

    fn remaining(&self) -> usize {
        self.stream.events.len() - self.pos
    }
}

/// Draws orders from the model flow, honoring regime overrides.
pub struct RegimeAwareSource<'a> {
    pub params: &'a ValidatedParams,
    pub rng: rand_chacha::ChaCha8Rng,
    steps_left: usize,
}

impl<'a> RegimeAwareSource<'a> {
    pub fn new(params: &'a ValidatedParams, seed: u64, replication: u64) -> Self {
        Self {
            params,
            rng: crate::rng::rng_for(seed, crate::rng::Purpose::OrderFlow, replication),
            steps_left: params.steps,
        }
    }
}

impl OrderSource for RegimeAwareSource<'_> {
    fn next_order(&mut self, regime: Regime) -> OrderEvent {
        self.steps_left = self.steps_left.saturating_sub(1);
        crate::order_flow::sample_order(&mut self.rng, self.params, regime)
    }

    fn remaining(&self) -> usize {
        self.steps_left
    }
}

/// Capacity-constrained market: alternate the two dynamics with the boundary
/// handoffs described in the module docs.
pub fn run_regime_switching(
    s0: MarketState,
    stream: &OrderStream,
    reinit: &mut ReinitEngine,
    params: &ValidatedParams,
) -> Result<Trajectory, EngineError> {
    let mut source = StreamSource::new(stream);
    run_regime_switching_with_source(s0, &mut source, reinit, params, EngineConfig::default())
}

pub fn run_regime_switching_with_source(
    s0: MarketState,
    source: &mut dyn OrderSource,
    reinit: &mut ReinitEngine,
    params: &ValidatedParams,
    cfg: EngineConfig,
) -> Result<Trajectory, EngineError> {
    check_active_start(&s0)?;
    let (cap_lo, cap_hi) = params.capacity_bounds();
    if s0.cap < cap_lo || s0.cap > cap_hi {
        return Err(EngineError::InvariantViolation {
            index: 0,
            detail: format!("initial capacity {} outside [{cap_lo},{cap_hi}]", s0.cap),
        });
    }
    let steps = source.remaining();
    let mut traj = new_trajectory(params, s0, steps);
    let mut state = s0;
    let mut m = [0i64; 4];

    for k in 1..=steps {
        let e = source.next_order(state.regime);
        match state.regime {
            Regime::Active => {
                let case = classify_active(&state.q, &e)
                    .map_err(|detail| EngineError::InvariantViolation { index: k, detail })?;
                let cap_delta = match case {
                    ActiveCase::CrossBorder { cap_delta }
                    | ActiveCase::Deplete { cap_delta, .. } => cap_delta,
                    _ => 0,
                };
                let new_cap = state.cap + cap_delta;
                if new_cap < cap_lo || new_cap > cap_hi {
                    // Decoupling: the order is consumed by the boundary
                    // adjustment instead of a regular step.
                    let z = compute_z(&state, &e);
                    if z.z_f != 0 && z.z_g != 0 {
                        traj.diagnostics.double_z += 1;
                    }
                    let mut next = state;
                    for (zi, b, a, c) in
                        [(z.z_f, BID_F, ASK_F, 0usize), (z.z_g, BID_G, ASK_G, 1usize)]
                    {
                        if zi == 0 {
                            continue;
                        }
                        let dir = if zi > 0 { PriceDir::Up } else { PriceDir::Down };
                        let r = reinit.draw(dir, &state.q);
                        next.q[b] = r[b];
                        next.q[a] = r[a];
                        next.bid_ticks[c] += zi as i64;
                        next.price_changes += 1;
                        traj.price_changes.push(PriceChange {
                            index: k,
                            dir,
                            scope: ChangeScope::Country(if c == 0 {
                                Country::F
                            } else {
                                Country::G
                            }),
                            queues_after: r,
                        });
                    }
                    if matches!(cfg.handoff, HandoffRule::Verbatim) {
                        next.q[e.type_index()] += e.size as i64;
                    }
                    if next.q.iter().any(|&x| x < 0) {
                        traj.diagnostics.recouple_negative += 1;
                        return Err(EngineError::InvariantViolation {
                            index: k,
                            detail: format!(
                                "negative queue after decoupling handoff: {:?}",
                                next.q
                            ),
                        });
                    }
                    next.regime = Regime::Inactive;
                    state = next;
                    traj.switches.push(RegimeSwitch {
                        index: k,
                        kind: SwitchKind::Decouple { z },
                    });
                } else {
                    let (next, effect) =
                        step_active(&state, &e, reinit).map_err(|err| at_index(err, k))?;
                    if effect.cross_border {
                        m[e.type_index()] += 1;
                    }
                    if let Some((dir, r)) = effect.price_change {
                        traj.price_changes.push(PriceChange {
                            index: k,
                            dir,
                            scope: ChangeScope::Shared,
                            queues_after: r,
                        });
                    }
                    state = next;
                }
            }
            Regime::Inactive => {
                if state.bid_ticks[0] == state.bid_ticks[1] {
                    // Re-coupling: the order is added to its queue without
                    // matching; the books couple from this event on.
                    let mut next = state;
                    if matches!(cfg.handoff, HandoffRule::Verbatim) {
                        next.q[e.type_index()] += e.size as i64;
                    }
                    if next.q.iter().any(|&x| x < 0) {
                        traj.diagnostics.recouple_negative += 1;
                        return Err(EngineError::InvariantViolation {
                            index: k,
                            detail: format!(
                                "negative queue after re-coupling handoff: {:?}",
                                next.q
                            ),
                        });
                    }
                    next.regime = Regime::Active;
                    state = next;
                    traj.switches.push(RegimeSwitch {
                        index: k,
                        kind: SwitchKind::Recouple,
                    });
                } else {
                    let (next, effect) =
                        step_inactive(&state, &e, reinit).map_err(|err| at_index(err, k))?;
                    if let Some((dir, r)) = effect.price_change {
                        traj.price_changes.push(PriceChange {
                            index: k,
                            dir,
                            scope: ChangeScope::Country(e.origin),
                            queues_after: r,
                        });
                    }
                    state = next;
                }
            }
        }
        traj.states.push(state);
        traj.m_counters.push(m);
    }
    Ok(traj)
}
