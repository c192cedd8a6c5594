//! Deterministic regulated-path functionals.
//!
//! The coupled (shared-book) queue dynamics between price changes are a pair
//! of componentwise reflections at zero with reflection matrix
//! `R = [[1,-1],[-1,1]]`: whenever one national queue of a side is empty, the
//! volume that would push it negative is taken from the other country's queue
//! instead, and the cumulative amounts moved this way (the *regulators*) are
//! exactly the cross-border trades of that side. The pair is absorbed at the
//! origin when the *sum* of the two queues is depleted, which is when the
//! price moves.
//!
//! [`reflect_pair`] / [`pair_regulators`] implement this one-side machinery,
//! [`reflect_sides`] / [`capacity_functional`] assemble both book sides, and
//! [`active_decompose`] / [`inactive_decompose`] add reinitialization after
//! price changes, producing the queue, capacity, and price paths.
//!
//! Everything is generic over [`PathScalar`]: on `i64` event paths the maps
//! reproduce the event engine exactly (integer arithmetic, no tolerance); on
//! `f64` grid-sampled Brownian paths they define the diffusion limit.
//!
//! Reflection stages cannot accumulate within a grid step: one index
//! resolves to at most a hit plus a role swap (or absorption), so stage
//! counts are bounded by twice the path length and only the number of
//! reinitializations needs a guard ([`MapOptions::max_price_changes`]).

use thiserror::Error;

use crate::model::{ASK_F, ASK_G, BID_F, BID_G};
use crate::num::PathScalar;
use crate::order_flow::GridPath;
use crate::reinit::{PriceDir, ReinitSource};

/// Reflection bookkeeping of one pair map run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionRecord<S> {
    /// Grid indices at which a reflection stage starts (a component hits 0).
    pub reflection_times: Vec<usize>,
    /// Cumulative per-component reflection amounts at every grid index.
    pub regulators: Vec<[S; 2]>,
    /// Index at which the pair is absorbed at the origin, if it is.
    pub absorbed_at: Option<usize>,
}

impl<S: PathScalar> ReflectionRecord<S> {
    /// Debug CSV: `k,l1,l2` per grid index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,l1,l2\n");
        for (k, l) in self.regulators.iter().enumerate() {
            out.push_str(&format!("{k},{},{}\n", l[0].to_f64(), l[1].to_f64()));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairMode {
    /// No component has hit zero yet.
    Fresh,
    /// Component `active` is reflected at zero; the other one is monitored.
    Reflecting { active: usize },
    Absorbed,
}

/// Per-index outcome of advancing a [`PairReflector`].
#[derive(Debug, Clone, Copy)]
pub struct PairStep<S> {
    /// Regulator increments of this index.
    pub dl: [S; 2],
    /// The pair was absorbed at this index.
    pub absorbed_now: bool,
    /// A new reflection stage started at this index.
    pub stage_started: bool,
}

/// Incremental evaluator of the pair reflection: feed raw increments, read
/// off the regulated value and the cumulative regulators.
#[derive(Debug, Clone)]
pub struct PairReflector<S> {
    mode: PairMode,
    g: [S; 2],
    gbar: [S; 2],
}

impl<S: PathScalar> PairReflector<S> {
    /// Start at `start` (closed positive quadrant). A zero component starts a
    /// reflection stage immediately; a componentwise nonpositive start is
    /// absorbed at index 0.
    pub fn new(start: [S; 2]) -> (Self, PairStep<S>) {
        let mut me = Self {
            mode: PairMode::Fresh,
            g: [S::ZERO; 2],
            gbar: [S::ZERO; 2],
        };
        let info = me.enter(start);
        (me, info)
    }

    pub fn value(&self) -> [S; 2] {
        self.g
    }

    pub fn regulators(&self) -> [S; 2] {
        self.gbar
    }

    pub fn is_absorbed(&self) -> bool {
        self.mode == PairMode::Absorbed
    }

    /// Classify a raw target value `v` from the Fresh state.
    fn enter(&mut self, v: [S; 2]) -> PairStep<S> {
        let mut info = PairStep {
            dl: [S::ZERO; 2],
            absorbed_now: false,
            stage_started: false,
        };
        let hit0 = v[0] <= S::ZERO;
        let hit1 = v[1] <= S::ZERO;
        match (hit0, hit1) {
            (false, false) => {
                self.g = v;
            }
            (true, true) => {
                info.dl = [(-v[0]).pos(), (-v[1]).pos()];
                self.gbar[0] += info.dl[0];
                self.gbar[1] += info.dl[1];
                self.g = [S::ZERO; 2];
                self.mode = PairMode::Absorbed;
                info.absorbed_now = true;
                info.stage_started = true;
            }
            _ => {
                let i = if hit0 { 0 } else { 1 };
                let j = 1 - i;
                let dl = (-v[i]).pos();
                self.gbar[i] += dl;
                info.dl[i] = dl;
                info.stage_started = true;
                let gj = v[j] - dl;
                if gj <= S::ZERO {
                    // The regulator push depleted the other component too:
                    // the pair is absorbed at this very index. The monitored
                    // component had no overshoot of its own (v[j] > 0).
                    self.g = [S::ZERO; 2];
                    self.mode = PairMode::Absorbed;
                    info.absorbed_now = true;
                } else {
                    self.g[i] = S::ZERO;
                    self.g[j] = gj;
                    self.mode = PairMode::Reflecting { active: i };
                }
            }
        }
        info
    }

    /// Advance one grid index by the raw increments `d`.
    pub fn step(&mut self, d: [S; 2]) -> PairStep<S> {
        match self.mode {
            PairMode::Absorbed => PairStep {
                dl: [S::ZERO; 2],
                absorbed_now: false,
                stage_started: false,
            },
            PairMode::Fresh => {
                let v = [self.g[0] + d[0], self.g[1] + d[1]];
                self.enter(v)
            }
            PairMode::Reflecting { active: i } => {
                let j = 1 - i;
                let raw_i = self.g[i] + d[i];
                let raw_j = self.g[j] + d[j];
                let dl = (-raw_i).pos();
                let gi = raw_i + dl; // = max(raw_i, 0)
                let gj = raw_j - dl;
                self.gbar[i] += dl;
                let mut info = PairStep {
                    dl: [S::ZERO; 2],
                    absorbed_now: false,
                    stage_started: false,
                };
                info.dl[i] = dl;
                if gj > S::ZERO {
                    self.g[i] = gi;
                    self.g[j] = gj;
                } else if gi <= S::ZERO {
                    // Both components nonpositive: absorption. The monitored
                    // component contributes its raw overshoot.
                    let over_j = (-raw_j).pos();
                    self.gbar[j] += over_j;
                    info.dl[j] = over_j;
                    self.g = [S::ZERO; 2];
                    self.mode = PairMode::Absorbed;
                    info.absorbed_now = true;
                } else {
                    // Roles swap: the monitored component hit zero while the
                    // reflected one is strictly positive (so dl == 0 here and
                    // raw_j == gj).
                    let lj = (-raw_j).pos();
                    self.gbar[j] += lj;
                    info.dl[j] = lj;
                    info.stage_started = true;
                    let gi_after = gi - lj;
                    if gi_after <= S::ZERO {
                        // The swap push immediately depletes the old active
                        // component (only reachable on continuous-path grids).
                        self.g = [S::ZERO; 2];
                        self.mode = PairMode::Absorbed;
                        info.absorbed_now = true;
                    } else {
                        self.g[j] = S::ZERO;
                        self.g[i] = gi_after;
                        self.mode = PairMode::Reflecting { active: j };
                    }
                }
                info
            }
        }
    }
}

/// One-dimensional Skorokhod reflection at zero: `z = w + l` with
/// `l_t = sup_{s<=t} (-w_s)^+`.
pub fn skorokhod_1d<S: PathScalar>(w: &GridPath<S, 1>) -> (GridPath<S, 1>, GridPath<S, 1>) {
    let mut z = Vec::with_capacity(w.len());
    let mut l = Vec::with_capacity(w.len());
    let mut run = S::ZERO;
    for v in &w.values {
        run = run.max_of((-v[0]).pos());
        z.push([v[0] + run]);
        l.push([run]);
    }
    (
        GridPath {
            dt: w.dt,
            values: z,
            interp: w.interp,
        },
        GridPath {
            dt: w.dt,
            values: l,
            interp: w.interp,
        },
    )
}

/// Run the pair reflection over a whole path.
pub fn reflect_pair<S: PathScalar>(
    w: &GridPath<S, 2>,
) -> (GridPath<S, 2>, ReflectionRecord<S>) {
    let mut g = Vec::with_capacity(w.len());
    let mut record = ReflectionRecord {
        reflection_times: Vec::new(),
        regulators: Vec::with_capacity(w.len()),
        absorbed_at: None,
    };
    let (mut machine, info) = PairReflector::new(w.values[0]);
    if info.stage_started {
        record.reflection_times.push(0);
    }
    if info.absorbed_now {
        record.absorbed_at = Some(0);
    }
    g.push(machine.value());
    record.regulators.push(machine.regulators());
    for k in 1..w.len() {
        let d = [
            w.values[k][0] - w.values[k - 1][0],
            w.values[k][1] - w.values[k - 1][1],
        ];
        let info = machine.step(d);
        if info.stage_started {
            record.reflection_times.push(k);
        }
        if info.absorbed_now && record.absorbed_at.is_none() {
            record.absorbed_at = Some(k);
        }
        g.push(machine.value());
        record.regulators.push(machine.regulators());
    }
    (
        GridPath {
            dt: w.dt,
            values: g,
            interp: w.interp,
        },
        record,
    )
}

/// Cumulative reflection amounts of [`reflect_pair`], frozen at absorption.
pub fn pair_regulators<S: PathScalar>(w: &GridPath<S, 2>) -> GridPath<S, 2> {
    let (_, record) = reflect_pair(w);
    GridPath {
        dt: w.dt,
        values: record.regulators,
        interp: w.interp,
    }
}

fn bid_pair<S: PathScalar>(v: &[S; 4]) -> [S; 2] {
    [v[BID_F], v[BID_G]]
}

fn ask_pair<S: PathScalar>(v: &[S; 4]) -> [S; 2] {
    [v[ASK_F], v[ASK_G]]
}

/// Apply the pair reflection to the bid components (1,3) and ask components
/// (2,4) of a four-dimensional path.
pub fn reflect_sides<S: PathScalar>(q: &GridPath<S, 4>) -> GridPath<S, 4> {
    let bid: Vec<[S; 2]> = q.values.iter().map(bid_pair).collect();
    let ask: Vec<[S; 2]> = q.values.iter().map(ask_pair).collect();
    let (gb, _) = reflect_pair(&GridPath {
        dt: q.dt,
        values: bid,
        interp: q.interp,
    });
    let (ga, _) = reflect_pair(&GridPath {
        dt: q.dt,
        values: ask,
        interp: q.interp,
    });
    let values = gb
        .values
        .iter()
        .zip(&ga.values)
        .map(|(b, a)| {
            let mut v = [S::ZERO; 4];
            v[BID_F] = b[0];
            v[BID_G] = b[1];
            v[ASK_F] = a[0];
            v[ASK_G] = a[1];
            v
        })
        .collect();
    GridPath {
        dt: q.dt,
        values,
        interp: q.interp,
    }
}

/// Net cross-border volume functional: signed combination of the per-side
/// regulators. Positive contributions are imports to F (types `(b,G)` and
/// `(a,F)`), negative ones exports from F.
pub fn capacity_functional<S: PathScalar>(q: &GridPath<S, 4>) -> GridPath<S, 1> {
    let bid: Vec<[S; 2]> = q.values.iter().map(bid_pair).collect();
    let ask: Vec<[S; 2]> = q.values.iter().map(ask_pair).collect();
    let rb = pair_regulators(&GridPath {
        dt: q.dt,
        values: bid,
        interp: q.interp,
    });
    let ra = pair_regulators(&GridPath {
        dt: q.dt,
        values: ask,
        interp: q.interp,
    });
    let values = rb
        .values
        .iter()
        .zip(&ra.values)
        .map(|(b, a)| [b[1] - b[0] - a[1] + a[0]])
        .collect();
    GridPath {
        dt: q.dt,
        values,
        interp: q.interp,
    }
}

/// First grid times at which the cumulative bid / ask components of `q`
/// become nonpositive (capped at the end of the path).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingTimes {
    pub bid_index: Option<usize>,
    pub ask_index: Option<usize>,
    pub tau_b: f64,
    pub tau_a: f64,
    pub tau: f64,
}

pub fn side_hitting_times<S: PathScalar>(q: &GridPath<S, 4>) -> HittingTimes {
    let mut bid_index = None;
    let mut ask_index = None;
    for (k, v) in q.values.iter().enumerate() {
        if bid_index.is_none() && v[BID_F] + v[BID_G] <= S::ZERO {
            bid_index = Some(k);
        }
        if ask_index.is_none() && v[ASK_F] + v[ASK_G] <= S::ZERO {
            ask_index = Some(k);
        }
        if bid_index.is_some() && ask_index.is_some() {
            break;
        }
    }
    let horizon = (q.len().saturating_sub(1)) as f64 * q.dt;
    let time = |idx: Option<usize>| idx.map_or(horizon, |k| k as f64 * q.dt);
    let tau_b = time(bid_index);
    let tau_a = time(ask_index);
    HittingTimes {
        bid_index,
        ask_index,
        tau_b,
        tau_a,
        tau: tau_b.min(tau_a),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("more than {0} price changes; refusing to continue")]
    TooManyPriceChanges(usize),
}

/// Limits and tie-break diagnostics for the composite maps.
#[derive(Debug, Clone, Copy)]
pub struct MapOptions {
    pub max_price_changes: usize,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            max_price_changes: 1_000_000,
        }
    }
}

/// One price change produced by a composite map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPriceChange<S> {
    pub index: usize,
    pub dir: PriceDir,
    /// The queue vector right after the change.
    pub reinit: [S; 4],
    /// Both sides hit at the same grid index (possible for continuous input
    /// paths only; the queues restart from the up-move draw).
    pub tie: bool,
}

/// Full decomposition of the coupled dynamics driven by `path = q0 + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveMapOutput<S> {
    pub queues: GridPath<S, 4>,
    /// Capacity offset path (starts at zero).
    pub capacity: GridPath<S, 1>,
    /// Shared bid price offset in ticks (both countries move together).
    pub price_ticks: Vec<i64>,
    /// Cumulative per-component regulators across all segments; the capacity
    /// path is their signed combination.
    pub regulators: GridPath<S, 4>,
    pub changes: Vec<MapPriceChange<S>>,
}

/// Run the coupled-book map: between price changes the queues follow
/// [`reflect_sides`] of the restarted path, the capacity accumulates the
/// regulator combination, and whenever a side's cumulative queue is depleted
/// the queues restart from the reinitialization source and the price moves
/// one tick (up for ask-side depletion, down for bid-side).
pub fn active_decompose<S: PathScalar>(
    path: &GridPath<S, 4>,
    reinit: &mut dyn ReinitSource<S>,
    opts: MapOptions,
) -> Result<ActiveMapOutput<S>, MapError> {
    let n = path.len();
    let mut queues = Vec::with_capacity(n);
    let mut capacity = Vec::with_capacity(n);
    let mut price_ticks = Vec::with_capacity(n);
    let mut regulators = Vec::with_capacity(n);
    let mut changes = Vec::new();

    let start = path.values[0];
    let (mut bid, binfo) = PairReflector::new(bid_pair(&start));
    let (mut ask, ainfo) = PairReflector::new(ask_pair(&start));
    let mut cap = S::ZERO;
    let mut reg = [S::ZERO; 4];
    let mut ticks = 0i64;

    let absorb_step = |binfo: &PairStep<S>,
                           ainfo: &PairStep<S>,
                           cap: &mut S,
                           reg: &mut [S; 4]| {
        reg[BID_F] += binfo.dl[0];
        reg[BID_G] += binfo.dl[1];
        reg[ASK_F] += ainfo.dl[0];
        reg[ASK_G] += ainfo.dl[1];
        *cap += binfo.dl[1] - binfo.dl[0] - ainfo.dl[1] + ainfo.dl[0];
    };

    // Immediate hit at index 0 is outside the map's precondition (positive
    // start); treat defensively as a change at 0 would corrupt bookkeeping,
    // so only the regulator update applies.
    absorb_step(&binfo, &ainfo, &mut cap, &mut reg);

    let combine = |bid: &PairReflector<S>, ask: &PairReflector<S>| {
        let b = bid.value();
        let a = ask.value();
        let mut v = [S::ZERO; 4];
        v[BID_F] = b[0];
        v[BID_G] = b[1];
        v[ASK_F] = a[0];
        v[ASK_G] = a[1];
        v
    };

    queues.push(combine(&bid, &ask));
    capacity.push([cap]);
    price_ticks.push(ticks);
    regulators.push(reg);

    for k in 1..n {
        let d = [
            path.values[k][BID_F] - path.values[k - 1][BID_F],
            path.values[k][ASK_F] - path.values[k - 1][ASK_F],
            path.values[k][BID_G] - path.values[k - 1][BID_G],
            path.values[k][ASK_G] - path.values[k - 1][ASK_G],
        ];
        let binfo = bid.step([d[BID_F], d[BID_G]]);
        let ainfo = ask.step([d[ASK_F], d[ASK_G]]);
        absorb_step(&binfo, &ainfo, &mut cap, &mut reg);

        let bid_hit = binfo.absorbed_now;
        let ask_hit = ainfo.absorbed_now;
        if bid_hit || ask_hit {
            if changes.len() >= opts.max_price_changes {
                return Err(MapError::TooManyPriceChanges(opts.max_price_changes));
            }
            let tie = bid_hit && ask_hit;
            let dir = if ask_hit { PriceDir::Up } else { PriceDir::Down };
            ticks += if tie {
                0
            } else if ask_hit {
                1
            } else {
                -1
            };
            let pre = queues[k - 1];
            let r = reinit.draw(dir, &pre);
            changes.push(MapPriceChange {
                index: k,
                dir,
                reinit: r,
                tie,
            });
            let (nb, _) = PairReflector::new(bid_pair(&r));
            let (na, _) = PairReflector::new(ask_pair(&r));
            bid = nb;
            ask = na;
        }

        queues.push(combine(&bid, &ask));
        capacity.push([cap]);
        price_ticks.push(ticks);
        regulators.push(reg);
    }

    let grid = |values, _d: usize| GridPath {
        dt: path.dt,
        values,
        interp: path.interp,
    };
    Ok(ActiveMapOutput {
        queues: grid(queues, 4),
        capacity: GridPath {
            dt: path.dt,
            values: capacity,
            interp: path.interp,
        },
        price_ticks,
        regulators: grid(regulators, 4),
        changes,
    })
}

/// Queue component of the coupled map.
pub fn active_queue_map<S: PathScalar>(
    path: &GridPath<S, 4>,
    reinit: &mut dyn ReinitSource<S>,
) -> Result<GridPath<S, 4>, MapError> {
    Ok(active_decompose(path, reinit, MapOptions::default())?.queues)
}

/// Capacity component of the coupled map (offset from the starting value).
pub fn active_capacity_map<S: PathScalar>(
    path: &GridPath<S, 4>,
    reinit: &mut dyn ReinitSource<S>,
) -> Result<GridPath<S, 1>, MapError> {
    Ok(active_decompose(path, reinit, MapOptions::default())?.capacity)
}

/// Bid price component of the coupled map in price units: both countries
/// carry the same offset `(N_up - N_down) * tick`.
pub fn active_price_map<S: PathScalar>(
    path: &GridPath<S, 4>,
    reinit: &mut dyn ReinitSource<S>,
    tick: f64,
) -> Result<GridPath<f64, 2>, MapError> {
    let out = active_decompose(path, reinit, MapOptions::default())?;
    Ok(GridPath {
        dt: path.dt,
        values: out
            .price_ticks
            .iter()
            .map(|&t| [t as f64 * tick; 2])
            .collect(),
        interp: path.interp,
    })
}

/// Full decomposition of the decoupled dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct InactiveMapOutput<S> {
    pub queues: GridPath<S, 4>,
    /// Per-country price offsets in ticks.
    pub price_ticks: Vec<[i64; 2]>,
    pub changes: Vec<InactivePriceChange<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InactivePriceChange<S> {
    pub index: usize,
    pub country: crate::order_flow::Country,
    pub dir: PriceDir,
    /// New values of the two components of the reinitialized country.
    pub pair: [S; 2],
}

/// Run the decoupled-book map: each component accumulates its raw increments;
/// the first time a component becomes nonpositive, that country's price moves
/// one tick and its two components restart from the draw, while the foreign
/// components are untouched.
pub fn inactive_decompose<S: PathScalar>(
    path: &GridPath<S, 4>,
    reinit: &mut dyn ReinitSource<S>,
    opts: MapOptions,
) -> Result<InactiveMapOutput<S>, MapError> {
    use crate::order_flow::Country;
    let n = path.len();
    let mut queues = Vec::with_capacity(n);
    let mut price_ticks = Vec::with_capacity(n);
    let mut changes = Vec::new();
    let mut cur = path.values[0];
    let mut ticks = [0i64; 2];
    queues.push(cur);
    price_ticks.push(ticks);

    for k in 1..n {
        for i in 0..4 {
            cur[i] += path.values[k][i] - path.values[k - 1][i];
        }
        let hit = [
            cur[BID_F] <= S::ZERO,
            cur[ASK_F] <= S::ZERO,
            cur[BID_G] <= S::ZERO,
            cur[ASK_G] <= S::ZERO,
        ];
        if hit.iter().any(|&h| h) {
            if changes.len() >= opts.max_price_changes {
                return Err(MapError::TooManyPriceChanges(opts.max_price_changes));
            }
            let pre = queues[k - 1];
            // One draw per direction per index; simultaneous hits in both
            // countries share it, matching the shared change ordinal.
            let mut up_draw: Option<[S; 4]> = None;
            let mut down_draw: Option<[S; 4]> = None;
            for (country, bid_c, ask_c) in
                [(Country::F, BID_F, ASK_F), (Country::G, BID_G, ASK_G)]
            {
                let (bid_h, ask_h) = (hit[bid_c], hit[ask_c]);
                if !bid_h && !ask_h {
                    continue;
                }
                // Within one country an ask hit takes precedence (ties are
                // a measure-zero corner of continuous inputs).
                let dir = if ask_h { PriceDir::Up } else { PriceDir::Down };
                let draw_slot = if ask_h { &mut up_draw } else { &mut down_draw };
                let r = *draw_slot.get_or_insert_with(|| reinit.draw(dir, &pre));
                cur[bid_c] = r[bid_c];
                cur[ask_c] = r[ask_c];
                let cidx = matches!(country, Country::G) as usize;
                ticks[cidx] += if ask_h { 1 } else { -1 };
                changes.push(InactivePriceChange {
                    index: k,
                    country,
                    dir,
                    pair: [r[bid_c], r[ask_c]],
                });
            }
        }
        queues.push(cur);
        price_ticks.push(ticks);
    }

    Ok(InactiveMapOutput {
        queues: GridPath {
            dt: path.dt,
            values: queues,
            interp: path.interp,
        },
        price_ticks,
        changes,
    })
}

/// Queue component of the decoupled map.
pub fn inactive_queue_map<S: PathScalar>(
    path: &GridPath<S, 4>,
    reinit: &mut dyn ReinitSource<S>,
) -> Result<GridPath<S, 4>, MapError> {
    Ok(inactive_decompose(path, reinit, MapOptions::default())?.queues)
}

/// Per-country bid price offsets of the decoupled map, in price units.
pub fn inactive_price_map<S: PathScalar>(
    path: &GridPath<S, 4>,
    reinit: &mut dyn ReinitSource<S>,
    tick: f64,
) -> Result<GridPath<f64, 2>, MapError> {
    let out = inactive_decompose(path, reinit, MapOptions::default())?;
    Ok(GridPath {
        dt: path.dt,
        values: out
            .price_ticks
            .iter()
            .map(|t| [t[0] as f64 * tick, t[1] as f64 * tick])
            .collect(),
        interp: path.interp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order_flow::Interp;
    use crate::reinit::FixedSequences;

    fn path2(dt: f64, values: Vec<[f64; 2]>) -> GridPath<f64, 2> {
        GridPath {
            dt,
            values,
            interp: Interp::GridSamples,
        }
    }

    #[test]
    fn skorokhod_direct_example() {
        let w = GridPath {
            dt: 1.0,
            values: vec![[1.0], [0.5], [-0.5], [0.2]],
            interp: Interp::GridSamples,
        };
        let (z, l) = skorokhod_1d(&w);
        let zs: Vec<f64> = z.values.iter().map(|v| v[0]).collect();
        let ls: Vec<f64> = l.values.iter().map(|v| v[0]).collect();
        assert_eq!(zs, vec![1.0, 0.5, 0.0, 0.7]);
        assert_eq!(ls, vec![0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn skorokhod_identity_on_nonnegative_paths() {
        let w = GridPath {
            dt: 1.0,
            values: vec![[0.3], [0.1], [0.8]],
            interp: Interp::GridSamples,
        };
        let (z, l) = skorokhod_1d(&w);
        assert_eq!(z.values, w.values);
        assert!(l.values.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn skorokhod_complementarity_on_random_path() {
        use rand::Rng;
        let mut rng = crate::rng::rng_for(2, crate::rng::Purpose::Scratch, 0);
        let mut values = vec![[0.5f64]];
        for _ in 0..10_000 {
            let d: f64 = rng.gen_range(-0.1..0.1);
            values.push([values.last().unwrap()[0] + d]);
        }
        let w = GridPath {
            dt: 1e-4,
            values,
            interp: Interp::GridSamples,
        };
        let (z, l) = skorokhod_1d(&w);
        let mut run = 0f64;
        for k in 0..w.len() {
            run = run.max(-w.values[k][0]);
            assert!(z.values[k][0] >= 0.0);
            assert!((l.values[k][0] - run.max(0.0)).abs() < 1e-15);
            if k > 0 {
                let dl = l.values[k][0] - l.values[k - 1][0];
                assert!(dl >= 0.0);
                if dl > 0.0 {
                    assert_eq!(z.values[k][0], 0.0);
                }
            }
        }
    }

    #[test]
    fn pair_reflection_identity_on_positive_path() {
        let w = path2(1.0, vec![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        let (g, rec) = reflect_pair(&w);
        assert_eq!(g.values, w.values);
        assert!(rec.reflection_times.is_empty());
        assert!(rec.absorbed_at.is_none());
    }

    /// Driving path (1-2t, 1): the first component reflects at zero from
    /// t = 1/2 and the reflection amounts drain the second component until
    /// absorption at t = 1.
    #[test]
    fn pair_reflection_linear_drain() {
        let m = 8usize;
        let dt = 1.0 / m as f64;
        let values: Vec<[f64; 2]> = (0..=m)
            .map(|k| [1.0 - 2.0 * k as f64 * dt, 1.0])
            .collect();
        let (g, rec) = reflect_pair(&path2(dt, values));
        for k in 0..=m {
            let t = k as f64 * dt;
            let expect = if t < 1.0 {
                [(1.0 - 2.0 * t).max(0.0), 1.0f64.min(2.0 - 2.0 * t)]
            } else {
                [0.0, 0.0]
            };
            assert!(
                (g.values[k][0] - expect[0]).abs() < 1e-12
                    && (g.values[k][1] - expect[1]).abs() < 1e-12,
                "k={k} got {:?} want {expect:?}",
                g.values[k]
            );
        }
        assert_eq!(rec.reflection_times, vec![m / 2]);
        assert_eq!(rec.absorbed_at, Some(m));
    }

    /// Driving path (1-2t, 1+2t): never absorbed, component sum frozen at 2.
    #[test]
    fn pair_reflection_sum_preserved() {
        let m = 16usize;
        let dt = 1.0 / m as f64;
        let values: Vec<[f64; 2]> = (0..=m)
            .map(|k| {
                let t = k as f64 * dt;
                [1.0 - 2.0 * t, 1.0 + 2.0 * t]
            })
            .collect();
        let w = path2(dt, values.clone());
        let (g, rec) = reflect_pair(&w);
        assert!(rec.absorbed_at.is_none());
        let gbar = pair_regulators(&w);
        for k in 0..=m {
            let t = k as f64 * dt;
            assert!((g.values[k][0] - (1.0 - 2.0 * t).max(0.0)).abs() < 1e-12);
            let want1 = 1.0 + 2.0 * t - (2.0 * t - 1.0).max(0.0);
            assert!((g.values[k][1] - want1).abs() < 1e-12);
            assert!((g.values[k][0] + g.values[k][1] - 2.0).abs() < 1e-12);
            assert!((gbar.values[k][0] - (2.0 * t - 1.0).max(0.0)).abs() < 1e-12);
            assert_eq!(gbar.values[k][1], 0.0);
        }
    }

    #[test]
    fn regulators_vanish_on_positive_paths() {
        let w = path2(1.0, vec![[2.0, 3.0], [1.5, 2.5], [2.5, 0.5]]);
        let gbar = pair_regulators(&w);
        assert!(gbar.values.iter().all(|v| v == &[0.0, 0.0]));
    }

    /// Recomposition identity g = w + gbar R on random paths, before
    /// absorption; plus regulator monotonicity and complementarity.
    #[test]
    fn recomposition_and_complementarity_random() {
        use rand::Rng;
        let mut rng = crate::rng::rng_for(5, crate::rng::Purpose::Scratch, 1);
        for _case in 0..50 {
            let mut values = vec![[rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0)]];
            for _ in 0..2000 {
                let prev = *values.last().unwrap();
                values.push([
                    prev[0] + rng.gen_range(-0.05..0.045),
                    prev[1] + rng.gen_range(-0.05..0.045),
                ]);
            }
            let w = path2(1e-3, values);
            let (g, rec) = reflect_pair(&w);
            let end = rec.absorbed_at.unwrap_or(w.len() - 1);
            for k in 0..end {
                let l = rec.regulators[k];
                assert!(
                    (g.values[k][0] - (w.values[k][0] + l[0] - l[1])).abs() < 1e-12,
                    "component 1 at {k}"
                );
                assert!(
                    (g.values[k][1] - (w.values[k][1] + l[1] - l[0])).abs() < 1e-12,
                    "component 2 at {k}"
                );
                assert!(g.values[k][0] >= 0.0 && g.values[k][1] >= 0.0);
                if k > 0 {
                    let d0 = l[0] - rec.regulators[k - 1][0];
                    let d1 = l[1] - rec.regulators[k - 1][1];
                    assert!(d0 >= 0.0 && d1 >= 0.0);
                    if d0 > 0.0 {
                        assert_eq!(g.values[k][0], 0.0);
                    }
                    if d1 > 0.0 {
                        assert_eq!(g.values[k][1], 0.0);
                    }
                }
            }
            // Sum identity: component sum of g equals the reflected sum of
            // the raw component sum, up to absorption.
            let h: Vec<[f64; 1]> = w.values.iter().map(|v| [v[0] + v[1]]).collect();
            let (hz, _) = skorokhod_1d(&GridPath {
                dt: w.dt,
                values: h,
                interp: w.interp,
            });
            for k in 0..=end {
                let sum = g.values[k][0] + g.values[k][1];
                assert!(
                    (sum - hz.values[k][0]).abs() < 1e-12 || (k == end && sum == 0.0),
                    "sum identity at {k}: {sum} vs {}",
                    hz.values[k][0]
                );
            }
        }
    }

    #[test]
    fn hitting_times_on_positive_path_cap_at_horizon() {
        let q = GridPath {
            dt: 0.5,
            values: vec![[1.0, 1.0, 1.0, 1.0]; 5],
            interp: Interp::GridSamples,
        };
        let h = side_hitting_times(&q);
        assert_eq!(h.bid_index, None);
        assert_eq!(h.tau, 2.0);
    }

    #[test]
    fn hitting_times_direct_scan() {
        let mut values = vec![[2.0f64, 5.0, 2.0, 5.0]; 10];
        values[7] = [1.0, 5.0, -1.0, 5.0]; // bid sum hits 0 at step 7
        let q = GridPath {
            dt: 0.1,
            values,
            interp: Interp::GridSamples,
        };
        let h = side_hitting_times(&q);
        assert_eq!(h.bid_index, Some(7));
        assert_eq!(h.ask_index, None);
        assert!((h.tau - 0.7).abs() < 1e-15);
        assert_eq!(h.tau, h.tau_b);
    }

    #[test]
    fn hitting_times_match_linear_scan_on_random_path() {
        use rand::Rng;
        let mut rng = crate::rng::rng_for(8, crate::rng::Purpose::Scratch, 2);
        let mut values = vec![[1.0f64, 1.0, 1.0, 1.0]];
        for _ in 0..5000 {
            let prev = *values.last().unwrap();
            let mut next = prev;
            for x in &mut next {
                *x += rng.gen_range(-0.03..0.028);
            }
            values.push(next);
        }
        let q = GridPath {
            dt: 1e-3,
            values,
            interp: Interp::GridSamples,
        };
        let h = side_hitting_times(&q);
        let brute_bid = q
            .values
            .iter()
            .position(|v| v[BID_F] + v[BID_G] <= 0.0);
        let brute_ask = q
            .values
            .iter()
            .position(|v| v[ASK_F] + v[ASK_G] <= 0.0);
        assert_eq!(h.bid_index, brute_bid);
        assert_eq!(h.ask_index, brute_ask);
    }

    #[test]
    fn reflect_sides_positive_is_identity_and_capacity_zero() {
        let q = GridPath {
            dt: 1.0,
            values: vec![[1.0, 2.0, 3.0, 4.0], [1.5, 2.5, 2.5, 3.5]],
            interp: Interp::GridSamples,
        };
        assert_eq!(reflect_sides(&q).values, q.values);
        assert!(capacity_functional(&q)
            .values
            .iter()
            .all(|v| v[0] == 0.0));
    }

    #[test]
    fn capacity_counts_single_side_reflection() {
        // Only the bid-G component dives: its regulator feeds capacity with a
        // positive sign (imports to F).
        let m = 8usize;
        let dt = 1.0 / m as f64;
        let values: Vec<[f64; 4]> = (0..=m)
            .map(|k| {
                let t = k as f64 * dt;
                [5.0, 5.0, 1.0 - 2.0 * t, 5.0]
            })
            .collect();
        let q = GridPath {
            dt,
            values,
            interp: Interp::GridSamples,
        };
        let cap = capacity_functional(&q);
        for k in 0..=m {
            let t = k as f64 * dt;
            assert!((cap.values[k][0] - (2.0 * t - 1.0).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn active_map_without_hits_is_reflect_sides() {
        let q = GridPath {
            dt: 0.25,
            values: vec![
                [1.0, 1.0, 1.0, 1.0],
                [0.8, 1.2, 1.1, 0.9],
                [0.9, 1.4, 0.7, 1.2],
            ],
            interp: Interp::GridSamples,
        };
        let mut src = FixedSequences::<f64>::new(vec![], vec![]);
        let out = active_decompose(&q, &mut src, MapOptions::default()).unwrap();
        assert_eq!(out.queues.values, reflect_sides(&q).values);
        assert!(out.changes.is_empty());
        assert!(out.price_ticks.iter().all(|&t| t == 0));
    }

    #[test]
    fn active_capacity_agrees_with_capacity_functional_before_changes() {
        // Before the first price change the composite capacity path and the
        // standalone functional are the same signed regulator combination.
        use rand::Rng;
        let mut rng = crate::rng::rng_for(12, crate::rng::Purpose::Scratch, 0);
        let mut values = vec![[0.5f64, 2.0, 0.6, 2.0]];
        for _ in 0..800 {
            let prev = *values.last().unwrap();
            let mut next = prev;
            for x in &mut next {
                *x += rng.gen_range(-0.02..0.019);
            }
            values.push(next);
        }
        let q = GridPath {
            dt: 1e-3,
            values,
            interp: Interp::GridSamples,
        };
        let standalone = capacity_functional(&q);
        let mut src = FixedSequences::new(vec![[9.0; 4]; 8], vec![[9.0; 4]; 8]);
        let out = active_decompose(&q, &mut src, MapOptions::default()).unwrap();
        let first_change = out.changes.first().map_or(q.len(), |c| c.index);
        for k in 0..first_change {
            assert!(
                (out.capacity.values[k][0] - standalone.values[k][0]).abs() < 1e-12,
                "capacity wiring at {k}"
            );
        }
    }

    #[test]
    fn active_map_restarts_at_reinit_after_ask_hit() {
        // Ask-F dives; ask side cumulative hits zero at k=2.
        let q = GridPath {
            dt: 1.0,
            values: vec![
                [5.0, 1.0, 5.0, 1.0],
                [5.0, -0.5, 5.0, 1.0], // askF reflects, askG pays 0.5
                [5.0, -2.0, 5.0, 1.0], // askG depleted -> price up
                [5.0, -2.0, 5.0, 1.0],
            ],
            interp: Interp::GridSamples,
        };
        let mut src = FixedSequences::new(vec![[7.0, 8.0, 9.0, 10.0]], vec![]);
        let out = active_decompose(&q, &mut src, MapOptions::default()).unwrap();
        assert_eq!(out.queues.values[2], [7.0, 8.0, 9.0, 10.0]);
        assert_eq!(out.price_ticks, vec![0, 0, 1, 1]);
        assert_eq!(out.changes.len(), 1);
        assert_eq!(out.changes[0].dir, PriceDir::Up);
        // After the restart the queues follow the shifted raw path.
        assert_eq!(out.queues.values[3], [7.0, 8.0, 9.0, 10.0]);
    }
}
