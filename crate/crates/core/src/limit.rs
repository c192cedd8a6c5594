//! Diffusion-limit simulation.
//!
//! In the scaling limit the net order flow is a four-dimensional linear
//! Brownian motion; queues, capacity, and prices follow by applying the
//! regulated path maps of [`crate::path_maps`] to sampled Brownian paths.
//! The regime-switching limit alternates coupled and decoupled stretches:
//! decoupling happens when the capacity functional crosses a bound, and the
//! books re-couple at the price change that closes the bid-price gap.
//!
//! Hitting detection is on the sampling grid (no bridge correction); the
//! discretization bias shrinks with `grid_dt` and is covered by the grid
//! refinement checks in the test suite.

use nalgebra::Matrix4;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Regime, ASK_F, ASK_G, BID_F, BID_G};
use crate::order_flow::{Country, GridPath, Interp};
use crate::path_maps::{active_decompose, inactive_decompose, MapError, MapOptions, PairReflector};
use crate::reinit::{PriceDir, ReinitEngine};
use crate::rng::{rng_for, Purpose};

/// Parameters of the limiting queue input: start, drift, covariance, grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BmSpec {
    pub x0: [f64; 4],
    pub mu: [f64; 4],
    pub sigma: [[f64; 4]; 4],
    pub grid_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitError {
    #[error("covariance matrix is not positive semidefinite (eigenvalue {0})")]
    CovarianceNotPsd(f64),
    #[error("invalid start state: {0}")]
    InvalidStart(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

impl BmSpec {
    pub fn new(x0: [f64; 4], mu: [f64; 4], sigma: [[f64; 4]; 4], grid_dt: f64) -> Self {
        Self {
            x0,
            mu,
            sigma,
            grid_dt,
        }
    }

    /// Symmetric square root of the covariance matrix.
    pub fn sigma_sqrt(&self) -> Result<[[f64; 4]; 4], LimitError> {
        let m = Matrix4::from_fn(|i, j| self.sigma[i][j]);
        if (m - m.transpose()).abs().max() > 1e-12 {
            return Err(LimitError::CovarianceNotPsd(f64::NAN));
        }
        let eig = m.symmetric_eigen();
        let mut vals = eig.eigenvalues;
        for v in vals.iter_mut() {
            if *v < -1e-10 {
                return Err(LimitError::CovarianceNotPsd(*v));
            }
            *v = v.max(0.0).sqrt();
        }
        let root = eig.eigenvectors * Matrix4::from_diagonal(&vals) * eig.eigenvectors.transpose();
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = root[(i, j)];
            }
        }
        Ok(out)
    }
}

/// Per-step Gaussian increment generator for one Brownian path.
struct IncrementSampler {
    drift: [f64; 4],
    diffusion: [[f64; 4]; 4],
    rng: ChaCha8Rng,
}

impl IncrementSampler {
    fn new(spec: &BmSpec, rng: ChaCha8Rng) -> Result<Self, LimitError> {
        let root = spec.sigma_sqrt()?;
        let s = spec.grid_dt.sqrt();
        let mut diffusion = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                diffusion[i][j] = root[i][j] * s;
            }
        }
        Ok(Self {
            drift: spec.mu.map(|m| m * spec.grid_dt),
            diffusion,
            rng,
        })
    }

    /// Swap in new coefficients (regime-dependent flow) without touching the
    /// underlying random stream.
    fn retarget(&mut self, spec: &BmSpec) -> Result<(), LimitError> {
        let root = spec.sigma_sqrt()?;
        let s = spec.grid_dt.sqrt();
        for i in 0..4 {
            for j in 0..4 {
                self.diffusion[i][j] = root[i][j] * s;
            }
        }
        self.drift = spec.mu.map(|m| m * spec.grid_dt);
        Ok(())
    }

    fn next(&mut self) -> [f64; 4] {
        let z: [f64; 4] = [
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
        ];
        let mut d = self.drift;
        for i in 0..4 {
            let row = &self.diffusion[i];
            d[i] += row[0] * z[0] + row[1] * z[1] + row[2] * z[2] + row[3] * z[3];
        }
        d
    }
}

/// Sample a linear Brownian path on the grid.
pub fn sample_bm_path(seed: u64, spec: &BmSpec, horizon: f64) -> Result<GridPath<f64, 4>, LimitError> {
    sample_bm_path_for_replication(seed, 0, spec, horizon)
}

pub fn sample_bm_path_for_replication(
    seed: u64,
    replication: u64,
    spec: &BmSpec,
    horizon: f64,
) -> Result<GridPath<f64, 4>, LimitError> {
    let steps = (horizon / spec.grid_dt).round() as usize;
    let mut sampler =
        IncrementSampler::new(spec, rng_for(seed, Purpose::BrownianPath, replication))?;
    let mut values = Vec::with_capacity(steps + 1);
    let mut cur = spec.x0;
    values.push(cur);
    for _ in 0..steps {
        let d = sampler.next();
        for i in 0..4 {
            cur[i] += d[i];
        }
        values.push(cur);
    }
    Ok(GridPath {
        dt: spec.grid_dt,
        values,
        interp: Interp::GridSamples,
    })
}

/// State of the limit dynamics (prices in ticks, volumes in volume units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitState {
    pub bid_ticks: [i64; 2],
    pub q: [f64; 4],
    pub cap: f64,
    pub regime: Regime,
}

impl LimitState {
    pub fn new_active(q: [f64; 4]) -> Self {
        Self {
            bid_ticks: [0, 0],
            q,
            cap: 0.0,
            regime: Regime::Active,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitChangeScope {
    Shared,
    Country(Country),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPriceChange {
    pub index: usize,
    pub time: f64,
    pub dir: PriceDir,
    pub scope: LimitChangeScope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSwitch {
    pub index: usize,
    pub time: f64,
    /// +1 / -1 price adjustment per country at a decoupling, `None` for a
    /// re-coupling.
    pub z: Option<[i8; 2]>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LimitDiagnostics {
    /// Price change and capacity-bound crossing at the same grid index;
    /// resolved in favor of the regime switch.
    pub switch_change_tie: u32,
    /// Both sides (or both countries) hit at one grid index.
    pub simultaneous_hits: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitTrajectory {
    pub grid_dt: f64,
    pub tick: f64,
    pub queues: Vec<[f64; 4]>,
    pub capacity: Vec<f64>,
    pub bid_ticks: Vec<[i64; 2]>,
    pub regime: Vec<Regime>,
    pub changes: Vec<LimitPriceChange>,
    pub switches: Vec<LimitSwitch>,
    pub diagnostics: LimitDiagnostics,
}

impl LimitTrajectory {
    pub fn decouple_count(&self) -> usize {
        self.switches.iter().filter(|s| s.z.is_some()).count()
    }

    pub fn first_change_time(&self) -> Option<f64> {
        self.changes.first().map(|c| c.time)
    }
}

fn check_positive_queues(q: &[f64; 4]) -> Result<(), LimitError> {
    if q.iter().any(|&x| !(x > 0.0)) {
        return Err(LimitError::InvalidStart(format!(
            "queues must start strictly positive, got {q:?}"
        )));
    }
    Ok(())
}

/// Coupled limit dynamics over `[0, horizon]`: sample one Brownian path and
/// regulate it with the coupled-book map.
pub fn simulate_active_limit(
    s0: LimitState,
    seed: u64,
    replication: u64,
    spec: &BmSpec,
    reinit: &mut ReinitEngine,
    horizon: f64,
    tick: f64,
) -> Result<LimitTrajectory, LimitError> {
    check_positive_queues(&s0.q)?;
    let mut spec = spec.clone();
    spec.x0 = s0.q;
    let path = sample_bm_path_for_replication(seed, replication, &spec, horizon)?;
    let out = active_decompose(&path, reinit, MapOptions::default())?;
    let n = path.len();
    let mut traj = LimitTrajectory {
        grid_dt: spec.grid_dt,
        tick,
        queues: out.queues.values,
        capacity: out.capacity.values.iter().map(|v| s0.cap + v[0]).collect(),
        bid_ticks: out
            .price_ticks
            .iter()
            .map(|&t| [s0.bid_ticks[0] + t, s0.bid_ticks[1] + t])
            .collect(),
        regime: vec![Regime::Active; n],
        changes: Vec::new(),
        switches: Vec::new(),
        diagnostics: LimitDiagnostics::default(),
    };
    for c in &out.changes {
        if c.tie {
            traj.diagnostics.simultaneous_hits += 1;
        }
        traj.changes.push(LimitPriceChange {
            index: c.index,
            time: c.index as f64 * spec.grid_dt,
            dir: c.dir,
            scope: LimitChangeScope::Shared,
        });
    }
    Ok(traj)
}

/// Decoupled limit dynamics over `[0, horizon]`.
pub fn simulate_inactive_limit(
    s0: LimitState,
    seed: u64,
    replication: u64,
    spec: &BmSpec,
    reinit: &mut ReinitEngine,
    horizon: f64,
    tick: f64,
) -> Result<LimitTrajectory, LimitError> {
    check_positive_queues(&s0.q)?;
    let mut spec = spec.clone();
    spec.x0 = s0.q;
    let path = sample_bm_path_for_replication(seed, replication, &spec, horizon)?;
    let out = inactive_decompose(&path, reinit, MapOptions::default())?;
    let n = path.len();
    let mut traj = LimitTrajectory {
        grid_dt: spec.grid_dt,
        tick,
        queues: out.queues.values,
        capacity: vec![s0.cap; n],
        bid_ticks: out
            .price_ticks
            .iter()
            .map(|t| [s0.bid_ticks[0] + t[0], s0.bid_ticks[1] + t[1]])
            .collect(),
        regime: vec![Regime::Inactive; n],
        changes: Vec::new(),
        switches: Vec::new(),
        diagnostics: LimitDiagnostics::default(),
    };
    let mut seen = std::collections::HashSet::new();
    for c in &out.changes {
        if !seen.insert(c.index) {
            traj.diagnostics.simultaneous_hits += 1;
        }
        traj.changes.push(LimitPriceChange {
            index: c.index,
            time: c.index as f64 * spec.grid_dt,
            dir: c.dir,
            scope: LimitChangeScope::Country(c.country),
        });
    }
    Ok(traj)
}

/// Regime-switching limit dynamics: coupled stretches until the capacity
/// functional crosses `[-kappa_minus, kappa_plus]`, decoupled stretches until
/// the bid prices coincide again.
#[allow(clippy::too_many_arguments)]
pub fn simulate_regime_switching_limit(
    s0: LimitState,
    seed: u64,
    replication: u64,
    spec: &BmSpec,
    inactive_spec: Option<&BmSpec>,
    reinit: &mut ReinitEngine,
    kappa: (f64, f64),
    horizon: f64,
    tick: f64,
) -> Result<LimitTrajectory, LimitError> {
    check_positive_queues(&s0.q)?;
    let (kappa_minus, kappa_plus) = kappa;
    if s0.cap < -kappa_minus || s0.cap > kappa_plus {
        return Err(LimitError::InvalidStart(format!(
            "capacity {} outside [{}, {}]",
            s0.cap, -kappa_minus, kappa_plus
        )));
    }
    let steps = (horizon / spec.grid_dt).round() as usize;
    let mut sampler =
        IncrementSampler::new(spec, rng_for(seed, Purpose::BrownianPath, replication))?;

    let mut traj = LimitTrajectory {
        grid_dt: spec.grid_dt,
        tick,
        queues: Vec::with_capacity(steps + 1),
        capacity: Vec::with_capacity(steps + 1),
        bid_ticks: Vec::with_capacity(steps + 1),
        regime: Vec::with_capacity(steps + 1),
        changes: Vec::new(),
        switches: Vec::new(),
        diagnostics: LimitDiagnostics::default(),
    };

    let mut state = s0;
    let mut bid = PairReflector::new([state.q[BID_F], state.q[BID_G]]).0;
    let mut ask = PairReflector::new([state.q[ASK_F], state.q[ASK_G]]).0;

    let push = |traj: &mut LimitTrajectory, s: &LimitState| {
        traj.queues.push(s.q);
        traj.capacity.push(s.cap);
        traj.bid_ticks.push(s.bid_ticks);
        traj.regime.push(s.regime);
    };
    push(&mut traj, &state);

    for k in 1..=steps {
        let time = k as f64 * spec.grid_dt;
        let d = sampler.next();
        match state.regime {
            Regime::Active => {
                let binfo = bid.step([d[BID_F], d[BID_G]]);
                let ainfo = ask.step([d[ASK_F], d[ASK_G]]);
                let cap_delta = binfo.dl[1] - binfo.dl[0] - ainfo.dl[1] + ainfo.dl[0];
                let new_cap = state.cap + cap_delta;
                if new_cap > kappa_plus || new_cap < -kappa_minus {
                    // Decoupling. The step is discarded (the machines are
                    // rebuilt at the next re-coupling); the adjustment acts
                    // on the state before it.
                    if binfo.absorbed_now || ainfo.absorbed_now {
                        traj.diagnostics.switch_change_tie += 1;
                    }
                    let up_break = new_cap > kappa_plus;
                    // Identify the component whose regulator pushed the
                    // capacity over: imports (aF, bG) push up, exports
                    // (bF, aG) push down.
                    let contrib: [(usize, f64); 2] = if up_break {
                        [(ASK_F, ainfo.dl[0]), (BID_G, binfo.dl[1])]
                    } else {
                        [(BID_F, binfo.dl[0]), (ASK_G, ainfo.dl[1])]
                    };
                    if contrib[0].1 > 0.0 && contrib[1].1 > 0.0 {
                        traj.diagnostics.simultaneous_hits += 1;
                    }
                    let component = if contrib[0].1 >= contrib[1].1 {
                        contrib[0].0
                    } else {
                        contrib[1].0
                    };
                    let country_idx = (component >= 2) as usize;
                    let dir = if component % 2 == 1 {
                        PriceDir::Up
                    } else {
                        PriceDir::Down
                    };
                    let pre = state.q;
                    let r = reinit.draw_value(dir, &pre);
                    let (b, a) = if country_idx == 0 {
                        (BID_F, ASK_F)
                    } else {
                        (BID_G, ASK_G)
                    };
                    let mut z = [0i8; 2];
                    z[country_idx] = if matches!(dir, PriceDir::Up) { 1 } else { -1 };
                    state.q[b] = r[b];
                    state.q[a] = r[a];
                    state.bid_ticks[country_idx] += z[country_idx] as i64;
                    state.cap = if up_break { kappa_plus } else { -kappa_minus };
                    state.regime = Regime::Inactive;
                    traj.changes.push(LimitPriceChange {
                        index: k,
                        time,
                        dir,
                        scope: LimitChangeScope::Country(if country_idx == 0 {
                            Country::F
                        } else {
                            Country::G
                        }),
                    });
                    traj.switches.push(LimitSwitch {
                        index: k,
                        time,
                        z: Some(z),
                    });
                    if let Some(sp) = inactive_spec {
                        sampler.retarget(sp)?;
                    }
                } else {
                    state.cap = new_cap;
                    let bid_hit = binfo.absorbed_now;
                    let ask_hit = ainfo.absorbed_now;
                    if bid_hit || ask_hit {
                        if bid_hit && ask_hit {
                            traj.diagnostics.simultaneous_hits += 1;
                        }
                        let dir = if ask_hit { PriceDir::Up } else { PriceDir::Down };
                        let pre = traj.queues[k - 1];
                        let r = reinit.draw_value(dir, &pre);
                        let step = if bid_hit && ask_hit {
                            0
                        } else if ask_hit {
                            1
                        } else {
                            -1
                        };
                        state.bid_ticks[0] += step;
                        state.bid_ticks[1] += step;
                        state.q = r;
                        bid = PairReflector::new([r[BID_F], r[BID_G]]).0;
                        ask = PairReflector::new([r[ASK_F], r[ASK_G]]).0;
                        traj.changes.push(LimitPriceChange {
                            index: k,
                            time,
                            dir,
                            scope: LimitChangeScope::Shared,
                        });
                    } else {
                        let bv = bid.value();
                        let av = ask.value();
                        state.q = {
                            let mut q = [0.0; 4];
                            q[BID_F] = bv[0];
                            q[BID_G] = bv[1];
                            q[ASK_F] = av[0];
                            q[ASK_G] = av[1];
                            q
                        };
                    }
                }
            }
            Regime::Inactive => {
                for i in 0..4 {
                    state.q[i] += d[i];
                }
                let mut hits: Vec<usize> =
                    (0..4).filter(|&i| state.q[i] <= 0.0).collect();
                if hits.len() > 1 {
                    traj.diagnostics.simultaneous_hits += 1;
                }
                // Ask precedence within a country mirrors the decoupled map.
                hits.sort_by_key(|&i| (i / 2, usize::MAX - i));
                let mut done = [false; 2];
                let pre = traj.queues[k - 1];
                for &i in &hits {
                    let cidx = i / 2;
                    if done[cidx] {
                        continue;
                    }
                    done[cidx] = true;
                    let dir = if i % 2 == 1 { PriceDir::Up } else { PriceDir::Down };
                    let r = reinit.draw_value(dir, &pre);
                    let (b, a) = if cidx == 0 { (BID_F, ASK_F) } else { (BID_G, ASK_G) };
                    state.q[b] = r[b];
                    state.q[a] = r[a];
                    state.bid_ticks[cidx] += if matches!(dir, PriceDir::Up) { 1 } else { -1 };
                    traj.changes.push(LimitPriceChange {
                        index: k,
                        time,
                        dir,
                        scope: LimitChangeScope::Country(if cidx == 0 {
                            Country::F
                        } else {
                            Country::G
                        }),
                    });
                }
                if state.bid_ticks[0] == state.bid_ticks[1] {
                    // Prices coincide again: re-couple at this very index.
                    state.regime = Regime::Active;
                    bid = PairReflector::new([state.q[BID_F], state.q[BID_G]]).0;
                    ask = PairReflector::new([state.q[ASK_F], state.q[ASK_G]]).0;
                    traj.switches.push(LimitSwitch {
                        index: k,
                        time,
                        z: None,
                    });
                    if inactive_spec.is_some() {
                        sampler.retarget(spec)?;
                    }
                }
            }
        }
        push(&mut traj, &state);
    }
    Ok(traj)
}

/// Result of one streaming first-passage sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstChange {
    /// Grid index of the first price change, if within the horizon.
    pub hit_index: Option<usize>,
    /// First change was a price increase (ask-side depletion).
    pub upward: bool,
}

/// Monte Carlo of the first price change of the coupled limit dynamics:
/// stream each path through the pair reflections and stop at the first
/// absorption. Parallel over replications with derived streams.
pub fn mc_first_changes(
    seed: u64,
    spec: &BmSpec,
    horizon: f64,
    reps: usize,
) -> Result<Vec<FirstChange>, LimitError> {
    // Validate once up front so worker errors cannot differ.
    spec.sigma_sqrt()?;
    let steps = (horizon / spec.grid_dt).round() as usize;
    let out: Vec<FirstChange> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let rng = rng_for(seed, Purpose::BrownianPath, rep);
            let mut sampler = IncrementSampler::new(spec, rng).expect("validated above");
            let mut bid = PairReflector::new([spec.x0[BID_F], spec.x0[BID_G]]).0;
            let mut ask = PairReflector::new([spec.x0[ASK_F], spec.x0[ASK_G]]).0;
            for k in 1..=steps {
                let d = sampler.next();
                let binfo = bid.step([d[BID_F], d[BID_G]]);
                let ainfo = ask.step([d[ASK_F], d[ASK_G]]);
                if binfo.absorbed_now || ainfo.absorbed_now {
                    return FirstChange {
                        hit_index: Some(k),
                        upward: ainfo.absorbed_now,
                    };
                }
            }
            FirstChange {
                hit_index: None,
                upward: false,
            }
        })
        .collect();
    Ok(out)
}

/// Monte Carlo of the price-change count and bid price range of the coupled
/// limit dynamics over `[0, horizon]`.
pub fn mc_count_and_range(
    seed: u64,
    spec: &BmSpec,
    reinit: &crate::reinit::ReinitSpec,
    horizon: f64,
    reps: usize,
    draw_start: bool,
) -> Result<Vec<(usize, i64)>, LimitError> {
    spec.sigma_sqrt()?;
    let steps = (horizon / spec.grid_dt).round() as usize;
    let out: Vec<(usize, i64)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let rng = rng_for(seed, Purpose::BrownianPath, rep);
            let mut sampler = IncrementSampler::new(spec, rng).expect("validated above");
            let mut re = ReinitEngine::new(reinit.clone(), 1.0, seed, rep);
            // Under the i.i.d.-restart law the initial queues follow the
            // same distribution as the restarts.
            let mut q = if draw_start {
                re.draw_value(PriceDir::Up, &[0.0; 4])
            } else {
                spec.x0
            };
            let mut bid = PairReflector::new([q[BID_F], q[BID_G]]).0;
            let mut ask = PairReflector::new([q[ASK_F], q[ASK_G]]).0;
            let mut count = 0usize;
            let mut tick = 0i64;
            let (mut lo, mut hi) = (0i64, 0i64);
            for _ in 1..=steps {
                let d = sampler.next();
                let binfo = bid.step([d[BID_F], d[BID_G]]);
                let ainfo = ask.step([d[ASK_F], d[ASK_G]]);
                if binfo.absorbed_now || ainfo.absorbed_now {
                    count += 1;
                    let up = ainfo.absorbed_now;
                    tick += if binfo.absorbed_now && up {
                        0
                    } else if up {
                        1
                    } else {
                        -1
                    };
                    lo = lo.min(tick);
                    hi = hi.max(tick);
                    let dir = if up { PriceDir::Up } else { PriceDir::Down };
                    let prev = {
                        let bv = bid.value();
                        let av = ask.value();
                        [bv[0], av[0], bv[1], av[1]]
                    };
                    q = re.draw_value(dir, &prev);
                    bid = PairReflector::new([q[BID_F], q[BID_G]]).0;
                    ask = PairReflector::new([q[ASK_F], q[ASK_G]]).0;
                }
            }
            (count, hi - lo)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reinit::{ReinitDist, ReinitSpec};

    fn diag_spec(x0: [f64; 4], mu: [f64; 4], var: f64, grid_dt: f64) -> BmSpec {
        let mut sigma = [[0.0; 4]; 4];
        for i in 0..4 {
            sigma[i][i] = var;
        }
        BmSpec::new(x0, mu, sigma, grid_dt)
    }

    fn unit_reinit(dv: f64) -> ReinitEngine {
        ReinitEngine::new(
            ReinitSpec {
                plus: ReinitDist::PointMass { value: [1.0; 4] },
                minus: ReinitDist::PointMass { value: [1.0; 4] },
                ..ReinitSpec::default()
            },
            dv,
            99,
            0,
        )
    }

    #[test]
    fn zero_noise_zero_drift_is_constant() {
        let spec = diag_spec([1.0, 2.0, 3.0, 4.0], [0.0; 4], 0.0, 0.01);
        let path = sample_bm_path(1, &spec, 1.0).unwrap();
        assert!(path.values.iter().all(|v| *v == [1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn drift_only_is_a_line() {
        let spec = diag_spec([1.0; 4], [0.5, -0.25, 0.0, 1.0], 0.0, 0.125);
        let path = sample_bm_path(1, &spec, 1.0).unwrap();
        for (k, v) in path.values.iter().enumerate() {
            let t = k as f64 * 0.125;
            let want = [1.0 + 0.5 * t, 1.0 - 0.25 * t, 1.0, 1.0 + t];
            for i in 0..4 {
                assert!((v[i] - want[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn terminal_covariance_matches_identity_spec() {
        // 10^5 replications, coarse grid: empirical covariance of X(T) with
        // Sigma = I must be T*I within 4 standard errors.
        let spec = diag_spec([0.0; 4], [0.0; 4], 1.0, 0.1);
        let reps = 100_000u64;
        let horizon = 1.0;
        let sums: Vec<(f64, f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let p = sample_bm_path_for_replication(5, rep, &spec, horizon).unwrap();
                let v = p.values.last().unwrap();
                (v[0], v[0] * v[0], v[0] * v[1])
            })
            .collect();
        let n = reps as f64;
        let mean = sums.iter().map(|s| s.0).sum::<f64>() / n;
        let var = sums.iter().map(|s| s.1).sum::<f64>() / n - mean * mean;
        let cross = sums.iter().map(|s| s.2).sum::<f64>() / n;
        // SE of the sample variance of N(0, T): sqrt(2 T^2 / n).
        assert!((var - 1.0).abs() < 4.0 * (2.0f64 / n).sqrt(), "var {var}");
        assert!(cross.abs() < 4.0 * (1.0f64 / n).sqrt(), "cross {cross}");
        assert!(mean.abs() < 4.0 * (1.0f64 / n).sqrt());
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let mut sigma = [[0.0; 4]; 4];
        sigma[0][0] = 1.0;
        sigma[1][1] = 1.0;
        sigma[0][1] = 2.0;
        sigma[1][0] = 2.0;
        let spec = BmSpec::new([1.0; 4], [0.0; 4], sigma, 0.01);
        assert!(matches!(
            sample_bm_path(0, &spec, 1.0),
            Err(LimitError::CovarianceNotPsd(_))
        ));
    }

    /// Deterministic straight-line input: only the bid-F component falls, so
    /// the first price change is a downward move at a hand-computable time.
    #[test]
    fn deterministic_drift_reflects_and_changes_price_once() {
        let grid_dt = 1e-3;
        // bidF falls at rate 2 from 0.5: hits 0 at t=0.25, then the regulator
        // drains bidG (starting 0.4) until the bid side is depleted at
        // t = 0.45.
        let spec = BmSpec::new(
            [0.5, 1.0, 0.4, 1.0],
            [-2.0, 0.0, 0.0, 0.0],
            [[0.0; 4]; 4],
            grid_dt,
        );
        let mut re = unit_reinit(1.0);
        let s0 = LimitState::new_active(spec.x0);
        let traj = simulate_active_limit(s0, 3, 0, &spec, &mut re, 1.0, 0.1).unwrap();
        assert_eq!(traj.changes.len(), 1);
        let c = traj.changes[0];
        assert_eq!(c.dir, PriceDir::Down);
        assert!((c.time - 0.45).abs() < 1.5 * grid_dt, "time {}", c.time);
        assert_eq!(traj.bid_ticks.last().unwrap(), &[-1, -1]);
        // After the restart at (1,1,1,1) the same drift needs 1.0 more time
        // units to deplete bidF alone; the horizon ends first.
        let q = traj.queues.last().unwrap();
        assert!((q[BID_F] - (1.0 - 2.0 * 0.55)).abs() < 1e-9 || q[BID_F] == 0.0);
    }

    #[test]
    fn symmetric_spec_first_move_is_fair() {
        let spec = diag_spec([1.0; 4], [0.0; 4], 0.25, 1e-3);
        let reps = 10_000;
        let out = mc_first_changes(11, &spec, 4.0, reps).unwrap();
        // Driftless quadrant exits are slow; condition on the paths that hit
        // (up/down stays symmetric under conditioning).
        let hits: Vec<_> = out.iter().filter(|c| c.hit_index.is_some()).collect();
        assert!(hits.len() > 2000, "only {} hits", hits.len());
        let up = hits.iter().filter(|c| c.upward).count() as f64 / hits.len() as f64;
        let se = (0.25 / hits.len() as f64).sqrt();
        assert!((up - 0.5).abs() < 4.0 * se, "upward fraction {up}");
    }

    #[test]
    fn unbounded_capacity_matches_active_limit() {
        let spec = diag_spec([1.0; 4], [-0.4; 4], 0.25, 1e-3);
        let mut re1 = unit_reinit(1.0);
        let s0 = LimitState::new_active(spec.x0);
        let a = simulate_active_limit(s0, 21, 0, &spec, &mut re1, 1.0, 0.1).unwrap();
        let mut re2 = unit_reinit(1.0);
        let b = simulate_regime_switching_limit(
            s0,
            21,
            0,
            &spec,
            None,
            &mut re2,
            (f64::INFINITY, f64::INFINITY),
            1.0,
            0.1,
        )
        .unwrap();
        assert_eq!(a.queues.len(), b.queues.len());
        for k in 0..a.queues.len() {
            for i in 0..4 {
                assert!(
                    (a.queues[k][i] - b.queues[k][i]).abs() < 1e-12,
                    "queue {i} at {k}"
                );
            }
            assert!((a.capacity[k] - b.capacity[k]).abs() < 1e-12);
            assert_eq!(a.bid_ticks[k], b.bid_ticks[k]);
        }
        assert_eq!(b.decouple_count(), 0);
    }

    #[test]
    fn inactive_limit_without_hits_keeps_prices_constant() {
        let spec = diag_spec([5.0; 4], [0.0; 4], 1e-6, 1e-3);
        let mut re = unit_reinit(1.0);
        let s0 = LimitState::new_active(spec.x0);
        let t = simulate_inactive_limit(s0, 5, 0, &spec, &mut re, 1.0, 0.1).unwrap();
        assert!(t.changes.is_empty());
        assert!(t.bid_ticks.iter().all(|b| *b == [0, 0]));
    }

    #[test]
    fn inactive_limit_forced_single_component_hit_moves_one_price() {
        // Only the bid-F component falls; the first change is F moving down.
        let spec = BmSpec::new(
            [0.4, 5.0, 5.0, 5.0],
            [-2.0, 0.0, 0.0, 0.0],
            [[0.0; 4]; 4],
            1e-3,
        );
        let mut re = unit_reinit(1.0);
        let s0 = LimitState::new_active(spec.x0);
        let t = simulate_inactive_limit(s0, 5, 0, &spec, &mut re, 1.0, 0.1).unwrap();
        assert!(!t.changes.is_empty());
        assert!(t
            .changes
            .iter()
            .all(|c| matches!(c.scope, LimitChangeScope::Country(Country::F))
                && c.dir == PriceDir::Down));
        assert!(t.bid_ticks.iter().all(|b| b[1] == 0));
        assert!((t.changes[0].time - 0.2).abs() < 2e-3);
    }

    /// Strong one-directional flow with a tiny capacity bound decouples the
    /// books almost surely.
    #[test]
    fn tiny_capacity_switches_with_high_probability() {
        let spec = BmSpec::new(
            [0.4, 1.0, 1.0, 1.0],
            [-1.5, 0.0, 0.0, 0.0],
            {
                let mut s = [[0.0; 4]; 4];
                for i in 0..4 {
                    s[i][i] = 0.25;
                }
                s
            },
            1e-3,
        );
        let reps = 1_000u64;
        let switched: usize = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut re = ReinitEngine::new(
                    ReinitSpec {
                        plus: ReinitDist::UniformBox {
                            lo: [0.8; 4],
                            hi: [1.5; 4],
                        },
                        minus: ReinitDist::UniformBox {
                            lo: [0.8; 4],
                            hi: [1.5; 4],
                        },
                        ..ReinitSpec::default()
                    },
                    1.0,
                    31,
                    rep,
                );
                let s0 = LimitState::new_active(spec.x0);
                let t = simulate_regime_switching_limit(
                    s0,
                    31,
                    rep,
                    &spec,
                    None,
                    &mut re,
                    (0.05, 0.05),
                    2.0,
                    0.1,
                )
                .unwrap();
                (t.decouple_count() > 0) as usize
            })
            .sum();
        let freq = switched as f64 / reps as f64;
        assert!(freq >= 0.99, "switch frequency {freq}");
    }

    /// Capacity stays inside the bounds and is frozen on decoupled
    /// stretches; decoupled price jumps never hit both countries at one
    /// index (up to the logged null-event diagnostics).
    #[test]
    fn switching_invariants_hold_pathwise() {
        let spec = diag_spec([0.6, 0.8, 0.7, 0.9], [-0.8, -0.3, -0.5, -0.4], 0.3, 1e-3);
        for rep in 0..20 {
            let mut re = ReinitEngine::new(
                ReinitSpec {
                    plus: ReinitDist::UniformBox {
                        lo: [0.5; 4],
                        hi: [1.2; 4],
                    },
                    minus: ReinitDist::UniformBox {
                        lo: [0.5; 4],
                        hi: [1.2; 4],
                    },
                    ..ReinitSpec::default()
                },
                1.0,
                37,
                rep,
            );
            let s0 = LimitState::new_active(spec.x0);
            let t = simulate_regime_switching_limit(
                s0,
                37,
                rep,
                &spec,
                None,
                &mut re,
                (0.2, 0.2),
                1.0,
                0.1,
            )
            .unwrap();
            for k in 0..t.capacity.len() {
                assert!(t.capacity[k] >= -0.2 - 1e-12 && t.capacity[k] <= 0.2 + 1e-12);
                if k > 0 && t.regime[k - 1] == Regime::Inactive {
                    assert_eq!(t.capacity[k], t.capacity[k - 1]);
                }
                if t.regime[k] == Regime::Active && !t.switches.iter().any(|s| s.index == k) {
                    assert_eq!(t.bid_ticks[k][0], t.bid_ticks[k][1]);
                }
            }
            for k in 1..t.bid_ticks.len() {
                if t.regime[k - 1] == Regime::Inactive && t.regime[k] == Regime::Inactive {
                    let df = t.bid_ticks[k][0] != t.bid_ticks[k - 1][0];
                    let dg = t.bid_ticks[k][1] != t.bid_ticks[k - 1][1];
                    assert!(!(df && dg) || t.diagnostics.simultaneous_hits > 0);
                }
            }
        }
    }
}
