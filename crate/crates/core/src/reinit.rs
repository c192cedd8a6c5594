//! Queue reinitialization after price changes.
//!
//! After the k-th price change the queues restart at `Phi(Q(tau_k-), eps_k)`
//! where `eps_k` is drawn from the up- or down-move distribution. `Phi` must
//! dominate `alpha_floor * eps` componentwise, which keeps restarts away from
//! the boundary.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::num::PathScalar;
use crate::rng::{rng_for, Purpose};

/// Direction of a price change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriceDir {
    Up,
    Down,
}

/// Distribution of the noise vector `eps` on the open positive orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReinitDist {
    /// Independent uniform on `{j dv : j = lo..=hi}` per component.
    UniformSteps { lo: i64, hi: i64 },
    /// Deterministic value in volume units (must be positive multiples of dv
    /// for the event engine).
    PointMass { value: [f64; 4] },
    /// Independent uniform on `[lo_i, hi_i]` per component (limit engine only).
    UniformBox { lo: [f64; 4], hi: [f64; 4] },
}

impl ReinitDist {
    /// The simulation-study default: uniform on `{10 dv, ..., 20 dv}`.
    pub fn study_default() -> Self {
        ReinitDist::UniformSteps { lo: 10, hi: 20 }
    }
}

/// How the new queues depend on the pre-change state `x` and the draw `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    /// `Phi(x, eps) = eps` (reinitialization independent of the old state).
    Identity,
    /// `Phi(x, eps) = eps + floor(carry * x)` in volume-grid units: a share
    /// of the standing volume is pegged and survives the price change.
    Pegged { carry: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReinitSpec {
    pub phi: PhiKind,
    pub plus: ReinitDist,
    pub minus: ReinitDist,
    /// Floor constant `alpha` with `Phi(x, eps) >= alpha_floor * eps`.
    pub alpha_floor: f64,
}

impl Default for ReinitSpec {
    fn default() -> Self {
        Self {
            phi: PhiKind::Identity,
            plus: ReinitDist::study_default(),
            minus: ReinitDist::study_default(),
            alpha_floor: 1.0,
        }
    }
}

impl ReinitSpec {
    /// Check the floor bound and that restarts stay strictly positive (and
    /// on the volume grid where the event engine needs them).
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha_floor > 0.0 && self.alpha_floor <= 1.0) {
            return Err(format!(
                "alpha_floor must lie in (0, 1], got {}",
                self.alpha_floor
            ));
        }
        for dist in [&self.plus, &self.minus] {
            match dist {
                ReinitDist::UniformSteps { lo, hi } => {
                    if *lo < 1 || hi < lo {
                        return Err(format!("uniform_steps needs 1 <= lo <= hi, got [{lo}, {hi}]"));
                    }
                }
                ReinitDist::PointMass { value } => {
                    if value.iter().any(|v| !(*v > 0.0)) {
                        return Err(format!("point_mass must be strictly positive, got {value:?}"));
                    }
                }
                ReinitDist::UniformBox { lo, hi } => {
                    for i in 0..4 {
                        if !(lo[i] > 0.0) || hi[i] < lo[i] {
                            return Err(format!(
                                "uniform_box needs 0 < lo <= hi, got {lo:?}..{hi:?}"
                            ));
                        }
                    }
                }
            }
        }
        if let PhiKind::Pegged { carry } = self.phi {
            if !(0.0..=1.0).contains(&carry) {
                return Err(format!("pegged carry must lie in [0, 1], got {carry}"));
            }
        }
        Ok(())
    }
}

/// Source of reinitialization values consumed by engines and path maps in
/// price-change order. The two implementations are the state-dependent
/// sampler ([`ReinitEngine`]) and pre-specified sequences
/// ([`FixedSequences`]).
pub trait ReinitSource<S: PathScalar> {
    /// Value for the next price change, given its direction and the
    /// pre-change queue state.
    fn draw(&mut self, dir: PriceDir, pre: &[S; 4]) -> [S; 4];
}

/// Stateful sampler: two independent ChaCha streams (up/down draws) plus the
/// `Phi` rule.
#[derive(Debug, Clone)]
pub struct ReinitEngine {
    pub spec: ReinitSpec,
    /// Volume unit; converts grid draws to `f64` values.
    pub dv: f64,
    rng_up: ChaCha8Rng,
    rng_down: ChaCha8Rng,
}

impl ReinitEngine {
    pub fn new(spec: ReinitSpec, dv: f64, seed: u64, replication: u64) -> Self {
        Self {
            spec,
            dv,
            rng_up: rng_for(seed, Purpose::ReinitUp, replication),
            rng_down: rng_for(seed, Purpose::ReinitDown, replication),
        }
    }

    /// Draw eps in `dv` units (integer grid). `UniformBox` is not grid-valued
    /// and panics here; use the limit-engine path instead.
    fn draw_eps_units(dist: &ReinitDist, dv: f64, rng: &mut ChaCha8Rng) -> [i64; 4] {
        match dist {
            ReinitDist::UniformSteps { lo, hi } => {
                let mut out = [0i64; 4];
                for x in &mut out {
                    *x = rng.gen_range(*lo..=*hi);
                }
                out
            }
            ReinitDist::PointMass { value } => {
                let mut out = [0i64; 4];
                for (x, v) in out.iter_mut().zip(value) {
                    let units = v / dv;
                    debug_assert!((units - units.round()).abs() < 1e-9 && units >= 1.0);
                    *x = units.round() as i64;
                }
                out
            }
            ReinitDist::UniformBox { .. } => {
                panic!("UniformBox reinitialization is not representable on the volume grid")
            }
        }
    }

    fn draw_eps_f64(dist: &ReinitDist, rng: &mut ChaCha8Rng) -> [f64; 4] {
        match dist {
            ReinitDist::UniformSteps { lo, hi } => {
                let mut out = [0f64; 4];
                for x in &mut out {
                    *x = rng.gen_range(*lo..=*hi) as f64;
                }
                out
            }
            ReinitDist::PointMass { value } => *value,
            ReinitDist::UniformBox { lo, hi } => {
                let mut out = [0f64; 4];
                for i in 0..4 {
                    out[i] = rng.gen_range(lo[i]..=hi[i]);
                }
                out
            }
        }
    }

    fn rng_for_dir(&mut self, dir: PriceDir) -> (&ReinitDist, &mut ChaCha8Rng) {
        match dir {
            PriceDir::Up => (&self.spec.plus, &mut self.rng_up),
            PriceDir::Down => (&self.spec.minus, &mut self.rng_down),
        }
    }

    /// Integer-unit draw for the event engine.
    pub fn draw_units(&mut self, dir: PriceDir, pre: &[i64; 4]) -> [i64; 4] {
        let dv = self.dv;
        let phi = self.spec.phi;
        let (dist, rng) = self.rng_for_dir(dir);
        let eps = Self::draw_eps_units(dist, dv, rng);
        match phi {
            PhiKind::Identity => eps,
            PhiKind::Pegged { carry } => {
                let mut out = eps;
                for i in 0..4 {
                    out[i] += ((carry * pre[i] as f64).floor() as i64).max(0);
                }
                out
            }
        }
    }

    /// Continuous draw for the limit engine. For grid distributions the
    /// result is expressed in the same (volume) units as `pre`, i.e. steps
    /// are scaled by `dv`.
    pub fn draw_value(&mut self, dir: PriceDir, pre: &[f64; 4]) -> [f64; 4] {
        let dv = self.dv;
        let phi = self.spec.phi;
        let (dist, rng) = self.rng_for_dir(dir);
        let grid_scaled = matches!(dist, ReinitDist::UniformSteps { .. });
        let mut eps = Self::draw_eps_f64(dist, rng);
        if grid_scaled {
            for x in &mut eps {
                *x *= dv;
            }
        }
        match phi {
            PhiKind::Identity => eps,
            PhiKind::Pegged { carry } => {
                let mut out = eps;
                for i in 0..4 {
                    out[i] += (carry * pre[i]).max(0.0);
                }
                out
            }
        }
    }
}

impl ReinitSource<i64> for ReinitEngine {
    fn draw(&mut self, dir: PriceDir, pre: &[i64; 4]) -> [i64; 4] {
        self.draw_units(dir, pre)
    }
}

impl ReinitSource<f64> for ReinitEngine {
    fn draw(&mut self, dir: PriceDir, pre: &[f64; 4]) -> [f64; 4] {
        self.draw_value(dir, pre)
    }
}

/// Pre-specified reinitialization sequences, indexed by price-change ordinal
/// as in the path-map definitions: the k-th change consumes index k of the
/// sequence matching its direction.
#[derive(Debug, Clone)]
pub struct FixedSequences<S> {
    pub plus: Vec<[S; 4]>,
    pub minus: Vec<[S; 4]>,
    next: usize,
}

impl<S> FixedSequences<S> {
    pub fn new(plus: Vec<[S; 4]>, minus: Vec<[S; 4]>) -> Self {
        Self {
            plus,
            minus,
            next: 0,
        }
    }
}

impl<S: PathScalar> ReinitSource<S> for FixedSequences<S> {
    fn draw(&mut self, dir: PriceDir, _pre: &[S; 4]) -> [S; 4] {
        let k = self.next;
        self.next += 1;
        match dir {
            PriceDir::Up => self.plus[k],
            PriceDir::Down => self.minus[k],
        }
    }
}
