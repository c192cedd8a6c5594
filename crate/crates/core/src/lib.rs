//! Simulation and analytics for a two-country cross-border limit order book
//! with limited transmission capacity.
//!
//! Two national books (countries `F` and `G`) trade the same asset. While
//! transmission capacity remains, the books are *coupled*: a market order that
//! finds its domestic queue empty executes against the foreign queue instead,
//! moving the net cross-border volume (the *capacity process*). When the
//! capacity process hits one of its bounds the books *decouple* and evolve as
//! independent national books until both best bid prices coincide again.
//!
//! The crate provides three consistent views of these dynamics plus the
//! closed-form analytics that describe their scaling limit:
//!
//! - [`micro`] — exact event-by-event simulation in integer volume/tick units:
//!   coupled ("active") dynamics, decoupled ("inactive") dynamics, and the
//!   capacity-constrained regime-switching market.
//! - [`path_maps`] — the deterministic regulated-path functionals (Skorokhod
//!   reflections, absorption, hitting times and the composite queue/capacity/
//!   price maps). Applied to the net order flow they reproduce the micro
//!   engine *exactly*; applied to Brownian paths they define the limit model.
//! - [`limit`] — the diffusion-limit simulator: linear Brownian queue input
//!   regulated by the same path maps, including the regime-switching limit.
//! - [`analytics`] — planar Brownian first-passage analytics (survival of the
//!   first price change, direction probabilities, exit densities, price-change
//!   counts and price ranges) and a finite-difference solver for the
//!   interface PDE governing the cross-border direction change.
//! - [`experiments`] — seeded Monte Carlo studies binding everything
//!   together, with CSV emission.
//!
//! Reproducibility: every stochastic routine takes either an explicit RNG or a
//! `(master_seed, replication)` pair routed through [`rng`], so results are
//! independent of thread count and execution order.

pub mod analytics;
pub mod config;
pub mod csv_io;
pub mod experiments;
pub mod limit;
pub mod micro;
pub mod model;
pub mod num;
pub mod order_flow;
pub mod path_maps;
pub mod reinit;
pub mod rng;

pub use model::{
    aggregate_shared_moments, derive_event_moments, validate_params, MarketState, ModelError,
    ModelParams, MomentSet, Regime, ValidatedParams,
};
pub use order_flow::{
    generate_stream, net_flow_path, sample_order, Country, GridPath, Interp, OrderEvent,
    OrderStream, Side,
};
pub use reinit::{ReinitDist, ReinitEngine, ReinitSource, ReinitSpec};
