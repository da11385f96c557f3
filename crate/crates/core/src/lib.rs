//! Demand-response flexibility of domestic electric water heater aggregates.
//!
//! The crate simulates populations of water heaters minute by minute over a
//! typical day of a given month, under three thermostat set-point regimes, and
//! derives how much the aggregate consumption can be raised or lowered from its
//! baseline for a sustained window.
//!
//! Module map:
//!
//! * [`thermal`]: single-tank model and thermostat.
//! * [`inputs`]: random ambient temperature and hot-water draw profiles.
//! * [`mintemp`]: user acceptable minimum tank temperature.
//! * [`montecarlo`]: population simulation and aggregation.
//! * [`flexibility`]: operating set-points and the flexibility surface.
//! * [`scenario`], [`run`], [`plot`]: data files, orchestration and outputs.
//!
//! With the default `parallel` feature, sample simulation runs on rayon.
//! Results are bit-identical for any number of worker threads.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod flexibility;
pub mod inputs;
pub mod mintemp;
pub mod montecarlo;
pub mod plot;
pub mod rng;
pub mod run;
pub mod scenario;
pub mod series;
pub mod thermal;

pub use error::{Error, Result};
pub use exec::Execution;
pub use flexibility::{
    flexibility_surface, operating_setpoints, window_min_difference, FlexibilitySurface,
    OperatingConditions,
};
pub use montecarlo::{
    aggregate_total, simulate_regimes, simulate_subaggregate, PowerProfile, Regime,
    SimulationConfig, SubAggregate,
};
pub use run::{execute, run_flexibility, Command, RunManifest, RunOptions};
pub use scenario::{load_scenario, AreaSelection, Scenario};
pub use series::{HourlyProfile, MinuteSeries};
pub use thermal::{EwhClass, EwhState, PhysicalConstants};
