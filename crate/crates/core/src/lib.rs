//! Causal-model laboratory for the CHSH Bell scenario.
//!
//! The crate simulates finite-run Bell experiments, fits parametric causal
//! models to the resulting count tables by maximum likelihood and compares the
//! models with a train-and-test protocol:
//!
//! - [`qmath`]: 2- and 4-dimensional complex linear algebra, states and effects.
//! - [`bell`]: behaviors, count tables, sampling and the CHSH / no-signalling functionals.
//! - [`oracles`]: brute-force polytope vertices, local bound and PPT verdicts.
//! - [`models`]: the five causal-model classes as smooth parameter charts.
//! - [`fitting`]: multi-start maximum-likelihood fits with an optional PPT penalty.
//! - [`traintest`]: overfitting verdicts and multi-seed studies.
//! - [`scenarios`]: ground-truth generators for the simulated experiments.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bell;
pub mod error;
pub mod fitting;
pub mod models;
pub mod oracles;
pub mod qmath;
pub mod scenarios;
pub mod traintest;

mod optim;
mod rng;

pub use bell::{Behavior, DataTable, EmpiricalFrequencies};
pub use error::{Error, Result};
pub use fitting::{FitConfig, FitResult};
pub use models::{ModelClass, ModelSpec, ParamVector};
pub use qmath::{BinaryPovm, CMat, DensityMatrix};
pub use scenarios::{ScenarioId, ScenarioSpec};
pub use traintest::{OverfitVerdict, StudySummary, TrainTestRun};
