//! Tree-structured clustering of unit-specific intercepts in fixed-effects
//! generalized linear models, with a simulation harness and bootstrap
//! confidence intervals.

pub mod cli;
pub mod data;
pub mod error;
pub mod glm;
pub mod harness;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod simulate;
pub mod tsc;

pub use data::Dataset;
pub use error::{Error, Result};
pub use glm::Family;
pub use inference::{bootstrap_ci, BootstrapResult};
pub use simulate::{simulate, Scenario};
pub use tsc::{fit_tsc, ModelSpec, TreeFit};
