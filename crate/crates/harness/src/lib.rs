//! Experiment harness for the `neograd` optimizers: spec files, CSV traces,
//! Adam α grid search, speedup curves, basin and angle probes, adaptation
//! stability maps, and a one-shot reproduction of the full experiment set.

pub mod commands;
pub mod csvio;
pub mod error;
pub mod reproduce;
pub mod selector;
pub mod spec;

pub use error::{HarnessError, Result};
pub use selector::CfSelector;
pub use spec::{AlphaPolicy, ExperimentSpec, OptimizerSpec, Theta0Policy};
