//! Gradient descent with a learning rate steered by the ρ trust metric.
//!
//! ρ measures how far a step's actual cost change strays from the linear
//! prediction made by the gradient:
//!
//! ```
//! use neograd::rho::{compute_rho, RhoTriple};
//!
//! // f = θ², θ = 1, α = 0.1: the step lands at 0.8
//! let t = RhoTriple::new(1.0, 0.64, 1.0 - 0.1 * 4.0);
//! assert!((compute_rho(&t).unwrap() - 0.1).abs() < 1e-12);
//! ```
//!
//! The Neograd optimizers re-solve for the learning rate after every step so
//! that ρ stays near a small target. NeogradM, the momentum hybrid, is the
//! default configuration:
//!
//! ```
//! use neograd::cost::Beale;
//! use neograd::optim::{run, OptimizerConfig};
//! use neograd::rho::{get_starting_alpha, RhoTargets};
//!
//! let theta0 = [4.0, 3.0];
//! let start = get_starting_alpha(&Beale, &theta0, 1e-8, &RhoTargets::default(), 20).unwrap();
//! let trace = run(&Beale, &OptimizerConfig::neogradm(start.alpha, 500), &theta0).unwrap();
//! assert!(trace.final_f() < 1e-10);
//! ```
//!
//! Modules:
//!
//! * [`cost`]: the cost-function trait and the analytic test problems
//! * [`gradcheck`]: finite-difference gradient verification
//! * [`rho`]: ρ, the adaptation formula, the staged target, starting-α search
//! * [`optim`]: Basic/Ideal/momentum GD, RMSProp, Adam and the Neograd family
//! * [`mlp`]: the digits classifier as a cost function
//! * [`trace`]: per-run records

pub mod cost;
pub mod gradcheck;
pub mod mlp;
pub mod optim;
pub mod rho;
pub mod trace;

pub use cost::{
    Beale, ClosedForm, CostError, CostFunction, Ellipse, ParamVec, Quadratic, Quartic, QuarticRule,
    SigmoidWell,
};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use optim::{
    run, Algorithm, Engine, FestOption, OptimError, Optimizer, OptimizerConfig, OptimizerState,
    StepDiagnostics,
};
pub use rho::{RhoTargets, RhoTriple};
pub use trace::{ExperimentTrace, StopReason};

// The guide's code listings compile and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/rho.md")]
    mod rho {}
    #[doc = include_str!("../../../book/src/adaptation.md")]
    mod adaptation {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    mod optimizers {}
    #[doc = include_str!("../../../book/src/digits.md")]
    mod digits {}
}
