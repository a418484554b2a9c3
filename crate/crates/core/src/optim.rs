//! Stepping algorithms.
//!
//! Every algorithm advances an [`OptimizerState`] by one step and reports a
//! [`StepDiagnostics`] record, including ρ for the step it just took. The
//! non-adaptive baselines record ρ too, which is how their ρ collapse shows up
//! in traces.
//!
//! The Neograd family (`NeogradV0`, `NeogradV1`, `NeogradHybrid`) feeds ρ back
//! into the learning rate through [`rho::next_alpha`]. The hybrid delegates
//! the direction of the step to an [`Engine`]; with [`Engine::Momentum`] it is
//! NeogradM.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cost::{dot, norm, CostError, CostFunction, QuarticRule};
use crate::rho::{self, get_rho_prime, measure_rho, RhoTargets, RhoTriple};
use crate::trace::{ExperimentTrace, StopReason};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("ideal gradient descent needs a quadratic, quartic or ellipse cost function, got {0}")]
    NotClosedForm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    BasicGd,
    IdealGd,
    MomentumGd,
    RmsProp,
    Adam,
    NeogradV0,
    NeogradV1,
    NeogradHybrid,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::BasicGd,
        Algorithm::IdealGd,
        Algorithm::MomentumGd,
        Algorithm::RmsProp,
        Algorithm::Adam,
        Algorithm::NeogradV0,
        Algorithm::NeogradV1,
        Algorithm::NeogradHybrid,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::BasicGd => "basic_gd",
            Algorithm::IdealGd => "ideal_gd",
            Algorithm::MomentumGd => "momentum_gd",
            Algorithm::RmsProp => "rmsprop",
            Algorithm::Adam => "adam",
            Algorithm::NeogradV0 => "neograd_v0",
            Algorithm::NeogradV1 => "neograd_v1",
            Algorithm::NeogradHybrid => "neograd_hybrid",
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(
            self,
            Algorithm::NeogradV0 | Algorithm::NeogradV1 | Algorithm::NeogradHybrid
        )
    }
}

/// Direction engine for the hybridized Neograd step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Engine {
    Gd,
    #[default]
    Momentum,
    Adam,
    RmsProp,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Gd => "gd",
            Engine::Momentum => "momentum",
            Engine::Adam => "adam",
            Engine::RmsProp => "rmsprop",
        }
    }
}

/// How `f_est` is formed for a step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum FestOption {
    /// `f_est = f_old + ∇f·dθ`
    #[default]
    DotGradDtheta,
    /// `f_est = f_old + m·dθ`, the gradient replaced by its momentum average;
    /// for the momentum engine this is `f_old − α‖m‖²`.
    NegAlphaMSquared,
}

impl FestOption {
    pub fn as_str(&self) -> &'static str {
        match self {
            FestOption::DotGradDtheta => "dot_grad_dtheta",
            FestOption::NegAlphaMSquared => "neg_alpha_m_squared",
        }
    }
}

macro_rules! parse_enum {
    ($ty:ty, $what:literal, [$($name:literal => $val:expr),+ $(,)?]) => {
        impl FromStr for $ty {
            type Err = OptimError;
            fn from_str(s: &str) -> Result<Self, OptimError> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($val),)+
                    other => Err(OptimError::InvalidConfig(format!(
                        concat!("unknown ", $what, " `{}`"), other
                    ))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

parse_enum!(Algorithm, "algorithm", [
    "basic_gd" => Algorithm::BasicGd,
    "ideal_gd" => Algorithm::IdealGd,
    "momentum_gd" => Algorithm::MomentumGd,
    "rmsprop" => Algorithm::RmsProp,
    "adam" => Algorithm::Adam,
    "neograd_v0" => Algorithm::NeogradV0,
    "neograd_v1" => Algorithm::NeogradV1,
    "neograd_hybrid" => Algorithm::NeogradHybrid,
    "neogradm" => Algorithm::NeogradHybrid,
]);

parse_enum!(Engine, "hybrid engine", [
    "gd" => Engine::Gd,
    "momentum" => Engine::Momentum,
    "adam" => Engine::Adam,
    "rmsprop" => Engine::RmsProp,
]);

parse_enum!(FestOption, "f_est option", [
    "dot_grad_dtheta" => FestOption::DotGradDtheta,
    "1" => FestOption::DotGradDtheta,
    "neg_alpha_m_squared" => FestOption::NegAlphaMSquared,
    "2" => FestOption::NegAlphaMSquared,
]);

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    /// Direction engine, used by [`Algorithm::NeogradHybrid`] only.
    pub engine: Engine,
    pub alpha0: f64,
    pub targets: RhoTargets,
    /// Momentum coefficient, for `MomentumGd` and the hybrid momentum engine.
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub fest: FestOption,
    pub max_iters: usize,
    pub seed: u64,
    pub quartic_rule: QuarticRule,
    /// Stop after [`STALL_WINDOW`] consecutive steps with
    /// `|f_old − f_new| < tol·max(1, |f_old|)`. `None` disables the check.
    pub stall_tol: Option<f64>,
    /// Keep a θ snapshot every this many iterations (plus the first and last).
    pub snapshot_stride: usize,
}

pub const STALL_WINDOW: usize = 5;

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::NeogradHybrid,
            engine: Engine::Momentum,
            alpha0: 1e-3,
            targets: RhoTargets::default(),
            beta: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            fest: FestOption::DotGradDtheta,
            max_iters: 1000,
            seed: 0,
            quartic_rule: QuarticRule::Exact,
            stall_tol: Some(1e-15),
            snapshot_stride: 10,
        }
    }
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm, alpha0: f64, max_iters: usize) -> Self {
        Self {
            algorithm,
            alpha0,
            max_iters,
            ..Self::default()
        }
    }

    /// NeogradM: hybrid Neograd with the momentum engine.
    pub fn neogradm(alpha0: f64, max_iters: usize) -> Self {
        Self::new(Algorithm::NeogradHybrid, alpha0, max_iters)
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |msg: String| Err(OptimError::InvalidConfig(msg));
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad(format!(
                "alpha0 must be positive and finite, got {}",
                self.alpha0
            ));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        RhoTargets::new(
            self.targets.rho_min,
            self.targets.rho_targ,
            self.targets.rho_max,
        )
        .map_err(|e| OptimError::InvalidConfig(e.to_string()))?;
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be at least 1".into());
        }
        Ok(())
    }
}

/// Mutable optimization state. `grad` caches `∇f(θ)` so each iteration costs
/// one combined value-and-gradient evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub theta: Vec<f64>,
    pub alpha: f64,
    /// Momentum on the gradient.
    pub v: Vec<f64>,
    /// Momentum on the squared gradient.
    pub v2: Vec<f64>,
    /// Completed steps.
    pub iter: usize,
    pub f_old: f64,
    pub grad: Vec<f64>,
}

impl OptimizerState {
    pub fn new(cf: &dyn CostFunction, theta0: &[f64], alpha: f64) -> Self {
        let (f_old, grad) = cf.eval_grad(theta0);
        Self {
            theta: theta0.to_vec(),
            alpha,
            v: vec![0.0; theta0.len()],
            v2: vec![0.0; theta0.len()],
            iter: 0,
            f_old,
            grad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// 1-based step number.
    pub iter: usize,
    pub f_old: f64,
    pub f_new: f64,
    pub f_est: f64,
    pub rho: f64,
    pub alpha_used: f64,
    pub alpha_next: f64,
    /// `‖∇f(θ_old)‖`
    pub grad_norm: f64,
    pub degenerate: bool,
}

/// Applies `dθ`, evaluates the new point, and records the step.
fn commit(
    state: &mut OptimizerState,
    cf: &dyn CostFunction,
    dtheta: &[f64],
    f_est: f64,
    alpha_used: f64,
) -> StepDiagnostics {
    for (t, d) in state.theta.iter_mut().zip(dtheta) {
        *t += d;
    }
    let (f_new, grad_new) = cf.eval_grad(&state.theta);
    let f_old = state.f_old;
    let reading = measure_rho(&RhoTriple::new(f_old, f_new, f_est));
    let grad_norm = norm(&state.grad);
    state.iter += 1;
    state.f_old = f_new;
    state.grad = grad_new;
    StepDiagnostics {
        iter: state.iter,
        f_old,
        f_new,
        f_est,
        rho: reading.rho,
        alpha_used,
        alpha_next: alpha_used,
        grad_norm,
        degenerate: reading.degenerate || !f_new.is_finite(),
    }
}

fn plain_direction(state: &OptimizerState, alpha: f64) -> Vec<f64> {
    state.grad.iter().map(|g| -alpha * g).collect()
}

/// `θ′ = θ − α∇f(θ)` with a fixed learning rate.
pub fn step_basic_gd(state: &mut OptimizerState, cf: &dyn CostFunction) -> StepDiagnostics {
    let alpha = state.alpha;
    let dtheta = plain_direction(state, alpha);
    let f_est = state.f_old + dot(&state.grad, &dtheta);
    commit(state, cf, &dtheta, f_est, alpha)
}

/// Plain gradient step with the closed-form learning rate that holds ρ at
/// `rho_targ` on the quadratic, quartic and ellipse.
pub fn step_ideal_gd(
    state: &mut OptimizerState,
    cf: &dyn CostFunction,
    rho_targ: f64,
    rule: QuarticRule,
) -> Result<StepDiagnostics, OptimError> {
    let form = cf
        .closed_form()
        .ok_or_else(|| OptimError::NotClosedForm(cf.name()))?;
    state.alpha = form.ideal_alpha(&state.theta, rho_targ, rule)?;
    let mut d = step_basic_gd(state, cf);
    if let Ok(next) = form.ideal_alpha(&state.theta, rho_targ, rule) {
        state.alpha = next;
        d.alpha_next = next;
    }
    Ok(d)
}

/// Polyak heavy ball: `v = βv + α∇f`, `θ′ = θ − v`.
pub fn step_momentum_gd(
    state: &mut OptimizerState,
    cf: &dyn CostFunction,
    beta: f64,
) -> StepDiagnostics {
    let alpha = state.alpha;
    for (v, g) in state.v.iter_mut().zip(&state.grad) {
        *v = beta * *v + alpha * g;
    }
    let dtheta: Vec<f64> = state.v.iter().map(|v| -v).collect();
    let f_est = state.f_old + dot(&state.grad, &dtheta);
    commit(state, cf, &dtheta, f_est, alpha)
}

/// RMSProp without bias correction: `v2 = β₂v2 + (1−β₂)g²`,
/// `θ′ = θ − αg/(√v2 + ε)`.
pub fn step_rmsprop(
    state: &mut OptimizerState,
    cf: &dyn CostFunction,
    beta2: f64,
    eps: f64,
) -> StepDiagnostics {
    let alpha = state.alpha;
    let dtheta = rmsprop_direction(state, alpha, beta2, eps);
    let f_est = state.f_old + dot(&state.grad, &dtheta);
    commit(state, cf, &dtheta, f_est, alpha)
}

fn rmsprop_direction(state: &mut OptimizerState, alpha: f64, beta2: f64, eps: f64) -> Vec<f64> {
    state
        .v2
        .iter_mut()
        .zip(&state.grad)
        .map(|(v2, g)| {
            *v2 = beta2 * *v2 + (1.0 - beta2) * g * g;
            -alpha * g / (v2.sqrt() + eps)
        })
        .collect()
}

/// Bias-corrected Adam moments for step `t` (1-based). Returns `(dθ, m̂)`.
fn adam_direction(
    state: &mut OptimizerState,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> (Vec<f64>, Vec<f64>) {
    let t = (state.iter + 1) as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let n = state.theta.len();
    let mut dtheta = Vec::with_capacity(n);
    let mut m_hat = Vec::with_capacity(n);
    for ((m, v2), g) in state.v.iter_mut().zip(state.v2.iter_mut()).zip(&state.grad) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v2 = beta2 * *v2 + (1.0 - beta2) * g * g;
        let mh = *m / c1;
        let vh = *v2 / c2;
        dtheta.push(-alpha * mh / (vh.sqrt() + eps));
        m_hat.push(mh);
    }
    (dtheta, m_hat)
}

/// Adam with bias correction of both moments; `ε` outside the square root.
pub fn step_adam(
    state: &mut OptimizerState,
    cf: &dyn CostFunction,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> StepDiagnostics {
    let alpha = state.alpha;
    let (dtheta, _) = adam_direction(state, alpha, beta1, beta2, eps);
    let f_est = state.f_old + dot(&state.grad, &dtheta);
    commit(state, cf, &dtheta, f_est, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeogradVariant {
    /// Adaptation formula aimed straight at `ρ_targ`.
    V0,
    /// Adaptation formula aimed at the staged `ρ′` from [`get_rho_prime`].
    V1,
}

/// Plain gradient step followed by the adaptation formula.
pub fn step_neograd(
    state: &mut OptimizerState,
    cf: &dyn CostFunction,
    variant: NeogradVariant,
    targets: &RhoTargets,
) -> StepDiagnostics {
    let params = HybridParams {
        engine: Engine::Gd,
        fest: FestOption::DotGradDtheta,
        staged: variant == NeogradVariant::V1,
        ..HybridParams::default()
    };
    step_neograd_hybrid(state, cf, &params, targets)
}

/// Settings for [`step_neograd_hybrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridParams {
    pub engine: Engine,
    pub fest: FestOption,
    /// Use the staged `ρ′` schedule.
    pub staged: bool,
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for HybridParams {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        Self {
            engine: c.engine,
            fest: c.fest,
            staged: true,
            beta: c.beta,
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.eps,
        }
    }
}

/// One step of hybridized Neograd.
///
/// The engine turns the gradient into `dθ`, always proportional to the
/// current `α`:
///
/// * `Gd`: `dθ = −αg`
/// * `Momentum`: `m = βm + (1−β)g`, `dθ = −αm` (NeogradM)
/// * `Adam`: bias-corrected Adam direction with global rate `α`
/// * `RmsProp`: `dθ = −αg/(√v2 + ε)`
///
/// ρ of the step then drives the adaptation formula for the next `α`.
pub fn step_neograd_hybrid(
    state: &mut OptimizerState,
    cf: &dyn CostFunction,
    params: &HybridParams,
    targets: &RhoTargets,
) -> StepDiagnostics {
    let alpha = state.alpha;
    let (dtheta, momentum): (Vec<f64>, Option<Vec<f64>>) = match params.engine {
        Engine::Gd => (plain_direction(state, alpha), None),
        Engine::Momentum => {
            let beta = params.beta;
            for (m, g) in state.v.iter_mut().zip(&state.grad) {
                *m = beta * *m + (1.0 - beta) * g;
            }
            let d = state.v.iter().map(|m| -alpha * m).collect();
            (d, Some(state.v.clone()))
        }
        Engine::Adam => {
            let (d, m_hat) = adam_direction(state, alpha, params.beta1, params.beta2, params.eps);
            (d, Some(m_hat))
        }
        Engine::RmsProp => (
            rmsprop_direction(state, alpha, params.beta2, params.eps),
            None,
        ),
    };
    let slope = match (params.fest, &momentum) {
        (FestOption::NegAlphaMSquared, Some(m)) => dot(m, &dtheta),
        _ => dot(&state.grad, &dtheta),
    };
    let f_est = state.f_old + slope;
    let mut d = commit(state, cf, &dtheta, f_est, alpha);

    let target = if params.staged {
        get_rho_prime(d.rho, targets.rho_targ)
    } else {
        targets.rho_targ
    };
    let update = if d.degenerate {
        rho::AlphaUpdate {
            alpha: alpha * rho::GROWTH_CAP,
            guarded: true,
        }
    } else {
        rho::next_alpha(&RhoTriple::new(d.f_old, d.f_new, d.f_est), alpha, target)
    };
    state.alpha = update.alpha;
    d.alpha_next = update.alpha;
    d
}

/// Owns a configuration and a state and dispatches to the configured
/// stepper.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(
        cf: &dyn CostFunction,
        config: OptimizerConfig,
        theta0: &[f64],
    ) -> Result<Self, OptimError> {
        config.validate()?;
        cf.check_dim(theta0.len())?;
        if let Some((index, &value)) = theta0.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(CostError::NonFinite { index, value }.into());
        }
        if config.algorithm == Algorithm::IdealGd && cf.closed_form().is_none() {
            return Err(OptimError::NotClosedForm(cf.name()));
        }
        let state = OptimizerState::new(cf, theta0, config.alpha0);
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn hybrid_params(&self) -> HybridParams {
        let c = &self.config;
        HybridParams {
            engine: c.engine,
            fest: c.fest,
            staged: true,
            beta: c.beta,
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.eps,
        }
    }

    pub fn step(&mut self, cf: &dyn CostFunction) -> Result<StepDiagnostics, OptimError> {
        let c = &self.config;
        let s = &mut self.state;
        Ok(match c.algorithm {
            Algorithm::BasicGd => step_basic_gd(s, cf),
            Algorithm::IdealGd => step_ideal_gd(s, cf, c.targets.rho_targ, c.quartic_rule)?,
            Algorithm::MomentumGd => step_momentum_gd(s, cf, c.beta),
            Algorithm::RmsProp => step_rmsprop(s, cf, c.beta2, c.eps),
            Algorithm::Adam => step_adam(s, cf, c.beta1, c.beta2, c.eps),
            Algorithm::NeogradV0 => step_neograd(s, cf, NeogradVariant::V0, &c.targets),
            Algorithm::NeogradV1 => step_neograd(s, cf, NeogradVariant::V1, &c.targets),
            Algorithm::NeogradHybrid => {
                let params = self.hybrid_params();
                step_neograd_hybrid(&mut self.state, cf, &params, &self.config.targets)
            }
        })
    }

    pub fn into_state(self) -> OptimizerState {
        self.state
    }
}

/// Runs the configured algorithm from `theta0` for up to `max_iters` steps.
///
/// The run ends early on a non-finite cost, on a stepper error, or when the
/// cost stops changing (see [`OptimizerConfig::stall_tol`]); the reason is
/// recorded in the trace.
pub fn run(
    cf: &dyn CostFunction,
    config: &OptimizerConfig,
    theta0: &[f64],
) -> Result<ExperimentTrace, OptimError> {
    run_until(cf, config, theta0, |_| false)
}

/// Like [`run`], with an extra caller-supplied stop condition checked after
/// each step.
pub fn run_until(
    cf: &dyn CostFunction,
    config: &OptimizerConfig,
    theta0: &[f64],
    mut stop: impl FnMut(&StepDiagnostics) -> bool,
) -> Result<ExperimentTrace, OptimError> {
    let mut opt = Optimizer::new(cf, config.clone(), theta0)?;
    let stride = config.snapshot_stride;
    let mut trace = ExperimentTrace::new(theta0.to_vec(), opt.state.f_old);
    let mut stalled = 0usize;
    let mut reason = StopReason::Completed;

    if !opt.state.f_old.is_finite() {
        reason = StopReason::NonFinite;
    } else {
        for _ in 0..config.max_iters {
            let d = match opt.step(cf) {
                Ok(d) => d,
                Err(e) => {
                    reason = StopReason::Error(e.to_string());
                    break;
                }
            };
            trace.steps.push(d);
            if d.iter % stride == 0 {
                trace.snapshots.push((d.iter, opt.state.theta.clone()));
            }
            if !d.f_new.is_finite() || !opt.state.alpha.is_finite() {
                reason = StopReason::NonFinite;
                break;
            }
            if let Some(tol) = config.stall_tol {
                if (d.f_old - d.f_new).abs() < tol * d.f_old.abs().max(1.0) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                if stalled >= STALL_WINDOW {
                    reason = StopReason::Stalled;
                    break;
                }
            }
            if stop(&d) {
                reason = StopReason::Condition;
                break;
            }
        }
    }
    let last = opt.state.iter;
    if trace.snapshots.last().map(|(i, _)| *i) != Some(last) {
        trace.snapshots.push((last, opt.state.theta.clone()));
    }
    trace.final_alpha = opt.state.alpha;
    trace.final_theta = opt.into_state().theta;
    trace.stop = reason;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{Beale, Quadratic, Quartic, SigmoidWell};
    use approx::assert_relative_eq;

    fn state(cf: &dyn CostFunction, theta: &[f64], alpha: f64) -> OptimizerState {
        OptimizerState::new(cf, theta, alpha)
    }

    #[test]
    fn basic_gd_examples() {
        let q = Quadratic::new(1.0).unwrap();
        let mut s = state(&q, &[1.0], 0.1);
        let d = step_basic_gd(&mut s, &q);
        assert_relative_eq!(s.theta[0], 0.8, max_relative = 1e-15);
        assert_relative_eq!(d.rho, 0.1, max_relative = 1e-12);
        assert_eq!(s.alpha, 0.1);

        let q4 = Quartic::new(1.0).unwrap();
        let mut s = state(&q4, &[1.0], 0.1);
        step_basic_gd(&mut s, &q4);
        assert_relative_eq!(s.theta[0], 0.6, max_relative = 1e-15);
    }

    #[test]
    fn zero_gradient_step_is_degenerate() {
        let q = Quadratic::new(1.0).unwrap();
        let mut s = state(&q, &[0.0, 0.0], 0.1);
        let d = step_basic_gd(&mut s, &q);
        assert!(d.degenerate);
        assert_eq!(s.theta, vec![0.0, 0.0]);
    }

    #[test]
    fn ideal_gd_alphas() {
        let q = Quadratic::new(2.0).unwrap();
        let mut s = state(&q, &[1.0, -3.0], 1.0);
        for _ in 0..5 {
            let d = step_ideal_gd(&mut s, &q, 0.1, QuarticRule::Exact).unwrap();
            assert_eq!(d.alpha_used, 0.05);
            assert_relative_eq!(d.rho, 0.1, max_relative = 1e-10);
        }
        let q4 = Quartic::new(1.0).unwrap();
        let mut s = state(&q4, &[1.0], 1.0);
        let d = step_ideal_gd(&mut s, &q4, 0.1, QuarticRule::LeadingOrder).unwrap();
        assert_relative_eq!(d.alpha_used, 0.1 / 6.0, max_relative = 1e-15);
        let mut s = state(&q4, &[0.0], 1.0);
        assert!(step_ideal_gd(&mut s, &q4, 0.1, QuarticRule::Exact).is_err());
        let mut s = state(&Beale, &[1.0, 1.0], 1.0);
        assert!(matches!(
            step_ideal_gd(&mut s, &Beale, 0.1, QuarticRule::Exact),
            Err(OptimError::NotClosedForm(_))
        ));
    }

    #[test]
    fn momentum_two_steps() {
        let q = Quadratic::new(1.0).unwrap();
        let mut s = state(&q, &[1.0], 0.1);
        step_momentum_gd(&mut s, &q, 0.9);
        step_momentum_gd(&mut s, &q, 0.9);
        assert_relative_eq!(s.theta[0], 0.46, max_relative = 1e-14);
    }

    #[test]
    fn momentum_with_zero_beta_is_basic_gd() {
        let cf = Beale;
        let mut a = state(&cf, &[4.0, 3.0], 1e-4);
        let mut b = a.clone();
        for _ in 0..20 {
            let da = step_momentum_gd(&mut a, &cf, 0.0);
            let db = step_basic_gd(&mut b, &cf);
            assert_eq!(da, db);
        }
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn momentum_converges_to_geometric_limit() {
        // constant gradient: f = 3θ
        struct Linear;
        impl CostFunction for Linear {
            fn name(&self) -> String {
                "linear".into()
            }
            fn dim(&self) -> Option<usize> {
                Some(1)
            }
            fn eval(&self, t: &[f64]) -> f64 {
                3.0 * t[0]
            }
            fn grad(&self, _: &[f64]) -> Vec<f64> {
                vec![3.0]
            }
        }
        let mut s = state(&Linear, &[0.0], 0.01);
        for _ in 0..400 {
            step_momentum_gd(&mut s, &Linear, 0.9);
        }
        assert_relative_eq!(s.v[0], 0.01 * 3.0 / 0.1, max_relative = 1e-12);
    }

    #[test]
    fn adam_first_step_is_sign_descent() {
        let cf = Beale;
        let mut s = state(&cf, &[4.0, 3.0], 0.01);
        let before = s.theta.clone();
        step_adam(&mut s, &cf, 0.9, 0.999, 1e-8);
        for (a, b) in s.theta.iter().zip(&before) {
            assert_relative_eq!((a - b).abs(), 0.01, max_relative = 1e-6);
        }
        let q = Quadratic::new(1.0).unwrap();
        let mut s = state(&q, &[1.0], 0.001);
        step_adam(&mut s, &q, 0.9, 0.999, 1e-8);
        assert_relative_eq!(s.theta[0], 0.999, max_relative = 1e-9);
    }

    #[test]
    fn adam_and_rmsprop_stay_put_at_zero_gradient() {
        let q = Quadratic::new(1.0).unwrap();
        let mut s = state(&q, &[0.0], 0.1);
        for _ in 0..5 {
            step_adam(&mut s, &q, 0.9, 0.999, 1e-8);
            step_rmsprop(&mut s, &q, 0.9, 1e-8);
        }
        assert_eq!(s.theta, vec![0.0]);
    }

    #[test]
    fn rmsprop_memoryless_and_limit() {
        let q = Quadratic::new(1.0).unwrap();
        let mut s = state(&q, &[0.5, -2.0], 0.01);
        let g = s.grad.clone();
        let before = s.theta.clone();
        step_rmsprop(&mut s, &q, 0.0, 1e-8);
        for i in 0..2 {
            let expected = 0.01 * g[i].abs() / (g[i].abs() + 1e-8);
            assert_relative_eq!(
                (s.theta[i] - before[i]).abs(),
                expected,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn neograd_v1_on_quadratic_hits_target_in_one_step() {
        let q = Quadratic::new(1.0).unwrap();
        let mut s = state(&q, &[1.0], 0.5);
        let d = step_neograd(&mut s, &q, NeogradVariant::V1, &RhoTargets::default());
        assert_relative_eq!(d.rho, 0.5, max_relative = 1e-12);
        assert_relative_eq!(s.alpha, 0.1, max_relative = 1e-10);
    }

    #[test]
    fn neograd_fixed_point() {
        let q = Quadratic::new(1.0).unwrap();
        let mut s = state(&q, &[1.0], 0.1);
        step_neograd(&mut s, &q, NeogradVariant::V0, &RhoTargets::default());
        assert_relative_eq!(s.alpha, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn hybrid_gd_and_zero_beta_momentum_match_v1() {
        let cf = SigmoidWell::default();
        let targets = RhoTargets::default();
        let mut a = state(&cf, &[-3.0], 0.05);
        let mut b = a.clone();
        let mut c = a.clone();
        let gd = HybridParams {
            engine: Engine::Gd,
            ..HybridParams::default()
        };
        let m0 = HybridParams {
            engine: Engine::Momentum,
            beta: 0.0,
            ..HybridParams::default()
        };
        for _ in 0..100 {
            let da = step_neograd(&mut a, &cf, NeogradVariant::V1, &targets);
            let db = step_neograd_hybrid(&mut b, &cf, &gd, &targets);
            let dc = step_neograd_hybrid(&mut c, &cf, &m0, &targets);
            assert_eq!(da, db);
            assert_eq!(da, dc);
        }
    }

    #[test]
    fn run_with_zero_budget() {
        let q = Quadratic::new(1.0).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::BasicGd, 0.1, 0);
        let t = run(&q, &cfg, &[1.5]).unwrap();
        assert!(t.steps.is_empty());
        assert_eq!(t.final_theta, vec![1.5]);
        assert_eq!(t.stop, StopReason::Completed);
    }

    #[test]
    fn run_rejects_bad_input() {
        let cfg = OptimizerConfig::new(Algorithm::BasicGd, 0.1, 10);
        assert!(run(&Beale, &cfg, &[1.0]).is_err());
        assert!(run(&Beale, &cfg, &[1.0, f64::NAN]).is_err());
        let bad = OptimizerConfig {
            beta: 1.0,
            ..cfg.clone()
        };
        assert!(run(&Beale, &bad, &[1.0, 1.0]).is_err());
        let ideal = OptimizerConfig::new(Algorithm::IdealGd, 0.1, 10);
        assert!(matches!(
            run(&Beale, &ideal, &[1.0, 1.0]),
            Err(OptimError::NotClosedForm(_))
        ));
    }

    #[test]
    fn run_stops_on_divergence() {
        let q = Quadratic::new(1.0).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::BasicGd, 10.0, 10_000);
        let t = run(&q, &cfg, &[1.0]).unwrap();
        assert_eq!(t.stop, StopReason::NonFinite);
        assert!(t.steps.len() < 10_000);
    }

    #[test]
    fn run_stops_on_stall() {
        let q = Quadratic::new(1.0).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::IdealGd, 0.1, 10_000);
        let t = run(&q, &cfg, &[1.0]).unwrap();
        assert_eq!(t.stop, StopReason::Stalled);
        let no_stall = OptimizerConfig {
            stall_tol: None,
            max_iters: 300,
            ..cfg
        };
        let t = run(&q, &no_stall, &[1.0]).unwrap();
        assert_eq!(t.steps.len(), 300);
    }

    #[test]
    fn parse_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!(
            "NeogradM".parse::<Algorithm>().unwrap(),
            Algorithm::NeogradHybrid
        );
        assert_eq!(
            "2".parse::<FestOption>().unwrap(),
            FestOption::NegAlphaMSquared
        );
        assert!("sgd".parse::<Algorithm>().is_err());
    }

    #[test]
    fn snapshots_follow_stride() {
        let q = Quadratic::new(1.0).unwrap();
        let cfg = OptimizerConfig {
            snapshot_stride: 10,
            stall_tol: None,
            ..OptimizerConfig::new(Algorithm::BasicGd, 0.01, 25)
        };
        let t = run(&q, &cfg, &[1.0]).unwrap();
        let iters: Vec<usize> = t.snapshots.iter().map(|(i, _)| *i).collect();
        assert_eq!(iters, vec![0, 10, 20, 25]);
    }
}
