//! Run records.

use std::fmt;

use crate::optim::StepDiagnostics;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    /// The iteration budget was exhausted.
    Completed,
    /// The cost stopped changing for several consecutive steps.
    Stalled,
    /// A cost or learning rate became non-finite.
    NonFinite,
    /// A caller-supplied stop condition fired.
    Condition,
    Error(String),
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::Completed => f.write_str("completed"),
            StopReason::Stalled => f.write_str("stalled"),
            StopReason::NonFinite => f.write_str("non_finite"),
            StopReason::Condition => f.write_str("condition"),
            StopReason::Error(e) => write!(f, "error: {e}"),
        }
    }
}

/// Ordered per-step diagnostics of one run, with strided θ snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTrace {
    pub theta0: Vec<f64>,
    pub f0: f64,
    pub steps: Vec<StepDiagnostics>,
    /// `(iteration, θ)`; iteration 0 is the starting point.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub final_theta: Vec<f64>,
    pub final_alpha: f64,
    pub stop: StopReason,
}

impl ExperimentTrace {
    pub fn new(theta0: Vec<f64>, f0: f64) -> Self {
        Self {
            snapshots: vec![(0, theta0.clone())],
            final_theta: theta0.clone(),
            theta0,
            f0,
            steps: Vec::new(),
            final_alpha: f64::NAN,
            stop: StopReason::Completed,
        }
    }

    pub fn final_f(&self) -> f64 {
        self.steps.last().map_or(self.f0, |d| d.f_new)
    }

    /// Cost after each step, preceded by the starting cost.
    pub fn costs(&self) -> Vec<f64> {
        std::iter::once(self.f0)
            .chain(self.steps.iter().map(|d| d.f_new))
            .collect()
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.steps.iter().map(|d| d.rho).collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.steps.iter().map(|d| d.alpha_used).collect()
    }

    /// First iteration whose cost is strictly below `level`.
    pub fn first_below(&self, level: f64) -> Option<usize> {
        if self.f0 < level {
            return Some(0);
        }
        self.steps.iter().find(|d| d.f_new < level).map(|d| d.iter)
    }

    /// Fraction of steps after `burn_in` whose ρ lies in `(lo, hi)`.
    pub fn band_fraction(&self, burn_in: usize, lo: f64, hi: f64) -> f64 {
        let tail: Vec<_> = self.steps.iter().skip(burn_in).collect();
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|d| d.rho > lo && d.rho < hi).count() as f64 / tail.len() as f64
    }

    pub fn snapshot(&self, iter: usize) -> Option<&[f64]> {
        self.snapshots
            .iter()
            .find(|(i, _)| *i == iter)
            .map(|(_, t)| t.as_slice())
    }
}
