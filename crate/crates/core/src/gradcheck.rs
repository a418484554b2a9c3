//! Central-difference verification of analytic gradients.

use thiserror::Error;

use crate::cost::CostFunction;

pub const DEFAULT_STEP: f64 = 1e-6;

/// Floor on the error denominator, for gradients that vanish identically.
const SCALE_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradCheckError {
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
    #[error("non-finite cost or gradient while probing component {index}")]
    NonFinite { index: usize },
    #[error("gradient has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest component error, scaled by the gradient magnitude.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Central differences `(f(θ+h·eᵢ) − f(θ−h·eᵢ))/2h`.
pub fn central_difference(
    cf: &dyn CostFunction,
    theta: &[f64],
    h: f64,
) -> Result<Vec<f64>, GradCheckError> {
    if h.is_nan() || h <= 0.0 {
        return Err(GradCheckError::BadStep(h));
    }
    let mut probe = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = cf.eval(&probe);
        probe[i] = orig - h;
        let down = cf.eval(&probe);
        probe[i] = orig;
        let d = (up - down) / (2.0 * h);
        if !d.is_finite() {
            return Err(GradCheckError::NonFinite { index: i });
        }
        out.push(d);
    }
    Ok(out)
}

/// Compares `cf.grad(θ)` against central differences.
///
/// The error for component `i` is `|gᵢ − nᵢ| / max(|gᵢ|, |nᵢ|, ‖g‖∞, 1e-8)`:
/// relative to the component, but never to a scale smaller than the gradient
/// as a whole. Pure per-component relative error is dominated by
/// finite-difference round-off on components that are tiny compared to the
/// rest of the gradient.
pub fn gradient_check(
    cf: &dyn CostFunction,
    theta: &[f64],
    h: f64,
) -> Result<GradCheckReport, GradCheckError> {
    let analytic = cf.grad(theta);
    if analytic.len() != theta.len() {
        return Err(GradCheckError::DimensionMismatch {
            expected: theta.len(),
            got: analytic.len(),
        });
    }
    if let Some(index) = analytic.iter().position(|g| !g.is_finite()) {
        return Err(GradCheckError::NonFinite { index });
    }
    let numeric = central_difference(cf, theta, h)?;
    let scale = analytic.iter().fold(SCALE_FLOOR, |acc, g| acc.max(g.abs()));

    let (worst_index, max_rel_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / scale.max(a.abs()).max(n.abs()))
        .enumerate()
        .fold(
            (0, 0.0_f64),
            |best, (i, e)| if e > best.1 { (i, e) } else { best },
        );

    Ok(GradCheckReport {
        max_rel_error,
        worst_index,
        analytic,
        numeric,
    })
}
