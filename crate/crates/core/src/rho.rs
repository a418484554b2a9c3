//! The ρ trust metric and the learning-rate control law built on it.
//!
//! After a step from `θ_old` to `θ_new = θ_old + dθ`, the first-order estimate
//! of the new cost is `f_est = f_old + ∇f·dθ`, and
//!
//! ```text
//! ρ = |f_new − f_est| / |f_old − f_est|
//! ```
//!
//! is the relative error of that linear prediction. It is invariant under
//! `f → c·f` and `f → f + c`, and for small steps it is `O(α)`. Writing
//! `f_new − f_est = A·α²` and `f_est − f_old = B·α` gives `ρ = |αA/B|`; the
//! adaptation formula then picks `α_next = |B/A|·ρ_target` for the next step.

use thiserror::Error;

use crate::cost::{dot, CostFunction};

/// Denominators of ρ at or below this magnitude mark a degenerate step.
pub const DEGENERATE_FLOOR: f64 = 1e-300;

/// Linear-regime threshold on `|f_new − f_est|`, relative to `|f_old|`.
pub const LINEAR_REGIME_RTOL: f64 = 1e-14;

/// Smallest predicted decrease `α‖∇f‖²`, relative to `|f_old|`, at which the
/// starting search trusts a ρ reading. Below it the cost difference is mostly
/// rounding.
pub const RESOLUTION_RTOL: f64 = 1e-12;

/// Learning-rate growth factor used when the adaptation formula cannot be
/// trusted (linear regime or degenerate step).
pub const GROWTH_CAP: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RhoError {
    #[error("degenerate step: |f_old - f_est| = {denominator:e} (zero gradient or zero step)")]
    DegenerateStep { denominator: f64 },
    #[error("learning rate must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("target rho must lie in (0, 1), got {0}")]
    BadTarget(f64),
    #[error(
        "linear regime: f_new - f_est is at round-off level, the adaptation formula is undefined"
    )]
    LinearRegime,
    #[error(
        "rho targets must satisfy 0 < rho_min < rho_targ < rho_max < 1, got ({min}, {targ}, {max})"
    )]
    BadTargets { min: f64, targ: f64, max: f64 },
    #[error("stationary start: gradient is zero at the initial point")]
    StationaryStart,
    #[error("non-finite value in rho triple")]
    NonFinite,
}

/// `(f_old, f_new, f_est)` for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoTriple {
    pub f_old: f64,
    pub f_new: f64,
    pub f_est: f64,
}

impl RhoTriple {
    pub fn new(f_old: f64, f_new: f64, f_est: f64) -> Self {
        Self {
            f_old,
            f_new,
            f_est,
        }
    }

    /// Triple for the step `dθ` taken with gradient `g` at `θ_old`.
    pub fn from_step(f_old: f64, f_new: f64, grad: &[f64], dtheta: &[f64]) -> Self {
        Self::new(f_old, f_new, f_old + dot(grad, dtheta))
    }

    fn is_finite(&self) -> bool {
        self.f_old.is_finite() && self.f_new.is_finite() && self.f_est.is_finite()
    }
}

/// The target value of ρ and the acceptable band around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoTargets {
    pub rho_min: f64,
    pub rho_targ: f64,
    pub rho_max: f64,
}

impl RhoTargets {
    pub fn new(rho_min: f64, rho_targ: f64, rho_max: f64) -> Result<Self, RhoError> {
        if 0.0 < rho_min && rho_min < rho_targ && rho_targ < rho_max && rho_max < 1.0 {
            Ok(Self {
                rho_min,
                rho_targ,
                rho_max,
            })
        } else {
            Err(RhoError::BadTargets {
                min: rho_min,
                targ: rho_targ,
                max: rho_max,
            })
        }
    }

    /// Open-interval membership, `ρ ∈ (ρ_min, ρ_max)`.
    pub fn in_band(&self, rho: f64) -> bool {
        rho > self.rho_min && rho < self.rho_max
    }
}

impl Default for RhoTargets {
    fn default() -> Self {
        Self {
            rho_min: 0.01,
            rho_targ: 0.1,
            rho_max: 0.15,
        }
    }
}

/// Leading-order coefficients: `f_new − f_est = A·α²`, `f_est − f_old = B·α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ABFactors {
    pub a: f64,
    pub b: f64,
}

impl ABFactors {
    /// `ρ = |αA/B|`
    pub fn rho(&self, alpha: f64) -> f64 {
        (alpha * self.a / self.b).abs()
    }
}

/// `ρ = |(f_new − f_est)/(f_old − f_est)|`.
pub fn compute_rho(t: &RhoTriple) -> Result<f64, RhoError> {
    if !t.is_finite() {
        return Err(RhoError::NonFinite);
    }
    let denominator = (t.f_old - t.f_est).abs();
    if denominator <= DEGENERATE_FLOOR {
        return Err(RhoError::DegenerateStep { denominator });
    }
    Ok((t.f_new - t.f_est).abs() / denominator)
}

/// ρ with the denominator floored at [`DEGENERATE_FLOOR`]. Never fails; the
/// flag reports whether the floor (or a non-finite input) was hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoReading {
    pub rho: f64,
    pub degenerate: bool,
}

pub fn measure_rho(t: &RhoTriple) -> RhoReading {
    match compute_rho(t) {
        Ok(rho) => RhoReading {
            rho,
            degenerate: false,
        },
        Err(_) => {
            let denominator = (t.f_old - t.f_est).abs().max(DEGENERATE_FLOOR);
            RhoReading {
                rho: (t.f_new - t.f_est).abs() / denominator,
                degenerate: true,
            }
        }
    }
}

pub fn compute_ab(t: &RhoTriple, alpha: f64) -> Result<ABFactors, RhoError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(RhoError::BadAlpha(alpha));
    }
    Ok(ABFactors {
        a: (t.f_new - t.f_est) / (alpha * alpha),
        b: (t.f_est - t.f_old) / alpha,
    })
}

/// The adaptation formula, `α_{n+1} = |B_n/A_n|·ρ_target`.
///
/// Fails with [`RhoError::LinearRegime`] when `|A|α² ≤ 1e-14·|f_old|` (ρ is
/// then round-off) and with [`RhoError::DegenerateStep`] when `B` vanishes.
pub fn adaptation_formula(t: &RhoTriple, alpha: f64, rho_target: f64) -> Result<f64, RhoError> {
    if !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(RhoError::BadTarget(rho_target));
    }
    let ab = compute_ab(t, alpha)?;
    compute_rho(t)?;
    if (ab.a * alpha * alpha).abs() <= LINEAR_REGIME_RTOL * t.f_old.abs() || ab.a == 0.0 {
        return Err(RhoError::LinearRegime);
    }
    let next = (ab.b / ab.a).abs() * rho_target;
    if next.is_finite() && next > 0.0 {
        Ok(next)
    } else {
        Err(RhoError::LinearRegime)
    }
}

/// Outcome of one learning-rate update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaUpdate {
    pub alpha: f64,
    /// The adaptation formula was not applicable and `α` was multiplied by
    /// [`GROWTH_CAP`] instead.
    pub guarded: bool,
}

/// Adaptation formula with the linear-regime guard: when the formula is
/// undefined the learning rate grows by [`GROWTH_CAP`].
pub fn next_alpha(t: &RhoTriple, alpha: f64, rho_target: f64) -> AlphaUpdate {
    match adaptation_formula(t, alpha, rho_target) {
        Ok(alpha) => AlphaUpdate {
            alpha,
            guarded: false,
        },
        Err(_) => AlphaUpdate {
            alpha: alpha * GROWTH_CAP,
            guarded: true,
        },
    }
}

/// Staged target: when ρ is below target, move only a quarter of the way to
/// `ρ_targ` in log space; otherwise go straight to `ρ_targ`.
pub fn get_rho_prime(rho: f64, rho_targ: f64) -> f64 {
    if rho < rho_targ {
        let rho = rho.max(DEGENERATE_FLOOR);
        let r = 0.75 * (rho / rho_targ).log10();
        10f64.powf(r) * rho_targ
    } else {
        rho_targ
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartingAlpha {
    pub alpha: f64,
    pub rho: f64,
    pub accepted: bool,
    /// Number of trial steps evaluated.
    pub trials: usize,
}

/// Searches for an initial learning rate whose trial step from `theta0` lands
/// ρ inside `(ρ_min, ρ_max)`. `θ` is never moved. Trials whose predicted
/// decrease is below [`RESOLUTION_RTOL`]`·|f_old|` grow α tenfold without
/// reading ρ.
///
/// On success the accepted `(α, ρ)` pair is returned. After `nrep` failed
/// trials the result carries the updated `α` (the next one that would have
/// been tried), the last measured `ρ`, and `accepted = false`.
pub fn get_starting_alpha(
    cf: &dyn CostFunction,
    theta0: &[f64],
    alpha_seed: f64,
    targets: &RhoTargets,
    nrep: usize,
) -> Result<StartingAlpha, RhoError> {
    if !(alpha_seed > 0.0 && alpha_seed.is_finite()) {
        return Err(RhoError::BadAlpha(alpha_seed));
    }
    let (f_old, g) = cf.eval_grad(theta0);
    if g.iter().all(|&x| x == 0.0) {
        return Err(RhoError::StationaryStart);
    }
    let g2 = dot(&g, &g);
    let mut alpha = alpha_seed;
    let mut rho = f64::NAN;
    let mut trial = theta0.to_vec();
    for j in 0..nrep {
        for ((t, &t0), &gi) in trial.iter_mut().zip(theta0).zip(&g) {
            *t = t0 - alpha * gi;
        }
        let f_new = cf.eval(&trial);
        if !f_new.is_finite() {
            alpha /= GROWTH_CAP;
            continue;
        }
        if alpha * g2 < RESOLUTION_RTOL * f_old.abs() {
            alpha *= GROWTH_CAP;
            continue;
        }
        let triple = RhoTriple::new(f_old, f_new, f_old - alpha * g2);
        rho = measure_rho(&triple).rho;
        if targets.in_band(rho) {
            return Ok(StartingAlpha {
                alpha,
                rho,
                accepted: true,
                trials: j + 1,
            });
        }
        let rho_prime = get_rho_prime(rho, targets.rho_targ);
        alpha = next_alpha(&triple, alpha, rho_prime).alpha;
    }
    Ok(StartingAlpha {
        alpha,
        rho,
        accepted: false,
        trials: nrep,
    })
}
