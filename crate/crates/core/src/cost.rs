//! Differentiable cost functions.
//!
//! Every problem the optimizers see goes through [`CostFunction`]: a value, an
//! exact gradient, and an optional fixed dimension. The analytic test problems
//! live here. The neural-network cross entropy lives in [`crate::mlp`].

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("{name}: parameter `{param}` must be positive, got {value}")]
    NonPositiveParameter {
        name: &'static str,
        param: &'static str,
        value: f64,
    },
    #[error("{name} is defined on dimension {expected}, got a vector of dimension {got}")]
    DimensionMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("parameter vector must have at least one component")]
    Empty,
    #[error("parameter vector component {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("ideal learning rate is undefined at the minimum of {0}")]
    AtMinimum(&'static str),
    #[error("no closed-form ideal learning rate for {0}")]
    NoClosedForm(String),
}

/// A dense, finite, nonempty parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVec(Vec<f64>);

impl ParamVec {
    pub fn new(values: Vec<f64>) -> Result<Self, CostError> {
        if values.is_empty() {
            return Err(CostError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(CostError::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ParamVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVec {
    type Error = CostError;

    fn try_from(values: Vec<f64>) -> Result<Self, CostError> {
        Self::new(values)
    }
}

/// A differentiable cost function `f(θ)`.
///
/// Implementations are pure: `eval` and `grad` depend only on `θ`, so a single
/// instance can be shared between threads and runs.
pub trait CostFunction: Send + Sync {
    fn name(&self) -> String;

    /// The required dimension, or `None` when any dimension is accepted.
    fn dim(&self) -> Option<usize>;

    fn eval(&self, theta: &[f64]) -> f64;

    fn grad(&self, theta: &[f64]) -> Vec<f64>;

    /// Value and gradient together. Override when they share work.
    fn eval_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        (self.eval(theta), self.grad(theta))
    }

    /// Closed-form family, for the cost functions whose ideal learning rate is
    /// known exactly.
    fn closed_form(&self) -> Option<ClosedForm> {
        None
    }

    fn check_dim(&self, got: usize) -> Result<(), CostError> {
        if got == 0 {
            return Err(CostError::Empty);
        }
        match self.dim() {
            Some(expected) if expected != got => Err(CostError::DimensionMismatch {
                name: self.name(),
                expected,
                got,
            }),
            _ => Ok(()),
        }
    }
}

impl<C: CostFunction + ?Sized> CostFunction for &C {
    fn name(&self) -> String {
        (**self).name()
    }
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }
    fn eval(&self, theta: &[f64]) -> f64 {
        (**self).eval(theta)
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        (**self).grad(theta)
    }
    fn eval_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        (**self).eval_grad(theta)
    }
    fn closed_form(&self) -> Option<ClosedForm> {
        (**self).closed_form()
    }
}

impl<C: CostFunction + ?Sized> CostFunction for Box<C> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }
    fn eval(&self, theta: &[f64]) -> f64 {
        (**self).eval(theta)
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        (**self).grad(theta)
    }
    fn eval_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        (**self).eval_grad(theta)
    }
    fn closed_form(&self) -> Option<ClosedForm> {
        (**self).closed_form()
    }
}

fn positive(name: &'static str, param: &'static str, value: f64) -> Result<f64, CostError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CostError::NonPositiveParameter { name, param, value })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `f(θ) = c·(θ·θ)` in any dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    c: f64,
}

impl Quadratic {
    pub fn new(c: f64) -> Result<Self, CostError> {
        Ok(Self {
            c: positive("quadratic", "c", c)?,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl CostFunction for Quadratic {
    fn name(&self) -> String {
        format!("quadratic(c={})", self.c)
    }
    fn dim(&self) -> Option<usize> {
        None
    }
    fn eval(&self, theta: &[f64]) -> f64 {
        self.c * dot(theta, theta)
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| 2.0 * self.c * t).collect()
    }
    fn closed_form(&self) -> Option<ClosedForm> {
        Some(ClosedForm::Quadratic { c: self.c })
    }
}

/// `f(θ) = c·(θ·θ)²` in any dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartic {
    c: f64,
}

impl Quartic {
    pub fn new(c: f64) -> Result<Self, CostError> {
        Ok(Self {
            c: positive("quartic", "c", c)?,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl CostFunction for Quartic {
    fn name(&self) -> String {
        format!("quartic(c={})", self.c)
    }
    fn dim(&self) -> Option<usize> {
        None
    }
    fn eval(&self, theta: &[f64]) -> f64 {
        let r = dot(theta, theta);
        self.c * r * r
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let k = 4.0 * self.c * dot(theta, theta);
        theta.iter().map(|t| k * t).collect()
    }
    fn closed_form(&self) -> Option<ClosedForm> {
        Some(ClosedForm::Quartic { c: self.c })
    }
}

/// `f(θ) = θ₁²/a² + θ₂²/b²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    a: f64,
    b: f64,
}

impl Ellipse {
    pub fn new(a: f64, b: f64) -> Result<Self, CostError> {
        Ok(Self {
            a: positive("ellipse", "a", a)?,
            b: positive("ellipse", "b", b)?,
        })
    }

    /// `Q_m = θ₁²/aᵐ + θ₂²/bᵐ`
    pub fn q(&self, theta: &[f64], m: i32) -> f64 {
        theta[0] * theta[0] / self.a.powi(m) + theta[1] * theta[1] / self.b.powi(m)
    }
}

impl CostFunction for Ellipse {
    fn name(&self) -> String {
        format!("ellipse(a={},b={})", self.a, self.b)
    }
    fn dim(&self) -> Option<usize> {
        Some(2)
    }
    fn eval(&self, theta: &[f64]) -> f64 {
        self.q(theta, 2)
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        vec![
            2.0 * theta[0] / (self.a * self.a),
            2.0 * theta[1] / (self.b * self.b),
        ]
    }
    fn closed_form(&self) -> Option<ClosedForm> {
        Some(ClosedForm::Ellipse {
            a: self.a,
            b: self.b,
        })
    }
}

/// Logistic function, split by sign so neither branch exponentiates a large
/// positive number.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One-dimensional well with flat shoulders:
/// `f(θ) = σ[s(−θ−a)] + σ[s(θ−a)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidWell {
    s: f64,
    a: f64,
}

impl SigmoidWell {
    pub fn new(s: f64, a: f64) -> Self {
        Self { s, a }
    }
}

impl Default for SigmoidWell {
    fn default() -> Self {
        Self::new(10.0, 2.0)
    }
}

impl CostFunction for SigmoidWell {
    fn name(&self) -> String {
        format!("sigmoid_well(s={},a={})", self.s, self.a)
    }
    fn dim(&self) -> Option<usize> {
        Some(1)
    }
    fn eval(&self, theta: &[f64]) -> f64 {
        let t = theta[0];
        sigmoid(self.s * (-t - self.a)) + sigmoid(self.s * (t - self.a))
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let t = theta[0];
        let left = sigmoid(self.s * (-t - self.a));
        let right = sigmoid(self.s * (t - self.a));
        vec![self.s * (right * (1.0 - right) - left * (1.0 - left))]
    }
}

/// Beale's function on ℝ², global minimum 0 at (3, 0.5).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Beale;

impl Beale {
    fn residuals(theta: &[f64]) -> [f64; 3] {
        let (x, y) = (theta[0], theta[1]);
        [
            1.5 - x + x * y,
            2.25 - x + x * y * y,
            2.625 - x + x * y * y * y,
        ]
    }
}

impl CostFunction for Beale {
    fn name(&self) -> String {
        "beale".into()
    }
    fn dim(&self) -> Option<usize> {
        Some(2)
    }
    fn eval(&self, theta: &[f64]) -> f64 {
        Self::residuals(theta).iter().map(|r| r * r).sum()
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let (x, y) = (theta[0], theta[1]);
        let [r1, r2, r3] = Self::residuals(theta);
        let gx = 2.0 * (r1 * (y - 1.0) + r2 * (y * y - 1.0) + r3 * (y * y * y - 1.0));
        let gy = 2.0 * x * (r1 + 2.0 * r2 * y + 3.0 * r3 * y * y);
        vec![gx, gy]
    }
}

/// How the ideal learning rate of the quartic is solved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum QuarticRule {
    /// Root of the cubic for `ρ(α)`; holds `ρ` at the target to round-off.
    #[default]
    Exact,
    /// Leading-order solution `ρ/(6cθ²)`.
    LeadingOrder,
}

/// The three cost-function families whose `ρ(α)` for a plain gradient step
/// can be inverted in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    Quadratic { c: f64 },
    Quartic { c: f64 },
    Ellipse { a: f64, b: f64 },
}

impl ClosedForm {
    /// Learning rate that makes a plain gradient step from `theta` produce
    /// `ρ = rho_targ`.
    pub fn ideal_alpha(
        &self,
        theta: &[f64],
        rho_targ: f64,
        rule: QuarticRule,
    ) -> Result<f64, CostError> {
        match *self {
            ClosedForm::Quadratic { c } => Ok(rho_targ / c),
            ClosedForm::Quartic { c } => {
                let r = dot(theta, theta);
                if r == 0.0 {
                    return Err(CostError::AtMinimum("quartic"));
                }
                match rule {
                    QuarticRule::LeadingOrder => Ok(rho_targ / (6.0 * c * r)),
                    QuarticRule::Exact => Ok(quartic_step_fraction(rho_targ) / (4.0 * c * r)),
                }
            }
            ClosedForm::Ellipse { a, b } => {
                let e = Ellipse { a, b };
                let q6 = e.q(theta, 6);
                if q6 == 0.0 {
                    return Err(CostError::AtMinimum("ellipse"));
                }
                Ok(rho_targ * e.q(theta, 4) / q6)
            }
        }
    }
}

/// For the quartic, a gradient step scales θ by `(1 − u)` with `u = 4cα(θ·θ)`,
/// and `ρ = 3u/2 − u² + u³/4`. Returns the smallest positive root `u` of
/// `ρ(u) = rho`.
///
/// `ρ(u)` increases from 0 up to `u = 2 − √(4/3)`, where it peaks at
/// `≈ 0.385`; targets above the peak are clamped to it.
pub(crate) fn quartic_step_fraction(rho: f64) -> f64 {
    let poly = |u: f64| 1.5 * u - u * u + 0.25 * u * u * u;
    let u_peak = 2.0 - (4.0_f64 / 3.0).sqrt();
    if rho >= poly(u_peak) {
        return u_peak;
    }
    let (mut lo, mut hi) = (0.0, u_peak);
    // monotone on [0, u_peak]: Newton from the leading-order guess, bisection fallback
    let mut u = (2.0 * rho / 3.0).min(u_peak);
    for _ in 0..100 {
        let r = poly(u) - rho;
        if r == 0.0 {
            break;
        }
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let d = 1.5 - 2.0 * u + 0.75 * u * u;
        let next = u - r / d;
        let next = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if (next - u).abs() <= 1e-17 * u.abs().max(1e-300) {
            u = next;
            break;
        }
        u = next;
    }
    u
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClosedForm::Quadratic { c } => write!(f, "quadratic(c={c})"),
            ClosedForm::Quartic { c } => write!(f, "quartic(c={c})"),
            ClosedForm::Ellipse { a, b } => write!(f, "ellipse(a={a},b={b})"),
        }
    }
}
