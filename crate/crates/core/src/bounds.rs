//! Closed-form rates and tracking bounds for the forward-gradient schemes,
//! plus the proximal quantities (`D_h`, proximal-PL ratio, path radius)
//! needed to evaluate them on concrete instances.
//!
//! Every bound is evaluated exactly as stated, including where it is
//! visibly conservative.

use thiserror::Error;

use crate::dual::{AdError, ScalarFunction};
use crate::problems::Regularizer;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("alpha = {alpha} must lie in (0, {limit})")]
    AlphaOutOfRange { alpha: f64, limit: f64 },
    #[error("gamma = {gamma} must lie in (0, {gamma_max}]")]
    GammaOutOfRange { gamma: f64, gamma_max: f64 },
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error("loss gap must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// Constants entering the tracking bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub mu: f64,
    pub beta: f64,
    pub m: usize,
    pub alpha: f64,
    pub ell: usize,
    pub eta0: f64,
    pub eta_star: f64,
    /// `L_0(x_0) - L_0^*`.
    pub gap0: f64,
    /// Quadratic-growth constant of the composite objective.
    pub xi: f64,
    /// Gradient bound of the smooth part.
    pub c1: f64,
    /// Subgradient bound of the nonsmooth part.
    pub c2: f64,
}

impl BoundInputs {
    fn check_pl(&self) -> Result<(), BoundError> {
        if !(self.mu > 0.0 && self.mu <= self.beta && self.beta.is_finite()) {
            return Err(BoundError::InvalidConstants(format!(
                "need 0 < mu <= beta, got mu={}, beta={}",
                self.mu, self.beta
            )));
        }
        if self.ell == 0 {
            return Err(BoundError::InvalidConstants("ell must be at least 1".into()));
        }
        if !(self.eta0 >= 0.0 && self.eta_star >= 0.0 && self.gap0 >= 0.0) {
            return Err(BoundError::InvalidConstants("drifts and gap0 must be nonnegative".into()));
        }
        Ok(())
    }

    /// `G_1 = 2 c_1 (c_1 + c_2) / beta`.
    pub fn g1(&self) -> f64 {
        2.0 * self.c1 * (self.c1 + self.c2) / self.beta
    }
}

/// `gamma = alpha (1 - (beta/2)(m+4) alpha)`, the guaranteed per-step
/// decrease coefficient of one forward-gradient update.
pub fn gamma_of_alpha(alpha: f64, beta: f64, m: usize) -> Result<f64, BoundError> {
    let limit = 2.0 / (beta * (m as f64 + 4.0));
    if !(alpha > 0.0 && alpha < limit) {
        return Err(BoundError::AlphaOutOfRange { alpha, limit });
    }
    Ok(alpha * (1.0 - 0.5 * beta * (m as f64 + 4.0) * alpha))
}

/// `(1 - mu/((m+4) beta))^k gap0`.
pub fn bound_static(k: usize, mu: f64, beta: f64, m: usize, gap0: f64) -> f64 {
    static_rate(mu, beta, m).powi(k as i32) * gap0
}

pub fn static_rate(mu: f64, beta: f64, m: usize) -> f64 {
    1.0 - mu / ((m as f64 + 4.0) * beta)
}

/// `gamma_tilde = min(gamma_of_alpha, 1/(2 mu ell))`.
pub fn gamma_max(inputs: &BoundInputs) -> Result<f64, BoundError> {
    inputs.check_pl()?;
    let g = gamma_of_alpha(inputs.alpha, inputs.beta, inputs.m)?;
    Ok(g.min(1.0 / (2.0 * inputs.mu * inputs.ell as f64)))
}

/// `min(gamma_of_alpha, 0.99/(2 mu ell))`.
pub fn default_gamma(inputs: &BoundInputs) -> Result<f64, BoundError> {
    inputs.check_pl()?;
    let g = gamma_of_alpha(inputs.alpha, inputs.beta, inputs.m)?;
    Ok(g.min(0.99 / (2.0 * inputs.mu * inputs.ell as f64)))
}

/// Tracking-error bound of online forward gradient descent:
/// `asymptotic + transient_coeff * rate^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingBound {
    /// `(eta0 + eta*) / (mu^2 gamma ell)`, the limsup of the squared distance.
    pub asymptotic: f64,
    /// `(2/mu) gap0`.
    pub transient_coeff: f64,
    /// `1 - 2 mu gamma ell`.
    pub rate: f64,
    /// `(eta0 + eta*) / (2 mu gamma ell)`, the limsup of the loss gap.
    pub gap_limsup: f64,
}

impl TrackingBound {
    pub fn new(inputs: &BoundInputs, gamma: f64) -> Result<Self, BoundError> {
        let gmax = gamma_max(inputs)?;
        if !(gamma > 0.0 && gamma <= gmax) {
            return Err(BoundError::GammaOutOfRange { gamma, gamma_max: gmax });
        }
        let BoundInputs { mu, ell, eta0, eta_star, gap0, .. } = *inputs;
        let mgl = mu * gamma * ell as f64;
        Ok(TrackingBound {
            asymptotic: (eta0 + eta_star) / (mu * mgl),
            transient_coeff: 2.0 / mu * gap0,
            rate: 1.0 - 2.0 * mgl,
            gap_limsup: (eta0 + eta_star) / (2.0 * mgl),
        })
    }

    pub fn transient(&self, k: usize) -> f64 {
        self.transient_coeff * self.rate.powi(k as i32)
    }

    /// Bound on `E |x_{k+1} - proj(x_{k+1})|^2`.
    pub fn at(&self, k: usize) -> f64 {
        self.asymptotic + self.transient(k)
    }
}

pub fn bound_tracking(k: usize, inputs: &BoundInputs, gamma: f64) -> Result<f64, BoundError> {
    Ok(TrackingBound::new(inputs, gamma)?.at(k))
}

/// Tracking-error bound of the online proximal forward-gradient method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxTrackingBound {
    /// `2 (eta0 + eta* + 2 G1 sqrt(m+3)) / (xi (1 - (1 - mu/beta)^ell))`.
    pub asymptotic: f64,
    /// `(2/xi) gap0`.
    pub transient_coeff: f64,
    /// `(1 - mu/beta)^ell`, applied once per outer step.
    pub rate: f64,
    /// `(eta0 + eta* + G1 sqrt(m+3)) / (1 - (1 - mu/beta)^ell)`, the limsup
    /// of the loss gap.
    pub gap_limsup: f64,
}

impl ProxTrackingBound {
    pub fn new(inputs: &BoundInputs) -> Result<Self, BoundError> {
        inputs.check_pl()?;
        if !(inputs.xi > 0.0) {
            return Err(BoundError::InvalidConstants(format!("xi must be positive, got {}", inputs.xi)));
        }
        let BoundInputs { mu, beta, m, ell, eta0, eta_star, gap0, xi, .. } = *inputs;
        let rate = (1.0 - mu / beta).powi(ell as i32);
        let denom = 1.0 - rate;
        let g1 = inputs.g1();
        let root = (m as f64 + 3.0).sqrt();
        Ok(ProxTrackingBound {
            asymptotic: 2.0 / (xi * denom) * (eta0 + eta_star + 2.0 * g1 * root),
            transient_coeff: 2.0 / xi * gap0,
            rate,
            gap_limsup: (eta0 + eta_star + g1 * root) / denom,
        })
    }

    pub fn transient(&self, k: usize) -> f64 {
        self.transient_coeff * self.rate.powi(k as i32)
    }

    pub fn at(&self, k: usize) -> f64 {
        self.asymptotic + self.transient(k)
    }
}

pub fn bound_prox_tracking(k: usize, inputs: &BoundInputs) -> Result<f64, BoundError> {
    Ok(ProxTrackingBound::new(inputs)?.at(k))
}

/// `(lower, upper)` slacks of `mu/2 d^2 <= L - L* <= beta/2 d^2`.
pub fn quadratic_growth_margins<F, D>(
    f: &F,
    optimum: f64,
    x: &[f64],
    mu: f64,
    beta: f64,
    dist: D,
) -> Result<(f64, f64), BoundError>
where
    F: ScalarFunction + ?Sized,
    D: Fn(&[f64]) -> f64,
{
    let gap = f.value(x)? - optimum;
    let d2 = dist(x).powi(2);
    Ok((gap - 0.5 * mu * d2, 0.5 * beta * d2 - gap))
}

/// `D_h(x, alpha) = -2 alpha min_y { <grad g(x), y - x> + alpha/2 |y - x|^2
/// + h(y) - h(x) }`, evaluated at the minimizer
/// `y = prox_{h/alpha}(x - grad g(x)/alpha)`.
pub fn compute_dh<G: ScalarFunction + ?Sized>(g: &G, h: Regularizer, x: &[f64], alpha: f64) -> Result<f64, BoundError> {
    if !(alpha > 0.0) {
        return Err(BoundError::InvalidConstants(format!("alpha must be positive, got {alpha}")));
    }
    let grad = g.gradient(x)?;
    let shifted: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - gi / alpha).collect();
    let y = h.prox(&shifted, 1.0 / alpha);
    let mut lin = 0.0;
    let mut sq = 0.0;
    for ((yi, xi), gi) in y.iter().zip(x).zip(&grad) {
        let d = yi - xi;
        lin += gi * d;
        sq += d * d;
    }
    let inner = lin + 0.5 * alpha * sq + h.value(&y) - h.value(x);
    Ok((-2.0 * alpha * inner).max(0.0))
}

/// `D_h(x, beta) / (2 (L(x) - L*))`; its minimum over sampled points is an
/// empirical proximal-PL constant.
pub fn prox_pl_ratio<G: ScalarFunction + ?Sized>(
    g: &G,
    h: Regularizer,
    x: &[f64],
    beta: f64,
    loss_gap: f64,
) -> Result<f64, BoundError> {
    if !(loss_gap > 0.0) {
        return Err(BoundError::NonPositiveGap(loss_gap));
    }
    Ok(compute_dh(g, h, x, beta)? / (2.0 * loss_gap))
}

/// Radius `sqrt(2 gap0 / beta) / (1 - sqrt(1 - mu/beta))` containing the
/// whole exact proximal-gradient path from `x_0`.
pub fn path_radius(mu: f64, beta: f64, gap0: f64) -> Result<f64, BoundError> {
    if !(mu > 0.0 && mu <= beta) {
        return Err(BoundError::InvalidConstants(format!("need 0 < mu <= beta, got mu={mu}, beta={beta}")));
    }
    if !(gap0 >= 0.0) {
        return Err(BoundError::InvalidConstants(format!("gap0 must be nonnegative, got {gap0}")));
    }
    Ok((2.0 / beta * gap0).sqrt() / (1.0 - (1.0 - mu / beta).sqrt()))
}
