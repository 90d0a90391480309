//! Iteration schemes: static forward gradient descent, online forward
//! gradient descent with `ell` inner updates per time step, and the online
//! proximal forward-gradient method. Also an exact-gradient proximal
//! gradient solver used as an oracle.

use thiserror::Error;

use crate::dual::{AdError, ScalarFunction};
use crate::fgrad::{forward_gradient, DirectionSampler};
use crate::problems::{ObjectiveSequence, Regularizer};

/// Runs abort once the gap exceeds this multiple of the initial gap.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("step size {alpha} violates alpha < 2/(beta (m+4)) = {limit}")]
    StepTooLarge { alpha: f64, limit: f64 },
    #[error("inner iteration count must be at least 1")]
    ZeroInner,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("objective sequence has {available} instances, run needs {needed}")]
    SequenceTooShort { available: usize, needed: usize },
    #[error("non-finite iterate at step {k}; step rejected")]
    NonFinite { k: usize },
    #[error("diverged at step {k}: gap {gap:e} exceeds {threshold:e}")]
    Diverged { k: usize, gap: f64, threshold: f64 },
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// Constant step size; every scheme here uses one value for all `k`, `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize(f64);

impl StepSize {
    pub fn new(alpha: f64) -> Result<Self, OptimError> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(StepSize(alpha))
        } else {
            Err(OptimError::InvalidStep(alpha))
        }
    }

    /// `1 / (beta (m + 4))`.
    pub fn forward_gradient_default(beta: f64, m: usize) -> Result<Self, OptimError> {
        Self::new(1.0 / (beta * (m as f64 + 4.0)))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// `L_{k+1}(x_{k+1}) - L*_{k+1}`, recorded at the handoff.
    pub loss_gap: f64,
    pub dist: Option<f64>,
    /// `L_{k+1}(x_{k+1}) - L_k(x_{k+1})`.
    pub drift: Option<f64>,
    /// `|grad g_k(x_k)|` at the start of the step.
    pub grad_norm: Option<f64>,
    pub bound: Option<f64>,
}

impl TraceRow {
    fn new(k: usize, loss_gap: f64) -> Self {
        TraceRow { k, loss_gap, dist: None, drift: None, grad_norm: None, bound: None }
    }
}

/// Per-trial record; row `k` describes the iterate after `k + 1` outer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingTrace {
    pub trial: u64,
    pub initial_gap: f64,
    pub rows: Vec<TraceRow>,
    pub final_x: Vec<f64>,
}

impl TrackingTrace {
    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss_gap).collect()
    }

    pub fn max_drift(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.drift).fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
    }

    pub fn max_grad_norm(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.grad_norm)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
    }
}

/// Settings shared by the online runners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub step: StepSize,
    /// Inner updates per time step (`ell`).
    pub inner: usize,
    /// Outer steps `K`.
    pub steps: usize,
    /// Smoothness constant; when set, `run_online` enforces
    /// `alpha < 2 / (beta (m + 4))`.
    pub beta: Option<f64>,
}

fn finite(x: &[f64], k: usize) -> Result<(), OptimError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OptimError::NonFinite { k })
    }
}

/// `x - alpha v(x, u)` for a given direction.
pub fn fgd_step_with_direction<F: ScalarFunction + ?Sized>(
    f: &F,
    x: &[f64],
    alpha: f64,
    u: &[f64],
) -> Result<Vec<f64>, OptimError> {
    let v = forward_gradient(f, x, u)?;
    let next: Vec<f64> = x.iter().zip(&v.estimate).map(|(xi, vi)| xi - alpha * vi).collect();
    finite(&next, 0)?;
    Ok(next)
}

/// One forward-gradient update with a freshly sampled direction.
pub fn fgd_step<F: ScalarFunction + ?Sized>(
    f: &F,
    x: &[f64],
    alpha: f64,
    sampler: &mut DirectionSampler,
) -> Result<Vec<f64>, OptimError> {
    StepSize::new(alpha)?;
    let u = sampler.sample();
    fgd_step_with_direction(f, x, alpha, &u)
}

fn divergence_threshold(gap0: f64) -> f64 {
    if gap0 > 0.0 {
        DIVERGENCE_FACTOR * gap0
    } else {
        f64::INFINITY
    }
}

/// `steps` forward-gradient iterations on a fixed objective.
pub fn run_static<F: ScalarFunction + ?Sized>(
    f: &F,
    optimum: f64,
    x0: &[f64],
    step: StepSize,
    steps: usize,
    sampler: &mut DirectionSampler,
) -> Result<TrackingTrace, OptimError> {
    if steps == 0 {
        return Err(OptimError::ZeroHorizon);
    }
    let alpha = step.get();
    let gap0 = f.value(x0)? - optimum;
    let threshold = divergence_threshold(gap0);
    let mut x = x0.to_vec();
    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        sampler.enter_step(k as u64);
        x = fgd_step(f, &x, alpha, sampler).map_err(|e| at_step(e, k))?;
        let gap = f.value(&x)? - optimum;
        if !(gap <= threshold) {
            return Err(OptimError::Diverged { k, gap, threshold });
        }
        rows.push(TraceRow::new(k, gap));
    }
    Ok(TrackingTrace { trial: sampler.trial(), initial_gap: gap0, rows, final_x: x })
}

fn at_step(e: OptimError, k: usize) -> OptimError {
    match e {
        OptimError::NonFinite { .. } => OptimError::NonFinite { k },
        other => other,
    }
}

fn check_run<S: ObjectiveSequence + ?Sized>(seq: &S, opts: &RunOptions) -> Result<(), OptimError> {
    if opts.inner == 0 {
        return Err(OptimError::ZeroInner);
    }
    if opts.steps == 0 {
        return Err(OptimError::ZeroHorizon);
    }
    if seq.len() <= opts.steps {
        return Err(OptimError::SequenceTooShort { available: seq.len(), needed: opts.steps + 1 });
    }
    Ok(())
}

/// Online forward gradient descent: `ell` updates against `L_k`, then the
/// objective advances and the gap of `x_{k+1}` on `L_{k+1}` is recorded.
pub fn run_online<S: ObjectiveSequence + ?Sized>(
    seq: &S,
    x0: &[f64],
    opts: &RunOptions,
    sampler: &mut DirectionSampler,
) -> Result<TrackingTrace, OptimError> {
    check_run(seq, opts)?;
    let alpha = opts.step.get();
    if let Some(beta) = opts.beta {
        let limit = 2.0 / (beta * (seq.dim() as f64 + 4.0));
        if alpha >= limit {
            return Err(OptimError::StepTooLarge { alpha, limit });
        }
    }
    online_loop(seq, x0, opts, sampler, |g, _reg, x, sampler| fgd_step(g, x, alpha, sampler), false)
}

/// `prox_{tau h}(v)`; `tau = 0` returns `v` for every `h`.
pub fn prox_apply(h: Regularizer, v: &[f64], tau: f64) -> Result<Vec<f64>, OptimError> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(OptimError::InvalidStep(tau));
    }
    Ok(h.prox(v, tau))
}

pub fn prox_fgd_step_with_direction<F: ScalarFunction + ?Sized>(
    g: &F,
    h: Regularizer,
    x: &[f64],
    gamma: f64,
    u: &[f64],
) -> Result<Vec<f64>, OptimError> {
    let v = forward_gradient(g, x, u)?;
    let shifted: Vec<f64> = x.iter().zip(&v.estimate).map(|(xi, vi)| xi - gamma * vi).collect();
    let next = prox_apply(h, &shifted, gamma)?;
    finite(&next, 0)?;
    Ok(next)
}

/// `prox_{gamma h}(x - gamma v(x, u))` with a freshly sampled direction.
pub fn prox_fgd_step<F: ScalarFunction + ?Sized>(
    g: &F,
    h: Regularizer,
    x: &[f64],
    gamma: f64,
    sampler: &mut DirectionSampler,
) -> Result<Vec<f64>, OptimError> {
    StepSize::new(gamma)?;
    let u = sampler.sample();
    prox_fgd_step_with_direction(g, h, x, gamma, &u)
}

/// Online proximal forward-gradient method with `ell` updates per step.
pub fn run_prox_online<S: ObjectiveSequence + ?Sized>(
    seq: &S,
    x0: &[f64],
    opts: &RunOptions,
    sampler: &mut DirectionSampler,
) -> Result<TrackingTrace, OptimError> {
    check_run(seq, opts)?;
    let gamma = opts.step.get();
    online_loop(seq, x0, opts, sampler, |g, reg, x, sampler| prox_fgd_step(g, reg, x, gamma, sampler), true)
}

fn online_loop<S, Step>(
    seq: &S,
    x0: &[f64],
    opts: &RunOptions,
    sampler: &mut DirectionSampler,
    mut step: Step,
    record_grad: bool,
) -> Result<TrackingTrace, OptimError>
where
    S: ObjectiveSequence + ?Sized,
    Step: FnMut(&S::Smooth, Regularizer, &[f64], &mut DirectionSampler) -> Result<Vec<f64>, OptimError>,
{
    let gap0 = seq.value(0, x0)? - seq.optimal_value(0);
    let threshold = divergence_threshold(gap0);
    let mut x = x0.to_vec();
    let mut rows = Vec::with_capacity(opts.steps);
    for k in 0..opts.steps {
        let g = seq.smooth(k);
        let reg = seq.regularizer(k);
        let grad_norm = if record_grad {
            Some(g.gradient(&x)?.iter().map(|v| v * v).sum::<f64>().sqrt())
        } else {
            None
        };
        sampler.enter_step(k as u64);
        for _ in 0..opts.inner {
            x = step(g, reg, &x, sampler).map_err(|e| at_step(e, k))?;
        }
        let now = seq.value(k, &x)?;
        let next = seq.value(k + 1, &x)?;
        let gap = next - seq.optimal_value(k + 1);
        if !(gap <= threshold) {
            return Err(OptimError::Diverged { k, gap, threshold });
        }
        rows.push(TraceRow {
            k,
            loss_gap: gap,
            dist: seq.distance(k + 1, &x),
            drift: Some(next - now),
            grad_norm,
            bound: None,
        });
    }
    Ok(TrackingTrace { trial: sampler.trial(), initial_gap: gap0, rows, final_x: x })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxGradientOptions {
    pub step: f64,
    /// Stop once `|x_{k+1} - x_k| / step` (the gradient-mapping norm) is
    /// at most this.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxGradientResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Exact-gradient proximal gradient, `x <- prox_{s h}(x - s grad g(x))`.
pub fn proximal_gradient<F: ScalarFunction + ?Sized>(
    g: &F,
    h: Regularizer,
    x0: &[f64],
    opts: &ProxGradientOptions,
) -> Result<ProxGradientResult, AdError> {
    let mut x = x0.to_vec();
    let mut shifted = vec![0.0; x.len()];
    for it in 0..opts.max_iter {
        let grad = g.gradient(&x)?;
        for ((s, xi), gi) in shifted.iter_mut().zip(&x).zip(&grad) {
            *s = xi - opts.step * gi;
        }
        let next = h.prox(&shifted, opts.step);
        let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        x = next;
        if moved / opts.step <= opts.tol {
            return Ok(ProxGradientResult { x, iterations: it + 1, converged: true });
        }
    }
    Ok(ProxGradientResult { x, iterations: opts.max_iter, converged: false })
}

/// Iterates `x_0, ..., x_iters` of exact-gradient proximal gradient.
pub fn proximal_gradient_path<F: ScalarFunction + ?Sized>(
    g: &F,
    h: Regularizer,
    x0: &[f64],
    step: f64,
    iters: usize,
) -> Result<Vec<Vec<f64>>, AdError> {
    let mut path = Vec::with_capacity(iters + 1);
    path.push(x0.to_vec());
    for _ in 0..iters {
        let x = path.last().expect("path starts nonempty");
        let grad = g.gradient(x)?;
        let shifted: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
        path.push(h.prox(&shifted, step));
    }
    Ok(path)
}
