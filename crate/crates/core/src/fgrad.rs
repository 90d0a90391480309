//! Forward-gradient estimator `v(x, u) = <grad f(x), u> u` with Gaussian
//! directions, plus Monte-Carlo checks of its first two moments.

use crate::dual::{directional_derivative, AdError, ScalarFunction};
use crate::rng::{derive_seed, GaussianStream};

/// Source of i.i.d. `N(0, I_m)` directions.
///
/// The stream for outer step `k` of trial `t` is seeded with
/// `derive_seed(base, [t, k])` on [`enter_step`](Self::enter_step), so any
/// step of any trial can be regenerated independently.
#[derive(Debug, Clone)]
pub struct DirectionSampler {
    stream: GaussianStream,
    dim: usize,
    base_seed: u64,
    trial: u64,
}

impl DirectionSampler {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self::for_trial(seed, 0, dim)
    }

    pub fn for_trial(base_seed: u64, trial: u64, dim: usize) -> Self {
        assert!(dim >= 1, "direction dimension must be at least 1");
        DirectionSampler {
            stream: GaussianStream::new(derive_seed(base_seed, &[trial])),
            dim,
            base_seed,
            trial,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    /// Repositions the stream at the start of outer step `k`.
    pub fn enter_step(&mut self, k: u64) {
        self.stream.reseed(derive_seed(self.base_seed, &[self.trial, k]));
    }

    pub fn sample(&mut self) -> Vec<f64> {
        self.stream.normal_vec(self.dim)
    }

    pub fn sample_into(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        self.stream.fill_normal(out);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardGradientSample {
    pub direction: Vec<f64>,
    pub dirderiv: f64,
    pub estimate: Vec<f64>,
}

pub fn forward_gradient<F: ScalarFunction + ?Sized>(
    f: &F,
    x: &[f64],
    u: &[f64],
) -> Result<ForwardGradientSample, AdError> {
    let (_, dirderiv) = directional_derivative(f, x, u)?;
    let estimate = u.iter().map(|&ui| dirderiv * ui).collect();
    Ok(ForwardGradientSample { direction: u.to_vec(), dirderiv, estimate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentDiagnostics {
    pub n_samples: usize,
    /// Sample mean of the estimates.
    pub mean_estimate: Vec<f64>,
    /// Sample mean of `|v|^2`.
    pub second_moment: f64,
}

impl MomentDiagnostics {
    /// Compares against the true gradient.
    pub fn report(&self, gradient: &[f64]) -> MomentReport {
        let m = gradient.len() as f64;
        let grad_sq: f64 = gradient.iter().map(|g| g * g).sum();
        let err_sq: f64 = self
            .mean_estimate
            .iter()
            .zip(gradient)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let ratio = self.second_moment / grad_sq;
        MomentReport {
            relative_error: err_sq.sqrt() / grad_sq.sqrt(),
            second_moment_ratio: ratio,
            upper_bound_ratio: m + 4.0,
            gaussian_ratio: m + 2.0,
            within_upper_bound: ratio <= m + 4.0,
        }
    }
}

/// Moment checks expressed relative to `|grad f(x)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub relative_error: f64,
    pub second_moment_ratio: f64,
    /// `m + 4`, the proven upper bound on the ratio.
    pub upper_bound_ratio: f64,
    /// `m + 2`, the exact value under Gaussian directions.
    pub gaussian_ratio: f64,
    pub within_upper_bound: bool,
}

pub fn moment_diagnostics<F: ScalarFunction + ?Sized>(
    f: &F,
    x: &[f64],
    n_samples: usize,
    sampler: &mut DirectionSampler,
) -> Result<MomentDiagnostics, AdError> {
    assert!(n_samples >= 1, "moment_diagnostics needs at least one sample");
    let m = x.len();
    let mut u = vec![0.0; m];
    let mut sum = vec![0.0; m];
    let mut sq_sum = 0.0;
    for _ in 0..n_samples {
        sampler.sample_into(&mut u);
        let (_, d) = directional_derivative(f, x, &u)?;
        let mut norm_sq = 0.0;
        for (s, &ui) in sum.iter_mut().zip(&u) {
            let v = d * ui;
            *s += v;
            norm_sq += v * v;
        }
        sq_sum += norm_sq;
    }
    let n = n_samples as f64;
    Ok(MomentDiagnostics {
        n_samples,
        mean_estimate: sum.into_iter().map(|s| s / n).collect(),
        second_moment: sq_sum / n,
    })
}
