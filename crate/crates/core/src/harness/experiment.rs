use rayon::prelude::*;

use super::config::{ExperimentConfig, Mode, StepChoice};
use super::HarnessError;
use crate::bounds::{
    bound_static, default_gamma, gamma_of_alpha, prox_pl_ratio, BoundInputs, ProxTrackingBound, TrackingBound,
};
use crate::dual::ScalarFunction;
use crate::fgrad::{moment_diagnostics, DirectionSampler, MomentReport};
use crate::optim::{run_online, run_prox_online, RunOptions, StepSize, TrackingTrace};
use crate::problems::{
    lsq_constants, pseudo_inverse, DriftConfig, DriftingLsqGenerator, LinearLsqInstance, LsqSequence,
    ObjectiveSequence, StaticSequence,
};
use crate::rng::{derive_seed, GaussianStream};

/// Substream of the shared starting point; trial `t` uses `t + 1`.
const START_STREAM: u64 = 0;
const PROBLEM_STREAM: u64 = u64::MAX;
const ESTIMATE_STREAM: u64 = u64::MAX - 1;
/// Points sampled around the minimizer to estimate proximal constants.
const ESTIMATE_SAMPLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub k: usize,
    pub mean_gap: f64,
    /// Population standard deviation over trials.
    pub std_gap: f64,
    pub mean_dist_sq: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateTrace {
    pub rows: Vec<AggregateRow>,
}

impl AggregateTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mean_gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_gap).collect()
    }

    /// Mean of `mean_gap` over the last `fraction` of the rows.
    pub fn tail_mean_gap(&self, fraction: f64) -> f64 {
        let n = self.rows.len();
        let take = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        let tail = &self.rows[n - take..];
        tail.iter().map(|r| r.mean_gap).sum::<f64>() / take as f64
    }

    /// Averages trial traces row by row, in the given order.
    pub fn from_trials(traces: &[TrackingTrace], bound: impl Fn(usize) -> f64) -> Self {
        assert!(!traces.is_empty(), "aggregation needs at least one trial");
        let steps = traces[0].rows.len();
        let t = traces.len() as f64;
        let rows = (0..steps)
            .map(|k| {
                let mean = traces.iter().map(|tr| tr.rows[k].loss_gap).sum::<f64>() / t;
                let var = traces.iter().map(|tr| (tr.rows[k].loss_gap - mean).powi(2)).sum::<f64>() / t;
                let dist_sq = traces
                    .iter()
                    .map(|tr| tr.rows[k].dist.map_or(f64::NAN, |d| d * d))
                    .sum::<f64>()
                    / t;
                AggregateRow { k, mean_gap: mean, std_gap: var.sqrt(), mean_dist_sq: dist_sq, bound: bound(k) }
            })
            .collect();
        AggregateTrace { rows }
    }
}

/// Constants and estimates used to fill the bound column.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub trials: usize,
    pub mu: f64,
    pub beta: f64,
    /// Step actually used by the iteration (`alpha` or `gamma`).
    pub step: f64,
    /// Decrease coefficient entering the tracking bound (`track` only).
    pub gamma: Option<f64>,
    pub gap0: f64,
    pub eta0_hat: f64,
    pub eta_star_hat: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// Quadratic-growth constant, estimated from samples.
    pub xi_hat: Option<f64>,
    /// Constant part of the bound column.
    pub asymptotic: Option<f64>,
    pub gap_limsup: Option<f64>,
    /// Set when the PL constant vanishes and no bound applies.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub trace: AggregateTrace,
    pub summary: RunSummary,
    /// Per-trial traces in trial order.
    pub trials: Vec<TrackingTrace>,
    pub x0: Vec<f64>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateTrace, HarnessError> {
    Ok(run_experiment_report(config)?.trace)
}

pub fn run_experiment_report(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    match config.mode {
        Mode::Static => run_static_mode(config),
        Mode::Track => run_track_mode(config),
        Mode::ProxTrack => run_prox_mode(config),
        other => Err(HarnessError::Unsupported(other)),
    }
}

fn generator(config: &ExperimentConfig) -> Result<DriftingLsqGenerator, HarnessError> {
    Ok(DriftingLsqGenerator::new(&DriftConfig {
        m: config.m,
        n: config.n,
        r: config.r,
        seed: derive_seed(config.seed, &[PROBLEM_STREAM]),
        sigma_step: config.sigma_step,
        b_noise_var: config.b_noise_var,
    })?)
}

/// Shared starting point of every trial.
pub(crate) fn starting_point(seed: u64, m: usize) -> Vec<f64> {
    GaussianStream::new(derive_seed(seed, &[START_STREAM])).normal_vec(m)
}

fn sampler_for(config: &ExperimentConfig, trial: usize) -> DirectionSampler {
    DirectionSampler::for_trial(config.seed, trial as u64 + 1, config.m)
}

/// Runs all trials, possibly concurrently, and returns them in trial order.
fn run_trials<F>(config: &ExperimentConfig, run: F) -> Result<Vec<TrackingTrace>, HarnessError>
where
    F: Fn(&mut DirectionSampler) -> Result<TrackingTrace, crate::optim::OptimError> + Sync,
{
    let results: Vec<_> = (0..config.trials)
        .into_par_iter()
        .map(|t| run(&mut sampler_for(config, t)))
        .collect();
    results.into_iter().map(|r| r.map_err(HarnessError::from)).collect()
}

fn resolve_step(choice: StepChoice, auto: f64) -> Result<StepSize, HarnessError> {
    let v = match choice {
        StepChoice::Auto => auto,
        StepChoice::Fixed(v) => v,
    };
    Ok(StepSize::new(v)?)
}

fn empty_summary(config: &ExperimentConfig, mu: f64, beta: f64, step: f64, gap0: f64) -> RunSummary {
    RunSummary {
        mode: config.mode,
        trials: config.trials,
        mu,
        beta,
        step,
        gamma: None,
        gap0,
        eta0_hat: 0.0,
        eta_star_hat: 0.0,
        c1: None,
        c2: None,
        xi_hat: None,
        asymptotic: None,
        gap_limsup: None,
        degenerate: false,
    }
}

fn run_static_mode(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let inst = generator(config)?.advance(0)?;
    let consts = lsq_constants(&inst);
    let step = resolve_step(config.step, 1.0 / (consts.beta * (config.m as f64 + 4.0)))?;
    let optimum = LsqSequence::new(vec![inst.clone()])?.optimal_value(0);
    let pinv = pseudo_inverse(&inst.a);
    let oracle = inst.clone();
    let seq = StaticSequence::new(inst, optimum).with_distance(move |x| (&pinv * oracle.residual(x)).norm());
    let x0 = starting_point(config.seed, config.m);
    let opts = RunOptions { step, inner: config.inner, steps: config.steps, beta: None };
    let trials = run_trials(config, |s| run_online(&seq, &x0, &opts, s))?;
    let gap0 = trials[0].initial_gap;

    let mut summary = empty_summary(config, consts.mu, consts.beta, step.get(), gap0);
    summary.degenerate = consts.degenerate;
    let ell = config.inner;
    let trace = AggregateTrace::from_trials(&trials, |k| {
        if consts.degenerate {
            f64::INFINITY
        } else {
            bound_static((k + 1) * ell, consts.mu, consts.beta, config.m, gap0)
        }
    });
    Ok(ExperimentReport { trace, summary, trials, x0 })
}

fn max_positive_optimal_drift(seq: &LsqSequence, steps: usize) -> f64 {
    (0..steps).map(|k| seq.optimal_value(k + 1) - seq.optimal_value(k)).fold(0.0, f64::max)
}

fn run_track_mode(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let seq = LsqSequence::from_generator(&mut generator(config)?, config.steps, 0.0)?;
    let consts = lsq_constants(seq.instance(0));
    let step = resolve_step(config.step, 1.0 / (consts.beta * (config.m as f64 + 4.0)))?;
    let x0 = starting_point(config.seed, config.m);
    let opts = RunOptions { step, inner: config.inner, steps: config.steps, beta: Some(consts.beta) };
    let trials = run_trials(config, |s| run_online(&seq, &x0, &opts, s))?;
    let gap0 = trials[0].initial_gap;

    let mut summary = empty_summary(config, consts.mu, consts.beta, step.get(), gap0);
    summary.eta0_hat = trials.iter().filter_map(|t| t.max_drift()).fold(0.0, f64::max);
    summary.eta_star_hat = max_positive_optimal_drift(&seq, config.steps);
    summary.degenerate = consts.degenerate;

    let bound = if consts.degenerate {
        None
    } else {
        let inputs = BoundInputs {
            mu: consts.mu,
            beta: consts.beta,
            m: config.m,
            alpha: step.get(),
            ell: config.inner,
            eta0: summary.eta0_hat,
            eta_star: summary.eta_star_hat,
            gap0,
            xi: 0.0,
            c1: 0.0,
            c2: 0.0,
        };
        gamma_of_alpha(inputs.alpha, inputs.beta, inputs.m)?;
        let gamma = default_gamma(&inputs)?;
        let b = TrackingBound::new(&inputs, gamma)?;
        summary.gamma = Some(gamma);
        summary.asymptotic = Some(b.asymptotic);
        summary.gap_limsup = Some(b.gap_limsup);
        Some(b)
    };
    let trace = AggregateTrace::from_trials(&trials, |k| bound.map_or(f64::INFINITY, |b| b.at(k)));
    Ok(ExperimentReport { trace, summary, trials, x0 })
}

/// `(mu_hat, xi_hat)` from points `x* + s z`, `z ~ N(0, I)`, with scales
/// `s` log-uniform in `[1e-2, 10]`, plus any extra points supplied.
pub(crate) fn estimate_prox_constants(
    seq: &LsqSequence,
    beta: f64,
    seed: u64,
    extra: &[&[f64]],
) -> Result<(f64, f64), HarnessError> {
    let inst: &LinearLsqInstance = seq.instance(0);
    let reg = seq.regularizer(0);
    let star = seq.minimizer(0);
    let opt = seq.optimal_value(0);
    let m = star.len();
    let mut stream = GaussianStream::new(derive_seed(seed, &[ESTIMATE_STREAM]));
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(ESTIMATE_SAMPLES + extra.len());
    for _ in 0..ESTIMATE_SAMPLES {
        let s = 10f64.powf(-2.0 + 3.0 * stream.uniform());
        let z = stream.normal_vec(m);
        points.push(star.iter().zip(&z).map(|(a, b)| a + s * b).collect());
    }
    points.extend(extra.iter().map(|p| p.to_vec()));
    let mut mu_hat = f64::INFINITY;
    let mut xi_hat = f64::INFINITY;
    for x in &points {
        let gap = inst.value(x)? + reg.value(x) - opt;
        // skip points numerically at the optimum
        if !(gap > 1e-9 * (1.0 + opt.abs())) {
            continue;
        }
        mu_hat = mu_hat.min(prox_pl_ratio(inst, reg, x, beta, gap)?);
        let d = seq.distance(0, x).expect("lsq sequences carry a distance oracle");
        if d > 0.0 {
            xi_hat = xi_hat.min(2.0 * gap / (d * d));
        }
    }
    Ok((mu_hat.min(beta), xi_hat))
}

fn run_prox_mode(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let seq = LsqSequence::from_generator(&mut generator(config)?, config.steps, config.lambda)?;
    let consts = lsq_constants(seq.instance(0));
    let beta = consts.beta;
    let step = resolve_step(config.step, 1.0 / (beta * (config.m as f64 + 4.0)))?;
    let x0 = starting_point(config.seed, config.m);
    let opts = RunOptions { step, inner: config.inner, steps: config.steps, beta: None };
    let trials = run_trials(config, |s| run_prox_online(&seq, &x0, &opts, s))?;
    let gap0 = trials[0].initial_gap;

    let mut summary = empty_summary(config, 0.0, beta, step.get(), gap0);
    summary.eta0_hat = trials.iter().filter_map(|t| t.max_drift()).fold(0.0, f64::max);
    summary.eta_star_hat = max_positive_optimal_drift(&seq, config.steps);
    let c1 = trials.iter().filter_map(|t| t.max_grad_norm()).fold(0.0, f64::max);
    let c2 = seq.regularizer(0).subgradient_bound(config.m);
    let (mu_hat, xi_hat) = estimate_prox_constants(&seq, beta, config.seed, &[&x0])?;
    summary.mu = mu_hat;
    summary.c1 = Some(c1);
    summary.c2 = Some(c2);
    summary.xi_hat = Some(xi_hat);

    let usable = mu_hat > 0.0 && mu_hat.is_finite() && xi_hat > 0.0 && xi_hat.is_finite();
    summary.degenerate = !usable;
    let bound = if usable {
        let inputs = BoundInputs {
            mu: mu_hat,
            beta,
            m: config.m,
            alpha: step.get(),
            ell: config.inner,
            eta0: summary.eta0_hat,
            eta_star: summary.eta_star_hat,
            gap0,
            xi: xi_hat,
            c1,
            c2,
        };
        let b = ProxTrackingBound::new(&inputs)?;
        summary.asymptotic = Some(b.asymptotic);
        summary.gap_limsup = Some(b.gap_limsup);
        Some(b)
    } else {
        None
    };
    let trace = AggregateTrace::from_trials(&trials, |k| bound.map_or(f64::INFINITY, |b| b.at(k)));
    Ok(ExperimentReport { trace, summary, trials, x0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagReport {
    pub n_samples: usize,
    pub grad_norm: f64,
    pub report: MomentReport,
}

/// Moment diagnostics at the shared starting point of `L_0`.
pub fn run_diagnostics(config: &ExperimentConfig) -> Result<DiagReport, HarnessError> {
    config.validate()?;
    let inst = generator(config)?.advance(0)?;
    let x = starting_point(config.seed, config.m);
    let grad = inst.gradient(&x)?;
    let mut sampler = sampler_for(config, 0);
    let diag = moment_diagnostics(&inst, &x, config.samples, &mut sampler)?;
    Ok(DiagReport {
        n_samples: config.samples,
        grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        report: diag.report(&grad),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTableRow {
    pub k: usize,
    pub bound: f64,
    pub asymptotic: f64,
    pub transient: f64,
}

/// Tracking bound evaluated from the constants in `config` alone.
pub fn bound_table(config: &ExperimentConfig) -> Result<(f64, Vec<BoundTableRow>), HarnessError> {
    let mut cfg = config.clone();
    cfg.mode = Mode::Bounds;
    cfg.validate()?;
    let alpha = resolve_step(cfg.step, 1.0 / (cfg.beta * (cfg.m as f64 + 4.0)))?.get();
    let inputs = BoundInputs {
        mu: cfg.mu,
        beta: cfg.beta,
        m: cfg.m,
        alpha,
        ell: cfg.inner,
        eta0: cfg.eta0,
        eta_star: cfg.eta_star,
        gap0: cfg.gap0,
        xi: 0.0,
        c1: 0.0,
        c2: 0.0,
    };
    let gamma = default_gamma(&inputs)?;
    let b = TrackingBound::new(&inputs, gamma)?;
    let rows = (0..cfg.steps)
        .map(|k| BoundTableRow { k, bound: b.at(k), asymptotic: b.asymptotic, transient: b.transient(k) })
        .collect();
    Ok((gamma, rows))
}
