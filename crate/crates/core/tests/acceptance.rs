//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Every tolerance and seed is pinned below.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use fwdgrad::bounds::{bound_static, path_radius, prox_pl_ratio, quadratic_growth_margins};
use fwdgrad::dual::{directional_derivative, gradient_exact, sq_norm, Dual, FnScalar, ScalarFunction};
use fwdgrad::fgrad::DirectionSampler;
use fwdgrad::harness::{
    run_diagnostics, run_experiment_report, write_csv, DiagReport, ExperimentConfig, ExperimentReport, HarnessError,
    Mode, StepChoice,
};
use fwdgrad::optim::{proximal_gradient_path, run_static, StepSize};
use fwdgrad::problems::{
    lsq_constants, LinearLsqInstance, LsqSequence, ObjectiveSequence, Regularizer, SolutionSetOracle,
};
use fwdgrad::rng::{derive_seed, GaussianStream};
use nalgebra::{DMatrix, DVector};

const SEED: u64 = 1;

const C1_SAMPLES: usize = 200_000;
const C1_REL_TOL: f64 = 0.02;
const C1_LIMIT: Duration = Duration::from_secs(10);
const C2_LOW_OFFSET: f64 = 1.5;
const C2_HIGH_OFFSET: f64 = 2.5;
const C2_LIMIT: Duration = Duration::from_secs(10);

const C3_DIMS: [usize; 3] = [2, 10, 60];
const C3_TRIALS: usize = 50;
const C3_STEPS: usize = 1500;
const C3_FACTOR: f64 = 1.5;
const C3_REDUCTION: f64 = 1e3;
const C3_LIMIT: Duration = Duration::from_secs(30);

const C4_ALPHA: f64 = 1.0 / 64.0;
const C4_TAIL: f64 = 0.1;
const C4_CONST_TOL: f64 = 1e-9;
const C4_LIMIT: Duration = Duration::from_secs(300);

const C5_ELLS: [usize; 3] = [1, 5, 10];
const C5_LIMIT: Duration = Duration::from_secs(600);

const C6_M: usize = 6;
const C6_N: usize = 3;
const C6_LAMBDA: f64 = 0.1;
const C6_PATH_ITERS: usize = 2000;
const C6_FIT_FLOOR: f64 = 1e-10;
const C6_R2: f64 = 0.99;
const C6_SAMPLES: usize = 500;
const C6_QG_SLACK: f64 = 1e-12;
const C6_LIMIT: Duration = Duration::from_secs(180);

const C7_INSTANCES: usize = 10;
const C7_POINTS_PER_INSTANCE: usize = 100;
const C7_SLACK: f64 = -1e-9;
const C7_LIMIT: Duration = Duration::from_secs(5);

const C8_INSTANCES: usize = 20;
const C8_ITERS: usize = 500;
const C8_SAMPLES: usize = 500;
const C8_LIMIT: Duration = Duration::from_secs(10);

const C9_FD_STEP: f64 = 1e-5;
const C9_FD_REL: f64 = 1e-6;
const C9_DIRECTIONS: usize = 8;
const C9_GRAD_REL: f64 = 1e-12;
const C9_LSQ_INSTANCES: usize = 20;
const C9_LIMIT: Duration = Duration::from_secs(2);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn report(id: u32, name: &str, limit: Option<Duration>, elapsed: Duration, outcome: Result<Outcome, String>) -> bool {
    let (mut pass, mut detail) = match outcome {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let timing = match limit {
        Some(l) => {
            if elapsed > l {
                pass = false;
                detail.push_str(&format!("; runtime {:.1}s exceeds {}s", elapsed.as_secs_f64(), l.as_secs()));
            }
            format!("{:.2}s/{}s", elapsed.as_secs_f64(), l.as_secs())
        }
        None => format!("{:.2}s", elapsed.as_secs_f64()),
    };
    println!("criterion {id:>2} {} [{name}] {detail} ({timing})", if pass { "PASS" } else { "FAIL" });
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn diag_config() -> ExperimentConfig {
    ExperimentConfig { mode: Mode::Diag, seed: SEED, samples: C1_SAMPLES, ..ExperimentConfig::default() }
}

fn criterion_1(d: &DiagReport) -> Outcome {
    let e = d.report.relative_error;
    Outcome::new(
        e <= C1_REL_TOL && d.grad_norm > 0.0,
        format!("relative L2 error {e:.5} <= {C1_REL_TOL} over {} samples, |grad| = {:.3e}", d.n_samples, d.grad_norm),
    )
}

fn criterion_2(d: &DiagReport) -> Outcome {
    let m = 60.0;
    let r = d.report.second_moment_ratio;
    let (lo, hi) = (m + C2_LOW_OFFSET, m + C2_HIGH_OFFSET);
    Outcome::new(
        r >= lo && r <= hi && r <= m + 4.0,
        format!("E|v|^2/|grad|^2 = {r:.4} in [{lo}, {hi}] and <= m+4 = {}", m + 4.0),
    )
}

fn criterion_3() -> Result<Outcome, String> {
    let mut iters_to_target = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for &m in &C3_DIMS {
        let f = FnScalar::new(m, |x: &[Dual]| Ok(sq_norm(x) * 0.5));
        let beta = 1.0;
        let step = StepSize::forward_gradient_default(beta, m).map_err(err)?;
        let x0 = GaussianStream::new(derive_seed(SEED, &[3, m as u64])).normal_vec(m);
        let gap0 = f.value(&x0).map_err(err)?;
        let mut mean = vec![0.0; C3_STEPS];
        for t in 0..C3_TRIALS {
            let mut sampler = DirectionSampler::for_trial(derive_seed(SEED, &[3]), (m * 1000 + t) as u64, m);
            let trace = run_static(&f, 0.0, &x0, step, C3_STEPS, &mut sampler).map_err(err)?;
            for (acc, row) in mean.iter_mut().zip(&trace.rows) {
                *acc += row.loss_gap / C3_TRIALS as f64;
            }
        }
        for (k, g) in mean.iter().enumerate() {
            // row k holds the gap after k + 1 iterations
            let b = bound_static(k + 1, 1.0, beta, m, gap0);
            worst_ratio = worst_ratio.max(g / b);
        }
        let hit = mean.iter().position(|&g| g <= gap0 / C3_REDUCTION).map(|k| k + 1);
        iters_to_target.push(hit);
    }
    let all_hit: Option<Vec<usize>> = iters_to_target.iter().copied().collect();
    let increasing = all_hit.as_ref().is_some_and(|v| v.windows(2).all(|w| w[1] > w[0]));
    Ok(Outcome::new(
        worst_ratio <= C3_FACTOR && increasing,
        format!(
            "max mean_gap/bound = {worst_ratio:.4} <= {C3_FACTOR}; iterations to gap0/1e3 for m={C3_DIMS:?}: {iters_to_target:?} strictly increasing"
        ),
    ))
}

fn c4_config() -> ExperimentConfig {
    ExperimentConfig { mode: Mode::Track, seed: SEED, step: StepChoice::Fixed(C4_ALPHA), ..ExperimentConfig::default() }
}

fn criterion_4(r: &ExperimentReport) -> Outcome {
    let s = &r.summary;
    let consts_ok = (s.mu - 0.01).abs() <= C4_CONST_TOL && (s.beta - 1.0).abs() <= C4_CONST_TOL && s.eta_star_hat == 0.0;
    let violations = r.trace.rows.iter().filter(|row| !(row.mean_gap <= row.bound)).count();
    let min_margin = r.trace.rows.iter().map(|row| row.bound - row.mean_gap).fold(f64::INFINITY, f64::min);
    let tail = r.trace.tail_mean_gap(C4_TAIL);
    let limsup = s.asymptotic.unwrap_or(f64::NAN);
    Outcome::new(
        consts_ok && violations == 0 && r.trace.len() == 2000 && tail <= limsup,
        format!(
            "mu={:.6}, beta={:.6}, eta0_hat={:.4e}; mean_gap <= bound at all {} k ({} violations, min margin {:.4e}); final-10% mean gap {:.4} <= limsup term {:.4e}",
            s.mu,
            s.beta,
            s.eta0_hat,
            r.trace.len(),
            violations,
            min_margin,
            tail,
            limsup
        ),
    )
}

fn criterion_5(ell1: &ExperimentReport) -> Result<Outcome, String> {
    let mut tails = vec![ell1.trace.tail_mean_gap(C4_TAIL)];
    for &ell in &C5_ELLS[1..] {
        let r = run_experiment_report(&ExperimentConfig { inner: ell, ..c4_config() }).map_err(err)?;
        tails.push(r.trace.tail_mean_gap(C4_TAIL));
    }
    let decreasing = tails.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome::new(decreasing, format!("final-10% mean gap for ell={C5_ELLS:?}: {tails:.4?} strictly decreasing")))
}

fn random_instance(n: usize, m: usize, seed: u64) -> LinearLsqInstance {
    let mut s = GaussianStream::new(seed);
    let a = DMatrix::from_column_slice(n, m, &s.normal_vec(n * m));
    let b = DVector::from_vec(s.normal_vec(n));
    LinearLsqInstance::new(a, b).expect("valid dimensions")
}

fn composite_value(inst: &LinearLsqInstance, reg: Regularizer, x: &[f64]) -> f64 {
    inst.loss(x) + reg.value(x)
}

fn r_squared(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

/// Points `x* + s z` with `s` log-uniform in `[1e-2, 10]`.
fn samples_around(star: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut s = GaussianStream::new(seed);
    (0..count)
        .map(|_| {
            let scale = 10f64.powf(-2.0 + 3.0 * s.uniform());
            let z = s.normal_vec(star.len());
            star.iter().zip(&z).map(|(a, b)| a + scale * b).collect()
        })
        .collect()
}

fn criterion_6() -> Result<Outcome, String> {
    let mut notes = Vec::new();
    let mut pass = true;

    // static l1 instance: exact proximal gradient with step 1/beta
    let inst = random_instance(C6_N, C6_M, derive_seed(SEED, &[6]));
    let reg = Regularizer::L1 { lambda: C6_LAMBDA };
    let beta = lsq_constants(&inst).beta;
    let seq = LsqSequence::with_l1(vec![inst.clone()], C6_LAMBDA).map_err(err)?;
    let opt = seq.optimal_value(0);
    let star: Vec<f64> = seq.minimizer(0).iter().copied().collect();
    let x0 = GaussianStream::new(derive_seed(SEED, &[6, 1])).normal_vec(C6_M);
    let path = proximal_gradient_path(&inst, reg, &x0, 1.0 / beta, C6_PATH_ITERS).map_err(err)?;
    let gaps: Vec<f64> = path.iter().map(|x| composite_value(&inst, reg, x) - opt).collect();
    let floor = C6_FIT_FLOOR * gaps[0];
    let above = gaps.iter().take_while(|&&g| g > floor).count();
    let whole_r2 = r_squared(&gaps[..above].iter().map(|g| g.ln()).collect::<Vec<_>>());
    // fit window starts once the sign pattern has settled on that of x*
    let signs = |x: &[f64]| -> Vec<i8> { x.iter().map(|&v| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 }).collect() };
    let target = signs(&star);
    let identified = path.iter().rposition(|x| signs(x) != target).map_or(0, |k| k + 1);
    let fit: Vec<f64> = gaps[identified.min(above)..above].iter().map(|g| g.ln()).collect();
    let r2 = r_squared(&fit);
    let samples = samples_around(&star, C6_SAMPLES, derive_seed(SEED, &[6, 2]));
    let mut mu_hat = f64::INFINITY;
    for x in samples.iter().chain(path.iter()) {
        let gap = composite_value(&inst, reg, x) - opt;
        if gap > 1e-12 {
            mu_hat = mu_hat.min(prox_pl_ratio(&inst, reg, x, beta, gap).map_err(err)?);
        }
    }
    let rate = 1.0 - mu_hat / beta;
    let envelope_ok = gaps.iter().enumerate().take(above).all(|(k, &g)| g <= rate.powi(k as i32) * gaps[0] * (1.0 + 1e-9));
    pass &= fit.len() >= 10 && r2 >= C6_R2 && envelope_ok;
    notes.push(format!(
        "log-gap fit R^2 {r2:.5} >= {C6_R2} over iterates {identified}..{above} after support identification (whole path {whole_r2:.4}), gap_k <= (1-mu_hat/beta)^k gap0 for all k: {envelope_ok}"
    ));

    let mut min_ratio = f64::INFINITY;
    let mut growth: Vec<(f64, f64)> = Vec::new();
    for x in &samples {
        let gap = composite_value(&inst, reg, x) - opt;
        if gap <= 0.0 {
            continue;
        }
        min_ratio = min_ratio.min(prox_pl_ratio(&inst, reg, x, beta, gap).map_err(err)?);
        growth.push((gap, seq.distance(0, x).expect("distance oracle")));
    }
    let xi_hat = fwdgrad::problems::empirical_growth_constant(growth.iter().copied()).unwrap_or(0.0);
    let qg_ok = growth.iter().all(|&(gap, d)| xi_hat / 2.0 * d * d <= gap * (1.0 + C6_QG_SLACK));
    pass &= min_ratio > 0.0 && xi_hat > 0.0 && qg_ok;
    notes.push(format!("min prox-PL ratio {min_ratio:.4e} > 0, xi_hat {xi_hat:.4e} > 0, growth holds on all {} samples: {qg_ok}", growth.len()));

    // drifting l1 variant
    let cfg = ExperimentConfig {
        mode: Mode::ProxTrack,
        m: C6_M,
        n: C6_N,
        r: C6_N,
        seed: SEED,
        lambda: C6_LAMBDA,
        ..ExperimentConfig::default()
    };
    let r = run_experiment_report(&cfg).map_err(err)?;
    let violations = r.trace.rows.iter().filter(|row| !(row.mean_gap <= row.bound)).count();
    let tail = r.trace.tail_mean_gap(C4_TAIL);
    let asym = r.summary.asymptotic.unwrap_or(f64::NAN);
    pass &= violations == 0 && tail <= asym;
    notes.push(format!(
        "drifting: gamma {:.4}, mu_hat {:.4e}, xi_hat {:.4e}, c1 {:.4}, c2 {:.4}; {violations} bound violations, final-10% mean gap {tail:.4} <= asymptotic {asym:.4e}",
        r.summary.step,
        r.summary.mu,
        r.summary.xi_hat.unwrap_or(f64::NAN),
        r.summary.c1.unwrap_or(f64::NAN),
        r.summary.c2.unwrap_or(f64::NAN)
    ));

    // informational: the exact-gradient step 1/beta with forward gradients
    let unit = ExperimentConfig { step: StepChoice::Fixed(1.0 / r.summary.beta), ..cfg };
    let info = match run_experiment_report(&unit) {
        Err(HarnessError::Optim(e)) => format!("gamma=1/beta with forward gradients: {e}"),
        Err(e) => format!("gamma=1/beta with forward gradients: error {e}"),
        Ok(u) => format!("gamma=1/beta with forward gradients: final-10% mean gap {:.4e}", u.trace.tail_mean_gap(C4_TAIL)),
    };
    println!("   info: {info}");
    Ok(Outcome::new(pass, notes.join("; ")))
}

fn criterion_7() -> Result<Outcome, String> {
    let mut worst: f64 = f64::INFINITY;
    let mut count = 0;
    for i in 0..C7_INSTANCES {
        // consistent: full row rank with at least as many unknowns as equations
        let n = 2 + i % 4;
        let m = n + i % 3;
        let inst = random_instance(n, m, derive_seed(SEED, &[7, i as u64]));
        let c = lsq_constants(&inst);
        let oracle = SolutionSetOracle::new(&inst).map_err(err)?;
        let mut s = GaussianStream::new(derive_seed(SEED, &[7, i as u64, 1]));
        for _ in 0..C7_POINTS_PER_INSTANCE {
            let scale = 10f64.powf(-3.0 + 4.0 * s.uniform());
            let x: Vec<f64> = s.normal_vec(m).into_iter().map(|v| v * scale).collect();
            let (lo, hi) =
                quadratic_growth_margins(&inst, 0.0, &x, c.mu, c.beta, |y| oracle.distance(&inst, y)).map_err(err)?;
            worst = worst.min(lo).min(hi);
            count += 1;
        }
    }
    Ok(Outcome::new(worst >= C7_SLACK, format!("{count} points, smallest slack {worst:.3e} >= {C7_SLACK:e}")))
}

fn criterion_8() -> Result<Outcome, String> {
    let mut worst_ratio: f64 = 0.0;
    for i in 0..C8_INSTANCES {
        let inst = random_instance(C6_N, C6_M, derive_seed(SEED, &[8, i as u64]));
        let reg = Regularizer::L1 { lambda: C6_LAMBDA };
        let beta = lsq_constants(&inst).beta;
        let seq = LsqSequence::with_l1(vec![inst.clone()], C6_LAMBDA).map_err(err)?;
        let opt = seq.optimal_value(0);
        let star: Vec<f64> = seq.minimizer(0).iter().copied().collect();
        let x0 = GaussianStream::new(derive_seed(SEED, &[8, i as u64, 1])).normal_vec(C6_M);
        let path = proximal_gradient_path(&inst, reg, &x0, 1.0 / beta, C8_ITERS).map_err(err)?;
        let samples = samples_around(&star, C8_SAMPLES, derive_seed(SEED, &[8, i as u64, 2]));
        let mut mu_hat = beta;
        for x in samples.iter().chain(path.iter()) {
            let gap = composite_value(&inst, reg, x) - opt;
            if gap > 1e-12 {
                mu_hat = mu_hat.min(prox_pl_ratio(&inst, reg, x, beta, gap).map_err(err)?);
            }
        }
        let gap0 = composite_value(&inst, reg, &x0) - opt;
        let radius = path_radius(mu_hat, beta, gap0).map_err(err)?;
        let longest = path
            .iter()
            .map(|x| x.iter().zip(&x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        worst_ratio = worst_ratio.max(longest / radius);
    }
    Ok(Outcome::new(
        worst_ratio <= 1.0,
        format!("{C8_INSTANCES} instances, max |x_k - x_0| / path_radius = {worst_ratio:.4} <= 1"),
    ))
}

fn criterion_9() -> Result<Outcome, String> {
    let mut worst_fd: f64 = 0.0;
    let mut s = GaussianStream::new(derive_seed(SEED, &[9]));
    let battery = common::battery();
    for (_, f, x) in &battery {
        let func = FnScalar::new(3, *f);
        for _ in 0..C9_DIRECTIONS {
            let u = s.normal_vec(3);
            let (_, d) = directional_derivative(&func, x, &u).map_err(err)?;
            let fd = common::central_difference(*f, x, &u, C9_FD_STEP);
            worst_fd = worst_fd.max((d - fd).abs() / d.abs().max(1.0));
        }
    }
    let mut worst_grad: f64 = 0.0;
    for i in 0..C9_LSQ_INSTANCES {
        let inst = random_instance(3 + i % 5, 2 + i % 7, derive_seed(SEED, &[9, i as u64]));
        let x = s.normal_vec(inst.a.ncols());
        let ad = gradient_exact(&inst, &x).map_err(err)?;
        let closed = inst.a.transpose() * (&inst.a * DVector::from_column_slice(&x) - &inst.b);
        let diff = (DVector::from_vec(ad) - &closed).norm();
        worst_grad = worst_grad.max(diff / closed.norm().max(1.0));
    }
    Ok(Outcome::new(
        battery.len() == 12 && worst_fd <= C9_FD_REL && worst_grad <= C9_GRAD_REL,
        format!(
            "{} functions: max rel |AD - FD| {worst_fd:.2e} <= {C9_FD_REL:e}; max rel |AD grad - A^T(Ax-b)| {worst_grad:.2e} <= {C9_GRAD_REL:e}",
            battery.len()
        ),
    ))
}

fn criterion_10(c4: Option<&ExperimentReport>) -> Result<Outcome, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut bytes = Vec::new();
    for name in ["first.csv", "second.csv"] {
        let path = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_fwdgrad"))
            .args(["track", "--seed", &SEED.to_string(), "--alpha", &C4_ALPHA.to_string(), "--out"])
            .arg(&path)
            .output()
            .map_err(err)?;
        if !out.status.success() {
            return Err(format!("cli failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        bytes.push(std::fs::read(&path).map_err(err)?);
    }
    let identical = bytes[0] == bytes[1];
    let mut detail = format!("two CLI runs, {} bytes each, identical: {identical}", bytes[0].len());
    let mut pass = identical && !bytes[0].is_empty();
    if let Some(r) = c4 {
        let path = dir.path().join("in_process.csv");
        write_csv(&r.trace, &path).map_err(err)?;
        let same = std::fs::read(&path).map_err(err)? == bytes[0];
        detail.push_str(&format!("; matches in-process criterion-4 run: {same}"));
        pass &= same;
    }
    Ok(Outcome::new(pass, detail))
}

fn main() {
    let mut all = true;

    let (diag, t) = timed(|| run_diagnostics(&diag_config()));
    match &diag {
        Ok(d) => {
            all &= report(1, "unbiasedness", Some(C1_LIMIT), t, Ok(criterion_1(d)));
            all &= report(2, "second moment", Some(C2_LIMIT), t, Ok(criterion_2(d)));
        }
        Err(e) => {
            all &= report(1, "unbiasedness", Some(C1_LIMIT), t, Err(err(e)));
            all &= report(2, "second moment", Some(C2_LIMIT), t, Err(err(e)));
        }
    }

    let (o, t) = timed(criterion_3);
    all &= report(3, "static rate", Some(C3_LIMIT), t, o);

    let (c4, t4) = timed(|| run_experiment_report(&c4_config()));
    let c4 = c4.map_err(err);
    all &= report(4, "drifting lsq tracking", Some(C4_LIMIT), t4, c4.as_ref().map(criterion_4).map_err(Clone::clone));

    let (o, t) = timed(|| c4.as_ref().map_err(Clone::clone).and_then(criterion_5));
    all &= report(5, "inner-step tradeoff", Some(C5_LIMIT), t + t4, o);

    let (o, t) = timed(criterion_6);
    all &= report(6, "proximal suite", Some(C6_LIMIT), t, o);

    let (o, t) = timed(criterion_7);
    all &= report(7, "quadratic growth", Some(C7_LIMIT), t, o);

    let (o, t) = timed(criterion_8);
    all &= report(8, "path length", Some(C8_LIMIT), t, o);

    let (o, t) = timed(criterion_9);
    all &= report(9, "autodiff", Some(C9_LIMIT), t, o);

    let (o, t) = timed(|| criterion_10(c4.as_ref().ok()));
    all &= report(10, "determinism", None, t, o);

    println!("acceptance: {}", if all { "all criteria passed" } else { "some criteria FAILED" });
    if !all {
        std::process::exit(1);
    }
}
