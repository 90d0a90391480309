use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use super::config::{ExperimentConfig, Mode};
use super::csv::{csv_string, format_sig17, write_csv};
use super::experiment::{bound_table, run_diagnostics, run_experiment_report, ExperimentReport};
use super::svg::render_svg;
use super::HarnessError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;

/// Forward-gradient tracking experiments on drifting least squares.
#[derive(Debug, Parser)]
#[command(name = "fwdgrad", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward gradient descent on the k = 0 instance.
    Static(Opts),
    /// Online forward gradient descent along the drifting path.
    Track(Opts),
    /// Online proximal forward-gradient method on the l1-regularized path.
    ProxTrack(Opts),
    /// Monte-Carlo check of the estimator's first two moments.
    Diag(Opts),
    /// Tracking-bound table from user-supplied constants.
    Bounds(Opts),
}

#[derive(Debug, Args)]
struct Opts {
    /// Flat `key = value` file; flags given here take precedence.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Horizon K.
    #[arg(long)]
    steps: Option<usize>,
    /// Inner updates per time step.
    #[arg(long)]
    inner: Option<usize>,
    /// Step size, or `auto`.
    #[arg(long)]
    alpha: Option<String>,
    /// Step size of the proximal method, or `auto`.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Parameter dimension.
    #[arg(short = 'm')]
    m: Option<usize>,
    /// Number of equations.
    #[arg(short = 'n')]
    n: Option<usize>,
    /// Rank of the drifting matrix.
    #[arg(short = 'r')]
    r: Option<usize>,
    #[arg(long)]
    sigma_step: Option<f64>,
    #[arg(long)]
    b_noise_var: Option<f64>,
    /// Monte-Carlo samples for `diag`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
    #[arg(long)]
    log_y: bool,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    eta_star: Option<f64>,
    #[arg(long)]
    gap0: Option<f64>,
}

impl Opts {
    fn into_config(self, mode: Mode) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::with_mode(mode);
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
            cfg.mode = mode;
        }
        let mut set = |key: &str, value: Option<String>| match value {
            Some(v) => cfg.set(key, &v),
            None => Ok(()),
        };
        let s = |v: Option<f64>| v.map(|x| x.to_string());
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("trials", self.trials.map(|v| v.to_string()))?;
        set("steps", self.steps.map(|v| v.to_string()))?;
        set("inner", self.inner.map(|v| v.to_string()))?;
        set("alpha", self.alpha)?;
        set("gamma", self.gamma)?;
        set("lambda", s(self.lambda))?;
        set("m", self.m.map(|v| v.to_string()))?;
        set("n", self.n.map(|v| v.to_string()))?;
        set("r", self.r.map(|v| v.to_string()))?;
        set("sigma_step", s(self.sigma_step))?;
        set("b_noise_var", s(self.b_noise_var))?;
        set("samples", self.samples.map(|v| v.to_string()))?;
        set("mu", s(self.mu))?;
        set("beta", s(self.beta))?;
        set("eta0", s(self.eta0))?;
        set("eta_star", s(self.eta_star))?;
        set("gap0", s(self.gap0))?;
        if let Some(p) = self.out {
            cfg.out = Some(p);
        }
        if let Some(p) = self.svg {
            cfg.svg = Some(p);
        }
        if self.log_y {
            cfg.log_y = true;
        }
        Ok(cfg)
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let (mode, opts) = match cli.command {
        Command::Static(o) => (Mode::Static, o),
        Command::Track(o) => (Mode::Track, o),
        Command::ProxTrack(o) => (Mode::ProxTrack, o),
        Command::Diag(o) => (Mode::Diag, o),
        Command::Bounds(o) => (Mode::Bounds, o),
    };
    let result = opts.into_config(mode).and_then(|cfg| dispatch(&cfg, out));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_divergence() {
                EXIT_DIVERGED
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn io_err(e: std::io::Error) -> HarnessError {
    HarnessError::Io { path: PathBuf::from("<stdout>"), source: e }
}

fn dispatch(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), HarnessError> {
    match cfg.mode {
        Mode::Diag => diag(cfg, out),
        Mode::Bounds => bounds(cfg, out),
        _ => experiment(cfg, out),
    }
}

fn diag(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), HarnessError> {
    let d = run_diagnostics(cfg)?;
    let r = d.report;
    let unbiased = r.relative_error <= 0.02;
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    writeln!(out, "samples: {}, m: {}, |grad|: {:.6e}", d.n_samples, cfg.m, d.grad_norm).map_err(io_err)?;
    writeln!(out, "unbiasedness relative error: {:.6} (<= 0.02) {}", r.relative_error, verdict(unbiased))
        .map_err(io_err)?;
    writeln!(
        out,
        "second-moment ratio: {:.4} (gaussian m+2 = {}, bound m+4 = {}) {}",
        r.second_moment_ratio,
        r.gaussian_ratio,
        r.upper_bound_ratio,
        verdict(r.within_upper_bound)
    )
    .map_err(io_err)?;
    Ok(())
}

fn bounds(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), HarnessError> {
    let (gamma, rows) = bound_table(cfg)?;
    let mut text = format!("# gamma = {}\nk,bound,asymptotic,transient\n", format_sig17(gamma));
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.k,
            format_sig17(r.bound),
            format_sig17(r.asymptotic),
            format_sig17(r.transient)
        ));
    }
    match &cfg.out {
        Some(p) => std::fs::write(p, &text).map_err(|source| HarnessError::Io { path: p.clone(), source })?,
        None => out.write_all(text.as_bytes()).map_err(io_err)?,
    }
    Ok(())
}

fn experiment(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), HarnessError> {
    let report = run_experiment_report(cfg)?;
    match &cfg.out {
        Some(p) => {
            write_csv(&report.trace, p)?;
            summarize(cfg, &report, out).map_err(io_err)?;
        }
        None => out.write_all(csv_string(&report.trace).as_bytes()).map_err(io_err)?,
    }
    if let Some(p) = &cfg.svg {
        render_svg(&report.trace, p, cfg.log_y)?;
    }
    Ok(())
}

fn summarize(cfg: &ExperimentConfig, r: &ExperimentReport, out: &mut dyn Write) -> std::io::Result<()> {
    let s = &r.summary;
    writeln!(out, "mode {}: trials {}, steps {}, inner {}", s.mode, s.trials, cfg.steps, cfg.inner)?;
    writeln!(out, "mu {:.6e}, beta {:.6e}, step {:.6e}, gap0 {:.6e}", s.mu, s.beta, s.step, s.gap0)?;
    writeln!(out, "eta0_hat {:.6e}, eta_star_hat {:.6e}", s.eta0_hat, s.eta_star_hat)?;
    if let Some(g) = s.gamma {
        writeln!(out, "gamma {g:.6e}")?;
    }
    if let (Some(c1), Some(c2), Some(xi)) = (s.c1, s.c2, s.xi_hat) {
        writeln!(out, "c1 {c1:.6e}, c2 {c2:.6e}, xi_hat {xi:.6e} (estimated)")?;
    }
    if let Some(a) = s.asymptotic {
        writeln!(out, "bound asymptotic term {a:.6e}")?;
    }
    if s.degenerate {
        writeln!(out, "constants degenerate: bound column is inf")?;
    }
    writeln!(out, "final-10% mean gap {:.6e}", r.trace.tail_mean_gap(0.1))
}
