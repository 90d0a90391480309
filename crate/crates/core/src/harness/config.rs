//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # drifting least squares, default sizes
//! m = 60
//! n = 10
//! trials = 50
//! alpha = auto
//! ```
//!
//! Keys may use `_` or `-`. `alpha` and `gamma` both set the step size.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Static,
    Track,
    ProxTrack,
    Diag,
    Bounds,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::Track => "track",
            Mode::ProxTrack => "prox-track",
            Mode::Diag => "diag",
            Mode::Bounds => "bounds",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(Mode::Static),
            "track" => Ok(Mode::Track),
            "prox-track" | "prox_track" => Ok(Mode::ProxTrack),
            "diag" => Ok(Mode::Diag),
            "bounds" => Ok(Mode::Bounds),
            other => Err(HarnessError::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Step size: explicit, or resolved from the problem constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepChoice {
    Auto,
    Fixed(f64),
}

impl FromStr for StepChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(StepChoice::Auto);
        }
        let v: f64 = s.parse().map_err(|_| format!("expected a number or `auto`, got `{s}`"))?;
        if v > 0.0 && v.is_finite() {
            Ok(StepChoice::Fixed(v))
        } else {
            Err(format!("step size must be positive, got {v}"))
        }
    }
}

impl fmt::Display for StepChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepChoice::Auto => f.write_str("auto"),
            StepChoice::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub trials: usize,
    /// Horizon `K`.
    pub steps: usize,
    /// Inner updates per time step (`ell`).
    pub inner: usize,
    pub step: StepChoice,
    pub lambda: f64,
    pub sigma_step: f64,
    pub b_noise_var: f64,
    /// Monte-Carlo sample count for `diag`.
    pub samples: usize,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub log_y: bool,
    // `bounds` mode inputs
    pub mu: f64,
    pub beta: f64,
    pub eta0: f64,
    pub eta_star: f64,
    pub gap0: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Track,
            m: 60,
            n: 10,
            r: 10,
            seed: 0,
            trials: 50,
            steps: 2000,
            inner: 1,
            step: StepChoice::Auto,
            lambda: 0.1,
            sigma_step: 1e-6,
            b_noise_var: 1e-2,
            samples: 200_000,
            out: None,
            svg: None,
            log_y: false,
            mu: 0.01,
            beta: 1.0,
            eta0: 0.0,
            eta_star: 0.0,
            gap0: 1.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| HarnessError::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(HarnessError::config(key, format!("expected a boolean, got `{value}`"))),
    }
}

impl ExperimentConfig {
    pub fn with_mode(mode: Mode) -> Self {
        ExperimentConfig { mode, ..Default::default() }
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let norm = key.trim().replace('-', "_");
        let value = value.trim();
        match norm.as_str() {
            "mode" => self.mode = value.parse()?,
            "m" => self.m = parse(&norm, value)?,
            "n" => self.n = parse(&norm, value)?,
            "r" => self.r = parse(&norm, value)?,
            "seed" => self.seed = parse(&norm, value)?,
            "trials" => self.trials = parse(&norm, value)?,
            "steps" => self.steps = parse(&norm, value)?,
            "inner" => self.inner = parse(&norm, value)?,
            "alpha" | "gamma" => {
                self.step = value.parse().map_err(|e: String| HarnessError::config(&norm, e))?
            }
            "lambda" => self.lambda = parse(&norm, value)?,
            "sigma_step" => self.sigma_step = parse(&norm, value)?,
            "b_noise_var" => self.b_noise_var = parse(&norm, value)?,
            "samples" => self.samples = parse(&norm, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "svg" => self.svg = Some(PathBuf::from(value)),
            "log_y" => self.log_y = parse_bool(&norm, value)?,
            "mu" => self.mu = parse(&norm, value)?,
            "beta" => self.beta = parse(&norm, value)?,
            "eta0" => self.eta0 = parse(&norm, value)?,
            "eta_star" => self.eta_star = parse(&norm, value)?,
            "gap0" => self.gap0 = parse(&norm, value)?,
            _ => return Err(HarnessError::config(key.trim(), "unknown key".to_string())),
        }
        Ok(())
    }

    /// Applies every assignment of a flat key/value document.
    pub fn apply_document(&mut self, text: &str) -> Result<(), HarnessError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::config("config", format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config("config", format!("{}: {e}", path.display())))?;
        self.apply_document(&text)
    }

    /// Field-level validation.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |field: &str, msg: &str| Err(HarnessError::config(field, msg.to_string()));
        if self.trials == 0 {
            return err("trials", "must be at least 1");
        }
        if self.steps == 0 {
            return err("steps", "must be at least 1");
        }
        if self.inner == 0 {
            return err("inner", "must be at least 1");
        }
        if self.m == 0 {
            return err("m", "must be at least 1");
        }
        if matches!(self.mode, Mode::Static | Mode::Track | Mode::ProxTrack | Mode::Diag) {
            if self.n == 0 {
                return err("n", "must be at least 1");
            }
            if self.r == 0 || self.r > self.m.min(self.n) {
                return err("r", "must satisfy 1 <= r <= min(m, n)");
            }
        }
        if !(self.lambda >= 0.0) {
            return err("lambda", "must be nonnegative");
        }
        if !(self.sigma_step >= 0.0) {
            return err("sigma_step", "must be nonnegative");
        }
        if !(self.b_noise_var >= 0.0) {
            return err("b_noise_var", "must be nonnegative");
        }
        if self.samples == 0 {
            return err("samples", "must be at least 1");
        }
        if self.mode == Mode::Bounds {
            if !(self.mu > 0.0 && self.mu <= self.beta && self.beta.is_finite()) {
                return err("mu", "need 0 < mu <= beta");
            }
            if !(self.eta0 >= 0.0 && self.eta_star >= 0.0 && self.gap0 >= 0.0) {
                return err("eta0", "drifts and gap0 must be nonnegative");
            }
        }
        // singular values must stay positive over the horizon
        if matches!(self.mode, Mode::Track | Mode::ProxTrack) && self.r > 0 {
            let smallest = 1.0 / self.r as f64;
            if self.sigma_step * self.steps as f64 >= smallest {
                return err("steps", "singular values reach zero within the horizon");
            }
        }
        Ok(())
    }
}
