//! Objective instances: static and drifting least squares, l1-regularized
//! composites, and the time-indexed sequences the online runners consume.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::dual::{affine, check_dim, sq_norm, AdError, Dual, ScalarFunction};
use crate::optim::{proximal_gradient, ProxGradientOptions};
use crate::rng::GaussianStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("singular value {index} is {value} at step {k}: horizon exceeded")]
    HorizonExceeded { k: usize, index: usize, value: f64 },
    #[error("linear system is inconsistent (residual {residual:e})")]
    Inconsistent { residual: f64 },
    #[error("step {k} is outside the precomputed horizon of {len} instances")]
    OutOfRange { k: usize, len: usize },
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// `L(x) = 1/2 |A x - b|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLsqInstance {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearLsqInstance {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, ProblemError> {
        if a.nrows() != b.len() {
            return Err(ProblemError::InvalidDimensions(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        Ok(LinearLsqInstance { a, b })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn residual(&self, x: &[f64]) -> DVector<f64> {
        let x = DVector::from_column_slice(x);
        &self.a * x - &self.b
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }

    /// Closed-form `A^T (A x - b)`.
    pub fn grad(&self, x: &[f64]) -> DVector<f64> {
        self.a.tr_mul(&self.residual(x))
    }
}

impl ScalarFunction for LinearLsqInstance {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn eval(&self, x: &[Dual]) -> Result<Dual, AdError> {
        Ok(sq_norm(&affine(&self.a, x, Some(&self.b))?) * 0.5)
    }

    fn value(&self, x: &[f64]) -> Result<f64, AdError> {
        check_dim(self.dim(), x.len())?;
        Ok(self.loss(x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, AdError> {
        check_dim(self.dim(), x.len())?;
        Ok(self.grad(x).as_slice().to_vec())
    }
}

/// PL and smoothness constants of a linear least-squares loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqConstants {
    /// `lambda_min(A A^T)`; zero when `A` lacks full row rank.
    pub mu: f64,
    /// `sigma_max(A)^2`.
    pub beta: f64,
    pub degenerate: bool,
}

/// The tangent kernel of `x -> A x` is the constant `A A^T`, so its
/// smallest eigenvalue is the PL* constant.
pub fn lsq_constants(inst: &LinearLsqInstance) -> LsqConstants {
    let kernel = &inst.a * inst.a.transpose();
    let eig = SymmetricEigen::new(kernel).eigenvalues;
    let beta = eig.max().max(0.0);
    let mut mu = eig.min().max(0.0);
    if inst.a.nrows() > inst.a.ncols() || mu <= 1e-12 * beta {
        mu = 0.0;
    }
    LsqConstants { mu, beta, degenerate: mu == 0.0 }
}

/// Moore-Penrose pseudoinverse; singular values below `1e-12 * sigma_max`
/// count as zero.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    svd.pseudo_inverse(1e-12 * smax).expect("both factors were requested")
}

/// Distance oracle for the affine solution set `{x : A x = b}` of a
/// consistent system.
#[derive(Debug, Clone)]
pub struct SolutionSetOracle {
    pinv: DMatrix<f64>,
}

impl SolutionSetOracle {
    pub fn new(inst: &LinearLsqInstance) -> Result<Self, ProblemError> {
        let pinv = pseudo_inverse(&inst.a);
        let projected = &inst.a * (&pinv * &inst.b);
        let residual = (projected - &inst.b).norm();
        if residual > 1e-9 * (1.0 + inst.b.norm()) {
            return Err(ProblemError::Inconsistent { residual });
        }
        Ok(SolutionSetOracle { pinv })
    }

    /// `|A^+ (A x - b)|`.
    pub fn distance(&self, inst: &LinearLsqInstance, x: &[f64]) -> f64 {
        (&self.pinv * inst.residual(x)).norm()
    }

    /// Nearest point of the solution set.
    pub fn project(&self, inst: &LinearLsqInstance, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x) - &self.pinv * inst.residual(x)
    }
}

pub fn dist_to_solution_set(inst: &LinearLsqInstance, x: &[f64]) -> Result<f64, ProblemError> {
    Ok(SolutionSetOracle::new(inst)?.distance(inst, x))
}

/// Closed-form convex nonsmooth terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Zero,
    L1 { lambda: f64 },
    /// Indicator of the box `[lo, hi]^m`.
    Box { lo: f64, hi: f64 },
}

impl Regularizer {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::Box { lo, hi } => {
                if x.iter().all(|&v| v >= lo && v <= hi) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_y h(y) + |y - v|^2 / (2 tau)`. With `tau = 0` this is `v`.
    pub fn prox(&self, v: &[f64], tau: f64) -> Vec<f64> {
        match *self {
            Regularizer::Zero => v.to_vec(),
            Regularizer::L1 { lambda } => {
                let t = tau * lambda;
                v.iter().map(|&vi| vi.signum() * (vi.abs() - t).max(0.0)).collect()
            }
            Regularizer::Box { lo, hi } => {
                if tau == 0.0 {
                    v.to_vec()
                } else {
                    v.iter().map(|&vi| vi.clamp(lo, hi)).collect()
                }
            }
        }
    }

    /// Bound on the norm of any subgradient in dimension `m`.
    pub fn subgradient_bound(&self, m: usize) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * (m as f64).sqrt(),
            Regularizer::Box { .. } => f64::INFINITY,
        }
    }
}

/// `L(x) = g(x) + h(x)` with smooth `g` and closed-form `h`.
#[derive(Debug, Clone)]
pub struct CompositeObjective<G> {
    pub smooth: G,
    pub reg: Regularizer,
}

impl<G: ScalarFunction> CompositeObjective<G> {
    pub fn new(smooth: G, reg: Regularizer) -> Self {
        CompositeObjective { smooth, reg }
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, AdError> {
        Ok(self.smooth.value(x)? + self.reg.value(x))
    }

    /// `c_2`.
    pub fn subgradient_bound(&self) -> f64 {
        self.reg.subgradient_bound(self.dim())
    }
}

/// `1/2 |A x - b|^2 + lambda |x|_1`.
pub fn l1_composite(inst: LinearLsqInstance, lambda: f64) -> CompositeObjective<LinearLsqInstance> {
    assert!(lambda >= 0.0, "l1 weight must be nonnegative");
    let reg = if lambda == 0.0 { Regularizer::Zero } else { Regularizer::L1 { lambda } };
    CompositeObjective::new(inst, reg)
}

/// Problem constants consumed by the bound evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProblemConstants {
    pub beta: f64,
    pub mu: f64,
    pub c1: f64,
    pub c2: f64,
    pub eta0: f64,
    pub eta_star: f64,
    pub xi: f64,
}

/// Parameters of the drifting least-squares sequence
/// `A_k = U Sigma_k V^T`, `Sigma_{k+1} = Sigma_k - sigma_step I`,
/// `b_{k+1} = b_k + N(0, b_noise_var I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftConfig {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub sigma_step: f64,
    pub b_noise_var: f64,
}

impl DriftConfig {
    pub fn new(m: usize, n: usize, r: usize, seed: u64) -> Self {
        DriftConfig { m, n, r, seed, sigma_step: 1e-6, b_noise_var: 1e-2 }
    }
}

#[derive(Debug, Clone)]
pub struct DriftingLsqGenerator {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    sigma0: Vec<f64>,
    sigma_step: f64,
    b0: DVector<f64>,
    b_noise_var: f64,
    // stream positioned just after b0 was drawn
    path_start: GaussianStream,
    stream: GaussianStream,
    k: usize,
    b: DVector<f64>,
}

/// Builds the generator: `U`, `V` from thin QR of Gaussian matrices,
/// `Sigma_0 = diag(1/r, 2/r, ..., 1)`, `b_0 ~ N(0, I_n)`.
pub fn make_drifting_generator(m: usize, n: usize, r: usize, seed: u64) -> Result<DriftingLsqGenerator, ProblemError> {
    DriftingLsqGenerator::new(&DriftConfig::new(m, n, r, seed))
}

impl DriftingLsqGenerator {
    pub fn new(cfg: &DriftConfig) -> Result<Self, ProblemError> {
        let DriftConfig { m, n, r, .. } = *cfg;
        if m == 0 || n == 0 || r == 0 || r > m.min(n) {
            return Err(ProblemError::InvalidDimensions(format!(
                "need 1 <= r <= min(m, n), got m={m}, n={n}, r={r}"
            )));
        }
        if !(cfg.sigma_step >= 0.0) || !(cfg.b_noise_var >= 0.0) {
            return Err(ProblemError::InvalidDimensions(
                "sigma_step and b_noise_var must be nonnegative".into(),
            ));
        }
        let mut stream = GaussianStream::new(cfg.seed);
        let gu = DMatrix::from_column_slice(n, r, &stream.normal_vec(n * r));
        let gv = DMatrix::from_column_slice(m, r, &stream.normal_vec(m * r));
        let u = gu.qr().q();
        let v = gv.qr().q();
        let sigma0 = (1..=r).map(|i| i as f64 / r as f64).collect();
        let b0 = DVector::from_vec(stream.normal_vec(n));
        Ok(DriftingLsqGenerator {
            u,
            v,
            sigma0,
            sigma_step: cfg.sigma_step,
            b: b0.clone(),
            b0,
            b_noise_var: cfg.b_noise_var,
            path_start: stream.clone(),
            stream,
            k: 0,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.v.nrows(), self.u.nrows(), self.u.ncols())
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn sigma_step(&self) -> f64 {
        self.sigma_step
    }

    pub fn b_noise_var(&self) -> f64 {
        self.b_noise_var
    }

    pub fn sigma0(&self) -> &[f64] {
        &self.sigma0
    }

    pub fn sigma_at(&self, k: usize) -> Result<Vec<f64>, ProblemError> {
        let shift = self.sigma_step * k as f64;
        self.sigma0
            .iter()
            .enumerate()
            .map(|(index, s)| {
                let value = s - shift;
                if value > 0.0 {
                    Ok(value)
                } else {
                    Err(ProblemError::HorizonExceeded { k, index, value })
                }
            })
            .collect()
    }

    pub fn matrix_at(&self, k: usize) -> Result<DMatrix<f64>, ProblemError> {
        let sigma = DVector::from_vec(self.sigma_at(k)?);
        let scaled = DMatrix::from_fn(self.u.nrows(), self.u.ncols(), |i, j| self.u[(i, j)] * sigma[j]);
        Ok(scaled * self.v.transpose())
    }

    /// Instance `(A_k, b_k)`. Moving backwards replays the `b` path from
    /// the seed.
    pub fn advance(&mut self, k: usize) -> Result<LinearLsqInstance, ProblemError> {
        let a = self.matrix_at(k)?;
        if k < self.k {
            self.stream = self.path_start.clone();
            self.b = self.b0.clone();
            self.k = 0;
        }
        let sd = self.b_noise_var.sqrt();
        while self.k < k {
            for bi in self.b.iter_mut() {
                *bi += sd * self.stream.normal();
            }
            self.k += 1;
        }
        LinearLsqInstance::new(a, self.b.clone())
    }

    /// Instances `0..=horizon`.
    pub fn instances(&mut self, horizon: usize) -> Result<Vec<LinearLsqInstance>, ProblemError> {
        (0..=horizon).map(|k| self.advance(k)).collect()
    }
}

/// Time-indexed composite objectives `L_k = g_k + h_k`.
pub trait ObjectiveSequence: Sync {
    type Smooth: ScalarFunction;

    fn dim(&self) -> usize;

    /// Number of available instances; `k` ranges over `0..len()`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn smooth(&self, k: usize) -> &Self::Smooth;

    fn regularizer(&self, _k: usize) -> Regularizer {
        Regularizer::Zero
    }

    /// `L_k^*`.
    fn optimal_value(&self, k: usize) -> f64;

    /// `dist(x, X_k^*)` when an oracle exists.
    fn distance(&self, _k: usize, _x: &[f64]) -> Option<f64> {
        None
    }

    fn value(&self, k: usize, x: &[f64]) -> Result<f64, AdError> {
        Ok(self.smooth(k).value(x)? + self.regularizer(k).value(x))
    }
}

type DistanceFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A fixed objective viewed as a sequence.
pub struct StaticSequence<F> {
    f: F,
    reg: Regularizer,
    optimum: f64,
    dist: Option<DistanceFn>,
}

impl<F: ScalarFunction> StaticSequence<F> {
    pub fn new(f: F, optimum: f64) -> Self {
        StaticSequence { f, reg: Regularizer::Zero, optimum, dist: None }
    }

    pub fn with_regularizer(mut self, reg: Regularizer) -> Self {
        self.reg = reg;
        self
    }

    pub fn with_distance(mut self, dist: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.dist = Some(Box::new(dist));
        self
    }

    pub fn objective(&self) -> &F {
        &self.f
    }
}

impl<F: ScalarFunction> ObjectiveSequence for StaticSequence<F> {
    type Smooth = F;

    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn len(&self) -> usize {
        usize::MAX
    }
    fn smooth(&self, _k: usize) -> &F {
        &self.f
    }
    fn regularizer(&self, _k: usize) -> Regularizer {
        self.reg
    }
    fn optimal_value(&self, _k: usize) -> f64 {
        self.optimum
    }
    fn distance(&self, _k: usize, x: &[f64]) -> Option<f64> {
        self.dist.as_ref().map(|d| d(x))
    }
}

/// Precomputed least-squares path, optionally with an l1 term.
///
/// With `lambda = 0` the optimal values and distances are exact
/// (pseudoinverse). With `lambda > 0` each `L_k^*` and minimizer comes from
/// an exact-gradient proximal-gradient solve, warm-started along the path,
/// and the minimizer is assumed unique.
#[derive(Debug, Clone)]
pub struct LsqSequence {
    instances: Vec<LinearLsqInstance>,
    reg: Regularizer,
    optimal: Vec<f64>,
    oracle: Oracle,
}

#[derive(Debug, Clone)]
enum Oracle {
    Affine(Vec<DMatrix<f64>>),
    Minimizer(Vec<DVector<f64>>),
}

/// Tolerance of the inner solve used for `L_k^*` of l1 paths.
pub const INNER_SOLVE_TOL: f64 = 1e-10;

impl LsqSequence {
    pub fn new(instances: Vec<LinearLsqInstance>) -> Result<Self, ProblemError> {
        Self::with_l1(instances, 0.0)
    }

    pub fn with_l1(instances: Vec<LinearLsqInstance>, lambda: f64) -> Result<Self, ProblemError> {
        if instances.is_empty() {
            return Err(ProblemError::InvalidDimensions("empty instance list".into()));
        }
        if !(lambda >= 0.0) {
            return Err(ProblemError::InvalidDimensions("lambda must be nonnegative".into()));
        }
        if lambda == 0.0 {
            let mut pinvs = Vec::with_capacity(instances.len());
            let mut optimal = Vec::with_capacity(instances.len());
            for inst in &instances {
                let pinv = pseudo_inverse(&inst.a);
                // L* = 1/2 |(I - A A^+) b|^2, zero for consistent systems
                let fitted = &inst.a * (&pinv * &inst.b);
                let res = (fitted - &inst.b).norm_squared();
                optimal.push(if res <= 1e-18 * (1.0 + inst.b.norm_squared()) { 0.0 } else { 0.5 * res });
                pinvs.push(pinv);
            }
            return Ok(LsqSequence { instances, reg: Regularizer::Zero, optimal, oracle: Oracle::Affine(pinvs) });
        }
        let reg = Regularizer::L1 { lambda };
        let m = instances[0].a.ncols();
        let mut warm = vec![0.0; m];
        let mut optimal = Vec::with_capacity(instances.len());
        let mut minimizers = Vec::with_capacity(instances.len());
        for inst in &instances {
            let beta = lsq_constants(inst).beta;
            let opts = ProxGradientOptions { step: 1.0 / beta, tol: INNER_SOLVE_TOL, max_iter: 2_000_000 };
            let sol = proximal_gradient(inst, reg, &warm, &opts)?;
            warm.clone_from(&sol.x);
            optimal.push(inst.loss(&sol.x) + reg.value(&sol.x));
            minimizers.push(DVector::from_vec(sol.x));
        }
        Ok(LsqSequence { instances, reg, optimal, oracle: Oracle::Minimizer(minimizers) })
    }

    pub fn from_generator(gen: &mut DriftingLsqGenerator, horizon: usize, lambda: f64) -> Result<Self, ProblemError> {
        Self::with_l1(gen.instances(horizon)?, lambda)
    }

    pub fn instance(&self, k: usize) -> &LinearLsqInstance {
        &self.instances[k]
    }

    pub fn instances(&self) -> &[LinearLsqInstance] {
        &self.instances
    }

    /// Minimizer of `L_k` (the least-norm one for plain least squares).
    pub fn minimizer(&self, k: usize) -> DVector<f64> {
        match &self.oracle {
            Oracle::Affine(p) => &p[k] * &self.instances[k].b,
            Oracle::Minimizer(v) => v[k].clone(),
        }
    }
}

impl ObjectiveSequence for LsqSequence {
    type Smooth = LinearLsqInstance;

    fn dim(&self) -> usize {
        self.instances[0].a.ncols()
    }
    fn len(&self) -> usize {
        self.instances.len()
    }
    fn smooth(&self, k: usize) -> &LinearLsqInstance {
        &self.instances[k]
    }
    fn regularizer(&self, _k: usize) -> Regularizer {
        self.reg
    }
    fn optimal_value(&self, k: usize) -> f64 {
        self.optimal[k]
    }
    fn distance(&self, k: usize, x: &[f64]) -> Option<f64> {
        Some(match &self.oracle {
            Oracle::Affine(p) => (&p[k] * self.instances[k].residual(x)).norm(),
            Oracle::Minimizer(v) => (DVector::from_column_slice(x) - &v[k]).norm(),
        })
    }
}

/// Empirical drift `(eta0_hat, eta_star_hat)` along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub eta0_hat: f64,
    pub eta_star_hat: f64,
}

/// `eta0_hat = max_k [L_{k+1}(x_k) - L_k(x_k)]^+` and
/// `eta_star_hat = max_k [L*_{k+1} - L*_k]^+`, for `trajectory[k] = x_k`.
pub fn measure_drift<S: ObjectiveSequence + ?Sized>(seq: &S, trajectory: &[Vec<f64>]) -> Result<DriftEstimate, AdError> {
    assert!(!trajectory.is_empty(), "measure_drift needs a nonempty trajectory");
    let steps = trajectory.len().min(seq.len().saturating_sub(1));
    let mut eta0: f64 = 0.0;
    let mut eta_star: f64 = 0.0;
    for (k, x) in trajectory.iter().take(steps).enumerate() {
        eta0 = eta0.max(seq.value(k + 1, x)? - seq.value(k, x)?);
        eta_star = eta_star.max(seq.optimal_value(k + 1) - seq.optimal_value(k));
    }
    Ok(DriftEstimate { eta0_hat: eta0, eta_star_hat: eta_star })
}

/// `min 2 (L(x) - L*) / dist(x)^2` over samples with positive distance;
/// a non-constructive quadratic-growth constant estimated from data.
pub fn empirical_growth_constant(samples: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    samples
        .into_iter()
        .filter(|&(_, d)| d > 0.0)
        .map(|(gap, d)| 2.0 * gap / (d * d))
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
}
