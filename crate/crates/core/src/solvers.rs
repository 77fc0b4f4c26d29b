//! Forward model, step-size rules, CPGD and the least-squares + Cadzow
//! baseline. GenFRI lives in [`crate::genfri`].

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::denoise::{self, DenoiseConfig, DEFAULT_MAP_ITERATIONS};
use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::lowrank::{self, DenseOperator, DEFAULT_SVD_SEED};
use crate::toeplitz::FourierVector;

/// `sigma_min(G) > INJECTIVITY_TOL * sigma_max(G)` counts as injective.
pub const INJECTIVITY_TOL: f64 = 1e-10;
/// Relative singular-value cutoff of the least-squares estimate.
pub const LS_RCOND: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_REL_TOL: f64 = 1e-4;

/// Below this many columns the largest singular value comes from a dense SVD.
const DENSE_SPECTRUM_LIMIT: usize = 512;

/// Linear measurement model `y = G x + noise`.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    matrix: Array2<C64>,
    observations: Array1<C64>,
    singular_values: OnceLock<Array1<f64>>,
}

impl ForwardModel {
    pub fn new(matrix: Array2<C64>, observations: Array1<C64>) -> Result<Self> {
        let (l, n) = matrix.dim();
        if l == 0 {
            return Err(Error::Dimension("forward matrix has no rows".into()));
        }
        if n < 3 || n % 2 == 0 {
            return Err(Error::Dimension(format!(
                "forward matrix needs an odd column count >= 3, got {n}"
            )));
        }
        if observations.len() != l {
            return Err(Error::Dimension(format!(
                "{} observations for {l} rows",
                observations.len()
            )));
        }
        Ok(Self {
            matrix,
            observations,
            singular_values: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> ArrayView2<'_, C64> {
        self.matrix.view()
    }

    pub fn observations(&self) -> ArrayView1<'_, C64> {
        self.observations.view()
    }

    /// Number of measurements `L`.
    pub fn samples(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of Fourier coefficients `N = 2M + 1`.
    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn half_bandwidth(&self) -> usize {
        self.n() / 2
    }

    fn check_len(&self, x: ArrayView1<C64>) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!(
                "vector of length {} for {} columns",
                x.len(),
                self.n()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: ArrayView1<C64>) -> Result<Array1<C64>> {
        self.check_len(x)?;
        Ok(self.matrix.dot(&x))
    }

    pub fn apply_adjoint(&self, r: ArrayView1<C64>) -> Result<Array1<C64>> {
        if r.len() != self.samples() {
            return Err(Error::Dimension(format!(
                "vector of length {} for {} rows",
                r.len(),
                self.samples()
            )));
        }
        Ok(self.matrix.t().dot(&r.mapv(|z| z.conj())).mapv(|z| z.conj()))
    }

    /// `G x - y`.
    pub fn residual(&self, x: ArrayView1<C64>) -> Result<Array1<C64>> {
        Ok(self.apply(x)? - &self.observations)
    }

    pub fn residual_norm(&self, x: ArrayView1<C64>) -> Result<f64> {
        Ok(linalg::norm2(self.residual(x)?.view()))
    }

    /// Singular values of `G`, nonincreasing, computed once.
    pub fn singular_values(&self) -> Result<&Array1<f64>> {
        if let Some(s) = self.singular_values.get() {
            return Ok(s);
        }
        let s = linalg::singular_values(self.matrix.view())?;
        Ok(self.singular_values.get_or_init(|| s))
    }

    /// `sigma_min / sigma_max` over all `N` columns; zero when `L < N`.
    pub fn injectivity_ratio(&self) -> Result<f64> {
        if self.samples() < self.n() {
            return Ok(0.0);
        }
        let s = self.singular_values()?;
        let smax = s[0];
        Ok(if smax > 0.0 { s[s.len() - 1] / smax } else { 0.0 })
    }

    pub fn is_injective(&self) -> Result<bool> {
        Ok(self.injectivity_ratio()? > INJECTIVITY_TOL)
    }

    /// `kappa(G^H G) = (sigma_max / sigma_min)^2`, infinite when `L < N`.
    pub fn gram_condition(&self) -> Result<f64> {
        let r = self.injectivity_ratio()?;
        Ok(if r > 0.0 { r.powi(-2) } else { f64::INFINITY })
    }

    /// `(alpha, beta) = (2 lambda_min, 2 lambda_max)` of `G^H G`.
    pub fn spectral_bounds(&self) -> Result<(f64, f64)> {
        let s = self.singular_values()?;
        let beta = 2.0 * s[0] * s[0];
        let alpha = if self.samples() < self.n() {
            0.0
        } else {
            2.0 * s[s.len() - 1].powi(2)
        };
        Ok((alpha, beta))
    }

    /// `beta = 2 lambda_max(G^H G)` without a full SVD for large `N`.
    pub fn lipschitz_beta(&self) -> Result<f64> {
        if let Some(s) = self.singular_values.get() {
            return Ok(2.0 * s[0] * s[0]);
        }
        if self.n() <= DENSE_SPECTRUM_LIMIT {
            return Ok(self.spectral_bounds()?.1);
        }
        largest_gram_eigenvalue(self.matrix.view()).map(|l| 2.0 * l)
    }
}

/// `(2 lambda_min(G^H G), 2 lambda_max(G^H G))` from a dense SVD of `G`.
pub fn spectral_bounds(g: ArrayView2<C64>) -> Result<(f64, f64)> {
    let s = linalg::singular_values(g)?;
    if s.is_empty() || s[0] == 0.0 {
        return Err(Error::Parameter("spectral bounds of a zero matrix".into()));
    }
    let alpha = if g.nrows() < g.ncols() {
        0.0
    } else {
        2.0 * s[s.len() - 1].powi(2)
    };
    Ok((alpha, 2.0 * s[0] * s[0]))
}

/// `lambda_max(G^H G) = sigma_1(G)^2` by Lanczos bidiagonalisation, with a
/// dense fallback if it stalls.
pub fn largest_gram_eigenvalue(g: ArrayView2<C64>) -> Result<f64> {
    match lowrank::partial_svd(&DenseOperator(g), 1, 1e-12, DEFAULT_SVD_SEED) {
        Ok(p) => Ok(p.singular_values[0].powi(2)),
        Err(Error::NoConvergence(_)) => Ok(linalg::singular_values(g)?[0].powi(2)),
        Err(e) => Err(e),
    }
}

/// Open interval of step sizes for which the CPGD update map is a local
/// contraction: `(1 -+ 1/sqrt(P+1)) / beta`.
pub fn step_size_range(beta: f64, order: usize) -> Result<(f64, f64)> {
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    let r = 1.0 / ((order + 1) as f64).sqrt();
    Ok(((1.0 - r) / beta, (1.0 + r) / beta))
}

/// Lipschitz constant `max(|1 - tau alpha|, |1 - tau beta|)` of the gradient step.
pub fn gradient_lipschitz(alpha: f64, beta: f64, tau: f64) -> f64 {
    (1.0 - tau * alpha).abs().max((1.0 - tau * beta).abs())
}

/// `x - 2 tau G^H (G x - y)`.
pub fn gradient_step(x: ArrayView1<C64>, model: &ForwardModel, tau: f64) -> Result<Array1<C64>> {
    let grad = model.apply_adjoint(model.residual(x)?.view())?;
    Ok(&x - &grad.mapv(|z| z * (2.0 * tau)))
}

/// Recovery method selector shared by the CLI and the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Cpgd,
    GenFri,
    LsCadzow,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cpgd, Method::GenFri, Method::LsCadzow];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cpgd => "cpgd",
            Method::GenFri => "genfri",
            Method::LsCadzow => "ls-cadzow",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cpgd" => Ok(Method::Cpgd),
            "genfri" => Ok(Method::GenFri),
            "ls-cadzow" | "lscadzow" | "ls_cadzow" => Ok(Method::LsCadzow),
            other => Err(Error::Parse(format!(
                "unknown method '{other}' (expected cpgd, genfri or ls-cadzow)"
            ))),
        }
    }
}

/// Radius of the weighted ball in the proximal step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    /// Infinite for injective `G` with `L >= N`, else `||y||_2`.
    Auto,
    Infinite,
    Finite(f64),
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Auto => f.write_str("auto"),
            Radius::Infinite => f.write_str("inf"),
            Radius::Finite(r) => write!(f, "{r}"),
        }
    }
}

impl FromStr for Radius {
    type Err = Error;

    /// `auto`, `inf` or a positive number.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Radius::Auto),
            "inf" | "infinite" => Ok(Radius::Infinite),
            other => match other.parse::<f64>() {
                Ok(r) if r > 0.0 && r.is_infinite() => Ok(Radius::Infinite),
                Ok(r) if r > 0.0 => Ok(Radius::Finite(r)),
                _ => Err(Error::Parse(format!(
                    "bad radius '{other}' (expected auto, inf or a positive number)"
                ))),
            },
        }
    }
}

/// Quantity compared against `rel_tol` to stop CPGD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StoppingRule {
    /// `| ||x_{k+1}|| - ||x_k|| | / ||x_k||`, the change of the iterate norm.
    #[default]
    NormChange,
    /// `||x_{k+1} - x_k|| / ||x_k||`.
    IterateChange,
}

impl StoppingRule {
    pub fn name(self) -> &'static str {
        match self {
            StoppingRule::NormChange => "norm-change",
            StoppingRule::IterateChange => "iterate-change",
        }
    }
}

impl fmt::Display for StoppingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StoppingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm-change" => Ok(StoppingRule::NormChange),
            "iterate-change" => Ok(StoppingRule::IterateChange),
            other => Err(Error::Parse(format!(
                "unknown stopping rule '{other}' (expected norm-change or iterate-change)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    /// Embedding order `P`; `None` means `P = M`.
    pub order: Option<usize>,
    /// Step size `tau`; `None` means `1 / beta`.
    pub step: Option<f64>,
    pub radius: Radius,
    pub map_iterations: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub stopping: StoppingRule,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            order: None,
            step: None,
            radius: Radius::Auto,
            map_iterations: DEFAULT_MAP_ITERATIONS,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
            stopping: StoppingRule::default(),
            seed: 0,
        }
    }

    pub fn order_for(&self, n: usize) -> usize {
        self.order.unwrap_or(n / 2)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let m = n / 2;
        let p = self.order_for(n);
        if self.rank == 0 || self.rank > p || p > m {
            return Err(Error::Parameter(format!(
                "need 1 <= K <= P <= M, got K = {}, P = {p}, M = {m}",
                self.rank
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Parameter(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be at least 1".into()));
        }
        if let Some(tau) = self.step {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::Parameter(format!(
                    "step size must be positive and finite, got {tau}"
                )));
            }
        }
        if let Radius::Finite(r) = self.radius {
            if !(r > 0.0) {
                return Err(Error::Parameter(format!("radius must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryTrace {
    pub method: Method,
    pub coefficients: FourierVector,
    pub iterations: usize,
    /// `||G x_k - y||_2` after each iteration.
    pub residuals: Vec<f64>,
    /// Relative change after each iteration, as measured by the stopping
    /// rule (CPGD) or `||x_k - x_{k-1}|| / ||x_{k-1}||` (other methods).
    pub relative_changes: Vec<f64>,
    /// `||x_k - x_{k-1}||` after each iteration.
    pub step_norms: Vec<f64>,
    pub converged: bool,
    pub wall_time: Duration,
    /// Step size actually used (CPGD only).
    pub step: Option<f64>,
    pub beta: Option<f64>,
    /// Ball radius actually used (CPGD only).
    pub radius: Option<f64>,
}

/// The CPGD update map `U(x) = prox(x - 2 tau G^H (G x - y))` with its
/// resolved step size and radius.
#[derive(Debug, Clone)]
pub struct CpgdUpdate<'a> {
    model: &'a ForwardModel,
    pub tau: f64,
    pub beta: f64,
    pub denoise: DenoiseConfig,
}

impl<'a> CpgdUpdate<'a> {
    pub fn new(model: &'a ForwardModel, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate(model.n())?;
        let beta = model.lipschitz_beta()?;
        if !(beta > 0.0) {
            return Err(Error::Parameter("forward matrix is zero".into()));
        }
        let tau = cfg.step.unwrap_or(1.0 / beta);
        let radius = match cfg.radius {
            Radius::Infinite => f64::INFINITY,
            Radius::Finite(r) => r,
            Radius::Auto => {
                if model.samples() >= model.n() && model.is_injective()? {
                    f64::INFINITY
                } else {
                    let r = linalg::norm2(model.observations());
                    if r > 0.0 {
                        r
                    } else {
                        f64::INFINITY
                    }
                }
            }
        };
        Ok(Self {
            model,
            tau,
            beta,
            denoise: DenoiseConfig {
                rank: cfg.rank,
                order: cfg.order_for(model.n()),
                iterations: cfg.map_iterations,
                radius,
            },
        })
    }

    pub fn apply(&self, x: ArrayView1<C64>) -> Result<Array1<C64>> {
        let z = gradient_step(x, self.model, self.tau)?;
        denoise::inexact_prox(z.view(), &self.denoise)
    }
}

/// Cadzow plug-and-play gradient descent from `x_0 = 0`.
pub fn cpgd(model: &ForwardModel, cfg: &SolverConfig) -> Result<RecoveryTrace> {
    let start = Instant::now();
    let update = CpgdUpdate::new(model, cfg)?;
    let mut x = Array1::from_elem(model.n(), ZERO);
    let mut residuals = Vec::new();
    let mut relative_changes = Vec::new();
    let mut step_norms = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let next = update.apply(x.view())?;
        if !linalg::all_finite(next.view()) {
            return Err(Error::NonFinite(format!("CPGD iterate {}", residuals.len() + 1)));
        }
        let step = linalg::norm2((&next - &x).view());
        let base = linalg::norm2(x.view());
        let delta = match cfg.stopping {
            StoppingRule::IterateChange => step,
            StoppingRule::NormChange => (linalg::norm2(next.view()) - base).abs(),
        };
        let change = if base > 0.0 {
            delta / base
        } else if step == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        x = next;
        residuals.push(model.residual_norm(x.view())?);
        relative_changes.push(change);
        step_norms.push(step);
        if change < cfg.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(RecoveryTrace {
        method: Method::Cpgd,
        coefficients: FourierVector::new(x)?,
        iterations: residuals.len(),
        residuals,
        relative_changes,
        step_norms,
        converged,
        wall_time: start.elapsed(),
        step: Some(update.tau),
        beta: Some(update.beta),
        radius: Some(update.denoise.radius),
    })
}

/// Minimum-norm least-squares estimate with a relative singular-value
/// cutoff. Returns the estimate and the number of singular values kept.
pub fn least_squares(model: &ForwardModel, rcond: f64) -> Result<(Array1<C64>, usize)> {
    linalg::lstsq(model.matrix(), model.observations(), rcond)
}

/// Least-squares estimate followed by Cadzow denoising.
pub fn ls_cadzow(model: &ForwardModel, cfg: &SolverConfig) -> Result<RecoveryTrace> {
    let start = Instant::now();
    cfg.validate(model.n())?;
    let (x_ls, _) = least_squares(model, LS_RCOND)?;
    let dcfg = DenoiseConfig::cadzow(cfg.rank, cfg.order_for(model.n()), cfg.map_iterations);
    let x = denoise::cadzow_denoise(x_ls.view(), &dcfg)?;
    let step = linalg::norm2((&x - &x_ls).view());
    let base = linalg::norm2(x_ls.view());
    let change = if base > 0.0 { step / base } else { 0.0 };
    let residual = model.residual_norm(x.view())?;
    Ok(RecoveryTrace {
        method: Method::LsCadzow,
        coefficients: FourierVector::new(x)?,
        iterations: 1,
        residuals: vec![residual],
        relative_changes: vec![change],
        step_norms: vec![step],
        converged: true,
        wall_time: start.elapsed(),
        step: None,
        beta: None,
        radius: None,
    })
}

/// Runs the chosen method with GenFRI's default iteration counts.
pub fn recover(model: &ForwardModel, method: Method, cfg: &SolverConfig) -> Result<RecoveryTrace> {
    match method {
        Method::Cpgd => cpgd(model, cfg),
        Method::LsCadzow => ls_cadzow(model, cfg),
        Method::GenFri => crate::genfri::genfri(model, cfg, &crate::genfri::GenFriOptions::default()),
    }
}
