//! Monte Carlo positioning-error sweeps, condition numbers of `G^H G` and
//! per-iteration timing.

use std::cmp::Ordering;
use std::io::Write;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assignment;
use crate::error::{Error, Result};
use crate::fri::{self, DEFAULT_DIRAC_SEPARATION, DEFAULT_SAMPLE_SEPARATION};
use crate::genfri::{random_reference_filter, GenFriSystem};
use crate::io::format_f64;
use crate::linalg::{self, ZERO};
use crate::solvers::{self, CpgdUpdate, ForwardModel, Method, Radius, SolverConfig, StoppingRule};

pub const RECORD_HEADER: [&str; 9] = [
    "method",
    "gamma",
    "psnr_db",
    "trial",
    "seed",
    "positioning_error",
    "iterations",
    "wall_time_ms",
    "converged",
];
pub const SUMMARY_HEADER: [&str; 7] = ["method", "gamma", "psnr_db", "median_error", "q25", "q75", "n_trials"];

/// Positioning error assigned to a trial whose recovery failed outright.
pub const FAILED_TRIAL_ERROR: f64 = 0.5;
pub const DEFAULT_TRIALS: usize = 24;
pub const FULL_TRIALS: usize = 192;

/// `min(|t - w|, 1 - |t - w|)` for `t, w` in `[0, 1)`.
pub fn circular_distance(t: f64, w: f64) -> f64 {
    let d = (t - w).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Mean circular distance under the optimal one-to-one matching.
pub fn positioning_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(Error::Dimension(format!(
            "{} true vs {} estimated locations",
            truth.len(),
            estimate.len()
        )));
    }
    let k = truth.len();
    let cost = Array2::from_shape_fn((k, k), |(i, j)| circular_distance(truth[i], estimate[j]));
    let a = assignment::hungarian(cost.view())?;
    Ok(assignment::assignment_cost(cost.view(), &a) / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub k: usize,
    pub samples: usize,
    pub gammas: Vec<usize>,
    pub psnrs: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    pub map_iterations: usize,
    pub max_iter: usize,
    pub stopping: StoppingRule,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            k: 9,
            samples: 73,
            gammas: vec![1, 2, 3, 4, 5],
            psnrs: vec![-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0],
            trials: DEFAULT_TRIALS,
            methods: Method::ALL.to_vec(),
            base_seed: 0,
            map_iterations: crate::denoise::DEFAULT_MAP_ITERATIONS,
            max_iter: solvers::DEFAULT_MAX_ITER,
            stopping: StoppingRule::default(),
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.samples == 0 || self.trials == 0 {
            return Err(Error::Parameter("K, L and trials must all be at least 1".into()));
        }
        if self.gammas.is_empty() || self.gammas.contains(&0) {
            return Err(Error::Parameter("gamma values must be at least 1".into()));
        }
        if self.psnrs.is_empty() || self.psnrs.iter().any(|p| p.is_nan()) {
            return Err(Error::Parameter("PSNR list must be nonempty and not NaN".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Parameter("no methods selected".into()));
        }
        Ok(())
    }

    pub fn half_bandwidth(&self, gamma: usize) -> usize {
        gamma * self.k
    }

    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            map_iterations: self.map_iterations,
            max_iter: self.max_iter,
            stopping: self.stopping,
            seed,
            ..SolverConfig::new(self.k)
        }
    }
}

/// One random instance: stream, scheme and noisy measurements.
#[derive(Debug, Clone)]
pub struct TrialInstance {
    pub stream: fri::DiracStream,
    pub scheme: fri::SamplingScheme,
    pub sigma: f64,
    pub model: ForwardModel,
}

/// Trial instance for seed `seed`. The stream and the sampling times depend
/// on the seed only, so cells sharing a trial index are paired.
pub fn trial_instance(
    k: usize,
    samples: usize,
    half_bandwidth: usize,
    psnr_db: f64,
    seed: u64,
) -> Result<TrialInstance> {
    let stream = fri::random_stream(k, fri::derive_seed(seed, 1), DEFAULT_DIRAC_SEPARATION)?;
    let scheme = fri::random_scheme(
        samples,
        half_bandwidth,
        fri::derive_seed(seed, 2),
        DEFAULT_SAMPLE_SEPARATION,
    )?;
    let sigma = fri::psnr_to_sigma(stream.max_amplitude(), psnr_db);
    let model = fri::synthesize_measurements(&stream, &scheme, sigma, fri::derive_seed(seed, 3))?;
    Ok(TrialInstance {
        stream,
        scheme,
        sigma,
        model,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub method: Method,
    pub gamma: usize,
    pub psnr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub positioning_error: f64,
    pub iterations: usize,
    pub wall_time_ms: f64,
    pub converged: bool,
    /// Why the trial failed, if it did; not part of the CSV output.
    pub failure: Option<String>,
}

impl BenchmarkRecord {
    fn sort_key(&self, other: &Self) -> Ordering {
        self.method
            .cmp(&other.method)
            .then(self.gamma.cmp(&other.gamma))
            .then(self.psnr_db.total_cmp(&other.psnr_db))
            .then(self.trial.cmp(&other.trial))
    }
}

/// Recovers one instance and scores the located Diracs.
pub fn run_trial(grid: &ExperimentGrid, method: Method, gamma: usize, psnr_db: f64, trial: usize) -> BenchmarkRecord {
    let seed = grid.base_seed.wrapping_add(trial as u64);
    let start = Instant::now();
    let outcome = (|| -> Result<(f64, usize, bool)> {
        let inst = trial_instance(grid.k, grid.samples, grid.half_bandwidth(gamma), psnr_db, seed)?;
        let cfg = grid.solver_config(seed);
        let trace = solvers::recover(&inst.model, method, &cfg)?;
        let order = cfg.order_for(inst.model.n());
        let est = fri::recover_locations(trace.coefficients.values(), grid.k, order)?;
        let truth: Vec<f64> = inst.stream.locations.clone();
        Ok((positioning_error(&truth, &est)?, trace.iterations, trace.converged))
    })();
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let (positioning_error, iterations, converged, failure) = match outcome {
        Ok((e, it, c)) => (e, it, c, None),
        Err(e) => (FAILED_TRIAL_ERROR, 0, false, Some(e.to_string())),
    };
    BenchmarkRecord {
        method,
        gamma,
        psnr_db,
        trial,
        seed,
        positioning_error,
        iterations,
        wall_time_ms,
        converged,
        failure,
    }
}

/// GenFRI needs an injective forward matrix, i.e. `2 gamma K + 1 <= L`.
pub fn method_applies(grid: &ExperimentGrid, method: Method, gamma: usize) -> bool {
    method != Method::GenFri || 2 * grid.half_bandwidth(gamma) < grid.samples
}

/// Every (method, gamma, PSNR, trial) cell, run in parallel, sorted by that key.
pub fn run_sweep(grid: &ExperimentGrid) -> Result<Vec<BenchmarkRecord>> {
    grid.validate()?;
    let mut tasks = Vec::new();
    for &method in &grid.methods {
        for &gamma in &grid.gammas {
            if !method_applies(grid, method, gamma) {
                continue;
            }
            for &psnr in &grid.psnrs {
                for trial in 0..grid.trials {
                    tasks.push((method, gamma, psnr, trial));
                }
            }
        }
    }
    let mut records: Vec<BenchmarkRecord> = tasks
        .into_par_iter()
        .map(|(m, g, p, t)| run_trial(grid, m, g, p, t))
        .collect();
    records.sort_by(|a, b| a.sort_key(b));
    Ok(records)
}

/// Linearly interpolated quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub gamma: usize,
    pub psnr_db: f64,
    pub median_error: f64,
    pub q25: f64,
    pub q75: f64,
    pub n_trials: usize,
}

/// Median and quartiles of the positioning error per (method, gamma, PSNR).
pub fn summarize(records: &[BenchmarkRecord]) -> Vec<SummaryRow> {
    let mut sorted: Vec<&BenchmarkRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.sort_key(b));
    let mut rows = Vec::new();
    for cell in sorted.chunk_by(|a, b| a.method == b.method && a.gamma == b.gamma && a.psnr_db == b.psnr_db) {
        let mut errs: Vec<f64> = cell.iter().map(|r| r.positioning_error).collect();
        errs.sort_by(f64::total_cmp);
        rows.push(SummaryRow {
            method: cell[0].method,
            gamma: cell[0].gamma,
            psnr_db: cell[0].psnr_db,
            median_error: quantile(&errs, 0.5),
            q25: quantile(&errs, 0.25),
            q75: quantile(&errs, 0.75),
            n_trials: errs.len(),
        });
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub gamma: usize,
    pub n: usize,
    /// Median of `kappa(G^H G)` over the scheme draws; infinite when `N > L`.
    pub median_condition: f64,
    pub injective: bool,
}

/// Condition number of `G^H G` per gamma, median over `draws` random schemes.
pub fn condition_table(
    k: usize,
    samples: usize,
    gammas: &[usize],
    draws: usize,
    base_seed: u64,
) -> Result<Vec<ConditionRow>> {
    if draws == 0 {
        return Err(Error::Parameter("need at least one scheme draw".into()));
    }
    gammas
        .iter()
        .map(|&gamma| {
            let m = gamma * k;
            let mut kappas = Vec::with_capacity(draws);
            let mut injective = true;
            for d in 0..draws {
                let seed = fri::derive_seed(base_seed.wrapping_add(d as u64), 2);
                let scheme = fri::random_scheme(samples, m, seed, DEFAULT_SAMPLE_SEPARATION)?;
                let g = fri::build_forward_matrix(&scheme);
                let model = ForwardModel::new(g, Array1::from_elem(samples, ZERO))?;
                injective &= model.is_injective()?;
                kappas.push(model.gram_condition()?);
            }
            kappas.sort_by(f64::total_cmp);
            Ok(ConditionRow {
                gamma,
                n: 2 * m + 1,
                median_condition: quantile(&kappas, 0.5),
                injective,
            })
        })
        .collect()
}

/// Iteration counts used to turn per-iteration cost into a full reconstruction.
pub const CPGD_TYPICAL_ITERATIONS: f64 = 100.0;
pub const GENFRI_TYPICAL_ITERATIONS: f64 = 750.0;

pub fn default_timing_sizes() -> Vec<usize> {
    vec![19, 37, 73, 145, 289, 577, 1153, 1999]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: Method,
    pub n: usize,
    pub iteration_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingStudy {
    pub rows: Vec<TimingRow>,
    /// Least-squares slope of log(iteration time) against log(N), per method.
    pub slopes: Vec<(Method, f64)>,
}

fn median_duration(mut samples: Vec<Duration>) -> Duration {
    samples.sort();
    samples[samples.len() / 2]
}

/// Median over `repeats` runs after one discarded warm-up run.
fn time_median<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<Duration> {
    f()?;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        f()?;
        samples.push(t.elapsed());
    }
    Ok(median_duration(samples))
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Per-iteration wall time of CPGD and GenFRI with `L = N` and `P = M`.
pub fn timing_study(sizes: &[usize], k: usize, methods: &[Method], repeats: usize, seed: u64) -> Result<TimingStudy> {
    if sizes.iter().any(|&n| n % 2 == 0 || n < 2 * k + 1) {
        return Err(Error::Parameter(format!(
            "sizes must be odd and at least 2K + 1 = {}",
            2 * k + 1
        )));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let m = n / 2;
        let sep = DEFAULT_SAMPLE_SEPARATION.min(0.5 / n as f64);
        let stream = fri::random_stream(k, fri::derive_seed(seed, 1), DEFAULT_DIRAC_SEPARATION)?;
        let scheme = fri::random_scheme(n, m, fri::derive_seed(seed, 2), sep)?;
        let sigma = fri::psnr_to_sigma(stream.max_amplitude(), 20.0);
        let model = fri::synthesize_measurements(&stream, &scheme, sigma, fri::derive_seed(seed, 3))?;
        for &method in methods {
            let per_iter = match method {
                Method::Cpgd => {
                    let cfg = SolverConfig {
                        radius: Radius::Infinite,
                        ..SolverConfig::new(k)
                    };
                    let update = CpgdUpdate::new(&model, &cfg)?;
                    let x1 = update.apply(Array1::from_elem(n, ZERO).view())?;
                    time_median(repeats, || update.apply(x1.view()).map(drop))?
                }
                Method::GenFri => {
                    let system = GenFriSystem::new(&model, m)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let h0 = random_reference_filter(&mut rng, m + 1);
                    let h = h0.mapv(|z| z / linalg::norm2(h0.view()).powi(2));
                    time_median(repeats, || {
                        let next = system.h_update(h.view(), h0.view())?;
                        system.x_update(next.view()).map(drop)
                    })?
                }
                Method::LsCadzow => continue,
            };
            let iteration_ms = per_iter.as_secs_f64() * 1e3;
            let scale = match method {
                Method::Cpgd => CPGD_TYPICAL_ITERATIONS,
                _ => GENFRI_TYPICAL_ITERATIONS,
            };
            rows.push(TimingRow {
                method,
                n,
                iteration_ms,
                total_ms: iteration_ms * scale,
            });
        }
    }
    let mut slopes = Vec::new();
    for &method in methods {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.n as f64, r.iteration_ms))
            .unzip();
        if xs.len() >= 2 {
            slopes.push((method, loglog_slope(&xs, &ys)));
        }
    }
    Ok(TimingStudy { rows, slopes })
}

pub fn write_records<W: Write>(out: W, records: &[BenchmarkRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.method.name().to_string(),
            r.gamma.to_string(),
            format_f64(r.psnr_db),
            r.trial.to_string(),
            r.seed.to_string(),
            format_f64(r.positioning_error),
            r.iterations.to_string(),
            format_f64(r.wall_time_ms),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.gamma.to_string(),
            format_f64(r.psnr_db),
            format_f64(r.median_error),
            format_f64(r.q25),
            format_f64(r.q75),
            r.n_trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_conditions<W: Write>(out: W, rows: &[ConditionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma", "n", "median_condition", "injective"])?;
    for r in rows {
        w.write_record([
            r.gamma.to_string(),
            r.n.to_string(),
            format_f64(r.median_condition),
            r.injective.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings<W: Write>(out: W, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "n", "iteration_ms", "total_ms"])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.n.to_string(),
            format_f64(r.iteration_ms),
            format_f64(r.total_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slopes<W: Write>(out: W, slopes: &[(Method, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "slope"])?;
    for (m, s) in slopes {
        w.write_record([m.name().to_string(), format_f64(*s)])?;
    }
    w.flush()?;
    Ok(())
}
