//! Command-line front end: `simulate`, `recover`, `denoise`, `bench` and `time`.
//!
//! Every tunable can come from a flag, from a `key = value` config file given
//! with `--config`, or from the built-in default, in that order of
//! precedence. Config keys are the long flag names. The resolved values are
//! written to `<command>.effective.conf` in the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, ExperimentGrid};
use crate::denoise::{self, DenoiseConfig, DEFAULT_MAP_ITERATIONS};
use crate::error::{Error, Result};
use crate::fri::{self, DEFAULT_DIRAC_SEPARATION, DEFAULT_SAMPLE_SEPARATION};
use crate::io;
use crate::solvers::{self, ForwardModel, Method, Radius, SolverConfig, StoppingRule};

/// Environment variable holding the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CPGD_OUTPUT_DIR";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cpgd",
    version,
    about = "Recover periodic Dirac streams from irregular time samples"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,

    /// `key = value` config file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random Dirac stream and sampling scheme, and write noisy samples.
    Simulate(SimulateArgs),
    /// Estimate Fourier coefficients and Dirac locations from samples.
    Recover(RecoverArgs),
    /// Apply Cadzow denoising or the inexact proximal step to coefficients.
    Denoise(DenoiseArgs),
    /// Run the positioning-error sweep and the condition-number table.
    Bench(BenchArgs),
    /// Measure per-iteration cost against the number of coefficients.
    Time(TimeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of Diracs K.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of samples L.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Oversampling factor; the half-bandwidth is M = gamma K.
    #[arg(long)]
    pub gamma: Option<usize>,
    /// Half-bandwidth M, overriding gamma.
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Noise level in dB, sigma = max|a| exp(-psnr / 10); `inf` is noiseless.
    #[arg(long, allow_negative_numbers = true)]
    pub psnr: Option<f64>,
    /// Noise standard deviation, overriding psnr.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Measurement CSV (theta,y_re,y_im); defaults to `<out>/measurements.csv`.
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    /// Metadata written by `simulate`; defaults to `metadata.txt` next to the
    /// measurements when present.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// cpgd, genfri or ls-cadzow.
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Half-bandwidth M.
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Embedding order P (default M).
    #[arg(long)]
    pub order: Option<usize>,
    /// Step size (default 1/beta).
    #[arg(long)]
    pub tau: Option<f64>,
    /// auto, inf or a positive number.
    #[arg(long)]
    pub radius: Option<Radius>,
    /// Alternating projections per proximal step.
    #[arg(long)]
    pub map_iterations: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// norm-change or iterate-change.
    #[arg(long)]
    pub stopping: Option<StoppingRule>,
    /// Seed of the GenFRI initialisations.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Coefficient CSV (m,re,im).
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    /// Output CSV; defaults to `<out>/denoised.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Embedding order P (default M).
    #[arg(long)]
    pub order: Option<usize>,
    /// Number of alternating projections n.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Ball radius, `inf` for plain Cadzow denoising.
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub psnrs: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Use the full number of trials per cell.
    #[arg(long)]
    pub full: bool,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Base seed; trial t uses seed + t.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub map_iterations: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub stopping: Option<StoppingRule>,
    /// Scheme draws per gamma in the condition-number table; 0 skips it.
    #[arg(long)]
    pub condition_draws: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TimeArgs {
    /// Numbers of coefficients N (odd).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Keep only sizes up to this N.
    #[arg(long)]
    pub max_n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Timed runs per size after one warm-up run.
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Layered settings: flag, then config file, then default. Records every
/// resolved value for the sidecar file.
struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    effective: Vec<(String, String)>,
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: Display,
{
    raw.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("config key '{key}': {e}")))
}

fn join<T: Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => io::read_key_values(p)?,
            None => BTreeMap::new(),
        };
        Ok(Self {
            file,
            used: BTreeSet::new(),
            effective: Vec::new(),
        })
    }

    fn from_file<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        self.file.get(key).map(|raw| parse_value(key, raw)).transpose()
    }

    fn record(&mut self, key: &str, value: String) {
        self.effective.push((key.to_string(), value));
    }

    fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let from_file = self.from_file(key)?;
        let v = flag.or(from_file).unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    /// Optional setting; the value `auto` in a config file means unset.
    fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        let from_file = match self.file.get(key).map(|s| s.trim()) {
            None | Some("auto") => None,
            Some(raw) => Some(parse_value(key, raw)?),
        };
        let v = flag.or(from_file).or(default);
        self.record(key, v.as_ref().map_or_else(|| "auto".to_string(), |v| v.to_string()));
        Ok(v)
    }

    fn list<T: FromStr + Display>(&mut self, key: &str, flag: Option<Vec<T>>, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        let from_file = match self.file.get(key) {
            Some(raw) => Some(
                raw.split(',')
                    .map(|s| parse_value(key, s))
                    .collect::<Result<Vec<T>>>()?,
            ),
            None => None,
        };
        let v = flag.or(from_file).unwrap_or(default);
        self.record(key, join(&v));
        Ok(v)
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>, default: Option<PathBuf>) -> Result<Option<PathBuf>> {
        self.used.insert(key.to_string());
        let v = flag.or_else(|| self.file.get(key).map(PathBuf::from)).or(default);
        if let Some(p) = &v {
            self.record(key, p.display().to_string());
        }
        Ok(v)
    }

    /// Rejects config keys that the command does not read, then writes the
    /// sidecar.
    fn finish(self, out: &Path, command: &str) -> Result<()> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !self.used.contains(*k)).collect();
        if !unknown.is_empty() {
            let unknown: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            let known: Vec<&str> = self.used.iter().map(|s| s.as_str()).collect();
            return Err(Error::Parse(format!(
                "unknown config key(s) for '{command}': {}; accepted keys: {}",
                unknown.join(", "),
                known.join(", ")
            )));
        }
        io::write_key_values(out.join(format!("{command}.effective.conf")), &self.effective)
    }
}

/// Result of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

pub fn simulate(out: &Path, config: Option<&Path>, args: SimulateArgs) -> Result<Outcome> {
    let mut s = Settings::load(config)?;
    let k = s.value("k", args.k, 9)?;
    let samples = s.value("samples", args.samples, 73)?;
    let gamma = s.value("gamma", args.gamma, 1)?;
    let half_bandwidth = s.value("bandwidth", args.bandwidth, gamma * k)?;
    let psnr = s.value("psnr", args.psnr, f64::INFINITY)?;
    let sigma_flag = s.optional("sigma", args.sigma, None)?;
    let seed = s.value("seed", args.seed, 0u64)?;
    if k == 0 || samples == 0 || half_bandwidth < k {
        return Err(Error::Parameter(format!(
            "need K >= 1, L >= 1 and M >= K, got K = {k}, L = {samples}, M = {half_bandwidth}"
        )));
    }
    if psnr.is_nan() {
        return Err(Error::Parameter("psnr must be a number or inf".into()));
    }
    if let Some(sig) = sigma_flag {
        if !(sig >= 0.0 && sig.is_finite()) {
            return Err(Error::Parameter(format!(
                "sigma must be finite and nonnegative, got {sig}"
            )));
        }
    }
    prepare_out(out)?;
    s.finish(out, "simulate")?;

    let stream = fri::random_stream(k, fri::derive_seed(seed, 1), DEFAULT_DIRAC_SEPARATION)?;
    let scheme = fri::random_scheme(
        samples,
        half_bandwidth,
        fri::derive_seed(seed, 2),
        DEFAULT_SAMPLE_SEPARATION,
    )?;
    let sigma = sigma_flag.unwrap_or_else(|| fri::psnr_to_sigma(stream.max_amplitude(), psnr));
    let model = fri::synthesize_measurements(&stream, &scheme, sigma, fri::derive_seed(seed, 3))?;

    io::write_stream(out.join("stream.csv"), &stream)?;
    io::write_scheme(out.join("scheme.csv"), &scheme)?;
    io::write_measurements(
        out.join("measurements.csv"),
        &scheme.times,
        &model.observations().to_owned(),
    )?;
    let meta = [
        ("k", k.to_string()),
        ("samples", samples.to_string()),
        ("bandwidth", half_bandwidth.to_string()),
        ("period", io::format_f64(stream.period)),
        ("psnr", io::format_f64(psnr)),
        ("sigma", io::format_f64(sigma)),
        ("max_amplitude", io::format_f64(stream.max_amplitude())),
        ("seed", seed.to_string()),
    ];
    io::write_key_values(out.join("metadata.txt"), &meta)?;
    Ok(Outcome::Done)
}

fn metadata_value<T: FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    meta.get(key).map(|raw| parse_value(key, raw)).transpose()
}

pub fn recover(out: &Path, config: Option<&Path>, args: RecoverArgs) -> Result<Outcome> {
    let mut s = Settings::load(config)?;
    let measurements = s
        .path("measurements", args.measurements, Some(out.join("measurements.csv")))?
        .expect("default path");
    let sibling = measurements.with_file_name("metadata.txt");
    let metadata_path = s.path("metadata", args.metadata, sibling.exists().then_some(sibling))?;
    let meta = match &metadata_path {
        Some(p) => io::read_key_values(p)?,
        None => BTreeMap::new(),
    };
    let method = s.value("method", args.method, Method::Cpgd)?;
    let k = s.value("k", args.k, metadata_value(&meta, "k")?.unwrap_or(9))?;
    let half_bandwidth: usize = match (
        args.bandwidth,
        s.from_file("bandwidth")?,
        metadata_value(&meta, "bandwidth")?,
    ) {
        (Some(m), _, _) | (None, Some(m), _) | (None, None, Some(m)) => m,
        (None, None, None) => {
            return Err(Error::Parameter(
                "half-bandwidth unknown: pass --bandwidth or provide the metadata written by simulate".into(),
            ))
        }
    };
    s.record("bandwidth", half_bandwidth.to_string());
    let order = s.value("order", args.order, half_bandwidth)?;
    let tau = s.optional("tau", args.tau, None)?;
    let radius = s.value("radius", args.radius, Radius::Auto)?;
    let map_iterations = s.value("map-iterations", args.map_iterations, DEFAULT_MAP_ITERATIONS)?;
    let max_iter = s.value("max-iter", args.max_iter, solvers::DEFAULT_MAX_ITER)?;
    let rel_tol = s.value("rel-tol", args.rel_tol, solvers::DEFAULT_REL_TOL)?;
    let stopping = s.value("stopping", args.stopping, StoppingRule::default())?;
    let seed = s.value("seed", args.seed, 0u64)?;
    prepare_out(out)?;
    s.finish(out, "recover")?;

    let (times, y) = io::read_measurements(&measurements)?;
    let scheme = fri::SamplingScheme::new(times, half_bandwidth)?;
    let model = ForwardModel::new(fri::build_forward_matrix(&scheme), y)?;
    let cfg = SolverConfig {
        rank: k,
        order: Some(order),
        step: tau,
        radius,
        map_iterations,
        max_iter,
        rel_tol,
        stopping,
        seed,
    };
    let trace = solvers::recover(&model, method, &cfg)?;
    io::write_coefficients(out.join("coefficients.csv"), &trace.coefficients)?;
    io::write_trace(out.join("trace.csv"), &trace)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), io::format_f64);
    let residual = trace.residuals.last().copied().unwrap_or(f64::NAN);
    io::write_key_values(
        out.join("trace_meta.txt"),
        &[
            ("method", method.to_string()),
            ("iterations", trace.iterations.to_string()),
            ("converged", trace.converged.to_string()),
            ("tau", opt(trace.step)),
            ("beta", opt(trace.beta)),
            ("radius", opt(trace.radius)),
            ("residual", io::format_f64(residual)),
            ("wall_time_ms", io::format_f64(trace.wall_time.as_secs_f64() * 1e3)),
        ],
    )?;

    let locations = fri::recover_locations(trace.coefficients.values(), k, order)?;
    let amplitudes = fri::recover_amplitudes(trace.coefficients.values(), &locations)?;
    io::write_diracs(out.join("diracs.csv"), &locations, &amplitudes.values)?;
    eprintln!(
        "{method}: {} iterations, residual {residual:.6e}, {}",
        trace.iterations,
        if trace.converged { "converged" } else { "not converged" }
    );
    Ok(if trace.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

pub fn denoise(out: &Path, config: Option<&Path>, args: DenoiseArgs) -> Result<Outcome> {
    let mut s = Settings::load(config)?;
    let input = s
        .path("coefficients", args.coefficients, None)?
        .ok_or_else(|| Error::Parameter("no input: pass --coefficients".into()))?;
    let output = s
        .path("output", args.output, Some(out.join("denoised.csv")))?
        .expect("default path");
    let x = io::read_coefficients(&input)?;
    let k = s.value("k", args.k, 9)?;
    let order = s.value("order", args.order, x.half_bandwidth())?;
    let iterations = s.value("iterations", args.iterations, DEFAULT_MAP_ITERATIONS)?;
    let radius = s.value("radius", args.radius, f64::INFINITY)?;
    let cfg = DenoiseConfig {
        rank: k,
        order,
        iterations,
        radius,
    };
    cfg.validate(x.len())?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out(dir)?;
    }
    prepare_out(out)?;
    s.finish(out, "denoise")?;

    let y = denoise::inexact_prox(x.values(), &cfg)?;
    let before = denoise::rank_gap_ratio(x.values(), k, order);
    let after = denoise::rank_gap_ratio(y.view(), k, order);
    if let (Ok(b), Ok(a)) = (before, after) {
        eprintln!("sigma_(K+1)/sigma_K: {b:.6e} -> {a:.6e}");
    }
    io::write_coefficients(&output, &crate::toeplitz::FourierVector::new(y)?)?;
    Ok(Outcome::Done)
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn bench(out: &Path, config: Option<&Path>, args: BenchArgs) -> Result<Outcome> {
    let mut s = Settings::load(config)?;
    let d = ExperimentGrid::default();
    let full = s.value("full", args.full.then_some(true), false)?;
    let default_trials = if full { bench::FULL_TRIALS } else { d.trials };
    let grid = ExperimentGrid {
        k: s.value("k", args.k, d.k)?,
        samples: s.value("samples", args.samples, d.samples)?,
        gammas: s.list("gammas", args.gammas, d.gammas.clone())?,
        psnrs: s.list("psnrs", args.psnrs, d.psnrs.clone())?,
        trials: s.value("trials", args.trials.filter(|_| !args.full), default_trials)?,
        methods: s.list("methods", args.methods, d.methods.clone())?,
        base_seed: s.value("seed", args.seed, d.base_seed)?,
        map_iterations: s.value("map-iterations", args.map_iterations, d.map_iterations)?,
        max_iter: s.value("max-iter", args.max_iter, d.max_iter)?,
        stopping: s.value("stopping", args.stopping, d.stopping)?,
    };
    let draws = s.value("condition-draws", args.condition_draws, 20)?;
    grid.validate()?;
    prepare_out(out)?;
    s.finish(out, "bench")?;

    let records = bench::run_sweep(&grid)?;
    bench::write_records(create(out.join("records.csv"))?, &records)?;
    let summary = bench::summarize(&records);
    bench::write_summary(create(out.join("summary.csv"))?, &summary)?;
    if draws > 0 {
        let rows = bench::condition_table(grid.k, grid.samples, &grid.gammas, draws, grid.base_seed)?;
        bench::write_conditions(create(out.join("conditions.csv"))?, &rows)?;
    }
    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    eprintln!("{} trials, {failed} failed", records.len());
    for row in &summary {
        println!(
            "{:<9} gamma={} psnr={:>6} median={:.3e} iqr=[{:.3e}, {:.3e}]",
            row.method, row.gamma, row.psnr_db, row.median_error, row.q25, row.q75
        );
    }
    Ok(Outcome::Done)
}

pub fn time(out: &Path, config: Option<&Path>, args: TimeArgs) -> Result<Outcome> {
    let mut s = Settings::load(config)?;
    let sizes = s.list("sizes", args.sizes, bench::default_timing_sizes())?;
    let max_n = s.optional("max-n", args.max_n, None)?;
    let k = s.value("k", args.k, 9)?;
    let repeats = s.value("repeats", args.repeats, 5)?;
    let methods = s.list("methods", args.methods, vec![Method::Cpgd, Method::GenFri])?;
    let seed = s.value("seed", args.seed, 0u64)?;
    let sizes: Vec<usize> = sizes.into_iter().filter(|&n| max_n.map_or(true, |m| n <= m)).collect();
    if sizes.is_empty() {
        return Err(Error::Parameter("no sizes left to time".into()));
    }
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be at least 1".into()));
    }
    prepare_out(out)?;
    s.finish(out, "time")?;

    let study = bench::timing_study(&sizes, k, &methods, repeats, seed)?;
    bench::write_timings(create(out.join("timings.csv"))?, &study.rows)?;
    bench::write_slopes(create(out.join("slopes.csv"))?, &study.slopes)?;
    for (method, slope) in &study.slopes {
        println!("{method}: per-iteration time ~ N^{slope:.2}");
    }
    Ok(Outcome::Done)
}

pub fn execute(cli: Cli) -> Result<Outcome> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Simulate(a) => simulate(&cli.out, config, a),
        Command::Recover(a) => recover(&cli.out, config, a),
        Command::Denoise(a) => denoise(&cli.out, config, a),
        Command::Bench(a) => bench(&cli.out, config, a),
        Command::Time(a) => time(&cli.out, config, a),
    }
}

/// Parses `args` and runs the command, mapping the result to an exit code:
/// 0 on success, 2 when the solver hit its iteration limit, 1 otherwise.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK });
        }
    };
    match execute(cli) {
        Ok(Outcome::Done) => ExitCode::from(EXIT_OK),
        Ok(Outcome::NotConverged) => ExitCode::from(EXIT_NOT_CONVERGED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
