//! C ABI for the `cpgd` library.
//!
//! Models and recovery traces are opaque handles created and freed through
//! this API. Every fallible call returns a [`CpgdStatus`]; the message of the
//! last failure on the calling thread is available from
//! [`cpgd_last_error_message`]. Panics are caught at the boundary and
//! reported as [`CpgdStatus::Panic`].
//!
//! Complex vectors cross the boundary as separate real and imaginary arrays
//! of doubles; matrices are row-major.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cpgd::bench::positioning_error;
use cpgd::fri::{build_forward_matrix, recover_locations, SamplingScheme};
use cpgd::solvers::{self, ForwardModel, Method, Radius, RecoveryTrace, SolverConfig, StoppingRule};
use cpgd::Error;
use ndarray::Array1;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpgdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NotInjective = 4,
    NoConvergence = 5,
    NonFinite = 6,
    DegenerateFilter = 7,
    Linalg = 8,
    BufferTooSmall = 9,
    Io = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpgdMethod {
    Cpgd = 0,
    Genfri = 1,
    LsCadzow = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpgdRadiusMode {
    /// Infinite for injective forward matrices, else the norm of the samples.
    Auto = 0,
    Infinite = 1,
    /// Use `CpgdOptions::radius`.
    Finite = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpgdStoppingRule {
    NormChange = 0,
    IterateChange = 1,
}

/// Solver settings; obtain defaults from `cpgd_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpgdOptions {
    /// Number of Diracs K.
    pub rank: usize,
    /// Embedding order P; 0 selects P = M.
    pub order: usize,
    /// Gradient step; 0 or negative selects 1/beta.
    pub step: f64,
    pub radius_mode: CpgdRadiusMode,
    pub radius: f64,
    pub map_iterations: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub stopping: CpgdStoppingRule,
    /// Seed of the GenFRI initialisations.
    pub seed: u64,
}

/// Opaque forward model: a forward matrix and its observations.
pub struct CpgdModel {
    inner: ForwardModel,
}

/// Opaque recovery result.
pub struct CpgdTrace {
    inner: RecoveryTrace,
}

struct Failure {
    status: CpgdStatus,
    message: String,
}

impl Failure {
    fn new(status: CpgdStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Dimension(_) => CpgdStatus::Dimension,
            Error::Parameter(_) | Error::Parse(_) => CpgdStatus::InvalidArgument,
            Error::NotInjective { .. } => CpgdStatus::NotInjective,
            Error::NoConvergence(_) => CpgdStatus::NoConvergence,
            Error::NonFinite(_) => CpgdStatus::NonFinite,
            Error::DegenerateFilter { .. } => CpgdStatus::DegenerateFilter,
            Error::Linalg(_) => CpgdStatus::Linalg,
            Error::Io(_) | Error::Csv(_) => CpgdStatus::Io,
        };
        Self::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn call<F: FnOnce() -> Result<(), Failure>>(f: F) -> CpgdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            CpgdStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CpgdStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::new(CpgdStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len < needed {
        return Err(Failure::new(
            CpgdStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(Failure::new(CpgdStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, needed))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| Failure::new(CpgdStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(CpgdStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

fn complex(re: &[f64], im: &[f64]) -> Array1<Complex64> {
    re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

/// Default solver settings for `rank` Diracs.
#[no_mangle]
pub extern "C" fn cpgd_options_default(rank: usize) -> CpgdOptions {
    let cfg = SolverConfig::new(rank);
    CpgdOptions {
        rank,
        order: 0,
        step: 0.0,
        radius_mode: CpgdRadiusMode::Auto,
        radius: 0.0,
        map_iterations: cfg.map_iterations,
        max_iter: cfg.max_iter,
        rel_tol: cfg.rel_tol,
        stopping: CpgdStoppingRule::NormChange,
        seed: cfg.seed,
    }
}

fn solver_config(opts: &CpgdOptions) -> SolverConfig {
    SolverConfig {
        rank: opts.rank,
        order: (opts.order > 0).then_some(opts.order),
        step: (opts.step > 0.0).then_some(opts.step),
        radius: match opts.radius_mode {
            CpgdRadiusMode::Auto => Radius::Auto,
            CpgdRadiusMode::Infinite => Radius::Infinite,
            CpgdRadiusMode::Finite => Radius::Finite(opts.radius),
        },
        map_iterations: opts.map_iterations,
        max_iter: opts.max_iter,
        rel_tol: opts.rel_tol,
        stopping: match opts.stopping {
            CpgdStoppingRule::NormChange => StoppingRule::NormChange,
            CpgdStoppingRule::IterateChange => StoppingRule::IterateChange,
        },
        seed: opts.seed,
    }
}

/// Model for `samples` samples at `times` (fractions of the period) of a
/// stream with half-bandwidth `half_bandwidth`, observed as `y_re + i y_im`.
///
/// # Safety
/// `times`, `y_re` and `y_im` must each point to `samples` readable doubles;
/// `out` must be writable. The handle written to `out` is freed with
/// `cpgd_model_free`.
#[no_mangle]
pub unsafe extern "C" fn cpgd_model_from_samples(
    times: *const f64,
    y_re: *const f64,
    y_im: *const f64,
    samples: usize,
    half_bandwidth: usize,
    out: *mut *mut CpgdModel,
) -> CpgdStatus {
    call(|| {
        let t = input(times, samples, "times")?;
        let re = input(y_re, samples, "y_re")?;
        let im = input(y_im, samples, "y_im")?;
        let scheme = SamplingScheme::new(t.to_vec(), half_bandwidth)?;
        let model = ForwardModel::new(build_forward_matrix(&scheme), complex(re, im))?;
        write_out(out, Box::into_raw(Box::new(CpgdModel { inner: model })), "out")
    })
}

/// Model for an explicit `rows x cols` forward matrix given row-major.
///
/// # Safety
/// `g_re` and `g_im` must point to `rows * cols` readable doubles, `y_re` and
/// `y_im` to `rows`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpgd_model_from_matrix(
    g_re: *const f64,
    g_im: *const f64,
    rows: usize,
    cols: usize,
    y_re: *const f64,
    y_im: *const f64,
    out: *mut *mut CpgdModel,
) -> CpgdStatus {
    call(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure::new(CpgdStatus::Dimension, "matrix size overflows"))?;
        let gr = input(g_re, len, "g_re")?;
        let gi = input(g_im, len, "g_im")?;
        let re = input(y_re, rows, "y_re")?;
        let im = input(y_im, rows, "y_im")?;
        let g = complex(gr, gi)
            .into_shape_with_order((rows, cols))
            .map_err(|e| Failure::new(CpgdStatus::Dimension, e.to_string()))?;
        let model = ForwardModel::new(g, complex(re, im))?;
        write_out(out, Box::into_raw(Box::new(CpgdModel { inner: model })), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from a `cpgd_model_from_*` call that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn cpgd_model_free(model: *mut CpgdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of samples L, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn cpgd_model_samples(model: *const CpgdModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.samples())
}

/// Number of Fourier coefficients N = 2M + 1, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn cpgd_model_coefficients(model: *const CpgdModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n())
}

/// Whether the forward matrix is injective, as required by GenFRI.
///
/// # Safety
/// `model` must be a live model handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cpgd_model_is_injective(model: *const CpgdModel, out: *mut bool) -> CpgdStatus {
    call(|| {
        let m = handle(model, "model")?;
        write_out(out, m.inner.is_injective()?, "out")
    })
}

/// Runs `method` on `model`. Not reaching the tolerance within `max_iter`
/// iterations is not an error; check `cpgd_trace_converged`.
///
/// # Safety
/// `model` must be a live model handle, `options` readable and `out`
/// writable.
/// The handle written to `out` is freed with `cpgd_trace_free`.
#[no_mangle]
pub unsafe extern "C" fn cpgd_recover(
    model: *const CpgdModel,
    method: CpgdMethod,
    options: *const CpgdOptions,
    out: *mut *mut CpgdTrace,
) -> CpgdStatus {
    call(|| {
        let m = handle(model, "model")?;
        let opts = handle(options, "options")?;
        let method = match method {
            CpgdMethod::Cpgd => Method::Cpgd,
            CpgdMethod::Genfri => Method::GenFri,
            CpgdMethod::LsCadzow => Method::LsCadzow,
        };
        let trace = solvers::recover(&m.inner, method, &solver_config(opts))?;
        write_out(out, Box::into_raw(Box::new(CpgdTrace { inner: trace })), "out")
    })
}

/// # Safety
/// `trace` must be null or a handle from `cpgd_recover` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn cpgd_trace_free(trace: *mut CpgdTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of recovered coefficients, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn cpgd_trace_length(trace: *const CpgdTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.coefficients.len())
}

/// Iterations performed, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn cpgd_trace_iterations(trace: *const CpgdTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.iterations)
}

/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn cpgd_trace_converged(trace: *const CpgdTrace) -> bool {
    trace.as_ref().is_some_and(|t| t.inner.converged)
}

/// Final data residual `||G x - y||`, NaN for a null handle.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn cpgd_trace_residual(trace: *const CpgdTrace) -> f64 {
    trace
        .as_ref()
        .and_then(|t| t.inner.residuals.last().copied())
        .unwrap_or(f64::NAN)
}

/// Step size used by CPGD, NaN for other methods or a null handle.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn cpgd_trace_step(trace: *const CpgdTrace) -> f64 {
    trace.as_ref().and_then(|t| t.inner.step).unwrap_or(f64::NAN)
}

/// `beta = 2 sigma_max(G)^2` used by CPGD, NaN for other methods or a null handle.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn cpgd_trace_beta(trace: *const CpgdTrace) -> f64 {
    trace.as_ref().and_then(|t| t.inner.beta).unwrap_or(f64::NAN)
}

/// Copies the recovered coefficients, ordered m = -M..=M.
///
/// # Safety
/// `trace` must be a live trace handle; `re` and `im` must each hold `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cpgd_trace_coefficients(
    trace: *const CpgdTrace,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> CpgdStatus {
    call(|| {
        let t = handle(trace, "trace")?;
        let x = t.inner.coefficients.values();
        let out_re = output(re, len, x.len(), "re")?;
        let out_im = output(im, len, x.len(), "im")?;
        for ((r, i), z) in out_re.iter_mut().zip(out_im.iter_mut()).zip(x.iter()) {
            *r = z.re;
            *i = z.im;
        }
        Ok(())
    })
}

/// Writes the `rank` Dirac locations found from the recovered coefficients,
/// sorted ascending. `order` 0 selects P = M.
///
/// # Safety
/// `trace` must be a live trace handle and `locations` hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cpgd_trace_locations(
    trace: *const CpgdTrace,
    rank: usize,
    order: usize,
    locations: *mut f64,
    len: usize,
) -> CpgdStatus {
    call(|| {
        let t = handle(trace, "trace")?;
        let x = t.inner.coefficients.values();
        let order = if order == 0 { x.len() / 2 } else { order };
        let found = recover_locations(x, rank, order)?;
        output(locations, len, found.len(), "locations")?.copy_from_slice(&found);
        Ok(())
    })
}

/// Mean circular distance between `truth` and `estimate` under the optimal
/// matching, as a fraction of the period.
///
/// # Safety
/// `truth` and `estimate` must each point to `count` readable doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpgd_positioning_error(
    truth: *const f64,
    estimate: *const f64,
    count: usize,
    out: *mut f64,
) -> CpgdStatus {
    call(|| {
        let a = input(truth, count, "truth")?;
        let b = input(estimate, count, "estimate")?;
        write_out(out, positioning_error(a, b)?, "out")
    })
}

/// Copies the last error message of the calling thread into `buffer`,
/// truncated and NUL-terminated. Returns the full message length in bytes,
/// excluding the terminator; 0 means no error.
///
/// # Safety
/// `buffer` must be null or hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cpgd_last_error_message(buffer: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buffer.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buffer, n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cpgd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
