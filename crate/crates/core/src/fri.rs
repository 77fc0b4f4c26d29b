//! Periodic Dirac streams, irregular time sampling of their low-pass
//! filtered version, and annihilating-filter recovery of the innovations.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::Eig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::lowrank;
use crate::solvers::ForwardModel;
use crate::toeplitz::{toeplitzify, FourierVector};

/// Minimum circular Dirac separation, as a fraction of the period.
pub const DEFAULT_DIRAC_SEPARATION: f64 = 0.01;
/// Minimum circular separation between sample times.
pub const DEFAULT_SAMPLE_SEPARATION: f64 = 0.005;

/// Sequential rejection sampling gives up after this many draws per point.
const REJECTION_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DiracStream {
    pub period: f64,
    pub locations: Vec<f64>,
    pub amplitudes: Vec<C64>,
}

impl DiracStream {
    pub fn new(period: f64, locations: Vec<f64>, amplitudes: Vec<C64>) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Parameter(format!("period must be positive, got {period}")));
        }
        if locations.is_empty() || locations.len() != amplitudes.len() {
            return Err(Error::Dimension(format!(
                "{} locations vs {} amplitudes (need K >= 1 of each)",
                locations.len(),
                amplitudes.len()
            )));
        }
        if let Some(t) = locations.iter().find(|t| !(0.0..period).contains(*t)) {
            return Err(Error::Parameter(format!("location {t} outside [0, {period})")));
        }
        Ok(Self {
            period,
            locations,
            amplitudes,
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Smallest pairwise circular distance as a fraction of the period.
    pub fn min_separation(&self) -> f64 {
        min_circular_gap(&self.locations.iter().map(|t| t / self.period).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingScheme {
    pub times: Vec<f64>,
    pub bandwidth: usize,
}

impl SamplingScheme {
    pub fn new(times: Vec<f64>, bandwidth: usize) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Dimension("sampling scheme needs at least one time".into()));
        }
        if let Some(t) = times.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return Err(Error::Parameter(format!("sample time {t} outside [0, 1)")));
        }
        Ok(Self { times, bandwidth })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        2 * self.bandwidth + 1
    }
}

fn min_circular_gap(points: &[f64]) -> f64 {
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() < 2 {
        return 1.0;
    }
    let wrap = 1.0 - sorted[sorted.len() - 1] + sorted[0];
    sorted.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::min)
}

/// `x_m = sum_k a_k exp(-j 2 pi m t_k / T)` for `m = -M..=M`.
pub fn fourier_coefficients(stream: &DiracStream, half_bandwidth: usize) -> FourierVector {
    let m = half_bandwidth as i64;
    let values: Array1<C64> = (-m..=m)
        .map(|k| {
            stream
                .locations
                .iter()
                .zip(&stream.amplitudes)
                .map(|(t, a)| a * C64::from_polar(1.0, -2.0 * PI * k as f64 * t / stream.period))
                .sum()
        })
        .collect();
    FourierVector::new(values).expect("odd length by construction")
}

/// Periodic sinc `sin((2M+1) pi t) / ((2M+1) sin(pi t))`, equal to 1 at integers.
pub fn dirichlet_kernel(t: f64, half_bandwidth: usize) -> f64 {
    let n = (2 * half_bandwidth + 1) as f64;
    let den = n * (PI * t).sin();
    if den.abs() < 1e-12 {
        // Near an integer the ratio tends to (+-1)^{(N-1) t} = 1 for odd N.
        let r = t - t.round();
        let num = (n * PI * r).sin();
        let d = n * (PI * r).sin();
        return if d == 0.0 { 1.0 } else { num / d };
    }
    (n * PI * t).sin() / den
}

/// `G[l, m] = exp(j 2 pi m theta_l)`, columns ordered `m = -M..=M`.
pub fn build_forward_matrix(scheme: &SamplingScheme) -> Array2<C64> {
    let m = scheme.bandwidth as i64;
    Array2::from_shape_fn((scheme.len(), scheme.n()), |(l, col)| {
        let freq = col as i64 - m;
        C64::from_polar(1.0, 2.0 * PI * freq as f64 * scheme.times[l])
    })
}

/// Noise standard deviation for a peak SNR, `max |a_k| exp(-PSNR / 10)`.
pub fn psnr_to_sigma(max_amplitude: f64, psnr_db: f64) -> f64 {
    max_amplitude * (-psnr_db / 10.0).exp()
}

/// `y = G x + e` with real i.i.d. Gaussian noise `e ~ N(0, sigma^2)`.
pub fn synthesize_measurements(
    stream: &DiracStream,
    scheme: &SamplingScheme,
    sigma: f64,
    seed: u64,
) -> Result<ForwardModel> {
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!(
            "noise level must be nonnegative, got {sigma}"
        )));
    }
    let g = build_forward_matrix(scheme);
    let x = fourier_coefficients(stream, scheme.bandwidth);
    let mut y = g.dot(&x.values());
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
        for v in y.iter_mut() {
            v.re += normal.sample(&mut rng);
        }
    }
    ForwardModel::new(g, y)
}

/// Noiseless samples written through the Dirichlet kernel,
/// `y_l = sum_k a_k (2M + 1) phi_M(theta_l - t_k)`.
pub fn kernel_samples(stream: &DiracStream, scheme: &SamplingScheme) -> Array1<C64> {
    let n = scheme.n() as f64;
    scheme
        .times
        .iter()
        .map(|theta| {
            stream
                .locations
                .iter()
                .zip(&stream.amplitudes)
                .map(|(t, a)| a * (n * dirichlet_kernel(theta - t / stream.period, scheme.bandwidth)))
                .sum()
        })
        .collect()
}

/// Roots of `sum_k h_k z^{-k}` (equivalently of `sum_k h_k z^{P-k}`) via
/// companion-matrix eigenvalues. Leading coefficients that vanish lower the
/// degree (roots at infinity are dropped).
pub fn filter_roots(h: ArrayView1<C64>) -> Result<Vec<C64>> {
    let scale = linalg::norm2(h);
    let lead = h.iter().position(|c| c.norm() > 1e-14 * scale).unwrap_or(h.len());
    if lead + 1 >= h.len() {
        return Ok(Vec::new());
    }
    let coeffs: Vec<C64> = h.iter().skip(lead).copied().collect();
    let degree = coeffs.len() - 1;
    let mut companion = Array2::from_elem((degree, degree), ZERO);
    for j in 0..degree {
        companion[[0, j]] = -coeffs[j + 1] / coeffs[0];
    }
    for i in 1..degree {
        companion[[i, i - 1]] = C64::new(1.0, 0.0);
    }
    let (vals, _) = companion.eig()?;
    Ok(vals.to_vec())
}

/// Maps unit-circle roots `u = exp(-j 2 pi t)` back to locations `t in [0, 1)`.
fn root_to_location(u: C64) -> f64 {
    let t = (-u.arg() / (2.0 * PI)).rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0.
    if t >= 1.0 {
        0.0
    } else {
        t
    }
}

/// Dirac locations (fractions of the period) from Fourier coefficients:
/// TLS annihilating filter of `T_P(x)`, its roots, and the `K` roots closest
/// to the unit circle. Sorted ascending.
pub fn recover_locations(x: ArrayView1<C64>, rank: usize, order: usize) -> Result<Vec<f64>> {
    let m = x.len() / 2;
    if rank == 0 || rank > order || order > m {
        return Err(Error::Parameter(format!(
            "need 1 <= K <= P <= M, got K = {rank}, P = {order}, M = {m}"
        )));
    }
    let embedding = toeplitzify(x, order)?;
    let filter = lowrank::tls_nullvector(embedding.to_dense().view())?;
    let mut roots = filter_roots(filter.vector.view())?;
    if roots.len() < rank {
        return Err(Error::DegenerateFilter {
            found: roots.len(),
            needed: rank,
        });
    }
    roots.sort_by(|a, b| {
        let da = (1.0 - a.norm()).abs();
        let db = (1.0 - b.norm()).abs();
        da.total_cmp(&db).then(b.norm().total_cmp(&a.norm()))
    });
    let mut locations: Vec<f64> = roots.iter().take(rank).map(|u| root_to_location(*u)).collect();
    locations.sort_by(f64::total_cmp);
    Ok(locations)
}

#[derive(Debug, Clone)]
pub struct Amplitudes {
    pub values: Vec<C64>,
    /// The Vandermonde system was numerically rank deficient (locations
    /// nearly coincide); `values` is then the minimum-norm LS solution.
    pub rank_deficient: bool,
}

/// Least-squares amplitudes from `x_m = sum_k a_k exp(-j 2 pi m t_k)`.
pub fn recover_amplitudes(x: ArrayView1<C64>, locations: &[f64]) -> Result<Amplitudes> {
    if locations.is_empty() {
        return Err(Error::Parameter("no locations given".into()));
    }
    let m = (x.len() / 2) as i64;
    let v = Array2::from_shape_fn((x.len(), locations.len()), |(row, k)| {
        let freq = row as i64 - m;
        C64::from_polar(1.0, -2.0 * PI * freq as f64 * locations[k])
    });
    let (sol, rank) = linalg::lstsq(v.view(), x, 1e-12)?;
    Ok(Amplitudes {
        values: sol.to_vec(),
        rank_deficient: rank < locations.len(),
    })
}

/// Points on the unit circle drawn uniformly one at a time, each redrawn
/// until it is at least `min_sep` away from all previous ones.
fn separated_uniform(rng: &mut ChaCha8Rng, count: usize, min_sep: f64) -> Result<Vec<f64>> {
    let mut points: Vec<f64> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut accepted = None;
        for _ in 0..REJECTION_BUDGET {
            let t: f64 = rng.random::<f64>();
            let ok = points.iter().all(|p| {
                let d = (t - p).abs();
                d.min(1.0 - d) >= min_sep
            });
            if ok {
                accepted = Some(t);
                break;
            }
        }
        match accepted {
            Some(t) => points.push(t),
            None => {
                return Err(Error::Parameter(format!(
                    "could not place {count} points with separation {min_sep}"
                )))
            }
        }
    }
    points.sort_by(f64::total_cmp);
    Ok(points)
}

/// Random 1-periodic stream: uniform separated locations, log-normal
/// amplitudes (log-mean 0, log-std 1).
pub fn random_stream(k: usize, seed: u64, min_sep: f64) -> Result<DiracStream> {
    if k == 0 || k as f64 * min_sep >= 1.0 {
        return Err(Error::Parameter(format!(
            "cannot draw {k} Diracs with separation {min_sep}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locations = separated_uniform(&mut rng, k, min_sep)?;
    let dist = LogNormal::new(0.0, 1.0).expect("valid log-normal");
    let amplitudes = (0..k).map(|_| C64::new(dist.sample(&mut rng), 0.0)).collect();
    DiracStream::new(1.0, locations, amplitudes)
}

/// Random irregular sampling times with a minimum circular separation.
pub fn random_scheme(samples: usize, half_bandwidth: usize, seed: u64, min_sep: f64) -> Result<SamplingScheme> {
    if samples == 0 || samples as f64 * min_sep >= 1.0 {
        return Err(Error::Parameter(format!(
            "cannot draw {samples} sample times with separation {min_sep}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = separated_uniform(&mut rng, samples, min_sep)?;
    SamplingScheme::new(times, half_bandwidth)
}

/// Decorrelated sub-seed for one of several random draws sharing a seed
/// (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
