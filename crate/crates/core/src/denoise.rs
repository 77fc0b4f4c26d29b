//! Cadzow denoising and the inexact proximal step of CPGD.
//!
//! Both alternate, `n` times and right to left, a projection onto the
//! weighted ball (skipped for an infinite radius), the rank-`K` truncation and
//! the Toeplitz projection, starting from `T_P(x)` and finishing with diagonal
//! averaging. The iterates are tracked through their generators: after the
//! Toeplitz projection the matrix is `T_P(g)` for the averaged generator `g`,
//! and on such matrices `||W . T_P(g)||_F = ||g||_2`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::lowrank::{self, LowRankFactors};
use crate::toeplitz::{self, ToeplitzEmbedding};

/// Number of alternating projections used by default.
pub const DEFAULT_MAP_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    pub rank: usize,
    pub order: usize,
    pub iterations: usize,
    /// Weighted-ball radius; `f64::INFINITY` disables the constraint.
    pub radius: f64,
}

impl DenoiseConfig {
    pub fn cadzow(rank: usize, order: usize, iterations: usize) -> Self {
        Self {
            rank,
            order,
            iterations,
            radius: f64::INFINITY,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let m = n / 2;
        if self.rank == 0 || self.rank > self.order || self.order > m {
            return Err(Error::Parameter(format!(
                "need 1 <= K <= P <= M, got K = {}, P = {}, M = {m}",
                self.rank, self.order
            )));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Parameter(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Projection onto `{X : ||W . X||_F <= radius}` in the `W`-weighted norm,
/// which is a plain rescaling.
pub fn project_ball_weighted(x: ArrayView2<C64>, weights: &ToeplitzEmbedding, radius: f64) -> Array2<C64> {
    if radius.is_infinite() {
        return x.to_owned();
    }
    let weighted: f64 = x
        .indexed_iter()
        .map(|((i, j), z)| (weights.get(i, j).re * z.norm()).powi(2))
        .sum::<f64>()
        .sqrt();
    if weighted <= radius {
        x.to_owned()
    } else {
        x.mapv(|z| z * (radius / weighted))
    }
}

fn truncate_with_fallback(e: &ToeplitzEmbedding, rank: usize) -> Result<LowRankFactors> {
    match lowrank::truncate_embedding(e, rank) {
        Err(Error::NoConvergence(_)) => lowrank::truncate_dense(e.to_dense().view(), rank),
        other => other,
    }
}

/// `T_P^dagger [Pi_T Pi_H Pi_B]^n T_P(x)`.
pub fn inexact_prox(x: ArrayView1<C64>, cfg: &DenoiseConfig) -> Result<Array1<C64>> {
    cfg.validate(x.len())?;
    let mut g = x.to_owned();
    for _ in 0..cfg.iterations {
        if cfg.radius.is_finite() {
            let nrm = linalg::norm2(g.view());
            if nrm > cfg.radius {
                g.mapv_inplace(|z| z * (cfg.radius / nrm));
            }
        }
        let embedding = ToeplitzEmbedding::new(g, cfg.order)?;
        g = truncate_with_fallback(&embedding, cfg.rank)?.diagonal_average();
        if !linalg::all_finite(g.view()) {
            return Err(Error::NonFinite("alternating projections".into()));
        }
    }
    Ok(g)
}

/// Classic Cadzow denoising, `T_P^dagger [Pi_T Pi_H]^n T_P(x)`; any radius in
/// `cfg` is ignored.
pub fn cadzow_denoise(x: ArrayView1<C64>, cfg: &DenoiseConfig) -> Result<Array1<C64>> {
    let cfg = DenoiseConfig {
        radius: f64::INFINITY,
        ..*cfg
    };
    inexact_prox(x, &cfg)
}

/// `sigma_{K+1} / sigma_K` of the embedding of `x`, a measure of how far
/// `T_P(x)` is from rank `K`.
pub fn rank_gap_ratio(x: ArrayView1<C64>, rank: usize, order: usize) -> Result<f64> {
    let dense = toeplitz::toeplitzify(x, order)?.to_dense();
    let s = linalg::singular_values(dense.view())?;
    if rank == 0 || rank >= s.len() {
        return Err(Error::Parameter(format!(
            "rank {rank} leaves no trailing singular value"
        )));
    }
    Ok(if s[rank - 1] == 0.0 { 0.0 } else { s[rank] / s[rank - 1] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::toeplitz::weight_matrix;

    fn spikes(m: usize, locs: &[f64], amps: &[f64]) -> Array1<C64> {
        (-(m as i64)..=m as i64)
            .map(|k| {
                locs.iter()
                    .zip(amps)
                    .map(|(t, a)| C64::from_polar(*a, -2.0 * std::f64::consts::PI * k as f64 * t))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn ball_projection_cases() {
        let w = weight_matrix(5, 2).unwrap();
        let x = Array2::from_shape_fn((3, 3), |(i, j)| C64::new(i as f64 + 1.0, j as f64));
        assert_eq!(project_ball_weighted(x.view(), &w, f64::INFINITY), x);

        let norm = |m: &Array2<C64>| -> f64 {
            m.indexed_iter()
                .map(|((i, j), z)| (w.get(i, j).re * z.norm()).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let scaled = x.mapv(|z| z * (2.0 / norm(&x)));
        let out = project_ball_weighted(scaled.view(), &w, 1.0);
        assert!((norm(&out) - 1.0).abs() < 1e-12);
        for (o, s) in out.iter().zip(scaled.iter()) {
            assert!((o - s / 2.0).norm() < 1e-12);
        }

        let boundary = x.mapv(|z| z * (1.0 / norm(&x)));
        assert_eq!(project_ball_weighted(boundary.view(), &w, norm(&boundary)), boundary);
    }

    #[test]
    fn zero_iterations_is_identity() {
        let x = spikes(4, &[0.2], &[1.0]) + Array1::from_elem(9, C64::new(0.1, 0.0));
        let out = cadzow_denoise(x.view(), &DenoiseConfig::cadzow(1, 4, 0)).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn zero_is_fixed() {
        let x = Array1::from_elem(9, ZERO);
        let cfg = DenoiseConfig {
            rank: 2,
            order: 4,
            iterations: 3,
            radius: 0.5,
        };
        assert!(inexact_prox(x.view(), &cfg).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn noiseless_spikes_are_fixed() {
        let x = spikes(9, &[0.1, 0.45, 0.8], &[1.0, 2.0, 0.5]);
        let out = cadzow_denoise(x.view(), &DenoiseConfig::cadzow(3, 9, 10)).unwrap();
        assert!(linalg::norm2((&out - &x).view()) <= 1e-9 * linalg::norm2(x.view()));
    }

    #[test]
    fn invalid_config() {
        let x = Array1::from_elem(9, C64::new(1.0, 0.0));
        assert!(cadzow_denoise(x.view(), &DenoiseConfig::cadzow(3, 2, 1)).is_err());
        assert!(cadzow_denoise(x.view(), &DenoiseConfig::cadzow(1, 5, 1)).is_err());
        let bad_radius = DenoiseConfig {
            radius: 0.0,
            ..DenoiseConfig::cadzow(1, 2, 1)
        };
        assert!(inexact_prox(x.view(), &bad_radius).is_err());
    }
}
