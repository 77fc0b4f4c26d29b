#![allow(dead_code)]

use std::f64::consts::PI;

use cpgd::C64;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<C64> {
    (0..n)
        .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<C64> {
    Array2::from_shape_fn((rows, cols), |_| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn norm(x: ArrayView1<C64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn fro(a: ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn rel_diff(a: ArrayView1<C64>, b: ArrayView1<C64>) -> f64 {
    let d = norm((&a - &b).view());
    let s = norm(a).max(norm(b));
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

pub fn rel_diff_mat(a: ArrayView2<C64>, b: ArrayView2<C64>) -> f64 {
    let d = fro((&a - &b).view());
    let s = fro(a).max(fro(b));
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

/// `T_P(x)` written out entry by entry: row `i`, column `j` holds `x[P + i - j]`.
pub fn dense_toeplitz(x: ArrayView1<C64>, p: usize) -> Array2<C64> {
    let n = x.len();
    Array2::from_shape_fn((n - p, p + 1), |(i, j)| x[p + i - j])
}

/// Naive `A b` by explicit loops.
pub fn naive_matvec(a: ArrayView2<C64>, b: ArrayView1<C64>) -> Array1<C64> {
    let mut out = Array1::from_elem(a.nrows(), c(0.0, 0.0));
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[i] += a[[i, j]] * b[j];
        }
    }
    out
}

pub fn adjoint(a: ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// `x_m = sum_k a_k exp(-j 2 pi m t_k)` for `m = -M..=M`.
pub fn dirac_coefficients(locations: &[f64], amplitudes: &[f64], m: usize) -> Array1<C64> {
    (-(m as i64)..=m as i64)
        .map(|freq| {
            locations
                .iter()
                .zip(amplitudes)
                .map(|(t, a)| C64::from_polar(*a, -2.0 * PI * freq as f64 * t))
                .sum()
        })
        .collect()
}

/// Well separated locations on `[0, 1)` with positive amplitudes.
pub fn spread_stream(rng: &mut ChaCha8Rng, k: usize) -> (Vec<f64>, Vec<f64>) {
    let offset: f64 = rng.random();
    let mut locations: Vec<f64> = (0..k)
        .map(|i| (offset + (i as f64 + 0.3 * rng.random::<f64>()) / k as f64).fract())
        .collect();
    locations.sort_by(f64::total_cmp);
    let amplitudes = (0..k).map(|_| 0.5 + rng.random::<f64>()).collect();
    (locations, amplitudes)
}

/// Minimum over all permutations of `sum_i cost[i][perm[i]]`.
pub fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

/// Singular values of `a` from the eigenvalues of `a^H a`, via Jacobi
/// rotations on the Hermitian matrix. Independent of LAPACK.
pub fn jacobi_singular_values(a: ArrayView2<C64>) -> Vec<f64> {
    let mut h = adjoint(a).dot(&a);
    let n = h.nrows();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += h[[p, q]].norm_sqr();
            }
        }
        if off.sqrt() < 1e-15 * fro(h.view()).max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = h[[p, q]];
                if apq.norm() < 1e-300 {
                    continue;
                }
                let app = h[[p, p]].re;
                let aqq = h[[q, q]].re;
                let phase = apq / apq.norm();
                let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                let (s, co) = theta.sin_cos();
                let mut rot = Array2::from_shape_fn((n, n), |(i, j)| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
                rot[[p, p]] = c(co, 0.0);
                rot[[q, q]] = c(co, 0.0);
                rot[[p, q]] = phase * s;
                rot[[q, p]] = -phase.conj() * s;
                h = adjoint(rot.view()).dot(&h).dot(&rot);
            }
        }
    }
    let mut s: Vec<f64> = (0..n).map(|i| h[[i, i]].re.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
