//! Rank-K projection (Eckart-Young truncation), a matrix-free partial SVD and
//! the total-least-squares null vector.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::SVDDC;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::toeplitz::{low_rank_adjoint, ToeplitzEmbedding, ToeplitzOperator};

/// Matrices up to this many entries are truncated with a dense SVD.
pub const DENSE_ENTRY_LIMIT: usize = 4096;

/// Relative gap below which `sigma_K` and `sigma_{K+1}` count as tied.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Seed for partial-SVD start vectors inside the projections.
pub const DEFAULT_SVD_SEED: u64 = 0x5eed_cad2;

/// Something that can multiply by a matrix and its conjugate transpose.
pub trait LinearOperator {
    fn shape(&self) -> (usize, usize);
    fn apply(&self, v: ArrayView1<C64>) -> Array1<C64>;
    fn apply_adjoint(&self, u: ArrayView1<C64>) -> Array1<C64>;
}

pub struct DenseOperator<'a>(pub ArrayView2<'a, C64>);

impl LinearOperator for DenseOperator<'_> {
    fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    fn apply(&self, v: ArrayView1<C64>) -> Array1<C64> {
        self.0.dot(&v)
    }

    fn apply_adjoint(&self, u: ArrayView1<C64>) -> Array1<C64> {
        let mut out = Array1::from_elem(self.0.ncols(), ZERO);
        for (row, &ui) in self.0.outer_iter().zip(u.iter()) {
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += a.conj() * ui;
            }
        }
        out
    }
}

impl LinearOperator for ToeplitzOperator {
    fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    fn apply(&self, v: ArrayView1<C64>) -> Array1<C64> {
        self.matvec(v).expect("length checked by caller")
    }

    fn apply_adjoint(&self, u: ArrayView1<C64>) -> Array1<C64> {
        self.adjoint_matvec(u).expect("length checked by caller")
    }
}

/// Leading singular triplets.
#[derive(Debug, Clone)]
pub struct PartialSvd {
    /// `rows x k`, orthonormal columns.
    pub left_vectors: Array2<C64>,
    /// Nonincreasing.
    pub singular_values: Array1<f64>,
    /// `cols x k`, orthonormal columns.
    pub right_vectors: Array2<C64>,
    /// Largest Ritz residual `||A^H u_i - s_i v_i||` among the returned triplets.
    pub residual_estimate: f64,
    /// Estimate of the `(k+1)`-th singular value, when the subspace had room for it.
    pub next_singular_value: Option<f64>,
}

fn random_unit(rng: &mut ChaCha8Rng, len: usize) -> Array1<C64> {
    let v: Array1<C64> = (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect();
    let nrm = linalg::norm2(v.view());
    v / C64::new(nrm, 0.0)
}

/// Removes the components of `x` along `basis` (two passes); returns the
/// accumulated coefficients `basis_i^H x`.
fn orthogonalize(x: &mut Array1<C64>, basis: &[Array1<C64>]) -> Vec<C64> {
    let mut coeffs = vec![ZERO; basis.len()];
    for _ in 0..2 {
        for (c, b) in coeffs.iter_mut().zip(basis) {
            let proj = linalg::inner(x.view(), b.view());
            x.scaled_add(-proj, b);
            *c += proj;
        }
    }
    coeffs
}

fn random_orthogonal(rng: &mut ChaCha8Rng, len: usize, basis: &[Array1<C64>]) -> Array1<C64> {
    let mut v = random_unit(rng, len);
    orthogonalize(&mut v, basis);
    let nrm = linalg::norm2(v.view());
    v / C64::new(nrm, 0.0)
}

fn combine(basis: &[Array1<C64>], coeffs: ArrayView2<C64>, count: usize) -> Array2<C64> {
    let len = basis[0].len();
    let mut out = Array2::from_elem((len, count), ZERO);
    for (i, b) in basis.iter().enumerate() {
        for j in 0..count {
            let c = coeffs[[i, j]];
            if c != ZERO {
                out.column_mut(j).scaled_add(c, b);
            }
        }
    }
    out
}

/// Top-`k` singular triplets of a matrix known only through products.
///
/// Golub-Kahan-Lanczos bidiagonalisation with full reorthogonalisation on a
/// subspace of `k + 8` vectors, thick-restarted on the leading Ritz vectors.
/// Converged when every returned Ritz residual is below `tol * sigma_1`.
pub fn partial_svd(op: &dyn LinearOperator, k: usize, tol: f64, seed: u64) -> Result<PartialSvd> {
    let (rows, cols) = op.shape();
    let min_dim = rows.min(cols);
    if k == 0 || k > min_dim {
        return Err(Error::Parameter(format!(
            "partial SVD rank {k} out of range for a {rows}x{cols} operator"
        )));
    }
    let dim = (k + 8).min(min_dim);
    let keep = (k + 2).min(dim - 1).max(1);
    let max_restarts = 10 * k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut us: Vec<Array1<C64>> = Vec::with_capacity(dim);
    let mut vs: Vec<Array1<C64>> = Vec::with_capacity(dim + 1);
    let mut b = Array2::<C64>::from_elem((dim, dim), ZERO);
    let mut next_v = random_unit(&mut rng, cols);
    let mut beta = 0.0f64;
    let mut scale = 0.0f64;

    for restart in 0..=max_restarts {
        for j in us.len()..dim {
            vs.push(next_v.clone());
            let mut p = op.apply(vs[j].view());
            let coeffs = orthogonalize(&mut p, &us);
            for (i, c) in coeffs.into_iter().enumerate() {
                b[[i, j]] += c;
            }
            let alpha = linalg::norm2(p.view());
            scale = scale.max(alpha);
            let u = if alpha <= 1e-14 * scale || alpha == 0.0 {
                b[[j, j]] = ZERO;
                random_orthogonal(&mut rng, rows, &us)
            } else {
                b[[j, j]] = C64::new(alpha, 0.0);
                p / C64::new(alpha, 0.0)
            };
            us.push(u);

            let mut q = op.apply_adjoint(us[j].view());
            orthogonalize(&mut q, &vs);
            beta = linalg::norm2(q.view());
            scale = scale.max(beta);
            if vs.len() == cols {
                beta = 0.0;
                next_v = Array1::from_elem(cols, ZERO);
            } else if beta <= 1e-14 * scale || beta == 0.0 {
                beta = 0.0;
                next_v = random_orthogonal(&mut rng, cols, &vs);
            } else {
                next_v = q / C64::new(beta, 0.0);
            }
        }

        let (x, sv, yh) = b.clone().svddc(ndarray_linalg::JobSvd::All)?;
        let x = x.expect("requested U");
        let y = linalg::adjoint(yh.expect("requested Vh").view());
        let sigma1 = sv[0];
        let residuals: Vec<f64> = (0..k).map(|i| beta * x[[dim - 1, i]].norm()).collect();
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        let converged = sigma1 == 0.0 || worst <= tol * sigma1;

        if converged {
            return Ok(PartialSvd {
                left_vectors: combine(&us, x.view(), k),
                singular_values: sv.slice(s![..k]).to_owned(),
                right_vectors: combine(&vs, y.view(), k),
                residual_estimate: worst,
                next_singular_value: (dim > k).then(|| sv[k]),
            });
        }
        if restart == max_restarts {
            break;
        }

        let new_u = combine(&us, x.view(), keep);
        let new_v = combine(&vs, y.view(), keep);
        us = new_u.columns().into_iter().map(|c| c.to_owned()).collect();
        vs = new_v.columns().into_iter().map(|c| c.to_owned()).collect();
        b.fill(ZERO);
        for i in 0..keep {
            b[[i, i]] = C64::new(sv[i], 0.0);
        }
    }
    Err(Error::NoConvergence(format!(
        "partial SVD (k = {k}, {rows}x{cols}) after {max_restarts} restarts"
    )))
}

/// A rank-truncated matrix `left diag(values) right^H`.
#[derive(Debug, Clone)]
pub struct LowRankFactors {
    pub left: Array2<C64>,
    pub values: Array1<f64>,
    pub right: Array2<C64>,
    /// Set when `sigma_K` and `sigma_{K+1}` are tied; the first `K` triplets
    /// in decomposition order were kept.
    pub degenerate: bool,
}

impl LowRankFactors {
    pub fn to_dense(&self) -> Array2<C64> {
        let vh = linalg::adjoint(self.right.view());
        linalg::reconstruct(self.left.view(), self.values.view(), vh.view(), self.values.len())
    }

    /// Diagonal averaging of the low-rank matrix (the Toeplitz pseudoinverse).
    pub fn diagonal_average(&self) -> Array1<C64> {
        let rows = self.left.nrows();
        let cols = self.right.nrows();
        let n = rows + cols - 1;
        let mut out = if rows * cols <= DENSE_ENTRY_LIMIT {
            let dense = self.to_dense();
            let mut acc = Array1::from_elem(n, ZERO);
            for ((i, j), v) in dense.indexed_iter() {
                acc[cols - 1 + i - j] += v;
            }
            acc
        } else {
            low_rank_adjoint(self.left.view(), self.values.view(), self.right.view())
        };
        for (o, g) in out.iter_mut().zip(crate::toeplitz::gamma(n, cols - 1)) {
            *o /= g as f64;
        }
        out
    }
}

fn tied(sk: f64, sk1: f64, s1: f64) -> bool {
    (sk - sk1).abs() <= DEGENERACY_TOL * s1.max(f64::MIN_POSITIVE)
}

fn check_rank(k: usize, shape: (usize, usize)) -> Result<()> {
    if k == 0 || k > shape.0.min(shape.1) {
        return Err(Error::Parameter(format!(
            "rank {k} out of range for a {}x{} matrix",
            shape.0, shape.1
        )));
    }
    Ok(())
}

/// Eckart-Young truncation of a dense matrix via its full SVD.
pub fn truncate_dense(x: ArrayView2<C64>, k: usize) -> Result<LowRankFactors> {
    check_rank(k, x.dim())?;
    let svd = linalg::svd(x)?;
    let degenerate = svd.s.len() > k && tied(svd.s[k - 1], svd.s[k], svd.s[0]);
    Ok(LowRankFactors {
        left: svd.u.slice(s![.., ..k]).to_owned(),
        values: svd.s.slice(s![..k]).to_owned(),
        right: linalg::adjoint(svd.vh.slice(s![..k, ..])),
        degenerate,
    })
}

fn from_partial(p: PartialSvd, k: usize) -> LowRankFactors {
    let degenerate = p
        .next_singular_value
        .map(|next| tied(p.singular_values[k - 1], next, p.singular_values[0]))
        .unwrap_or(false);
    LowRankFactors {
        left: p.left_vectors,
        values: p.singular_values,
        right: p.right_vectors,
        degenerate,
    }
}

/// Relative tolerance used for the matrix-free truncation.
pub const PARTIAL_SVD_TOL: f64 = 1e-10;

/// Rank-`k` truncation of a dense matrix; dense SVD up to
/// [`DENSE_ENTRY_LIMIT`] entries, Lanczos beyond.
pub fn truncate(x: ArrayView2<C64>, k: usize) -> Result<LowRankFactors> {
    check_rank(k, x.dim())?;
    if x.len() <= DENSE_ENTRY_LIMIT {
        return truncate_dense(x, k);
    }
    let p = partial_svd(&DenseOperator(x), k, PARTIAL_SVD_TOL, DEFAULT_SVD_SEED)?;
    Ok(from_partial(p, k))
}

/// Rank-`k` truncation of a Toeplitz embedding. Large embeddings are handled
/// matrix-free through FFT products.
pub fn truncate_embedding(e: &ToeplitzEmbedding, k: usize) -> Result<LowRankFactors> {
    check_rank(k, e.shape())?;
    let (rows, cols) = e.shape();
    if rows * cols <= DENSE_ENTRY_LIMIT {
        return truncate_dense(e.to_dense().view(), k);
    }
    let op = e.operator();
    let p = partial_svd(&op, k, PARTIAL_SVD_TOL, DEFAULT_SVD_SEED)?;
    Ok(from_partial(p, k))
}

/// Frobenius-nearest matrix of rank at most `k`.
pub fn project_rank(x: ArrayView2<C64>, k: usize) -> Result<Array2<C64>> {
    Ok(truncate(x, k)?.to_dense())
}

pub fn project_rank_embedding(e: &ToeplitzEmbedding, k: usize) -> Result<Array2<C64>> {
    Ok(truncate_embedding(e, k)?.to_dense())
}

/// Total-least-squares null vector.
#[derive(Debug, Clone)]
pub struct NullVector {
    /// Unit-norm right singular vector of the smallest singular value.
    pub vector: Array1<C64>,
    pub smallest_singular_value: f64,
    /// The two smallest singular values are tied, so the vector is one of
    /// many equally valid choices.
    pub degenerate: bool,
}

pub fn tls_nullvector(a: ArrayView2<C64>) -> Result<NullVector> {
    let (rows, cols) = a.dim();
    if rows == 0 || cols == 0 || a.iter().all(|z| *z == ZERO) {
        return Err(Error::Parameter("TLS null vector of an empty or zero matrix".into()));
    }
    let (_, s, vh) = a.to_owned().svddc(ndarray_linalg::JobSvd::All)?;
    let vh = vh.expect("requested Vh");
    let vector = vh.row(cols - 1).mapv(|z| z.conj());
    // Wide matrices have cols - rows exact zero singular values.
    let sv = |i: usize| if i < s.len() { s[i] } else { 0.0 };
    let smallest = sv(cols - 1);
    let degenerate = cols >= 2 && tied(sv(cols - 2), smallest, s[0]);
    Ok(NullVector {
        vector,
        smallest_singular_value: smallest,
        degenerate,
    })
}

pub fn tls_nullvector_embedding(e: &ToeplitzEmbedding) -> Result<NullVector> {
    tls_nullvector(e.to_dense().view())
}

/// Energy of the singular values beyond the first `k`, relative to the total.
pub fn tail_energy_ratio(x: ArrayView2<C64>, k: usize) -> Result<f64> {
    let s = linalg::singular_values(x)?;
    let total: f64 = s.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(s.iter().skip(k).map(|v| v * v).sum::<f64>() / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn diagonal_truncation() {
        let x = array![
            [c(3.0), ZERO, ZERO],
            [ZERO, c(2.0), ZERO],
            [ZERO, ZERO, c(1.0)],
            [ZERO, ZERO, ZERO]
        ];
        let p = project_rank(x.view(), 2).unwrap();
        let mut expected = x.clone();
        expected[[2, 2]] = ZERO;
        assert!(linalg::frobenius((&p - &expected).view()) < 1e-12);
    }

    #[test]
    fn rank_out_of_range() {
        let x = Array2::from_elem((3, 2), c(1.0));
        assert!(project_rank(x.view(), 0).is_err());
        assert!(project_rank(x.view(), 3).is_err());
    }

    #[test]
    fn identity_operator_top_singular_value() {
        let eye = Array2::from_shape_fn((6, 6), |(i, j)| if i == j { c(1.0) } else { ZERO });
        let p = partial_svd(&DenseOperator(eye.view()), 1, 1e-12, 1).unwrap();
        assert!((p.singular_values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tls_explicit_nullspace() {
        let e = array![[c(1.0), ZERO], [ZERO, ZERO]];
        let nv = tls_nullvector(e.view()).unwrap();
        assert!(nv.vector[0].norm() < 1e-14);
        assert!((nv.vector[1].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tls_rejects_zero_matrix() {
        let e = Array2::from_elem((3, 2), ZERO);
        assert!(tls_nullvector(e.view()).is_err());
    }

    #[test]
    fn tie_sets_degeneracy_flag() {
        let x = array![[c(2.0), ZERO, ZERO], [ZERO, c(1.0), ZERO], [ZERO, ZERO, c(1.0)]];
        assert!(truncate_dense(x.view(), 2).unwrap().degenerate);
        assert!(!truncate_dense(x.view(), 1).unwrap().degenerate);
    }
}
