//! Small dense helpers shared by the solvers, on top of LAPACK.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{Eigh, SVDDC, UPLO};
use num_complex::Complex64;

use crate::error::Result;

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Conjugate transpose.
pub fn adjoint(a: ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn norm2(x: ArrayView1<C64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius(a: ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<a, b>` linear in the first argument: `sum a_i conj(b_i)`.
pub fn inner(a: ArrayView1<C64>, b: ArrayView1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

pub fn all_finite(x: ArrayView1<C64>) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Thin SVD `a = U diag(s) Vh`, singular values nonincreasing.
pub struct DenseSvd {
    pub u: Array2<C64>,
    pub s: Array1<f64>,
    pub vh: Array2<C64>,
}

pub fn svd(a: ArrayView2<C64>) -> Result<DenseSvd> {
    let (u, s, vh) = a.to_owned().svddc(ndarray_linalg::JobSvd::Some)?;
    Ok(DenseSvd {
        u: u.expect("requested U"),
        s,
        vh: vh.expect("requested Vh"),
    })
}

pub fn singular_values(a: ArrayView2<C64>) -> Result<Array1<f64>> {
    let (_, s, _) = a.to_owned().svddc(ndarray_linalg::JobSvd::None)?;
    Ok(s)
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values below `rcond * s_max`. Returns the solution and the effective rank.
pub fn lstsq(a: ArrayView2<C64>, b: ArrayView1<C64>, rcond: f64) -> Result<(Array1<C64>, usize)> {
    let DenseSvd { u, s, vh } = svd(a)?;
    let cutoff = rcond * s.first().copied().unwrap_or(0.0);
    let rank = s.iter().take_while(|&&v| v > cutoff && v > 0.0).count();
    let ub = adjoint(u.slice(s![.., ..rank])).dot(&b);
    let scaled: Array1<C64> = ub.iter().zip(s.iter()).map(|(c, &sv)| c / sv).collect();
    let x = adjoint(vh.slice(s![..rank, ..])).dot(&scaled);
    Ok((x, rank))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: ArrayView2<C64>) -> Result<Array1<f64>> {
    let (vals, _) = a.to_owned().eigh(UPLO::Upper)?;
    Ok(vals)
}

/// `a^H a` for a tall or square matrix.
pub fn gram(a: ArrayView2<C64>) -> Array2<C64> {
    adjoint(a).dot(&a)
}

/// Rank-truncated reconstruction `U_k diag(s_k) Vh_k`.
pub fn reconstruct(u: ArrayView2<C64>, s: ArrayView1<f64>, vh: ArrayView2<C64>, k: usize) -> Array2<C64> {
    let mut us = u.slice(s![.., ..k]).to_owned();
    for (mut col, &sv) in us.axis_iter_mut(Axis(1)).zip(s.iter()) {
        col.mapv_inplace(|z| z * sv);
    }
    us.dot(&vh.slice(s![..k, ..]))
}
