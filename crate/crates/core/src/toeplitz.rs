//! Toeplitzification of Fourier coefficient vectors.
//!
//! A vector `x` of odd length `N = 2M + 1` (logical indices `-M..=M`,
//! stored 0-based with offset `M`) is embedded for an order `P <= M` into the
//! `(N - P) x (P + 1)` Toeplitz matrix whose 0-based entry `(i, j)` is
//! `x[P + i - j]` (storage index). The adjoint sums each diagonal; dividing
//! by the diagonal lengths `gamma` gives the pseudoinverse, i.e. diagonal
//! averaging.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

/// Fourier coefficients `[x_{-M}, ..., x_M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierVector {
    values: Array1<C64>,
}

impl FourierVector {
    pub fn new(values: Array1<C64>) -> Result<Self> {
        let n = values.len();
        if n < 3 || n % 2 == 0 {
            return Err(Error::Dimension(format!(
                "Fourier vector length must be odd and >= 3, got {n}"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(half_bandwidth: usize) -> Self {
        Self {
            values: Array1::from_elem(2 * half_bandwidth + 1, ZERO),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `M`, with `N = 2M + 1`.
    pub fn half_bandwidth(&self) -> usize {
        self.values.len() / 2
    }

    /// Coefficient at logical index `m` in `-M..=M`.
    pub fn at(&self, m: i64) -> C64 {
        let idx = m + self.half_bandwidth() as i64;
        self.values[idx as usize]
    }

    pub fn values(&self) -> ArrayView1<'_, C64> {
        self.values.view()
    }

    pub fn into_inner(self) -> Array1<C64> {
        self.values
    }
}

/// Diagonal lengths of an `(N - P) x (P + 1)` Toeplitz matrix:
/// `gamma[i] = min(i + 1, P + 1, N - i)` (0-based `i`).
pub fn gamma(n: usize, order: usize) -> Vec<usize> {
    (0..n).map(|i| (i + 1).min(order + 1).min(n - i)).collect()
}

fn check_order(n: usize, order: usize) -> Result<()> {
    if n == 0 || 2 * order + 1 > n {
        return Err(Error::Parameter(format!(
            "order P = {order} out of range for generator length {n} (need P <= (N - 1) / 2)"
        )));
    }
    Ok(())
}

/// A Toeplitz matrix kept as its generator and order only.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzEmbedding {
    generator: Array1<C64>,
    order: usize,
}

impl ToeplitzEmbedding {
    pub fn new(generator: Array1<C64>, order: usize) -> Result<Self> {
        check_order(generator.len(), order)?;
        Ok(Self { generator, order })
    }

    pub fn generator(&self) -> ArrayView1<'_, C64> {
        self.generator.view()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rows(&self) -> usize {
        self.generator.len() - self.order
    }

    pub fn cols(&self) -> usize {
        self.order + 1
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    /// 0-based entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.generator[self.order + i - j]
    }

    pub fn to_dense(&self) -> Array2<C64> {
        Array2::from_shape_fn(self.shape(), |(i, j)| self.get(i, j))
    }

    /// Squared Frobenius norm, `sum_i gamma_i |x_i|^2`, without materialising.
    pub fn frobenius_sq(&self) -> f64 {
        gamma(self.generator.len(), self.order)
            .iter()
            .zip(self.generator.iter())
            .map(|(&g, z)| g as f64 * z.norm_sqr())
            .sum()
    }

    pub fn operator(&self) -> ToeplitzOperator {
        ToeplitzOperator::new(self)
    }

    pub fn matvec(&self, u: ArrayView1<C64>) -> Result<Array1<C64>> {
        self.operator().matvec(u)
    }

    pub fn adjoint_matvec(&self, v: ArrayView1<C64>) -> Result<Array1<C64>> {
        self.operator().adjoint_matvec(v)
    }
}

/// Embeds `x` as `T_P(x)`.
pub fn toeplitzify(x: ArrayView1<C64>, order: usize) -> Result<ToeplitzEmbedding> {
    ToeplitzEmbedding::new(x.to_owned(), order)
}

fn shape_to_np(h: &ArrayView2<C64>) -> Result<(usize, usize)> {
    let (rows, cols) = h.dim();
    if cols == 0 || rows < cols {
        return Err(Error::Dimension(format!(
            "matrix of shape {rows}x{cols} is not a Toeplitz embedding shape (need rows >= cols >= 1)"
        )));
    }
    Ok((rows + cols - 1, cols - 1))
}

/// Adjoint of the Toeplitzification: sums every diagonal of `h`.
pub fn toeplitz_adjoint(h: ArrayView2<C64>) -> Result<Array1<C64>> {
    let (n, order) = shape_to_np(&h)?;
    let mut out = Array1::from_elem(n, ZERO);
    for ((i, j), v) in h.indexed_iter() {
        out[order + i - j] += v;
    }
    Ok(out)
}

/// Diagonal averaging, `Gamma^{-1} T_P^*(h)`.
pub fn toeplitz_pinv(h: ArrayView2<C64>) -> Result<Array1<C64>> {
    let (n, order) = shape_to_np(&h)?;
    let mut out = toeplitz_adjoint(h)?;
    for (o, g) in out.iter_mut().zip(gamma(n, order)) {
        *o /= g as f64;
    }
    Ok(out)
}

/// Orthogonal projection onto the Toeplitz subspace.
pub fn project_toeplitz(h: ArrayView2<C64>) -> Result<Array2<C64>> {
    let (_, order) = shape_to_np(&h)?;
    Ok(toeplitzify(toeplitz_pinv(h)?.view(), order)?.to_dense())
}

/// `T_P(diag(Gamma^{-1/2}))`: entrywise `1 / sqrt(diagonal length)`.
pub fn weight_matrix(n: usize, order: usize) -> Result<ToeplitzEmbedding> {
    check_order(n, order)?;
    let generator = gamma(n, order)
        .into_iter()
        .map(|g| C64::new(1.0 / (g as f64).sqrt(), 0.0))
        .collect();
    ToeplitzEmbedding::new(generator, order)
}

/// FFT-backed products with a fixed Toeplitz embedding.
///
/// `T u` is the valid part of the linear convolution of the generator with
/// `u`; `T^H v` is the valid part of the convolution of `v` with the
/// conjugated, reversed generator. Spectra are computed once.
pub struct ToeplitzOperator {
    n: usize,
    order: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<C64>,
    reversed_spectrum: Vec<C64>,
}

impl ToeplitzOperator {
    pub fn new(embedding: &ToeplitzEmbedding) -> Self {
        let n = embedding.generator.len();
        let order = embedding.order;
        let len = (n + order).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);

        let mut spectrum = vec![ZERO; len];
        spectrum[..n].copy_from_slice(embedding.generator.as_slice().expect("contiguous"));
        forward.process(&mut spectrum);

        let mut reversed_spectrum = vec![ZERO; len];
        for (dst, src) in reversed_spectrum.iter_mut().zip(embedding.generator.iter().rev()) {
            *dst = src.conj();
        }
        forward.process(&mut reversed_spectrum);

        Self {
            n,
            order,
            len,
            forward,
            inverse,
            spectrum,
            reversed_spectrum,
        }
    }

    pub fn rows(&self) -> usize {
        self.n - self.order
    }

    pub fn cols(&self) -> usize {
        self.order + 1
    }

    fn convolve(&self, input: ArrayView1<C64>, kernel: &[C64], start: usize, count: usize) -> Array1<C64> {
        let mut buf = vec![ZERO; self.len];
        for (b, v) in buf.iter_mut().zip(input.iter()) {
            *b = *v;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(kernel) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf[start..start + count].iter().map(|z| z * scale).collect()
    }

    /// `T u` for `u` of length `P + 1`.
    pub fn matvec(&self, u: ArrayView1<C64>) -> Result<Array1<C64>> {
        if u.len() != self.cols() {
            return Err(Error::Dimension(format!(
                "Toeplitz matvec expects length {}, got {}",
                self.cols(),
                u.len()
            )));
        }
        Ok(self.convolve(u, &self.spectrum, self.order, self.rows()))
    }

    /// `T^H v` for `v` of length `N - P`.
    pub fn adjoint_matvec(&self, v: ArrayView1<C64>) -> Result<Array1<C64>> {
        if v.len() != self.rows() {
            return Err(Error::Dimension(format!(
                "Toeplitz adjoint matvec expects length {}, got {}",
                self.rows(),
                v.len()
            )));
        }
        Ok(self.convolve(v, &self.reversed_spectrum, self.n - 1 - self.order, self.cols()))
    }
}

/// Diagonal sums of a low-rank matrix `sum_k s_k u_k v_k^H`, computed without
/// materialising it: each term's diagonal sums are the cross-correlation of
/// `u_k` with `v_k`. `left` is `(N - P) x r`, `right` is `(P + 1) x r`.
pub fn low_rank_adjoint(left: ArrayView2<C64>, weights: ArrayView1<f64>, right: ArrayView2<C64>) -> Array1<C64> {
    let rows = left.nrows();
    let cols = right.nrows();
    let n = rows + cols - 1;
    let len = n.next_power_of_two();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);

    let mut acc = vec![ZERO; len];
    let mut ubuf = vec![ZERO; len];
    let mut vbuf = vec![ZERO; len];
    for k in 0..weights.len() {
        ubuf.iter_mut().for_each(|z| *z = ZERO);
        vbuf.iter_mut().for_each(|z| *z = ZERO);
        for (b, z) in ubuf.iter_mut().zip(left.column(k)) {
            *b = z * weights[k];
        }
        for (b, z) in vbuf.iter_mut().zip(right.column(k).iter().rev()) {
            *b = z.conj();
        }
        forward.process(&mut ubuf);
        forward.process(&mut vbuf);
        for ((a, u), v) in acc.iter_mut().zip(&ubuf).zip(&vbuf) {
            *a += u * v;
        }
    }
    inverse.process(&mut acc);
    let scale = 1.0 / len as f64;
    acc[..n].iter().map(|z| z * scale).collect()
}
