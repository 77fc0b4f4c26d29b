//! GenFRI baseline: alternating minimisation of `||G x - y||^2` over
//! coefficients `x` and annihilating filters `h` subject to `T_P(x) h = 0` and
//! `<h, h0> = 1`, restarted from several random `h0`.

use std::time::Instant;

use ndarray::{s, Array1, Array2, ArrayView1};
use ndarray_linalg::{Factorize, Solve};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::solvers::{ForwardModel, Method, RecoveryTrace, SolverConfig};
use crate::toeplitz::{toeplitzify, FourierVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenFriOptions {
    pub inner_iterations: usize,
    pub initialisations: usize,
}

impl Default for GenFriOptions {
    fn default() -> Self {
        Self {
            inner_iterations: 50,
            initialisations: 15,
        }
    }
}

/// `R(h)`, the `(N-P) x N` matrix with `R(h) x = T_P(x) h`.
pub fn annihilation_matrix(h: ArrayView1<C64>, n: usize) -> Result<Array2<C64>> {
    let p = h
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::Dimension("empty filter".into()))?;
    if 2 * p + 1 > n {
        return Err(Error::Dimension(format!("filter of order {p} too long for N = {n}")));
    }
    let mut r = Array2::from_elem((n - p, n), ZERO);
    for i in 0..n - p {
        for k in 0..=p {
            r[[i, p + i - k]] = h[k];
        }
    }
    Ok(r)
}

/// Per-model quantities reused by every iteration.
#[derive(Debug, Clone)]
pub struct GenFriSystem {
    gram: Array2<C64>,
    gty: Array1<C64>,
    order: usize,
    /// Scale of the constraint rows in the KKT matrix, matched to `G^H G`.
    constraint_scale: f64,
    /// `T_P(beta)` for the least-squares estimate `beta`.
    ls_embedding: Array2<C64>,
    /// `V diag(1/s)` from the SVD of `G`, so `(G^H G)^{-1} = W W^H`.
    whitener: Array2<C64>,
}

impl GenFriSystem {
    pub fn new(model: &ForwardModel, order: usize) -> Result<Self> {
        let n = model.n();
        if 2 * order + 1 > n {
            return Err(Error::Parameter(format!("order {order} too large for N = {n}")));
        }
        let gram = linalg::gram(model.matrix());
        let gty = model.apply_adjoint(model.observations())?;
        let trace: f64 = gram.diag().iter().map(|z| z.re).sum();

        let svd = linalg::svd(model.matrix())?;
        let cutoff = f64::EPSILON * model.samples().max(n) as f64 * svd.s[0];
        let mut whitener = linalg::adjoint(svd.vh.view());
        for (mut col, &sv) in whitener.columns_mut().into_iter().zip(svd.s.iter()) {
            let inv = if sv > cutoff { 1.0 / sv } else { 0.0 };
            col.mapv_inplace(|z| z * inv);
        }
        let (beta, _) = linalg::lstsq(
            model.matrix(),
            model.observations(),
            f64::EPSILON * model.samples().max(n) as f64,
        )?;
        let ls_embedding = toeplitzify(beta.view(), order)?.to_dense();
        Ok(Self {
            gram,
            gty,
            order,
            constraint_scale: (trace / n as f64).max(f64::MIN_POSITIVE),
            ls_embedding,
            whitener,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `argmin ||G x - y||^2` subject to `T_P(x) h = 0`, via the KKT system
    /// of size `2N - P` with one step of iterative refinement.
    pub fn x_update(&self, h: ArrayView1<C64>) -> Result<Array1<C64>> {
        let n = self.gram.nrows();
        let p = self.order;
        if h.len() != p + 1 {
            return Err(Error::Dimension(format!("filter length {} for order {p}", h.len())));
        }
        let hn = linalg::norm2(h);
        if hn == 0.0 {
            return Err(Error::Parameter("zero annihilating filter".into()));
        }
        let scaled = h.mapv(|z| z * (self.constraint_scale / hn));
        let r = annihilation_matrix(scaled.view(), n)?;
        let size = 2 * n - p;
        let mut kkt = Array2::from_elem((size, size), ZERO);
        kkt.slice_mut(s![..n, ..n]).assign(&self.gram);
        kkt.slice_mut(s![..n, n..]).assign(&linalg::adjoint(r.view()));
        kkt.slice_mut(s![n.., ..n]).assign(&r);
        let mut rhs = Array1::from_elem(size, ZERO);
        rhs.slice_mut(s![..n]).assign(&self.gty);

        let lu = kkt.factorize()?;
        let mut sol = lu.solve(&rhs)?;
        let defect = &rhs - &kkt.dot(&sol);
        sol = sol + lu.solve(&defect)?;
        let x = sol.slice(s![..n]).to_owned();
        if !linalg::all_finite(x.view()) {
            return Err(Error::NonFinite("GenFRI coefficient update".into()));
        }
        Ok(x)
    }

    /// Filter update subject to `<h, h0> = 1`. With `x(h)` the constrained
    /// least-squares solution, `||G x(h) - y||^2` equals a constant plus
    /// `h^H T(beta)^H S(h)^{-1} T(beta) h`, `S(h) = R(h) (G^H G)^{-1} R(h)^H`.
    /// `S` is frozen at the previous filter, which leaves the quadratic
    /// `h^H Q h`, minimised by `h = mu (Q + eps I)^{-1} h0`, `eps = 1e-12 trace(Q)`.
    pub fn h_update(&self, previous: ArrayView1<C64>, h0: ArrayView1<C64>) -> Result<Array1<C64>> {
        let n = self.gram.nrows();
        let pn = linalg::norm2(previous);
        if pn == 0.0 {
            return Err(Error::Parameter("zero annihilating filter".into()));
        }
        let r = annihilation_matrix(previous.mapv(|z| z / pn).view(), n)?;
        let b = r.dot(&self.whitener);
        let s_mat = b.dot(&linalg::adjoint(b.view()));
        let lu = s_mat.factorize()?;
        let mut weighted = Array2::from_elem(self.ls_embedding.dim(), ZERO);
        for (j, col) in self.ls_embedding.columns().into_iter().enumerate() {
            weighted.column_mut(j).assign(&lu.solve(&col.to_owned())?);
        }
        let q = linalg::adjoint(self.ls_embedding.view()).dot(&weighted);
        let mut q = (&q + &linalg::adjoint(q.view())).mapv(|z| z * 0.5);
        let trace: f64 = q.diag().iter().map(|z| z.re).sum();
        if !(trace > 0.0) || !trace.is_finite() {
            let nn = linalg::norm2(h0).powi(2);
            return Ok(h0.mapv(|z| z / nn));
        }
        let eps = 1e-12 * trace;
        for i in 0..q.nrows() {
            q[[i, i]] += eps;
        }
        let ht = q.solve(&h0.to_owned())?;
        let mu = linalg::inner(ht.view(), h0);
        if mu.norm() == 0.0 || !mu.is_finite() {
            return Err(Error::NonFinite("GenFRI filter normalisation".into()));
        }
        Ok(ht.mapv(|z| z / mu))
    }
}

/// `h0 ~ CN(0, I)`.
pub fn random_reference_filter(rng: &mut ChaCha8Rng, len: usize) -> Array1<C64> {
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    (0..len)
        .map(|_| C64::new(normal.sample(rng), normal.sample(rng)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct GenFriOutcome {
    pub trace: RecoveryTrace,
    /// Filter paired with the returned coefficients.
    pub filter: Array1<C64>,
    pub reference: Array1<C64>,
    /// `|<h, h0> - 1|` for every filter produced.
    pub normalisation_residuals: Vec<f64>,
    /// `||T_P(x) h|| / ||T_P(x)||_F` for every coefficient update and the
    /// filter it was constrained by.
    pub annihilation_residuals: Vec<f64>,
    /// Restarts caused by a singular KKT system.
    pub failed_initialisations: usize,
}

pub fn genfri(model: &ForwardModel, cfg: &SolverConfig, opts: &GenFriOptions) -> Result<RecoveryTrace> {
    genfri_detailed(model, cfg, opts).map(|o| o.trace)
}

/// GenFRI with per-iteration constraint diagnostics. Keeps the iterate with
/// the smallest data mismatch over all initialisations and iterations.
pub fn genfri_detailed(model: &ForwardModel, cfg: &SolverConfig, opts: &GenFriOptions) -> Result<GenFriOutcome> {
    let start = Instant::now();
    cfg.validate(model.n())?;
    if opts.inner_iterations == 0 || opts.initialisations == 0 {
        return Err(Error::Parameter(
            "GenFRI needs at least one iteration and initialisation".into(),
        ));
    }
    if !model.is_injective()? {
        return Err(Error::NotInjective {
            ratio: model.injectivity_ratio()?,
        });
    }
    let order = cfg.order_for(model.n());
    let system = GenFriSystem::new(model, order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut residuals = Vec::new();
    let mut relative_changes = Vec::new();
    let mut step_norms = Vec::new();
    let mut normalisation_residuals = Vec::new();
    let mut annihilation_residuals = Vec::new();
    let mut failed = 0;
    let mut best: Option<(f64, Array1<C64>, Array1<C64>, Array1<C64>)> = None;

    for _ in 0..opts.initialisations {
        let h0 = random_reference_filter(&mut rng, order + 1);
        let h0_sq = linalg::norm2(h0.view()).powi(2);
        let mut h = h0.mapv(|z| z / h0_sq);
        let mut prev: Option<Array1<C64>> = None;
        for _ in 0..opts.inner_iterations {
            h = match system.h_update(h.view(), h0.view()) {
                Ok(h) => h,
                Err(Error::Linalg(_)) | Err(Error::NonFinite(_)) => {
                    failed += 1;
                    break;
                }
                Err(e) => return Err(e),
            };
            normalisation_residuals.push((linalg::inner(h.view(), h0.view()) - 1.0).norm());
            let x = match system.x_update(h.view()) {
                Ok(x) => x,
                Err(Error::Linalg(_)) | Err(Error::NonFinite(_)) => {
                    failed += 1;
                    break;
                }
                Err(e) => return Err(e),
            };
            let embedding = toeplitzify(x.view(), order)?;
            let tnorm = embedding.frobenius_sq().sqrt();
            let annihilated = linalg::norm2(embedding.matvec(h.view())?.view());
            annihilation_residuals.push(if tnorm > 0.0 { annihilated / tnorm } else { 0.0 });

            let residual = model.residual_norm(x.view())?;
            let (step, change) = match &prev {
                Some(p) => {
                    let step = linalg::norm2((&x - p).view());
                    let base = linalg::norm2(p.view());
                    (step, if base > 0.0 { step / base } else { f64::INFINITY })
                }
                None => (linalg::norm2(x.view()), f64::INFINITY),
            };
            residuals.push(residual);
            relative_changes.push(change);
            step_norms.push(step);
            if best.as_ref().map_or(true, |b| residual < b.0) {
                best = Some((residual, x.clone(), h.clone(), h0.clone()));
            }
            prev = Some(x);
        }
    }

    let (_, x, filter, reference) = best.ok_or_else(|| {
        Error::NoConvergence(format!(
            "GenFRI: all {} initialisations hit a singular KKT system",
            opts.initialisations
        ))
    })?;
    let trace = RecoveryTrace {
        method: Method::GenFri,
        coefficients: FourierVector::new(x)?,
        iterations: residuals.len(),
        residuals,
        relative_changes,
        step_norms,
        converged: true,
        wall_time: start.elapsed(),
        step: None,
        beta: None,
        radius: None,
    };
    Ok(GenFriOutcome {
        trace,
        filter,
        reference,
        normalisation_residuals,
        annihilation_residuals,
        failed_initialisations: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn annihilation_matrix_matches_embedding() {
        let x: Array1<C64> = (0..7).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let h = array![C64::new(1.0, 0.5), C64::new(-2.0, 0.0), C64::new(0.0, 1.0)];
        let r = annihilation_matrix(h.view(), 7).unwrap();
        let lhs = r.dot(&x);
        let rhs = toeplitzify(x.view(), 2).unwrap().matvec(h.view()).unwrap();
        assert!(linalg::norm2((&lhs - &rhs).view()) < 1e-12);
    }

    #[test]
    fn h_update_meets_constraint() {
        let x: Array1<C64> = (0..9).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
        let g = Array2::from_shape_fn((9, 9), |(i, j)| if i == j { C64::new(1.0, 0.0) } else { ZERO });
        let model = ForwardModel::new(g, x.clone()).unwrap();
        let sys = GenFriSystem::new(&model, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h0 = random_reference_filter(&mut rng, 4);
        let h = sys.h_update(h0.view(), h0.view()).unwrap();
        assert!((linalg::inner(h.view(), h0.view()) - 1.0).norm() < 1e-10);
    }
}
