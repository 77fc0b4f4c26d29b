mod common;

use common::*;
use cpgd::toeplitz::{
    gamma, project_toeplitz, toeplitz_adjoint, toeplitz_pinv, toeplitzify, weight_matrix, FourierVector,
};
use cpgd::C64;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;

fn real(v: &[f64]) -> Array1<C64> {
    v.iter().map(|&x| c(x, 0.0)).collect()
}

#[test]
fn embedding_of_small_vector() {
    let x = real(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    let t = toeplitzify(x.view(), 2).unwrap().to_dense();
    let expected = array![[3.0, 2.0, 1.0], [4.0, 3.0, 2.0], [5.0, 4.0, 3.0]].mapv(|v| c(v, 0.0));
    assert_eq!(t, expected);
}

#[test]
fn order_zero_is_a_column() {
    let x = array![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0)];
    let t = toeplitzify(x.view(), 0).unwrap().to_dense();
    assert_eq!(t.dim(), (3, 1));
    assert_eq!(t.column(0), x);
}

#[test]
fn full_order_has_centre_on_diagonal() {
    let mut r = rng(1);
    let m = 6;
    let x = random_vector(&mut r, 2 * m + 1);
    let t = toeplitzify(x.view(), m).unwrap().to_dense();
    assert_eq!(t.dim(), (m + 1, m + 1));
    for i in 0..=m {
        assert_eq!(t[[i, i]], x[m]);
    }
}

#[test]
fn order_out_of_range() {
    let x = real(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    assert!(toeplitzify(x.view(), 3).is_err());
    assert!(FourierVector::new(real(&[1.0, 2.0])).is_err());
    assert!(FourierVector::new(real(&[1.0])).is_err());
}

#[test]
fn adjoint_examples() {
    let ones = Array2::from_elem((3, 3), c(1.0, 0.0));
    assert_eq!(toeplitz_adjoint(ones.view()).unwrap(), real(&[1.0, 2.0, 3.0, 2.0, 1.0]));

    let mut e0 = Array1::from_elem(5, c(0.0, 0.0));
    e0[0] = c(1.0, 0.0);
    let back = toeplitz_adjoint(toeplitzify(e0.view(), 2).unwrap().to_dense().view()).unwrap();
    assert_eq!(back, e0);

    let zero = Array2::from_elem((4, 2), c(0.0, 0.0));
    assert!(toeplitz_adjoint(zero.view()).unwrap().iter().all(|z| *z == c(0.0, 0.0)));

    assert!(toeplitz_adjoint(Array2::from_elem((2, 3), c(1.0, 0.0)).view()).is_err());
}

#[test]
fn pseudoinverse_examples() {
    let (a, b, cc, d) = (c(1.0, 2.0), c(-1.0, 0.0), c(0.5, 0.5), c(3.0, -2.0));
    let h = array![[a, b], [cc, d]];
    assert_eq!(toeplitz_pinv(h.view()).unwrap(), array![b, (a + d) / 2.0, cc]);

    let ones = Array2::from_elem((4, 3), c(1.0, 0.0));
    assert!(toeplitz_pinv(ones.view())
        .unwrap()
        .iter()
        .all(|z| (*z - c(1.0, 0.0)).norm() < 1e-15));
}

#[test]
fn projection_examples() {
    let (a, b, cc, d) = (c(1.0, 2.0), c(-1.0, 0.0), c(0.5, 0.5), c(3.0, -2.0));
    let h = array![[a, b], [cc, d]];
    let avg = (a + d) / 2.0;
    assert_eq!(project_toeplitz(h.view()).unwrap(), array![[avg, b], [cc, avg]]);

    let mut r = rng(2);
    let x = random_vector(&mut r, 9);
    let t = toeplitzify(x.view(), 3).unwrap().to_dense();
    assert!(rel_diff_mat(project_toeplitz(t.view()).unwrap().view(), t.view()) < 1e-15);
}

#[test]
fn matvec_examples() {
    let x = real(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    let e = toeplitzify(x.view(), 2).unwrap();
    let out = e.matvec(real(&[1.0, 1.0, 1.0]).view()).unwrap();
    assert!(rel_diff(out.view(), real(&[6.0, 9.0, 12.0]).view()) < 1e-14);

    let first = e.matvec(real(&[1.0, 0.0, 0.0]).view()).unwrap();
    assert!(rel_diff(first.view(), real(&[3.0, 4.0, 5.0]).view()) < 1e-14);

    assert!(e.matvec(real(&[1.0, 1.0]).view()).is_err());
    assert!(e.adjoint_matvec(real(&[1.0, 1.0]).view()).is_err());
}

#[test]
fn weight_matrix_examples() {
    let w = weight_matrix(5, 2).unwrap();
    let expected = [1.0, 1.0 / 2f64.sqrt(), 1.0 / 3f64.sqrt(), 1.0 / 2f64.sqrt(), 1.0];
    for (g, e) in w.generator().iter().zip(expected) {
        assert!((g.re - e).abs() < 1e-15 && g.im == 0.0);
    }
    let ones = weight_matrix(7, 0).unwrap();
    assert!(ones.generator().iter().all(|z| *z == c(1.0, 0.0)));
}

#[test]
fn gamma_definition() {
    for n in [3usize, 5, 9, 17] {
        for p in 0..=n / 2 {
            let g = gamma(n, p);
            for (i, &gi) in g.iter().enumerate() {
                assert_eq!(gi, (i + 1).min(p + 1).min(n - i));
            }
            assert_eq!(*g.iter().max().unwrap(), p + 1);
            assert!(g.iter().all(|&v| v >= 1));
        }
    }
}

fn shape() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=32).prop_flat_map(|m| (Just(2 * m + 1), 0..=m, any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn embedding_matches_definition((n, p, seed) in shape()) {
        let x = random_vector(&mut rng(seed), n);
        let t = toeplitzify(x.view(), p).unwrap();
        prop_assert_eq!(t.to_dense(), dense_toeplitz(x.view(), p));
        let d = t.to_dense();
        for i in 1..d.nrows() {
            for j in 1..d.ncols() {
                prop_assert_eq!(d[[i, j]], d[[i - 1, j - 1]]);
            }
        }
    }

    #[test]
    fn adjoint_identity((n, p, seed) in shape()) {
        let mut r = rng(seed);
        let x = random_vector(&mut r, n);
        let h = random_matrix(&mut r, n - p, p + 1);
        let t = dense_toeplitz(x.view(), p);
        let lhs: C64 = t.iter().zip(h.iter()).map(|(a, b)| a.conj() * b).sum();
        let ad = toeplitz_adjoint(h.view()).unwrap();
        let rhs: C64 = x.iter().zip(ad.iter()).map(|(a, b)| a.conj() * b).sum();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn adjoint_of_embedding_is_gamma((n, p, seed) in shape()) {
        let x = random_vector(&mut rng(seed), n);
        let back = toeplitz_adjoint(dense_toeplitz(x.view(), p).view()).unwrap();
        let g = gamma(n, p);
        let expected: Array1<C64> = x.iter().zip(&g).map(|(v, &w)| v * w as f64).collect();
        prop_assert!(rel_diff(back.view(), expected.view()) <= 1e-12);
    }

    #[test]
    fn pseudoinverse_left_identity((n, p, seed) in shape()) {
        let x = random_vector(&mut rng(seed), n);
        let back = toeplitz_pinv(dense_toeplitz(x.view(), p).view()).unwrap();
        prop_assert!(rel_diff(back.view(), x.view()) <= 1e-13);
    }

    #[test]
    fn projection_idempotent_and_self_adjoint((n, p, seed) in shape()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n - p, p + 1);
        let b = random_matrix(&mut r, n - p, p + 1);
        let pa = project_toeplitz(a.view()).unwrap();
        let ppa = project_toeplitz(pa.view()).unwrap();
        prop_assert!(rel_diff_mat(ppa.view(), pa.view()) <= 1e-12);
        let pb = project_toeplitz(b.view()).unwrap();
        let l: C64 = pa.iter().zip(b.iter()).map(|(u, v)| u.conj() * v).sum();
        let rr: C64 = a.iter().zip(pb.iter()).map(|(u, v)| u.conj() * v).sum();
        prop_assert!((l - rr).norm() <= 1e-12 * l.norm().max(1.0));
    }

    #[test]
    fn frobenius_norm_is_gamma_weighted((n, p, seed) in shape()) {
        let x = random_vector(&mut rng(seed), n);
        let t = toeplitzify(x.view(), p).unwrap();
        let weighted: f64 = x.iter().zip(gamma(n, p)).map(|(v, g)| g as f64 * v.norm_sqr()).sum();
        let dense = fro(dense_toeplitz(x.view(), p).view()).powi(2);
        prop_assert!((t.frobenius_sq() - weighted).abs() <= 1e-12 * weighted);
        prop_assert!((dense - weighted).abs() <= 1e-12 * weighted);
    }

    #[test]
    fn fft_products_match_dense((n, p, seed) in shape()) {
        let mut r = rng(seed);
        let x = random_vector(&mut r, n);
        let u = random_vector(&mut r, p + 1);
        let v = random_vector(&mut r, n - p);
        let t = toeplitzify(x.view(), p).unwrap();
        let d = dense_toeplitz(x.view(), p);
        let op = t.operator();
        prop_assert!(rel_diff(op.matvec(u.view()).unwrap().view(), naive_matvec(d.view(), u.view()).view()) <= 1e-10);
        let dh = adjoint(d.view());
        prop_assert!(rel_diff(op.adjoint_matvec(v.view()).unwrap().view(), naive_matvec(dh.view(), v.view()).view()) <= 1e-10);
    }

    #[test]
    fn weight_matrix_max_is_one((n, p, _seed) in shape()) {
        let w = weight_matrix(n, p).unwrap().to_dense();
        let max = w.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        prop_assert!((max - 1.0).abs() < 1e-15);
        prop_assert!(w.iter().all(|z| z.re > 0.0));
    }
}
