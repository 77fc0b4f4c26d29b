mod common;

use std::f64::consts::PI;

use common::*;
use cpgd::bench::{positioning_error, trial_instance};
use cpgd::fri::{fourier_coefficients, recover_locations};
use cpgd::genfri::{annihilation_matrix, genfri, genfri_detailed, GenFriOptions, GenFriSystem};
use cpgd::solvers::{
    gradient_lipschitz, gradient_step, largest_gram_eigenvalue, least_squares, spectral_bounds, step_size_range,
    CpgdUpdate, LS_RCOND,
};
use cpgd::{cpgd, ls_cadzow, Error, ForwardModel, Method, Radius, SolverConfig, StoppingRule, C64};
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;

fn eye(n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

fn instance(k: usize, samples: usize, gamma: usize, psnr: f64, seed: u64) -> cpgd::bench::TrialInstance {
    trial_instance(k, samples, gamma * k, psnr, seed).unwrap()
}

#[test]
fn spectral_bound_examples() {
    assert_eq!(spectral_bounds(eye(5).view()).unwrap(), (2.0, 2.0));
    let d = array![[1.0, 0.0], [0.0, 2.0]].mapv(|v| c(v, 0.0));
    let (a, b) = spectral_bounds(d.view()).unwrap();
    assert!((a - 2.0).abs() < 1e-14 && (b - 8.0).abs() < 1e-14);
    assert!(spectral_bounds(Array2::from_elem((3, 3), c(0.0, 0.0)).view()).is_err());
}

#[test]
fn beta_matches_dense_eigensolve() {
    for seed in 0..5 {
        let t = instance(5, 40, 2, f64::INFINITY, seed);
        let g = t.model.matrix();
        let s = jacobi_singular_values(g.view());
        let beta = 2.0 * s[0] * s[0];
        assert!((t.model.spectral_bounds().unwrap().1 - beta).abs() <= 1e-8 * beta);
        assert!((2.0 * largest_gram_eigenvalue(g).unwrap() - beta).abs() <= 1e-8 * beta);
        assert!((t.model.lipschitz_beta().unwrap() - beta).abs() <= 1e-8 * beta);
        let alpha = 2.0 * s[s.len() - 1].powi(2);
        assert!((t.model.spectral_bounds().unwrap().0 - alpha).abs() <= 1e-8 * beta);
    }
}

#[test]
fn fat_models_have_zero_alpha() {
    let t = instance(5, 30, 4, f64::INFINITY, 1);
    assert_eq!(t.model.spectral_bounds().unwrap().0, 0.0);
    assert!(!t.model.is_injective().unwrap());
    assert_eq!(t.model.gram_condition().unwrap(), f64::INFINITY);
}

#[test]
fn step_size_examples() {
    let (lo, hi) = step_size_range(2.0, 3).unwrap();
    assert!((lo - 0.25).abs() < 1e-15 && (hi - 0.75).abs() < 1e-15);
    let (lo, hi) = step_size_range(4.0, 0).unwrap();
    assert_eq!((lo, hi), (0.0, 0.5));
    for p in 0..50 {
        for beta in [1e-3, 1.0, 7.5, 1e6] {
            let (lo, hi) = step_size_range(beta, p).unwrap();
            assert!(lo < 1.0 / beta && 1.0 / beta < hi);
        }
    }
    assert!(step_size_range(0.0, 2).is_err());
}

#[test]
fn gradient_step_examples() {
    let t = instance(4, 30, 1, f64::INFINITY, 2);
    let x = fourier_coefficients(&t.stream, 4).into_inner();
    let out = gradient_step(x.view(), &t.model, 0.01).unwrap();
    assert!(rel_diff(out.view(), x.view()) < 1e-12);

    let model = ForwardModel::new(eye(7), Array1::from_elem(7, c(0.0, 0.0))).unwrap();
    let x = random_vector(&mut rng(3), 7);
    let out = gradient_step(x.view(), &model, 0.5).unwrap();
    assert!(out.iter().all(|z| z.norm() < 1e-15));

    assert!(gradient_step(Array1::from_elem(5, c(0.0, 0.0)).view(), &model, 0.5).is_err());
}

#[test]
fn forward_model_shape_checks() {
    assert!(ForwardModel::new(
        Array2::from_elem((0, 5), c(0.0, 0.0)),
        Array1::from_elem(0, c(0.0, 0.0))
    )
    .is_err());
    assert!(ForwardModel::new(eye(4), Array1::from_elem(4, c(0.0, 0.0))).is_err());
    assert!(ForwardModel::new(eye(5), Array1::from_elem(4, c(0.0, 0.0))).is_err());
}

#[test]
fn cpgd_identity_model_stops_immediately() {
    let mut r = rng(4);
    let (t, a) = spread_stream(&mut r, 3);
    let y = dirac_coefficients(&t, &a, 6);
    let model = ForwardModel::new(eye(13), y.clone()).unwrap();
    let cfg = SolverConfig {
        radius: Radius::Infinite,
        ..SolverConfig::new(3)
    };
    let trace = cpgd(&model, &cfg).unwrap();
    assert!(trace.converged);
    assert!(trace.iterations <= 2);
    assert!(rel_diff(trace.coefficients.values(), y.view()) < 1e-10);
    assert_eq!(trace.step, Some(0.5));
    assert_eq!(trace.beta, Some(2.0));
    assert_eq!(trace.radius, Some(f64::INFINITY));
}

#[test]
fn trace_histories_have_one_entry_per_iteration() {
    let t = instance(5, 40, 2, 10.0, 5);
    for stopping in [StoppingRule::NormChange, StoppingRule::IterateChange] {
        let cfg = SolverConfig {
            stopping,
            max_iter: 40,
            ..SolverConfig::new(5)
        };
        let trace = cpgd(&t.model, &cfg).unwrap();
        assert_eq!(trace.residuals.len(), trace.iterations);
        assert_eq!(trace.relative_changes.len(), trace.iterations);
        assert_eq!(trace.step_norms.len(), trace.iterations);
        assert_eq!(trace.converged, *trace.relative_changes.last().unwrap() < cfg.rel_tol);
        assert!(trace.iterations <= 40);
    }
}

#[test]
fn stopping_rules_measure_different_changes() {
    let t = instance(5, 40, 2, 10.0, 6);
    let run = |stopping| {
        cpgd(
            &t.model,
            &SolverConfig {
                stopping,
                max_iter: 5,
                rel_tol: 1e-300,
                ..SolverConfig::new(5)
            },
        )
        .unwrap()
    };
    let norm_rule = run(StoppingRule::NormChange);
    let step_rule = run(StoppingRule::IterateChange);
    assert_eq!(norm_rule.coefficients, step_rule.coefficients);
    for k in 1..5 {
        assert!(norm_rule.relative_changes[k] <= step_rule.relative_changes[k] * (1.0 + 1e-12));
    }
}

#[test]
fn fixed_point_residual_at_convergence() {
    for seed in 0..10 {
        let t = instance(5, 40, 1, 20.0, 10 + seed);
        let cfg = SolverConfig {
            stopping: StoppingRule::IterateChange,
            max_iter: 2000,
            ..SolverConfig::new(5)
        };
        let trace = cpgd(&t.model, &cfg).unwrap();
        assert!(trace.converged, "seed {seed}");
        let update = CpgdUpdate::new(&t.model, &cfg).unwrap();
        let x = trace.coefficients.values();
        let ux = update.apply(x).unwrap();
        assert!(norm((&ux - &x).view()) <= 10.0 * cfg.rel_tol * norm(x), "seed {seed}");
    }
}

#[test]
fn noiseless_cpgd_recovers_locations() {
    for seed in 0..5 {
        let t = instance(5, 40, 1, f64::INFINITY, 20 + seed);
        let cfg = SolverConfig {
            max_iter: 5000,
            rel_tol: 1e-12,
            ..SolverConfig::new(5)
        };
        let trace = cpgd(&t.model, &cfg).unwrap();
        let m = t.model.half_bandwidth();
        let loc = recover_locations(trace.coefficients.values(), 5, m).unwrap();
        assert!(
            positioning_error(&t.stream.locations, &loc).unwrap() < 1e-6,
            "seed {seed}"
        );
    }
}

#[test]
fn cpgd_is_deterministic() {
    let t = instance(5, 30, 3, 0.0, 7);
    let cfg = SolverConfig::new(5);
    let a = cpgd(&t.model, &cfg).unwrap();
    let b = cpgd(&t.model, &cfg).unwrap();
    assert_eq!(a.coefficients, b.coefficients);
    assert_eq!(a.residuals, b.residuals);
    assert_eq!(a.relative_changes, b.relative_changes);
}

#[test]
fn auto_radius_policy() {
    let injective = instance(5, 40, 1, 10.0, 8);
    let u = CpgdUpdate::new(&injective.model, &SolverConfig::new(5)).unwrap();
    assert_eq!(u.denoise.radius, f64::INFINITY);
    assert_eq!(u.tau, 1.0 / u.beta);

    let fat = instance(5, 30, 4, 10.0, 8);
    let u = CpgdUpdate::new(&fat.model, &SolverConfig::new(5)).unwrap();
    assert!((u.denoise.radius - norm(fat.model.observations())).abs() < 1e-12);

    let fixed = SolverConfig {
        radius: Radius::Finite(3.0),
        step: Some(1e-3),
        ..SolverConfig::new(5)
    };
    let u = CpgdUpdate::new(&fat.model, &fixed).unwrap();
    assert_eq!((u.denoise.radius, u.tau), (3.0, 1e-3));
}

#[test]
fn invalid_solver_configs() {
    let t = instance(3, 20, 1, 10.0, 9);
    let bad = [
        SolverConfig::new(0),
        SolverConfig::new(4),
        SolverConfig {
            order: Some(4),
            ..SolverConfig::new(3)
        },
        SolverConfig {
            rel_tol: 0.0,
            ..SolverConfig::new(3)
        },
        SolverConfig {
            max_iter: 0,
            ..SolverConfig::new(3)
        },
        SolverConfig {
            step: Some(-1.0),
            ..SolverConfig::new(3)
        },
        SolverConfig {
            radius: Radius::Finite(0.0),
            ..SolverConfig::new(3)
        },
    ];
    for cfg in bad {
        assert!(matches!(cpgd(&t.model, &cfg), Err(Error::Parameter(_))), "{cfg:?}");
        assert!(ls_cadzow(&t.model, &cfg).is_err());
    }
}

#[test]
fn option_names_round_trip() {
    for m in [Method::Cpgd, Method::GenFri, Method::LsCadzow] {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    for s in [StoppingRule::NormChange, StoppingRule::IterateChange] {
        assert_eq!(s.to_string().parse::<StoppingRule>().unwrap(), s);
    }
    assert_eq!("auto".parse::<Radius>().unwrap(), Radius::Auto);
    assert_eq!("inf".parse::<Radius>().unwrap(), Radius::Infinite);
    assert_eq!("2.5".parse::<Radius>().unwrap(), Radius::Finite(2.5));
    assert!("-1".parse::<Radius>().is_err());
    assert!("fista".parse::<Method>().is_err());
}

#[test]
fn ls_cadzow_noiseless_injective_is_exact() {
    for seed in 0..5 {
        let t = instance(5, 40, 1, f64::INFINITY, 30 + seed);
        let trace = ls_cadzow(&t.model, &SolverConfig::new(5)).unwrap();
        let x = fourier_coefficients(&t.stream, 5).into_inner();
        assert!(rel_diff(trace.coefficients.values(), x.view()) < 1e-8);
        assert_eq!(trace.iterations, 1);
        assert!(trace.converged);
    }
}

#[test]
fn least_squares_fits_fat_models() {
    let t = instance(4, 25, 4, f64::INFINITY, 11);
    let (x, _) = least_squares(&t.model, 1e-15).unwrap();
    let fit = t.model.apply(x.view()).unwrap();
    assert!(rel_diff(fit.view(), t.model.observations()) < 1e-8);
}

#[test]
fn least_squares_cutoff_engages_when_ill_conditioned() {
    let mut engaged = 0;
    for seed in 0..10 {
        let t = instance(9, 73, 4, f64::INFINITY, seed);
        let (_, kept) = least_squares(&t.model, LS_RCOND).unwrap();
        if t.model.gram_condition().unwrap() > 1e8 {
            assert!(kept < t.model.n(), "seed {seed}");
            engaged += 1;
        }
    }
    assert!(engaged >= 5);
    let t = instance(9, 73, 1, f64::INFINITY, 12);
    let (_, kept) = least_squares(&t.model, LS_RCOND).unwrap();
    assert_eq!(kept, t.model.n());
}

#[test]
fn genfri_refuses_non_injective_models() {
    let t = instance(4, 25, 4, 10.0, 13);
    let err = genfri(&t.model, &SolverConfig::new(4), &GenFriOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NotInjective { .. }));
}

#[test]
fn genfri_true_filter_gives_true_coefficients() {
    let t = instance(4, 40, 2, f64::INFINITY, 14);
    let m = t.model.half_bandwidth();
    let x = fourier_coefficients(&t.stream, m).into_inner();
    let mut h = Array1::from_elem(m + 1, c(0.0, 0.0));
    h[0] = c(1.0, 0.0);
    for (k, loc) in t.stream.locations.iter().enumerate() {
        let u = C64::from_polar(1.0, -2.0 * PI * loc);
        let prev = h.clone();
        for i in 1..=k + 1 {
            h[i] = prev[i] - prev[i - 1] * u;
        }
    }
    let r = annihilation_matrix(h.view(), t.model.n()).unwrap();
    assert!(norm(r.dot(&x).view()) < 1e-10 * norm(x.view()));
    let system = GenFriSystem::new(&t.model, m).unwrap();
    let got = system.x_update(h.view()).unwrap();
    assert!(rel_diff(got.view(), x.view()) < 1e-8);
}

#[test]
fn genfri_constraints_hold_every_iteration() {
    for seed in 0..3 {
        let t = instance(4, 30, 1, 10.0, 40 + seed);
        let opts = GenFriOptions {
            inner_iterations: 10,
            initialisations: 3,
        };
        let out = genfri_detailed(&t.model, &SolverConfig::new(4), &opts).unwrap();
        assert!(out.normalisation_residuals.len() >= out.trace.iterations);
        assert!(out.normalisation_residuals.iter().all(|r| *r <= 1e-10));
        assert!(out.annihilation_residuals.iter().all(|r| *r <= 1e-8));
        assert_eq!(out.trace.iterations, out.trace.residuals.len());
        let best = out.trace.residuals.iter().cloned().fold(f64::INFINITY, f64::min);
        let final_residual = t.model.residual_norm(out.trace.coefficients.values()).unwrap();
        assert_eq!(final_residual, best);
    }
}

#[test]
fn genfri_is_deterministic_and_seeded() {
    let t = instance(4, 30, 1, 5.0, 50);
    let opts = GenFriOptions {
        inner_iterations: 5,
        initialisations: 2,
    };
    let cfg = SolverConfig::new(4);
    let a = genfri(&t.model, &cfg, &opts).unwrap();
    let b = genfri(&t.model, &cfg, &opts).unwrap();
    assert_eq!(a.coefficients, b.coefficients);
    let other = genfri(&t.model, &SolverConfig { seed: 1, ..cfg }, &opts).unwrap();
    assert_ne!(a.residuals, other.residuals);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn gradient_step_is_lipschitz(seed in any::<u64>(), tau_frac in 0.05f64..1.5) {
        let t = instance(3, 25, 1, 10.0, seed % 1000);
        let (alpha, beta) = t.model.spectral_bounds().unwrap();
        let tau = tau_frac / beta;
        let mut r = rng(seed);
        let x = random_vector(&mut r, t.model.n());
        let z = random_vector(&mut r, t.model.n());
        let dx = gradient_step(x.view(), &t.model, tau).unwrap();
        let dz = gradient_step(z.view(), &t.model, tau).unwrap();
        let lip = gradient_lipschitz(alpha, beta, tau);
        prop_assert!(norm((&dx - &dz).view()) <= lip * norm((&x - &z).view()) + 1e-10);
    }

    #[test]
    fn gradient_step_is_affine(seed in any::<u64>(), s in -3.0f64..3.0) {
        let t = instance(3, 25, 2, 10.0, seed % 1000);
        let mut r = rng(seed);
        let x = random_vector(&mut r, t.model.n());
        let z = random_vector(&mut r, t.model.n());
        let tau = 0.3 / t.model.lipschitz_beta().unwrap();
        let mix = &x.mapv(|v| v * s) + &z.mapv(|v| v * (1.0 - s));
        let lhs = gradient_step(mix.view(), &t.model, tau).unwrap();
        let rhs = &gradient_step(x.view(), &t.model, tau).unwrap().mapv(|v| v * s)
            + &gradient_step(z.view(), &t.model, tau).unwrap().mapv(|v| v * (1.0 - s));
        prop_assert!(rel_diff(lhs.view(), rhs.view()) <= 1e-10);
    }
}
