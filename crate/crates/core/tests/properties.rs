use std::f64::consts::PI;

use glesens_core::dynamics::simulate;
use glesens_core::estimators::{fd_sensitivity, fit_loglog};
use glesens_core::kernels::{fit_prony, log_space, nnls, FitOptions, PowerLawKernel};
use glesens_core::noise::increments;
use glesens_core::oracles::{langevin_eigen, ou_cov_final};
use glesens_core::{
    AnyModel, Coupling, NoisePlan, Observable, OuParams, ParameterId, Stencil, System, TimeGrid,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| entries[(i * cols + j) % entries.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nnls_is_feasible_and_stationary(
        entries in prop::collection::vec(-2.0f64..2.0, 40),
        rhs in prop::collection::vec(-3.0f64..3.0, 8),
    ) {
        let a = matrix(8, 5, &entries);
        let b = DVector::from_vec(rhs);
        let sol = nnls(&a, &b, 1e-10);
        prop_assert!(sol.x.iter().all(|&x| x >= 0.0));
        let grad = a.transpose() * (&b - &a * &sol.x);
        for (g, x) in grad.iter().zip(sol.x.iter()) {
            // Passive columns have zero gradient, active ones point outward.
            if *x > 1e-9 {
                prop_assert!(g.abs() < 1e-6, "passive gradient {g}");
            } else {
                prop_assert!(*g < 1e-6, "active gradient {g}");
            }
        }
    }

    #[test]
    fn nnls_extra_columns_never_raise_the_residual(
        entries in prop::collection::vec(-2.0f64..2.0, 60),
        rhs in prop::collection::vec(-3.0f64..3.0, 10),
        keep in 1usize..6,
    ) {
        let full = matrix(10, 6, &entries);
        let sub = full.columns(0, keep).into_owned();
        let b = DVector::from_vec(rhs);
        let r_full = nnls(&full, &b, 1e-12).residual_norm;
        let r_sub = nnls(&sub, &b, 1e-12).residual_norm;
        prop_assert!(r_full <= r_sub + 1e-9, "{r_full} > {r_sub}");
    }

    #[test]
    fn increments_are_reproducible(seed in any::<u64>(), sample in 0usize..1000, streams in 1usize..4) {
        for coupling in [Coupling::Independent, Coupling::CommonPath, Coupling::Eta(1.0)] {
            let plan = NoisePlan::new(seed, coupling, streams).unwrap();
            let a = increments(&plan, sample, System::Perturbed, 16, 0.01).unwrap();
            let b = increments(&plan, sample, System::Perturbed, 16, 0.01).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn coupled_systems_read_the_same_noise(seed in any::<u64>(), sample in 0usize..1000, eta in 0.0f64..(2.0 * PI)) {
        for coupling in [Coupling::CommonPath, Coupling::Eta(eta)] {
            let plan = NoisePlan::new(seed, coupling, 2).unwrap();
            let a = increments(&plan, sample, System::Nominal, 32, 0.1).unwrap();
            let b = increments(&plan, sample, System::Perturbed, 32, 0.1).unwrap();
            prop_assert_eq!(a, b);
        }
        let plan = NoisePlan::new(seed, Coupling::Independent, 2).unwrap();
        let a = increments(&plan, sample, System::Nominal, 32, 0.1).unwrap();
        let b = increments(&plan, sample, System::Perturbed, 32, 0.1).unwrap();
        prop_assert!(a.values.iter().zip(&b.values).all(|(x, y)| x != y));
    }

    #[test]
    fn eta_coupling_preserves_the_marginal(seed in any::<u64>(), eta in 0.0f64..(2.0 * PI)) {
        let n = 20_000;
        let dt = 0.25;
        let plan = NoisePlan::new(seed, Coupling::Eta(eta), 1).unwrap();
        let block = increments(&plan, 0, System::Nominal, n, dt).unwrap();
        let mean = block.values.iter().sum::<f64>() / n as f64;
        let var = block.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // 5 sigma for the sample variance of n normals
        prop_assert!((var / dt - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(), "var/dt = {}", var / dt);
        prop_assert!(mean.abs() < 5.0 * (dt / n as f64).sqrt());
    }

    #[test]
    fn langevin_roots_satisfy_vieta(beta in 0.05f64..8.0, omega in 0.05f64..4.0) {
        prop_assume!((beta - 2.0 * omega).abs() > 1e-6);
        let e = langevin_eigen(beta, omega).unwrap();
        let sum = e.mu1 + e.mu2;
        let prod = e.mu1 * e.mu2;
        prop_assert!((sum.re - beta).abs() < 1e-12 * beta.max(1.0));
        prop_assert!(sum.im.abs() < 1e-12);
        prop_assert!((prod.re - omega * omega).abs() < 1e-10 * (omega * omega).max(1.0));
        prop_assert!(prod.im.abs() < 1e-10);
    }

    #[test]
    fn ou_final_covariance_is_symmetric_and_bounded(
        s1 in 0.1f64..2.0, s2 in 0.1f64..2.0, t1 in 0.1f64..3.0, t2 in 0.1f64..3.0, t in 0.1f64..20.0,
    ) {
        let c12 = ou_cov_final(s1, s2, t1, t2, t);
        prop_assert!((c12 - ou_cov_final(s2, s1, t2, t1, t)).abs() <= 1e-14 * c12.abs().max(1.0));
        let v1 = ou_cov_final(s1, s1, t1, t1, t);
        let v2 = ou_cov_final(s2, s2, t2, t2, t);
        prop_assert!(c12 * c12 <= v1 * v2 * (1.0 + 1e-12));
    }

    #[test]
    fn loglog_fit_recovers_power_laws(slope in -3.0f64..3.0, scale in 1e-6f64..1e3) {
        let xs = log_space(1e-3, 1e-1, 5);
        let ys: Vec<f64> = xs.iter().map(|x| scale * x.powf(slope)).collect();
        let (s, c, dropped) = fit_loglog(&xs, &ys).unwrap();
        prop_assert!((s - slope).abs() < 1e-9);
        prop_assert!((c - scale.ln()).abs() < 1e-8);
        prop_assert!(dropped.is_empty());
    }

    #[test]
    fn prony_amplitudes_are_nonnegative(gamma_lambda in 0.1f64..5.0, lambda in 0.05f64..0.95, n in 1usize..12) {
        let kernel = PowerLawKernel::new(gamma_lambda, lambda).unwrap();
        let options = FitOptions { n_points: 200, ..FitOptions::default() };
        let (series, report) = fit_prony(&kernel, n, 10.0, &options).unwrap();
        prop_assert!(series.modes().iter().all(|m| m.c >= 0.0));
        prop_assert!(report.sup_rel_error.is_finite());
    }
}

#[test]
fn ou_theta_sensitivity_matches_the_mean_derivative() {
    let (theta, mu, sigma, x0, t) = (1.0, 1.2, 0.3, 2.0, 2.0);
    let model = AnyModel::Ou(OuParams::new(theta, mu, sigma, x0).unwrap());
    let grid = TimeGrid::new(t, 0.01).unwrap();
    let plan = NoisePlan::new(7, Coupling::CommonPath, 1).unwrap();
    let eps = 1e-3;
    let est = fd_sensitivity(
        &model,
        ParameterId::Theta,
        Stencil::Central,
        eps,
        Observable::FinalState(0),
        &plan,
        &grid,
        2000,
    )
    .unwrap();
    // d/dtheta of mu + (x0 - mu) exp(-theta t)
    let exact = -t * (x0 - mu) * (-theta * t).exp();
    let got = est.value[0];
    assert!(
        (got - exact).abs() < 3.0 * est.stderr[0] + 1e-6,
        "{got} vs {exact} (se {})",
        est.stderr[0]
    );
}

#[test]
fn fixed_seed_ensembles_are_bit_identical() {
    let model = OuParams::new(1.0, 0.0, 0.5, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 0.01).unwrap();
    let plan = NoisePlan::new(11, Coupling::Independent, 1).unwrap();
    let a = simulate(&model, &plan, System::Nominal, 32, &grid).unwrap();
    let b = simulate(&model, &plan, System::Nominal, 32, &grid).unwrap();
    assert_eq!(a, b);
    let c = simulate(&model, &plan.with_seed(12), System::Nominal, 32, &grid).unwrap();
    assert_ne!(a.data, c.data);
}
