use glesens_core::dynamics::simulate;
use glesens_core::estimators::fd_sensitivity;
use glesens_core::{
    AnyModel, Coupling, DifferencePair, GleParams, LangevinParams, Model, NoisePlan, Observable,
    OuParams, ParameterId, Potential, PronySeries, Stencil, System, TimeGrid,
};

#[test]
fn sensitivity_is_the_scaled_difference_of_ensemble_means() {
    let model = AnyModel::Ou(OuParams::new(1.0, 1.2, 0.3, 2.0).unwrap());
    let grid = TimeGrid::new(2.0, 0.01).unwrap();
    for coupling in [Coupling::CommonPath, Coupling::Independent] {
        for stencil in [Stencil::Forward, Stencil::Central] {
            let plan = NoisePlan::new(3, coupling, 1).unwrap();
            let eps = 0.05;
            let m = 200;
            let est = fd_sensitivity(
                &model,
                ParameterId::Theta,
                stencil,
                eps,
                Observable::FinalState(0),
                &plan,
                &grid,
                m,
            )
            .unwrap();
            let pair = DifferencePair::new(&model, ParameterId::Theta, stencil, eps).unwrap();
            let last = grid.n_steps;
            let mean = |model: &AnyModel, system| {
                let ens = simulate(model, &plan, system, m, &grid).unwrap();
                (0..m).map(|i| ens.value(i, last, 0)).sum::<f64>() / m as f64
            };
            let expected = (mean(&pair.first, System::Nominal)
                - mean(&pair.second, System::Perturbed))
                / pair.denominator;
            assert!(
                (est.value[0] - expected).abs() < 1e-10,
                "{coupling:?} {stencil}: {} vs {expected}",
                est.value[0]
            );
        }
    }
}

fn velocity_at(model: &dyn Model, grid: &TimeGrid, t: f64) -> f64 {
    let plan = NoisePlan::new(1, Coupling::CommonPath, 1).unwrap();
    let v = model.layout().index_of("v").unwrap();
    let ens = simulate(model, &plan, System::Nominal, 1, grid).unwrap();
    ens.value(0, grid.index_of(t).unwrap(), v)
}

#[test]
fn short_memory_gle_approaches_langevin() {
    // Near-zero temperature isolates the deterministic response; the kernel
    // (c / tau) exp(-t / tau) integrates to c, the Markovian friction.
    let (omega, c, kt) = (1.0, 1.0, 1e-12);
    let grid = TimeGrid::new(3.0, 1e-4).unwrap();
    let langevin = LangevinParams::new(omega, c, kt, 0.0, 1.0).unwrap();
    let reference = velocity_at(&langevin, &grid, 2.0);
    let errors: Vec<f64> = [0.5, 0.1, 0.02]
        .iter()
        .map(|&tau| {
            let gle = GleParams::new(
                1.0,
                Potential::Harmonic { omega },
                kt,
                PronySeries::single(c, tau).unwrap(),
                0.0,
                1.0,
            )
            .unwrap();
            (velocity_at(&gle, &grid, 2.0) - reference).abs()
        })
        .collect();
    assert!(
        errors.windows(2).all(|w| w[1] < w[0]),
        "errors do not shrink with tau: {errors:?}"
    );
    assert!(errors[2] < 0.02, "{errors:?}");
}

#[test]
fn coupling_leaves_perturbed_marginals_unchanged() {
    // The perturbed system reads different streams under each plan; its
    // one-sided mean and variance must agree across plans.
    let model = AnyModel::Ou(OuParams::new(1.0, 1.2, 0.3, 2.0).unwrap());
    let pair = DifferencePair::new(&model, ParameterId::Sigma, Stencil::Central, 0.1).unwrap();
    let grid = TimeGrid::new(2.0, 0.01).unwrap();
    let m = 4000;
    let moments = |coupling| {
        let plan = NoisePlan::new(17, coupling, 1).unwrap();
        let ens = simulate(&pair.second, &plan, System::Perturbed, m, &grid).unwrap();
        let xs: Vec<f64> = (0..m).map(|i| ens.value(i, grid.n_steps, 0)).collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        (mean, var)
    };
    let (m0, v0) = moments(Coupling::Independent);
    for coupling in [Coupling::CommonPath, Coupling::Eta(0.4)] {
        let (m1, v1) = moments(coupling);
        let se_mean = ((v0 + v1) / m as f64).sqrt();
        let se_var = (v0 * v0 + v1 * v1).sqrt() * (2.0 / (m - 1) as f64).sqrt();
        assert!(
            (m1 - m0).abs() < 3.0 * se_mean,
            "{coupling:?}: mean {m1} vs {m0}"
        );
        assert!(
            (v1 - v0).abs() < 3.0 * se_var,
            "{coupling:?}: var {v1} vs {v0}"
        );
    }
}
