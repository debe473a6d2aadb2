use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use glesens_bench::dynamics::simulate_path;
use glesens_bench::kernels::fit_prony;
use glesens_bench::noise::increments;
use glesens_bench::{
    AnyModel, Coupling, FitOptions, GleParams, LangevinParams, NoisePlan, OuParams, Potential,
    PowerLawKernel, System, TimeGrid,
};

const STEPS: usize = 1000;

fn gle(modes: usize) -> AnyModel {
    let kernel = PowerLawKernel::new(1.0, 0.5).unwrap();
    let (prony, _) = fit_prony(&kernel, modes, 100.0, &FitOptions::default()).unwrap();
    AnyModel::Gle(
        GleParams::new(
            1.0,
            Potential::Harmonic { omega: 1.0 },
            1.0,
            prony,
            0.0,
            1.0,
        )
        .unwrap(),
    )
}

fn engines(c: &mut Criterion) {
    let grid = TimeGrid::new(STEPS as f64 * 0.01, 0.01).unwrap();
    let plan = NoisePlan::new(1, Coupling::CommonPath, 1).unwrap();
    let models = [
        (
            "ou",
            AnyModel::Ou(OuParams::new(1.0, 1.2, 0.3, 2.0).unwrap()),
        ),
        (
            "langevin",
            AnyModel::Langevin(LangevinParams::new(1.0, 1.0, 0.5, -1.0, -0.1).unwrap()),
        ),
        ("gle_1", gle(1)),
        ("gle_8", gle(8)),
        ("gle_16", gle(16)),
    ];
    let mut group = c.benchmark_group("path");
    group.throughput(Throughput::Elements(STEPS as u64));
    for (name, model) in &models {
        let mut sample = 0;
        group.bench_function(*name, |b| {
            b.iter(|| {
                sample += 1;
                simulate_path(model, &plan, System::Nominal, sample, &grid).unwrap()
            })
        });
    }
    group.finish();
}

fn noise(c: &mut Criterion) {
    let mut group = c.benchmark_group("increments");
    group.throughput(Throughput::Elements(STEPS as u64 * 8));
    for (name, coupling) in [
        ("common", Coupling::CommonPath),
        ("eta", Coupling::Eta(0.7)),
    ] {
        let plan = NoisePlan::new(1, coupling, 8).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| increments(&plan, 3, System::Perturbed, STEPS, 0.01).unwrap())
        });
    }
    group.finish();
}

fn prony(c: &mut Criterion) {
    let kernel = PowerLawKernel::new(1.0, 0.5).unwrap();
    let options = FitOptions::default();
    c.bench_function("fit_prony_8", |b| {
        b.iter(|| fit_prony(&kernel, 8, 100.0, &options).unwrap())
    });
}

criterion_group!(benches, engines, noise, prony);
criterion_main!(benches);
