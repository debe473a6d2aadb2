//! Experiment execution. Every artifact is built in memory; nothing touches
//! the filesystem here.

use std::fmt::Write as _;

use glesens_core::dynamics::{map_samples, simulate, simulate_path};
use glesens_core::estimators::{
    difference_statistic, fd_sensitivity, mode_count_models, mode_count_sensitivity,
    pair_covariance, variance_sweep,
};
use glesens_core::io::{columns_csv, ensemble_to_csv};
use glesens_core::kernels::{fit_prony, log_space, FitReport, Kernel};
use glesens_core::oracles::{
    langevin_eigen, langevin_phi, ou_vardiff_exact, ou_vardiff_expansion, OuParameter, OuRegime,
};
use glesens_core::{
    AnyModel, Coupling, DifferencePair, Error as CoreError, GleParams, ModeCountOptions,
    ModeCountResult, Model, NoisePlan, Observable, ParameterId, Potential, PronySeries,
    SensitivityEstimate, Series, Stencil, System, VarianceEstimate, VarianceSweep,
};

use crate::config::{coupling_name, Experiment, Kind, OracleCheck};

/// A numerical failure with the step that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{context}: {source}")]
pub struct RunError {
    pub context: String,
    #[source]
    pub source: CoreError,
}

trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError> {
        self.map_err(|source| RunError {
            context: what(),
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub n_modes: usize,
    pub prony: PronySeries,
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPair {
    pub label: String,
    pub coupled: VarianceSweep,
    pub independent: VarianceSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRow {
    pub n_nominal: usize,
    pub coupled: ModeCountResult,
    pub independent: ModeCountResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub quantity: String,
    pub measured: f64,
    pub stderr: f64,
    pub expected: f64,
    /// How the comparison was made, e.g. `rel<=0.3`.
    pub rule: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    PronyFit(Vec<FitRow>),
    Simulate(Vec<(String, Series)>),
    Sensitivity(Vec<(Coupling, SensitivityEstimate)>),
    VarSweep(Vec<SweepPair>),
    ModeSens(Vec<ModeRow>),
    OracleCheck(Vec<CheckRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub report: Report,
}

impl RunOutput {
    /// False only for an oracle check with a failing row.
    pub fn passed(&self) -> bool {
        match &self.report {
            Report::OracleCheck(rows) => rows.iter().all(|r| r.passed),
            _ => true,
        }
    }
}

fn file_token(label: &str) -> String {
    let mut out = String::new();
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn plan(e: &Experiment, coupling: Coupling) -> NoisePlan {
    NoisePlan::new(e.seed, coupling, 1).expect("validated noise settings")
}

pub fn run(e: &Experiment) -> Result<RunOutput, RunError> {
    match e.kind {
        Kind::PronyFit => prony_fit(e),
        Kind::Simulate => simulate_kind(e),
        Kind::Sensitivity => sensitivity(e),
        Kind::VarSweep => var_sweep(e),
        Kind::ModeSens => mode_sens(e),
        Kind::OracleCheck => oracle_check(e),
    }
}

fn prony_fit(e: &Experiment) -> Result<RunOutput, RunError> {
    let fit = e.kernel.as_ref().expect("validated kernel");
    let counts = if e.mode_counts.is_empty() {
        vec![fit.modes]
    } else {
        e.mode_counts.clone()
    };
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    for &n in &counts {
        let (prony, report) = fit_prony(&fit.kernel, n, fit.fit_length, &fit.options)
            .context(|| format!("fitting {n} Prony modes"))?;
        artifacts.push(Artifact {
            name: format!("{}_n{n}.csv", e.prefix),
            contents: prony.to_csv(),
        });
        rows.push(FitRow {
            n_modes: n,
            prony,
            report,
        });
    }

    let window = rows[0].report.window;
    let times = log_space(window.0, window.1, fit.options.n_points);
    let target = times
        .iter()
        .map(|&t| fit.kernel.eval(t))
        .collect::<Result<Vec<_>, _>>()
        .context(|| "evaluating the target kernel".into())?;
    let curves: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| times.iter().map(|&t| r.prony.value(t)).collect())
        .collect();
    let names: Vec<String> = rows.iter().map(|r| format!("fit_n{}", r.n_modes)).collect();
    let mut headers = vec!["time", "target"];
    headers.extend(names.iter().map(String::as_str));
    let mut columns: Vec<&[f64]> = vec![&times, &target];
    columns.extend(curves.iter().map(Vec::as_slice));
    artifacts.push(Artifact {
        name: format!("{}_curve.csv", e.prefix),
        contents: columns_csv(&headers, &columns),
    });

    let col = |f: &dyn Fn(&FitRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    artifacts.push(Artifact {
        name: format!("{}_report.csv", e.prefix),
        contents: columns_csv(
            &[
                "n_modes",
                "sup_rel_error",
                "residual_norm",
                "condition",
                "window_lo",
                "window_hi",
            ],
            &[
                &col(&|r| r.n_modes as f64),
                &col(&|r| r.report.sup_rel_error),
                &col(&|r| r.report.residual_norm),
                &col(&|r| r.report.condition),
                &col(&|r| r.report.window.0),
                &col(&|r| r.report.window.1),
            ],
        ),
    });
    Ok(RunOutput {
        artifacts,
        report: Report::PronyFit(rows),
    })
}

/// The experiment's GLE refitted with `n` modes.
fn refit(e: &Experiment, n: usize) -> Result<GleParams, RunError> {
    let fit = e.kernel.as_ref().expect("validated kernel");
    let base = e.gle().expect("fitted kernels belong to gle models");
    let (prony, _) = fit_prony(&fit.kernel, n, fit.fit_length, &fit.options)
        .context(|| format!("fitting {n} Prony modes"))?;
    base.with_prony(prony)
        .context(|| format!("building the {n}-mode model"))
}

fn simulate_kind(e: &Experiment) -> Result<RunOutput, RunError> {
    let grid = e.grid();
    let variants: Vec<(String, AnyModel)> = if e.mode_counts.is_empty() {
        vec![(e.prefix.clone(), e.model.clone())]
    } else {
        e.mode_counts
            .iter()
            .map(|&n| Ok((format!("{}_n{n}", e.prefix), AnyModel::Gle(refit(e, n)?))))
            .collect::<Result<_, RunError>>()?
    };
    let plan = plan(e, e.coupling);
    let mut artifacts = Vec::new();
    let mut series_out = Vec::new();
    for (stem, model) in &variants {
        let layout = model.layout();
        if e.write_paths {
            let ens = simulate(model, &plan, System::Nominal, e.samples, &grid)
                .context(|| format!("simulating {stem}"))?;
            artifacts.push(Artifact {
                name: format!("{stem}_paths.csv"),
                contents: ensemble_to_csv(&ens),
            });
        }
        if e.observables.is_empty() {
            continue;
        }
        let per_sample: Vec<Vec<Vec<f64>>> = map_samples(e.samples, |i| {
            let path = simulate_path(model, &plan, System::Nominal, i, &grid)?;
            Ok(e.observables
                .iter()
                .map(|o| o.evaluate(&path, &layout, &grid))
                .collect())
        })
        .context(|| format!("simulating {stem}"))?;
        for (j, o) in e.observables.iter().enumerate() {
            let time = if o.is_series() {
                grid.times()
            } else {
                vec![grid.t_final()]
            };
            let samples: Vec<Vec<f64>> = per_sample.iter().map(|s| s[j].clone()).collect();
            let series = Series::from_samples(time, &samples);
            let name = format!("{stem}_{}.csv", file_token(&o.label(&layout)));
            artifacts.push(Artifact {
                name: name.clone(),
                contents: series.to_csv(),
            });
            series_out.push((name, series));
        }
    }
    Ok(RunOutput {
        artifacts,
        report: Report::Simulate(series_out),
    })
}

fn sensitivity(e: &Experiment) -> Result<RunOutput, RunError> {
    let grid = e.grid();
    let parameter = e.parameter.expect("validated parameter");
    let eps = e.epsilons[0];
    let layout = e.model.layout();
    let mut artifacts = Vec::new();
    let mut out = Vec::new();
    for &o in &e.observables {
        for &c in &e.couplings {
            let est = fd_sensitivity(
                &e.model,
                parameter,
                e.stencil,
                eps,
                o,
                &plan(e, c),
                &grid,
                e.samples,
            )
            .context(|| {
                format!(
                    "sensitivity of {} to {parameter} ({})",
                    o.label(&layout),
                    coupling_name(c)
                )
            })?;
            artifacts.push(Artifact {
                name: format!(
                    "{}_{}_{}.csv",
                    e.prefix,
                    file_token(&o.label(&layout)),
                    coupling_name(c)
                ),
                contents: est.to_csv(),
            });
            out.push((c, est));
        }
    }
    Ok(RunOutput {
        artifacts,
        report: Report::Sensitivity(out),
    })
}

fn var_sweep(e: &Experiment) -> Result<RunOutput, RunError> {
    let grid = e.grid();
    let parameter = e.parameter.expect("validated parameter");
    let mut pairs = Vec::new();
    let mut artifacts = Vec::new();
    for s in &e.statistics {
        let sweep = |c: Coupling| {
            variance_sweep(
                &e.model,
                parameter,
                e.stencil,
                &e.epsilons,
                s.statistic,
                &plan(e, c),
                &grid,
                e.samples,
                e.t_star(),
                e.seed_policy,
            )
            .context(|| format!("sweeping {} ({})", s.label, coupling_name(c)))
        };
        let coupled = sweep(e.coupling)?;
        let independent = sweep(Coupling::Independent)?;
        let stem = format!("{}_{}", e.prefix, file_token(&s.label));
        artifacts.push(Artifact {
            name: format!("{stem}.csv"),
            contents: columns_csv(
                &["epsilon", "var_coupled", "var_independent"],
                &[&e.epsilons, &coupled.variances, &independent.variances],
            ),
        });
        artifacts.push(Artifact {
            name: format!("{stem}_stderr.csv"),
            contents: columns_csv(
                &["epsilon", "stderr_coupled", "stderr_independent"],
                &[&e.epsilons, &coupled.stderrs, &independent.stderrs],
            ),
        });
        pairs.push(SweepPair {
            label: s.label.clone(),
            coupled,
            independent,
        });
    }
    let mut slopes = String::from("statistic,coupling,slope,intercept,dropped_points\n");
    for p in &pairs {
        for (name, sw) in [
            (coupling_name(e.coupling), &p.coupled),
            ("independent", &p.independent),
        ] {
            let dropped: Vec<String> = sw.dropped.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(
                slopes,
                "{},{name},{},{},{}",
                p.label,
                sw.slope,
                sw.intercept,
                dropped.join(";")
            );
        }
    }
    artifacts.push(Artifact {
        name: format!("{}_slopes.csv", e.prefix),
        contents: slopes,
    });
    Ok(RunOutput {
        artifacts,
        report: Report::VarSweep(pairs),
    })
}

fn mode_sens(e: &Experiment) -> Result<RunOutput, RunError> {
    let grid = e.grid();
    let fit = e.kernel.as_ref().expect("validated kernel");
    let base = e.gle().expect("validated gle");
    let observable = e.observables[0];
    let options = ModeCountOptions {
        horizon: e.horizon(),
        eval_time: e.t_star(),
        bootstrap_replicates: e.bootstrap,
        bootstrap_seed: e.seed,
    };
    let mut rows = Vec::new();
    for &n in &e.mode_counts {
        let (nominal, perturbed) =
            mode_count_models(base, &fit.kernel, n, n + 1, fit.fit_length, &fit.options)
                .context(|| format!("fitting {n} and {} modes", n + 1))?;
        let run = |c: Coupling| {
            mode_count_sensitivity(
                &nominal,
                &perturbed,
                observable,
                &plan(e, c),
                &grid,
                e.samples,
                &options,
            )
            .context(|| format!("comparing {n} and {} modes ({})", n + 1, coupling_name(c)))
        };
        rows.push(ModeRow {
            n_nominal: n,
            coupled: run(e.coupling)?,
            independent: run(Coupling::Independent)?,
        });
    }
    let col = |f: &dyn Fn(&ModeRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let n_modes = col(&|r| r.n_nominal as f64);
    let artifacts = vec![
        Artifact {
            name: format!("{}.csv", e.prefix),
            contents: columns_csv(
                &[
                    "n_modes",
                    "S_star",
                    "stderr",
                    "var_coupled",
                    "var_independent",
                ],
                &[
                    &n_modes,
                    &col(&|r| r.coupled.s_star),
                    &col(&|r| r.coupled.s_star_stderr),
                    &col(&|r| r.coupled.var_difference.value),
                    &col(&|r| r.independent.var_difference.value),
                ],
            ),
        },
        Artifact {
            name: format!("{}_var_stderr.csv", e.prefix),
            contents: columns_csv(
                &["n_modes", "var_coupled_stderr", "var_independent_stderr"],
                &[
                    &n_modes,
                    &col(&|r| r.coupled.var_difference.stderr),
                    &col(&|r| r.independent.var_difference.stderr),
                ],
            ),
        },
    ];
    Ok(RunOutput {
        artifacts,
        report: Report::ModeSens(rows),
    })
}

fn relative_row(quantity: &str, m: VarianceEstimate, expected: f64, tol: f64) -> CheckRow {
    CheckRow {
        quantity: quantity.into(),
        measured: m.value,
        stderr: m.stderr,
        expected,
        rule: format!("rel<={tol}"),
        passed: ((m.value - expected) / expected).abs() <= tol,
    }
}

fn sigma_row(quantity: &str, m: VarianceEstimate, expected: f64, sigmas: f64) -> CheckRow {
    CheckRow {
        quantity: quantity.into(),
        measured: m.value,
        stderr: m.stderr,
        expected,
        rule: format!("abs<={sigmas}se"),
        passed: (m.value - expected).abs() <= sigmas * m.stderr,
    }
}

fn oracle_check(e: &Experiment) -> Result<RunOutput, RunError> {
    let rows = match e.oracle.expect("validated oracle") {
        OracleCheck::OuTimeAverage => ou_timeavg_check(e)?,
        OracleCheck::LangevinCovariance => langevin_check(e)?,
        OracleCheck::GleEquilibrium => gle_equilibrium_check(e)?,
    };
    let mut csv = String::from("quantity,measured,stderr,expected,rule,passed\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.quantity, r.measured, r.stderr, r.expected, r.rule, r.passed
        );
    }
    Ok(RunOutput {
        artifacts: vec![Artifact {
            name: format!("{}.csv", e.prefix),
            contents: csv,
        }],
        report: Report::OracleCheck(rows),
    })
}

fn ou_timeavg_check(e: &Experiment) -> Result<Vec<CheckRow>, RunError> {
    let AnyModel::Ou(p) = &e.model else {
        unreachable!("validated ou model")
    };
    let grid = e.grid();
    let parameter = e.parameter.expect("validated parameter");
    let which = match parameter {
        ParameterId::Theta => OuParameter::Theta,
        ParameterId::Sigma => OuParameter::Sigma,
        other => {
            return Err(RunError {
                context: "ou oracle check".into(),
                source: CoreError::Unsupported(format!("no closed form for {other}")),
            })
        }
    };
    let eps = e.epsilons[0];
    let coupled = e.coupling.is_coupled();
    let t = grid.t_final();
    let pair = DifferencePair::new(&e.model, parameter, Stencil::Central, eps)
        .context(|| "building the perturbed pair".into())?;
    let measured = difference_statistic(
        &pair,
        glesens_core::DiffStatistic::Variance(Observable::TimeAverage(0)),
        &plan(e, e.coupling),
        &grid,
        e.samples,
        t,
    )
    .context(|| "estimating Var[D]".into())?;
    let expansion = ou_vardiff_expansion(
        which,
        OuRegime::TimeAverage,
        coupled,
        p.theta,
        p.sigma,
        eps,
        t,
    )
    .context(|| "evaluating the expansion".into())?;
    let (first, second) = match (&pair.first, &pair.second) {
        (AnyModel::Ou(a), AnyModel::Ou(b)) => ((a.theta, a.sigma), (b.theta, b.sigma)),
        _ => unreachable!("ou pair"),
    };
    let exact = ou_vardiff_exact(first, second, OuRegime::TimeAverage, coupled, t)
        .context(|| "evaluating the closed form".into())?;
    let mut rows = Vec::new();
    if expansion.constant_known {
        rows.push(relative_row(
            "var_d_leading",
            measured,
            expansion.value,
            e.tolerance,
        ));
    }
    rows.push(sigma_row("var_d_exact", measured, exact, e.sigmas));
    Ok(rows)
}

fn langevin_check(e: &Experiment) -> Result<Vec<CheckRow>, RunError> {
    let grid = e.grid();
    let eps = e.epsilons[0];
    let pair = DifferencePair::new(&e.model, ParameterId::Beta, Stencil::Central, eps)
        .context(|| "building the perturbed pair".into())?;
    let (AnyModel::Langevin(a), AnyModel::Langevin(b)) = (&pair.first, &pair.second) else {
        unreachable!("validated langevin model")
    };
    if a.mass != 1.0 {
        return Err(RunError {
            context: "langevin oracle check".into(),
            source: CoreError::Unsupported("the closed form assumes unit mass".into()),
        });
    }
    let t = grid.t_final();
    let expected = langevin_eigen(a.beta, a.omega)
        .and_then(|ea| langevin_eigen(b.beta, b.omega).map(|eb| (ea, eb)))
        .and_then(|(ea, eb)| langevin_phi(&ea, &eb, a.kt, t))
        .context(|| "evaluating the closed form".into())?;
    let measured = pair_covariance(
        &pair,
        Observable::FinalState(0),
        &plan(e, e.coupling),
        &grid,
        e.samples,
        t,
        e.bootstrap,
        e.seed,
    )
    .context(|| "estimating Cov[X_T, X~_T]".into())?;
    Ok(vec![sigma_row("cov_x_final", measured, expected, e.sigmas)])
}

/// Pooled moments after burn-in. Each path contributes one estimate; the
/// spread across paths gives the standard error.
fn gle_equilibrium_check(e: &Experiment) -> Result<Vec<CheckRow>, RunError> {
    let g = e.gle().expect("validated gle");
    let Potential::Harmonic { omega } = g.potential else {
        unreachable!("validated harmonic potential")
    };
    let grid = e.grid();
    let start = grid
        .index_of(e.burn_in)
        .context(|| "locating burn_in on the grid".into())?;
    let dim = 2 + g.prony.len();
    let plan = plan(e, Coupling::Independent);
    // per path: second moments about zero, all stationary means vanish
    let moments: Vec<Vec<f64>> = map_samples(e.samples, |i| {
        let path = simulate_path(g, &plan, System::Nominal, i, &grid)?;
        let mut acc = vec![0.0; dim * dim];
        let n = (grid.n_steps + 1 - start) as f64;
        for step in start..=grid.n_steps {
            let s = path.state(step);
            for a in 0..dim {
                for b in 0..dim {
                    acc[a * dim + b] += s[a] * s[b];
                }
            }
        }
        Ok(acc.into_iter().map(|x| x / n).collect())
    })
    .context(|| "simulating the equilibrium ensemble".into())?;
    let entry = |a: usize, b: usize| {
        let xs: Vec<f64> = moments.iter().map(|m| m[a * dim + b]).collect();
        VarianceEstimate {
            value: glesens_core::stats::mean(&xs),
            stderr: glesens_core::stats::stderr(&xs),
        }
    };
    let mut rows = vec![
        relative_row("var_x", entry(0, 0), g.kt / (omega * omega), e.tolerance),
        relative_row("var_v", entry(1, 1), g.kt / g.mass, e.tolerance),
    ];
    for (k, m) in g.prony.modes().iter().enumerate() {
        if m.c > 0.0 {
            rows.push(relative_row(
                &format!("var_s{}", k + 1),
                entry(2 + k, 2 + k),
                g.kt * m.c / m.tau,
                e.tolerance,
            ));
        }
    }
    for (a, b, name) in [(0, 1, "corr_xv"), (0, 2, "corr_xs1"), (1, 2, "corr_vs1")] {
        let c = entry(a, b);
        let scale = (entry(a, a).value * entry(b, b).value).sqrt();
        rows.push(CheckRow {
            quantity: name.into(),
            measured: c.value / scale,
            stderr: c.stderr / scale,
            expected: 0.0,
            rule: format!("abs<={}", e.tolerance),
            passed: (c.value / scale).abs() <= e.tolerance,
        });
    }
    Ok(rows)
}
