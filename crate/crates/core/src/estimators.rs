//! Finite-difference sensitivity estimators over coupled ensembles.
//!
//! A difference always compares two systems, `first` and `second`, with
//! `D = f(first) - f(second)`. The `first` system draws its noise with the
//! [`System::Nominal`] tag and `second` with [`System::Perturbed`]; under a
//! coupled plan the tags are ignored and both read the same streams.
//!
//! | stencil | first       | second      | denominator |
//! |---------|-------------|-------------|-------------|
//! | forward | `theta + e` | `theta`     | `e`         |
//! | central | `theta + e` | `theta - e` | `2 e`       |

use std::fmt;
use std::str::FromStr;

use crate::dynamics::{
    map_samples, simulate_path, AnyModel, GleParams, Model, ParameterId, Path, TimeGrid,
};
use crate::error::{Error, Result};
use crate::kernels::{fit_prony, FitOptions, Kernel};
use crate::noise::{NoisePlan, System};
use crate::observables::Observable;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stencil {
    Forward,
    Central,
}

impl Stencil {
    pub fn denominator(&self, epsilon: f64) -> f64 {
        match self {
            Stencil::Forward => epsilon,
            Stencil::Central => 2.0 * epsilon,
        }
    }
}

impl fmt::Display for Stencil {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stencil::Forward => "forward",
            Stencil::Central => "central",
        })
    }
}

impl FromStr for Stencil {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "forward" => Ok(Stencil::Forward),
            "central" => Ok(Stencil::Central),
            other => Err(Error::param(
                "stencil",
                format!("unknown stencil `{other}`"),
            )),
        }
    }
}

/// The two systems of a finite difference and its denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferencePair {
    pub first: AnyModel,
    pub second: AnyModel,
    pub denominator: f64,
}

impl DifferencePair {
    pub fn new(
        model: &AnyModel,
        parameter: ParameterId,
        stencil: Stencil,
        epsilon: f64,
    ) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be finite and >= 0"));
        }
        let first = model.perturbed(parameter, epsilon)?;
        let second = match stencil {
            Stencil::Forward => model.perturbed(parameter, 0.0)?,
            Stencil::Central => model.perturbed(parameter, -epsilon)?,
        };
        Ok(Self {
            first,
            second,
            denominator: stencil.denominator(epsilon),
        })
    }

    /// Arbitrary pair, e.g. models with different mode counts. The
    /// denominator is 1.
    pub fn of(first: AnyModel, second: AnyModel) -> Self {
        Self {
            first,
            second,
            denominator: 1.0,
        }
    }

    /// Simulate both systems for every sample and reduce each pair of paths
    /// with `f`. Results are in sample order.
    pub fn map_pairs<T, F>(
        &self,
        plan: &NoisePlan,
        grid: &TimeGrid,
        samples: usize,
        f: F,
    ) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&Path, &Path) -> T + Sync + Send,
    {
        if samples < 2 {
            return Err(Error::param("samples", "need at least two samples"));
        }
        map_samples(samples, |i| {
            let a = simulate_path(&self.first, plan, System::Nominal, i, grid)?;
            let b = simulate_path(&self.second, plan, System::Perturbed, i, grid)?;
            Ok(f(&a, &b))
        })
    }

    fn validate(&self, observables: &[Observable]) -> Result<()> {
        for m in [&self.first, &self.second] {
            for o in observables {
                o.validate(&m.layout(), &m.initial_state())?;
            }
        }
        Ok(())
    }

    /// Per-sample differences `f(first) - f(second)` of `observable`.
    pub fn differences(
        &self,
        observable: Observable,
        plan: &NoisePlan,
        grid: &TimeGrid,
        samples: usize,
    ) -> Result<Vec<Vec<f64>>> {
        self.validate(&[observable])?;
        let (la, lb) = (self.first.layout(), self.second.layout());
        self.map_pairs(plan, grid, samples, |a, b| {
            let fa = observable.evaluate(a, &la, grid);
            let fb = observable.evaluate(b, &lb, grid);
            fa.iter().zip(&fb).map(|(x, y)| x - y).collect()
        })
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub value: f64,
    pub stderr: f64,
}

impl VarianceEstimate {
    /// `other - self` exceeds `sigmas` combined standard errors.
    pub fn below_with_margin(&self, other: &VarianceEstimate, sigmas: f64) -> bool {
        other.value - self.value > sigmas * self.stderr.hypot(other.stderr)
    }
}

/// Statistic of the per-sample difference vector at the evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffStatistic {
    /// `Var[D]`.
    Variance(Observable),
    /// `Cov[D_a, D_b]`, the off-diagonal entry of the difference covariance.
    Covariance(Observable, Observable),
}

impl DiffStatistic {
    fn observables(&self) -> Vec<Observable> {
        match *self {
            DiffStatistic::Variance(o) => vec![o],
            DiffStatistic::Covariance(a, b) => vec![a, b],
        }
    }
}

/// Resolve the index of `eval_time` in an observable's output. Scalar
/// observables are defined at the final time only.
fn output_index(observable: Observable, grid: &TimeGrid, eval_time: f64) -> Result<usize> {
    if observable.is_series() {
        grid.index_of(eval_time)
    } else if grid.index_of(eval_time)? == grid.n_steps {
        Ok(0)
    } else {
        Err(Error::param(
            "t_star",
            "scalar observables are evaluated at the final time only",
        ))
    }
}

/// Evaluate `statistic` of `D` at `eval_time` for one pair. No `epsilon`
/// scaling is applied.
pub fn difference_statistic(
    pair: &DifferencePair,
    statistic: DiffStatistic,
    plan: &NoisePlan,
    grid: &TimeGrid,
    samples: usize,
    eval_time: f64,
) -> Result<VarianceEstimate> {
    let observables = statistic.observables();
    pair.validate(&observables)?;
    let idx = observables
        .iter()
        .map(|&o| output_index(o, grid, eval_time))
        .collect::<Result<Vec<_>>>()?;
    let (la, lb) = (pair.first.layout(), pair.second.layout());
    let diffs: Vec<Vec<f64>> = pair.map_pairs(plan, grid, samples, |a, b| {
        observables
            .iter()
            .zip(&idx)
            .map(|(o, &i)| o.evaluate(a, &la, grid)[i] - o.evaluate(b, &lb, grid)[i])
            .collect()
    })?;
    let column = |j: usize| -> Vec<f64> { diffs.iter().map(|d| d[j]).collect() };
    let (x, y) = match statistic {
        DiffStatistic::Variance(_) => (column(0), column(0)),
        DiffStatistic::Covariance(..) => (column(0), column(1)),
    };
    Ok(VarianceEstimate {
        value: stats::covariance(&x, &y),
        stderr: stats::covariance_stderr(&x, &y),
    })
}

/// `Cov[f(first), f(second)]` at `eval_time` with a bootstrap standard error
/// over samples.
#[allow(clippy::too_many_arguments)]
pub fn pair_covariance(
    pair: &DifferencePair,
    observable: Observable,
    plan: &NoisePlan,
    grid: &TimeGrid,
    samples: usize,
    eval_time: f64,
    bootstrap_replicates: usize,
    bootstrap_seed: u64,
) -> Result<VarianceEstimate> {
    pair.validate(&[observable])?;
    let i = output_index(observable, grid, eval_time)?;
    let (la, lb) = (pair.first.layout(), pair.second.layout());
    let values: Vec<(f64, f64)> = pair.map_pairs(plan, grid, samples, |a, b| {
        (
            observable.evaluate(a, &la, grid)[i],
            observable.evaluate(b, &lb, grid)[i],
        )
    })?;
    let (x, y): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
    let stderr = stats::bootstrap_stderr(samples, bootstrap_replicates, bootstrap_seed, |idx| {
        let xs: Vec<f64> = idx.iter().map(|&k| x[k]).collect();
        let ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
        stats::covariance(&xs, &ys)
    });
    Ok(VarianceEstimate {
        value: stats::covariance(&x, &y),
        stderr,
    })
}

/// Raw `Var[D]` at `eval_time` for a finite-difference pair.
#[allow(clippy::too_many_arguments)]
pub fn variance_of_difference(
    model: &AnyModel,
    parameter: ParameterId,
    stencil: Stencil,
    epsilon: f64,
    observable: Observable,
    plan: &NoisePlan,
    grid: &TimeGrid,
    samples: usize,
    eval_time: f64,
) -> Result<VarianceEstimate> {
    let pair = DifferencePair::new(model, parameter, stencil, epsilon)?;
    difference_statistic(
        &pair,
        DiffStatistic::Variance(observable),
        plan,
        grid,
        samples,
        eval_time,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityEstimate {
    pub parameter: ParameterId,
    pub stencil: Stencil,
    pub epsilon: f64,
    pub samples: usize,
    /// Grid times for series observables, `[T]` for scalar ones.
    pub time: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Unscaled per-time `Var[D]`.
    pub var_difference: Vec<f64>,
}

impl SensitivityEstimate {
    pub fn to_csv(&self) -> String {
        crate::io::columns_csv(
            &["time", "sens", "stderr"],
            &[&self.time, &self.value, &self.stderr],
        )
    }
}

/// Finite-difference sensitivity of `observable` with respect to `parameter`.
#[allow(clippy::too_many_arguments)]
pub fn fd_sensitivity(
    model: &AnyModel,
    parameter: ParameterId,
    stencil: Stencil,
    epsilon: f64,
    observable: Observable,
    plan: &NoisePlan,
    grid: &TimeGrid,
    samples: usize,
) -> Result<SensitivityEstimate> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    let pair = DifferencePair::new(model, parameter, stencil, epsilon)?;
    let diffs = pair.differences(observable, plan, grid, samples)?;
    Ok(summarize(
        parameter,
        stencil,
        epsilon,
        observable,
        grid,
        &diffs,
        pair.denominator,
    ))
}

/// Reduce per-sample differences into a sensitivity estimate.
pub fn summarize(
    parameter: ParameterId,
    stencil: Stencil,
    epsilon: f64,
    observable: Observable,
    grid: &TimeGrid,
    diffs: &[Vec<f64>],
    denominator: f64,
) -> SensitivityEstimate {
    let time = if observable.is_series() {
        grid.times()
    } else {
        vec![grid.t_final()]
    };
    let len = time.len();
    let mut value = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    let mut var_difference = Vec::with_capacity(len);
    let mut column = vec![0.0; diffs.len()];
    for t in 0..len {
        for (slot, d) in column.iter_mut().zip(diffs) {
            *slot = d[t];
        }
        let var = stats::variance(&column);
        value.push(stats::mean(&column) / denominator);
        stderr.push((var / column.len() as f64).sqrt() / denominator);
        var_difference.push(var);
    }
    SensitivityEstimate {
        parameter,
        stencil,
        epsilon,
        samples: diffs.len(),
        time,
        value,
        stderr,
        var_difference,
    }
}

/// How sweep points pick their master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedPolicy {
    /// Every point reuses the plan's seed, which smooths the sweep curve.
    #[default]
    Shared,
    /// Point `i` uses `seed + i`.
    OffsetPerPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSweep {
    pub epsilons: Vec<f64>,
    pub variances: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Least-squares slope of `ln |value|` against `ln epsilon`.
    pub slope: f64,
    pub intercept: f64,
    /// Indices of points left out of the fit because their value was zero.
    pub dropped: Vec<usize>,
}

impl VarianceSweep {
    pub fn has_dropped_points(&self) -> bool {
        !self.dropped.is_empty()
    }
}

/// Fit `ln |y| = slope ln x + intercept`, skipping points with `y == 0`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, Vec<usize>)> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut dropped = Vec::new();
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if y == 0.0 || !y.is_finite() {
            dropped.push(i);
        } else {
            lx.push(x.ln());
            ly.push(y.abs().ln());
        }
    }
    if lx.len() < 2 {
        return Err(Error::Degenerate(
            "fewer than two nonzero points for a log-log fit".into(),
        ));
    }
    let (slope, intercept) = stats::linear_fit(&lx, &ly);
    Ok((slope, intercept, dropped))
}

/// Check a sweep grid: at least three points, positive, strictly increasing,
/// spanning at least one decade.
pub fn validate_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.len() < 3 {
        return Err(Error::param("epsilons", "need at least three values"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::param(
            "epsilons",
            "values must be positive and finite",
        ));
    }
    if epsilons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "epsilons",
            "values must be strictly increasing",
        ));
    }
    if epsilons[epsilons.len() - 1] / epsilons[0] < 10.0 * (1.0 - 1e-12) {
        return Err(Error::param(
            "epsilons",
            "grid must span at least one decade",
        ));
    }
    Ok(())
}

/// `statistic` of `D` at `eval_time` for each `epsilon`, with a log-log
/// slope fit.
#[allow(clippy::too_many_arguments)]
pub fn variance_sweep(
    model: &AnyModel,
    parameter: ParameterId,
    stencil: Stencil,
    epsilons: &[f64],
    statistic: DiffStatistic,
    plan: &NoisePlan,
    grid: &TimeGrid,
    samples: usize,
    eval_time: f64,
    seeds: SeedPolicy,
) -> Result<VarianceSweep> {
    validate_epsilons(epsilons)?;
    let mut variances = Vec::with_capacity(epsilons.len());
    let mut stderrs = Vec::with_capacity(epsilons.len());
    for (i, &eps) in epsilons.iter().enumerate() {
        let point_plan = match seeds {
            SeedPolicy::Shared => *plan,
            SeedPolicy::OffsetPerPoint => plan.with_seed(plan.master_seed.wrapping_add(i as u64)),
        };
        let pair = DifferencePair::new(model, parameter, stencil, eps)?;
        let est = difference_statistic(&pair, statistic, &point_plan, grid, samples, eval_time)?;
        variances.push(est.value);
        stderrs.push(est.stderr);
    }
    let (slope, intercept, dropped) = fit_loglog(epsilons, &variances)?;
    Ok(VarianceSweep {
        epsilons: epsilons.to_vec(),
        variances,
        stderrs,
        slope,
        intercept,
        dropped,
    })
}

/// Nominal and perturbed GLE models with `n1` and `n2` Prony modes fitted
/// separately to `kernel`.
pub fn mode_count_models(
    base: &GleParams,
    kernel: &dyn Kernel,
    n1: usize,
    n2: usize,
    fit_length: f64,
    options: &FitOptions,
) -> Result<(GleParams, GleParams)> {
    let (p1, _) = fit_prony(kernel, n1, fit_length, options)?;
    let (p2, _) = fit_prony(kernel, n2, fit_length, options)?;
    Ok((base.with_prony(p1)?, base.with_prony(p2)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCountResult {
    pub n_nominal: usize,
    pub n_perturbed: usize,
    /// `sum_t |mean D_t|^2 / stderr(D_t)` over grid times in `(0, horizon]`.
    pub s_star: f64,
    pub s_star_stderr: f64,
    /// `Var[D]` at the evaluation time.
    pub var_difference: VarianceEstimate,
}

/// Options for [`mode_count_sensitivity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCountOptions {
    pub horizon: f64,
    pub eval_time: f64,
    pub bootstrap_replicates: usize,
    pub bootstrap_seed: u64,
}

/// Non-local sensitivity `S*` between GLE models with different mode
/// counts. The shorter model is padded with `(c = 0, tau = 1)` modes so that
/// each mode index shares its stream under a coupled plan.
pub fn mode_count_sensitivity(
    nominal: &GleParams,
    perturbed: &GleParams,
    observable: Observable,
    plan: &NoisePlan,
    grid: &TimeGrid,
    samples: usize,
    options: &ModeCountOptions,
) -> Result<ModeCountResult> {
    if !observable.is_series() {
        return Err(Error::param(
            "observable",
            "S* needs a time-series observable",
        ));
    }
    if !(options.horizon > 0.0 && options.horizon < grid.t_final() + 0.5 * grid.dt) {
        return Err(Error::param("horizon", "must lie in (0, T]"));
    }
    let h = grid.index_of(options.horizon)?;
    let t_eval = grid.index_of(options.eval_time)?;
    let n = nominal.prony.len().max(perturbed.prony.len());
    let pair = DifferencePair::of(
        AnyModel::Gle(nominal.padded_to(n)),
        AnyModel::Gle(perturbed.padded_to(n)),
    );
    let diffs = pair.differences(observable, plan, grid, samples)?;

    let s_star_of = |idx: &[usize]| -> Result<f64> {
        let mut total = 0.0;
        let mut column = vec![0.0; idx.len()];
        for t in 1..=h {
            for (slot, &i) in column.iter_mut().zip(idx) {
                *slot = diffs[i][t];
            }
            let se = stats::stderr(&column);
            if !(se > 0.0) {
                return Err(Error::Degenerate(format!(
                    "standard error of D vanishes at t = {}",
                    grid.time(t)
                )));
            }
            total += stats::mean(&column).powi(2) / se;
        }
        Ok(total)
    };
    let all: Vec<usize> = (0..samples).collect();
    let s_star = s_star_of(&all)?;
    let s_star_stderr = stats::bootstrap_stderr(
        samples,
        options.bootstrap_replicates,
        options.bootstrap_seed,
        |idx| s_star_of(idx).unwrap_or(f64::NAN),
    );
    let at: Vec<f64> = diffs.iter().map(|d| d[t_eval]).collect();
    Ok(ModeCountResult {
        n_nominal: nominal.prony.len(),
        n_perturbed: perturbed.prony.len(),
        s_star,
        s_star_stderr,
        var_difference: VarianceEstimate {
            value: stats::variance(&at),
            stderr: stats::covariance_stderr(&at, &at),
        },
    })
}
