//! Observables evaluated per sample path, and ensemble reductions of them.

use std::fmt;
use std::str::FromStr;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::dynamics::{Layout, Path, TimeGrid, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::stats;

/// A path functional. Series-valued observables return one value per grid
/// point; scalar observables return a single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    /// Component value at the final time.
    FinalState(usize),
    /// Trapezoidal time average of a component over `[0, T]`.
    TimeAverage(usize),
    /// `V_t / v0` on the grid.
    NormalizedVacf,
    /// `X_t / x0` on the grid.
    NormalizedPacf,
}

impl Observable {
    pub fn is_series(&self) -> bool {
        matches!(
            self,
            Observable::NormalizedVacf | Observable::NormalizedPacf
        )
    }

    /// Check the observable against a state layout and definite initial state.
    pub fn validate(&self, layout: &Layout, initial: &[f64]) -> Result<()> {
        match *self {
            Observable::FinalState(i) | Observable::TimeAverage(i) => {
                if i >= layout.dim() {
                    return Err(Error::param(
                        "observable",
                        format!("component {i} is outside the {}-dim state", layout.dim()),
                    ));
                }
            }
            Observable::NormalizedVacf => {
                let i = layout
                    .velocity
                    .ok_or_else(|| Error::param("observable", "model has no velocity"))?;
                if initial[i] == 0.0 {
                    return Err(Error::param("v0", "normalized VACF needs v0 != 0"));
                }
            }
            Observable::NormalizedPacf => {
                let i = layout
                    .position
                    .ok_or_else(|| Error::param("observable", "model has no position"))?;
                if initial[i] == 0.0 {
                    return Err(Error::param("x0", "normalized PACF needs x0 != 0"));
                }
            }
        }
        Ok(())
    }

    /// Evaluate on one path. Call [`Observable::validate`] first.
    pub fn evaluate(&self, path: &Path, layout: &Layout, grid: &TimeGrid) -> Vec<f64> {
        match *self {
            Observable::FinalState(i) => vec![path.state(path.n_points() - 1)[i]],
            Observable::TimeAverage(i) => {
                vec![trapezoid_average(path.component(i), grid)]
            }
            Observable::NormalizedVacf => {
                normalized(path, layout.velocity.expect("validated velocity index"))
            }
            Observable::NormalizedPacf => {
                normalized(path, layout.position.expect("validated position index"))
            }
        }
    }

    pub fn label(&self, layout: &Layout) -> String {
        match *self {
            Observable::FinalState(i) => format!("final({})", layout.labels[i]),
            Observable::TimeAverage(i) => format!("timeavg({})", layout.labels[i]),
            Observable::NormalizedVacf => "vacf".into(),
            Observable::NormalizedPacf => "pacf".into(),
        }
    }

    /// Parse `vacf`, `pacf`, `final(<label>)` or `timeavg(<label>)`.
    pub fn parse(s: &str, layout: &Layout) -> Result<Self> {
        let s = s.trim();
        let component = |inner: &str| {
            layout.index_of(inner.trim()).ok_or_else(|| {
                Error::param(
                    "observable",
                    format!("unknown component `{inner}`; have {:?}", layout.labels),
                )
            })
        };
        let call = |name: &str| {
            s.strip_prefix(name)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
        };
        match s {
            "vacf" => Ok(Observable::NormalizedVacf),
            "pacf" => Ok(Observable::NormalizedPacf),
            _ => {
                if let Some(inner) = call("final") {
                    Ok(Observable::FinalState(component(inner)?))
                } else if let Some(inner) = call("timeavg") {
                    Ok(Observable::TimeAverage(component(inner)?))
                } else {
                    Err(Error::param(
                        "observable",
                        format!("unknown observable `{s}`"),
                    ))
                }
            }
        }
    }
}

fn normalized(path: &Path, index: usize) -> Vec<f64> {
    let first = path.state(0)[index];
    path.component(index).map(|x| x / first).collect()
}

/// `T^{-1} int_0^T x dt` by the trapezoidal rule on the grid.
pub fn trapezoid_average(values: impl Iterator<Item = f64>, grid: &TimeGrid) -> f64 {
    let values: Vec<f64> = values.collect();
    let n = values.len();
    let interior: f64 = values[1..n - 1].iter().sum();
    let integral = grid.dt * (interior + 0.5 * (values[0] + values[n - 1]));
    integral / grid.t_final()
}

/// Per-time ensemble mean with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub time: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Series {
    /// Reduce per-sample series (all the same length) into mean and standard
    /// error, in sample order.
    pub fn from_samples(time: Vec<f64>, samples: &[Vec<f64>]) -> Self {
        let len = time.len();
        let mut mean = Vec::with_capacity(len);
        let mut stderr = Vec::with_capacity(len);
        let mut column = vec![0.0; samples.len()];
        for t in 0..len {
            for (slot, s) in column.iter_mut().zip(samples) {
                *slot = s[t];
            }
            mean.push(stats::mean(&column));
            stderr.push(stats::stderr(&column));
        }
        Series { time, mean, stderr }
    }

    pub fn to_csv(&self) -> String {
        crate::io::columns_csv(
            &["time", "mean", "stderr"],
            &[&self.time, &self.mean, &self.stderr],
        )
    }
}

fn ensemble_normalized(ensemble: &TrajectoryEnsemble, index: usize, initial: f64) -> Series {
    let samples: Vec<Vec<f64>> = (0..ensemble.n_samples)
        .map(|i| {
            (0..=ensemble.grid.n_steps)
                .map(|s| ensemble.value(i, s, index) / initial)
                .collect()
        })
        .collect();
    Series::from_samples(ensemble.times(), &samples)
}

/// `<V_t> / v0` with per-time standard errors.
pub fn normalized_vacf(ensemble: &TrajectoryEnsemble, v0: f64) -> Result<Series> {
    if v0 == 0.0 || !v0.is_finite() {
        return Err(Error::param("v0", "normalized VACF needs a finite v0 != 0"));
    }
    let i = ensemble
        .layout
        .velocity
        .ok_or_else(|| Error::param("observable", "model has no velocity"))?;
    Ok(ensemble_normalized(ensemble, i, v0))
}

/// `<X_t> / x0` with per-time standard errors.
pub fn normalized_pacf(ensemble: &TrajectoryEnsemble, x0: f64) -> Result<Series> {
    if x0 == 0.0 || !x0.is_finite() {
        return Err(Error::param("x0", "normalized PACF needs a finite x0 != 0"));
    }
    let i = ensemble
        .layout
        .position
        .ok_or_else(|| Error::param("observable", "model has no position"))?;
    Ok(ensemble_normalized(ensemble, i, x0))
}

/// Per-sample trapezoidal time averages of `component`.
pub fn time_average(ensemble: &TrajectoryEnsemble, component: usize) -> Result<Vec<f64>> {
    if component >= ensemble.dim() {
        return Err(Error::param("component", "outside the state layout"));
    }
    Ok((0..ensemble.n_samples)
        .map(|i| {
            trapezoid_average(
                (0..=ensemble.grid.n_steps).map(|s| ensemble.value(i, s, component)),
                &ensemble.grid,
            )
        })
        .collect())
}

/// Normalized autocorrelation `r(l) / r(0)` of one stationary series, where
/// `r(l) = n^{-1} sum_t z_t z_{t+l}` with the mean removed. Computed with a
/// zero-padded FFT of length at least `2n`.
pub fn stationary_acf_fft(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::param("series", "need at least two points"));
    }
    let mean = stats::mean(series);
    let scale = series.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let r0 = buf[0].re;
    if !(r0 > 1e-28 * scale.max(f64::MIN_POSITIVE) * len as f64 * n as f64) {
        return Err(Error::Degenerate(
            "constant series has zero variance".into(),
        ));
    }
    Ok(buf[..n].iter().map(|z| z.re / r0).collect())
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::FinalState(i) => write!(f, "final[{i}]"),
            Observable::TimeAverage(i) => write!(f, "timeavg[{i}]"),
            Observable::NormalizedVacf => write!(f, "vacf"),
            Observable::NormalizedPacf => write!(f, "pacf"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    /// Layout-free parse accepting `x`/`v` components only.
    fn from_str(s: &str) -> Result<Self> {
        let layout = Layout {
            labels: vec!["x".into(), "v".into()],
            position: Some(0),
            velocity: Some(1),
        };
        Observable::parse(s, &layout)
    }
}
