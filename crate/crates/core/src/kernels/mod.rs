//! Memory kernels: the power law, positive Prony series, and the
//! least-squares fit of Prony amplitudes on a fixed log-spaced time grid.

mod nnls;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

pub use nnls::{nnls, NnlsSolution};

/// A memory kernel `t -> kappa(t)`.
pub trait Kernel {
    fn eval(&self, t: f64) -> Result<f64>;
}

/// `kappa(t) = gamma_lambda / Gamma(1 - lambda) * t^(-lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawKernel {
    pub gamma_lambda: f64,
    pub lambda: f64,
}

impl PowerLawKernel {
    pub fn new(gamma_lambda: f64, lambda: f64) -> Result<Self> {
        if !(gamma_lambda > 0.0 && gamma_lambda.is_finite()) {
            return Err(Error::param("gamma_lambda", "must be finite and positive"));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::param("lambda", "must lie in (0, 1)"));
        }
        Ok(Self {
            gamma_lambda,
            lambda,
        })
    }
}

impl Kernel for PowerLawKernel {
    fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        Ok(self.gamma_lambda / gamma(1.0 - self.lambda) * t.powf(-self.lambda))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PronyMode {
    /// Amplitude `c_k >= 0`.
    pub c: f64,
    /// Relaxation time `tau_k > 0`.
    pub tau: f64,
}

/// Positive Prony series `sum_k (c_k / tau_k) exp(-t / tau_k)`.
///
/// Relaxation times are strictly increasing, except that zero-amplitude
/// auxiliary modes (added to match state sizes between systems with different
/// mode counts) may trail the series with arbitrary `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct PronySeries {
    modes: Vec<PronyMode>,
}

impl PronySeries {
    pub fn new(modes: Vec<PronyMode>) -> Result<Self> {
        for (k, m) in modes.iter().enumerate() {
            if !(m.c >= 0.0 && m.c.is_finite()) {
                return Err(Error::param(
                    format!("c{}", k + 1),
                    "must be finite and >= 0",
                ));
            }
            if !(m.tau > 0.0 && m.tau.is_finite()) {
                return Err(Error::param(
                    format!("tau{}", k + 1),
                    "must be finite and > 0",
                ));
            }
        }
        let active = modes.iter().rposition(|m| m.c > 0.0).map_or(0, |i| i + 1);
        if modes[..active].windows(2).any(|w| w[1].tau <= w[0].tau) {
            return Err(Error::param(
                "tau",
                "relaxation times must be strictly increasing",
            ));
        }
        Ok(Self { modes })
    }

    pub fn single(c: f64, tau: f64) -> Result<Self> {
        Self::new(vec![PronyMode { c, tau }])
    }

    pub fn modes(&self) -> &[PronyMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Append `(c = 0, tau = 1)` modes until the series has `n` entries.
    pub fn padded_to(&self, n: usize) -> Self {
        let mut modes = self.modes.clone();
        while modes.len() < n {
            modes.push(PronyMode { c: 0.0, tau: 1.0 });
        }
        Self { modes }
    }

    pub(crate) fn with_mode(&self, k: usize, mode: PronyMode) -> Result<Self> {
        let mut modes = self.modes.clone();
        modes[k] = mode;
        Self::new(modes)
    }

    /// Evaluate at `t >= 0`.
    pub fn value(&self, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m.c / m.tau * (-t / m.tau).exp())
            .sum()
    }

    /// CSV with header `k,c_k,tau_k`, modes numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,c_k,tau_k\n");
        for (k, m) in self.modes.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", k + 1, m.c, m.tau);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "k,c_k,tau_k" => {}
            Some((i, _)) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected header `k,c_k,tau_k`".into(),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty Prony CSV".into(),
                })
            }
        }
        let mut modes = Vec::new();
        for (i, line) in lines {
            let bad = |message: &str| Error::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(bad("expected three fields"));
            }
            let k: usize = fields[0].parse().map_err(|_| bad("bad mode index"))?;
            if k != modes.len() + 1 {
                return Err(bad("mode indices must run 1, 2, ..."));
            }
            let c = fields[1].parse().map_err(|_| bad("bad c_k"))?;
            let tau = fields[2].parse().map_err(|_| bad("bad tau_k"))?;
            modes.push(PronyMode { c, tau });
        }
        Self::new(modes)
    }
}

impl Kernel for PronySeries {
    fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        Ok(self.value(t))
    }
}

/// Residual weighting for the amplitude fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Plain `sum_i (fit(t_i) - kappa(t_i))^2`.
    Absolute,
    /// `sum_i ((fit(t_i) - kappa(t_i)) / kappa(t_i))^2`.
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Number of log-spaced sample points on the fit window.
    pub n_points: usize,
    /// Fit window; defaults to `[T / 1000, 100 T]`.
    pub window: Option<(f64, f64)>,
    /// Explicit relaxation times; defaults to `n_modes` log-spaced values
    /// spanning the window.
    pub taus: Option<Vec<f64>>,
    pub weighting: Weighting,
    /// Dual-residual tolerance for the NNLS solver.
    pub kkt_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_points: 1000,
            window: None,
            taus: None,
            weighting: Weighting::Relative,
            kkt_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// `max_i |fit(t_i) - kappa(t_i)| / kappa(t_i)` over the sample points.
    pub sup_rel_error: f64,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub window: (f64, f64),
    /// Ratio of extreme singular values of the column-scaled design matrix.
    pub condition: f64,
    pub kkt_residual: f64,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Fit nonnegative Prony amplitudes to `target` with fixed log-spaced
/// relaxation times, on a window two decades longer than `sim_length`.
pub fn fit_prony(
    target: &dyn Kernel,
    n_modes: usize,
    sim_length: f64,
    options: &FitOptions,
) -> Result<(PronySeries, FitReport)> {
    if n_modes == 0 {
        return Err(Error::param("n_modes", "at least one mode is required"));
    }
    if !(sim_length > 0.0 && sim_length.is_finite()) {
        return Err(Error::param("sim_length", "must be finite and positive"));
    }
    if options.n_points < 2 {
        return Err(Error::param("n_points", "need at least two sample points"));
    }
    let window = options
        .window
        .unwrap_or((sim_length / 1e3, 100.0 * sim_length));
    if !(window.0 > 0.0 && window.1 > window.0) {
        return Err(Error::param("window", "need 0 < start < end"));
    }
    let taus = match &options.taus {
        Some(t) => t.clone(),
        None => log_space(window.0, window.1, n_modes),
    };
    if taus.len() != n_modes {
        return Err(Error::param("taus", "length must equal n_modes"));
    }

    let times = log_space(window.0, window.1, options.n_points);
    let values = times
        .iter()
        .map(|&t| target.eval(t))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = match options.weighting {
        Weighting::Absolute => vec![1.0; times.len()],
        Weighting::Relative => values
            .iter()
            .map(|v| 1.0 / v.abs().max(f64::MIN_POSITIVE))
            .collect(),
    };

    let m = times.len();
    let mut design = DMatrix::from_fn(m, n_modes, |i, k| {
        weights[i] * (-times[i] / taus[k]).exp() / taus[k]
    });
    let rhs = DVector::from_iterator(m, values.iter().zip(&weights).map(|(v, w)| v * w));

    let scales: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    if scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::IllConditioned {
            condition: f64::INFINITY,
            reason: "a design column vanishes on the sample points".into(),
        });
    }
    for (k, s) in scales.iter().enumerate() {
        design.column_mut(k).unscale_mut(*s);
    }
    let sv = design.singular_values();
    let condition = sv.max() / sv.min();

    let rhs_norm = rhs.norm().max(f64::MIN_POSITIVE);
    let sol = nnls(&design, &(&rhs / rhs_norm), options.kkt_tol);
    let residual_norm = sol.residual_norm * rhs_norm;
    if !residual_norm.is_finite() || sol.x.iter().any(|x| !x.is_finite()) {
        return Err(Error::IllConditioned {
            condition,
            reason: "NNLS residual is not finite".into(),
        });
    }

    let modes = taus
        .iter()
        .zip(sol.x.iter().zip(&scales))
        .map(|(&tau, (&x, &s))| PronyMode {
            c: (x * rhs_norm / s).max(0.0),
            tau,
        })
        .collect();
    let series = PronySeries::new(modes)?;
    let sup_rel_error = times
        .iter()
        .zip(&values)
        .map(|(&t, &v)| ((series.value(t) - v) / v).abs())
        .fold(0.0, f64::max);

    Ok((
        series,
        FitReport {
            sup_rel_error,
            residual_norm,
            window,
            condition,
            kkt_residual: sol.kkt_residual,
        },
    ))
}
