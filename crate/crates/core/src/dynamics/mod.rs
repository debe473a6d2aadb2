//! Time integrators for the OU, Langevin and extended-variable GLE models,
//! and the ensemble driver that maps samples onto worker threads.
//!
//! State layouts are fixed:
//!
//! | model    | layout                     |
//! |----------|----------------------------|
//! | OU       | `[x]`                      |
//! | Langevin | `[x, v]`                   |
//! | GLE      | `[x, v, s1, ..., sN]`      |

mod gle;
mod langevin;
mod ou;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{increments, IncrementBlock, NoisePlan, System};

pub use gle::{GleParams, Potential};
pub use langevin::LangevinParams;
pub use ou::OuParams;

/// Uniform grid `0, dt, ..., n_steps * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidTimeStep(dt));
        }
        if !(t_final >= dt) || !t_final.is_finite() {
            return Err(Error::param(
                "t_final",
                "must be finite and at least one step",
            ));
        }
        let steps = t_final / dt;
        let n_steps = steps.round() as usize;
        if (steps - n_steps as f64).abs() > 1e-6 * steps {
            return Err(Error::param(
                "t_final",
                format!("{t_final} is not a whole number of steps of {dt}"),
            ));
        }
        Ok(Self { dt, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Grid index of time `t`, which must lie on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt;
        let i = x.round();
        if !(i >= 0.0) || (x - i).abs() > 1e-6 * x.max(1.0) || i as usize > self.n_steps {
            return Err(Error::param("t_star", format!("{t} is not a grid time")));
        }
        Ok(i as usize)
    }
}

/// A single trajectory: `(n_steps + 1)` rows of `dim` state components.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Path {
    pub fn n_points(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn state(&self, step: usize) -> &[f64] {
        &self.data[step * self.dim..(step + 1) * self.dim]
    }

    pub fn component(&self, index: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(index).step_by(self.dim).copied()
    }
}

/// Column names and the roles of the position/velocity columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub labels: Vec<String>,
    pub position: Option<usize>,
    pub velocity: Option<usize>,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

pub trait Model: Sync {
    fn layout(&self) -> Layout;
    fn n_streams(&self) -> usize;
    fn initial_state(&self) -> Vec<f64>;
    /// Integrate one path over `grid` driven by `noise`.
    fn integrate(&self, grid: &TimeGrid, noise: &IncrementBlock) -> Result<Path>;
}

/// One path for `sample_index`, with increments drawn per `plan`.
pub fn simulate_path<M: Model + ?Sized>(
    model: &M,
    plan: &NoisePlan,
    system: System,
    sample_index: usize,
    grid: &TimeGrid,
) -> Result<Path> {
    let plan = plan.with_streams(model.n_streams());
    let noise = increments(&plan, sample_index, system, grid.n_steps, grid.dt)?;
    let path = model.integrate(grid, &noise)?;
    if let Some(pos) = path.data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            sample: sample_index,
            step: pos / path.dim,
        });
    }
    Ok(path)
}

/// Evaluate `f` on samples `0..n` in parallel, returning results in sample
/// order. Output does not depend on the number of worker threads.
pub fn map_samples<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// `M` sampled paths on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub grid: TimeGrid,
    pub layout: Layout,
    pub n_samples: usize,
    /// `[sample][step][component]`, row-major.
    pub data: Vec<f64>,
}

impl TrajectoryEnsemble {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn path(&self, sample: usize) -> Path {
        let len = (self.grid.n_steps + 1) * self.dim();
        Path {
            dim: self.dim(),
            data: self.data[sample * len..(sample + 1) * len].to_vec(),
        }
    }

    pub fn value(&self, sample: usize, step: usize, component: usize) -> f64 {
        let d = self.dim();
        self.data[(sample * (self.grid.n_steps + 1) + step) * d + component]
    }
}

/// Simulate `n_samples` paths of `model` for `system`.
pub fn simulate<M: Model + ?Sized>(
    model: &M,
    plan: &NoisePlan,
    system: System,
    n_samples: usize,
    grid: &TimeGrid,
) -> Result<TrajectoryEnsemble> {
    if n_samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let paths = map_samples(n_samples, |i| simulate_path(model, plan, system, i, grid))?;
    let data = paths.into_iter().flat_map(|p| p.data).collect();
    Ok(TrajectoryEnsemble {
        grid: *grid,
        layout: model.layout(),
        n_samples,
        data,
    })
}

/// A perturbable model parameter. Mode indices are zero-based internally and
/// printed one-based (`c1` is the first mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParameterId {
    Theta,
    Mu,
    Sigma,
    Omega,
    Beta,
    Kt,
    Mass,
    C(usize),
    Tau(usize),
}

impl fmt::Display for ParameterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParameterId::Theta => write!(f, "theta"),
            ParameterId::Mu => write!(f, "mu"),
            ParameterId::Sigma => write!(f, "sigma"),
            ParameterId::Omega => write!(f, "omega"),
            ParameterId::Beta => write!(f, "beta"),
            ParameterId::Kt => write!(f, "kt"),
            ParameterId::Mass => write!(f, "mass"),
            ParameterId::C(k) => write!(f, "c{}", k + 1),
            ParameterId::Tau(k) => write!(f, "tau{}", k + 1),
        }
    }
}

impl FromStr for ParameterId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let indexed = |prefix: &str| -> Option<usize> {
            s.strip_prefix(prefix)
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(|k| k - 1)
        };
        Ok(match s.as_str() {
            "theta" => ParameterId::Theta,
            "mu" => ParameterId::Mu,
            "sigma" => ParameterId::Sigma,
            "omega" => ParameterId::Omega,
            "beta" => ParameterId::Beta,
            "kt" => ParameterId::Kt,
            "mass" => ParameterId::Mass,
            _ => {
                if let Some(k) = indexed("tau") {
                    ParameterId::Tau(k)
                } else if let Some(k) = indexed("c") {
                    ParameterId::C(k)
                } else {
                    return Err(Error::param(
                        "parameter",
                        format!("unknown parameter `{s}`"),
                    ));
                }
            }
        })
    }
}

/// Any of the three models, with parameter access for finite differences.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Ou(OuParams),
    Langevin(LangevinParams),
    Gle(GleParams),
}

impl AnyModel {
    pub fn parameter(&self, id: ParameterId) -> Result<f64> {
        match self {
            AnyModel::Ou(p) => p.parameter(id),
            AnyModel::Langevin(p) => p.parameter(id),
            AnyModel::Gle(p) => p.parameter(id),
        }
    }

    /// Copy with `id` shifted by `delta`. Fails with [`Error::Inadmissible`]
    /// if the shifted value leaves the parameter's admissible set.
    pub fn perturbed(&self, id: ParameterId, delta: f64) -> Result<Self> {
        let value = self.parameter(id)? + delta;
        let inadmissible = |_| Error::Inadmissible {
            parameter: id.to_string(),
            value,
        };
        Ok(match self {
            AnyModel::Ou(p) => AnyModel::Ou(p.with_parameter(id, value).map_err(inadmissible)?),
            AnyModel::Langevin(p) => {
                AnyModel::Langevin(p.with_parameter(id, value).map_err(inadmissible)?)
            }
            AnyModel::Gle(p) => AnyModel::Gle(p.with_parameter(id, value).map_err(inadmissible)?),
        })
    }
}

impl Model for AnyModel {
    fn layout(&self) -> Layout {
        match self {
            AnyModel::Ou(p) => p.layout(),
            AnyModel::Langevin(p) => p.layout(),
            AnyModel::Gle(p) => p.layout(),
        }
    }

    fn n_streams(&self) -> usize {
        match self {
            AnyModel::Ou(p) => p.n_streams(),
            AnyModel::Langevin(p) => p.n_streams(),
            AnyModel::Gle(p) => p.n_streams(),
        }
    }

    fn initial_state(&self) -> Vec<f64> {
        match self {
            AnyModel::Ou(p) => p.initial_state(),
            AnyModel::Langevin(p) => p.initial_state(),
            AnyModel::Gle(p) => p.initial_state(),
        }
    }

    fn integrate(&self, grid: &TimeGrid, noise: &IncrementBlock) -> Result<Path> {
        match self {
            AnyModel::Ou(p) => p.integrate(grid, noise),
            AnyModel::Langevin(p) => p.integrate(grid, noise),
            AnyModel::Gle(p) => p.integrate(grid, noise),
        }
    }
}

fn check_noise(noise: &IncrementBlock, grid: &TimeGrid, streams: usize) -> Result<()> {
    if noise.n_steps < grid.n_steps || noise.n_streams < streams || noise.dt != grid.dt {
        return Err(Error::param(
            "noise",
            "increment block does not match the grid or stream count",
        ));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be > 0, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {v}")))
    }
}

fn unsupported(id: ParameterId, model: &str) -> Error {
    Error::Unsupported(format!(
        "parameter {id} does not belong to the {model} model"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing() {
        let g = TimeGrid::new(10.0, 0.01).unwrap();
        assert_eq!(g.n_steps, 1000);
        assert_eq!(g.index_of(10.0).unwrap(), 1000);
        assert_eq!(g.index_of(2.5).unwrap(), 250);
        assert!(g.index_of(10.5).is_err());
        assert!(g.index_of(0.005).is_err());
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        assert!(TimeGrid::new(1.0, -0.1).is_err());
    }

    #[test]
    fn parameter_names_round_trip() {
        for id in [
            ParameterId::Theta,
            ParameterId::Sigma,
            ParameterId::Beta,
            ParameterId::C(0),
            ParameterId::Tau(6),
            ParameterId::Kt,
        ] {
            assert_eq!(id.to_string().parse::<ParameterId>().unwrap(), id);
        }
        assert!("c0".parse::<ParameterId>().is_err());
        assert!("zeta".parse::<ParameterId>().is_err());
    }
}
