//! Coupled finite-difference sensitivity analysis for stochastic particle dynamics.
//!
//! The crate simulates Ornstein–Uhlenbeck, Langevin and extended-variable
//! generalized Langevin (GLE) dynamics with reproducible, counter-keyed
//! Wiener increments, and builds finite-difference sensitivity estimators on
//! top of pairs of trajectories that share (or deliberately do not share)
//! their driving noise.
//!
//! Module map:
//!
//! * [`noise`]: Wiener increments keyed by `(seed, sample, stream, system)` and
//!   the coupling strategies tying nominal and perturbed systems together.
//! * [`kernels`]: power-law memory kernels, positive Prony series and the NNLS
//!   fitting procedure.
//! * [`dynamics`]: exact AR(1), BAOAB and the extended-variable GLE splitting.
//! * [`observables`]: normalized VACF/PACF, time averages, FFT autocorrelation.
//! * [`estimators`]: finite-difference sensitivities, variance-of-difference
//!   sweeps with log-log slope fits, and the mode-count sensitivity `S*`.
//! * [`oracles`]: closed-form covariances used as ground truth.

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod io;
pub mod kernels;
pub mod noise;
pub mod observables;
pub mod oracles;
pub mod stats;

pub use dynamics::{
    AnyModel, GleParams, LangevinParams, Model, OuParams, ParameterId, Potential, TimeGrid,
    TrajectoryEnsemble,
};
pub use error::{Error, Result};
pub use estimators::{
    DiffStatistic, DifferencePair, ModeCountOptions, ModeCountResult, SeedPolicy,
    SensitivityEstimate, Stencil, VarianceEstimate, VarianceSweep,
};
pub use kernels::{FitOptions, FitReport, Kernel, PowerLawKernel, PronyMode, PronySeries};
pub use noise::{Coupling, IncrementBlock, NoisePlan, System};
pub use observables::{Observable, Series};
pub use oracles::{LangevinEigen, OuParameter, OuRegime};
