//! Reproducible Wiener increments and the couplings between nominal and
//! perturbed systems.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is the tuple
//! `(master_seed, sample_index, stream_index, tag)`. No generator state is
//! shared between samples, so any scheduling of samples over worker threads
//! reproduces the same increments bit for bit.
//!
//! Gaussian variates use the ziggurat sampler of `rand_distr::StandardNormal`.
//! Changing it changes every golden seed.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Which side of a finite difference a trajectory belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum System {
    Nominal,
    Perturbed,
}

impl System {
    fn tag(self) -> u64 {
        match self {
            System::Nominal => 0,
            System::Perturbed => 1,
        }
    }
}

/// How the nominal and perturbed systems draw their driving noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// Each system reads its own streams.
    Independent,
    /// Both systems read the same streams.
    CommonPath,
    /// Both systems read `sin(eta) dW1 + cos(eta) dW2` for two independent
    /// streams `dW1`, `dW2`. Equal in law to [`Coupling::CommonPath`].
    Eta(f64),
}

impl Coupling {
    pub fn is_coupled(&self) -> bool {
        !matches!(self, Coupling::Independent)
    }

    pub fn validate(&self) -> Result<()> {
        if let Coupling::Eta(eta) = *self {
            if !(0.0..=TAU).contains(&eta) {
                return Err(Error::param("eta", format!("{eta} is outside [0, 2pi]")));
            }
        }
        Ok(())
    }
}

/// Identifies a single Wiener stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub sample_index: u64,
    pub stream_index: u64,
    pub tag: u64,
}

/// Tag component used by the Eta construction's first stream.
pub const ETA_FIRST: u64 = 1 << 8;
/// Tag component used by the Eta construction's second stream.
pub const ETA_SECOND: u64 = 2 << 8;

impl StreamKey {
    fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        for (chunk, word) in seed.chunks_exact_mut(8).zip([
            self.master_seed,
            self.sample_index,
            self.stream_index,
            self.tag,
        ]) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }

    /// `n` unit normal variates from this stream.
    pub fn unit_normals(&self, n: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// Seed plus coupling strategy. `n_streams` is the number of independent
/// Wiener components the model needs (one per Prony mode for the GLE, one for
/// OU and Langevin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePlan {
    pub master_seed: u64,
    pub coupling: Coupling,
    pub n_streams: usize,
}

impl NoisePlan {
    pub fn new(master_seed: u64, coupling: Coupling, n_streams: usize) -> Result<Self> {
        coupling.validate()?;
        if n_streams == 0 {
            return Err(Error::NoStreams);
        }
        Ok(Self {
            master_seed,
            coupling,
            n_streams,
        })
    }

    pub fn with_streams(self, n_streams: usize) -> Self {
        Self { n_streams, ..self }
    }

    pub fn with_seed(self, master_seed: u64) -> Self {
        Self {
            master_seed,
            ..self
        }
    }

    pub fn with_coupling(self, coupling: Coupling) -> Self {
        Self { coupling, ..self }
    }

    fn key(&self, sample_index: usize, stream_index: usize, tag: u64) -> StreamKey {
        StreamKey {
            master_seed: self.master_seed,
            sample_index: sample_index as u64,
            stream_index: stream_index as u64,
            tag,
        }
    }
}

/// Gaussian increments for one sample, laid out step-major
/// (`values[step * n_streams + stream]`), each with variance `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementBlock {
    pub dt: f64,
    pub n_steps: usize,
    pub n_streams: usize,
    pub values: Vec<f64>,
}

impl IncrementBlock {
    #[inline]
    pub fn row(&self, step: usize) -> &[f64] {
        &self.values[step * self.n_streams..(step + 1) * self.n_streams]
    }

    pub fn get(&self, step: usize, stream: usize) -> f64 {
        self.values[step * self.n_streams + stream]
    }

    pub fn stream(&self, stream: usize) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .skip(stream)
            .step_by(self.n_streams)
            .copied()
    }
}

// sin/cos of multiples of pi/2 leave ~1e-16 residues; snapping them keeps
// Eta(0) and Eta(pi/2) exactly equal to a single stream.
fn snapped(w: f64) -> f64 {
    if w.abs() < 4.0 * f64::EPSILON {
        0.0
    } else {
        w
    }
}

/// Wiener increments for `sample_index` as seen by `system` under `plan`.
pub fn increments(
    plan: &NoisePlan,
    sample_index: usize,
    system: System,
    n_steps: usize,
    dt: f64,
) -> Result<IncrementBlock> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidTimeStep(dt));
    }
    if plan.n_streams == 0 {
        return Err(Error::NoStreams);
    }
    if n_steps == 0 {
        return Err(Error::param("n_steps", "at least one step is required"));
    }
    plan.coupling.validate()?;

    let sqrt_dt = dt.sqrt();
    let n_streams = plan.n_streams;
    let mut values = vec![0.0; n_steps * n_streams];
    for stream in 0..n_streams {
        let column: Vec<f64> = match plan.coupling {
            Coupling::Independent => plan
                .key(sample_index, stream, system.tag())
                .unit_normals(n_steps),
            Coupling::CommonPath => plan
                .key(sample_index, stream, System::Nominal.tag())
                .unit_normals(n_steps),
            Coupling::Eta(eta) => {
                let (a, b) = (snapped(eta.sin()), snapped(eta.cos()));
                let w1 = plan
                    .key(sample_index, stream, System::Nominal.tag() | ETA_FIRST)
                    .unit_normals(n_steps);
                let w2 = plan
                    .key(sample_index, stream, System::Nominal.tag() | ETA_SECOND)
                    .unit_normals(n_steps);
                w1.iter().zip(&w2).map(|(x, y)| a * x + b * y).collect()
            }
        };
        for (step, xi) in column.into_iter().enumerate() {
            values[step * n_streams + stream] = xi * sqrt_dt;
        }
    }
    Ok(IncrementBlock {
        dt,
        n_steps,
        n_streams,
        values,
    })
}
