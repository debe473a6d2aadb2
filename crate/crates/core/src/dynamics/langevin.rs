use super::{check_noise, finite, positive, unsupported, Layout, Model, Path, TimeGrid};
use crate::dynamics::ParameterId;
use crate::error::{Error, Result};
use crate::noise::IncrementBlock;

/// Harmonic Langevin dynamics
/// `dX = V dt`, `m dV = -omega^2 X dt - beta m V dt + sqrt(2 beta m kT) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinParams {
    pub omega: f64,
    pub beta: f64,
    pub kt: f64,
    pub mass: f64,
    pub x0: f64,
    pub v0: f64,
}

impl LangevinParams {
    pub fn new(omega: f64, beta: f64, kt: f64, x0: f64, v0: f64) -> Result<Self> {
        let p = Self {
            omega,
            beta,
            kt,
            mass: 1.0,
            x0,
            v0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::param("omega", "must be finite and >= 0"));
        }
        positive("beta", self.beta)?;
        positive("kt", self.kt)?;
        positive("mass", self.mass)?;
        for (name, v) in [
            ("beta", self.beta),
            ("kt", self.kt),
            ("x0", self.x0),
            ("v0", self.v0),
        ] {
            finite(name, v)?;
        }
        Ok(())
    }

    pub(super) fn parameter(&self, id: ParameterId) -> Result<f64> {
        match id {
            ParameterId::Omega => Ok(self.omega),
            ParameterId::Beta => Ok(self.beta),
            ParameterId::Kt => Ok(self.kt),
            _ => Err(unsupported(id, "Langevin")),
        }
    }

    pub(super) fn with_parameter(&self, id: ParameterId, value: f64) -> Result<Self> {
        let mut p = *self;
        match id {
            ParameterId::Omega => p.omega = value,
            ParameterId::Beta => p.beta = value,
            ParameterId::Kt => p.kt = value,
            _ => return Err(unsupported(id, "Langevin")),
        }
        p.validate()?;
        Ok(p)
    }
}

impl Model for LangevinParams {
    fn layout(&self) -> Layout {
        Layout {
            labels: vec!["x".into(), "v".into()],
            position: Some(0),
            velocity: Some(1),
        }
    }

    fn n_streams(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.x0, self.v0]
    }

    /// BAOAB: half kick, half drift, exact OU velocity update, half drift,
    /// half kick.
    fn integrate(&self, grid: &TimeGrid, noise: &IncrementBlock) -> Result<Path> {
        self.validate()?;
        check_noise(noise, grid, 1)?;
        let dt = grid.dt;
        let half = 0.5 * dt;
        let w2 = self.omega * self.omega / self.mass;
        let decay = (-self.beta * dt).exp();
        let amp = (self.kt / self.mass * (1.0 - (-2.0 * self.beta * dt).exp())).sqrt() / dt.sqrt();

        let (mut x, mut v) = (self.x0, self.v0);
        let mut data = Vec::with_capacity(2 * (grid.n_steps + 1));
        data.extend([x, v]);
        for step in 0..grid.n_steps {
            v -= half * w2 * x;
            x += half * v;
            v = decay * v + amp * noise.row(step)[0];
            x += half * v;
            v -= half * w2 * x;
            data.extend([x, v]);
        }
        Ok(Path { dim: 2, data })
    }
}
