use super::{check_noise, finite, positive, unsupported, Layout, Model, Path, TimeGrid};
use crate::dynamics::ParameterId;
use crate::error::{Error, Result};
use crate::noise::IncrementBlock;

/// `dX = theta (mu - X) dt + sigma dW`, `X_0 = x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl OuParams {
    pub fn new(theta: f64, mu: f64, sigma: f64, x0: f64) -> Result<Self> {
        let p = Self {
            theta,
            mu,
            sigma,
            x0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("theta", self.theta)?;
        finite("theta", self.theta)?;
        finite("mu", self.mu)?;
        finite("x0", self.x0)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Exact mean `x0 e^{-theta t} + mu (1 - e^{-theta t})`.
    pub fn mean(&self, t: f64) -> f64 {
        let d = (-self.theta * t).exp();
        self.x0 * d + self.mu * (1.0 - d)
    }

    pub(super) fn parameter(&self, id: ParameterId) -> Result<f64> {
        match id {
            ParameterId::Theta => Ok(self.theta),
            ParameterId::Mu => Ok(self.mu),
            ParameterId::Sigma => Ok(self.sigma),
            _ => Err(unsupported(id, "OU")),
        }
    }

    pub(super) fn with_parameter(&self, id: ParameterId, value: f64) -> Result<Self> {
        let mut p = *self;
        match id {
            ParameterId::Theta => p.theta = value,
            ParameterId::Mu => p.mu = value,
            ParameterId::Sigma => p.sigma = value,
            _ => return Err(unsupported(id, "OU")),
        }
        p.validate()?;
        Ok(p)
    }
}

impl Model for OuParams {
    fn layout(&self) -> Layout {
        Layout {
            labels: vec!["x".into()],
            position: Some(0),
            velocity: None,
        }
    }

    fn n_streams(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.x0]
    }

    /// Exact AR(1) update on the grid; the marginal law is exact for any `dt`.
    fn integrate(&self, grid: &TimeGrid, noise: &IncrementBlock) -> Result<Path> {
        self.validate()?;
        check_noise(noise, grid, 1)?;
        let dt = grid.dt;
        let decay = (-self.theta * dt).exp();
        let amp = self.sigma * ((1.0 - (-2.0 * self.theta * dt).exp()) / (2.0 * self.theta)).sqrt()
            / dt.sqrt();
        let mut data = Vec::with_capacity(grid.n_steps + 1);
        let mut x = self.x0;
        data.push(x);
        for step in 0..grid.n_steps {
            x = self.mu + (x - self.mu) * decay + amp * noise.row(step)[0];
            data.push(x);
        }
        Ok(Path { dim: 1, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, simulate_path};
    use crate::noise::{Coupling, NoisePlan, System};
    use crate::stats;

    #[test]
    fn deterministic_decay_halves() {
        let p = OuParams::new(1.0, 0.0, 0.0, 2.0).unwrap();
        let grid = TimeGrid {
            dt: 2f64.ln(),
            n_steps: 1,
        };
        let plan = NoisePlan::new(0, Coupling::CommonPath, 1).unwrap();
        let path = simulate_path(&p, &plan, System::Nominal, 0, &grid).unwrap();
        assert!((path.data[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn terminal_variance_matches_closed_form() {
        let p = OuParams::new(1.0, 1.2, 0.3, 2.0).unwrap();
        let grid = TimeGrid::new(10.0, 0.05).unwrap();
        let plan = NoisePlan::new(2024, Coupling::Independent, 1).unwrap();
        let m = 10_000;
        let ens = simulate(&p, &plan, System::Nominal, m, &grid).unwrap();
        let finals: Vec<f64> = (0..m).map(|i| ens.value(i, grid.n_steps, 0)).collect();
        let var = stats::variance(&finals);
        let expect = 0.045 * (1.0 - (-20.0f64).exp());
        // standard error of a Gaussian sample variance
        let se = expect * (2.0 / (m as f64 - 1.0)).sqrt();
        assert!((var - expect).abs() < 3.0 * se, "var {var} vs {expect}");
        let mean = stats::mean(&finals);
        assert!((mean - p.mean(10.0)).abs() < 3.0 * (expect / m as f64).sqrt());
    }

    #[test]
    fn zero_perturbation_is_bit_identical() {
        let p = OuParams::new(1.0, 1.2, 0.3, 2.0).unwrap();
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        let plan = NoisePlan::new(5, Coupling::CommonPath, 1).unwrap();
        let a = simulate(&p, &plan, System::Nominal, 4, &grid).unwrap();
        let b = simulate(&p, &plan, System::Perturbed, 4, &grid).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn rejects_nonpositive_theta() {
        assert!(OuParams::new(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(OuParams::new(1.0, 0.0, -1.0, 0.0).is_err());
    }
}
