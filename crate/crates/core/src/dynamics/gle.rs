use super::{check_noise, finite, positive, unsupported, Layout, Model, Path, TimeGrid};
use crate::dynamics::ParameterId;
use crate::error::{Error, Result};
use crate::kernels::{PronyMode, PronySeries};
use crate::noise::IncrementBlock;

/// Confining potential `U(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// `U = omega^2 x^2 / 2`.
    Harmonic { omega: f64 },
    /// `U = (1 - x^2)^2`.
    DoubleWell,
}

impl Potential {
    /// `dU/dx`.
    #[inline]
    pub fn grad(&self, x: f64) -> f64 {
        match *self {
            Potential::Harmonic { omega } => omega * omega * x,
            Potential::DoubleWell => -4.0 * x * (1.0 - x * x),
        }
    }

    pub fn energy(&self, x: f64) -> f64 {
        match *self {
            Potential::Harmonic { omega } => 0.5 * omega * omega * x * x,
            Potential::DoubleWell => (1.0 - x * x).powi(2),
        }
    }
}

/// Extended-variable GLE with a positive Prony memory kernel:
///
/// ```text
/// m dV   = -U'(X) dt + sum_k S_k dt
/// dX     = V dt
/// dS_k   = -(S_k + c_k V) / tau_k dt + sqrt(2 kT c_k) / tau_k dW_k
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GleParams {
    pub mass: f64,
    pub potential: Potential,
    pub kt: f64,
    pub prony: PronySeries,
    pub x0: f64,
    pub v0: f64,
    pub s0: Vec<f64>,
}

impl GleParams {
    /// Definite `x0`, `v0` and `s_k(0) = 0`.
    pub fn new(
        mass: f64,
        potential: Potential,
        kt: f64,
        prony: PronySeries,
        x0: f64,
        v0: f64,
    ) -> Result<Self> {
        let s0 = vec![0.0; prony.len()];
        let p = Self {
            mass,
            potential,
            kt,
            prony,
            x0,
            v0,
            s0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        positive("kt", self.kt)?;
        finite("kt", self.kt)?;
        finite("x0", self.x0)?;
        finite("v0", self.v0)?;
        if let Potential::Harmonic { omega } = self.potential {
            if !(omega >= 0.0 && omega.is_finite()) {
                return Err(Error::param("omega", "must be finite and >= 0"));
            }
        }
        if self.prony.is_empty() {
            return Err(Error::param(
                "n_modes",
                "the GLE needs at least one Prony mode",
            ));
        }
        if self.s0.len() != self.prony.len() {
            return Err(Error::param("s0", "length must equal the number of modes"));
        }
        Ok(())
    }

    /// Same model with zero-amplitude modes appended up to `n` modes.
    pub fn padded_to(&self, n: usize) -> Self {
        let prony = self.prony.padded_to(n);
        let mut s0 = self.s0.clone();
        s0.resize(prony.len(), 0.0);
        Self {
            prony,
            s0,
            ..self.clone()
        }
    }

    pub fn with_prony(&self, prony: PronySeries) -> Result<Self> {
        let p = Self {
            s0: vec![0.0; prony.len()],
            prony,
            ..self.clone()
        };
        p.validate()?;
        Ok(p)
    }

    fn mode(&self, k: usize) -> Result<PronyMode> {
        self.prony.modes().get(k).copied().ok_or_else(|| {
            Error::param(
                format!("mode {}", k + 1),
                format!("model has only {} modes", self.prony.len()),
            )
        })
    }

    pub(super) fn parameter(&self, id: ParameterId) -> Result<f64> {
        match id {
            ParameterId::Kt => Ok(self.kt),
            ParameterId::Mass => Ok(self.mass),
            ParameterId::Omega => match self.potential {
                Potential::Harmonic { omega } => Ok(omega),
                Potential::DoubleWell => Err(Error::Unsupported(
                    "the double-well potential has no omega".into(),
                )),
            },
            ParameterId::C(k) => Ok(self.mode(k)?.c),
            ParameterId::Tau(k) => Ok(self.mode(k)?.tau),
            _ => Err(unsupported(id, "GLE")),
        }
    }

    pub(super) fn with_parameter(&self, id: ParameterId, value: f64) -> Result<Self> {
        let mut p = self.clone();
        match id {
            ParameterId::Kt => p.kt = value,
            ParameterId::Mass => p.mass = value,
            ParameterId::Omega => p.potential = Potential::Harmonic { omega: value },
            ParameterId::C(k) => {
                let m = self.mode(k)?;
                p.prony = self.prony.with_mode(k, PronyMode { c: value, ..m })?;
            }
            ParameterId::Tau(k) => {
                let m = self.mode(k)?;
                p.prony = self.prony.with_mode(k, PronyMode { tau: value, ..m })?;
            }
            _ => return Err(unsupported(id, "GLE")),
        }
        self.parameter(id)?;
        p.validate()?;
        Ok(p)
    }
}

impl Model for GleParams {
    fn layout(&self) -> Layout {
        let mut labels = vec!["x".to_string(), "v".to_string()];
        labels.extend((1..=self.prony.len()).map(|k| format!("s{k}")));
        Layout {
            labels,
            position: Some(0),
            velocity: Some(1),
        }
    }

    fn n_streams(&self) -> usize {
        self.prony.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut s = vec![self.x0, self.v0];
        s.extend(&self.s0);
        s
    }

    /// Strang splitting `B(dt/2) A(dt/2) O(dt) A(dt/2) B(dt/2)`. The kick uses
    /// `-U'(x) + sum_k s_k`; the O-step advances each `s_k` by its exact
    /// conditional OU law with `v` frozen, so stiff small-`tau_k` modes stay
    /// stable.
    fn integrate(&self, grid: &TimeGrid, noise: &IncrementBlock) -> Result<Path> {
        self.validate()?;
        let n = self.prony.len();
        check_noise(noise, grid, n)?;
        let dt = grid.dt;
        let half = 0.5 * dt;
        let inv_mass = 1.0 / self.mass;
        let sqrt_dt = dt.sqrt();

        let c: Vec<f64> = self.prony.modes().iter().map(|m| m.c).collect();
        let decay: Vec<f64> = self
            .prony
            .modes()
            .iter()
            .map(|m| (-dt / m.tau).exp())
            .collect();
        let amp: Vec<f64> = self
            .prony
            .modes()
            .iter()
            .zip(&decay)
            .map(|(m, a)| (self.kt * m.c / m.tau * (1.0 - a * a)).sqrt() / sqrt_dt)
            .collect();

        let dim = n + 2;
        let mut state = self.initial_state();
        let mut data = Vec::with_capacity(dim * (grid.n_steps + 1));
        data.extend_from_slice(&state);
        let (xv, s) = state.split_at_mut(2);
        let (mut x, mut v) = (xv[0], xv[1]);
        for step in 0..grid.n_steps {
            let dw = noise.row(step);
            let force = -self.potential.grad(x) + s.iter().sum::<f64>();
            v += half * force * inv_mass;
            x += half * v;
            for k in 0..n {
                let cv = c[k] * v;
                s[k] = -cv + (s[k] + cv) * decay[k] + amp[k] * dw[k];
            }
            x += half * v;
            let force = -self.potential.grad(x) + s.iter().sum::<f64>();
            v += half * force * inv_mass;
            data.push(x);
            data.push(v);
            data.extend_from_slice(s);
        }
        Ok(Path { dim, data })
    }
}
