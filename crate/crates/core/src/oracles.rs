//! Closed-form covariances for OU and harmonic Langevin dynamics driven from
//! a deterministic initial state.
//!
//! Two systems with parameters `(theta1, sigma1)` and `(theta2, sigma2)`
//! share a Wiener path; all covariances below are between their outputs.
//! Expansions of `Var[D]` assume the central pairing `theta + e` against
//! `theta - e`.

use num_complex::Complex64;

use crate::error::{Error, Result};

fn expm1_ratio(x: f64, t: f64) -> f64 {
    // (1 - e^{-x t}) / x, continuous at x = 0
    if x == 0.0 {
        t
    } else {
        -(-x * t).exp_m1() / x
    }
}

fn check_rates(theta1: f64, theta2: f64) -> Result<()> {
    if !(theta1 > 0.0 && theta2 > 0.0) {
        return Err(Error::param("theta", "rates must be > 0"));
    }
    Ok(())
}

/// `Cov[X1_T, X2_T] = sigma1 sigma2 (1 - e^{-(theta1 + theta2) T}) / (theta1 + theta2)`.
pub fn ou_cov_final(sigma1: f64, sigma2: f64, theta1: f64, theta2: f64, t: f64) -> f64 {
    sigma1 * sigma2 * expm1_ratio(theta1 + theta2, t)
}

/// `Var[X_T]` of a single OU process.
pub fn ou_var_final(sigma: f64, theta: f64, t: f64) -> f64 {
    ou_cov_final(sigma, sigma, theta, theta, t)
}

/// Covariance of time averages `(1/T) int_0^T X dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAverageCov {
    /// Full closed form.
    pub exact: f64,
    /// Leading `1/T` term; the omitted remainder is `O(T^-2)`.
    pub leading: f64,
}

impl TimeAverageCov {
    pub fn truncation_error(&self) -> f64 {
        self.leading - self.exact
    }
}

pub fn ou_cov_timeavg(
    sigma1: f64,
    sigma2: f64,
    theta1: f64,
    theta2: f64,
    t: f64,
) -> Result<TimeAverageCov> {
    check_rates(theta1, theta2)?;
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let (a, b) = (theta1, theta2);
    let s = a + b;
    let e = |x: f64| expm1_ratio(x, t);
    // region t < u contributes r1, its mirror r2
    let r1 = ((t - e(b)) / b - (e(b) - e(s)) / a) / s;
    let r2 = ((t - e(a)) / a - (e(a) - e(s)) / b) / s;
    let scale = sigma1 * sigma2;
    Ok(TimeAverageCov {
        exact: scale * (r1 + r2) / (t * t),
        leading: scale / t * (1.0 / (a * b + b * b) + 1.0 / (a * a + a * b)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OuParameter {
    Theta,
    Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OuRegime {
    /// `X_T`.
    Final,
    /// `(1/T) int_0^T X dt`.
    TimeAverage,
}

/// Leading-order value of `Var[D]` with a description of what was dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expansion {
    pub value: f64,
    /// Human-readable order of the omitted remainder.
    pub remainder: &'static str,
    /// False when only the scaling is known and `value` carries a unit
    /// constant.
    pub constant_known: bool,
}

/// Asymptotic `Var[D]` for OU finite differences in `parameter`.
pub fn ou_vardiff_expansion(
    parameter: OuParameter,
    regime: OuRegime,
    coupled: bool,
    theta: f64,
    sigma: f64,
    epsilon: f64,
    t: f64,
) -> Result<Expansion> {
    check_rates(theta, theta)?;
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let (s2, e2) = (sigma * sigma, epsilon * epsilon);
    let exp = |k: f64| (-k * t * theta).exp();
    let out = match (parameter, regime, coupled) {
        (OuParameter::Theta, OuRegime::TimeAverage, true) => Expansion {
            value: 4.0 * e2 * s2 / (t * theta.powi(4)),
            remainder: "eps^2 O(T^-2) + O(eps^4)",
            constant_known: true,
        },
        (OuParameter::Theta, OuRegime::TimeAverage, false) => Expansion {
            value: 2.0 * s2 / (t * theta * theta) - 3.0 * s2 / (t * t * theta.powi(3))
                + 4.0 * s2 * exp(1.0) / (t * t * theta.powi(3))
                - s2 * exp(2.0) / (t * t * theta.powi(3)),
            remainder: "O(eps)",
            constant_known: true,
        },
        (OuParameter::Theta, OuRegime::Final, false) => Expansion {
            value: s2 / theta * (1.0 - exp(2.0)),
            remainder: "O(eps)",
            constant_known: true,
        },
        (OuParameter::Sigma, OuRegime::TimeAverage, false) => Expansion {
            value: (2.0 * s2 + 2.0 * e2) / (t * theta * theta),
            remainder: "O(T^-2)",
            constant_known: true,
        },
        (OuParameter::Sigma, OuRegime::TimeAverage, true) => Expansion {
            value: e2 / (t * theta * theta),
            remainder: "eps^2 O(T^-2)",
            constant_known: false,
        },
        _ => {
            return Err(Error::Unsupported(format!(
                "no expansion for {parameter:?}/{regime:?}/coupled={coupled}"
            )))
        }
    };
    Ok(out)
}

/// Exact `Var[D]` for two OU systems, coupled or independent.
pub fn ou_vardiff_exact(
    (theta1, sigma1): (f64, f64),
    (theta2, sigma2): (f64, f64),
    regime: OuRegime,
    coupled: bool,
    t: f64,
) -> Result<f64> {
    check_rates(theta1, theta2)?;
    let cov = |s1: f64, s2: f64, a: f64, b: f64| -> Result<f64> {
        match regime {
            OuRegime::Final => Ok(ou_cov_final(s1, s2, a, b, t)),
            OuRegime::TimeAverage => Ok(ou_cov_timeavg(s1, s2, a, b, t)?.exact),
        }
    };
    let v1 = cov(sigma1, sigma1, theta1, theta1)?;
    let v2 = cov(sigma2, sigma2, theta2, theta2)?;
    let c = if coupled {
        cov(sigma1, sigma2, theta1, theta2)?
    } else {
        0.0
    };
    Ok(v1 + v2 - 2.0 * c)
}

/// Roots of `mu^2 - beta mu + omega^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinEigen {
    pub mu1: Complex64,
    pub mu2: Complex64,
}

pub fn langevin_eigen(beta: f64, omega: f64) -> Result<LangevinEigen> {
    if !(beta > 0.0 && omega > 0.0 && beta.is_finite() && omega.is_finite()) {
        return Err(Error::param("beta/omega", "must be finite and > 0"));
    }
    if (beta - 2.0 * omega).abs() < 1e-12 {
        return Err(Error::CriticallyDamped { beta, omega });
    }
    let half = Complex64::new(0.5 * beta, 0.0);
    let root = Complex64::new(0.25 * beta * beta - omega * omega, 0.0).sqrt();
    Ok(LangevinEigen {
        mu1: half + root,
        mu2: half - root,
    })
}

/// `Cov[X_T, X~_T]` for two harmonic Langevin systems sharing a Wiener path,
/// each with noise amplitude `sqrt(2 beta kT)`.
pub fn langevin_phi(a: &LangevinEigen, b: &LangevinEigen, kt: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let gamma = 2.0 * kt;
    let term = |s: Complex64| -> Result<Complex64> {
        if s.norm() < 1e-300 {
            return Err(Error::Degenerate("eigenvalue sum vanishes".into()));
        }
        Ok((Complex64::new(1.0, 0.0) - (-s * t).exp()) / s)
    };
    let bracket =
        term(a.mu1 + b.mu1)? - term(a.mu1 + b.mu2)? - term(a.mu2 + b.mu1)? + term(a.mu2 + b.mu2)?;
    let prefactor =
        gamma * ((a.mu1 + a.mu2) * (b.mu1 + b.mu2)).sqrt() / ((a.mu1 - a.mu2) * (b.mu1 - b.mu2));
    let phi = prefactor * bracket;
    if phi.im.abs() >= 1e-10 * phi.re.abs() {
        return Err(Error::ComplexResidue {
            re: phi.re,
            im: phi.im,
        });
    }
    Ok(phi.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;

    /// Composite 5-point Gauss-Legendre on `[lo, hi]`.
    fn gauss(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        const X: [f64; 5] = [
            0.0,
            0.538_469_310_105_683_1,
            -0.538_469_310_105_683_1,
            0.906_179_845_938_664,
            -0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
            0.236_926_885_056_189_08,
        ];
        let h = (hi - lo) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                total += w * f(mid + 0.5 * h * x);
            }
        }
        0.5 * h * total
    }

    /// Brute-force `(1/T^2) int int sigma1 sigma2 e^{-a t - b u} int_0^{t^u} e^{(a+b) r} dr`.
    fn timeavg_quadrature(s1: f64, s2: f64, a: f64, b: f64, t: f64) -> f64 {
        let kernel = |x: f64, y: f64| {
            let m = x.min(y);
            let inner = gauss(|r| ((a + b) * r).exp(), 0.0, m, 8);
            s1 * s2 * (-a * x - b * y).exp() * inner
        };
        // split along the diagonal so each piece is smooth
        let lower = gauss(|x| gauss(|y| kernel(x, y), 0.0, x, 16), 0.0, t, 32);
        let upper = gauss(|x| gauss(|y| kernel(x, y), x, t, 16), 0.0, t, 32);
        (lower + upper) / (t * t)
    }

    #[test]
    fn final_covariance_values() {
        let v = ou_cov_final(0.3, 0.3, 1.0, 1.0, 10.0);
        assert!((v - 0.045 * (1.0 - (-20.0f64).exp())).abs() < 1e-15);
        assert_eq!(ou_cov_final(0.3, 0.5, 1.0, 2.0, 0.0), 0.0);
        assert!((ou_var_final(0.3, 1.0, 10.0) - 0.045).abs() < 1e-9);
        let q = gauss(
            |s| 0.3 * 0.5 * (-(1.0 + 2.5) * (4.0 - s)).exp(),
            0.0,
            4.0,
            64,
        );
        assert!((ou_cov_final(0.3, 0.5, 1.0, 2.5, 4.0) / q - 1.0).abs() < 1e-8);
    }

    #[test]
    fn timeavg_matches_quadrature() {
        for &(s1, s2, a, b, t) in &[
            (0.3, 0.3, 1.0, 1.0, 10.0),
            (0.3, 0.7, 1.01, 0.99, 10.0),
            (1.0, 2.0, 0.5, 3.0, 2.0),
            (0.4, 0.4, 2.0, 0.3, 5.0),
        ] {
            let exact = ou_cov_timeavg(s1, s2, a, b, t).unwrap().exact;
            let quad = timeavg_quadrature(s1, s2, a, b, t);
            assert!((exact / quad - 1.0).abs() < 1e-8, "{exact} vs {quad}");
        }
    }

    #[test]
    fn timeavg_leading_and_bilinearity() {
        let c = ou_cov_timeavg(0.3, 0.3, 1.0, 1.0, 10.0).unwrap();
        assert!((c.leading - 0.009).abs() < 1e-15);
        assert!((c.exact - 0.00765).abs() < 1e-5);
        assert!(c.truncation_error() > 0.0);
        let d = ou_cov_timeavg(0.6, 0.3, 1.0, 1.0, 10.0).unwrap();
        assert!((d.exact - 2.0 * c.exact).abs() < 1e-15);
        assert!((d.leading - 2.0 * c.leading).abs() < 1e-15);
    }

    #[test]
    fn expansion_values() {
        let e = ou_vardiff_expansion(
            OuParameter::Theta,
            OuRegime::TimeAverage,
            true,
            1.0,
            0.3,
            1e-2,
            10.0,
        )
        .unwrap();
        assert!((e.value - 3.6e-6).abs() < 1e-18);
        let z = ou_vardiff_expansion(
            OuParameter::Theta,
            OuRegime::TimeAverage,
            true,
            1.0,
            0.3,
            0.0,
            10.0,
        )
        .unwrap();
        assert_eq!(z.value, 0.0);
        let c = ou_vardiff_expansion(
            OuParameter::Sigma,
            OuRegime::TimeAverage,
            true,
            1.0,
            0.3,
            1e-2,
            10.0,
        )
        .unwrap();
        assert!(!c.constant_known);
        assert!(ou_vardiff_expansion(
            OuParameter::Sigma,
            OuRegime::Final,
            true,
            1.0,
            0.3,
            1e-2,
            10.0
        )
        .is_err());
    }

    #[test]
    fn independent_theta_expansion_is_twice_the_variance() {
        let e = ou_vardiff_expansion(
            OuParameter::Theta,
            OuRegime::TimeAverage,
            false,
            1.0,
            0.3,
            1e-2,
            10.0,
        )
        .unwrap();
        let var = ou_cov_timeavg(0.3, 0.3, 1.0, 1.0, 10.0).unwrap().exact;
        assert!((e.value - 2.0 * var).abs() < 1e-15);
        let exact =
            ou_vardiff_exact((1.01, 0.3), (0.99, 0.3), OuRegime::TimeAverage, false, 10.0).unwrap();
        assert!((exact / e.value - 1.0).abs() < 1e-3);
    }

    #[test]
    fn coupled_expansions_track_exact_differences() {
        let t = 200.0;
        let eps = 1e-3;
        let exact = ou_vardiff_exact(
            (1.0 + eps, 0.3),
            (1.0 - eps, 0.3),
            OuRegime::TimeAverage,
            true,
            t,
        )
        .unwrap();
        let lead = ou_vardiff_expansion(
            OuParameter::Theta,
            OuRegime::TimeAverage,
            true,
            1.0,
            0.3,
            eps,
            t,
        )
        .unwrap();
        assert!(
            (exact / lead.value - 1.0).abs() < 0.02,
            "{exact} {}",
            lead.value
        );
        let exact_final =
            ou_vardiff_exact((1.0, 0.3), (1.0, 0.3), OuRegime::Final, false, 5.0).unwrap();
        let lead_final = ou_vardiff_expansion(
            OuParameter::Theta,
            OuRegime::Final,
            false,
            1.0,
            0.3,
            0.0,
            5.0,
        )
        .unwrap();
        assert!((exact_final - lead_final.value).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues() {
        let e = langevin_eigen(3.0, 2f64.sqrt()).unwrap();
        assert!((e.mu1 - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!((e.mu2 - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let u = langevin_eigen(1.0, 1.0).unwrap();
        assert!((u.mu1 - Complex64::new(0.5, 0.75f64.sqrt())).norm() < 1e-14);
        assert!((u.mu2 - Complex64::new(0.5, -(0.75f64.sqrt()))).norm() < 1e-14);
        assert!(matches!(
            langevin_eigen(2.0, 1.0),
            Err(Error::CriticallyDamped { .. })
        ));
        for (beta, omega) in [(0.3, 2.0), (5.0, 0.1), (1.0, 1.0)] {
            let e = langevin_eigen(beta, omega).unwrap();
            assert!(((e.mu1 + e.mu2).re / beta - 1.0).abs() < 1e-12);
            assert!(((e.mu1 * e.mu2).re / (omega * omega) - 1.0).abs() < 1e-12);
            assert!(e.mu1.re > 0.0 && e.mu2.re > 0.0);
        }
    }

    #[test]
    fn phi_long_time_limit_is_gibbs_variance() {
        let e = langevin_eigen(3.0, 2f64.sqrt()).unwrap();
        let phi = langevin_phi(&e, &e, 0.5, 200.0).unwrap();
        assert!((phi - 0.25).abs() < 1e-12);
    }

    #[test]
    fn phi_symmetric_in_its_arguments() {
        let a = langevin_eigen(3.1, 2f64.sqrt()).unwrap();
        let b = langevin_eigen(2.9, 2f64.sqrt()).unwrap();
        let ab = langevin_phi(&a, &b, 0.5, 5.0).unwrap();
        let ba = langevin_phi(&b, &a, 0.5, 5.0).unwrap();
        assert!((ab - ba).abs() < 1e-14 * ab.abs());
    }

    #[test]
    fn phi_matches_impulse_response_quadrature() {
        // Cov = 2 kT sqrt(beta1 beta2) int_0^T g1(s) g2(s) ds, g = [e^{Bs}]_{xv}
        let g = |beta: f64, omega: f64, s: f64| {
            let b = Matrix2::new(0.0, 1.0, -omega * omega, -beta);
            (b * s).exp()[(0, 1)]
        };
        for &(b1, b2, omega, kt, t) in &[
            (3.1f64, 2.9f64, 2f64.sqrt(), 0.5, 5.0),
            (1.0, 1.1, 1.0, 0.5, 10.0),
            (0.5, 4.0, 1.3, 1.0, 3.0),
        ] {
            let quad = 2.0
                * kt
                * (b1 * b2).sqrt()
                * gauss(|s| g(b1, omega, s) * g(b2, omega, s), 0.0, t, 200);
            let phi = langevin_phi(
                &langevin_eigen(b1, omega).unwrap(),
                &langevin_eigen(b2, omega).unwrap(),
                kt,
                t,
            )
            .unwrap();
            assert!((phi / quad - 1.0).abs() < 1e-8, "{phi} vs {quad}");
        }
    }
}
