//! Experiment configuration files.
//!
//! A config is sectioned key-value text in TOML syntax:
//!
//! ```toml
//! [experiment]
//! kind = "var-sweep"          # prony-fit | simulate | sensitivity | var-sweep | mode-sens | oracle-check
//! description = "one line shown by `glesens list`"
//!
//! [model]
//! type = "gle"                # ou | langevin | gle
//! potential = "harmonic"      # gle only: harmonic | double-well
//! omega = 1.0
//! kt = 1.0
//! x0 = 0.0
//! v0 = 1.0
//!
//! [model.kernel]              # gle only: fitted power law or explicit modes
//! gamma_lambda = 1.0
//! lambda = 0.5
//! modes = 8
//! fit_length = 100.0
//! # c = [1.0]
//! # tau = [1.0]
//!
//! [noise]
//! seed = 7
//! coupling = "common"         # common | independent | eta
//! # eta = 0.7
//!
//! [numerics]
//! samples = 1000
//! t_final = 10.0
//! dt = 0.01
//! parameter = "c1"
//! stencil = "central"
//! epsilons = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
//! t_star = 10.0
//! observables = ["vacf"]
//!
//! [output]
//! prefix = "sweep"
//! # directory = "out"
//! ```
//!
//! Unknown keys are rejected. Every error carries the line it refers to.

use std::fmt;
use std::ops::Range;

use glesens_core::estimators::validate_epsilons;
use glesens_core::kernels::{fit_prony, FitOptions, Weighting};
use glesens_core::{
    AnyModel, Coupling, DiffStatistic, Error as CoreError, GleParams, LangevinParams, Observable,
    OuParams, ParameterId, Potential, PowerLawKernel, PronyMode, PronySeries, SeedPolicy, Stencil,
    TimeGrid,
};
use serde::Deserialize;
use toml::Spanned;

/// A config problem located at a line of the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "line {}: `{k}`: {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    PronyFit,
    Simulate,
    Sensitivity,
    VarSweep,
    ModeSens,
    OracleCheck,
}

impl Kind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "prony-fit" => Kind::PronyFit,
            "simulate" => Kind::Simulate,
            "sensitivity" => Kind::Sensitivity,
            "var-sweep" => Kind::VarSweep,
            "mode-sens" => Kind::ModeSens,
            "oracle-check" => Kind::OracleCheck,
            _ => return None,
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::PronyFit => "prony-fit",
            Kind::Simulate => "simulate",
            Kind::Sensitivity => "sensitivity",
            Kind::VarSweep => "var-sweep",
            Kind::ModeSens => "mode-sens",
            Kind::OracleCheck => "oracle-check",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCheck {
    /// Monte Carlo `Var[D]` of an OU time average against its expansion.
    OuTimeAverage,
    /// Monte Carlo `Cov[X_T, X~_T]` of two Langevin systems against the
    /// closed form.
    LangevinCovariance,
    /// Long-run moments of a harmonic GLE against the stationary Lyapunov
    /// solution.
    GleEquilibrium,
}

/// Power-law kernel fit settings kept for experiments that refit.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFit {
    pub kernel: PowerLawKernel,
    pub modes: usize,
    pub fit_length: f64,
    pub options: FitOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statistic {
    pub label: String,
    pub statistic: DiffStatistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub kind: Kind,
    pub description: String,
    pub model: AnyModel,
    pub kernel: Option<KernelFit>,
    pub seed: u64,
    pub coupling: Coupling,
    pub grid: Option<TimeGrid>,
    pub samples: usize,
    pub parameter: Option<ParameterId>,
    pub stencil: Stencil,
    pub epsilons: Vec<f64>,
    pub t_star: Option<f64>,
    pub observables: Vec<Observable>,
    pub statistics: Vec<Statistic>,
    pub couplings: Vec<Coupling>,
    pub seed_policy: SeedPolicy,
    pub horizon: Option<f64>,
    pub mode_counts: Vec<usize>,
    pub bootstrap: usize,
    pub write_paths: bool,
    pub burn_in: f64,
    pub oracle: Option<OracleCheck>,
    pub tolerance: f64,
    pub sigmas: f64,
    pub prefix: String,
    pub directory: Option<String>,
}

impl Experiment {
    pub fn grid(&self) -> TimeGrid {
        self.grid.expect("validated grid")
    }

    pub fn t_star(&self) -> f64 {
        self.t_star.unwrap_or_else(|| self.grid().t_final())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or_else(|| 0.5 * self.grid().t_final())
    }

    pub fn gle(&self) -> Option<&GleParams> {
        match &self.model {
            AnyModel::Gle(g) => Some(g),
            _ => None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Spanned<RawExperiment>,
    model: Spanned<RawModel>,
    noise: Option<Spanned<RawNoise>>,
    numerics: Option<Spanned<RawNumerics>>,
    oracle: Option<Spanned<RawOracle>>,
    output: Spanned<RawOutput>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: Spanned<String>,
    description: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(rename = "type")]
    model_type: Spanned<String>,
    theta: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    omega: Option<f64>,
    beta: Option<f64>,
    kt: Option<f64>,
    mass: Option<f64>,
    x0: Option<f64>,
    v0: Option<f64>,
    potential: Option<Spanned<String>>,
    kernel: Option<Spanned<RawKernel>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    gamma_lambda: Option<f64>,
    lambda: Option<f64>,
    modes: Option<usize>,
    fit_length: Option<f64>,
    weighting: Option<Spanned<String>>,
    c: Option<Vec<f64>>,
    tau: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    seed: u64,
    coupling: Option<Spanned<String>>,
    eta: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    samples: Option<usize>,
    t_final: Option<f64>,
    dt: Option<f64>,
    parameter: Option<Spanned<String>>,
    stencil: Option<Spanned<String>>,
    epsilons: Option<Spanned<Vec<f64>>>,
    t_star: Option<f64>,
    observables: Option<Spanned<Vec<String>>>,
    statistics: Option<Spanned<Vec<RawStatistic>>>,
    couplings: Option<Spanned<Vec<String>>>,
    seed_policy: Option<Spanned<String>>,
    horizon: Option<f64>,
    mode_counts: Option<Spanned<Vec<usize>>>,
    bootstrap: Option<usize>,
    write_paths: Option<bool>,
    burn_in: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStatistic {
    label: String,
    of: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    check: Spanned<String>,
    tolerance: Option<f64>,
    sigmas: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    prefix: Spanned<String>,
    directory: Option<String>,
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err(&self, span: Range<usize>, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.line(span),
            key: Some(key.into()),
            message: message.into(),
        }
    }

    fn core(&self, span: Range<usize>, err: CoreError) -> ConfigError {
        let key = match &err {
            CoreError::InvalidParameter { name, .. } => Some(name.clone()),
            CoreError::Inadmissible { parameter, .. } => Some(parameter.clone()),
            _ => None,
        };
        ConfigError {
            line: self.line(span),
            key,
            message: err.to_string(),
        }
    }
}

fn coupling_from(name: &str, eta: Option<f64>) -> Option<Coupling> {
    match name {
        "common" => Some(Coupling::CommonPath),
        "independent" => Some(Coupling::Independent),
        "eta" => eta.map(Coupling::Eta),
        _ => None,
    }
}

/// Short name of a coupling used in file names.
pub fn coupling_name(c: Coupling) -> &'static str {
    match c {
        Coupling::Independent => "independent",
        Coupling::CommonPath => "common",
        Coupling::Eta(_) => "eta",
    }
}

fn parse_statistic(s: &str, model: &AnyModel) -> Option<DiffStatistic> {
    let layout = glesens_core::Model::layout(model);
    let s = s.trim();
    if let Some(inner) = s.strip_prefix("var(").and_then(|r| r.strip_suffix(')')) {
        return Observable::parse(inner, &layout)
            .ok()
            .map(DiffStatistic::Variance);
    }
    let inner = s.strip_prefix("cov(")?.strip_suffix(')')?;
    // split at the comma that sits outside parentheses
    let mut depth = 0i32;
    let split = inner.char_indices().find_map(|(i, ch)| {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => return Some(i),
            _ => {}
        }
        None
    })?;
    let a = Observable::parse(&inner[..split], &layout).ok()?;
    let b = Observable::parse(&inner[split + 1..], &layout).ok()?;
    Some(DiffStatistic::Covariance(a, b))
}

/// Parse and validate a config.
pub fn parse(text: &str) -> Result<Experiment, ConfigError> {
    let loc = Locator { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| loc.line(s)).unwrap_or(1),
        key: None,
        message: e.message().trim().to_string(),
    })?;

    let kind_span = raw.experiment.get_ref().kind.span();
    let kind = Kind::parse(raw.experiment.get_ref().kind.get_ref())
        .ok_or_else(|| loc.err(kind_span.clone(), "kind", "unknown experiment kind"))?;
    let description = raw
        .experiment
        .get_ref()
        .description
        .clone()
        .unwrap_or_default();

    let model_span = raw.model.span();
    let (model, kernel) = build_model(&loc, raw.model.get_ref(), model_span.clone())?;

    let (seed, coupling) = match &raw.noise {
        Some(n) => {
            let r = n.get_ref();
            let coupling = match &r.coupling {
                None => Coupling::CommonPath,
                Some(c) => coupling_from(c.get_ref(), r.eta).ok_or_else(|| {
                    loc.err(
                        c.span(),
                        "coupling",
                        "expected common, independent or eta (with `eta`)",
                    )
                })?,
            };
            coupling.validate().map_err(|e| loc.core(n.span(), e))?;
            (r.seed, coupling)
        }
        None => (0, Coupling::CommonPath),
    };

    let empty = RawNumerics {
        samples: None,
        t_final: None,
        dt: None,
        parameter: None,
        stencil: None,
        epsilons: None,
        t_star: None,
        observables: None,
        statistics: None,
        couplings: None,
        seed_policy: None,
        horizon: None,
        mode_counts: None,
        bootstrap: None,
        write_paths: None,
        burn_in: None,
    };
    let (num, num_span) = match &raw.numerics {
        Some(n) => (n.get_ref(), n.span()),
        None => (&empty, 0..0),
    };
    let needs_numerics = kind != Kind::PronyFit;
    if needs_numerics && raw.numerics.is_none() {
        return Err(loc.err(
            kind_span,
            "numerics",
            "this experiment needs a [numerics] section",
        ));
    }
    let required = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| loc.err(num_span.clone(), key, "required key is missing"))
    };

    let grid = if needs_numerics {
        let t_final = required(num.t_final, "t_final")?;
        let dt = required(num.dt, "dt")?;
        Some(TimeGrid::new(t_final, dt).map_err(|e| loc.core(num_span.clone(), e))?)
    } else {
        None
    };
    let samples = num.samples.unwrap_or(1000);
    if needs_numerics && samples < 2 {
        return Err(loc.err(num_span.clone(), "samples", "need at least two samples"));
    }

    let parameter = match &num.parameter {
        Some(p) => {
            let id: ParameterId = p.get_ref().parse().map_err(|e| loc.core(p.span(), e))?;
            model.parameter(id).map_err(|e| loc.core(p.span(), e))?;
            Some(id)
        }
        None => None,
    };
    let stencil = match &num.stencil {
        Some(s) => s.get_ref().parse().map_err(|e| loc.core(s.span(), e))?,
        None => Stencil::Central,
    };
    let epsilons = match &num.epsilons {
        Some(e) => e.get_ref().clone(),
        None => vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
    };
    let eps_span = num
        .epsilons
        .as_ref()
        .map(|e| e.span())
        .unwrap_or(num_span.clone());
    if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(loc.err(eps_span.clone(), "epsilons", "values must be positive"));
    }

    let layout = glesens_core::Model::layout(&model);
    let observables = match &num.observables {
        Some(list) => list
            .get_ref()
            .iter()
            .map(|s| Observable::parse(s, &layout).map_err(|e| loc.core(list.span(), e)))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    for o in &observables {
        o.validate(&layout, &glesens_core::Model::initial_state(&model))
            .map_err(|e| loc.core(num.observables.as_ref().unwrap().span(), e))?;
    }
    let statistics = match &num.statistics {
        Some(list) => list
            .get_ref()
            .iter()
            .map(|s| {
                parse_statistic(&s.of, &model)
                    .map(|statistic| Statistic {
                        label: s.label.clone(),
                        statistic,
                    })
                    .ok_or_else(|| {
                        loc.err(
                            list.span(),
                            "statistics",
                            format!(
                                "`{}` is not var(<observable>) or cov(<observable>, <observable>)",
                                s.of
                            ),
                        )
                    })
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => observables
            .iter()
            .map(|&o| Statistic {
                label: o.label(&layout),
                statistic: DiffStatistic::Variance(o),
            })
            .collect(),
    };
    let couplings = match &num.couplings {
        Some(list) => list
            .get_ref()
            .iter()
            .map(|s| {
                let eta = match coupling {
                    Coupling::Eta(e) => Some(e),
                    _ => None,
                };
                coupling_from(s, eta).ok_or_else(|| {
                    loc.err(list.span(), "couplings", format!("unknown coupling `{s}`"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![coupling],
    };
    let seed_policy = match &num.seed_policy {
        None => SeedPolicy::Shared,
        Some(s) => match s.get_ref().as_str() {
            "shared" => SeedPolicy::Shared,
            "offset" => SeedPolicy::OffsetPerPoint,
            _ => return Err(loc.err(s.span(), "seed_policy", "expected shared or offset")),
        },
    };
    let mode_counts = num
        .mode_counts
        .as_ref()
        .map(|m| m.get_ref().clone())
        .unwrap_or_default();
    if mode_counts.contains(&0) {
        let span = num.mode_counts.as_ref().unwrap().span();
        return Err(loc.err(span, "mode_counts", "mode counts must be >= 1"));
    }

    let oracle = match &raw.oracle {
        Some(o) => {
            let c = &o.get_ref().check;
            Some(match c.get_ref().as_str() {
                "ou-timeavg" => OracleCheck::OuTimeAverage,
                "langevin-covariance" => OracleCheck::LangevinCovariance,
                "gle-equilibrium" => OracleCheck::GleEquilibrium,
                _ => {
                    return Err(loc.err(
                        c.span(),
                        "check",
                        "expected ou-timeavg, langevin-covariance or gle-equilibrium",
                    ))
                }
            })
        }
        None => None,
    };
    let tolerance = raw
        .oracle
        .as_ref()
        .and_then(|o| o.get_ref().tolerance)
        .unwrap_or(0.3);
    let sigmas = raw
        .oracle
        .as_ref()
        .and_then(|o| o.get_ref().sigmas)
        .unwrap_or(3.0);

    let prefix = raw.output.get_ref().prefix.get_ref().clone();
    if prefix.is_empty()
        || !prefix
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(loc.err(
            raw.output.get_ref().prefix.span(),
            "prefix",
            "use letters, digits, `_` and `-` only",
        ));
    }

    let exp = Experiment {
        kind,
        description,
        model,
        kernel,
        seed,
        coupling,
        grid,
        samples,
        parameter,
        stencil,
        epsilons,
        t_star: num.t_star,
        observables,
        statistics,
        couplings,
        seed_policy,
        horizon: num.horizon,
        mode_counts,
        bootstrap: num.bootstrap.unwrap_or(200),
        write_paths: num.write_paths.unwrap_or(false),
        burn_in: num.burn_in.unwrap_or(0.0),
        oracle,
        tolerance,
        sigmas,
        prefix,
        directory: raw.output.get_ref().directory.clone(),
    };
    check_kind(&loc, &exp, kind_span, num_span, eps_span)?;
    Ok(exp)
}

fn build_model(
    loc: &Locator<'_>,
    m: &RawModel,
    span: Range<usize>,
) -> Result<(AnyModel, Option<KernelFit>), ConfigError> {
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| loc.err(span.clone(), key, "required key is missing"))
    };
    let unused = |present: &[(&str, bool)]| -> Result<(), ConfigError> {
        match present.iter().find(|(_, p)| *p) {
            Some((key, _)) => Err(loc.err(span.clone(), key, "not a parameter of this model")),
            None => Ok(()),
        }
    };
    let core = |e| loc.core(span.clone(), e);
    match m.model_type.get_ref().as_str() {
        "ou" => {
            unused(&[
                ("omega", m.omega.is_some()),
                ("beta", m.beta.is_some()),
                ("kt", m.kt.is_some()),
                ("mass", m.mass.is_some()),
                ("v0", m.v0.is_some()),
                ("potential", m.potential.is_some()),
                ("kernel", m.kernel.is_some()),
            ])?;
            let p = OuParams::new(
                need(m.theta, "theta")?,
                need(m.mu, "mu")?,
                need(m.sigma, "sigma")?,
                need(m.x0, "x0")?,
            )
            .map_err(core)?;
            Ok((AnyModel::Ou(p), None))
        }
        "langevin" => {
            unused(&[
                ("theta", m.theta.is_some()),
                ("mu", m.mu.is_some()),
                ("sigma", m.sigma.is_some()),
                ("potential", m.potential.is_some()),
                ("kernel", m.kernel.is_some()),
            ])?;
            let mut p = LangevinParams::new(
                need(m.omega, "omega")?,
                need(m.beta, "beta")?,
                need(m.kt, "kt")?,
                need(m.x0, "x0")?,
                need(m.v0, "v0")?,
            )
            .map_err(core)?;
            if let Some(mass) = m.mass {
                p.mass = mass;
                p.validate().map_err(core)?;
            }
            Ok((AnyModel::Langevin(p), None))
        }
        "gle" => {
            unused(&[
                ("theta", m.theta.is_some()),
                ("mu", m.mu.is_some()),
                ("sigma", m.sigma.is_some()),
                ("beta", m.beta.is_some()),
            ])?;
            let potential = match m.potential.as_ref().map(|p| p.get_ref().as_str()) {
                Some("harmonic") | None => Potential::Harmonic {
                    omega: need(m.omega, "omega")?,
                },
                Some("double-well") => {
                    unused(&[("omega", m.omega.is_some())])?;
                    Potential::DoubleWell
                }
                Some(_) => {
                    let s = m.potential.as_ref().unwrap().span();
                    return Err(loc.err(s, "potential", "expected harmonic or double-well"));
                }
            };
            let k = m.kernel.as_ref().ok_or_else(|| {
                loc.err(span.clone(), "kernel", "gle needs a [model.kernel] table")
            })?;
            let (prony, fit) = build_kernel(loc, k.get_ref(), k.span())?;
            let g = GleParams::new(
                m.mass.unwrap_or(1.0),
                potential,
                need(m.kt, "kt")?,
                prony,
                need(m.x0, "x0")?,
                need(m.v0, "v0")?,
            )
            .map_err(core)?;
            Ok((AnyModel::Gle(g), fit))
        }
        _ => Err(loc.err(m.model_type.span(), "type", "expected ou, langevin or gle")),
    }
}

fn build_kernel(
    loc: &Locator<'_>,
    k: &RawKernel,
    span: Range<usize>,
) -> Result<(PronySeries, Option<KernelFit>), ConfigError> {
    let core = |e| loc.core(span.clone(), e);
    match (&k.c, &k.tau) {
        (Some(c), Some(tau)) => {
            if k.gamma_lambda.is_some() || k.lambda.is_some() || k.modes.is_some() {
                return Err(loc.err(span, "c", "give either explicit modes or a power-law fit"));
            }
            if c.len() != tau.len() {
                return Err(loc.err(span, "tau", "`c` and `tau` need equal lengths"));
            }
            let modes = c
                .iter()
                .zip(tau)
                .map(|(&c, &tau)| PronyMode { c, tau })
                .collect();
            Ok((PronySeries::new(modes).map_err(core)?, None))
        }
        (None, None) => {
            let need = |v: Option<f64>, key: &str| {
                v.ok_or_else(|| loc.err(span.clone(), key, "required key is missing"))
            };
            let kernel = PowerLawKernel::new(
                need(k.gamma_lambda, "gamma_lambda")?,
                need(k.lambda, "lambda")?,
            )
            .map_err(core)?;
            let weighting = match k.weighting.as_ref().map(|w| w.get_ref().as_str()) {
                None | Some("relative") => Weighting::Relative,
                Some("absolute") => Weighting::Absolute,
                Some(_) => {
                    let s = k.weighting.as_ref().unwrap().span();
                    return Err(loc.err(s, "weighting", "expected relative or absolute"));
                }
            };
            let fit = KernelFit {
                kernel,
                modes: k
                    .modes
                    .ok_or_else(|| loc.err(span.clone(), "modes", "required key is missing"))?,
                fit_length: need(k.fit_length, "fit_length")?,
                options: FitOptions {
                    weighting,
                    ..FitOptions::default()
                },
            };
            let (prony, _) =
                fit_prony(&fit.kernel, fit.modes, fit.fit_length, &fit.options).map_err(core)?;
            Ok((prony, Some(fit)))
        }
        _ => Err(loc.err(span, "c", "`c` and `tau` must be given together")),
    }
}

fn check_kind(
    loc: &Locator<'_>,
    e: &Experiment,
    kind_span: Range<usize>,
    num_span: Range<usize>,
    eps_span: Range<usize>,
) -> Result<(), ConfigError> {
    let missing = |key: &str| loc.err(num_span.clone(), key, "required for this experiment kind");
    match e.kind {
        Kind::PronyFit => {
            if e.kernel.is_none() {
                return Err(loc.err(kind_span, "kernel", "prony-fit needs a fitted gle kernel"));
            }
        }
        Kind::Simulate => {
            if e.observables.is_empty() && !e.write_paths {
                return Err(missing("observables"));
            }
            if !e.mode_counts.is_empty() && e.kernel.is_none() {
                return Err(missing("kernel"));
            }
        }
        Kind::Sensitivity => {
            if e.parameter.is_none() {
                return Err(missing("parameter"));
            }
            if e.observables.is_empty() {
                return Err(missing("observables"));
            }
            if e.epsilons.len() != 1 {
                return Err(loc.err(
                    eps_span,
                    "epsilons",
                    "sensitivity runs take a single epsilon",
                ));
            }
            check_perturbations(loc, e, &eps_span)?;
        }
        Kind::VarSweep => {
            if e.parameter.is_none() {
                return Err(missing("parameter"));
            }
            if e.statistics.is_empty() {
                return Err(missing("observables"));
            }
            if !e.coupling.is_coupled() {
                return Err(loc.err(num_span, "coupling", "sweeps compare a coupled plan against independent sampling; set a coupled [noise] coupling"));
            }
            validate_epsilons(&e.epsilons).map_err(|err| loc.core(eps_span.clone(), err))?;
            check_perturbations(loc, e, &eps_span)?;
            check_eval_time(loc, e, &num_span)?;
        }
        Kind::ModeSens => {
            if e.kernel.is_none() {
                return Err(loc.err(kind_span, "kernel", "mode-sens needs a fitted gle kernel"));
            }
            if e.mode_counts.is_empty() {
                return Err(missing("mode_counts"));
            }
            if e.observables.len() != 1 || !e.observables[0].is_series() {
                return Err(loc.err(
                    num_span,
                    "observables",
                    "mode-sens needs exactly one series observable",
                ));
            }
            if !e.coupling.is_coupled() {
                return Err(loc.err(
                    num_span,
                    "coupling",
                    "mode-sens needs a coupled [noise] coupling",
                ));
            }
            let grid = e.grid();
            let h = e.horizon();
            if !(h > 0.0 && h < grid.t_final()) {
                return Err(loc.err(num_span, "horizon", "must lie in (0, t_final)"));
            }
            grid.index_of(h)
                .map_err(|err| loc.core(num_span.clone(), err))?;
            grid.index_of(e.t_star())
                .map_err(|err| loc.core(num_span.clone(), err))?;
        }
        Kind::OracleCheck => {
            let check = e.oracle.ok_or_else(|| {
                loc.err(
                    kind_span.clone(),
                    "oracle",
                    "oracle-check needs an [oracle] section",
                )
            })?;
            let ok = match check {
                OracleCheck::OuTimeAverage => matches!(e.model, AnyModel::Ou(_)),
                OracleCheck::LangevinCovariance => matches!(e.model, AnyModel::Langevin(_)),
                OracleCheck::GleEquilibrium => matches!(
                    e.model,
                    AnyModel::Gle(GleParams {
                        potential: Potential::Harmonic { .. },
                        ..
                    })
                ),
            };
            if !ok {
                return Err(loc.err(kind_span, "check", "check does not match the model type"));
            }
            if check != OracleCheck::GleEquilibrium {
                if e.parameter.is_none() {
                    return Err(missing("parameter"));
                }
                if e.stencil != Stencil::Central || e.epsilons.len() != 1 {
                    return Err(loc.err(
                        eps_span,
                        "epsilons",
                        "oracle checks use one epsilon with the central stencil",
                    ));
                }
                check_perturbations(loc, e, &eps_span)?;
            }
            if check == OracleCheck::LangevinCovariance && e.parameter != Some(ParameterId::Beta) {
                return Err(missing("parameter = \"beta\""));
            }
            if check == OracleCheck::GleEquilibrium && e.burn_in >= e.grid().t_final() {
                return Err(loc.err(num_span, "burn_in", "must be below t_final"));
            }
        }
    }
    if e.oracle.is_some() && e.kind != Kind::OracleCheck {
        return Err(loc.err(kind_span, "oracle", "[oracle] is only used by oracle-check"));
    }
    Ok(())
}

fn check_perturbations(
    loc: &Locator<'_>,
    e: &Experiment,
    eps_span: &Range<usize>,
) -> Result<(), ConfigError> {
    let p = e.parameter.expect("checked parameter");
    for &eps in &e.epsilons {
        glesens_core::DifferencePair::new(&e.model, p, e.stencil, eps)
            .map_err(|err| loc.core(eps_span.clone(), err))?;
    }
    Ok(())
}

fn check_eval_time(
    loc: &Locator<'_>,
    e: &Experiment,
    num_span: &Range<usize>,
) -> Result<(), ConfigError> {
    let grid = e.grid();
    let t = e.t_star();
    grid.index_of(t)
        .map_err(|err| loc.core(num_span.clone(), err))?;
    let scalar = e.statistics.iter().any(|s| match s.statistic {
        DiffStatistic::Variance(o) => !o.is_series(),
        DiffStatistic::Covariance(a, b) => !a.is_series() || !b.is_series(),
    });
    if scalar && grid.index_of(t).ok() != Some(grid.n_steps) {
        return Err(loc.err(
            num_span.clone(),
            "t_star",
            "scalar observables are evaluated at t_final",
        ));
    }
    Ok(())
}
