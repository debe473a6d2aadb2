//! Batch runner for the shipped sensitivity experiments.
//!
//! `glesens run <config>` parses an experiment config (see [`config`]),
//! runs it and writes CSV artifacts plus a `<prefix>_manifest.sha256` file
//! listing each CSV with its SHA-256. Shipped configs can be named instead
//! of a path; `glesens list` shows them.

pub mod config;
pub mod registry;
pub mod runner;

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use config::{parse, ConfigError, Experiment, Kind};
pub use runner::{run, Artifact, Report, RunError, RunOutput};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "GLESENS_OUT";

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{source_name}: {error}")]
    Config {
        source_name: String,
        error: ConfigError,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Run(#[from] RunError),
    #[error("{path}: {error}")]
    Io {
        path: PathBuf,
        error: std::io::Error,
    },
    #[error("oracle check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Run(_) => EXIT_NUMERICAL,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }
}

/// Config text and the directory relative output paths resolve against.
#[derive(Debug, Clone)]
pub struct Source {
    pub name: String,
    pub text: String,
    pub base_dir: Option<PathBuf>,
}

/// Read `name` as a file, falling back to a shipped config of that name.
pub fn load(name: &str) -> Result<Source, CliError> {
    let path = Path::new(name);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|error| CliError::Io {
            path: path.to_path_buf(),
            error,
        })?;
        return Ok(Source {
            name: name.to_string(),
            text,
            base_dir: path.parent().map(Path::to_path_buf),
        });
    }
    match registry::find(name) {
        Some(entry) => Ok(Source {
            name: entry.name.to_string(),
            text: entry.text.to_string(),
            base_dir: None,
        }),
        None => Err(CliError::Usage(format!(
            "`{name}` is neither a readable file nor a shipped config (see `glesens list`)"
        ))),
    }
}

pub fn parse_source(source: &Source) -> Result<Experiment, CliError> {
    parse(&source.text).map_err(|error| CliError::Config {
        source_name: source.name.clone(),
        error,
    })
}

/// Output directory: `--out`, then the config's `directory`, then the
/// environment, then `out`.
pub fn output_dir(
    cli_out: Option<&Path>,
    source: &Source,
    e: &Experiment,
    env: Option<&str>,
) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Some(d) = &e.directory {
        let d = PathBuf::from(d);
        return match (&source.base_dir, d.is_absolute()) {
            (Some(base), false) => base.join(d),
            _ => d,
        };
    }
    match env {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("out"),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `sha256sum`-compatible listing of the artifacts.
pub fn manifest(artifacts: &[Artifact]) -> String {
    artifacts
        .iter()
        .map(|a| format!("{}  {}\n", sha256_hex(a.contents.as_bytes()), a.name))
        .collect()
}

/// Write all artifacts and the manifest. Returns the written paths.
pub fn write_outputs(
    dir: &Path,
    prefix: &str,
    artifacts: &[Artifact],
) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |error| CliError::Io { path, error }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents).map_err(io(&path))?;
        written.push(path);
    }
    let path = dir.join(format!("{prefix}_manifest.sha256"));
    fs::write(&path, manifest(artifacts)).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}

/// Run on a pool of `threads` workers, or rayon's default when `None`.
pub fn run_with_threads(e: &Experiment, threads: Option<usize>) -> Result<RunOutput, CliError> {
    match threads {
        None => Ok(run(e)?),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|err| {
                    CliError::Usage(format!("cannot start {n} worker threads: {err}"))
                })?;
            Ok(pool.install(|| run(e))?)
        }
    }
}

/// Summary lines for an oracle check.
pub fn check_summary(output: &RunOutput) -> Vec<String> {
    match &output.report {
        Report::OracleCheck(rows) => rows
            .iter()
            .map(|r| {
                format!(
                    "{} {}: measured {:.6e} (se {:.2e}) expected {:.6e} [{}]",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.quantity,
                    r.measured,
                    r.stderr,
                    r.expected,
                    r.rule
                )
            })
            .collect(),
        _ => Vec::new(),
    }
}
