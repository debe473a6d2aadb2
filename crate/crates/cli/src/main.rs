use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use glesens_cli::{
    check_summary, load, output_dir, parse_source, registry, run_with_threads, write_outputs,
    CliError, OUT_ENV,
};

#[derive(Parser)]
#[command(
    name = "glesens",
    version,
    about = "Finite-difference sensitivity experiments for OU, Langevin and GLE dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (a path or a shipped config name).
    Run {
        config: String,
        /// Worker threads; outputs are identical for every value.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (default: the config's `directory`, then $GLESENS_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List shipped configs.
    List,
    /// Run an oracle-check config and exit 4 if any comparison fails.
    OracleCheck {
        config: String,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::List => {
            for entry in registry::entries() {
                println!("{:<32} {}", entry.name, entry.description());
            }
            Ok(())
        }
        Command::Run {
            config,
            threads,
            out,
        } => run(&config, threads, out, false),
        Command::OracleCheck {
            config,
            threads,
            out,
        } => run(&config, threads, out, true),
    }
}

fn run(
    config: &str,
    threads: Option<usize>,
    out: Option<PathBuf>,
    require_check: bool,
) -> Result<(), CliError> {
    let source = load(config)?;
    let experiment = parse_source(&source)?;
    if require_check && experiment.kind != glesens_cli::Kind::OracleCheck {
        return Err(CliError::Usage(format!(
            "{}: kind is {}, expected oracle-check",
            source.name, experiment.kind
        )));
    }
    let output = run_with_threads(&experiment, threads)?;
    let env = std::env::var(OUT_ENV).ok();
    let dir = output_dir(out.as_deref(), &source, &experiment, env.as_deref());
    for path in write_outputs(&dir, &experiment.prefix, &output.artifacts)? {
        println!("wrote {}", path.display());
    }
    for line in check_summary(&output) {
        println!("{line}");
    }
    if !output.passed() {
        return Err(CliError::CheckFailed(source.name));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
