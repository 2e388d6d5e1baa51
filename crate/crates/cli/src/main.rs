//! `cascade-sim`: run transfer simulations, protocol scripts, regime checks
//! and parameter sweeps from JSON configs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod exec;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Format, ScenarioConfig};
use error::CliError;
use output::Provenance;

#[derive(Parser)]
#[command(name = "cascade-sim", version, about = "Cascaded cavity-QED transfer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Suppress the summary line on stderr; errors are still reported.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a config of any kind.
    Run(RunArgs),
    /// Execute a sweep config.
    Sweep(RunArgs),
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// Print tool and library versions.
    Version,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output file; defaults to the config's `output.path`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; defaults to the config's `output.format`, else json (csv for sweeps).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for sweeps; defaults to the number of available cores.
    #[arg(long)]
    jobs: Option<usize>,
}

fn load(path: &Path) -> Result<(Vec<u8>, ScenarioConfig), CliError> {
    let raw = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = std::str::from_utf8(&raw).map_err(|e| CliError::Config(format!("not UTF-8: {e}")))?;
    let cfg = ScenarioConfig::parse(text)?;
    Ok((raw, cfg))
}

fn run(args: &RunArgs, sweep_only: bool, quiet: bool) -> Result<(), CliError> {
    let (raw, cfg) = load(&args.config)?;
    if sweep_only && !matches!(cfg, ScenarioConfig::Sweep(_)) {
        return Err(CliError::Config(format!(
            "`sweep` needs a config with kind \"sweep\", got \"{}\"",
            cfg.kind()
        )));
    }
    if args.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let outcome = exec::execute(&cfg, args.jobs)?;
    let default_format = if matches!(cfg, ScenarioConfig::Sweep(_)) {
        Format::Csv
    } else {
        Format::Json
    };
    let format = args.format.or(cfg.output().format).unwrap_or(default_format);
    let text = output::render(&outcome, &Provenance::new(&raw, &cfg), format)?;
    match args.out.as_ref().or(cfg.output().path.as_ref()) {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => print!("{text}"),
    }
    if !quiet {
        eprintln!("{}", outcome.summary());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a, false, cli.quiet),
        Command::Sweep(a) => run(a, true, cli.quiet),
        Command::Validate { config } => load(config).map(|(_, cfg)| {
            if !cli.quiet {
                eprintln!("{}: valid {} config", config.display(), cfg.kind());
            }
        }),
        Command::Version => {
            println!(
                "{} {} (cascade-core {})",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION"),
                cascade_core::VERSION
            );
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cascade-sim: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
