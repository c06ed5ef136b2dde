use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod commands;
mod config;

use commands::{run, CliError};
use config::{Command, RawConfig, RunConfig};

/// Steady states, bifurcation branches and transition layers of the shadow problem.
#[derive(Debug, Parser)]
#[command(name = "shadowkit", version)]
struct Cli {
    command: Command,
    /// Flat key=value file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides of the form --key=value.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

/// Pulls `--config <file>` or `--config=<file>` out of the trailing arguments.
fn split_config(args: &[String]) -> (Option<PathBuf>, Vec<String>) {
    let mut config = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = it.next().map(PathBuf::from);
        } else if let Some(path) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            rest.push(a.clone());
        }
    }
    (config, rest)
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let (late_config, overrides) = split_config(&cli.overrides);
    let mut raw = match late_config.as_ref().or(cli.config.as_ref()) {
        Some(path) => RawConfig::read(path)?,
        None => RawConfig::default(),
    };
    raw.apply_overrides(&overrides)?;
    let env_out = std::env::var_os("SHADOWKIT_OUT").map(PathBuf::from);
    let cfg = RunConfig::resolve(cli.command, &raw, env_out)?;
    let written = run(&cfg)?;
    Ok(written.into_iter().map(|f| cfg.out_dir.join(f)).collect())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("shadowkit {}: {e}", cli.command);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
