//! `lievortex`: run one experiment from a TOML config and write its reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use crate::config::Command;
use crate::run::{CliError, Output, Status};

#[derive(Debug, Parser)]
#[command(
    name = "lievortex",
    version,
    about = "Reduced rigid-body flows, vortex manifolds and bounded steering on SO(n)"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "lievortex-out")]
    out: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn execute(cli: &Cli) -> Result<(Status, Vec<String>), CliError> {
    let mut cfg = config::load(&cli.config)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    cfg.command = Some(cfg.command.unwrap_or(cli.command));
    let mut out = Output::new(&cli.out)?;
    let status = run::run(cli.command, &cfg, &mut out)?;
    let (label, message) = match &status {
        Status::Ok => ("ok", None),
        Status::Budget(m) => ("budget-exceeded", Some(m.clone())),
    };
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    out.json(
        "manifest.json",
        &json!({
            "tool": "lievortex",
            "version": env!("CARGO_PKG_VERSION"),
            "command": cli.command.name(),
            "status": label,
            "message": message,
            "config": cfg,
            "outputs": files,
        }),
    )?;
    Ok((status, out.files))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok((status, files)) => {
            if !cli.quiet {
                for f in &files {
                    println!("wrote {}", cli.out.join(f).display());
                }
            }
            match status {
                Status::Ok => ExitCode::SUCCESS,
                Status::Budget(m) => {
                    eprintln!("lievortex {}: budget exceeded: {m}", cli.command.name());
                    ExitCode::from(3)
                }
            }
        }
        Err(e) => {
            eprintln!("lievortex {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
