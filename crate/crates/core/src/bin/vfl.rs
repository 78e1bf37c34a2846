use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use vfl_core::cli::{parse_config_with, run, with_overrides, Command, EXIT_CONFIG};
use vfl_core::par::configure_threads;

/// Viscoelastic flow solver driver.
#[derive(Parser, Debug)]
#[command(name = "vfl", version)]
struct Args {
    /// simulate | check-invariants | mms-convergence | lame-test | stability-probe
    command: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn fail(reason: impl std::fmt::Display) -> ExitCode {
    eprintln!("{reason}");
    ExitCode::from(EXIT_CONFIG as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let threads = std::env::var("VFL_THREADS").ok().and_then(|v| v.parse().ok());
    configure_threads(threads);

    let Some(command) = Command::parse(&args.command) else {
        return fail(format!("config: unknown command {:?}", args.command));
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(format!("io: {}: {e}", args.config.display())),
    };
    let cfg = match parse_config_with(&text, Some(command)) {
        Ok(c) => with_overrides(c, args.out.as_deref(), args.seed),
        Err(e) => return fail(format!("config: {e}")),
    };
    let outcome = run(&cfg);
    if let Some(reason) = &outcome.reason {
        eprintln!("{reason}");
    }
    ExitCode::from(outcome.code as u8)
}
