use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nlperim::config::{parse_config, Formats};
use nlperim::run::{exit_code, run};
use nlperim::Error;

/// Nonlocal perimeter laboratory.
///
/// Exit status: 0 pass, 1 invariant violation, 2 configuration or input
/// error, 3 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "nlperim", version)]
struct Args {
    /// Run configuration (INI-style `[section]` / `key = value`).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of json,csv,nlpg1.
    #[arg(long, value_parser = Formats::parse)]
    format: Option<Formats>,
}

fn execute(args: &Args) -> Result<bool, Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let mut cfg = parse_config(&text, &base)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(dir) = &args.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(f) = args.format {
        cfg.formats = f;
    }
    let outcome = run(&cfg)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for p in &outcome.artifacts {
        println!("wrote {}", p.display());
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("nlperim: invariant violated");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("nlperim: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
