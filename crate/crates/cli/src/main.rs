//! Batch front-end: builds instances from a config file, runs solves,
//! verifications, sweeps and epsilon tables, and writes CSV/JSON outputs.
//!
//! Exit status: 0 when every asserted check passed, 1 when a check failed
//! (the reason is printed as `failure=...`), 2 for usage, config or I/O errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use config::RunConfig;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Run,
    VerifyGroup,
    VerifyAc,
    MeasureJ,
    OracleCompare,
    Sweep,
    EpsilonTable,
}

#[derive(Debug, Parser)]
#[command(name = "kamscale", version, about = "Certified Kolmogorov-Arnold iteration on truncated analytic series")]
struct Args {
    #[arg(long, value_enum)]
    command: Command,
    /// `key = value` configuration file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let name = args.command.to_possible_value().expect("no skipped variants").get_name().to_string();
    let loaded = match &args.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    };
    let mut cfg = match loaded {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("command={name} error=config message={e:?}", e = e.to_string());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let result = match args.command {
        Command::Run => commands::run(&cfg, &args.out),
        Command::VerifyGroup => commands::verify_group(&cfg, &args.out),
        Command::VerifyAc => commands::verify_ac_cmd(&cfg, &args.out),
        Command::MeasureJ => commands::measure_j(&cfg, &args.out),
        Command::OracleCompare => commands::oracle_compare(&cfg, &args.out),
        Command::Sweep => commands::sweep(&cfg, &args.out),
        Command::EpsilonTable => commands::epsilon_table(&cfg, &args.out),
    };
    match result {
        Ok(report) => {
            let mut line = format!("command={name} ok={} {}", report.ok, report.summary);
            if let (false, Some(reason)) = (report.ok, &report.failure) {
                line.push_str(&format!(" failure={reason}"));
            }
            println!("{line}");
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("command={name} error={} message={:?}", e.kind(), e.to_string());
            ExitCode::from(2)
        }
    }
}
