use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nehari_shape_cli::sweep::{csv, run_sweep, write_json};
use nehari_shape_cli::validate::{all_pass, run_validate, table};
use nehari_shape_cli::{thread_count, thread_pool, OnlyFilter, ScenarioConfig, THREADS_ENV};

#[derive(Parser)]
#[command(name = "nehari-shape", version, about = "Second-order shape estimates on the rectangle (0,1)x(-a,a)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat `key = value` scenario file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set a_step=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Restrict to matching rows: `case=iv,a=1.05,corrector=w_2_2`.
    #[arg(long)]
    only: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one CSV row (and JSON report) per (case, a, corrector).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Run the oracle checks and print a pass/fail table.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(common: &Common) -> Result<(ScenarioConfig, OnlyFilter), String> {
    let cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ScenarioConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ScenarioConfig::default(),
    };
    let cfg = cfg.with_overrides(&common.overrides).map_err(|e| e.to_string())?;
    let only = match &common.only {
        Some(s) => OnlyFilter::parse(s).map_err(|e| e.to_string())?,
        None => OnlyFilter::default(),
    };
    Ok((cfg, only))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Sweep { common, .. } | Command::Validate { common } => common,
    };
    let (mut cfg, only) = match load(common) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let pool = match thread_count(std::env::var(THREADS_ENV).ok().as_deref()).and_then(thread_pool) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    match cli.command {
        Command::Sweep { out_csv, out_json, .. } => {
            if out_csv.is_some() {
                cfg.out_csv = out_csv;
            }
            if out_json.is_some() {
                cfg.out_json = out_json;
            }
            let rows = pool.install(|| run_sweep(&cfg, &only));
            let text = csv(&rows);
            match &cfg.out_csv {
                Some(path) => {
                    if let Err(e) = fs::write(path, &text) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::from(EXIT_FAILURE);
                    }
                }
                None => print!("{text}"),
            }
            if let Some(dir) = &cfg.out_json {
                if let Err(e) = write_json(&cfg, &rows, dir) {
                    eprintln!("error: {}: {e}", dir.display());
                    return ExitCode::from(EXIT_FAILURE);
                }
            }
            let failed: Vec<_> = rows.iter().filter_map(|r| r.result.as_ref().err().map(|e| (r.job, e))).collect();
            for (job, e) in &failed {
                eprintln!("row case={} a={} corrector={}: {e}", job.case.id(), job.a, job.corrector);
            }
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
        Command::Validate { .. } => {
            let checks = pool.install(|| run_validate(&cfg, &only));
            print!("{}", table(&checks));
            if all_pass(&checks) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
