mod config;
mod output;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::run::{RunError, RunOptions};

const EXIT_AUDIT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(name = "chandisc", version, about = "Energy-constrained channel divergence experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file and write a CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; overrides `out` in the config. Stdout if neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: logical cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Write every conic program in SDPA sparse format to this directory.
        #[arg(long)]
        dump_sdp: Option<PathBuf>,
        /// Fill the wall_ms column (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Render a result CSV as a static SVG line plot.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run { config, out, jobs, dump_sdp, timing } => {
            let cfg = match RunConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if jobs == Some(0) {
                eprintln!("config error: --jobs must be at least 1");
                return ExitCode::from(EXIT_CONFIG);
            }
            let report = match run::run(&cfg, &RunOptions { jobs, dump_sdp }) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(match e {
                        RunError::Config(_) => EXIT_CONFIG,
                        RunError::Backend(_) => EXIT_BACKEND,
                    });
                }
            };
            let csv = output::to_csv(&cfg, &report.rows, timing);
            match out.or(cfg.out.clone()) {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, csv) {
                        eprintln!("{}: {e}", path.display());
                        return ExitCode::from(EXIT_CONFIG);
                    }
                    eprintln!("wrote {} rows to {}", report.rows.len(), path.display());
                }
                None => print!("{csv}"),
            }
            for line in &report.summary {
                eprintln!("{line}");
            }
            if report.audit_violations > 0 {
                return ExitCode::from(EXIT_AUDIT);
            }
            ExitCode::SUCCESS
        }
        Cmd::Plot { csv, out } => {
            let text = match std::fs::read_to_string(&csv) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", csv.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match plot::csv_to_svg(&text).map(|svg| std::fs::write(&out, svg).map_err(|e| e.to_string())) {
                Ok(Ok(())) => ExitCode::SUCCESS,
                Ok(Err(e)) | Err(e) => {
                    eprintln!("plot: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
    }
}
