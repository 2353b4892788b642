use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

mod commands;
mod config;

use commands::EXIT_CONFIG;
use config::{RawConfig, RunConfig};

/// Locally constrained mean curvature flow of spacelike graphs in warped
/// product spacetimes.
#[derive(Debug, Parser)]
#[command(name = "grwflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the flow and write trace.csv, summary.json and timing.json.
    Run(Common),
    /// Run the curvature oracle and the identity suites; writes verify.json.
    Verify(Common),
    /// Tabulate the slice profile f0, f1 and phi into profile.csv.
    Profile(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Config file; repeat to run several independent configs.
    #[arg(long = "config", short = 'c', required = true)]
    configs: Vec<PathBuf>,
    /// Output root (overrides output.dir).
    #[arg(long, env = "GRWFLOW_OUT")]
    out: Option<PathBuf>,
    /// Run the closed-form versus oracle self-test before the flow.
    #[arg(long)]
    strict: bool,
    /// Worker threads shared by all configs.
    #[arg(long, short = 'j')]
    jobs: Option<usize>,
}

fn output_dir(common: &Common, cfg: &RunConfig, path: &Path) -> PathBuf {
    let root = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if common.configs.len() > 1 {
        root.join(path.file_stem().unwrap_or_default())
    } else {
        root
    }
}

fn run_one(which: &Command, common: &Common, path: &Path) -> i32 {
    let cfg = match RawConfig::load(&[path.to_path_buf()]).and_then(|raw| RunConfig::from_raw(&raw)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_CONFIG;
        }
    };
    let out = output_dir(common, &cfg, path);
    let result: Result<i32> = match which {
        Command::Run(_) => commands::cmd_run(&cfg, &out, common.strict),
        Command::Verify(_) => commands::cmd_verify(&cfg, &out),
        Command::Profile(_) => commands::cmd_profile(&cfg, &out),
    };
    match result {
        Ok(code) => {
            log::info!("{}: exit code {code}, outputs in {}", path.display(), out.display());
            code
        }
        Err(e) => {
            eprintln!("error: {}: {e:#}", path.display());
            EXIT_CONFIG
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run(c) | Command::Verify(c) | Command::Profile(c) => c,
    };
    if let Some(jobs) = common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let codes: Vec<i32> = common.configs.par_iter().map(|p| run_one(&cli.command, common, p)).collect();
    // first failing config in command-line order decides the exit code
    let code = codes.into_iter().find(|&c| c != 0).unwrap_or(0);
    ExitCode::from(code as u8)
}
