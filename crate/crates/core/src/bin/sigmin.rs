use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sigmin::bench::{self, parse_threads, BenchConfig, KEYS};
use sigmin::Result;

fn config_help() -> String {
    let mut s = String::from("Config file: flat `key = value` lines grouped by `[section]` headers; `#` starts a comment.\nKeys:\n");
    for (k, d) in KEYS {
        s.push_str(&format!("  {k:<24} {d}\n"));
    }
    s
}

#[derive(Parser)]
#[command(name = "sigmin", version, about = "Benchmarks for RBF approximation and SVD denoising optimisers")]
#[command(after_long_help = config_help())]
struct Cli {
    /// Config file (see --help for the key list).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated thread counts.
    #[arg(long, global = true, env = "SIGMIN_THREADS")]
    threads: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare optimisers on an approximation instance.
    Approx,
    /// Compare optimisers on a denoising instance.
    Denoise,
    /// Time every pipeline operation for each thread count.
    Scale,
    /// Compare the cross-product and Lanczos SVD methods.
    Svdcmp,
    /// Write input, variables and output artefacts for one instance.
    Demo,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = match &cli.config {
        Some(p) => BenchConfig::from_file(p)?,
        None => BenchConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = &cli.threads {
        cfg.threads = parse_threads(t)?;
    }
    cfg.validate()?;
    let cfg = cfg.with_seed_applied();
    match cli.command {
        Command::Approx => bench::cmd_approx(&cfg),
        Command::Denoise => bench::cmd_denoise(&cfg),
        Command::Scale => bench::cmd_scale(&cfg),
        Command::Svdcmp => bench::cmd_svdcmp(&cfg),
        Command::Demo => bench::cmd_demo(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
