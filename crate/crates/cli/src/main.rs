//! `depthnet` command-line front end.

mod bench;
mod complete;
mod count;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use depthnet::verify::{run_all, VerifyConfig};
use depthnet::QFormat;

#[derive(Parser, Debug)]
#[command(name = "depthnet", version, about = "LiDAR depth completion: DT coarse fill plus residual CNN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Complete one scan (or live frames) into a dense 16-bit PGM depth map.
    Complete(complete::CompleteArgs),
    /// Run the kernel and distance-transform self-checks.
    Verify(VerifyArgs),
    /// Print parameter and operation counts.
    Count(count::CountArgs),
    /// Time the full pipeline over several frames.
    Bench(bench::BenchArgs),
}

/// Network and arithmetic options shared by `complete` and `bench`.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Weight file; without it weights are randomly initialized from --seed.
    #[arg(long, value_name = "PATH")]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Depthwise-separable network.
    #[arg(long)]
    ds: bool,
    /// Fixed-point inference.
    #[arg(long)]
    fixed: bool,
    /// Feature format for --fixed, as TOTAL:FRAC.
    #[arg(long, value_name = "TOTAL:FRAC", default_value = "16:8", value_parser = parse_qformat)]
    qf: QFormat,
    /// Residual and input normalization scale in millimeters.
    #[arg(long, value_name = "MM", default_value_t = depthnet::preprocess::DEFAULT_SCALE_MM)]
    scale: f64,
    /// Channel partition for tiled execution.
    #[arg(long, value_name = "N", default_value_t = 32)]
    tile: usize,
}

fn parse_qformat(s: &str) -> Result<QFormat, String> {
    s.parse().map_err(|e: depthnet::Error| e.to_string())
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    /// Perturb the reference deconvolution; verification must then fail.
    #[arg(long)]
    inject_fault: bool,
}

fn verify(args: &VerifyArgs) -> anyhow::Result<bool> {
    let cfg = VerifyConfig {
        seed: args.seed,
        cases: args.cases,
        inject_fault: args.inject_fault,
    };
    let suites = run_all(&cfg);
    for s in &suites {
        let status = if s.passed() { "PASS" } else { "FAIL" };
        print!("{status} {:<22} cases={} failures={}", s.name, s.cases, s.failures);
        if let Some(f) = &s.first_failure {
            print!(" first={f}");
        }
        println!();
    }
    Ok(suites.iter().all(|s| s.passed()))
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("DEPTHNET_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("DEPTHNET_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

/// Exit status 2 for bad or unreadable inputs, 1 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    use depthnet::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(
            E::Io { .. }
            | E::Input(_)
            | E::Format(_)
            | E::Calibration(_)
            | E::Truncated { .. }
            | E::BadBlockFlag { .. }
            | E::Weights(_)
            | E::Bind { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Complete(a) => complete::run(a).map(|()| true),
        Command::Verify(a) => verify(a),
        Command::Count(a) => count::run(a).map(|()| true),
        Command::Bench(a) => bench::run(a).map(|()| true),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
