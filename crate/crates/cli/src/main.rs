//! `brwire`: simulate branching random walks with immigration in a random
//! environment and verify their limit theorems.
//!
//! Exit status: 0 on pass, 1 on a failed check or a runtime error
//! (including the particle cap), 2 on a configuration error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use brwire_core::config::RunConfig;

#[derive(Parser)]
#[command(name = "brwire", version, about = "BRWIRE simulation and verification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (TOML)
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: `out` in the config, else ./out)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override every replica count in the config
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long)]
    pub workers: Option<usize>,
    /// Print nothing on success
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and write per-generation summaries
    Simulate(Common),
    /// Tabulate Λ, Λ̄, Λ̃ and the Legendre transform
    Rates(Common),
    /// Central limit theorem
    VerifyClt(Common),
    /// Moderate deviation principle
    VerifyMdp(Common),
    /// Convergence of the free energy
    VerifyFreeEnergy(Common),
    /// Large deviation principle (case I)
    VerifyLdp(Common),
    /// L^p convergence rate of W_n(t)
    VerifyLpRate(Common),
    /// Martingale and sub-martingale means
    VerifyMartingale(Common),
    /// Exact founder decomposition of the Laplace transform
    VerifyDecomposition(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Simulate(c) => ("simulate", c),
            Command::Rates(c) => ("rates", c),
            Command::VerifyClt(c) => ("verify-clt", c),
            Command::VerifyMdp(c) => ("verify-mdp", c),
            Command::VerifyFreeEnergy(c) => ("verify-free-energy", c),
            Command::VerifyLdp(c) => ("verify-ldp", c),
            Command::VerifyLpRate(c) => ("verify-lp-rate", c),
            Command::VerifyMartingale(c) => ("verify-martingale", c),
            Command::VerifyDecomposition(c) => ("verify-decomposition", c),
        }
    }
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = cli.command.parts();

    let mut config = match RunConfig::from_path(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = config.apply_overrides(common.seed, common.replicas) {
        eprintln!("config error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let workers = common.workers.or(config.workers).filter(|&w| w > 0);
    if let Some(w) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("cannot start {w} workers: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    match commands::run(name, &config, &common.config, &out, common.quiet) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(commands::CommandError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(commands::CommandError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
