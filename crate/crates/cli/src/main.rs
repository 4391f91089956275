mod commands;
mod config;

use std::process::ExitCode;
use std::time::Instant;

use bdf_core::BdfError;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "bdf", version, about = "Mean-field QED numerics: dressed Dirac operator, vacuum polarization, BDF fixed point, screened Hartree-Fock")]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct Global {
    /// Seed for every stochastic path.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: machine parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Primary output file; stdout when omitted. A manifest is written to <out>.manifest.json.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Flat `key = value` file or a previous manifest; command-line flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<String>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Solve for the dressed free operator; CSV p,g0,g1,E_script plus a JSON sidecar.
    Dress(commands::DressArgs),
    /// Vacuum-polarization functions; CSV k,B,f,F plus JSON {Z3, F_L1_norm, L}.
    Uehling(commands::UehlingArgs),
    /// Charge-renormalization table; CSV alpha,lambda,L,f0,Z3_formula,Z3_quadrature,tol.
    Renorm(commands::RenormArgs),
    /// Banach–Picard iteration; JSON lines per iteration and the final γ in binary form.
    ScfRun(commands::ScfArgs),
    /// Screened nonrelativistic Hartree–Fock; JSON report and orbital CSV.
    Nrhf(commands::NrhfArgs),
    /// Exhaustive odd-word trace check plus random sign-matrix identities.
    FurryCheck(commands::FurryArgs),
    /// Kato, Hardy, Sobolev and exchange inequality checks on random orbitals.
    Inequalities(commands::InequalityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dress(_) => "dress",
            Command::Uehling(_) => "uehling",
            Command::Renorm(_) => "renorm",
            Command::ScfRun(_) => "scf-run",
            Command::Nrhf(_) => "nrhf",
            Command::FurryCheck(_) => "furry-check",
            Command::Inequalities(_) => "inequalities",
        }
    }
}

pub const SUBCOMMANDS: [&str; 7] = ["dress", "uehling", "renorm", "scf-run", "nrhf", "furry-check", "inequalities"];

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let argv = match config::merge_config(&raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    match commands::run(&cli) {
        Ok(()) => {
            if let Err(e) = config::write_manifest(&cli, start.elapsed().as_secs_f64()) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<BdfError>().is_some() || e.downcast_ref::<commands::NumericalFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
