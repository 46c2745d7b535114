//! `affinelab`: count rational points near affine subspaces, estimate
//! exponents, and check bounds, sieve and covering statements.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 enumeration budget exceeded.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::Overrides;

#[derive(Parser, Debug)]
#[command(name = "affinelab", version, about = "Rational points near affine subspaces: counts, exponents and bound checks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Global {
    /// TOML file with precision, guard_bits, budget, workers, seed, report, csv.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Working precision in bits (default from AFFINELAB_PRECISION, else 192).
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Guard band is 2^-guard_bits.
    #[arg(long, global = true)]
    guard_bits: Option<u32>,
    /// Maximum number of points one enumeration may visit.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// CSV side file (hits, records, grid cells, instances or sweep rows).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// N_A(Q, delta, theta) by exhaustive enumeration.
    Count(CountArgs),
    /// Best approximation records and exponent estimates.
    Exponent(ExponentArgs),
    /// Fejér majorant, large sieve, dual large sieve or separation checks.
    SieveCheck(SieveArgs),
    /// Measured counts against a theoretical bound over a (Q, delta) grid.
    VerifyBounds(BoundsArgs),
    /// Minkowski witnesses or ubiquity coverage.
    Covering(CoveringArgs),
    /// Verdicts, ranges and bounds from an exponent profile.
    Classify(ClassifyArgs),
    /// Records of q (log q)^2 ||qx|| ||qy|| on the line y = alpha x + beta.
    MultLine(MultLineArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct CountArgs {
    /// Matrix file (affinelab-matrix/1 TOML).
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long = "Q", short = 'Q')]
    pub q: u64,
    #[arg(long)]
    pub delta: String,
    /// Comma separated theta = (theta1, theta2) of length n; zero when absent.
    #[arg(long)]
    pub theta: Option<String>,
    /// Write the certain hits to the CSV file.
    #[arg(long)]
    pub hits: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct ExponentArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub qmax: u64,
    #[arg(long, default_value_t = affinelab::exponents::DEFAULT_CUTOFF)]
    pub cutoff: u64,
    /// Use the transpose (sigma instead of omega).
    #[arg(long)]
    pub transpose: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SieveMode {
    Fejer,
    Ls,
    DualLs,
    Separation,
}

#[derive(Args, Debug, Serialize)]
pub struct SieveArgs {
    #[arg(long, value_enum)]
    pub mode: SieveMode,
    /// Number of random instances (ls, dual-ls).
    #[arg(long, default_value_t = 100)]
    pub instances: u64,
    /// Radius for the Fejér check.
    #[arg(long, default_value = "1/4")]
    pub delta: String,
    /// Number of uniform grid points for the Fejér check.
    #[arg(long, default_value_t = 10_000)]
    pub grid: u64,
    /// Matrix file for the separation mode (its full matrix is used).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// J for the separation mode.
    #[arg(long, default_value_t = 10)]
    pub j: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundsArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// phi-a, phi-b, omega-a1, omega-a2, dual or asymp-ratio.
    #[arg(long)]
    pub kind: String,
    /// Q values: `lo..hi` for 2^lo..2^hi, or a comma list.
    #[arg(long, default_value = "4..8")]
    pub qgrid: String,
    /// delta values: `lo..hi` for 2^-lo..2^-hi, or a comma list of scalars.
    #[arg(long, default_value = "1..6")]
    pub dgrid: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long = "c0-qmax", default_value_t = 10_000)]
    pub c0_qmax: u64,
    /// Shape of phi as `c,b,b_log` for c t^-b (log t)^-b_log.
    #[arg(long, default_value = "1,1,0")]
    pub phi: String,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub theta: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CoveringMode {
    Witness,
    Coverage,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    Ubiquity,
    Minkowski,
}

#[derive(Args, Debug, Serialize)]
pub struct CoveringArgs {
    #[arg(long, value_enum)]
    pub mode: CoveringMode,
    #[arg(long)]
    pub matrix: PathBuf,
    /// One Q, a comma list, or `lo..hi` for a dyadic sweep (coverage).
    #[arg(long = "Q", short = 'Q')]
    pub q: String,
    /// delta as a scalar, or `Q^e` to use Q^e for each swept Q.
    #[arg(long)]
    pub delta: String,
    /// Comma separated point x in [0,1]^d (witness mode).
    #[arg(long)]
    pub x: Option<String>,
    /// A scalar in (0, 1), or `proof` for the constant from the proof.
    #[arg(long, default_value = "proof")]
    pub kappa: String,
    /// exact, grid:N or mc:N (seeded by --seed).
    #[arg(long, default_value = "exact")]
    pub sampler: String,
    #[arg(long, value_enum, default_value = "ubiquity")]
    pub rule: RuleArg,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    /// Profile TOML (d, m, omega, omega_log, omega_prime_block, sigma, nu, tol, source).
    #[arg(long, conflicts_with = "matrix")]
    pub profile: Option<PathBuf>,
    /// Estimate the exponents from this matrix instead.
    #[arg(long, requires = "qmax")]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub qmax: Option<u64>,
    #[arg(long, default_value_t = affinelab::exponents::DEFAULT_CUTOFF)]
    pub cutoff: u64,
    /// Boundary tolerance for estimated exponents.
    #[arg(long, default_value = "1/20")]
    pub tol: String,
}

#[derive(Args, Debug, Serialize)]
pub struct MultLineArgs {
    #[arg(long)]
    pub alpha: String,
    #[arg(long)]
    pub beta: String,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub qmax: u64,
    /// Also classify the line from this value of omega(alpha; beta).
    #[arg(long)]
    pub omega: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let g = cli.global.clone();
    let flags = Overrides {
        precision: g.precision,
        guard_bits: g.guard_bits,
        budget: g.budget,
        workers: g.workers,
        seed: g.seed,
        report: g.report,
        csv: g.csv,
    };
    let code = commands::run(cli.command, flags, g.config.as_deref());
    ExitCode::from(code)
}
