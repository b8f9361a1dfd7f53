use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "expander-lab",
    version,
    about = "Self-expanders to mean curvature flow over LOMSE cones"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print lambda, phi0 and the linearization at both equilibria.
    Params(ParamsArgs),
    /// Solve the Dirichlet problem f(R) = eps R and write the profile.
    Solve(SolveArgs),
    /// Run the invariance, residual, envelope and uniqueness checks.
    Verify(VerifyArgs),
    /// Solve over a grid of eps and R values.
    Sweep(SweepArgs),
    /// Re-run the job recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, Args)]
pub struct TypeArgs {
    #[arg(long)]
    pub n: i64,
    #[arg(long)]
    pub p: i64,
    #[arg(long)]
    pub k: i64,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub spec: TypeArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub spec: TypeArgs,
    /// Boundary slope: f(R) = eps R.
    #[arg(long)]
    pub epsilon: f64,
    /// Dirichlet radius R.
    #[arg(long)]
    pub radius: f64,
    /// Write here instead of stdout; a manifest goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Resample the profile at this many points, equally spaced in log r.
    /// Without it every accepted integration step is written.
    #[arg(long)]
    pub points: Option<usize>,
    /// Multiply all integration tolerances by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(
        long,
        required_unless_present = "all_solvable",
        conflicts_with = "all_solvable"
    )]
    pub n: Option<i64>,
    #[arg(long, required_unless_present = "all_solvable")]
    pub p: Option<i64>,
    #[arg(long, required_unless_present = "all_solvable")]
    pub k: Option<i64>,
    /// Verify every solvable type up to --max-n and --max-k.
    #[arg(long)]
    pub all_solvable: bool,
    #[arg(long, default_value_t = 9)]
    pub max_n: u32,
    #[arg(long, default_value_t = 4)]
    pub max_k: u32,
    /// Seed for the random interior trajectories.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub spec: TypeArgs,
    /// Comma-separated boundary slopes.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub epsilon: Vec<f64>,
    /// Comma-separated Dirichlet radii.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub radius: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
