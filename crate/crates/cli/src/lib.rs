//! Command-line harness: config parsing, subcommands and experiment recipes.

pub mod commands;
pub mod config;
pub mod output;
pub mod recipes;
pub mod svg;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{parse_config, parse_config_str, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(config::ConfigErrors),
    Io(String),
    Numerical(kurograph_core::Error),
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) | Self::Io(_) => 1,
            Self::Numerical(_) => 2,
            Self::Acceptance(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Config(e) => write!(f, "config errors:\n{e}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
            Self::Numerical(e) => write!(f, "numerical failure: {e}"),
            Self::Acceptance(m) => write!(f, "acceptance check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<kurograph_core::Error> for CliError {
    fn from(e: kurograph_core::Error) -> Self {
        Self::Numerical(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<config::ConfigErrors> for CliError {
    fn from(e: config::ConfigErrors) -> Self {
        Self::Config(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "kurograph", version, about = "Kuramoto oscillators on graphon-random graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Leading eigenpairs of the sampled kernel operator.
    Spectrum(SpectrumArgs),
    /// Critical couplings K_c+ and K_c-.
    Critical(CriticalArgs),
    /// Eigenvalue or resonance λ(μ, K) along a K grid.
    Branch(BranchArgs),
    /// The continued Cauchy integral on a grid of λ.
    Dcurve(DcurveArgs),
    /// Finite-N simulation.
    Simulate(SimulateArgs),
    /// Mean-field Galerkin evolution.
    Meanfield(MeanfieldArgs),
    /// Stationary |h| along a K grid.
    Sweep(SweepArgs),
    /// Measured against predicted amplitude for a sweep output.
    BranchCompare(BranchCompareArgs),
    /// Run a named experiment recipe.
    Recipe(RecipeArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct CriticalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct BranchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Eigenvalue μ; defaults to μ_max of the configured kernel.
    #[arg(long)]
    pub mu: Option<f64>,
    /// `a:b:steps`.
    #[arg(long = "k-grid")]
    pub k_grid: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct DcurveArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `re_a:re_b:steps,im_a:im_b:steps`.
    #[arg(long = "lambda-grid", allow_hyphen_values = true)]
    pub lambda_grid: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "K")]
    pub k: f64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "summary-out")]
    pub summary_out: Option<PathBuf>,
    #[arg(long = "snapshot-out")]
    pub snapshot_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeanfieldMode {
    Nonlinear,
    Linearized,
}

#[derive(Debug, Args, Clone)]
pub struct MeanfieldArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "K")]
    pub k: f64,
    #[arg(long = "J")]
    pub j: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long, value_enum, default_value = "nonlinear")]
    pub mode: MeanfieldMode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    FiniteN,
    Galerkin,
}

#[derive(Debug, Args, Clone)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub engine: EngineArg,
    #[arg(long = "k-grid")]
    pub k_grid: String,
    /// Fit window `a:b`; defaults to `[K_c + 0.05, K_c + 0.3]`.
    #[arg(long = "fit-window")]
    pub fit_window: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Final `|h(x)|` per K.
    #[arg(long = "fields-out")]
    pub fields_out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct BranchCompareArgs {
    #[arg(long)]
    pub branch: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecipeName {
    ClassicalKc,
    ErPitchfork,
    SwPitchfork,
    CosineTwisted,
    Landau,
}

#[derive(Debug, Args, Clone)]
pub struct RecipeArgs {
    #[arg(value_enum)]
    pub name: RecipeName,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
}

/// Apply `KUROGRAPH_THREADS` to the global worker pool.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("KUROGRAPH_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("KUROGRAPH_THREADS = '{v}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size worker pool: {e}")))
}

/// Run a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Spectrum(a) => commands::spectrum(&a).map(|_| ()),
        Command::Critical(a) => commands::critical(&a).map(|_| ()),
        Command::Branch(a) => commands::branch(&a).map(|_| ()),
        Command::Dcurve(a) => commands::dcurve(&a),
        Command::Simulate(a) => commands::simulate(&a).map(|_| ()),
        Command::Meanfield(a) => commands::meanfield(&a).map(|_| ()),
        Command::Sweep(a) => commands::sweep(&a).map(|_| ()),
        Command::BranchCompare(a) => commands::branch_compare(&a).map(|_| ()),
        Command::Recipe(a) => recipes::run_recipe(a.name, &a.out_dir).map(|_| ()),
    }
}
