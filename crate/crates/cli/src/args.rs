use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use etdiode_core::verify::StudyMode;
use etdiode_core::Scheme;

#[derive(Debug, Parser)]
#[command(name = "etdiode", version, about = "1D energy-transport diode simulator")]
pub struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transient or steady-state run writing profile snapshots and monitors.
    Simulate(RunArgs),
    /// Steady-state current for a list of biases.
    Sweep(SweepArgs),
    /// Manufactured-solution convergence study.
    Mms(MmsArgs),
    /// Print the scaled parameters for a set of physical inputs.
    Scale(ScaleArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run config or a manifest written by an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the scheme of the config.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Step budget: caps steady-state marches and truncates transient runs.
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated biases in volts, e.g. `0.2,0.6,1.0`.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub biases: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct MmsArgs {
    /// Study settings (JSON); defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Zero amplitude on small grids; every error must vanish.
    #[arg(long)]
    pub smoke: bool,
    /// Step budget per level.
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    /// Physical parameters (JSON). The built-in table is used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    ConsistentTrapezoidal,
    PaperLiteral,
    #[value(hide = true)]
    ImplicitEuler,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::ConsistentTrapezoidal => Scheme::ConsistentTrapezoidal,
            SchemeArg::PaperLiteral => Scheme::PaperLiteral,
            SchemeArg::ImplicitEuler => Scheme::ImplicitEuler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Spatial,
    Temporal,
}

impl From<ModeArg> for StudyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Spatial => StudyMode::Spatial,
            ModeArg::Temporal => StudyMode::Temporal,
        }
    }
}
