//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "uavnav",
    version,
    about = "Multi-UAV depth-camera navigation: train, evaluate, inspect"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a shared SAC+AE policy on random scenarios.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a scripted baseline.
    Eval(EvalArgs),
    /// Render one UAV's depth image to a 16-bit PGM.
    Render(RenderArgs),
    /// Describe a checkpoint directory.
    Info(InfoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-size defaults.
    Default,
    /// Small run that finishes in minutes on a CPU.
    Smoke,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory; defaults to `<out-root>/<command>-seed<seed>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = "UAVNAV_OUT", default_value = "runs")]
    pub out_root: PathBuf,
}

impl OutputArgs {
    pub fn resolve(&self, command: &str, seed: u64) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| self.out_root.join(format!("{command}-seed{seed}")))
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML config; keys not given keep the preset's values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Starting point when no config file is given.
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub preset: Preset,
    /// `section.key=value` override, applied after the config file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    pub overrides: Vec<String>,
    /// Master seed; overrides the config's.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Suppress per-episode progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioKind {
    Random,
    Circle,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_enum, default_value_t = ScenarioKind::Random)]
    pub scenario: ScenarioKind,
    /// Number of UAVs.
    #[arg(long = "n-uavs", short = 'n', default_value_t = 10)]
    pub n_uavs: usize,
    /// UAVs per cubic meter (random scenarios).
    #[arg(long, default_value_t = 0.06, allow_negative_numbers = true)]
    pub density: f64,
    /// Circle radius in meters (circle scenarios).
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub radius: f64,
    /// Circle altitude in meters (circle scenarios).
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub altitude: f64,
    /// Scenario seed; evaluation episode `j` uses `seed + j`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Turn toward the goal, then fly straight at it.
    Straight,
    /// Stay in place.
    Hover,
    /// Uniformly random commands.
    Uniform,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
    /// Step limit per episode.
    #[arg(long = "t-max", default_value_t = 500)]
    pub t_max: u64,
    /// Sample actions instead of using the policy mean.
    #[arg(long)]
    pub stochastic: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Index of the observing UAV.
    #[arg(long, default_value_t = 0)]
    pub uav: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Destination PGM file.
    #[arg(long, default_value = "depth.pgm")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    /// Checkpoint directory written by `train`.
    pub checkpoint: PathBuf,
}
