use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "stochmargin", version, about = "Voltage stability margins under stochastic load fluctuations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the base-case power flow of a network case.
    Powerflow(PowerflowArgs),
    /// Simulate one realization and write its trajectory.
    Run(RunArgs),
    /// Monte Carlo batch: margin samples, statistics and histogram.
    Mc(McArgs),
    /// One Monte Carlo batch per value of sigma or the ramp interval.
    Sweep(SweepArgs),
    /// Parse, solve the initial equilibrium and take a few dry-run steps.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RampModeArg {
    Discrete,
    Continuous,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (created if absent).
    #[arg(long, env = "STOCHMARGIN_OUT", default_value = "stochmargin-out")]
    pub out: PathBuf,
}

/// Experiment definition: files plus overrides, which take precedence over
/// the scenario file.
#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Case file, or a bundled case name (ieee14, two_bus). Defaults to the
    /// scenario's `case` entry, then ieee14.
    #[arg(long)]
    pub case: Option<String>,
    /// Scenario file, or a bundled scenario name (default, table1, table2).
    #[arg(long)]
    pub scenario: Option<String>,
    /// Noise intensity.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Seconds between load increments.
    #[arg(long)]
    pub interval: Option<f64>,
    /// Stepped or linear load growth.
    #[arg(long, value_enum)]
    pub ramp_mode: Option<RampModeArg>,
    /// Number of Monte Carlo runs.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integration step (s).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulated time limit (s).
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PowerflowArgs {
    /// Case file or bundled case name.
    #[arg(long, default_value = "ieee14")]
    pub case: String,
    /// Convert PV buses to fixed reactive output at their limits.
    #[arg(long)]
    pub q_limits: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Realization index (selects the random stream).
    #[arg(long, default_value_t = 0)]
    pub run_index: u64,
    /// Record every k-th step.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trace_stride: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Histogram bin count.
    #[arg(long, default_value_t = stochmargin::mc::DEFAULT_BINS, value_parser = positive_count)]
    pub bins: usize,
    /// Confidence level of the reported interval.
    #[arg(long, default_value_t = stochmargin::mc::DEFAULT_CONFIDENCE)]
    pub confidence: f64,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[command(flatten)]
    pub batch: BatchArgs,
    /// Also write the 5/50/95% voltage envelope of this bus.
    #[arg(long)]
    pub envelope_bus: Option<u32>,
    /// Trace stride for the envelope.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trace_stride: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[command(flatten)]
    pub batch: BatchArgs,
    /// `sigma=v1,v2,...` or `interval=v1,v2,...`; defaults to the
    /// scenario's [sweep] table.
    #[arg(long)]
    pub axis: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
}

fn positive_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}
