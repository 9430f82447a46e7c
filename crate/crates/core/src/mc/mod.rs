//! Monte Carlo experiments: batches of independent runs, their statistics,
//! histograms, voltage envelopes and parameter sweeps.

pub mod envelope;
pub mod harness;
pub mod histogram;
pub mod output;
pub mod stats;
pub mod sweep;

pub use envelope::{build_envelope, trace_grid, EnvelopeReport, EnvelopeRow};
pub use harness::{
    compute_statistics, default_workers, run_monte_carlo, MarginSample, MarginSampleSet, McOptions, McReport,
    McResult, SampleStatus,
};
pub use histogram::{build_histogram, Binning, Histogram, DEFAULT_BINS};
pub use stats::{ci_half_width, describe, quantile_sorted, z_value, Statistics};
pub use sweep::{run_sweep, sweep_scenario, SweepError, SweepPoint};

/// Confidence level of the reported intervals.
pub const DEFAULT_CONFIDENCE: f64 = 0.90;
