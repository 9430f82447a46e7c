//! Parallel execution of independent runs.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::engine::{CollapseReason, Engine, Trace, TraceSpec};
use crate::error::{SimError, StatsError};
use crate::mc::histogram::{build_histogram, Binning, Histogram};
use crate::mc::stats::{describe, Statistics};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub enum SampleStatus {
    Collapsed(CollapseReason),
    /// The run panicked or could not be initialized.
    Failed(String),
}

impl SampleStatus {
    pub fn label(&self) -> &str {
        match self {
            SampleStatus::Collapsed(r) => r.as_str(),
            SampleStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSample {
    pub run_index: u64,
    /// NaN for failed runs.
    pub margin: f64,
    pub collapse_time: f64,
    pub status: SampleStatus,
}

impl MarginSample {
    pub fn is_censored(&self) -> bool {
        self.status == SampleStatus::Collapsed(CollapseReason::Horizon)
    }

    /// Contributes to the statistics.
    pub fn is_collapse(&self) -> bool {
        matches!(self.status, SampleStatus::Collapsed(r) if r != CollapseReason::Horizon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSampleSet {
    pub fingerprint: String,
    /// One entry per run, ordered by run index.
    pub samples: Vec<MarginSample>,
}

impl MarginSampleSet {
    /// Margins of runs that collapsed before the horizon.
    pub fn margins(&self) -> Vec<f64> {
        self.samples.iter().filter(|s| s.is_collapse()).map(|s| s.margin).collect()
    }

    pub fn n_censored(&self) -> usize {
        self.samples.iter().filter(|s| s.is_censored()).count()
    }

    pub fn n_failed(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| matches!(s.status, SampleStatus::Failed(_)))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub fingerprint: String,
    pub stats: Statistics,
    pub histogram: Histogram,
    pub n_censored: usize,
    pub n_failed: usize,
}

/// Statistics over the collapsed runs; censored and failed runs are
/// excluded and counted.
pub fn compute_statistics(
    set: &MarginSampleSet,
    confidence: f64,
    binning: Binning,
) -> Result<McReport, StatsError> {
    let margins = set.margins();
    if margins.is_empty() {
        return Err(StatsError::AllCensored);
    }
    let stats = describe(&margins, confidence)?;
    Ok(McReport {
        fingerprint: set.fingerprint.clone(),
        stats,
        histogram: build_histogram(&margins, binning),
        n_censored: set.n_censored(),
        n_failed: set.n_failed(),
    })
}

#[derive(Default)]
pub struct McOptions<'p> {
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    pub trace: Option<TraceSpec>,
    /// Called with the number of finished runs after each run.
    pub progress: Option<&'p (dyn Fn(usize) + Sync)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub samples: MarginSampleSet,
    /// Per-run trajectories when tracing was requested (`None` for failed
    /// runs).
    pub traces: Vec<Option<Trace>>,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

/// Execute runs `0..n_runs` of `scenario` on a pool of workers.
pub fn run_monte_carlo(scenario: &Scenario, opts: &McOptions) -> Result<McResult, SimError> {
    let engine = Engine::new(scenario)?;
    let workers = if opts.workers == 0 { default_workers() } else { opts.workers };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool construction");
    let done = AtomicUsize::new(0);
    let results: Vec<(MarginSample, Option<Trace>)> = pool.install(|| {
        (0..scenario.n_runs as u64)
            .into_par_iter()
            .map(|run_index| {
                let outcome = catch_unwind(AssertUnwindSafe(|| engine.run(run_index, opts.trace.as_ref())));
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(cb) = opts.progress {
                    cb(n);
                }
                let failed = |msg: String| {
                    (
                        MarginSample {
                            run_index,
                            margin: f64::NAN,
                            collapse_time: f64::NAN,
                            status: SampleStatus::Failed(msg),
                        },
                        None,
                    )
                };
                match outcome {
                    Ok(Ok(o)) => (
                        MarginSample {
                            run_index,
                            margin: o.margin,
                            collapse_time: o.collapse_time,
                            status: SampleStatus::Collapsed(o.reason),
                        },
                        o.trace,
                    ),
                    Ok(Err(e)) => failed(e.to_string()),
                    Err(p) => failed(format!("panic: {}", panic_message(p.as_ref()))),
                }
            })
            .collect()
    });
    let (samples, traces) = results.into_iter().unzip();
    Ok(McResult {
        samples: MarginSampleSet {
            fingerprint: scenario.fingerprint(),
            samples,
        },
        traces,
    })
}
