//! Quantile envelopes of bus-voltage trajectories across runs.

use crate::engine::Trace;
use crate::mc::stats::quantile_sorted;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeRow {
    pub t: f64,
    /// Runs still alive at `t`.
    pub n: usize,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl EnvelopeRow {
    pub fn width(&self) -> f64 {
        self.q95 - self.q05
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub bus: u32,
    pub rows: Vec<EnvelopeRow>,
}

impl EnvelopeReport {
    /// Row whose time is closest to `t`.
    pub fn at(&self, t: f64) -> Option<&EnvelopeRow> {
        self.rows
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

/// Value of `bus` in `trace` at the last recorded time not after `t`, or
/// `None` if the run ended before `t`.
fn value_at(trace: &Trace, col: usize, t: f64) -> Option<f64> {
    let tol = 1e-9 * t.abs().max(1.0);
    let last = trace.samples.last()?;
    if last.t + tol < t {
        return None;
    }
    let k = trace.samples.partition_point(|s| s.t <= t + tol);
    (k > 0).then(|| trace.samples[k - 1].v[col])
}

/// 5/50/95% quantiles of the voltage at `bus` over the runs alive at each
/// grid time. Grid times where no run is alive are skipped.
///
/// Panics if a trace does not record `bus`.
pub fn build_envelope(traces: &[&Trace], bus: u32, grid: &[f64]) -> EnvelopeReport {
    let cols: Vec<usize> = traces
        .iter()
        .map(|tr| {
            tr.bus_ids
                .iter()
                .position(|&b| b == bus)
                .unwrap_or_else(|| panic!("trace does not record bus {bus}"))
        })
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    let mut vals = Vec::with_capacity(traces.len());
    for &t in grid {
        vals.clear();
        vals.extend(traces.iter().zip(&cols).filter_map(|(tr, &c)| value_at(tr, c, t)));
        if vals.is_empty() {
            continue;
        }
        vals.sort_by(f64::total_cmp);
        rows.push(EnvelopeRow {
            t,
            n: vals.len(),
            q05: quantile_sorted(&vals, 0.05),
            q50: quantile_sorted(&vals, 0.50),
            q95: quantile_sorted(&vals, 0.95),
        });
    }
    EnvelopeReport { bus, rows }
}

/// Every recorded time of the longest trace.
pub fn trace_grid(traces: &[&Trace]) -> Vec<f64> {
    traces
        .iter()
        .max_by_key(|t| t.samples.len())
        .map(|t| t.samples.iter().map(|s| s.t).collect())
        .unwrap_or_default()
}
