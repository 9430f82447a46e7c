//! One Monte Carlo batch per value of a scenario parameter.

use crate::mc::harness::{compute_statistics, run_monte_carlo, McOptions, McReport, McResult};
use crate::mc::histogram::Binning;
use crate::rng::sweep_seed;
use crate::error::{ScenarioError, SimError, StatsError};
use crate::scenario::{Scenario, SweepAxis};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub scenario: Scenario,
    pub result: McResult,
    pub report: Result<McReport, StatsError>,
}

#[derive(Debug, thiserror::Error)]
#[error("{axis} = {value}: {source}")]
pub struct SweepError {
    pub axis: &'static str,
    pub value: f64,
    #[source]
    pub source: SimError,
}

/// Copy of `base` with the axis set to `value`.
pub fn sweep_scenario(base: &Scenario, axis: SweepAxis, value: f64) -> Result<Scenario, ScenarioError> {
    let mut sc = base.clone();
    match axis {
        SweepAxis::Sigma => sc.sigma = value,
        SweepAxis::Interval => {
            sc.ramp
                .as_mut()
                .ok_or(ScenarioError::Missing("ramp"))?
                .interval = value;
        }
    }
    sc.validate()?;
    Ok(sc)
}

/// Run every point; point `k` uses master seed `base.master_seed ⊕ k`.
pub fn run_sweep(
    base: &Scenario,
    axis: SweepAxis,
    values: &[f64],
    opts: &McOptions,
    confidence: f64,
    binning: Binning,
) -> Result<Vec<SweepPoint>, SweepError> {
    let label = |value: f64, source: SimError| SweepError {
        axis: axis.name(),
        value,
        source,
    };
    if values.is_empty() {
        return Err(label(
            f64::NAN,
            SimError::Scenario(ScenarioError::invalid("sweep.values", "must not be empty")),
        ));
    }
    values
        .iter()
        .enumerate()
        .map(|(k, &value)| {
            let mut sc = sweep_scenario(base, axis, value).map_err(|e| label(value, e.into()))?;
            sc.master_seed = sweep_seed(base.master_seed, k);
            let result = run_monte_carlo(&sc, opts).map_err(|e| label(value, e))?;
            let report = compute_statistics(&result.samples, confidence, binning);
            Ok(SweepPoint {
                value,
                scenario: sc,
                result,
                report,
            })
        })
        .collect()
}
