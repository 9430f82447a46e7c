//! Text artifacts of Monte Carlo experiments. Every number is written with
//! 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::value::RawValue;

use crate::mc::envelope::EnvelopeReport;
use crate::mc::harness::{McReport, MarginSampleSet};
use crate::mc::histogram::Histogram;
use crate::mc::sweep::SweepPoint;
use crate::numfmt::fmt_g17;

/// `run_index,margin,collapse_time,reason`
pub fn write_samples_csv<W: Write>(set: &MarginSampleSet, mut w: W) -> io::Result<()> {
    writeln!(w, "run_index,margin,collapse_time,reason")?;
    for s in &set.samples {
        writeln!(
            w,
            "{},{},{},{}",
            s.run_index,
            fmt_g17(s.margin),
            fmt_g17(s.collapse_time),
            s.status.label()
        )?;
    }
    Ok(())
}

/// `bin_left,bin_right,count`
pub fn write_histogram_csv<W: Write>(h: &Histogram, mut w: W) -> io::Result<()> {
    writeln!(w, "bin_left,bin_right,count")?;
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{},{}", fmt_g17(h.edges[i]), fmt_g17(h.edges[i + 1]), c)?;
    }
    Ok(())
}

/// `t,q05,q50,q95`
pub fn write_envelope_csv<W: Write>(env: &EnvelopeReport, mut w: W) -> io::Result<()> {
    writeln!(w, "t,q05,q50,q95")?;
    for r in &env.rows {
        writeln!(w, "{},{},{},{}", fmt_g17(r.t), fmt_g17(r.q05), fmt_g17(r.q50), fmt_g17(r.q95))?;
    }
    Ok(())
}

/// JSON number with 17 significant digits; non-finite values become null.
fn num(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { fmt_g17(x) } else { "null".into() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

#[derive(Serialize)]
struct Summary {
    mean: Box<RawValue>,
    variance: Box<RawValue>,
    d: Box<RawValue>,
    ci_low: Box<RawValue>,
    ci_high: Box<RawValue>,
    confidence: Box<RawValue>,
    z: Box<RawValue>,
    median: Box<RawValue>,
    min: Box<RawValue>,
    max: Box<RawValue>,
    n: usize,
    n_censored: usize,
    n_failed: usize,
    fingerprint: String,
}

pub fn summary_json(report: &McReport) -> String {
    let s = &report.stats;
    let summary = Summary {
        mean: num(s.mean),
        variance: num(s.variance),
        d: num(s.d),
        ci_low: num(s.ci_low),
        ci_high: num(s.ci_high),
        confidence: num(s.confidence),
        z: num(s.z),
        median: num(s.median),
        min: num(s.min),
        max: num(s.max),
        n: s.n,
        n_censored: report.n_censored,
        n_failed: report.n_failed,
        fingerprint: report.fingerprint.clone(),
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    text
}

/// One row per sweep point:
/// `axis,value,n,n_censored,n_failed,mean,variance,d,ci_low,ci_high,median`.
/// Points without statistics have empty numeric fields.
pub fn write_comparison_csv<W: Write>(axis: &str, points: &[SweepPoint], mut w: W) -> io::Result<()> {
    writeln!(w, "axis,value,n,n_censored,n_failed,mean,variance,d,ci_low,ci_high,median")?;
    for p in points {
        let set = &p.result.samples;
        match &p.report {
            Ok(r) => {
                let s = &r.stats;
                writeln!(
                    w,
                    "{axis},{},{},{},{},{},{},{},{},{},{}",
                    fmt_g17(p.value),
                    s.n,
                    r.n_censored,
                    r.n_failed,
                    fmt_g17(s.mean),
                    fmt_g17(s.variance),
                    fmt_g17(s.d),
                    fmt_g17(s.ci_low),
                    fmt_g17(s.ci_high),
                    fmt_g17(s.median)
                )?;
            }
            Err(_) => writeln!(
                w,
                "{axis},{},{},{},{},,,,,,",
                fmt_g17(p.value),
                set.margins().len(),
                set.n_censored(),
                set.n_failed()
            )?,
        }
    }
    Ok(())
}
