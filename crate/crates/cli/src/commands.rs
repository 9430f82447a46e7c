use std::io::Write as _;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use stochmargin::engine::{write_trace_csv, Engine, TraceSpec};
use stochmargin::mc::output::{
    summary_json, write_comparison_csv, write_envelope_csv, write_histogram_csv, write_samples_csv,
};
use stochmargin::mc::{
    build_envelope, compute_statistics, default_workers, run_monte_carlo, run_sweep, trace_grid, Binning, McOptions,
};
use stochmargin::network::{network_injections, scheduled_injections, solve_power_flow, PowerFlowOptions};
use stochmargin::numfmt::fmt_g17;
use stochmargin::rng::{run_stream, sweep_seed};
use stochmargin::scenario::{emit_scenario, Scenario, SweepAxis};

use crate::args::{BatchArgs, McArgs, PowerflowArgs, RunArgs, SweepArgs, ValidateArgs};
use crate::files::{load_scenario, read_case, Manifest, OutDir};
use crate::UsageError;

// Write to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

pub fn powerflow(a: &PowerflowArgs) -> Result<()> {
    let (case, label) = read_case(&a.case, None)?;
    let opts = PowerFlowOptions {
        enforce_q_limits: a.q_limits,
        ..Default::default()
    };
    let sol = solve_power_flow(&case, &scheduled_injections(&case), &opts).context("power flow")?;
    let (pc, qc) = network_injections(&sol.state, &stochmargin::network::build_admittance(&case));

    let mut csv = String::from("bus,v,theta_deg,p_gen,q_gen,p_load,q_load\n");
    say!("case {label}: converged in {} iterations, max mismatch {:.3e} pu", sol.iterations, sol.mismatch);
    say!("{:>5} {:>9} {:>10} {:>9} {:>9}", "bus", "V (pu)", "theta (deg)", "Pg (pu)", "Qg (pu)");
    for (i, b) in case.buses.iter().enumerate() {
        let (pl, ql) = case.static_load_at(b.id);
        let (pg, qg) = (pc[i] + pl, qc[i] + ql);
        let deg = sol.state.theta[i].to_degrees();
        say!("{:>5} {:>9.5} {:>10.4} {:>9.4} {:>9.4}", b.id, sol.state.v[i], deg, pg, qg);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.id,
            fmt_g17(sol.state.v[i]),
            fmt_g17(deg),
            fmt_g17(pg),
            fmt_g17(qg),
            fmt_g17(pl),
            fmt_g17(ql)
        ));
    }
    let out = OutDir::create(&a.out.out)?;
    out.write("powerflow.csv", csv.as_bytes())?;
    let mut m = Manifest::new("powerflow");
    m.case = Some(&label);
    m.write(&out)?;
    Ok(())
}

#[derive(Serialize)]
struct OutcomeJson {
    run_index: u64,
    margin: f64,
    lambda: f64,
    collapse_time: f64,
    reason: &'static str,
    censored: bool,
    steps: u64,
    sigma_min_initial: f64,
    sigma_min_final: f64,
    fingerprint: String,
}

fn write_scenario(out: &OutDir, sc: &Scenario) -> Result<()> {
    out.write("scenario.toml", emit_scenario(sc).as_bytes())?;
    Ok(())
}

pub fn run(a: &RunArgs) -> Result<()> {
    let sc = load_scenario(&a.exp)?;
    let engine = Engine::new(&sc)?;
    let spec = TraceSpec {
        stride: a.trace_stride,
        buses: None,
    };
    let o = engine.run(a.run_index, Some(&spec))?;
    let out = OutDir::create(&a.out.out)?;
    let trace = o.trace.as_ref().expect("trace requested");
    out.write_with("trace.csv", |w| write_trace_csv(trace, w))?;
    let json = OutcomeJson {
        run_index: o.run_index,
        margin: o.margin,
        lambda: o.lambda,
        collapse_time: o.collapse_time,
        reason: o.reason.as_str(),
        censored: o.censored,
        steps: o.steps,
        sigma_min_initial: o.sigma_min_initial,
        sigma_min_final: o.sigma_min_final,
        fingerprint: sc.fingerprint(),
    };
    let mut text = serde_json::to_string_pretty(&json)?;
    text.push('\n');
    out.write("outcome.json", text.as_bytes())?;
    write_scenario(&out, &sc)?;
    Manifest::new("run").with_scenario(&sc).write(&out)?;
    say!(
        "run {}: margin {:.6} pu (lambda {:.4}) at t = {:.2} s, {}",
        o.run_index,
        o.margin,
        o.lambda,
        o.collapse_time,
        o.reason.as_str()
    );
    Ok(())
}

fn workers(b: &BatchArgs) -> usize {
    match b.workers {
        Some(0) | None => default_workers(),
        Some(w) => w,
    }
}

fn progress_printer(total: usize) -> impl Fn(usize) + Sync {
    let step = (total / 10).max(1);
    move |done| {
        if done % step == 0 || done == total {
            eprint!("\r{done}/{total} runs");
            if done == total {
                eprintln!();
            }
            let _ = std::io::stderr().flush();
        }
    }
}

pub fn mc(a: &McArgs) -> Result<()> {
    let sc = load_scenario(&a.exp)?;
    let w = workers(&a.batch);
    let progress = progress_printer(sc.n_runs);
    let opts = McOptions {
        workers: w,
        trace: a.envelope_bus.map(|bus| TraceSpec {
            stride: a.trace_stride,
            buses: Some(vec![bus]),
        }),
        progress: Some(&progress),
    };
    if let Some(bus) = a.envelope_bus {
        if sc.case.bus(bus).is_none() {
            bail!("--envelope-bus {bus} is not in the case");
        }
    }
    let result = run_monte_carlo(&sc, &opts)?;
    let out = OutDir::create(&a.out.out)?;
    out.write_with("samples.csv", |w| write_samples_csv(&result.samples, w))?;
    write_scenario(&out, &sc)?;
    let mut manifest = Manifest::new("mc").with_scenario(&sc);
    manifest.workers = Some(w);
    manifest.write(&out)?;
    if let Some(bus) = a.envelope_bus {
        let traces: Vec<_> = result.traces.iter().flatten().collect();
        let env = build_envelope(&traces, bus, &trace_grid(&traces));
        out.write_with("envelope.csv", |w| write_envelope_csv(&env, w))?;
    }
    let report = compute_statistics(&result.samples, a.batch.confidence, Binning::Count(a.batch.bins))
        .context("statistics")?;
    out.write("summary.json", summary_json(&report).as_bytes())?;
    out.write_with("histogram.csv", |w| write_histogram_csv(&report.histogram, w))?;
    let s = &report.stats;
    say!(
        "E = {:.4} pu, Var = {:.4e}, {:.0}% CI [{:.4}, {:.4}] (d = {:.5}), n = {}, censored = {}, failed = {}",
        s.mean,
        s.variance,
        100.0 * s.confidence,
        s.ci_low,
        s.ci_high,
        s.d,
        s.n,
        report.n_censored,
        report.n_failed
    );
    Ok(())
}

fn parse_axis(text: &str) -> Result<(SweepAxis, Vec<f64>)> {
    let usage = || UsageError(format!("--axis expects sigma=v1,v2,... or interval=v1,v2,..., got `{text}`"));
    let (name, list) = text.split_once('=').ok_or_else(usage)?;
    let axis = match name.trim() {
        "sigma" => SweepAxis::Sigma,
        "interval" => SweepAxis::Interval,
        _ => return Err(usage().into()),
    };
    let values = list
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| usage())?;
    if values.is_empty() {
        return Err(usage().into());
    }
    Ok((axis, values))
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let sc = load_scenario(&a.exp)?;
    let (axis, values) = match (&a.axis, &sc.sweep) {
        (Some(t), _) => parse_axis(t)?,
        (None, Some(s)) => (s.axis, s.values.clone()),
        (None, None) => {
            return Err(UsageError("no --axis given and the scenario has no [sweep] table".into()).into())
        }
    };
    let w = workers(&a.batch);
    let opts = McOptions {
        workers: w,
        ..Default::default()
    };
    let points = run_sweep(&sc, axis, &values, &opts, a.batch.confidence, Binning::Count(a.batch.bins))?;
    let out = OutDir::create(&a.out.out)?;
    for p in &points {
        let dir = out.subdir(&format!("{}_{}", axis.name(), p.value))?;
        dir.write_with("samples.csv", |w| write_samples_csv(&p.result.samples, w))?;
        write_scenario(&dir, &p.scenario)?;
        if let Ok(r) = &p.report {
            dir.write("summary.json", summary_json(r).as_bytes())?;
            dir.write_with("histogram.csv", |w| write_histogram_csv(&r.histogram, w))?;
        }
    }
    out.write_with("comparison.csv", |w| write_comparison_csv(axis.name(), &points, w))?;
    write_scenario(&out, &sc)?;
    let mut manifest = Manifest::new("sweep").with_scenario(&sc);
    manifest.workers = Some(w);
    manifest.point_seeds = (0..values.len()).map(|k| sweep_seed(sc.master_seed, k)).collect();
    manifest.write(&out)?;

    say!("{:>10} {:>10} {:>12} {:>10} {:>6}", axis.name(), "E (pu)", "Var", "d", "n");
    for p in &points {
        match &p.report {
            Ok(r) => say!(
                "{:>10} {:>10.4} {:>12.4e} {:>10.5} {:>6}",
                p.value, r.stats.mean, r.stats.variance, r.stats.d, r.stats.n
            ),
            Err(e) => say!("{:>10} {e}", p.value),
        }
    }
    if let Some(p) = points.iter().find(|p| p.report.is_err()) {
        bail!("{} = {}: no statistics", axis.name(), p.value);
    }
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> Result<()> {
    const DRY_RUN_STEPS: u64 = 10;
    let sc = load_scenario(&a.exp)?;
    let case = &sc.case;
    say!(
        "case {}: {} buses, {} branches",
        sc.case_ref.as_deref().unwrap_or(&case.name),
        case.n_buses(),
        case.branches.len()
    );
    let engine = Engine::new(&sc)?;
    let mut rng = run_stream(sc.master_seed, 0);
    let init = engine.initialize(&mut rng)?;
    let g = engine.residual(&init.state).amax();
    let f = engine.differential_residual(&init.state, &init.setpoints);
    say!("initial power flow mismatch: {g:.3e} pu");
    say!("equilibrium residuals: max |g| = {g:.3e}, max |dx/dt| = {f:.3e}");
    let mut st = init.state.clone();
    let mut stepper = engine.stepper();
    for _ in 0..DRY_RUN_STEPS.min(sc.n_steps()) {
        stepper
            .step(&mut st, &init.setpoints, &mut rng)
            .with_context(|| format!("dry-run step {}", st.step + 1))?;
    }
    say!(
        "dry run: {} steps to t = {} s, lambda = {}, min V = {:.5}",
        st.step,
        st.t,
        st.lambda,
        st.y.min_voltage()
    );
    say!("resolved scenario:");
    say_raw!("{}", emit_scenario(&sc));
    if g > sc.collapse_tol.newton_tol {
        bail!("initial mismatch {g:.3e} exceeds the Newton tolerance");
    }
    say!("OK");
    Ok(())
}
