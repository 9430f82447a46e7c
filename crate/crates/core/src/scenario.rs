//! Experiment configuration.
//!
//! Scenarios are TOML documents (see `docs/formats.md`). Parsing resolves
//! every default so that a [`Scenario`] is fully explicit, and
//! [`emit_scenario`] writes all resolved values back out: parsing the emitted
//! text against the same case reproduces the scenario exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::case::{BusKind, NetworkCase};
use crate::error::ScenarioError;
use crate::models::{ErlModel, MachineModel, MachineOrder, OuChannel, OuScheme, RampMode, RampSchedule};

pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_HORIZON: f64 = 3600.0;
pub const DEFAULT_STEP_FRACTION: f64 = 0.02;
pub const DEFAULT_FREQ_HZ: f64 = 60.0;

/// Bundled scenario files, by name.
pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("default", include_str!("../data/ieee14_default.toml")),
    ("table1", include_str!("../data/ieee14_table1.toml")),
    ("table2", include_str!("../data/ieee14_table2.toml")),
];

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    BUNDLED_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Thresholds that decide when a run has collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseSettings {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub v_floor: f64,
    pub singularity_tol: f64,
    /// Steps between minimum-singular-value checks of the algebraic Jacobian.
    pub check_every: usize,
}

impl Default for CollapseSettings {
    fn default() -> Self {
        CollapseSettings {
            newton_tol: 1e-8,
            max_iter: 50,
            v_floor: 0.5,
            singularity_tol: 1e-6,
            check_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErlPlacement {
    pub bus: u32,
    pub model: ErlModel,
    /// The load replaces the static PQ load at its bus.
    pub absorb_static_load: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Sigma,
    Interval,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Sigma => "sigma",
            SweepAxis::Interval => "interval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub case: Arc<NetworkCase>,
    /// Free-form case label carried for provenance (e.g. `ieee14`).
    pub case_ref: Option<String>,
    pub sigma: f64,
    pub ou_params: Vec<OuChannel>,
    pub ou_scheme: OuScheme,
    /// Clamp `p0 + η` and `q0 + η` at zero.
    pub noise_floor: bool,
    pub erl_placements: Vec<ErlPlacement>,
    pub machines: Vec<MachineModel>,
    pub ramp: Option<RampSchedule>,
    pub dt: f64,
    pub horizon: f64,
    pub n_runs: usize,
    pub master_seed: u64,
    pub freq_hz: f64,
    pub enforce_q_limits: bool,
    pub collapse_tol: CollapseSettings,
    pub sweep: Option<SweepSpec>,
}

impl Scenario {
    /// Noise-free scenario with no dynamic devices and default numerics.
    pub fn new(case: Arc<NetworkCase>) -> Self {
        Scenario {
            case,
            case_ref: None,
            sigma: 0.0,
            ou_params: Vec::new(),
            ou_scheme: OuScheme::EulerMaruyama,
            noise_floor: false,
            erl_placements: Vec::new(),
            machines: Vec::new(),
            ramp: None,
            dt: DEFAULT_DT,
            horizon: DEFAULT_HORIZON,
            n_runs: 1000,
            master_seed: 0,
            freq_hz: DEFAULT_FREQ_HZ,
            enforce_q_limits: false,
            collapse_tol: CollapseSettings::default(),
            sweep: None,
        }
    }

    pub fn omega_base(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.freq_hz
    }

    pub fn n_steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    /// Check every invariant, including references into the case.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let case = &*self.case;
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::invalid(field, format!("must be positive, got {v}")))
            }
        };
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(ScenarioError::invalid("sigma", format!("must be non-negative, got {}", self.sigma)));
        }
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        positive("freq_hz", self.freq_hz)?;
        if self.n_runs < 1 {
            return Err(ScenarioError::invalid("n_runs", "must be at least 1"));
        }
        for (k, ch) in self.ou_params.iter().enumerate() {
            positive(&format!("noise[{k}].alpha"), ch.alpha)?;
            positive(&format!("noise[{k}].beta"), ch.beta)?;
        }
        let c = &self.collapse_tol;
        positive("collapse.newton_tol", c.newton_tol)?;
        positive("collapse.singularity_tol", c.singularity_tol)?;
        if c.v_floor.is_nan() || c.v_floor < 0.0 {
            return Err(ScenarioError::invalid("collapse.v_floor", "must be non-negative"));
        }
        if c.max_iter == 0 {
            return Err(ScenarioError::invalid("collapse.max_iter", "must be at least 1"));
        }
        if c.check_every == 0 {
            return Err(ScenarioError::invalid("collapse.check_every", "must be at least 1"));
        }

        let mut erl_buses = Vec::new();
        for (k, e) in self.erl_placements.iter().enumerate() {
            let bus = case
                .bus(e.bus)
                .ok_or(ScenarioError::UnknownBus { what: "erl", bus: e.bus })?;
            if bus.kind == BusKind::Slack {
                return Err(ScenarioError::invalid(format!("erl[{k}].bus"), "cannot be the slack bus"));
            }
            let m = &e.model;
            positive(&format!("erl[{k}].tp"), m.tp)?;
            positive(&format!("erl[{k}].tq"), m.tq)?;
            positive(&format!("erl[{k}].v0"), m.v0)?;
            for (name, ch) in [("noise_p", m.noise_p), ("noise_q", m.noise_q)] {
                if let Some(ch) = ch {
                    if ch >= self.ou_params.len() {
                        return Err(ScenarioError::invalid(
                            format!("erl[{k}].{name}"),
                            format!("channel {ch} does not exist ({} defined)", self.ou_params.len()),
                        ));
                    }
                }
            }
            if e.absorb_static_load {
                if erl_buses.contains(&e.bus) {
                    return Err(ScenarioError::invalid(
                        format!("erl[{k}].absorb_static_load"),
                        "a bus's static load can be absorbed only once",
                    ));
                }
                erl_buses.push(e.bus);
            }
        }
        let mut machine_buses = Vec::new();
        for (k, m) in self.machines.iter().enumerate() {
            let bus = case
                .bus(m.bus)
                .ok_or(ScenarioError::UnknownBus { what: "machine", bus: m.bus })?;
            if bus.kind != BusKind::Pv {
                return Err(ScenarioError::invalid(
                    format!("machine[{k}].bus"),
                    format!("bus {} is not a PV bus", m.bus),
                ));
            }
            if machine_buses.contains(&m.bus) {
                return Err(ScenarioError::invalid(
                    format!("machine[{k}].bus"),
                    format!("bus {} already has a machine", m.bus),
                ));
            }
            machine_buses.push(m.bus);
            positive(&format!("machine[{k}].m"), m.m)?;
            positive(&format!("machine[{k}].xd_prime"), m.xd_prime)?;
            if m.d.is_nan() || m.d < 0.0 {
                return Err(ScenarioError::invalid(format!("machine[{k}].d"), "must be non-negative"));
            }
            if m.order == MachineOrder::TwoAxis {
                positive(&format!("machine[{k}].xd"), m.xd)?;
                positive(&format!("machine[{k}].xq"), m.xq)?;
                positive(&format!("machine[{k}].td0_prime"), m.td0_prime)?;
                positive(&format!("machine[{k}].tq0_prime"), m.tq0_prime)?;
            }
        }
        if let Some(r) = &self.ramp {
            let bus = case
                .bus(r.bus)
                .ok_or(ScenarioError::UnknownBus { what: "ramp", bus: r.bus })?;
            if bus.kind != BusKind::Pq {
                return Err(ScenarioError::invalid("ramp.bus", format!("bus {} is not a PQ bus", r.bus)));
            }
            positive("ramp.step_fraction", r.step_fraction)?;
            positive("ramp.interval", r.interval)?;
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(ScenarioError::invalid("sweep.values", "must not be empty"));
            }
        }
        Ok(())
    }

    /// SHA-256 over the resolved configuration and the case data.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(emit_scenario(self).as_bytes());
        h.update(b"\n--case--\n");
        h.update(self.case.to_case_text().as_bytes());
        hex::encode(h.finalize())
    }
}

// ---------------------------------------------------------------------------
// file representation

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    case: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_runs: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    master_seed: Option<SeedValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    freq_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ou_scheme: Option<OuScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_floor: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    enforce_q_limits: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ramp: Option<RampFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collapse: Option<CollapseFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<Vec<OuChannelFile>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    erl: Option<Vec<ErlFile>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    machine: Option<Vec<MachineFile>>,
}

/// Seeds above `i64::MAX` do not fit a TOML integer and are written as strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum SeedValue {
    Int(i64),
    Text(String),
}

impl SeedValue {
    fn from_u64(seed: u64) -> Self {
        match i64::try_from(seed) {
            Ok(i) => SeedValue::Int(i),
            Err(_) => SeedValue::Text(seed.to_string()),
        }
    }

    fn to_u64(&self) -> Result<u64, ScenarioError> {
        match self {
            SeedValue::Int(i) => {
                u64::try_from(*i).map_err(|_| ScenarioError::invalid("master_seed", "must be non-negative"))
            }
            SeedValue::Text(s) => s
                .trim()
                .parse::<u64>()
                .map_err(|_| ScenarioError::invalid("master_seed", format!("not an unsigned integer: `{s}`"))),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RampFile {
    bus: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p0_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q0_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<RampMode>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CollapseFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    newton_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iter: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    singularity_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    check_every: Option<i64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OuChannelFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErlFile {
    bus: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    absorb_static_load: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_p: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_q: Option<i64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineFile {
    bus: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<MachineOrder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xd_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    td0_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tq0_prime: Option<f64>,
}

fn channel_index(field: String, v: Option<i64>) -> Result<Option<usize>, ScenarioError> {
    v.map(|i| usize::try_from(i).map_err(|_| ScenarioError::invalid(field, "must be a non-negative channel index")))
        .transpose()
}

fn count(field: &'static str, v: i64) -> Result<usize, ScenarioError> {
    usize::try_from(v).map_err(|_| ScenarioError::invalid(field, format!("must be non-negative, got {v}")))
}

/// The `case` entry of scenario text, read without resolving anything
/// else, so the caller can load the case before parsing.
pub fn scenario_case_ref(text: &str) -> Result<Option<String>, ScenarioError> {
    #[derive(Deserialize)]
    struct Head {
        case: Option<String>,
    }
    let head: Head = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    Ok(head.case)
}

/// Parse a scenario against `case`, filling documented defaults.
pub fn parse_scenario(text: &str, case: Arc<NetworkCase>) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let mut sc = Scenario::new(case);
    sc.case_ref = file.case;
    sc.sigma = file.sigma.unwrap_or(0.0);
    sc.dt = file.dt.ok_or(ScenarioError::Missing("dt"))?;
    sc.horizon = file.horizon.unwrap_or(DEFAULT_HORIZON);
    sc.n_runs = count("n_runs", file.n_runs.ok_or(ScenarioError::Missing("n_runs"))?)?;
    sc.master_seed = file.master_seed.ok_or(ScenarioError::Missing("master_seed"))?.to_u64()?;
    sc.freq_hz = file.freq_hz.unwrap_or(DEFAULT_FREQ_HZ);
    sc.ou_scheme = file.ou_scheme.unwrap_or_default();
    sc.noise_floor = file.noise_floor.unwrap_or(false);
    sc.enforce_q_limits = file.enforce_q_limits.unwrap_or(false);

    if let Some(c) = file.collapse {
        let d = CollapseSettings::default();
        sc.collapse_tol = CollapseSettings {
            newton_tol: c.newton_tol.unwrap_or(d.newton_tol),
            max_iter: c.max_iter.map(|v| count("collapse.max_iter", v)).transpose()?.unwrap_or(d.max_iter),
            v_floor: c.v_floor.unwrap_or(d.v_floor),
            singularity_tol: c.singularity_tol.unwrap_or(d.singularity_tol),
            check_every: c
                .check_every
                .map(|v| count("collapse.check_every", v))
                .transpose()?
                .unwrap_or(d.check_every),
        };
    }

    if let Some(r) = file.ramp {
        let bus = r.bus.ok_or(ScenarioError::Missing("ramp.bus"))?;
        if sc.case.bus(bus).is_none() {
            return Err(ScenarioError::UnknownBus { what: "ramp", bus });
        }
        let (pl, ql) = sc.case.static_load_at(bus);
        sc.ramp = Some(RampSchedule {
            bus,
            p0_ref: r.p0_ref.unwrap_or(pl),
            q0_ref: r.q0_ref.unwrap_or(ql),
            step_fraction: r.step_fraction.unwrap_or(DEFAULT_STEP_FRACTION),
            interval: r.interval.ok_or(ScenarioError::Missing("ramp.interval"))?,
            mode: r.mode.unwrap_or_default(),
        });
    }

    let erls = file.erl.unwrap_or_default();
    // Without an explicit noise table every recovery load gets its own
    // (p, q) pair of default channels.
    let auto_noise = file.noise.is_none();
    sc.ou_params = match file.noise {
        Some(chs) => chs
            .into_iter()
            .map(|c| OuChannel {
                alpha: c.alpha.unwrap_or(1.0),
                beta: c.beta.unwrap_or(1.0),
            })
            .collect(),
        None => vec![OuChannel::default(); 2 * erls.len()],
    };
    for (k, e) in erls.into_iter().enumerate() {
        let bus = e.bus.ok_or(ScenarioError::Missing("erl.bus"))?;
        if sc.case.bus(bus).is_none() {
            return Err(ScenarioError::UnknownBus { what: "erl", bus });
        }
        let absorb = e.absorb_static_load.unwrap_or(e.p0.is_none() && e.q0.is_none());
        let (pl, ql) = sc.case.static_load_at(bus);
        let mut model = ErlModel::with_nominal(e.p0.unwrap_or(pl), e.q0.unwrap_or(ql));
        model.tp = e.tp.unwrap_or(model.tp);
        model.tq = e.tq.unwrap_or(model.tq);
        model.alpha_s = e.alpha_s.unwrap_or(model.alpha_s);
        model.alpha_t = e.alpha_t.unwrap_or(model.alpha_t);
        model.beta_s = e.beta_s.unwrap_or(model.beta_s);
        model.beta_t = e.beta_t.unwrap_or(model.beta_t);
        model.v0 = e.v0.unwrap_or(model.v0);
        model.noise_p = channel_index(format!("erl[{k}].noise_p"), e.noise_p)?;
        model.noise_q = channel_index(format!("erl[{k}].noise_q"), e.noise_q)?;
        if auto_noise {
            model.noise_p = model.noise_p.or(Some(2 * k));
            model.noise_q = model.noise_q.or(Some(2 * k + 1));
        }
        sc.erl_placements.push(ErlPlacement {
            bus,
            model,
            absorb_static_load: absorb,
        });
    }

    for m in file.machine.unwrap_or_default() {
        let bus = m.bus.ok_or(ScenarioError::Missing("machine.bus"))?;
        let mut model = MachineModel::classical(bus);
        model.order = m.model.unwrap_or_default();
        model.m = m.m.unwrap_or(model.m);
        model.d = m.d.unwrap_or(model.d);
        model.xd_prime = m.xd_prime.unwrap_or(model.xd_prime);
        model.xd = m.xd.unwrap_or(model.xd);
        model.xq = m.xq.unwrap_or(model.xq);
        model.td0_prime = m.td0_prime.unwrap_or(model.td0_prime);
        model.tq0_prime = m.tq0_prime.unwrap_or(model.tq0_prime);
        sc.machines.push(model);
    }

    sc.sweep = file.sweep;
    sc.validate()?;
    Ok(sc)
}

/// Write every resolved field of `scenario` as scenario text.
pub fn emit_scenario(scenario: &Scenario) -> String {
    let c = &scenario.collapse_tol;
    let file = ScenarioFile {
        case: scenario.case_ref.clone(),
        sigma: Some(scenario.sigma),
        dt: Some(scenario.dt),
        horizon: Some(scenario.horizon),
        n_runs: Some(scenario.n_runs as i64),
        master_seed: Some(SeedValue::from_u64(scenario.master_seed)),
        freq_hz: Some(scenario.freq_hz),
        ou_scheme: Some(scenario.ou_scheme),
        noise_floor: Some(scenario.noise_floor),
        enforce_q_limits: Some(scenario.enforce_q_limits),
        ramp: scenario.ramp.as_ref().map(|r| RampFile {
            bus: Some(r.bus),
            p0_ref: Some(r.p0_ref),
            q0_ref: Some(r.q0_ref),
            step_fraction: Some(r.step_fraction),
            interval: Some(r.interval),
            mode: Some(r.mode),
        }),
        collapse: Some(CollapseFile {
            newton_tol: Some(c.newton_tol),
            max_iter: Some(c.max_iter as i64),
            v_floor: Some(c.v_floor),
            singularity_tol: Some(c.singularity_tol),
            check_every: Some(c.check_every as i64),
        }),
        sweep: scenario.sweep.clone(),
        noise: Some(
            scenario
                .ou_params
                .iter()
                .map(|ch| OuChannelFile {
                    alpha: Some(ch.alpha),
                    beta: Some(ch.beta),
                })
                .collect(),
        ),
        erl: Some(
            scenario
                .erl_placements
                .iter()
                .map(|e| ErlFile {
                    bus: Some(e.bus),
                    p0: Some(e.model.p0),
                    q0: Some(e.model.q0),
                    absorb_static_load: Some(e.absorb_static_load),
                    tp: Some(e.model.tp),
                    tq: Some(e.model.tq),
                    alpha_s: Some(e.model.alpha_s),
                    alpha_t: Some(e.model.alpha_t),
                    beta_s: Some(e.model.beta_s),
                    beta_t: Some(e.model.beta_t),
                    v0: Some(e.model.v0),
                    noise_p: e.model.noise_p.map(|i| i as i64),
                    noise_q: e.model.noise_q.map(|i| i as i64),
                })
                .collect(),
        ),
        machine: Some(
            scenario
                .machines
                .iter()
                .map(|m| MachineFile {
                    bus: Some(m.bus),
                    model: Some(m.order),
                    m: Some(m.m),
                    d: Some(m.d),
                    xd_prime: Some(m.xd_prime),
                    xd: Some(m.xd),
                    xq: Some(m.xq),
                    td0_prime: Some(m.td0_prime),
                    tq0_prime: Some(m.tq0_prime),
                })
                .collect(),
        ),
    };
    toml::to_string(&file).expect("scenario values are always representable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::ieee14;
    use proptest::prelude::*;

    fn case() -> Arc<NetworkCase> {
        Arc::new(ieee14())
    }

    const MINIMAL: &str = "dt = 0.05\nn_runs = 10\nmaster_seed = 1\n";

    #[test]
    fn table_one_column() {
        let text = "sigma = 0.10\ndt = 0.05\nn_runs = 1000\nmaster_seed = 42\n\
                    [ramp]\nbus = 4\ninterval = 1.0\n\n[[erl]]\nbus = 9\n";
        let sc = parse_scenario(text, case()).unwrap();
        assert_eq!(sc.sigma, 0.10);
        assert_eq!(sc.n_runs, 1000);
        let r = sc.ramp.as_ref().unwrap();
        assert_eq!((r.bus, r.interval, r.step_fraction, r.mode), (4, 1.0, 0.02, RampMode::Discrete));
        assert!((r.p0_ref - 0.478).abs() < 1e-15);
        let e = &sc.erl_placements[0];
        assert!(e.absorb_static_load);
        assert!((e.model.p0 - 0.295).abs() < 1e-15);
        assert_eq!((e.model.tp, e.model.alpha_s, e.model.alpha_t), (30.0, 0.0, 2.0));
        assert_eq!(sc.ou_params, vec![OuChannel { alpha: 1.0, beta: 1.0 }; 2]);
        assert_eq!((e.model.noise_p, e.model.noise_q), (Some(0), Some(1)));
    }

    #[test]
    fn case_reference_is_read_alone() {
        assert_eq!(scenario_case_ref("case = \"two_bus\"\ndt = 0.1\n").unwrap().as_deref(), Some("two_bus"));
        assert_eq!(scenario_case_ref(MINIMAL).unwrap(), None);
        assert!(scenario_case_ref("case = ").is_err());
    }

    #[test]
    fn sigma_defaults_to_zero() {
        let sc = parse_scenario(MINIMAL, case()).unwrap();
        assert_eq!(sc.sigma, 0.0);
        assert!(sc.ramp.is_none());
    }

    #[test]
    fn invariant_violations() {
        let bad_dt = "dt = -0.05\nn_runs = 10\nmaster_seed = 1\n";
        assert!(matches!(
            parse_scenario(bad_dt, case()),
            Err(ScenarioError::Invalid { field, .. }) if field == "dt"
        ));
        let zero_dt = "dt = 0.0\nn_runs = 10\nmaster_seed = 1\n";
        assert!(parse_scenario(zero_dt, case()).is_err());
        let neg_sigma = format!("sigma = -0.1\n{MINIMAL}");
        assert!(matches!(
            parse_scenario(&neg_sigma, case()),
            Err(ScenarioError::Invalid { field, .. }) if field == "sigma"
        ));
        let no_dt = "n_runs = 10\nmaster_seed = 1\n";
        assert_eq!(parse_scenario(no_dt, case()), Err(ScenarioError::Missing("dt")));
        let unknown = format!("{MINIMAL}[[erl]]\nbus = 99\n");
        assert_eq!(
            parse_scenario(&unknown, case()),
            Err(ScenarioError::UnknownBus { what: "erl", bus: 99 })
        );
        let bad_alpha = format!("{MINIMAL}[[noise]]\nalpha = 0.0\n");
        assert!(parse_scenario(&bad_alpha, case()).is_err());
        let typo = format!("{MINIMAL}sigmaa = 0.1\n");
        assert!(matches!(parse_scenario(&typo, case()), Err(ScenarioError::Syntax(_))));
        let ramp_on_pv = format!("{MINIMAL}[ramp]\nbus = 2\ninterval = 1.0\n");
        assert!(parse_scenario(&ramp_on_pv, case()).is_err());
        let bad_channel = format!("{MINIMAL}noise = []\n[[erl]]\nbus = 9\nnoise_p = 0\n");
        assert!(parse_scenario(&bad_channel, case()).is_err());
    }

    #[test]
    fn default_scenario_round_trips() {
        let sc = Scenario::new(case());
        let text = emit_scenario(&sc);
        assert_eq!(parse_scenario(&text, case()).unwrap(), sc);
    }

    #[test]
    fn bundled_scenarios_parse_and_round_trip() {
        for (name, text) in BUNDLED_SCENARIOS {
            let sc = parse_scenario(text, case()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(parse_scenario(&emit_scenario(&sc), case()).unwrap(), sc, "{name}");
        }
    }

    #[test]
    fn three_erl_placements_round_trip() {
        let text = format!(
            "{MINIMAL}[[erl]]\nbus = 9\n[[erl]]\nbus = 14\ntp = 12.5\n[[erl]]\nbus = 13\np0 = 0.2\nq0 = 0.05\n"
        );
        let sc = parse_scenario(&text, case()).unwrap();
        assert_eq!(sc.erl_placements.len(), 3);
        assert_eq!(sc.ou_params.len(), 6);
        assert!(!sc.erl_placements[2].absorb_static_load);
        let back = parse_scenario(&emit_scenario(&sc), case()).unwrap();
        assert_eq!(back.erl_placements, sc.erl_placements);
        assert_eq!(back, sc);
    }

    #[test]
    fn emitted_text_carries_sigma_exactly() {
        let mut sc = Scenario::new(case());
        sc.sigma = 0.15;
        assert!(emit_scenario(&sc).contains("sigma = 0.15\n"));
    }

    #[test]
    fn huge_seed_round_trips() {
        let mut sc = Scenario::new(case());
        sc.master_seed = u64::MAX;
        assert_eq!(parse_scenario(&emit_scenario(&sc), case()).unwrap(), sc);
    }

    #[test]
    fn fingerprint_tracks_seed_and_values() {
        let a = Scenario::new(case());
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.master_seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn parse_emit_is_identity(
            sigma in 0.0f64..1.0,
            dt in 1e-4f64..0.5,
            interval in 0.01f64..20.0,
            continuous in any::<bool>(),
            seed in any::<u64>(),
            n_runs in 1usize..100_000,
            alpha in 0.01f64..10.0,
            beta in 0.01f64..10.0,
            tp in 0.1f64..100.0,
            two_axis in any::<bool>(),
        ) {
            let case = case();
            let mut sc = Scenario::new(case.clone());
            sc.sigma = sigma;
            sc.dt = dt;
            sc.n_runs = n_runs;
            sc.master_seed = seed;
            sc.ou_params = vec![OuChannel { alpha, beta }, OuChannel::default()];
            let mut erl = ErlModel::with_nominal(0.295, 0.166);
            erl.tp = tp;
            erl.noise_p = Some(0);
            erl.noise_q = Some(1);
            sc.erl_placements.push(ErlPlacement { bus: 9, model: erl, absorb_static_load: true });
            let mut m = MachineModel::classical(2);
            if two_axis { m.order = MachineOrder::TwoAxis; }
            sc.machines.push(m);
            sc.ramp = Some(RampSchedule {
                bus: 4, p0_ref: 0.478, q0_ref: -0.039, step_fraction: 0.02, interval,
                mode: if continuous { RampMode::Continuous } else { RampMode::Discrete },
            });
            let back = parse_scenario(&emit_scenario(&sc), case).unwrap();
            prop_assert_eq!(back, sc);
        }
    }
}
