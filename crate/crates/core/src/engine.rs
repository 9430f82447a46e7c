//! Time-domain integration of the stochastic differential-algebraic system.
//!
//! One step from `t_n` to `t_{n+1}`:
//!
//! 1. the ramp is evaluated at `t_{n+1}`;
//! 2. the noise advances by one Euler–Maruyama (or exact) OU update;
//! 3. the differential states take an explicit Euler step using `x_n`,
//!    `y_n` and `η_n`; machine speeds are updated first and rotor angles use
//!    the new speed;
//! 4. the network equations are solved for `y_{n+1}` by Newton's method,
//!    warm-started from `y_n`.
//!
//! The run collapses at the first step where Newton fails, a bus voltage
//! drops below the floor, or (checked every few steps) the algebraic
//! Jacobian becomes numerically singular. The reported margin belongs to the
//! last step that passed every check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::case::BusKind;
use crate::error::{PowerFlowError, ScenarioError, SimError};
use crate::models::{
    erl_derivatives, erl_initialize, erl_power, erl_power_voltage_sensitivity, erl_steady_power,
    machine_derivatives, machine_initialize, machine_injection, ou_initialize, ou_step, ErlModel, ErlState,
    MachineOrder, MachineSetpoints, MachineState, OuProcess,
};
use crate::network::{
    algebraic_jacobian, build_admittance, evaluate_mismatch, min_singular_value, network_injections, newton_solve,
    newton_solve_reusing,
    solve_power_flow_with, AdmittanceMatrix, AlgebraicState, BusRole, InjectionModel, LocalInjection,
    NewtonOptions, NewtonWorkspace, PowerFlowOptions, UnknownMap,
};
use crate::numfmt::fmt_g17;
use crate::rng::run_stream;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollapseReason {
    NewtonFailure,
    LowVoltage,
    SingularJacobian,
    /// The horizon was reached without collapse; the sample is censored.
    Horizon,
}

impl CollapseReason {
    pub fn as_str(self) -> &'static str {
        match self {
            CollapseReason::NewtonFailure => "newton",
            CollapseReason::LowVoltage => "low_voltage",
            CollapseReason::SingularJacobian => "singular",
            CollapseReason::Horizon => "horizon",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            CollapseReason::NewtonFailure,
            CollapseReason::LowVoltage,
            CollapseReason::SingularJacobian,
            CollapseReason::Horizon,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
    }
}

/// Full state of one realization at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub step: u64,
    pub t: f64,
    pub lambda: f64,
    pub y: AlgebraicState,
    pub erl: Vec<ErlState>,
    pub machines: Vec<MachineState>,
    pub noise: OuProcess,
}

/// Which quantities to record along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpec {
    /// Record every `stride` steps (the initial state is always recorded).
    pub stride: u64,
    /// Bus ids whose voltage magnitude is recorded; `None` records all.
    pub buses: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub lambda: f64,
    pub v: Vec<f64>,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub bus_ids: Vec<u32>,
    pub n_eta: usize,
    pub samples: Vec<TraceSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run_index: u64,
    /// `λ · P0` at the last feasible step (at the horizon when censored).
    pub margin: f64,
    pub lambda: f64,
    /// Time of the last feasible step.
    pub collapse_time: f64,
    pub reason: CollapseReason,
    pub censored: bool,
    pub steps: u64,
    /// Smallest singular value of the algebraic Jacobian at the initial and
    /// at the last feasible state.
    pub sigma_min_initial: f64,
    pub sigma_min_final: f64,
    pub final_state: SystemState,
    pub trace: Option<Trace>,
}

/// Precomputed network data and device placement for one scenario.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    scenario: &'a Scenario,
    ybus: AdmittanceMatrix,
    /// Unknown layout of the initial power flow (PV buses still voltage
    /// controlled, after any Q-limit switching).
    pf_map: UnknownMap,
    /// Unknown layout during the dynamics (machine buses free).
    map: UnknownMap,
    /// Fixed injection per bus during the dynamics: scheduled generation at
    /// buses without a machine, minus static loads that are not replaced by
    /// a recovery load or the ramp.
    base: Vec<Complex64>,
    /// Scheduled active generation and any limit-held reactive output at
    /// machine buses, which stand in for the machines in the power flow.
    machine_gen: Vec<Complex64>,
    erl_bus: Vec<usize>,
    machine_bus: Vec<usize>,
    erl_at: Vec<Vec<usize>>,
    machine_at: Vec<Option<usize>>,
    ramp_bus: Option<usize>,
    /// Base-case solution with the noise at zero, used as the Newton start
    /// for each realization's initial power flow.
    base_y: AlgebraicState,
    newton: NewtonOptions,
    omega_base: f64,
}

/// Network injections for a given device state.
#[derive(Clone, Copy)]
pub struct StateInjections<'s> {
    engine: &'s Engine<'s>,
    lambda: f64,
    erl: &'s [ErlState],
    machines: &'s [MachineState],
    eta: &'s [f64],
    /// Recovery loads at their steady characteristic and machines replaced
    /// by their scheduled output, as in the initial power flow.
    steady: bool,
}

impl InjectionModel for StateInjections<'_> {
    fn injection(&self, bus: usize, v: f64, theta: f64) -> LocalInjection {
        let e = self.engine;
        let mut inj = LocalInjection::constant(e.base[bus]);
        if e.ramp_bus == Some(bus) {
            let r = e.scenario.ramp.as_ref().expect("ramp bus implies a ramp");
            inj.p -= r.p0_ref * (1.0 + self.lambda);
            inj.q -= r.q0_ref * (1.0 + self.lambda);
        }
        for &k in &e.erl_at[bus] {
            let m = &e.scenario.erl_placements[k].model;
            let (ep, eq) = e.erl_noise(m, self.eta);
            let ((p, q), (dp, dq)) = if self.steady {
                erl_steady_power(m, v, ep, eq)
            } else {
                (
                    erl_power(m, &self.erl[k], v, ep, eq),
                    erl_power_voltage_sensitivity(m, v, ep, eq),
                )
            };
            inj.p -= p;
            inj.q -= q;
            inj.dp_dv -= dp;
            inj.dq_dv -= dq;
        }
        if let Some(k) = e.machine_at[bus] {
            if self.steady {
                inj.p += e.machine_gen[k].re;
                inj.q += e.machine_gen[k].im;
            } else {
                inj += machine_injection(&e.scenario.machines[k], &self.machines[k], v, theta);
            }
        }
        inj
    }
}

impl<'a> Engine<'a> {
    /// Place the devices and solve the noise-free base case.
    pub fn new(scenario: &'a Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let case = &*scenario.case;
        let n = case.n_buses();
        let idx = |id: u32| case.index_of(id).expect("validated bus reference");

        let mut load_replaced = vec![false; n];
        let mut erl_at = vec![Vec::new(); n];
        let mut erl_bus = Vec::new();
        for (k, e) in scenario.erl_placements.iter().enumerate() {
            let i = idx(e.bus);
            erl_at[i].push(k);
            erl_bus.push(i);
            load_replaced[i] |= e.absorb_static_load;
        }
        let ramp_bus = scenario.ramp.as_ref().map(|r| idx(r.bus));
        if let Some(i) = ramp_bus {
            load_replaced[i] = true;
        }
        let mut machine_at = vec![None; n];
        let mut machine_bus = Vec::new();
        for (k, m) in scenario.machines.iter().enumerate() {
            let i = idx(m.bus);
            machine_at[i] = Some(k);
            machine_bus.push(i);
        }
        let base: Vec<Complex64> = case
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mut s = Complex64::new(0.0, 0.0);
                if machine_at[i].is_none() {
                    s.re += case.scheduled_generation_at(b.id);
                }
                if !load_replaced[i] {
                    let (pl, ql) = case.static_load_at(b.id);
                    s -= Complex64::new(pl, ql);
                }
                s
            })
            .collect();
        let machine_gen = machine_bus
            .iter()
            .map(|&i| Complex64::new(case.scheduled_generation_at(case.buses[i].id), 0.0))
            .collect();

        let mut engine = Engine {
            scenario,
            ybus: build_admittance(case),
            pf_map: UnknownMap::new(&[]),
            map: UnknownMap::new(&[]),
            base,
            machine_gen,
            erl_bus,
            machine_bus,
            erl_at,
            machine_at,
            ramp_bus,
            base_y: AlgebraicState::flat(case),
            newton: NewtonOptions {
                tol: scenario.collapse_tol.newton_tol,
                max_iter: scenario.collapse_tol.max_iter,
            },
            omega_base: scenario.omega_base(),
        };

        let zeros = vec![0.0; scenario.ou_params.len()];
        let lambda0 = scenario.ramp.as_ref().map_or(0.0, |r| r.lambda(0.0));
        let pf = {
            let inj = StateInjections {
                engine: &engine,
                lambda: lambda0,
                erl: &[],
                machines: &[],
                eta: &zeros,
                steady: true,
            };
            let opts = PowerFlowOptions {
                newton: engine.newton,
                enforce_q_limits: scenario.enforce_q_limits,
            };
            solve_power_flow_with(case, &engine.ybus, &inj, &opts).map_err(SimError::InfeasibleBaseCase)?
        };
        // Generators that hit a limit keep that reactive output.
        for (i, b) in case.buses.iter().enumerate() {
            if b.kind == BusKind::Pv && pf.roles[i] == BusRole::Free {
                match engine.machine_at[i] {
                    Some(k) => engine.machine_gen[k].im = pf.gen_q[i],
                    None => engine.base[i].im += pf.gen_q[i],
                }
            }
        }
        let mut roles = pf.roles.clone();
        for &i in &engine.machine_bus {
            roles[i] = BusRole::Free;
        }
        engine.pf_map = UnknownMap::new(&pf.roles);
        engine.map = UnknownMap::new(&roles);
        engine.base_y = pf.state;
        Ok(engine)
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn admittance(&self) -> &AdmittanceMatrix {
        &self.ybus
    }

    /// Unknown layout of the algebraic equations during the dynamics.
    pub fn unknown_map(&self) -> &UnknownMap {
        &self.map
    }

    /// Noise-free initial operating point.
    pub fn base_state(&self) -> &AlgebraicState {
        &self.base_y
    }

    fn erl_noise(&self, m: &ErlModel, eta: &[f64]) -> (f64, f64) {
        let pick = |ch: Option<usize>, nominal: f64| match ch {
            Some(c) if self.scenario.noise_floor => eta[c].max(-nominal),
            Some(c) => eta[c],
            None => 0.0,
        };
        (pick(m.noise_p, m.p0), pick(m.noise_q, m.q0))
    }

    pub fn injections<'s>(&'s self, st: &'s SystemState) -> StateInjections<'s> {
        StateInjections {
            engine: self,
            lambda: st.lambda,
            erl: &st.erl,
            machines: &st.machines,
            eta: &st.noise.eta,
            steady: false,
        }
    }

    /// Residual of the network equations at `st`, in unknown order.
    pub fn residual(&self, st: &SystemState) -> DVector<f64> {
        self.map.gather(&evaluate_mismatch(&st.y, &self.ybus, &self.injections(st)))
    }

    /// Jacobian of [`Engine::residual`] with respect to the unknowns.
    pub fn jacobian(&self, st: &SystemState) -> DMatrix<f64> {
        algebraic_jacobian(&st.y, &self.ybus, &self.injections(st), &self.map)
    }

    pub fn sigma_min(&self, st: &SystemState) -> f64 {
        min_singular_value(&self.jacobian(st))
    }

    /// Draw the initial noise and build the equilibrium consistent with it.
    pub fn initialize<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Initialized, SimError> {
        let sc = self.scenario;
        let noise = ou_initialize(&sc.ou_params, sc.sigma, rng);
        let mut st = SystemState {
            step: 0,
            t: 0.0,
            lambda: sc.ramp.as_ref().map_or(0.0, |r| r.lambda(0.0)),
            y: self.base_y.clone(),
            erl: vec![ErlState::default(); sc.erl_placements.len()],
            machines: vec![MachineState::default(); sc.machines.len()],
            noise,
        };
        {
            let inj = StateInjections {
                steady: true,
                ..self.injections(&st)
            };
            let mut y = st.y.clone();
            newton_solve(&self.ybus, &self.pf_map, &inj, &mut y, &self.newton)
                .map_err(SimError::InfeasibleBaseCase)?;
            st.y = y;
        }
        for (k, e) in sc.erl_placements.iter().enumerate() {
            let (ep, eq) = self.erl_noise(&e.model, &st.noise.eta);
            st.erl[k] = erl_initialize(&e.model, st.y.v[self.erl_bus[k]], ep, eq);
        }
        let mut setpoints = Vec::with_capacity(sc.machines.len());
        if !sc.machines.is_empty() {
            // Each machine supplies what its bus sends into the network
            // beyond the loads there.
            let (pc, qc) = network_injections(&st.y, &self.ybus);
            for (k, m) in sc.machines.iter().enumerate() {
                let i = self.machine_bus[k];
                let others = self.load_injection(&st, i);
                let (ms, set) = machine_initialize(
                    m,
                    st.y.v[i],
                    st.y.theta[i],
                    pc[i] - others.p,
                    qc[i] - others.q,
                );
                st.machines[k] = ms;
                setpoints.push(set);
            }
        }
        Ok(Initialized { state: st, setpoints })
    }

    /// Injection at bus `i` from everything except its machine, with the
    /// recovery loads at rest.
    fn load_injection(&self, st: &SystemState, i: usize) -> LocalInjection {
        let inj = StateInjections {
            steady: true,
            ..self.injections(st)
        };
        let mut all = inj.injection(i, st.y.v[i], st.y.theta[i]);
        if let Some(k) = self.machine_at[i] {
            all.p -= self.machine_gen[k].re;
            all.q -= self.machine_gen[k].im;
        }
        all
    }

    /// Largest magnitude among the differential-state derivatives at `st`;
    /// zero at an equilibrium.
    pub fn differential_residual(&self, st: &SystemState, setpoints: &[MachineSetpoints]) -> f64 {
        let sc = self.scenario;
        let mut m = 0.0_f64;
        for (k, p) in sc.erl_placements.iter().enumerate() {
            let (ep, eq) = self.erl_noise(&p.model, &st.noise.eta);
            let (a, b) = erl_derivatives(&p.model, &st.erl[k], st.y.v[self.erl_bus[k]], ep, eq);
            m = m.max(a.abs()).max(b.abs());
        }
        for (k, mm) in sc.machines.iter().enumerate() {
            let i = self.machine_bus[k];
            let d = machine_derivatives(mm, &st.machines[k], &setpoints[k], st.y.v[i], st.y.theta[i], self.omega_base);
            for x in [d.delta, d.omega, d.eq_prime, d.ed_prime] {
                m = m.max(x.abs());
            }
        }
        m
    }

    /// Stepper bound to this engine, with its own solver workspace.
    pub fn stepper(&self) -> Stepper<'_, 'a> {
        Stepper {
            engine: self,
            ws: NewtonWorkspace::new(self.ybus.n(), self.map.len()),
        }
    }

    fn record(&self, trace: &mut Trace, idx: &[usize], st: &SystemState) {
        trace.samples.push(TraceSample {
            t: st.t,
            lambda: st.lambda,
            v: idx.iter().map(|&i| st.y.v[i]).collect(),
            eta: st.noise.eta.clone(),
        });
    }

    /// Simulate realization `run_index` until collapse or the horizon.
    pub fn run(&self, run_index: u64, trace: Option<&TraceSpec>) -> Result<RunOutcome, SimError> {
        let sc = self.scenario;
        let mut rng = run_stream(sc.master_seed, run_index);
        let Initialized { state: mut st, setpoints } = self.initialize(&mut rng)?;

        let (mut rec, trace_idx, stride) = match trace {
            Some(spec) => {
                let ids = spec
                    .buses
                    .clone()
                    .unwrap_or_else(|| sc.case.buses.iter().map(|b| b.id).collect());
                let idx = ids
                    .iter()
                    .map(|id| {
                        sc.case
                            .index_of(*id)
                            .ok_or(ScenarioError::UnknownBus { what: "trace", bus: *id })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let tr = Trace {
                    bus_ids: ids,
                    n_eta: st.noise.len(),
                    samples: Vec::new(),
                };
                (Some(tr), idx, spec.stride.max(1))
            }
            None => (None, Vec::new(), 1),
        };
        if let Some(tr) = rec.as_mut() {
            self.record(tr, &trace_idx, &st);
        }

        let sigma_min_initial = self.sigma_min(&st);
        let n_steps = sc.n_steps();
        let check_every = sc.collapse_tol.check_every as u64;
        let mut reason = CollapseReason::Horizon;
        let mut stepper = self.stepper();
        let mut next = st.clone();
        while st.step < n_steps {
            next.clone_from(&st);
            if stepper.step(&mut next, &setpoints, &mut rng).is_err() {
                reason = CollapseReason::NewtonFailure;
                break;
            }
            if next.y.min_voltage() < sc.collapse_tol.v_floor {
                reason = CollapseReason::LowVoltage;
                break;
            }
            if next.step % check_every == 0 && self.sigma_min(&next) < sc.collapse_tol.singularity_tol {
                reason = CollapseReason::SingularJacobian;
                break;
            }
            std::mem::swap(&mut st, &mut next);
            if let Some(tr) = rec.as_mut() {
                if st.step % stride == 0 {
                    self.record(tr, &trace_idx, &st);
                }
            }
        }

        let margin = sc.ramp.as_ref().map_or(0.0, |r| r.margin(st.lambda));
        Ok(RunOutcome {
            run_index,
            margin,
            lambda: st.lambda,
            collapse_time: st.t,
            reason,
            censored: reason == CollapseReason::Horizon,
            steps: st.step,
            sigma_min_initial,
            sigma_min_final: self.sigma_min(&st),
            final_state: st,
            trace: rec,
        })
    }
}

/// Advances realizations of one engine, reusing solver buffers between
/// steps.
#[derive(Debug, Clone)]
pub struct Stepper<'e, 'a> {
    engine: &'e Engine<'a>,
    ws: NewtonWorkspace,
}

impl Stepper<'_, '_> {
    /// Advance `st` by one step. On failure `st` is left unchanged.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        st: &mut SystemState,
        setpoints: &[MachineSetpoints],
        rng: &mut R,
    ) -> Result<(), PowerFlowError> {
        let e = self.engine;
        let sc = e.scenario;
        let dt = sc.dt;
        let step = st.step + 1;
        let t = step as f64 * dt;

        let mut noise = st.noise.clone();
        ou_step(&mut noise, dt, sc.ou_scheme, rng);

        let mut erl = st.erl.clone();
        for (k, p) in sc.erl_placements.iter().enumerate() {
            let v = st.y.v[e.erl_bus[k]];
            let (ep, eq) = e.erl_noise(&p.model, &st.noise.eta);
            let (dxp, dxq) = erl_derivatives(&p.model, &st.erl[k], v, ep, eq);
            erl[k].xp += dt * dxp;
            erl[k].xq += dt * dxq;
        }
        let mut machines = st.machines.clone();
        for (k, m) in sc.machines.iter().enumerate() {
            let i = e.machine_bus[k];
            let d = machine_derivatives(m, &st.machines[k], &setpoints[k], st.y.v[i], st.y.theta[i], e.omega_base);
            let ms = &mut machines[k];
            ms.omega += dt * d.omega;
            ms.delta += dt * e.omega_base * (ms.omega - 1.0);
            if m.order == MachineOrder::TwoAxis {
                ms.eq_prime += dt * d.eq_prime;
                ms.ed_prime += dt * d.ed_prime;
            }
        }

        let mut next = SystemState {
            step,
            t,
            lambda: sc.ramp.as_ref().map_or(0.0, |r| r.lambda(t)),
            y: st.y.clone(),
            erl,
            machines,
            noise,
        };
        let mut y = st.y.clone();
        newton_solve_reusing(&e.ybus, &e.map, &e.injections(&next), &mut y, &e.newton, &mut self.ws)?;
        next.y = y;
        *st = next;
        Ok(())
    }

}

/// Initial state of a realization together with the machine set points.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialized {
    pub state: SystemState,
    pub setpoints: Vec<MachineSetpoints>,
}

/// Write a trajectory as CSV: `t,lambda,v_<bus>...,eta_<k>...`.
pub fn write_trace_csv<W: std::io::Write>(trace: &Trace, mut w: W) -> std::io::Result<()> {
    let mut header = vec!["t".to_string(), "lambda".to_string()];
    header.extend(trace.bus_ids.iter().map(|id| format!("v_{id}")));
    header.extend((1..=trace.n_eta).map(|k| format!("eta_{k}")));
    writeln!(w, "{}", header.join(","))?;
    for s in &trace.samples {
        let mut row = vec![fmt_g17(s.t), fmt_g17(s.lambda)];
        row.extend(s.v.iter().map(|x| fmt_g17(*x)));
        row.extend(s.eta.iter().map(|x| fmt_g17(*x)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
