//! Polar power-flow equations, their Jacobian, and the Newton solver.
//!
//! The algebraic constraint is written per bus as
//! `g_i = S_inj,i(V_i, θ_i) - V_i Σ_j conj(Y_ij V_j)` split into real and
//! imaginary parts. Injections may depend on the local voltage, which covers
//! voltage-dependent loads and machines behind a transient reactance.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use super::admittance::{build_admittance, AdmittanceMatrix};
use crate::case::{BusKind, NetworkCase};
use crate::error::PowerFlowError;

/// What a bus contributes to the unknowns of the algebraic system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusRole {
    /// Voltage magnitude and angle fixed (slack / infinite bus).
    Reference,
    /// Magnitude held, angle unknown, reactive injection free (PV).
    VoltageControlled,
    /// Magnitude and angle unknown (PQ, or a bus fed by a machine EMF).
    Free,
}

impl From<BusKind> for BusRole {
    fn from(kind: BusKind) -> Self {
        match kind {
            BusKind::Slack => BusRole::Reference,
            BusKind::Pv => BusRole::VoltageControlled,
            BusKind::Pq => BusRole::Free,
        }
    }
}

/// Bus voltage magnitudes (pu) and angles (rad), indexed by bus position.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicState {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl AlgebraicState {
    /// v at set point for slack/PV buses and 1 elsewhere, all angles 0.
    pub fn flat(case: &NetworkCase) -> Self {
        AlgebraicState {
            v: case.buses.iter().map(|b| b.v_set.unwrap_or(1.0)).collect(),
            theta: vec![0.0; case.n_buses()],
        }
    }

    pub fn min_voltage(&self) -> f64 {
        self.v.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Per-bus active/reactive residuals of the power-flow equations (pu).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMismatch {
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
}

impl PowerMismatch {
    /// Largest residual over all buses, including those whose equation is
    /// not part of the solved system.
    pub fn max_abs(&self) -> f64 {
        self.dp.iter().chain(&self.dq).fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest residual over the equations that are actually imposed.
    pub fn max_abs_active(&self, roles: &[BusRole]) -> f64 {
        let mut m = 0.0_f64;
        for (i, role) in roles.iter().enumerate() {
            match role {
                BusRole::Reference => {}
                BusRole::VoltageControlled => m = m.max(self.dp[i].abs()),
                BusRole::Free => m = m.max(self.dp[i].abs()).max(self.dq[i].abs()),
            }
        }
        m
    }
}

/// Net injection into the network at one bus, with its sensitivity to that
/// bus's own voltage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalInjection {
    pub p: f64,
    pub q: f64,
    pub dp_dv: f64,
    pub dq_dv: f64,
    pub dp_dtheta: f64,
    pub dq_dtheta: f64,
}

impl LocalInjection {
    pub fn constant(s: Complex64) -> Self {
        LocalInjection {
            p: s.re,
            q: s.im,
            ..Default::default()
        }
    }
}

impl std::ops::AddAssign for LocalInjection {
    fn add_assign(&mut self, o: Self) {
        self.p += o.p;
        self.q += o.q;
        self.dp_dv += o.dp_dv;
        self.dq_dv += o.dq_dv;
        self.dp_dtheta += o.dp_dtheta;
        self.dq_dtheta += o.dq_dtheta;
    }
}

/// Source of bus injections for the algebraic equations.
pub trait InjectionModel {
    fn injection(&self, bus: usize, v: f64, theta: f64) -> LocalInjection;
}

/// Fixed complex injections, one per bus.
impl InjectionModel for [Complex64] {
    fn injection(&self, bus: usize, _v: f64, _theta: f64) -> LocalInjection {
        LocalInjection::constant(self[bus])
    }
}

impl InjectionModel for Vec<Complex64> {
    fn injection(&self, bus: usize, v: f64, theta: f64) -> LocalInjection {
        self.as_slice().injection(bus, v, theta)
    }
}

/// Power flowing from each bus into the network, `S_i = V_i conj(Σ Y_ij V_j)`.
pub fn network_injections(state: &AlgebraicState, ybus: &AdmittanceMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = ybus.n();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    network_injections_into(state, ybus, &mut p, &mut q);
    (p, q)
}

fn network_injections_into(state: &AlgebraicState, ybus: &AdmittanceMatrix, p: &mut [f64], q: &mut [f64]) {
    for i in 0..ybus.n() {
        let (vi, ti) = (state.v[i], state.theta[i]);
        let (mut pi, mut qi) = (0.0, 0.0);
        for &(j, y) in ybus.row(i) {
            let (s, c) = (ti - state.theta[j]).sin_cos();
            let vj = state.v[j];
            pi += vj * (y.re * c + y.im * s);
            qi += vj * (y.re * s - y.im * c);
        }
        p[i] = vi * pi;
        q[i] = vi * qi;
    }
}

/// Residual `g = S_inj - S_calc` at every bus.
pub fn evaluate_mismatch<I: InjectionModel + ?Sized>(
    state: &AlgebraicState,
    ybus: &AdmittanceMatrix,
    injections: &I,
) -> PowerMismatch {
    let (p, q) = network_injections(state, ybus);
    let mut dp = p;
    let mut dq = q;
    for i in 0..ybus.n() {
        let inj = injections.injection(i, state.v[i], state.theta[i]);
        dp[i] = inj.p - dp[i];
        dq[i] = inj.q - dq[i];
    }
    PowerMismatch { dp, dq }
}

/// Maps bus quantities onto the unknown vector `[θ (non-reference), V (free)]`.
///
/// Equation rows use the same layout: the active balance of bus `i` sits at
/// row `theta_index(i)` and its reactive balance at `v_index(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownMap {
    roles: Vec<BusRole>,
    theta_idx: Vec<Option<usize>>,
    v_idx: Vec<Option<usize>>,
    len: usize,
}

impl UnknownMap {
    pub fn new(roles: &[BusRole]) -> Self {
        let mut theta_idx = vec![None; roles.len()];
        let mut v_idx = vec![None; roles.len()];
        let mut k = 0;
        for (i, r) in roles.iter().enumerate() {
            if *r != BusRole::Reference {
                theta_idx[i] = Some(k);
                k += 1;
            }
        }
        for (i, r) in roles.iter().enumerate() {
            if *r == BusRole::Free {
                v_idx[i] = Some(k);
                k += 1;
            }
        }
        UnknownMap {
            roles: roles.to_vec(),
            theta_idx,
            v_idx,
            len: k,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn roles(&self) -> &[BusRole] {
        &self.roles
    }

    pub fn theta_index(&self, bus: usize) -> Option<usize> {
        self.theta_idx[bus]
    }

    pub fn v_index(&self, bus: usize) -> Option<usize> {
        self.v_idx[bus]
    }

    /// Active residuals in unknown order.
    pub fn gather(&self, mm: &PowerMismatch) -> DVector<f64> {
        let mut r = DVector::zeros(self.len);
        for i in 0..self.roles.len() {
            if let Some(k) = self.theta_idx[i] {
                r[k] = mm.dp[i];
            }
            if let Some(k) = self.v_idx[i] {
                r[k] = mm.dq[i];
            }
        }
        r
    }

    pub fn unknowns(&self, state: &AlgebraicState) -> DVector<f64> {
        let mut x = DVector::zeros(self.len);
        for i in 0..self.roles.len() {
            if let Some(k) = self.theta_idx[i] {
                x[k] = state.theta[i];
            }
            if let Some(k) = self.v_idx[i] {
                x[k] = state.v[i];
            }
        }
        x
    }

    pub fn set_unknowns(&self, state: &mut AlgebraicState, x: &DVector<f64>) {
        for i in 0..self.roles.len() {
            if let Some(k) = self.theta_idx[i] {
                state.theta[i] = x[k];
            }
            if let Some(k) = self.v_idx[i] {
                state.v[i] = x[k];
            }
        }
    }

    fn add_update(&self, state: &mut AlgebraicState, dx: &DVector<f64>) {
        for i in 0..self.roles.len() {
            if let Some(k) = self.theta_idx[i] {
                state.theta[i] += dx[k];
            }
            if let Some(k) = self.v_idx[i] {
                state.v[i] += dx[k];
            }
        }
    }
}

/// Jacobian of the active residuals with respect to the unknowns,
/// `∂g/∂(θ, V)` in polar form, including the local voltage sensitivity of
/// the injections.
pub fn algebraic_jacobian<I: InjectionModel + ?Sized>(
    state: &AlgebraicState,
    ybus: &AdmittanceMatrix,
    injections: &I,
    map: &UnknownMap,
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(map.len(), map.len());
    let (pc, qc) = network_injections(state, ybus);
    fill_jacobian(state, ybus, injections, map, &pc, &qc, &mut jac);
    jac
}

fn fill_jacobian<I: InjectionModel + ?Sized>(
    state: &AlgebraicState,
    ybus: &AdmittanceMatrix,
    injections: &I,
    map: &UnknownMap,
    pc: &[f64],
    qc: &[f64],
    jac: &mut DMatrix<f64>,
) {
    jac.fill(0.0);
    for i in 0..ybus.n() {
        let (rp, rq) = (map.theta_index(i), map.v_index(i));
        if rp.is_none() && rq.is_none() {
            continue;
        }
        let (vi, ti) = (state.v[i], state.theta[i]);
        let inj = injections.injection(i, vi, ti);
        for &(j, y) in ybus.row(i) {
            let (g, b) = (y.re, y.im);
            let (cth, cv) = (map.theta_index(j), map.v_index(j));
            if i == j {
                // ∂S_calc,i/∂(θ_i, V_i)
                let dp_dth = -qc[i] - b * vi * vi;
                let dp_dv = pc[i] / vi + g * vi;
                let dq_dth = pc[i] - g * vi * vi;
                let dq_dv = qc[i] / vi - b * vi;
                if let Some(r) = rp {
                    if let Some(c) = cth {
                        jac[(r, c)] += inj.dp_dtheta - dp_dth;
                    }
                    if let Some(c) = cv {
                        jac[(r, c)] += inj.dp_dv - dp_dv;
                    }
                }
                if let Some(r) = rq {
                    if let Some(c) = cth {
                        jac[(r, c)] += inj.dq_dtheta - dq_dth;
                    }
                    if let Some(c) = cv {
                        jac[(r, c)] += inj.dq_dv - dq_dv;
                    }
                }
            } else {
                let vj = state.v[j];
                let (s, c) = (ti - state.theta[j]).sin_cos();
                let gs_bc = g * s - b * c;
                let gc_bs = g * c + b * s;
                if let Some(r) = rp {
                    if let Some(col) = cth {
                        jac[(r, col)] -= vi * vj * gs_bc;
                    }
                    if let Some(col) = cv {
                        jac[(r, col)] -= vi * gc_bs;
                    }
                }
                if let Some(r) = rq {
                    if let Some(col) = cth {
                        jac[(r, col)] += vi * vj * gc_bs;
                    }
                    if let Some(col) = cv {
                        jac[(r, col)] -= vi * gs_bc;
                    }
                }
            }
        }
    }
}

/// Smallest singular value of a square matrix (0 for an empty one).
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Convergence threshold on the largest active residual (pu).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub mismatch: f64,
}

/// Newton iteration on the active equations, starting from `state`.
///
/// On success `state` holds the solution. On failure it holds the last
/// iterate, which callers should treat as garbage.
pub fn newton_solve<I: InjectionModel + ?Sized>(
    ybus: &AdmittanceMatrix,
    map: &UnknownMap,
    injections: &I,
    state: &mut AlgebraicState,
    opts: &NewtonOptions,
) -> Result<NewtonReport, PowerFlowError> {
    let mut ws = NewtonWorkspace::new(ybus.n(), map.len());
    full_newton(ybus, map, injections, state, opts, &mut ws)
}

/// Buffers for repeated solves with one unknown layout, plus the most
/// recent Jacobian factorization.
#[derive(Debug, Clone)]
pub struct NewtonWorkspace {
    pc: Vec<f64>,
    qc: Vec<f64>,
    rhs: DVector<f64>,
    jac: DMatrix<f64>,
    lu: Option<LU<f64, Dyn, Dyn>>,
    start: AlgebraicState,
}

impl NewtonWorkspace {
    pub fn new(n_buses: usize, n_unknowns: usize) -> Self {
        NewtonWorkspace {
            pc: vec![0.0; n_buses],
            qc: vec![0.0; n_buses],
            rhs: DVector::zeros(n_unknowns),
            jac: DMatrix::zeros(n_unknowns, n_unknowns),
            lu: None,
            start: AlgebraicState {
                v: vec![0.0; n_buses],
                theta: vec![0.0; n_buses],
            },
        }
    }

    /// Residual at `state` into `rhs` (negated, ready for the solve);
    /// returns its max norm.
    fn residual<I: InjectionModel + ?Sized>(
        &mut self,
        ybus: &AdmittanceMatrix,
        map: &UnknownMap,
        injections: &I,
        state: &AlgebraicState,
    ) -> f64 {
        network_injections_into(state, ybus, &mut self.pc, &mut self.qc);
        let mut norm = 0.0_f64;
        for i in 0..ybus.n() {
            let (rp, rq) = (map.theta_index(i), map.v_index(i));
            if rp.is_none() && rq.is_none() {
                continue;
            }
            let inj = injections.injection(i, state.v[i], state.theta[i]);
            if let Some(k) = rp {
                let g = inj.p - self.pc[i];
                self.rhs[k] = -g;
                norm = norm.max(g.abs());
            }
            if let Some(k) = rq {
                let g = inj.q - self.qc[i];
                self.rhs[k] = -g;
                norm = norm.max(g.abs());
            }
        }
        if norm.is_nan() {
            f64::INFINITY
        } else {
            norm
        }
    }
}

fn full_newton<I: InjectionModel + ?Sized>(
    ybus: &AdmittanceMatrix,
    map: &UnknownMap,
    injections: &I,
    state: &mut AlgebraicState,
    opts: &NewtonOptions,
    ws: &mut NewtonWorkspace,
) -> Result<NewtonReport, PowerFlowError> {
    for iter in 0..=opts.max_iter {
        let norm = ws.residual(ybus, map, injections, state);
        if !norm.is_finite() {
            return Err(PowerFlowError::Diverged { mismatch: norm });
        }
        if norm <= opts.tol {
            return Ok(NewtonReport {
                iterations: iter,
                mismatch: norm,
            });
        }
        if iter == opts.max_iter {
            return Err(PowerFlowError::NonConvergence {
                iterations: iter,
                mismatch: norm,
            });
        }
        fill_jacobian(state, ybus, injections, map, &ws.pc, &ws.qc, &mut ws.jac);
        let lu = ws.jac.clone().lu();
        if !lu.solve_mut(&mut ws.rhs) {
            ws.lu = None;
            return Err(PowerFlowError::SingularJacobian);
        }
        ws.lu = Some(lu);
        map.add_update(state, &ws.rhs);
        if state.v.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(PowerFlowError::Diverged { mismatch: norm });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Chord iterations with the stored factorization; `true` on convergence.
fn chord<I: InjectionModel + ?Sized>(
    ybus: &AdmittanceMatrix,
    map: &UnknownMap,
    injections: &I,
    state: &mut AlgebraicState,
    opts: &NewtonOptions,
    ws: &mut NewtonWorkspace,
) -> Option<NewtonReport> {
    const MAX_CHORD: usize = 6;
    let lu = ws.lu.take()?;
    let mut prev = f64::INFINITY;
    let mut report = None;
    for iter in 0..=MAX_CHORD {
        let norm = ws.residual(ybus, map, injections, state);
        if norm <= opts.tol {
            report = Some(NewtonReport {
                iterations: iter,
                mismatch: norm,
            });
            break;
        }
        // Give up unless the residual contracts quickly.
        if !norm.is_finite() || norm > 0.25 * prev || iter == MAX_CHORD {
            break;
        }
        prev = norm;
        if !lu.solve_mut(&mut ws.rhs) {
            break;
        }
        map.add_update(state, &ws.rhs);
    }
    ws.lu = Some(lu);
    report
}

/// Newton solve that first tries chord steps with the factorization left in
/// `ws` by the previous call and falls back to full Newton from the same
/// starting point. Failure means full Newton failed.
pub fn newton_solve_reusing<I: InjectionModel + ?Sized>(
    ybus: &AdmittanceMatrix,
    map: &UnknownMap,
    injections: &I,
    state: &mut AlgebraicState,
    opts: &NewtonOptions,
    ws: &mut NewtonWorkspace,
) -> Result<NewtonReport, PowerFlowError> {
    if ws.lu.is_some() {
        ws.start.clone_from(state);
        if let Some(r) = chord(ybus, map, injections, state, opts, ws) {
            return Ok(r);
        }
        state.clone_from(&ws.start);
    }
    full_newton(ybus, map, injections, state, opts, ws)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerFlowOptions {
    pub newton: NewtonOptions,
    /// Switch PV buses to fixed reactive output when a limit is hit.
    pub enforce_q_limits: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub state: AlgebraicState,
    pub iterations: usize,
    pub mismatch: f64,
    /// Final bus roles (differs from the case when Q limits switched a bus).
    pub roles: Vec<BusRole>,
    /// Network flow out of each bus minus the imposed injection: the
    /// correction the slack (P, Q) and voltage-controlled buses (Q) supply.
    pub gen_p: Vec<f64>,
    pub gen_q: Vec<f64>,
}

/// Scheduled generation minus static load at every bus.
pub fn scheduled_injections(case: &NetworkCase) -> Vec<Complex64> {
    case.buses
        .iter()
        .map(|b| {
            let (pl, ql) = case.static_load_at(b.id);
            Complex64::new(case.scheduled_generation_at(b.id) - pl, -ql)
        })
        .collect()
}

/// Newton–Raphson power flow from a flat start.
///
/// `injections[i]` is the fixed net injection at bus `i`; at PV buses only
/// its active part is imposed and at the slack bus neither part is.
pub fn solve_power_flow(
    case: &NetworkCase,
    injections: &[Complex64],
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution, PowerFlowError> {
    let ybus = build_admittance(case);
    solve_power_flow_with(case, &ybus, injections, opts)
}

pub fn solve_power_flow_with<I: InjectionModel + ?Sized>(
    case: &NetworkCase,
    ybus: &AdmittanceMatrix,
    injections: &I,
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution, PowerFlowError> {
    let n = case.n_buses();
    let mut roles: Vec<BusRole> = case.buses.iter().map(|b| b.kind.into()).collect();
    let mut inj = FixedReactive {
        inner: injections,
        extra_q: vec![0.0; n],
    };
    let mut state = AlgebraicState::flat(case);
    let mut total_iter = 0;
    // Each pass can only move buses from PV to PQ, so this terminates.
    loop {
        let map = UnknownMap::new(&roles);
        let report = newton_solve(ybus, &map, &inj, &mut state, &opts.newton)?;
        total_iter += report.iterations;
        let (pc, qc) = network_injections(&state, ybus);
        let (mut gen_p, mut gen_q) = (pc, qc);
        for i in 0..n {
            let own = injections.injection(i, state.v[i], state.theta[i]);
            gen_p[i] -= own.p;
            gen_q[i] -= own.q;
        }

        let mut switched = false;
        if opts.enforce_q_limits {
            for (i, bus) in case.buses.iter().enumerate() {
                if roles[i] != BusRole::VoltageControlled {
                    continue;
                }
                let (qmin, qmax) = case
                    .generators
                    .iter()
                    .filter(|g| g.bus == bus.id)
                    .fold((0.0, 0.0), |(lo, hi), g| (lo + g.q_min, hi + g.q_max));
                let limit = if gen_q[i] > qmax {
                    Some(qmax)
                } else if gen_q[i] < qmin {
                    Some(qmin)
                } else {
                    None
                };
                if let Some(q) = limit {
                    roles[i] = BusRole::Free;
                    inj.extra_q[i] = q;
                    switched = true;
                }
            }
        }
        if !switched {
            return Ok(PowerFlowSolution {
                state,
                iterations: total_iter,
                mismatch: report.mismatch,
                roles,
                gen_p,
                gen_q,
            });
        }
    }
}

/// Adds the reactive output of generators held at a limit.
struct FixedReactive<'a, I: ?Sized> {
    inner: &'a I,
    extra_q: Vec<f64>,
}

impl<I: InjectionModel + ?Sized> InjectionModel for FixedReactive<'_, I> {
    fn injection(&self, bus: usize, v: f64, theta: f64) -> LocalInjection {
        let mut inj = self.inner.injection(bus, v, theta);
        inj.q += self.extra_q[bus];
        inj
    }
}
