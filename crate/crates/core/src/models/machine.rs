//! Synchronous machines behind a transient reactance.
//!
//! Stator relations (zero armature resistance, `x'q = x'd`), with
//! `φ = δ - θ`:
//!
//! ```text
//! v_d = V sin φ                 v_q = V cos φ
//! i_d = (e'q - v_q) / x'd       i_q = (v_d - e'd) / x'd
//! P_e = V (e'q sin φ - e'd cos φ) / x'd
//! Q_e = (V (e'q cos φ + e'd sin φ) - V²) / x'd
//! ```
//!
//! The classical model keeps `e'q` constant and `e'd = 0`; the two-axis
//! model adds the transient flux equations with constant field voltage.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::network::LocalInjection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MachineOrder {
    #[default]
    Classical,
    TwoAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineModel {
    pub bus: u32,
    pub order: MachineOrder,
    /// Inertia constant M = 2H (s).
    pub m: f64,
    pub d: f64,
    pub xd_prime: f64,
    pub xd: f64,
    pub xq: f64,
    pub td0_prime: f64,
    pub tq0_prime: f64,
}

impl MachineModel {
    pub fn classical(bus: u32) -> Self {
        MachineModel {
            bus,
            order: MachineOrder::Classical,
            m: 10.0,
            d: 2.0,
            xd_prime: 0.25,
            xd: 1.8,
            xq: 1.7,
            td0_prime: 6.0,
            tq0_prime: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MachineState {
    pub delta: f64,
    pub omega: f64,
    pub eq_prime: f64,
    pub ed_prime: f64,
}

/// Quantities fixed at initialization: mechanical power and field voltage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MachineSetpoints {
    pub pm: f64,
    pub efd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MachineDerivatives {
    pub delta: f64,
    pub omega: f64,
    pub eq_prime: f64,
    pub ed_prime: f64,
}

/// Electrical output and its sensitivity to the terminal voltage.
pub fn machine_injection(model: &MachineModel, st: &MachineState, v: f64, theta: f64) -> LocalInjection {
    let (s, c) = (st.delta - theta).sin_cos();
    let x = model.xd_prime;
    let a = st.eq_prime * s - st.ed_prime * c;
    let b = st.eq_prime * c + st.ed_prime * s;
    LocalInjection {
        p: v * a / x,
        q: (v * b - v * v) / x,
        dp_dv: a / x,
        dq_dv: (b - 2.0 * v) / x,
        dp_dtheta: -v * b / x,
        dq_dtheta: v * a / x,
    }
}

/// dq-axis stator currents.
fn stator_currents(model: &MachineModel, st: &MachineState, v: f64, theta: f64) -> (f64, f64) {
    let (s, c) = (st.delta - theta).sin_cos();
    (
        (st.eq_prime - v * c) / model.xd_prime,
        (v * s - st.ed_prime) / model.xd_prime,
    )
}

/// Swing and flux derivatives at terminal voltage `v∠theta`.
pub fn machine_derivatives(
    model: &MachineModel,
    st: &MachineState,
    set: &MachineSetpoints,
    v: f64,
    theta: f64,
    omega_base: f64,
) -> MachineDerivatives {
    let pe = machine_injection(model, st, v, theta).p;
    let mut d = MachineDerivatives {
        delta: omega_base * (st.omega - 1.0),
        omega: (set.pm - pe - model.d * (st.omega - 1.0)) / model.m,
        eq_prime: 0.0,
        ed_prime: 0.0,
    };
    if model.order == MachineOrder::TwoAxis {
        let (id, iq) = stator_currents(model, st, v, theta);
        d.eq_prime = (set.efd - st.eq_prime - (model.xd - model.xd_prime) * id) / model.td0_prime;
        d.ed_prime = (-st.ed_prime + (model.xq - model.xd_prime) * iq) / model.tq0_prime;
    }
    d
}

/// Machine state in equilibrium with terminal voltage `v∠theta` while
/// delivering `p + jq`.
pub fn machine_initialize(
    model: &MachineModel,
    v: f64,
    theta: f64,
    p: f64,
    q: f64,
) -> (MachineState, MachineSetpoints) {
    let vt = Complex64::from_polar(v, theta);
    let i = (Complex64::new(p, q) / vt).conj();
    match model.order {
        MachineOrder::Classical => {
            let e = vt + Complex64::new(0.0, model.xd_prime) * i;
            (
                MachineState {
                    delta: e.arg(),
                    omega: 1.0,
                    eq_prime: e.norm(),
                    ed_prime: 0.0,
                },
                MachineSetpoints { pm: p, efd: e.norm() },
            )
        }
        MachineOrder::TwoAxis => {
            let delta = (vt + Complex64::new(0.0, model.xq) * i).arg();
            // rotate into the dq frame: (d + jq) = x e^{-j(δ - π/2)}
            let rot = Complex64::from_polar(1.0, -(delta - std::f64::consts::FRAC_PI_2));
            let idq = i * rot;
            let vdq = vt * rot;
            let (id, iq) = (idq.re, idq.im);
            let (vd, vq) = (vdq.re, vdq.im);
            let ed = vd - model.xd_prime * iq;
            let eq = vq + model.xd_prime * id;
            let efd = eq + (model.xd - model.xd_prime) * id;
            (
                MachineState {
                    delta,
                    omega: 1.0,
                    eq_prime: eq,
                    ed_prime: ed,
                },
                MachineSetpoints { pm: p, efd },
            )
        }
    }
}

/// Electrical potential whose δ-derivative is the air-gap power,
/// `W(δ) = -V (e'q cos φ + e'd sin φ) / x'd`.
pub fn electrical_potential(model: &MachineModel, st: &MachineState, v: f64, theta: f64) -> f64 {
    let (s, c) = (st.delta - theta).sin_cos();
    -v * (st.eq_prime * c + st.ed_prime * s) / model.xd_prime
}
