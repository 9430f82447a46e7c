//! Exponential recovery load with a stochastic nominal power.
//!
//! ```text
//! ẋp = -xp/Tp + ps - pt        ps = (p0 + ηp) (V/V0)^αs    pt = (p0 + ηp) (V/V0)^αt
//! ẋq = -xq/Tq + qs - qt        qs = (q0 + ηq) (V/V0)^βs    qt = (q0 + ηq) (V/V0)^βt
//! p  = xp/Tp + pt
//! q  = xq/Tq + qt
//! ```

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErlModel {
    pub p0: f64,
    pub q0: f64,
    pub tp: f64,
    pub tq: f64,
    pub alpha_s: f64,
    pub alpha_t: f64,
    pub beta_s: f64,
    pub beta_t: f64,
    pub v0: f64,
    /// OU channel perturbing `p0`, if any.
    pub noise_p: Option<usize>,
    /// OU channel perturbing `q0`, if any.
    pub noise_q: Option<usize>,
}

impl ErlModel {
    /// Default dynamics around the given nominal powers.
    pub fn with_nominal(p0: f64, q0: f64) -> Self {
        ErlModel {
            p0,
            q0,
            tp: 30.0,
            tq: 30.0,
            alpha_s: 0.0,
            alpha_t: 2.0,
            beta_s: 0.0,
            beta_t: 2.0,
            v0: 1.0,
            noise_p: None,
            noise_q: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErlState {
    pub xp: f64,
    pub xq: f64,
}

/// Static and transient characteristics at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlCharacteristics {
    pub ps: f64,
    pub pt: f64,
    pub qs: f64,
    pub qt: f64,
}

pub fn erl_characteristics(model: &ErlModel, v: f64, eta_p: f64, eta_q: f64) -> ErlCharacteristics {
    let r = v / model.v0;
    let pn = model.p0 + eta_p;
    let qn = model.q0 + eta_q;
    ErlCharacteristics {
        ps: pn * r.powf(model.alpha_s),
        pt: pn * r.powf(model.alpha_t),
        qs: qn * r.powf(model.beta_s),
        qt: qn * r.powf(model.beta_t),
    }
}

/// Recovery states that put the load at rest at voltage `v`.
pub fn erl_initialize(model: &ErlModel, v: f64, eta_p: f64, eta_q: f64) -> ErlState {
    let c = erl_characteristics(model, v, eta_p, eta_q);
    ErlState {
        xp: model.tp * (c.ps - c.pt),
        xq: model.tq * (c.qs - c.qt),
    }
}

pub fn erl_derivatives(model: &ErlModel, state: &ErlState, v: f64, eta_p: f64, eta_q: f64) -> (f64, f64) {
    let c = erl_characteristics(model, v, eta_p, eta_q);
    (
        -state.xp / model.tp + c.ps - c.pt,
        -state.xq / model.tq + c.qs - c.qt,
    )
}

/// Power drawn by the load.
pub fn erl_power(model: &ErlModel, state: &ErlState, v: f64, eta_p: f64, eta_q: f64) -> (f64, f64) {
    let c = erl_characteristics(model, v, eta_p, eta_q);
    (state.xp / model.tp + c.pt, state.xq / model.tq + c.qt)
}

/// `∂(p, q)/∂V` of [`erl_power`] with the recovery states held fixed.
pub fn erl_power_voltage_sensitivity(model: &ErlModel, v: f64, eta_p: f64, eta_q: f64) -> (f64, f64) {
    let r = v / model.v0;
    let pn = model.p0 + eta_p;
    let qn = model.q0 + eta_q;
    (
        pn * model.alpha_t * r.powf(model.alpha_t - 1.0) / model.v0,
        qn * model.beta_t * r.powf(model.beta_t - 1.0) / model.v0,
    )
}

/// Steady-state draw `(ps, qs)` and its voltage sensitivity, i.e. the load
/// seen by the network once the recovery states have settled.
pub fn erl_steady_power(model: &ErlModel, v: f64, eta_p: f64, eta_q: f64) -> ((f64, f64), (f64, f64)) {
    let r = v / model.v0;
    let pn = model.p0 + eta_p;
    let qn = model.q0 + eta_q;
    (
        (pn * r.powf(model.alpha_s), qn * r.powf(model.beta_s)),
        (
            pn * model.alpha_s * r.powf(model.alpha_s - 1.0) / model.v0,
            qn * model.beta_s * r.powf(model.beta_s - 1.0) / model.v0,
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model() -> ErlModel {
        ErlModel::with_nominal(1.0, 0.5)
    }

    #[test]
    fn nominal_voltage_identity() {
        let m = model();
        let s = erl_initialize(&m, 1.0, 0.0, 0.0);
        assert_eq!(s, ErlState { xp: 0.0, xq: 0.0 });
        assert_eq!(erl_power(&m, &s, 1.0, 0.0, 0.0), (1.0, 0.5));
    }

    #[test]
    fn off_nominal_initialization() {
        let m = model();
        let s = erl_initialize(&m, 0.98, 0.0, 0.0);
        assert!((s.xp - 30.0 * (1.0 - 0.98 * 0.98)).abs() < 1e-12);
        let (p, _) = erl_power(&m, &s, 0.98, 0.0, 0.0);
        assert!((p - 1.0).abs() < 1e-14);
        assert_eq!(erl_derivatives(&m, &s, 0.98, 0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn hand_evaluated_derivatives() {
        let m = model();
        let (dxp, _) = erl_derivatives(&m, &ErlState { xp: 1.0, xq: 0.0 }, 1.0, 0.0, 0.0);
        assert!((dxp + 1.0 / 30.0).abs() < 1e-15);
        let (dxp, _) = erl_derivatives(&m, &ErlState::default(), 0.95, 0.02, 0.0);
        // 1.02 * (1 - 0.9025)
        assert!((dxp - 0.09945).abs() < 1e-12);
    }

    #[test]
    fn power_is_direct_sum() {
        let m = model();
        // xp/Tp = 0.01, pt = 0.95 at V such that V² = 0.95
        let (p, _) = erl_power(&m, &ErlState { xp: 0.3, xq: 0.0 }, 0.95f64.sqrt(), 0.0, 0.0);
        assert!((p - 0.96).abs() < 1e-12);
    }

    #[test]
    fn noise_scales_every_power() {
        let m = model();
        let base = erl_initialize(&m, 0.97, 0.0, 0.0);
        let noisy = erl_initialize(&m, 0.97, 0.05, 0.0);
        assert!((noisy.xp / base.xp - 1.05).abs() < 1e-12);
        let (p0, _) = erl_power(&m, &base, 0.97, 0.0, 0.0);
        let (p1, _) = erl_power(&m, &noisy, 0.97, 0.05, 0.0);
        assert!((p1 / p0 - 1.05).abs() < 1e-12);
    }

    /// A step from 1.0 to 0.95 pu drops the draw by 0.9025 and the recovery
    /// brings it back toward the constant-power steady state. Reference: RK4
    /// at 1e-4 s; the closed form is p(t) = 1 - (1 - 0.9025) e^{-t/Tp}.
    #[test]
    fn voltage_step_recovery() {
        let m = model();
        let mut s = erl_initialize(&m, 1.0, 0.0, 0.0);
        let (p_jump, _) = erl_power(&m, &s, 0.95, 0.0, 0.0);
        assert!((p_jump - 0.9025).abs() < 1e-14);

        let h = 1e-4;
        let f = |x: f64| -x / m.tp + 1.0 - 0.9025;
        for _ in 0..(60.0 / h) as usize {
            let k1 = f(s.xp);
            let k2 = f(s.xp + 0.5 * h * k1);
            let k3 = f(s.xp + 0.5 * h * k2);
            let k4 = f(s.xp + h * k3);
            s.xp += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let (p, _) = erl_power(&m, &s, 0.95, 0.0, 0.0);
        let exact = 1.0 - 0.0975 * (-60.0f64 / 30.0).exp();
        assert!((p - exact).abs() < 1e-6, "{p} vs {exact}");
    }

    #[test]
    fn voltage_sensitivity_matches_central_differences() {
        let m = ErlModel {
            alpha_t: 1.7,
            beta_t: 2.3,
            ..model()
        };
        let s = ErlState { xp: 0.2, xq: -0.1 };
        for &v in &[0.7, 0.93, 1.04] {
            let h = 1e-6;
            let (pp, qp) = erl_power(&m, &s, v + h, 0.01, -0.02);
            let (pm, qm) = erl_power(&m, &s, v - h, 0.01, -0.02);
            let (dp, dq) = erl_power_voltage_sensitivity(&m, v, 0.01, -0.02);
            assert!((dp - (pp - pm) / (2.0 * h)).abs() < 1e-8);
            assert!((dq - (qp - qm) / (2.0 * h)).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn doubling_nominal_doubles_everything(
            p0 in 0.01f64..3.0, eta in -0.5f64..0.5, v in 0.6f64..1.2,
            a_s in 0.0f64..2.0, a_t in 0.0f64..3.0,
        ) {
            let m1 = ErlModel { p0, alpha_s: a_s, alpha_t: a_t, ..model() };
            let m2 = ErlModel { p0: 2.0 * (p0 + eta), ..m1.clone() };
            let c1 = erl_characteristics(&m1, v, eta, 0.0);
            let c2 = erl_characteristics(&m2, v, 0.0, 0.0);
            prop_assert!((c2.ps - 2.0 * c1.ps).abs() <= 1e-12 * c2.ps.abs().max(1.0));
            prop_assert!((c2.pt - 2.0 * c1.pt).abs() <= 1e-12 * c2.pt.abs().max(1.0));
            let s1 = erl_initialize(&m1, v, eta, 0.0);
            let s2 = erl_initialize(&m2, v, 0.0, 0.0);
            let (e1, _) = erl_power(&m1, &s1, v, eta, 0.0);
            let (e2, _) = erl_power(&m2, &s2, v, 0.0, 0.0);
            prop_assert!((e2 - 2.0 * e1).abs() <= 1e-12 * e2.abs().max(1.0));
        }
    }
}
