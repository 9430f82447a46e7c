use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampMode {
    /// λ jumps by `step_fraction` every `interval` seconds.
    #[default]
    Discrete,
    /// λ grows linearly at `step_fraction / interval` per second.
    Continuous,
}

/// Load growth `P(t) = P0 (1 + λ(t))`, `Q(t) = Q0 (1 + λ(t))` at one PQ bus.
#[derive(Debug, Clone, PartialEq)]
pub struct RampSchedule {
    pub bus: u32,
    pub p0_ref: f64,
    pub q0_ref: f64,
    pub step_fraction: f64,
    pub interval: f64,
    pub mode: RampMode,
}

impl RampSchedule {
    /// Loading factor at time `t`.
    pub fn lambda(&self, t: f64) -> f64 {
        let mut r = t / self.interval;
        // t is usually k * dt; snap values that land on a step boundary up to
        // rounding so that floor() does not miss the step.
        let k = r.round();
        if (r - k).abs() <= 1e-9 * k.abs().max(1.0) {
            r = k;
        }
        match self.mode {
            RampMode::Discrete => self.step_fraction * r.floor(),
            RampMode::Continuous => self.step_fraction * r,
        }
    }

    /// Active and reactive demand of the ramped load at time `t`.
    pub fn value(&self, t: f64) -> (f64, f64) {
        let l = self.lambda(t);
        (self.p0_ref * (1.0 + l), self.q0_ref * (1.0 + l))
    }

    /// Margin reported for loading factor `lambda`.
    pub fn margin(&self, lambda: f64) -> f64 {
        lambda * self.p0_ref
    }
}

/// Demand `(P, Q)` of the ramped load at time `t`.
pub fn ramp_value(sched: &RampSchedule, t: f64) -> (f64, f64) {
    sched.value(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sched(mode: RampMode, interval: f64) -> RampSchedule {
        RampSchedule {
            bus: 4,
            p0_ref: 0.478,
            q0_ref: -0.039,
            step_fraction: 0.02,
            interval,
            mode,
        }
    }

    #[test]
    fn starts_at_nominal() {
        assert_eq!(ramp_value(&sched(RampMode::Discrete, 1.0), 0.0), (0.478, -0.039));
        assert_eq!(ramp_value(&sched(RampMode::Continuous, 1.0), 0.0), (0.478, -0.039));
    }

    #[test]
    fn discrete_and_continuous_at_mid_step() {
        let d = sched(RampMode::Discrete, 1.0);
        assert!((d.lambda(2.5) - 0.04).abs() < 1e-15);
        assert!((d.value(2.5).0 - 1.04 * 0.478).abs() < 1e-15);
        let c = sched(RampMode::Continuous, 1.0);
        assert!((c.lambda(2.5) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn step_boundaries_on_the_integration_grid() {
        let d = sched(RampMode::Discrete, 0.1);
        // t = 2 * 0.05 must already count the first step
        assert_eq!(d.lambda(2.0 * 0.05), 0.02);
        assert_eq!(d.lambda(0.3 - 1e-3), 0.04);
        for n in 0..10_000u32 {
            let t = f64::from(n) * 0.05;
            let expected = 0.02 * (f64::from(n) / 2.0).floor();
            assert!((d.lambda(t) - expected).abs() < 1e-12, "n={n}");
        }
    }

    proptest! {
        #[test]
        fn non_decreasing(t1 in 0.0f64..500.0, dt in 0.0f64..50.0, interval in 0.05f64..10.0) {
            for mode in [RampMode::Discrete, RampMode::Continuous] {
                let s = sched(mode, interval);
                let (p1, _) = s.value(t1);
                let (p2, _) = s.value(t1 + dt);
                prop_assert!(p2 >= p1);
                prop_assert!(s.lambda(t1 + dt) >= s.lambda(t1));
            }
        }

        #[test]
        fn modes_agree_on_step_times(k in 0u32..2000, interval in 0.05f64..10.0) {
            let t = f64::from(k) * interval;
            let d = sched(RampMode::Discrete, interval);
            let c = sched(RampMode::Continuous, interval);
            prop_assert_eq!(d.lambda(t), c.lambda(t));
            prop_assert_eq!(d.value(t), c.value(t));
        }
    }
}
