//! Vector Ornstein–Uhlenbeck load noise.
//!
//! Each channel follows `dη = -α η dt + σ β dW` with independent Wiener
//! increments. The stationary law is `N(0, (σβ)² / 2α)` with autocorrelation
//! `exp(-α |τ|)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Mean-reversion rate and relative strength of one noise channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuChannel {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for OuChannel {
    fn default() -> Self {
        OuChannel {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl OuChannel {
    /// Stationary standard deviation for intensity `sigma`.
    pub fn stationary_sd(&self, sigma: f64) -> f64 {
        sigma * self.beta / (2.0 * self.alpha).sqrt()
    }
}

/// How the noise state is advanced over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuScheme {
    /// `η ← η - α η dt + σ β √dt z`
    #[default]
    EulerMaruyama,
    /// `η ← e^{-α dt} η + σ β √((1 - e^{-2α dt}) / 2α) z`, exact in law.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuProcess {
    pub eta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: f64,
}

impl OuProcess {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
}

/// Draw each channel from its stationary law.
pub fn ou_initialize<R: Rng + ?Sized>(channels: &[OuChannel], sigma: f64, rng: &mut R) -> OuProcess {
    let eta = channels
        .iter()
        .map(|c| {
            let sd = c.stationary_sd(sigma);
            if sd == 0.0 {
                0.0
            } else {
                sd * rng.sample::<f64, _>(StandardNormal)
            }
        })
        .collect();
    OuProcess {
        eta,
        alpha: channels.iter().map(|c| c.alpha).collect(),
        beta: channels.iter().map(|c| c.beta).collect(),
        sigma,
    }
}

/// Advance every channel by `dt`, one standard normal draw per channel.
pub fn ou_step<R: Rng + ?Sized>(proc: &mut OuProcess, dt: f64, scheme: OuScheme, rng: &mut R) {
    let sqrt_dt = dt.sqrt();
    for i in 0..proc.eta.len() {
        let (a, b) = (proc.alpha[i], proc.beta[i]);
        let scale = proc.sigma * b;
        let z = if scale == 0.0 {
            0.0
        } else {
            rng.sample::<f64, _>(StandardNormal)
        };
        proc.eta[i] = match scheme {
            OuScheme::EulerMaruyama => proc.eta[i] - a * proc.eta[i] * dt + scale * sqrt_dt * z,
            OuScheme::Exact => {
                let decay = (-a * dt).exp();
                decay * proc.eta[i] + scale * ((1.0 - decay * decay) / (2.0 * a)).sqrt() * z
            }
        };
    }
}

/// Stationary variance of the Euler–Maruyama recursion,
/// `σ²β² dt / (2α dt − α² dt²)`.
pub fn euler_maruyama_stationary_variance(channel: &OuChannel, sigma: f64, dt: f64) -> f64 {
    let a = channel.alpha;
    (sigma * channel.beta).powi(2) * dt / (2.0 * a * dt - a * a * dt * dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::run_stream;

    #[test]
    fn zero_sigma_initializes_to_zero() {
        let mut rng = run_stream(7, 0);
        let p = ou_initialize(&[OuChannel::default(); 3], 0.0, &mut rng);
        assert_eq!(p.eta, vec![0.0; 3]);
    }

    #[test]
    fn deterministic_decay() {
        let mut rng = run_stream(1, 0);
        let mut p = ou_initialize(&[OuChannel::default()], 0.0, &mut rng);
        p.eta[0] = 1.0;
        ou_step(&mut p, 0.05, OuScheme::EulerMaruyama, &mut rng);
        assert_eq!(p.eta[0], 0.95);
        let mut q = p.clone();
        q.eta[0] = 1.0;
        ou_step(&mut q, 0.05, OuScheme::Exact, &mut rng);
        assert!((q.eta[0] - (-0.05f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn stationary_initial_variance() {
        // (σβ)²/2α = 0.01 / 2 = 0.005
        let ch = [OuChannel::default(); 2];
        let mut rng = run_stream(11, 3);
        let n = 100_000;
        let (mut s0, mut s00, mut s1, mut s11, mut s01) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let p = ou_initialize(&ch, 0.1, &mut rng);
            let (a, b) = (p.eta[0], p.eta[1]);
            s0 += a;
            s00 += a * a;
            s1 += b;
            s11 += b * b;
            s01 += a * b;
        }
        let nf = n as f64;
        let var0 = s00 / nf - (s0 / nf).powi(2);
        let var1 = s11 / nf - (s1 / nf).powi(2);
        assert!((var0 / 0.005 - 1.0).abs() < 0.05, "var0 {var0}");
        assert!((var1 / 0.005 - 1.0).abs() < 0.05, "var1 {var1}");
        let cov = s01 / nf - (s0 / nf) * (s1 / nf);
        let rho = cov / (var0 * var1).sqrt();
        assert!(rho.abs() < 0.02, "rho {rho}");
    }

    #[test]
    fn euler_maruyama_variance_formula() {
        let v = euler_maruyama_stationary_variance(&OuChannel::default(), 0.1, 0.05);
        // 0.01 * 0.05 / (0.1 - 0.0025)
        assert!((v - 0.0005 / 0.0975).abs() < 1e-18);
        assert!(v > 0.005);
    }
}
