use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::defaults;
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::seed;

/// Spectral diffusion (Ornstein-Uhlenbeck detuning) plus fast Markovian
/// pure dephasing of the optical coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Stationary standard deviation of the detuning, rad/s.
    pub sigma: f64,
    /// Correlation time, s.
    pub tau_c: f64,
    /// Pure dephasing rate, 1/s. Optical coherences decay at gamma_phi / 2.
    pub gamma_phi: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        let gamma_phi = 2.0 / defaults::ECHO_T2;
        NoiseModel {
            sigma: quasi_static_sigma(defaults::RAMSEY_T2_STAR, gamma_phi),
            tau_c: defaults::SPECTRAL_DIFFUSION_TAU_C,
            gamma_phi,
        }
    }
}

/// OU amplitude that puts the 1/e point of the Ramsey envelope
/// `exp(-gamma_phi t / 2 - sigma^2 t^2 / 2)` at `t2_star`.
pub fn quasi_static_sigma(t2_star: f64, gamma_phi: f64) -> f64 {
    let residual = 1.0 - 0.5 * gamma_phi * t2_star;
    if residual <= 0.0 {
        0.0
    } else {
        (2.0 * residual).sqrt() / t2_star
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            sigma: 0.0,
            tau_c: defaults::SPECTRAL_DIFFUSION_TAU_C,
            gamma_phi: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("noise.sigma", self.sigma)?;
        ensure_positive("noise.tau_c", self.tau_c)?;
        ensure_non_negative("noise.gamma_phi", self.gamma_phi)
    }

    /// Integrator step cap: noise is frozen per step, at most tau_c / 100.
    pub fn max_step(&self) -> f64 {
        if self.sigma > 0.0 {
            self.tau_c / 100.0
        } else {
            f64::INFINITY
        }
    }
}

/// Exact OU discretization on a uniform grid, started from the stationary
/// distribution. Returns `n_steps` detuning values in rad/s.
pub fn sample_ou(noise: &NoiseModel, dt: f64, n_steps: usize, seed: u64) -> Result<Vec<f64>> {
    noise.validate()?;
    ensure_positive("dt", dt)?;
    let mut rng = seed::rng(seed);
    let z0 = rng.sample::<f64, _>(StandardNormal);
    Ok(sample_ou_from(noise, dt, n_steps, z0, &mut rng))
}

/// As [`sample_ou`], with the starting value drawn from stratum `k` of `n`
/// equal-probability slices of the stationary distribution. Averages over
/// all `n` strata are unbiased and far less noisy in the quasi-static
/// limit.
pub fn sample_ou_stratified(
    noise: &NoiseModel,
    dt: f64,
    n_steps: usize,
    seed: u64,
    (k, n): (usize, usize),
) -> Result<Vec<f64>> {
    noise.validate()?;
    ensure_positive("dt", dt)?;
    if k >= n {
        return Err(Error::invalid("stratum", format!("index {k} outside {n} strata")));
    }
    let mut rng = seed::rng(seed);
    let u = (k as f64 + rng.random::<f64>()) / n as f64;
    let z0 = Normal::standard().inverse_cdf(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
    Ok(sample_ou_from(noise, dt, n_steps, z0, &mut rng))
}

fn sample_ou_from<R: Rng + ?Sized>(noise: &NoiseModel, dt: f64, n_steps: usize, z0: f64, rng: &mut R) -> Vec<f64> {
    if noise.sigma == 0.0 {
        return vec![0.0; n_steps];
    }
    let decay = (-dt / noise.tau_c).exp();
    let kick = noise.sigma * (-(-2.0 * dt / noise.tau_c).exp_m1()).sqrt();
    let mut path = Vec::with_capacity(n_steps);
    let mut x = noise.sigma * z0;
    for _ in 0..n_steps {
        path.push(x);
        x = x * decay + kick * rng.sample::<f64, _>(StandardNormal);
    }
    path
}

/// Piecewise-constant detuning path `delta(t)` on a uniform grid starting
/// at t = 0. Beyond the last sample the final value is held.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    dt: f64,
    values: Vec<f64>,
    /// `prefix[k]` is the integral of the path over `[0, k dt)`.
    prefix: Vec<f64>,
}

impl NoiseTrace {
    pub fn zero() -> Self {
        NoiseTrace {
            dt: f64::INFINITY,
            values: Vec::new(),
            prefix: vec![0.0],
        }
    }

    /// A single frozen detuning for all times.
    pub fn constant(detuning: f64) -> Self {
        NoiseTrace {
            dt: f64::INFINITY,
            values: vec![detuning],
            prefix: vec![0.0, 0.0],
        }
    }

    pub fn new(dt: f64, values: Vec<f64>) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for v in &values {
            acc += v * dt;
            prefix.push(acc);
        }
        NoiseTrace { dt, values, prefix }
    }

    pub fn sample(noise: &NoiseModel, dt: f64, duration: f64, seed: u64) -> Result<Self> {
        if noise.sigma == 0.0 {
            return Ok(Self::zero());
        }
        let n = ((duration / dt).ceil() as usize).max(1) + 1;
        Ok(Self::new(dt, sample_ou(noise, dt, n, seed)?))
    }

    /// Path whose starting value lies in stratum `k` of `n`.
    pub fn sample_stratum(
        noise: &NoiseModel,
        dt: f64,
        duration: f64,
        seed: u64,
        stratum: (usize, usize),
    ) -> Result<Self> {
        if noise.sigma == 0.0 {
            return Ok(Self::zero());
        }
        let n = ((duration / dt).ceil() as usize).max(1) + 1;
        Ok(Self::new(dt, sample_ou_stratified(noise, dt, n, seed, stratum)?))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn index(&self, t: f64) -> usize {
        if self.values.len() <= 1 || !self.dt.is_finite() {
            return 0;
        }
        ((t / self.dt).floor().max(0.0) as usize).min(self.values.len() - 1)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values[self.index(t)]
        }
    }

    /// Accumulated phase `int_0^t delta(s) ds`.
    pub fn phase(&self, t: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        if !self.dt.is_finite() {
            return self.values[0] * t;
        }
        let k = self.index(t);
        self.prefix[k] + self.values[k] * (t - k as f64 * self.dt)
    }

    /// End of the constant piece containing `t`.
    pub fn piece_end(&self, t: f64) -> f64 {
        if self.values.len() <= 1 || !self.dt.is_finite() {
            return f64::INFINITY;
        }
        let k = self.index(t);
        if k + 1 >= self.values.len() {
            f64::INFINITY
        } else {
            (k + 1) as f64 * self.dt
        }
    }
}
