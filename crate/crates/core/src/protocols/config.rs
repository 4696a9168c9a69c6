use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::cavity::DecayRates;
use crate::defaults;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::fit::DecayModel;
use crate::ion::LevelSystem;
use crate::lindblad::DensityMatrix;
use crate::seed;

const TWO_PI: f64 = 2.0 * PI;

/// Evenly spaced scan grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Grid { start, stop, points }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        ensure_finite(field, self.start)?;
        ensure_finite(field, self.stop)?;
        if self.points == 0 {
            return Err(Error::invalid(field, "grid needs at least one point"));
        }
        if self.points > 1 && !(self.stop > self.start) {
            return Err(Error::invalid(field, "grid stop must exceed start"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.start + k as f64 * step).collect()
    }

    pub fn step(&self) -> f64 {
        if self.points > 1 {
            (self.stop - self.start) / (self.points - 1) as f64
        } else {
            0.0
        }
    }
}

/// Timing, drive strengths and scan grids shared by the protocols.
/// Drive powers are not reported for the experiment; the defaults are
/// chosen so pulses are short against every decay and coherence time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub readout_pulses: usize,
    /// s
    pub repetition_period: f64,
    /// Shots (or readout trains) per scan point.
    pub shots: usize,
    /// Rabi frequency of A readout pulses, rad/s.
    pub readout_rabi: f64,
    /// C pi pulses per initialization train.
    pub init_pulses: usize,
    pub init_rabi: f64,
    /// Rabi frequency of Ramsey and echo pulses, rad/s.
    pub coherence_rabi: f64,
    /// Deliberate laser detuning during Ramsey, rad/s.
    pub ramsey_detuning: f64,
    pub noise_samples: usize,
    pub rabi_noise_samples: usize,
    pub pump_noise_samples: usize,
    pub tol: f64,
    pub lifetime_bins: usize,
    /// Lifetime record length, s. Defaults to 8 expected lifetimes.
    pub lifetime_span: Option<f64>,
    /// Readout pulse durations, s.
    pub rabi_durations: Grid,
    pub ramsey_delays: Grid,
    pub echo_delays: Grid,
    /// Pump detuning from the C line, MHz.
    pub pump_detunings_mhz: Grid,
    pub pump_rabi: f64,
    pub pump_duration: f64,
    pub pump_pulses: usize,
    pub ramsey_fit: DecayModel,
    pub echo_fit: DecayModel,
    /// Relative ground-level weights before any initialization.
    pub thermal_weights: BTreeMap<String, f64>,
    /// Draw Poisson counts instead of reporting expected counts.
    pub poisson_counts: bool,
    pub g2_max_lag: usize,
    pub g2_far_lag: usize,
    pub g2_bin_width: f64,
    pub n_emitters: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let thermal_weights = [("g0", 1.0), ("g1", 1.0), ("gaux", 2.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        ProtocolConfig {
            readout_pulses: defaults::READOUT_PULSES_PER_INIT,
            repetition_period: defaults::REPETITION_PERIOD,
            shots: 10_000,
            readout_rabi: TWO_PI * 20e6,
            init_pulses: 10,
            init_rabi: TWO_PI * 20e6,
            coherence_rabi: TWO_PI * 100e6,
            ramsey_detuning: TWO_PI * 10e6,
            noise_samples: 200,
            rabi_noise_samples: 20,
            pump_noise_samples: 50,
            tol: 1e-8,
            lifetime_bins: 80,
            lifetime_span: None,
            rabi_durations: Grid::new(0.0, 100e-9, 41),
            ramsey_delays: Grid::new(0.0, 200e-9, 41),
            echo_delays: Grid::new(0.0, 1000e-9, 41),
            pump_detunings_mhz: Grid::new(-20.0, 20.0, 41),
            pump_rabi: TWO_PI * 2e6,
            pump_duration: 250e-9,
            pump_pulses: 20,
            ramsey_fit: DecayModel::Gaussian,
            echo_fit: DecayModel::Exponential,
            thermal_weights,
            poisson_counts: false,
            g2_max_lag: 20,
            g2_far_lag: 10,
            g2_bin_width: 100e-9,
            n_emitters: 1,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.readout_pulses == 0 {
            return Err(Error::invalid("protocol.readout_pulses", "must be at least 1"));
        }
        if self.shots == 0 {
            return Err(Error::invalid("protocol.shots", "must be at least 1"));
        }
        for (name, n) in [
            ("protocol.noise_samples", self.noise_samples),
            ("protocol.rabi_noise_samples", self.rabi_noise_samples),
            ("protocol.pump_noise_samples", self.pump_noise_samples),
            ("protocol.lifetime_bins", self.lifetime_bins),
            ("protocol.n_emitters", self.n_emitters),
        ] {
            if n == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        ensure_positive("protocol.repetition_period", self.repetition_period)?;
        ensure_positive("protocol.readout_rabi", self.readout_rabi)?;
        ensure_positive("protocol.init_rabi", self.init_rabi)?;
        ensure_positive("protocol.coherence_rabi", self.coherence_rabi)?;
        ensure_finite("protocol.ramsey_detuning", self.ramsey_detuning)?;
        ensure_finite("protocol.pump_rabi", self.pump_rabi)?;
        if self.pump_rabi < 0.0 {
            return Err(Error::invalid("protocol.pump_rabi", "must be non-negative"));
        }
        ensure_positive("protocol.pump_duration", self.pump_duration)?;
        ensure_positive("protocol.g2_bin_width", self.g2_bin_width)?;
        if !(self.tol > 1e-12 && self.tol < 1e-3) {
            return Err(Error::invalid("protocol.tol", "must lie in (1e-12, 1e-3)"));
        }
        if let Some(span) = self.lifetime_span {
            ensure_positive("protocol.lifetime_span", span)?;
        }
        self.rabi_durations.validate("protocol.rabi_durations")?;
        self.ramsey_delays.validate("protocol.ramsey_delays")?;
        self.echo_delays.validate("protocol.echo_delays")?;
        self.pump_detunings_mhz.validate("protocol.pump_detunings_mhz")?;
        for (field, g) in [
            ("protocol.rabi_durations", &self.rabi_durations),
            ("protocol.ramsey_delays", &self.ramsey_delays),
            ("protocol.echo_delays", &self.echo_delays),
        ] {
            if g.start < 0.0 {
                return Err(Error::invalid(field, "durations must be non-negative"));
            }
        }
        if self.g2_far_lag == 0 || self.g2_far_lag > self.g2_max_lag {
            return Err(Error::invalid("protocol.g2_far_lag", "must lie in 1..=g2_max_lag"));
        }
        if self.thermal_weights.values().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("protocol.thermal_weights", "weights must be finite and non-negative"));
        }
        Ok(())
    }

    /// Spacing of pulses in trains: the repetition period, stretched to
    /// five lifetimes so each excitation has decayed before the next pulse.
    pub fn cycle_period(&self, rates: &DecayRates) -> f64 {
        let five_tau = if rates.total > 0.0 { 5.0 * rates.lifetime } else { 0.0 };
        self.repetition_period.max(five_tau)
    }

    /// Uninitialized state: ground levels weighted by `thermal_weights`.
    pub fn thermal_state(&self, levels: &LevelSystem) -> Result<DensityMatrix> {
        let mut pops = vec![0.0; levels.dim()];
        for (name, w) in &self.thermal_weights {
            let k = levels.level_index(name)?;
            if !levels.ground_levels().any(|g| g == k) {
                return Err(Error::invalid(
                    "protocol.thermal_weights",
                    format!("`{name}` is not a ground level"),
                ));
            }
            pops[k] = *w;
        }
        DensityMatrix::from_populations(&pops)
    }

    /// Expected detected counts for `photons` emitted per shot, or a
    /// Poisson draw when `poisson_counts` is set. Returns (counts, error).
    pub(crate) fn counts(&self, photons: f64, efficiency: f64, master_seed: u64, index: usize) -> (f64, f64) {
        let mean = (photons * efficiency * self.shots as f64).max(0.0);
        let counts = if self.poisson_counts && mean > 0.0 {
            let mut rng = seed::stream(master_seed, seed::DOMAIN_COUNTS, index as u64);
            Poisson::new(mean).map(|d| d.sample(&mut rng)).unwrap_or(mean)
        } else {
            mean
        };
        (counts, counts.max(1.0).sqrt())
    }
}
