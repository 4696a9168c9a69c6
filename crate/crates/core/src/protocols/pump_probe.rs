use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lindblad::{average_over_noise, DensityMatrix, Drive, NoiseTrace, PulseSequence, Segment};
use crate::seed;

use super::{IonSystem, ProtocolConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpProbeResult {
    pub detunings_mhz: Vec<f64>,
    /// Absolute pump frequency, GHz.
    pub frequencies_ghz: Vec<f64>,
    pub counts: Vec<f64>,
    pub err: Vec<f64>,
    /// Probe counts with no pump at all.
    pub baseline: f64,
    pub peak_detuning_mhz: f64,
    /// g1 population gained at the scan maximum.
    pub transfer: f64,
    /// Complete-pumping prediction `p_g0 Gamma_A / (Gamma_A + Gamma_aux)`.
    pub rate_model_transfer: f64,
}

fn probe(cfg: &ProtocolConfig, cycle: f64) -> Vec<Segment> {
    let pi = Drive::pi("A", cfg.readout_rabi);
    let window = cycle - pi.duration;
    vec![Segment::Drive(pi), Segment::Readout(window)]
}

fn pump_probe_sequence(cfg: &ProtocolConfig, cycle: f64, detuning: f64, rabi: f64) -> PulseSequence {
    let pump = Drive {
        transition: "C".into(),
        rabi,
        detuning,
        phase: 0.0,
        duration: cfg.pump_duration,
    };
    let mut segments = Vec::with_capacity(2 * cfg.pump_pulses + 2);
    for _ in 0..cfg.pump_pulses {
        segments.push(Segment::Drive(pump.clone()));
        segments.push(Segment::Delay((cycle - cfg.pump_duration).max(0.0)));
    }
    segments.extend(probe(cfg, cycle));
    PulseSequence::new(segments)
}

/// Scan a pump train across the C line, starting every shot from the
/// thermal state, and probe the g1 population with an A pi pulse.
pub fn run_pump_probe(system: &IonSystem, cfg: &ProtocolConfig, master_seed: u64) -> Result<PumpProbeResult> {
    cfg.validate()?;
    let ev = system.evolver();
    let eta = system.chain.efficiency();
    let cycle = cfg.cycle_period(&system.rates).max(cfg.pump_duration);
    let thermal = cfg.thermal_state(&system.levels)?;
    let quiet = NoiseTrace::zero();
    let samples = if system.noise.sigma > 0.0 { cfg.pump_noise_samples } else { 1 };
    let dt = system.noise.tau_c / 100.0;

    let probe_only = PulseSequence::new(probe(cfg, cycle));
    let baseline_photons = ev.evolve(&thermal, &probe_only, &quiet, cfg.tol)?.readout_total();
    let g1 = system.levels.a().lower;
    let per_g1 = ev
        .evolve(&DensityMatrix::pure(system.levels.dim(), g1), &probe_only, &quiet, cfg.tol)?
        .readout_total();

    let detunings_mhz = cfg.pump_detunings_mhz.values();
    let c_ghz = system.levels.c().frequency_ghz;
    let mut photons = Vec::with_capacity(detunings_mhz.len());
    let mut counts = Vec::with_capacity(detunings_mhz.len());
    let mut err = Vec::with_capacity(detunings_mhz.len());
    for (k, &d) in detunings_mhz.iter().enumerate() {
        let seq = pump_probe_sequence(cfg, cycle, 2.0 * PI * d * 1e6, cfg.pump_rabi);
        let length = seq.total_duration();
        let avg = average_over_noise(samples, master_seed, seed::DOMAIN_NOISE, |i, s| {
            let trace = NoiseTrace::sample_stratum(&system.noise, dt, length, s, (i, samples))?;
            Ok(vec![ev.evolve(&thermal, &seq, &trace, cfg.tol)?.readout_total()])
        })?;
        let (c, e) = cfg.counts(avg.mean[0], eta, master_seed, k);
        photons.push(avg.mean[0]);
        counts.push(c);
        err.push(e.hypot(avg.stderr[0] * eta * cfg.shots as f64));
    }

    let (imax, &pmax) = photons
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid has at least one point");
    let p_g0 = thermal.population(system.levels.c().lower);
    let r = &system.rates;
    let rate_model_transfer = if r.a + r.aux > 0.0 { p_g0 * r.a / (r.a + r.aux) } else { 0.0 };
    Ok(PumpProbeResult {
        frequencies_ghz: detunings_mhz.iter().map(|d| c_ghz + d * 1e-3).collect(),
        peak_detuning_mhz: detunings_mhz[imax],
        detunings_mhz,
        counts,
        err,
        baseline: cfg.counts(baseline_photons, eta, master_seed, usize::MAX).0,
        transfer: (pmax - baseline_photons) / per_g1,
        rate_model_transfer,
    })
}
