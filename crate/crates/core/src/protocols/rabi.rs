use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{average_over_noise, DensityMatrix, Drive, NoiseTrace, PulseSequence, Segment};
use crate::seed;

use super::{IonSystem, ProtocolConfig};

const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_CYCLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiResult {
    /// Readout pulse durations, s.
    pub durations: Vec<f64>,
    pub pulse_areas: Vec<f64>,
    /// Detected counts over all trains.
    pub counts: Vec<f64>,
    pub err: Vec<f64>,
    /// A photons emitted per train, per unit g1 population at its start.
    pub photons_per_train: Vec<f64>,
    pub photons_err: Vec<f64>,
    /// g1 population at the start of each readout train.
    pub bright_population: Vec<f64>,
    pub cycle_period: f64,
}

fn init_train(system: &IonSystem, cfg: &ProtocolConfig) -> PulseSequence {
    let cycle = cfg.cycle_period(&system.rates);
    PulseSequence::new(vec![Segment::Drive(Drive::pi("C", cfg.init_rabi))]).repeated(cfg.init_pulses, cycle)
}

fn readout_train(system: &IonSystem, cfg: &ProtocolConfig, duration: f64) -> Result<PulseSequence> {
    let cycle = cfg.cycle_period(&system.rates);
    if duration >= cycle {
        return Err(Error::invalid("protocol.rabi_durations", "pulse longer than the readout cycle"));
    }
    let pulse = Drive {
        transition: "A".into(),
        rabi: cfg.readout_rabi,
        detuning: 0.0,
        phase: 0.0,
        duration,
    };
    Ok(
        PulseSequence::new(vec![Segment::Drive(pulse), Segment::Readout(cycle - duration)])
            .repeated(cfg.readout_pulses, cycle),
    )
}

/// State at the start of a readout train once the alternation of
/// initialization and readout trains has reached its noise-free steady
/// state, starting from the thermal state.
pub fn init_fixed_point(system: &IonSystem, cfg: &ProtocolConfig, readout_duration: f64) -> Result<DensityMatrix> {
    let ev = system.evolver();
    let init = init_train(system, cfg);
    let readout = readout_train(system, cfg, readout_duration)?;
    let trace = NoiseTrace::zero();
    let mut rho = cfg.thermal_state(&system.levels)?;
    let mut previous: Option<Vec<f64>> = None;
    for _ in 0..FIXED_POINT_MAX_CYCLES {
        let ready = ev.evolve(&rho, &init, &trace, cfg.tol)?.final_state;
        let pops = ready.populations();
        if let Some(prev) = &previous {
            let change = prev.iter().zip(&pops).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if change < FIXED_POINT_TOL.max(10.0 * cfg.tol) {
                return Ok(ready);
            }
        }
        previous = Some(pops);
        rho = ev.evolve(&ready, &readout, &trace, cfg.tol)?.final_state;
    }
    Err(Error::NoConvergence {
        iterations: FIXED_POINT_MAX_CYCLES,
        reason: "initialization/readout cycle did not settle".into(),
    })
}

/// Counts from 50-pulse A readout trains versus readout pulse duration,
/// each train preceded by C-pumping initialization.
pub fn run_rabi(system: &IonSystem, cfg: &ProtocolConfig, master_seed: u64) -> Result<RabiResult> {
    cfg.validate()?;
    let ev = system.evolver();
    let eta = system.chain.efficiency();
    let cycle = cfg.cycle_period(&system.rates);
    let noisy = system.noise.sigma > 0.0;
    let samples = if noisy { cfg.rabi_noise_samples } else { 1 };
    let dt = system.noise.tau_c / 100.0;

    let mut res = RabiResult {
        durations: cfg.rabi_durations.values(),
        pulse_areas: Vec::new(),
        counts: Vec::new(),
        err: Vec::new(),
        photons_per_train: Vec::new(),
        photons_err: Vec::new(),
        bright_population: Vec::new(),
        cycle_period: cycle,
    };
    let g1 = system.levels.a().lower;
    for (k, &t) in res.durations.clone().iter().enumerate() {
        let start = init_fixed_point(system, cfg, t)?;
        let train = readout_train(system, cfg, t)?;
        let length = train.total_duration();
        let avg = average_over_noise(samples, master_seed, seed::DOMAIN_NOISE, |i, s| {
            let trace = NoiseTrace::sample_stratum(&system.noise, dt, length, s, (i, samples))?;
            Ok(vec![ev.evolve(&start, &train, &trace, cfg.tol)?.readout_total()])
        })?;
        let photons = avg.mean[0];
        let bright = start.population(g1);
        let (counts, shot_err) = cfg.counts(photons, eta, master_seed, k);
        let noise_err = avg.stderr[0] * eta * cfg.shots as f64;
        res.pulse_areas.push(cfg.readout_rabi * t);
        res.counts.push(counts);
        res.err.push(shot_err.hypot(noise_err));
        res.photons_per_train.push(photons / bright);
        res.photons_err.push(avg.stderr[0] / bright);
        res.bright_population.push(bright);
    }
    Ok(res)
}
