use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lindblad::{Drive, PulseSequence, Segment};
use crate::photon::{bunching_ratio, g2_pulsed, G2Histogram, G2Options, ShotSimulation};

use super::{IonSystem, ProtocolConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Result {
    pub histogram: G2Histogram,
    pub g2_zero: f64,
    pub g2_zero_err: f64,
    /// Mean normalized peak below the far-lag threshold, lag 0 excluded.
    pub bunching_ratio: f64,
    pub detections: usize,
    pub emitted: [u64; 3],
}

/// One shot: an A pi pulse followed by a readout window filling the rest
/// of the repetition period.
pub fn g2_sequence(cfg: &ProtocolConfig) -> PulseSequence {
    let pi = Drive::pi("A", cfg.readout_rabi);
    let window = (cfg.repetition_period - pi.duration).max(0.0);
    PulseSequence::new(vec![Segment::Drive(pi), Segment::Readout(window)]).repeated(1, cfg.repetition_period)
}

/// Pulsed single-detector g2 from `cfg.shots` quantum-jump shots on
/// `cfg.n_emitters` independent ions prepared in g1.
pub fn run_g2(system: &IonSystem, cfg: &ProtocolConfig, master_seed: u64) -> Result<G2Result> {
    cfg.validate()?;
    let mut initial = vec![0.0; system.levels.dim()];
    initial[system.levels.a().lower] = 1.0;
    let sim = ShotSimulation {
        levels: &system.levels,
        rates: system.rates,
        noise: system.noise,
        chain: system.chain,
        sequence: g2_sequence(cfg),
        initial,
        n_emitters: cfg.n_emitters,
    };
    let record = sim.run(cfg.shots, master_seed)?;
    let options = G2Options {
        max_lag: cfg.g2_max_lag,
        far_lag: cfg.g2_far_lag,
        bin_width: cfg.g2_bin_width,
        binned_lags: cfg.g2_max_lag.min(3),
    };
    let histogram = g2_pulsed(&record, &options)?;
    let (g2_zero, g2_zero_err) = histogram.g2_zero();
    let near = cfg.g2_far_lag as f64 * record.period;
    let bunching = bunching_ratio(&histogram, near)?;
    Ok(G2Result {
        g2_zero,
        g2_zero_err,
        bunching_ratio: bunching,
        detections: record.total_detections(),
        emitted: record.emitted,
        histogram,
    })
}
