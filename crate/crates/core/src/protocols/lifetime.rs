use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_decay, DecayModel, FitResult};
use crate::lindblad::{Drive, NoiseTrace, PulseSequence, Segment};

use super::{IonSystem, ProtocolConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeResult {
    /// Bin start times after the excitation pulse, s.
    pub delays: Vec<f64>,
    pub counts: Vec<f64>,
    pub err: Vec<f64>,
    pub fit: FitResult,
    pub tau: f64,
    pub tau_err: f64,
}

/// Time-resolved emission after an A pi pulse from g1, binned into
/// consecutive readout windows and fitted with a single exponential.
pub fn run_lifetime(system: &IonSystem, cfg: &ProtocolConfig, master_seed: u64) -> Result<LifetimeResult> {
    cfg.validate()?;
    let rates = &system.rates;
    if !(rates.total > 0.0) {
        return Err(Error::invalid("rates", "no decay channel: lifetime undefined"));
    }
    let span = cfg.lifetime_span.unwrap_or(8.0 * rates.lifetime);
    if span < 3.0 * rates.lifetime {
        return Err(Error::invalid(
            "protocol.lifetime_span",
            format!("{span:e} s is shorter than three expected lifetimes ({:e} s)", 3.0 * rates.lifetime),
        ));
    }
    let width = span / cfg.lifetime_bins as f64;
    let mut segments = vec![Segment::Drive(Drive::pi("A", cfg.readout_rabi))];
    segments.extend((0..cfg.lifetime_bins).map(|_| Segment::Readout(width)));
    let seq = PulseSequence::new(segments);

    let start = system.ground(system.levels.a().lower);
    let out = system.evolver().evolve(&start, &seq, &NoiseTrace::zero(), cfg.tol)?;
    let t0 = out.readouts[0].start;
    let delays: Vec<f64> = out.readouts.iter().map(|r| r.start - t0).collect();
    let eta = system.chain.efficiency();
    let (counts, err): (Vec<f64>, Vec<f64>) = out
        .readouts
        .iter()
        .enumerate()
        .map(|(k, r)| cfg.counts(r.a_photons, eta, master_seed, k))
        .unzip();

    let fit = fit_decay(DecayModel::Exponential, &delays, &counts, &err)?;
    let tau = fit.value("t_decay");
    let tau_err = fit.param("t_decay").map_or(f64::NAN, |p| p.error);
    Ok(LifetimeResult {
        delays,
        counts,
        err,
        fit,
        tau,
        tau_err,
    })
}
