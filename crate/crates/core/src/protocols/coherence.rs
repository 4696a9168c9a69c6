use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{ensure_positive, Error, Result};
use crate::fit::{fit_decay, DecayModel, FitResult};
use crate::lindblad::{average_over_noise, quasi_static_sigma, Drive, NoiseModel, NoiseTrace, PulseSequence, Segment};
use crate::seed;

use super::{Grid, IonSystem, ProtocolConfig};

const PHASES: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
const CONTRAST_FLOOR: f64 = 1e-4;
const MAX_CALIBRATION_STEPS: usize = 12;
const CALIBRATION_CONVERGED: f64 = 0.02;
const CALIBRATION_ACCEPTED: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Ramsey,
    Echo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceResult {
    pub delays: Vec<f64>,
    /// Noise-averaged fringe contrast.
    pub contrast: Vec<f64>,
    pub err: Vec<f64>,
    /// Excited population after the last pulse for final-pulse phases
    /// 0, pi/2, pi, 3pi/2.
    pub populations: Vec<[f64; 4]>,
    /// None when the contrast does not decay over the grid.
    pub fit: Option<FitResult>,
    /// 1/e contrast delay, s; infinite when no decay is resolved.
    pub t_decay: f64,
    pub t_decay_err: f64,
}

impl CoherenceResult {
    /// `1 / (pi T2*)`, Hz.
    pub fn linewidth_hz(&self) -> f64 {
        1.0 / (PI * self.t_decay)
    }
}

fn prefix(kind: Kind, cfg: &ProtocolConfig, delay: f64) -> PulseSequence {
    let half = Drive::area("A", cfg.coherence_rabi, FRAC_PI_2);
    match kind {
        Kind::Ramsey => {
            let half = half.with_detuning(cfg.ramsey_detuning);
            PulseSequence::new(vec![Segment::Drive(half), Segment::Delay(delay)])
        }
        Kind::Echo => PulseSequence::new(vec![
            Segment::Drive(half),
            Segment::Delay(0.5 * delay),
            Segment::Drive(Drive::pi("A", cfg.coherence_rabi)),
            Segment::Delay(0.5 * delay),
        ]),
    }
}

fn suffix(kind: Kind, cfg: &ProtocolConfig, phase: f64) -> PulseSequence {
    let mut last = Drive::area("A", cfg.coherence_rabi, FRAC_PI_2).with_phase(phase);
    if kind == Kind::Ramsey {
        last = last.with_detuning(cfg.ramsey_detuning);
    }
    PulseSequence::new(vec![Segment::Drive(last)])
}

fn contrast(p: &[f64]) -> f64 {
    (p[0] - p[2]).hypot(p[1] - p[3])
}

fn contrast_err(p: &[f64], se: &[f64]) -> f64 {
    let c = contrast(p).max(1e-12);
    let dx = (p[0] - p[2]) / c;
    let dy = (p[1] - p[3]) / c;
    ((dx * se[0]).powi(2) + (dx * se[2]).powi(2) + (dy * se[1]).powi(2) + (dy * se[3]).powi(2)).sqrt()
}

fn scan(
    kind: Kind,
    system: &IonSystem,
    cfg: &ProtocolConfig,
    delays: &Grid,
    model: DecayModel,
    master_seed: u64,
) -> Result<CoherenceResult> {
    cfg.validate()?;
    let ev = system.evolver();
    let start = system.ground(system.levels.a().lower);
    let values = delays.values();
    let max_len = values.iter().cloned().fold(0.0, f64::max) + 4.0 * PI / cfg.coherence_rabi;
    let dt = system.noise.tau_c / 100.0;
    let suffixes: Vec<PulseSequence> = PHASES.iter().map(|&ph| suffix(kind, cfg, ph)).collect();

    // one noise path per sample, shared by every delay and phase
    let avg = average_over_noise(cfg.noise_samples, master_seed, seed::DOMAIN_NOISE, |i, s| {
        let trace = NoiseTrace::sample_stratum(&system.noise, dt, max_len, s, (i, cfg.noise_samples))?;
        let mut out = Vec::with_capacity(4 * values.len());
        for &tau in &values {
            let pre = prefix(kind, cfg, tau);
            let mid = ev.evolve(&start, &pre, &trace, cfg.tol)?;
            for suf in &suffixes {
                let end = ev.evolve_from(&mid.final_state, suf, &trace, cfg.tol, mid.end_time)?;
                out.push(end.final_state.population(system.levels.excited()));
            }
        }
        Ok(out)
    })?;

    let mut res = CoherenceResult {
        delays: values.clone(),
        contrast: Vec::new(),
        err: Vec::new(),
        populations: Vec::new(),
        fit: None,
        t_decay: f64::INFINITY,
        t_decay_err: 0.0,
    };
    for k in 0..values.len() {
        let p = &avg.mean[4 * k..4 * k + 4];
        let se = &avg.stderr[4 * k..4 * k + 4];
        res.contrast.push(contrast(p));
        res.err.push(contrast_err(p, se).max(CONTRAST_FLOOR));
        res.populations.push([p[0], p[1], p[2], p[3]]);
    }

    let first = res.contrast[0];
    let last = *res.contrast.last().expect("non-empty grid");
    if values.len() >= 3 && last < 0.98 * first {
        let fit = fit_decay(model, &res.delays, &res.contrast, &res.err)?;
        res.t_decay = fit.value("t_decay");
        res.t_decay_err = fit.param("t_decay").map_or(f64::NAN, |p| p.error);
        res.fit = Some(fit);
    }
    Ok(res)
}

/// Two pi/2 pulses separated by each delay; the contrast is read from four
/// final-pulse phases and fitted with `cfg.ramsey_fit` for T2*.
pub fn run_ramsey(system: &IonSystem, cfg: &ProtocolConfig, master_seed: u64) -> Result<CoherenceResult> {
    scan(Kind::Ramsey, system, cfg, &cfg.ramsey_delays, cfg.ramsey_fit, master_seed)
}

/// pi/2 - tau/2 - pi - tau/2 - pi/2, fitted with `cfg.echo_fit` for T2.
pub fn run_echo(system: &IonSystem, cfg: &ProtocolConfig, master_seed: u64) -> Result<CoherenceResult> {
    scan(Kind::Echo, system, cfg, &cfg.echo_delays, cfg.echo_fit, master_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargets {
    pub t2_star: f64,
    pub t2: f64,
    pub tau_c: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            t2_star: defaults::RAMSEY_T2_STAR,
            t2: defaults::ECHO_T2,
            tau_c: defaults::SPECTRAL_DIFFUSION_TAU_C,
        }
    }
}

impl CalibrationTargets {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("calibration.t2_star", self.t2_star)?;
        ensure_positive("calibration.t2", self.t2)?;
        ensure_positive("calibration.tau_c", self.tau_c)?;
        if self.t2 < self.t2_star {
            return Err(Error::invalid("calibration.t2", "echo T2 must not be shorter than T2*"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub sigma: f64,
    pub gamma_phi: f64,
    pub t2_star: f64,
    pub t2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub noise: NoiseModel,
    pub targets: CalibrationTargets,
    pub history: Vec<CalibrationStep>,
    /// Analytic starting point before simulation feedback.
    pub initial: NoiseModel,
}

impl Calibration {
    pub fn last(&self) -> &CalibrationStep {
        self.history.last().expect("calibration records at least one step")
    }
}

/// Fit (sigma, gamma_phi) so simulated Ramsey and echo scans reproduce the
/// target T2* and T2 at fixed tau_c.
///
/// Starts from `gamma_phi = 2/T2` and the sigma that puts the 1/e point of
/// `exp(-gamma_phi t/2 - sigma^2 t^2/2)` at T2*, then applies
/// multiplicative corrections from the simulated fits. When T2 <= T2*
/// the fast dephasing alone explains both and sigma stays 0.
pub fn calibrate_noise(
    system: &IonSystem,
    cfg: &ProtocolConfig,
    targets: &CalibrationTargets,
    master_seed: u64,
) -> Result<Calibration> {
    targets.validate()?;
    let gamma_phi = 2.0 / targets.t2;
    let initial = NoiseModel {
        sigma: quasi_static_sigma(targets.t2_star, gamma_phi),
        tau_c: targets.tau_c,
        gamma_phi,
    };
    let markovian = initial.sigma == 0.0;
    let mut noise = initial;
    let mut history = Vec::new();
    for _ in 0..MAX_CALIBRATION_STEPS {
        let sys = IonSystem {
            noise,
            ..system.clone()
        };
        let echo = run_echo(&sys, cfg, master_seed)?;
        let ramsey = if markovian { None } else { Some(run_ramsey(&sys, cfg, master_seed)?) };
        let t2_star = ramsey.as_ref().map_or(targets.t2_star, |r| r.t_decay);
        let step = CalibrationStep {
            sigma: noise.sigma,
            gamma_phi: noise.gamma_phi,
            t2_star,
            t2: echo.t_decay,
        };
        history.push(step);
        if !(step.t2.is_finite() && step.t2_star.is_finite()) {
            break;
        }
        let r2 = step.t2 / targets.t2;
        let r2s = step.t2_star / targets.t2_star;
        if (r2 - 1.0).abs() < CALIBRATION_CONVERGED && (r2s - 1.0).abs() < CALIBRATION_CONVERGED {
            return Ok(Calibration {
                noise,
                targets: *targets,
                history,
                initial,
            });
        }
        noise.gamma_phi *= r2;
        if !markovian {
            noise.sigma *= r2s;
        }
    }
    let last = history.last().copied().expect("at least one step");
    let ok = (last.t2 / targets.t2 - 1.0).abs() < CALIBRATION_ACCEPTED
        && (last.t2_star / targets.t2_star - 1.0).abs() < CALIBRATION_ACCEPTED;
    if ok {
        // the final step was simulated with these values
        let noise = NoiseModel {
            sigma: last.sigma,
            gamma_phi: last.gamma_phi,
            tau_c: targets.tau_c,
        };
        Ok(Calibration {
            noise,
            targets: *targets,
            history,
            initial,
        })
    } else {
        Err(Error::NoConvergence {
            iterations: history.len(),
            reason: format!(
                "last step gave T2* = {:e} s, T2 = {:e} s against targets {:e} s, {:e} s",
                last.t2_star, last.t2, targets.t2_star, targets.t2
            ),
        })
    }
}
