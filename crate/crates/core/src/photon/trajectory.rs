use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::DecayRates;
use crate::error::{Error, Result};
use crate::ion::LevelSystem;
use crate::linalg::{CMatrix, C64, I, ZERO};
use crate::lindblad::{build_generator, Channel, Collapse, Drive, NoiseModel, NoiseTrace, PulseSequence, Segment};
use crate::seed;

use super::DetectionChain;

const BISECTION_STEPS: usize = 60;

/// A quantum jump out of the excited level. Dephasing jumps carry no
/// channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub channel: Option<Channel>,
    /// Whether the jump fell inside a readout window.
    pub in_readout: bool,
}

/// One shot: every jump plus the detector clicks after thinning,
/// background and dead time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShotRecord {
    pub jumps: Vec<Jump>,
    pub detections: Vec<f64>,
}

/// Detection timestamps of many shots, each relative to its shot start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonRecord {
    pub period: f64,
    pub shots: Vec<Vec<f64>>,
    /// Emitted photons per channel (A, C, aux), all emitters and shots.
    pub emitted: [u64; 3],
    /// Emission times of A photons relative to shot start.
    pub a_emission_times: Vec<f64>,
}

impl PhotonRecord {
    pub fn n_shots(&self) -> usize {
        self.shots.len()
    }

    pub fn total_detections(&self) -> usize {
        self.shots.iter().map(Vec::len).sum()
    }
}

/// Wavefunction of the ion; kept unnormalized between jumps so the norm
/// loss encodes the no-jump probability.
struct State {
    psi: Vec<C64>,
}

impl State {
    fn norm2(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum()
    }

    fn rotate(&mut self, upper: usize, angle: f64) {
        self.psi[upper] *= C64::from_polar(1.0, -angle);
    }
}

struct Unraveling<'a> {
    excited: usize,
    collapses: Vec<Collapse>,
    total_rate: f64,
    levels: &'a LevelSystem,
    rates: DecayRates,
    noise: NoiseModel,
}

impl Unraveling<'_> {
    fn jump(&self, state: &mut State, rng: &mut ChaCha8Rng) -> Option<Channel> {
        let mut pick = rng.random::<f64>() * self.total_rate;
        let mut chosen = self.collapses.last().copied();
        for c in &self.collapses {
            let rate = match *c {
                Collapse::Decay { rate, .. } | Collapse::Dephasing { rate, .. } => rate,
            };
            if pick < rate {
                chosen = Some(*c);
                break;
            }
            pick -= rate;
        }
        state.psi.iter_mut().for_each(|z| *z = ZERO);
        match chosen {
            Some(Collapse::Decay { lower, channel, .. }) => {
                state.psi[lower] = C64::new(1.0, 0.0);
                Some(channel)
            }
            _ => {
                state.psi[self.excited] = C64::new(1.0, 0.0);
                None
            }
        }
    }

    /// Free evolution: only the excited amplitude decays. Returns the time
    /// of the next jump within `duration`, if any.
    fn free_until_jump(&self, state: &mut State, duration: f64, threshold: f64) -> Option<f64> {
        let e = self.excited;
        let pe = state.psi[e].norm_sqr();
        let pg = state.norm2() - pe;
        let k = self.total_rate;
        let jump_at = if pe > 0.0 && k > 0.0 && threshold > pg {
            let t = (pe / (threshold - pg)).ln() / k;
            (t <= duration).then_some(t.max(0.0))
        } else {
            None
        };
        let t = jump_at.unwrap_or(duration);
        state.psi[e] *= (-0.5 * k * t).exp();
        jump_at
    }
}

fn propagator(h_eff: &CMatrix, dt: f64) -> CMatrix {
    let n = h_eff.dim();
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = -I * h_eff[(i, j)] * dt;
        }
    }
    m.expm()
}

/// Single stochastic wavefunction trajectory through `sequence`, starting
/// in `initial_level`. A photons emitted inside readout windows are
/// detected with the chain efficiency; background and dark counts are
/// added as Poisson processes and the detector dead time is applied last.
#[allow(clippy::too_many_arguments)]
pub fn jump_trajectory(
    levels: &LevelSystem,
    rates: &DecayRates,
    sequence: &PulseSequence,
    noise: &NoiseModel,
    noise_trace: &NoiseTrace,
    chain: &DetectionChain,
    initial_level: usize,
    seed: u64,
) -> Result<ShotRecord> {
    sequence.validate(levels)?;
    chain.validate()?;
    noise.validate()?;
    if initial_level >= levels.dim() {
        return Err(Error::invalid("initial_level", "outside the level system"));
    }
    let mut rng = seed::rng(seed);
    let free = build_generator(levels, rates, None, 0.0, noise)?;
    let total_rate = free
        .collapses
        .iter()
        .map(|c| match *c {
            Collapse::Decay { rate, .. } | Collapse::Dephasing { rate, .. } => rate,
        })
        .sum();
    let unr = Unraveling {
        excited: levels.excited(),
        collapses: free.collapses,
        total_rate,
        levels,
        rates: *rates,
        noise: *noise,
    };

    let mut state = State {
        psi: vec![ZERO; levels.dim()],
    };
    state.psi[initial_level] = C64::new(1.0, 0.0);
    let mut threshold: f64 = rng.random();
    let mut jumps = Vec::new();
    let mut windows = Vec::new();

    for (start, segment) in sequence.timeline() {
        let duration = segment.duration();
        let in_readout = matches!(segment, Segment::Readout(_));
        if in_readout {
            windows.push((start, duration));
        }
        match &segment {
            Segment::Drive(drive) => {
                drive_segment(&unr, &mut state, drive, start, noise_trace, &mut threshold, &mut jumps, &mut rng)?;
            }
            Segment::Delay(_) | Segment::Readout(_) => {
                let mut t = 0.0;
                while let Some(dt) = unr.free_until_jump(&mut state, duration - t, threshold) {
                    t += dt;
                    let channel = unr.jump(&mut state, &mut rng);
                    jumps.push(Jump {
                        time: start + t,
                        channel,
                        in_readout,
                    });
                    threshold = rng.random();
                }
            }
        }
    }

    let period = sequence.total_duration();
    let eta = chain.efficiency();
    let mut clicks: Vec<f64> = jumps
        .iter()
        .filter(|j| j.in_readout && j.channel == Some(Channel::A))
        .filter(|_| rng.random::<f64>() < eta)
        .map(|j| j.time)
        .collect();
    let gated: f64 = windows.iter().map(|w| w.1).sum();
    for _ in 0..poisson(&mut rng, chain.background_rate * gated) {
        let mut u = rng.random::<f64>() * gated;
        for &(s, d) in &windows {
            if u < d {
                clicks.push(s + u);
                break;
            }
            u -= d;
        }
    }
    for _ in 0..poisson(&mut rng, chain.dark_count_rate * period) {
        clicks.push(rng.random::<f64>() * period);
    }
    clicks.sort_by(f64::total_cmp);
    let detections = apply_dead_time(&clicks, chain.dead_time);
    Ok(ShotRecord { jumps, detections })
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn apply_dead_time(sorted: &[f64], dead_time: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for &t in sorted {
        if out.last().is_none_or(|&last| t - last >= dead_time) {
            out.push(t);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn drive_segment(
    unr: &Unraveling,
    state: &mut State,
    drive: &Drive,
    start: f64,
    trace: &NoiseTrace,
    threshold: &mut f64,
    jumps: &mut Vec<Jump>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let upper = unr.levels.transition(&drive.transition)?.upper;
    let end = start + drive.duration;
    let frame_angle = |t: f64| drive.phase - drive.detuning * t - trace.phase(t);
    let mut t = start;
    while t < end {
        let piece_end = trace.piece_end(t).min(end);
        let gen = build_generator(unr.levels, &unr.rates, Some(drive), trace.value_at(t), &unr.noise)?;
        let h_eff = gen.effective_hamiltonian();
        state.rotate(upper, frame_angle(t));
        let mut local = t;
        loop {
            let u = propagator(&h_eff, piece_end - local);
            let next = u.matvec(&state.psi);
            let n_end: f64 = next.iter().map(|z| z.norm_sqr()).sum();
            if n_end > *threshold {
                state.psi = next;
                break;
            }
            // norm is monotone: bisect for the crossing
            let (mut lo, mut hi) = (0.0, piece_end - local);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                let psi = propagator(&h_eff, mid).matvec(&state.psi);
                if psi.iter().map(|z| z.norm_sqr()).sum::<f64>() > *threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            state.psi = propagator(&h_eff, hi).matvec(&state.psi);
            local += hi;
            let channel = unr.jump(state, rng);
            jumps.push(Jump {
                time: local,
                channel,
                in_readout: false,
            });
            *threshold = rng.random();
        }
        state.rotate(upper, -frame_angle(piece_end));
        t = piece_end;
    }
    Ok(())
}

/// Repeated single-shot experiment on one or more independent emitters.
///
/// Each emitter carries its own spectral-diffusion path, sampled once per
/// shot on the repetition grid, so consecutive shots see correlated
/// detunings. Every shot starts from a level drawn from `initial`.
#[derive(Debug, Clone)]
pub struct ShotSimulation<'a> {
    pub levels: &'a LevelSystem,
    pub rates: DecayRates,
    pub noise: NoiseModel,
    pub chain: DetectionChain,
    /// One shot, including its padding to the repetition period.
    pub sequence: PulseSequence,
    /// Initial populations per level.
    pub initial: Vec<f64>,
    pub n_emitters: usize,
}

impl ShotSimulation<'_> {
    pub fn run(&self, shots: usize, master_seed: u64) -> Result<PhotonRecord> {
        if shots == 0 {
            return Err(Error::invalid("shots", "must be at least 1"));
        }
        if self.n_emitters == 0 {
            return Err(Error::invalid("n_emitters", "must be at least 1"));
        }
        if self.initial.len() != self.levels.dim() || self.initial.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("initial", "need one non-negative population per level"));
        }
        let total: f64 = self.initial.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("initial", "populations sum to zero"));
        }
        self.sequence.validate(self.levels)?;
        let period = self.sequence.total_duration();
        if !(period > 0.0) {
            return Err(Error::invalid("sequence", "shot has zero duration"));
        }
        let detunings: Vec<Vec<f64>> = (0..self.n_emitters)
            .map(|e| {
                crate::lindblad::sample_ou(
                    &self.noise,
                    period,
                    shots,
                    seed::derive(master_seed, seed::DOMAIN_SHOT_NOISE, e as u64),
                )
            })
            .collect::<Result<_>>()?;

        let outcomes: Vec<ShotRecord> = (0..shots)
            .into_par_iter()
            .map(|s| self.one_shot(s, &detunings, master_seed))
            .collect::<Result<_>>()?;

        let mut emitted = [0u64; 3];
        let mut a_times = Vec::new();
        let mut records = Vec::with_capacity(shots);
        for o in outcomes {
            for j in &o.jumps {
                if let Some(c) = j.channel {
                    emitted[c.index()] += 1;
                    if c == Channel::A {
                        a_times.push(j.time);
                    }
                }
            }
            records.push(o.detections);
        }
        Ok(PhotonRecord {
            period,
            shots: records,
            emitted,
            a_emission_times: a_times,
        })
    }

    fn one_shot(&self, shot: usize, detunings: &[Vec<f64>], master_seed: u64) -> Result<ShotRecord> {
        let mut merged = ShotRecord::default();
        // spurious counts are added once per shot, not per emitter
        let quiet = DetectionChain {
            background_rate: 0.0,
            dark_count_rate: 0.0,
            dead_time: 0.0,
            ..self.chain
        };
        let total: f64 = self.initial.iter().sum();
        for (e, path) in detunings.iter().enumerate() {
            let s = seed::derive(seed::derive(master_seed, seed::DOMAIN_SHOT, e as u64), seed::DOMAIN_SHOT, shot as u64);
            let mut pick = seed::rng(s ^ 0x5eed).random::<f64>() * total;
            let mut level = self.initial.len() - 1;
            for (k, p) in self.initial.iter().enumerate() {
                if pick < *p {
                    level = k;
                    break;
                }
                pick -= p;
            }
            let trace = NoiseTrace::constant(path[shot]);
            let rec = jump_trajectory(self.levels, &self.rates, &self.sequence, &self.noise, &trace, &quiet, level, s)
                .map_err(|err| Error::Sample {
                    index: shot,
                    source: Box::new(err),
                })?;
            merged.jumps.extend(rec.jumps);
            merged.detections.extend(rec.detections);
        }

        let mut rng = seed::stream(master_seed, seed::DOMAIN_BACKGROUND, shot as u64);
        let windows: Vec<(f64, f64)> = self
            .sequence
            .timeline()
            .into_iter()
            .filter_map(|(s, seg)| matches!(seg, Segment::Readout(_)).then(|| (s, seg.duration())))
            .collect();
        let gated: f64 = windows.iter().map(|w| w.1).sum();
        for _ in 0..poisson(&mut rng, self.chain.background_rate * gated) {
            let mut u = rng.random::<f64>() * gated;
            for &(s, d) in &windows {
                if u < d {
                    merged.detections.push(s + u);
                    break;
                }
                u -= d;
            }
        }
        let period = self.sequence.total_duration();
        for _ in 0..poisson(&mut rng, self.chain.dark_count_rate * period) {
            merged.detections.push(rng.random::<f64>() * period);
        }
        merged.detections.sort_by(f64::total_cmp);
        merged.detections = apply_dead_time(&merged.detections, self.chain.dead_time);
        merged.jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(merged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ion::{build_level_system, LevelConfig};
    use std::f64::consts::PI;

    fn levels() -> LevelSystem {
        build_level_system(&LevelConfig::default()).unwrap()
    }

    fn pi_then_window(omega: f64, window: f64, period: f64) -> PulseSequence {
        PulseSequence::new(vec![Segment::Drive(Drive::pi("A", omega)), Segment::Readout(window)]).repeated(1, period)
    }

    #[test]
    fn same_seed_same_record() {
        let lv = levels();
        let rates = DecayRates::from_purcell(&lv, 63.0 / lv.branch_a());
        let seq = pi_then_window(2.0 * PI * 50e6, 18e-6, 20e-6);
        let chain = DetectionChain {
            background_rate: 1e4,
            ..DetectionChain::default()
        };
        let run = |s| {
            jump_trajectory(&lv, &rates, &seq, &NoiseModel::default(), &NoiseTrace::zero(), &chain, lv.a().lower, s).unwrap()
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn dead_chain_gives_empty_records() {
        let lv = levels();
        let sim = ShotSimulation {
            levels: &lv,
            rates: DecayRates::from_purcell(&lv, 63.0 / lv.branch_a()),
            noise: NoiseModel::noiseless(),
            chain: DetectionChain {
                detector_efficiency: 0.0,
                ..DetectionChain::default()
            },
            sequence: pi_then_window(2.0 * PI * 50e6, 18e-6, 20e-6),
            initial: vec![0.0, 1.0, 0.0, 0.0],
            n_emitters: 1,
        };
        let rec = sim.run(500, 3).unwrap();
        assert_eq!(rec.total_detections(), 0);
        assert!(rec.emitted[0] > 0);
    }

    #[test]
    fn excitation_probability_matches_rabi() {
        // pulse area pi/2 with no decay in the pulse: half the shots emit
        let lv = levels();
        let rates = DecayRates::from_purcell(&lv, 63.0 / lv.branch_a());
        let seq = PulseSequence::new(vec![
            Segment::Drive(Drive::area("A", 2.0 * PI * 500e6, PI / 2.0)),
            Segment::Readout(100e-6),
        ]);
        let n = 4000;
        let emitted = (0..n)
            .filter(|&s| {
                let r = jump_trajectory(
                    &lv,
                    &rates,
                    &seq,
                    &NoiseModel::noiseless(),
                    &NoiseTrace::zero(),
                    &DetectionChain::ideal(),
                    lv.a().lower,
                    s,
                )
                .unwrap();
                !r.jumps.is_empty()
            })
            .count();
        let p = emitted as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 1e-3, "{p}");
    }

    #[test]
    fn dead_time_filter() {
        assert_eq!(apply_dead_time(&[0.0, 10e-9, 60e-9, 100e-9, 200e-9], 50e-9), vec![0.0, 60e-9, 200e-9]);
        assert_eq!(apply_dead_time(&[1.0, 2.0], 0.0), vec![1.0, 2.0]);
    }
}
