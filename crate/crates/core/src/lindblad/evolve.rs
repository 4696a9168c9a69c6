//! Piecewise integration of the master equation over a pulse sequence.
//!
//! States are kept in the interaction picture of the bare levels, with the
//! slow detuning `delta(t)` folded into the excited-level phase. Free
//! segments then carry no Hamiltonian at all and only the dissipator acts;
//! each drive piece is integrated in the drive's rotating frame, where its
//! generator is constant.

use serde::{Deserialize, Serialize};

use crate::cavity::DecayRates;
use crate::error::{Error, Result};
use crate::ion::LevelSystem;
use crate::linalg::{CMatrix, C64};

use super::density::DensityMatrix;
use super::generator::{build_generator, Generator};
use super::noise::{NoiseModel, NoiseTrace};
use super::ode::{integrate, StepControl};
use super::sequence::{Drive, PulseSequence, Segment};

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutRecord {
    pub start: f64,
    pub duration: f64,
    /// Photons emitted on the A channel during the window.
    pub a_photons: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    /// State at the end of every timeline segment.
    pub boundaries: Vec<(f64, DensityMatrix)>,
    pub readouts: Vec<ReadoutRecord>,
    /// Photons emitted per channel (A, C, aux) over the whole sequence.
    pub emitted: [f64; 3],
    pub final_state: DensityMatrix,
    pub end_time: f64,
}

impl Evolution {
    pub fn readout_total(&self) -> f64 {
        self.readouts.iter().map(|r| r.a_photons).sum()
    }
}

/// Master-equation solver for one ion with fixed decay rates.
#[derive(Debug, Clone)]
pub struct Evolver<'a> {
    pub levels: &'a LevelSystem,
    pub rates: DecayRates,
    pub noise: NoiseModel,
}

impl<'a> Evolver<'a> {
    pub fn new(levels: &'a LevelSystem, rates: DecayRates, noise: NoiseModel) -> Self {
        Evolver { levels, rates, noise }
    }

    pub fn evolve(
        &self,
        rho0: &DensityMatrix,
        sequence: &PulseSequence,
        noise_trace: &NoiseTrace,
        tol: f64,
    ) -> Result<Evolution> {
        self.evolve_from(rho0, sequence, noise_trace, tol, 0.0)
    }

    /// Same as [`Evolver::evolve`] with the sequence starting at absolute
    /// time `t0` on the noise trace and laser phase clock.
    pub fn evolve_from(
        &self,
        rho0: &DensityMatrix,
        sequence: &PulseSequence,
        noise_trace: &NoiseTrace,
        tol: f64,
        t0: f64,
    ) -> Result<Evolution> {
        if !(tol > 1e-12 && tol < 1e-3) {
            return Err(Error::invalid("tol", format!("must lie in (1e-12, 1e-3), got {tol}")));
        }
        if rho0.dim() != self.levels.dim() {
            return Err(Error::invalid("rho0", "dimension does not match the level system"));
        }
        sequence.validate(self.levels)?;
        self.noise.validate()?;

        let n = self.levels.dim();
        let nn = n * n;
        let mut y = vec![C64::new(0.0, 0.0); nn + 3];
        y[..nn].copy_from_slice(rho0.matrix().as_slice());

        let free = build_generator(self.levels, &self.rates, None, 0.0, &self.noise)?;
        let mut h_free = 0.1 / free.scale().max(1e-300);
        let h_cap = self.noise.max_step();

        let mut boundaries = Vec::new();
        let mut readouts = Vec::new();
        for (index, (start, segment)) in sequence.timeline().into_iter().enumerate() {
            let start = t0 + start;
            let duration = segment.duration();
            let before_a = y[nn].re;
            match &segment {
                Segment::Drive(drive) => {
                    self.drive_segment(&mut y, drive, start, duration, noise_trace, tol, index)?;
                }
                Segment::Delay(_) | Segment::Readout(_) => {
                    let ctl = StepControl {
                        tol,
                        h_init: h_free,
                        h_max: h_cap,
                    };
                    h_free = run(&free, &mut y, duration, ctl).map_err(|at| Error::StepUnderflow {
                        segment: index,
                        time: start + at,
                    })?;
                }
            }
            let state = DensityMatrix::from_matrix_unchecked(CMatrix::from_vec(n, y[..nn].to_vec()));
            state.check().map_err(|reason| Error::InvariantBreach {
                segment: index,
                reason,
            })?;
            if let Segment::Readout(_) = segment {
                readouts.push(ReadoutRecord {
                    start,
                    duration,
                    a_photons: y[nn].re - before_a,
                });
            }
            boundaries.push((start + duration, state));
        }

        let final_state = boundaries
            .last()
            .map(|b| b.1.clone())
            .unwrap_or_else(|| rho0.clone());
        Ok(Evolution {
            boundaries,
            readouts,
            emitted: [y[nn].re, y[nn + 1].re, y[nn + 2].re],
            final_state,
            end_time: t0 + sequence.total_duration(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn drive_segment(
        &self,
        y: &mut [C64],
        drive: &Drive,
        start: f64,
        duration: f64,
        trace: &NoiseTrace,
        tol: f64,
        index: usize,
    ) -> Result<()> {
        let n = self.levels.dim();
        let upper = self.levels.transition(&drive.transition)?.upper;
        let end = start + duration;
        let frame_angle = |t: f64| drive.phase - drive.detuning * t - trace.phase(t);

        let mut t = start;
        while t < end {
            let piece_end = trace.piece_end(t).min(end);
            // guard against pieces shorter than rounding
            let piece_end = if end - piece_end < 1e-15 * end.abs().max(1e-30) { end } else { piece_end };
            let delta = trace.value_at(t);
            let gen = build_generator(self.levels, &self.rates, Some(drive), delta, &self.noise)?;

            rotate(&mut y[..n * n], n, upper, frame_angle(t));
            let ctl = StepControl {
                tol,
                h_init: 0.05 / gen.scale().max(1e-300),
                h_max: self.noise.max_step(),
            };
            run(&gen, y, piece_end - t, ctl).map_err(|at| Error::StepUnderflow {
                segment: index,
                time: t + at,
            })?;
            rotate(&mut y[..n * n], n, upper, -frame_angle(piece_end));
            t = piece_end;
        }
        Ok(())
    }
}

fn run(gen: &Generator, y: &mut [C64], duration: f64, ctl: StepControl) -> std::result::Result<f64, f64> {
    let nn = gen.dim() * gen.dim();
    let mut em = [0.0; 3];
    integrate(
        |state, d| {
            gen.apply(&state[..nn], &mut d[..nn], &mut em);
            for c in 0..3 {
                d[nn + c] = C64::new(em[c], 0.0);
            }
        },
        y,
        duration,
        ctl,
    )
    .map_err(|u| u.at)
}

/// `rho -> W rho W^dag` with `W = exp(-i angle |u><u|)`.
fn rotate(rho: &mut [C64], n: usize, u: usize, angle: f64) {
    if angle == 0.0 {
        return;
    }
    let ph = C64::from_polar(1.0, -angle);
    let ph_c = ph.conj();
    for j in 0..n {
        if j != u {
            rho[u * n + j] *= ph;
            rho[j * n + u] *= ph_c;
        }
    }
}
