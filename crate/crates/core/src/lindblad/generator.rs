use serde::{Deserialize, Serialize};

use crate::cavity::DecayRates;
use crate::error::Result;
use crate::ion::LevelSystem;
use crate::linalg::{CMatrix, C64, I};

use super::noise::NoiseModel;
use super::sequence::Drive;

/// Emission channels out of the excited level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    A,
    C,
    Aux,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::A, Channel::C, Channel::Aux];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Collapse operators; both kinds are single matrix units so the
/// dissipator is evaluated elementwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Collapse {
    /// `sqrt(rate) |lower><upper|`
    Decay {
        upper: usize,
        lower: usize,
        rate: f64,
        channel: Channel,
    },
    /// `sqrt(rate) |level><level|`
    Dephasing { level: usize, rate: f64 },
}

/// Time-independent Lindblad generator in the rotating frame of the
/// active drive (or the bare interaction picture when no drive is on).
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub hamiltonian: CMatrix,
    pub collapses: Vec<Collapse>,
}

pub fn build_generator(
    levels: &LevelSystem,
    rates: &DecayRates,
    drive: Option<&Drive>,
    noise_detuning: f64,
    noise: &NoiseModel,
) -> Result<Generator> {
    let n = levels.dim();
    let mut h = CMatrix::zeros(n);
    if let Some(d) = drive {
        let t = levels.transition(&d.transition)?;
        let half = C64::new(0.5 * d.rabi, 0.0);
        h[(t.upper, t.lower)] += half;
        h[(t.lower, t.upper)] += half;
        h[(t.upper, t.upper)] -= C64::new(d.detuning + noise_detuning, 0.0);
    }

    let e = levels.excited();
    let mut collapses = Vec::with_capacity(4);
    for (channel, lower, rate) in [
        (Channel::A, levels.a().lower, rates.a),
        (Channel::C, levels.c().lower, rates.c),
        (Channel::Aux, levels.shelf(), rates.aux),
    ] {
        if rate > 0.0 {
            collapses.push(Collapse::Decay {
                upper: e,
                lower,
                rate,
                channel,
            });
        }
    }
    if noise.gamma_phi > 0.0 {
        collapses.push(Collapse::Dephasing {
            level: e,
            rate: noise.gamma_phi,
        });
    }
    Ok(Generator {
        hamiltonian: h,
        collapses,
    })
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// `drho = -i [H, rho] + sum_k D[L_k] rho`, plus emission rates per
    /// channel written to `emission`.
    pub fn apply(&self, rho: &[C64], drho: &mut [C64], emission: &mut [f64; 3]) {
        let n = self.dim();
        let h = self.hamiltonian.as_slice();
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += h[i * n + k] * rho[k * n + j] - rho[i * n + k] * h[k * n + j];
                }
                drho[i * n + j] = -I * acc;
            }
        }
        *emission = [0.0; 3];
        for c in &self.collapses {
            match *c {
                Collapse::Decay {
                    upper,
                    lower,
                    rate,
                    channel,
                } => {
                    let pop = rho[upper * n + upper].re;
                    drho[lower * n + lower] += rate * rho[upper * n + upper];
                    for j in 0..n {
                        drho[upper * n + j] -= 0.5 * rate * rho[upper * n + j];
                        drho[j * n + upper] -= 0.5 * rate * rho[j * n + upper];
                    }
                    emission[channel.index()] += rate * pop;
                }
                Collapse::Dephasing { level, rate } => {
                    for j in 0..n {
                        if j != level {
                            drho[level * n + j] -= 0.5 * rate * rho[level * n + j];
                            drho[j * n + level] -= 0.5 * rate * rho[j * n + level];
                        }
                    }
                }
            }
        }
    }

    /// `H - (i/2) sum_k L_k^dag L_k` for wavefunction trajectories.
    pub fn effective_hamiltonian(&self) -> CMatrix {
        let mut h = self.hamiltonian.clone();
        for c in &self.collapses {
            let (level, rate) = match *c {
                Collapse::Decay { upper, rate, .. } => (upper, rate),
                Collapse::Dephasing { level, rate } => (level, rate),
            };
            h[(level, level)] -= I * (0.5 * rate);
        }
        h
    }

    /// Characteristic rate used to seed the step size.
    pub fn scale(&self) -> f64 {
        let h = self.hamiltonian.max_abs();
        let g: f64 = self
            .collapses
            .iter()
            .map(|c| match *c {
                Collapse::Decay { rate, .. } | Collapse::Dephasing { rate, .. } => rate,
            })
            .sum();
        h + g
    }
}
