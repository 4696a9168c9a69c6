//! Cavity coupling: Purcell factor from (Q, V), the evanescent field
//! overlap at the ion, and the resulting enhanced decay rates.

mod bragg;
mod reflection;

pub use bragg::{
    mirror_transmission, q_estimate, quarter_wave_cell, stack_bandgap, unit_cell_matrix,
    BraggStack, Layer, Mat2, UnitCell,
};
pub use reflection::{fit_reflection_q, reflection_spectrum, ReflectionFit};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, ensure_unit_interval, Result};
use crate::ion::LevelSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityMode {
    /// Resonance, GHz.
    pub nu0_ghz: f64,
    pub q: f64,
    /// Mode volume in (lambda/n)^3, normalized to the strongest field in the host.
    pub v_norm: f64,
    pub n_host: f64,
    pub field_halving_nm: f64,
    /// Interface-to-slab-maximum |E|^2 ratio. Kept for reference only.
    pub interface_fraction: f64,
}

impl Default for CavityMode {
    fn default() -> Self {
        CavityMode {
            nu0_ghz: defaults::ZERO_SPIN_PEAK_GHZ,
            q: defaults::CAVITY_Q,
            v_norm: defaults::MODE_VOLUME,
            n_host: 2.17,
            field_halving_nm: defaults::FIELD_HALVING_NM,
            interface_fraction: defaults::INTERFACE_FIELD_FRACTION,
        }
    }
}

impl CavityMode {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("cavity.nu0_ghz", self.nu0_ghz)?;
        ensure_positive("cavity.q", self.q)?;
        ensure_positive("cavity.v_norm", self.v_norm)?;
        ensure_positive("cavity.n_host", self.n_host)?;
        ensure_positive("cavity.field_halving_nm", self.field_halving_nm)?;
        ensure_unit_interval("cavity.interface_fraction", self.interface_fraction)
    }

    /// Full width at half maximum of the cavity line, GHz.
    pub fn linewidth_ghz(&self) -> f64 {
        self.nu0_ghz / self.q
    }

    pub fn purcell_peak(&self) -> f64 {
        3.0 / (4.0 * PI * PI) * self.q / self.v_norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonSite {
    /// Depth below the slab/host interface, nm.
    pub depth_nm: f64,
    pub transverse_factor: f64,
    /// cos^2 of the angle between dipole and cavity polarization.
    pub dipole_alignment: f64,
    /// Ion minus cavity frequency, GHz.
    pub detuning_ghz: f64,
    /// Optical offset from the zero-spin reference line, GHz.
    pub frequency_offset_ghz: f64,
}

impl Default for IonSite {
    fn default() -> Self {
        IonSite {
            depth_nm: 0.0,
            transverse_factor: 1.0,
            dipole_alignment: 1.0,
            detuning_ghz: 0.0,
            frequency_offset_ghz: 0.0,
        }
    }
}

impl IonSite {
    pub fn at_depth(depth_nm: f64) -> Self {
        IonSite {
            depth_nm,
            ..IonSite::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("site.depth_nm", self.depth_nm)?;
        ensure_unit_interval("site.transverse_factor", self.transverse_factor)?;
        ensure_unit_interval("site.dipole_alignment", self.dipole_alignment)?;
        ensure_finite("site.detuning_ghz", self.detuning_ghz)?;
        ensure_finite("site.frequency_offset_ghz", self.frequency_offset_ghz)
    }
}

/// Peak Purcell factor `3/(4 pi^2) Q/V` with V in (lambda/n)^3.
pub fn purcell_peak(q: f64, v_norm: f64) -> Result<f64> {
    ensure_positive("q", q)?;
    ensure_positive("v_norm", v_norm)?;
    Ok(3.0 / (4.0 * PI * PI) * q / v_norm)
}

/// Relative mode intensity seen by the ion dipole.
pub fn field_overlap(site: &IonSite, mode: &CavityMode) -> f64 {
    (-site.depth_nm / mode.field_halving_nm).exp2() * site.transverse_factor * site.dipole_alignment
}

/// Lorentzian cavity response at ion-cavity detuning `delta_ghz`.
pub fn detuning_factor(delta_ghz: f64, mode: &CavityMode) -> f64 {
    let x = 2.0 * mode.q * delta_ghz / mode.nu0_ghz;
    1.0 / (1.0 + x * x)
}

/// Effective Purcell factor for a site.
pub fn effective_purcell(site: &IonSite, mode: &CavityMode) -> f64 {
    mode.purcell_peak() * field_overlap(site, mode) * detuning_factor(site.detuning_ghz, mode)
}

/// Decay rates of the shared excited level, all in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    pub total: f64,
    pub lifetime: f64,
    pub f_eff: f64,
    /// Cavity-enhanced readout channel.
    pub a: f64,
    pub c: f64,
    pub aux: f64,
}

impl DecayRates {
    /// Rates for a given effective Purcell factor.
    pub fn from_purcell(levels: &LevelSystem, f_eff: f64) -> Self {
        let g0 = levels.gamma_bulk();
        let a = g0 * levels.branch_a() * (1.0 + f_eff);
        let c = g0 * levels.branch_c();
        let aux = g0 * levels.branch_aux();
        let total = g0 * (1.0 + f_eff * levels.branch_a());
        DecayRates {
            total,
            lifetime: 1.0 / total,
            f_eff,
            a,
            c,
            aux,
        }
    }

    /// Rates with every channel switched off.
    pub fn none() -> Self {
        DecayRates {
            total: 0.0,
            lifetime: f64::INFINITY,
            f_eff: 0.0,
            a: 0.0,
            c: 0.0,
            aux: 0.0,
        }
    }

    /// Fraction of decays that emit an A photon.
    pub fn a_yield(&self) -> f64 {
        if self.total > 0.0 {
            self.a / self.total
        } else {
            0.0
        }
    }

    /// Mean number of A photons per excursion out of the A cycle.
    pub fn cyclicity(&self) -> f64 {
        self.a / (self.c + self.aux)
    }
}

pub fn enhanced_decay(levels: &LevelSystem, site: &IonSite, mode: &CavityMode) -> DecayRates {
    DecayRates::from_purcell(levels, effective_purcell(site, mode))
}

/// Depth at which a site with the given lateral, alignment and detuning
/// factors reaches the requested lifetime reduction.
pub fn depth_for_reduction(
    levels: &LevelSystem,
    site: &IonSite,
    mode: &CavityMode,
    reduction: f64,
) -> Result<f64> {
    if !(reduction > 1.0) {
        return Err(crate::Error::invalid(
            "site.target_reduction",
            format!("must exceed 1, got {reduction}"),
        ));
    }
    let f_needed = (reduction - 1.0) / levels.branch_a();
    let surface = IonSite {
        depth_nm: 0.0,
        ..site.clone()
    };
    let f_surface = effective_purcell(&surface, mode);
    if f_needed > f_surface {
        return Err(crate::Error::Infeasible(format!(
            "reduction {reduction} needs F_eff = {f_needed:.3}, above the surface value {f_surface:.3}"
        )));
    }
    Ok(mode.field_halving_nm * (f_surface / f_needed).log2())
}
