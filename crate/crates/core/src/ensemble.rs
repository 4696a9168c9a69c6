//! Random ion populations in the cavity mode and the spectra and lifetime
//! distributions they produce.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{enhanced_decay, purcell_peak, CavityMode, DecayRates, IonSite};
use crate::defaults;
use crate::error::{ensure_non_negative, ensure_positive, ensure_unit_interval, Error, Result};
use crate::ion::LevelSystem;
use crate::photon::DetectionChain;
use crate::protocols::Grid;
use crate::seed;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Isotope {
    Yb171,
    /// Even isotopes without nuclear spin.
    ZeroSpin,
    /// Remaining odd isotope; counted for lifetimes, left out of PLE.
    Other,
}

/// Doping, geometry and spectral parameters of the ion population seen by
/// the cavity mode. Host density, footprint, abundances and linewidths are
/// placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// Yb fraction of cation sites.
    pub concentration: f64,
    /// Cation sites per m^3.
    pub cation_density: f64,
    /// Lateral mode footprint, um^2.
    pub footprint_um2: f64,
    /// Deepest sampled site below the interface, nm.
    pub depth_cutoff_nm: f64,
    /// Gaussian 1/e^2 intensity radius of the lateral profile, relative
    /// to the footprint radius.
    pub lateral_waist: f64,
    pub yb171_abundance: f64,
    pub zero_spin_abundance: f64,
    pub inhomogeneous_fwhm_ghz: f64,
    /// Per-ion PLE linewidth, GHz.
    pub homogeneous_fwhm_ghz: f64,
    /// Width of the aggregate zero-spin line, GHz.
    pub zero_spin_fwhm_ghz: f64,
    /// Zero-spin line position, GHz.
    pub zero_spin_peak_ghz: f64,
    /// 171Yb A line relative to the zero-spin peak, GHz.
    pub yb171_offset_ghz: f64,
    pub dipole_alignment: f64,
    /// Share of 171Yb population that starts bright (in g1).
    pub yb171_bright_fraction: f64,
    /// Collection window after each excitation, s.
    pub window: f64,
    pub shots: usize,
    /// Scan offsets from the zero-spin peak, GHz.
    pub scan_ghz: Grid,
    pub lifetime_bins: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            concentration: defaults::YB_CONCENTRATION,
            cation_density: 1.25e28,
            footprint_um2: 2.0,
            depth_cutoff_nm: 90.0,
            lateral_waist: 1.0,
            yb171_abundance: 0.1428,
            zero_spin_abundance: 0.6959,
            inhomogeneous_fwhm_ghz: 2.0,
            homogeneous_fwhm_ghz: 0.01,
            zero_spin_fwhm_ghz: 0.3,
            zero_spin_peak_ghz: defaults::ZERO_SPIN_PEAK_GHZ,
            yb171_offset_ghz: 2.5,
            dipole_alignment: 1.0,
            yb171_bright_fraction: 0.25,
            window: defaults::REPETITION_PERIOD,
            shots: defaults::PAPER_SCALE_SHOTS,
            scan_ghz: Grid::new(-2.0, 6.0, 4001),
            lifetime_bins: 40,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.concentration >= 0.0 && self.concentration < 1.0) {
            return Err(Error::invalid("ensemble.concentration", "must lie in [0, 1)"));
        }
        ensure_positive("ensemble.cation_density", self.cation_density)?;
        ensure_positive("ensemble.footprint_um2", self.footprint_um2)?;
        ensure_positive("ensemble.depth_cutoff_nm", self.depth_cutoff_nm)?;
        ensure_positive("ensemble.lateral_waist", self.lateral_waist)?;
        ensure_unit_interval("ensemble.yb171_abundance", self.yb171_abundance)?;
        ensure_unit_interval("ensemble.zero_spin_abundance", self.zero_spin_abundance)?;
        if self.yb171_abundance + self.zero_spin_abundance > 1.0 + 1e-12 {
            return Err(Error::invalid("ensemble.abundances", "sum exceeds 1"));
        }
        ensure_non_negative("ensemble.inhomogeneous_fwhm_ghz", self.inhomogeneous_fwhm_ghz)?;
        ensure_positive("ensemble.homogeneous_fwhm_ghz", self.homogeneous_fwhm_ghz)?;
        ensure_positive("ensemble.zero_spin_fwhm_ghz", self.zero_spin_fwhm_ghz)?;
        ensure_positive("ensemble.zero_spin_peak_ghz", self.zero_spin_peak_ghz)?;
        ensure_unit_interval("ensemble.dipole_alignment", self.dipole_alignment)?;
        ensure_unit_interval("ensemble.yb171_bright_fraction", self.yb171_bright_fraction)?;
        ensure_positive("ensemble.window", self.window)?;
        if self.shots == 0 || self.lifetime_bins == 0 {
            return Err(Error::invalid("ensemble", "shots and lifetime_bins must be at least 1"));
        }
        self.scan_ghz.validate("ensemble.scan_ghz")
    }

    /// Mean number of Yb ions in the interaction volume.
    pub fn expected_count(&self) -> f64 {
        let volume = self.footprint_um2 * 1e-12 * self.depth_cutoff_nm * 1e-9;
        self.concentration * self.cation_density * volume
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleIon {
    pub site: IonSite,
    pub isotope: Isotope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledEnsemble {
    pub ions: Vec<EnsembleIon>,
    pub expected_count: f64,
    /// Set when the configuration predicts no ions at all.
    pub warning: Option<String>,
}

/// Draw one ion population: Poisson count, uniform depths, uniform
/// positions over a disc-shaped footprint with a Gaussian lateral
/// intensity profile, isotopes by abundance and normal line offsets.
pub fn sample_sites(cfg: &EnsembleConfig, mode: &CavityMode, master_seed: u64) -> Result<SampledEnsemble> {
    cfg.validate()?;
    mode.validate()?;
    let lambda = cfg.expected_count();
    if lambda <= 0.0 {
        return Ok(SampledEnsemble {
            ions: Vec::new(),
            expected_count: 0.0,
            warning: Some("expected ion count is zero".into()),
        });
    }
    let mut rng = seed::stream(master_seed, seed::DOMAIN_ENSEMBLE, 0);
    let n = Poisson::new(lambda)
        .map_err(|e| Error::invalid("ensemble", e.to_string()))?
        .sample(&mut rng) as usize;
    let sigma = cfg.inhomogeneous_fwhm_ghz / FWHM_PER_SIGMA;
    let spread = Normal::new(0.0, sigma).map_err(|e| Error::invalid("ensemble.inhomogeneous_fwhm_ghz", e.to_string()))?;
    let radius = (cfg.footprint_um2 / std::f64::consts::PI).sqrt();
    let waist = cfg.lateral_waist * radius;

    let mut ions = Vec::with_capacity(n);
    for _ in 0..n {
        let depth = rng.random::<f64>() * cfg.depth_cutoff_nm;
        let r = radius * rng.random::<f64>().sqrt();
        let transverse = (-2.0 * r * r / (waist * waist)).exp();
        let u: f64 = rng.random();
        let (isotope, centre) = if u < cfg.yb171_abundance {
            (Isotope::Yb171, cfg.yb171_offset_ghz)
        } else if u < cfg.yb171_abundance + cfg.zero_spin_abundance {
            (Isotope::ZeroSpin, 0.0)
        } else {
            (Isotope::Other, 0.0)
        };
        let offset = centre + spread.sample(&mut rng);
        let absolute = cfg.zero_spin_peak_ghz + offset;
        ions.push(EnsembleIon {
            site: IonSite {
                depth_nm: depth,
                transverse_factor: transverse,
                dipole_alignment: cfg.dipole_alignment,
                detuning_ghz: absolute - mode.nu0_ghz,
                frequency_offset_ghz: offset,
            },
            isotope,
        });
    }
    Ok(SampledEnsemble {
        ions,
        expected_count: lambda,
        warning: None,
    })
}

/// Detected counts per scan point from an ion driven on resonance:
/// bright share x A-photon yield x fraction decayed within the window x
/// chain efficiency x shots.
pub fn ion_brightness(
    ion: &EnsembleIon,
    levels: &LevelSystem,
    mode: &CavityMode,
    chain: &DetectionChain,
    cfg: &EnsembleConfig,
) -> f64 {
    let rates = enhanced_decay(levels, &ion.site, mode);
    let (share, yield_a) = match ion.isotope {
        Isotope::Yb171 => (cfg.yb171_bright_fraction, rates.a_yield()),
        Isotope::ZeroSpin => (1.0, 1.0),
        Isotope::Other => (0.0, 0.0),
    };
    share * yield_a * (-(-rates.total * cfg.window).exp_m1()) * chain.efficiency() * cfg.shots as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PleSpectrum {
    pub offsets_ghz: Vec<f64>,
    pub counts: Vec<f64>,
}

/// Per-ion 171Yb Lorentzians (unit peak height times brightness) plus one
/// aggregate zero-spin Lorentzian at offset 0 carrying the summed area of
/// the zero-spin ions. Ions of other isotopes do not contribute.
pub fn ple_spectrum(
    ions: &[EnsembleIon],
    levels: &LevelSystem,
    mode: &CavityMode,
    chain: &DetectionChain,
    cfg: &EnsembleConfig,
) -> Result<PleSpectrum> {
    cfg.validate()?;
    chain.validate()?;
    let lines: Vec<(f64, f64)> = ions
        .iter()
        .filter(|i| i.isotope == Isotope::Yb171)
        .map(|i| (i.site.frequency_offset_ghz, ion_brightness(i, levels, mode, chain, cfg)))
        .collect();
    let hw = 0.5 * cfg.homogeneous_fwhm_ghz;
    let zs_hw = 0.5 * cfg.zero_spin_fwhm_ghz;
    let zs_height = ions
        .iter()
        .filter(|i| i.isotope == Isotope::ZeroSpin)
        .map(|i| ion_brightness(i, levels, mode, chain, cfg))
        .sum::<f64>()
        * hw
        / zs_hw;
    let offsets_ghz = cfg.scan_ghz.values();
    let counts = offsets_ghz
        .par_iter()
        .map(|&f| {
            zs_height / (1.0 + (f / zs_hw).powi(2))
                + lines
                    .iter()
                    .map(|&(f0, b)| b / (1.0 + ((f - f0) / hw).powi(2)))
                    .sum::<f64>()
        })
        .collect();
    Ok(PleSpectrum { offsets_ghz, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub lifetimes: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub p10: f64,
    pub median: f64,
    pub p90: f64,
    /// Shortest lifetime any site can reach: bulk / (1 + F_max beta_A).
    pub tau_floor: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Histogram of excited-state lifetimes over the sampled sites.
pub fn lifetime_distribution(
    ions: &[EnsembleIon],
    levels: &LevelSystem,
    mode: &CavityMode,
    bins: usize,
) -> Result<LifetimeHistogram> {
    if ions.is_empty() {
        return Err(Error::Empty("sites"));
    }
    if bins == 0 {
        return Err(Error::invalid("bins", "must be at least 1"));
    }
    let lifetimes: Vec<f64> = ions.iter().map(|i| enhanced_decay(levels, &i.site, mode).lifetime).collect();
    let mut sorted = lifetimes.clone();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let width = if max > min { (max - min) / bins as f64 } else { 0.0 };
    let edges: Vec<f64> = if width > 0.0 {
        (0..=bins).map(|b| min + b as f64 * width).collect()
    } else {
        vec![min, min]
    };
    let mut counts = vec![0usize; edges.len() - 1];
    for &t in &lifetimes {
        let b = if width > 0.0 { (((t - min) / width) as usize).min(counts.len() - 1) } else { 0 };
        counts[b] += 1;
    }
    let f_max = purcell_peak(mode.q, mode.v_norm)?;
    let tau_floor = DecayRates::from_purcell(levels, f_max).lifetime;
    Ok(LifetimeHistogram {
        p10: percentile(&sorted, 0.1),
        median: percentile(&sorted, 0.5),
        p90: percentile(&sorted, 0.9),
        edges,
        counts,
        lifetimes,
        min,
        max,
        tau_floor,
    })
}
