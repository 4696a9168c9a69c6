//! Reference device and ion numbers used as defaults throughout the crate.
//!
//! Values marked as measured come from the hybrid GaAs-on-YVO4 device; the
//! derived ones follow from them by the relations noted next to each.

/// Shortest measured excited-state lifetime (strongly coupled ion), s.
pub const STRONG_ION_LIFETIME: f64 = 4.2e-6;

/// Lifetime of the ion used for coherent control, s.
pub const CONTROL_ION_LIFETIME: f64 = 41e-6;

/// Lifetime reduction factor of the strongly coupled ion.
pub const LIFETIME_REDUCTION: f64 = 64.0;

/// Bulk (uncoupled) radiative lifetime, s: 4.2 us x 64.
pub const BULK_LIFETIME: f64 = STRONG_ION_LIFETIME * LIFETIME_REDUCTION;

/// Mean number of A photons before the ion leaves the readout cycle.
pub const A_CYCLICITY: f64 = 10.0;

pub const CAVITY_Q: f64 = 5300.0;

/// Mode volume in units of (lambda/n)^3, referenced to the peak field in the host.
pub const MODE_VOLUME: f64 = 1.7;

/// Depth over which |E|^2 halves below the interface, nm.
pub const FIELD_HALVING_NM: f64 = 30.0;

/// |E|^2 at the interface relative to the maximum inside the slab.
pub const INTERFACE_FIELD_FRACTION: f64 = 0.4;

pub const SLAB_THICKNESS_NM: f64 = 200.0;
pub const DESIGN_WAVELENGTH_NM: f64 = 984.5;
pub const TOTAL_PERIODS: usize = 44;
pub const TAPERED_PERIODS: usize = 20;
pub const REMOVED_PERIODS: usize = 11;

/// Emission peak of the zero-nuclear-spin isotopes, GHz.
pub const ZERO_SPIN_PEAK_GHZ: f64 = 304_505.0;

pub const RAMSEY_T2_STAR: f64 = 69e-9;
pub const ECHO_T2: f64 = 330e-9;

/// Spectral diffusion correlation time, s.
pub const SPECTRAL_DIFFUSION_TAU_C: f64 = 1e-3;

pub const GRATING_EFFICIENCY: f64 = 0.25;
pub const SPLITTER_FRACTION: f64 = 0.99;
/// Detector efficiency; not reported, placeholder.
pub const DETECTOR_EFFICIENCY: f64 = 0.8;
pub const DEAD_TIME: f64 = 50e-9;

pub const READOUT_PULSES_PER_INIT: usize = 50;
pub const REPETITION_RATE_HZ: f64 = 50e3;
pub const REPETITION_PERIOD: f64 = 1.0 / REPETITION_RATE_HZ;
pub const INTEGRATION_TIME_S: f64 = 10.0;

/// Shots per scan point at the experimental integration time and rate.
pub const PAPER_SCALE_SHOTS: usize = 500_000;

/// Yb doping as a fraction of cation sites (0.14 ppm).
pub const YB_CONCENTRATION: f64 = 0.14e-6;

pub const G2_ZERO: f64 = 0.26;
pub const TWO_EMITTER_G2_LIMIT: f64 = 0.5;
