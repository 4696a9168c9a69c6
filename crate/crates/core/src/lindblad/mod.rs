//! Master-equation evolution of a single ion under pulse sequences.

mod average;
mod density;
mod evolve;
mod generator;
mod noise;
mod ode;
mod sequence;

pub use average::{average_over_noise, NoiseAverage};
pub use density::{DensityMatrix, Populations, HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};
pub use evolve::{Evolution, Evolver, ReadoutRecord, DEFAULT_TOL};
pub use generator::{build_generator, Channel, Collapse, Generator};
pub use noise::{quasi_static_sigma, sample_ou, sample_ou_stratified, NoiseModel, NoiseTrace};
pub use ode::{integrate, StepControl, Underflow};
pub use sequence::{Drive, PulseSequence, Segment};
