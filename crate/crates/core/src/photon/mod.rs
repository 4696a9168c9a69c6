//! Quantum-jump photon records, detection-chain thinning and pulsed
//! photon correlations.

mod chain;
mod g2;
mod trajectory;

pub use chain::DetectionChain;
pub use g2::{bunching_ratio, g2_pulsed, peak_ratio, G2Histogram, G2Options, G2Peak};
pub use trajectory::{jump_trajectory, Jump, PhotonRecord, ShotRecord, ShotSimulation};
