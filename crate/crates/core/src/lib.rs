//! Single-ion cavity QED simulation: level structure, Purcell enhancement,
//! Lindblad evolution, photon statistics and measurement protocols.

pub mod cavity;
pub mod defaults;
pub mod ensemble;
mod error;
pub mod fit;
pub mod ion;
pub mod linalg;
pub mod lindblad;
pub mod photon;
pub mod protocols;
pub mod seed;

pub use error::{Error, Result};

pub use cavity::{CavityMode, DecayRates, IonSite};
pub use ensemble::EnsembleConfig;
pub use ion::{LevelConfig, LevelSystem};
pub use lindblad::{DensityMatrix, NoiseModel};
pub use photon::DetectionChain;
pub use protocols::{Grid, IonSystem, ProtocolConfig};
