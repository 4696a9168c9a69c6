use crate::cavity::DecayRates;
use crate::defaults;
use crate::error::{Error, Result};
use crate::ion::{build_level_system, LevelConfig, LevelSystem};
use crate::lindblad::{DensityMatrix, Evolver, NoiseModel};
use crate::photon::DetectionChain;

/// Everything a protocol needs to know about one ion and its readout.
#[derive(Debug, Clone, PartialEq)]
pub struct IonSystem {
    pub levels: LevelSystem,
    pub rates: DecayRates,
    pub noise: NoiseModel,
    pub chain: DetectionChain,
}

impl IonSystem {
    pub fn new(levels: LevelSystem, rates: DecayRates, noise: NoiseModel, chain: DetectionChain) -> Result<Self> {
        noise.validate()?;
        chain.validate()?;
        if !(rates.total >= 0.0) || !(rates.a >= 0.0) || !(rates.c >= 0.0) || !(rates.aux >= 0.0) {
            return Err(Error::invalid("rates", "decay rates must be non-negative"));
        }
        Ok(IonSystem {
            levels,
            rates,
            noise,
            chain,
        })
    }

    fn with_reduction(reduction: f64) -> Self {
        let levels = build_level_system(&LevelConfig::default()).expect("default level system is valid");
        let f = (reduction - 1.0) / levels.branch_a();
        let rates = DecayRates::from_purcell(&levels, f);
        IonSystem {
            levels,
            rates,
            noise: NoiseModel::default(),
            chain: DetectionChain::default(),
        }
    }

    /// Ion with the 64x lifetime reduction (4.2 us).
    pub fn strong_ion() -> Self {
        Self::with_reduction(defaults::LIFETIME_REDUCTION)
    }

    /// Ion used for coherent control (41 us).
    pub fn control_ion() -> Self {
        Self::with_reduction(defaults::BULK_LIFETIME / defaults::CONTROL_ION_LIFETIME)
    }

    pub fn evolver(&self) -> Evolver<'_> {
        Evolver::new(&self.levels, self.rates, self.noise)
    }

    pub fn ground(&self, level: usize) -> DensityMatrix {
        DensityMatrix::pure(self.levels.dim(), level)
    }
}
