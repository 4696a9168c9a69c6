use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{ensure_non_negative, ensure_unit_interval, Result};

/// Cascaded collection and detection losses plus uncorrelated counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionChain {
    pub grating_efficiency: f64,
    /// Fraction of returning light routed to the detector.
    pub splitter_fraction: f64,
    pub detector_efficiency: f64,
    pub extra_loss: f64,
    /// Uncorrelated counts/s, gated to readout windows.
    pub background_rate: f64,
    /// Counts/s over the whole shot.
    pub dark_count_rate: f64,
    /// Non-paralyzable dead time, s.
    pub dead_time: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        DetectionChain {
            grating_efficiency: defaults::GRATING_EFFICIENCY,
            splitter_fraction: defaults::SPLITTER_FRACTION,
            detector_efficiency: defaults::DETECTOR_EFFICIENCY,
            extra_loss: 0.0,
            background_rate: 0.0,
            dark_count_rate: 0.0,
            dead_time: defaults::DEAD_TIME,
        }
    }
}

impl DetectionChain {
    /// Lossless chain with no spurious counts and no dead time.
    pub fn ideal() -> Self {
        DetectionChain {
            grating_efficiency: 1.0,
            splitter_fraction: 1.0,
            detector_efficiency: 1.0,
            extra_loss: 0.0,
            background_rate: 0.0,
            dark_count_rate: 0.0,
            dead_time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_unit_interval("chain.grating_efficiency", self.grating_efficiency)?;
        ensure_unit_interval("chain.splitter_fraction", self.splitter_fraction)?;
        ensure_unit_interval("chain.detector_efficiency", self.detector_efficiency)?;
        ensure_unit_interval("chain.extra_loss", self.extra_loss)?;
        ensure_non_negative("chain.background_rate", self.background_rate)?;
        ensure_non_negative("chain.dark_count_rate", self.dark_count_rate)?;
        ensure_non_negative("chain.dead_time", self.dead_time)
    }

    /// Probability that an emitted readout photon is counted.
    pub fn efficiency(&self) -> f64 {
        self.grating_efficiency * self.splitter_fraction * self.detector_efficiency * (1.0 - self.extra_loss)
    }
}
