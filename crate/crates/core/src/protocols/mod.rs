//! Measurement protocols: lifetime, pump-probe, Rabi, Ramsey, echo and
//! pulsed g2, plus calibration of the noise model against coherence times.

mod coherence;
mod config;
mod g2;
mod lifetime;
mod pump_probe;
mod rabi;
mod system;

pub use coherence::{
    calibrate_noise, run_echo, run_ramsey, Calibration, CalibrationStep, CalibrationTargets, CoherenceResult,
};
pub use config::{Grid, ProtocolConfig};
pub use g2::{g2_sequence, run_g2, G2Result};
pub use lifetime::{run_lifetime, LifetimeResult};
pub use pump_probe::{run_pump_probe, PumpProbeResult};
pub use rabi::{init_fixed_point, run_rabi, RabiResult};
pub use system::IonSystem;
