//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;

use ybcav_core::lindblad::{Drive, PulseSequence, Segment};
use ybcav_core::{Grid, IonSystem, ProtocolConfig};

/// Ten-pulse readout train on the A transition.
pub fn readout_train(system: &IonSystem, rabi: f64) -> PulseSequence {
    let period = 5.0 * system.rates.lifetime;
    PulseSequence::new(vec![
        Segment::Drive(Drive::pi("A", rabi)),
        Segment::Readout(period - PI / rabi),
    ])
    .repeated(10, period)
}

/// Protocol settings small enough for repeated timing.
pub fn small_protocol() -> ProtocolConfig {
    ProtocolConfig {
        noise_samples: 16,
        rabi_noise_samples: 4,
        ramsey_delays: Grid::new(0.0, 200e-9, 9),
        echo_delays: Grid::new(0.0, 800e-9, 9),
        rabi_durations: Grid::new(0.0, 50e-9, 5),
        readout_pulses: 10,
        shots: 2000,
        ..ProtocolConfig::default()
    }
}
