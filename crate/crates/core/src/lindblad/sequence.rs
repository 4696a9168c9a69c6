use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_non_negative, Error, Result};
use crate::ion::LevelSystem;

/// A coherent drive on one optical transition, in its rotating frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub transition: String,
    /// Rabi frequency, rad/s.
    pub rabi: f64,
    /// Laser detuning from the nominal transition, rad/s.
    pub detuning: f64,
    /// Laser phase, rad.
    pub phase: f64,
    /// s
    pub duration: f64,
}

impl Drive {
    /// Resonant pulse of the given area (rad).
    pub fn area(transition: &str, rabi: f64, area: f64) -> Self {
        Drive {
            transition: transition.to_string(),
            rabi,
            detuning: 0.0,
            phase: 0.0,
            duration: area / rabi,
        }
    }

    pub fn pi(transition: &str, rabi: f64) -> Self {
        Self::area(transition, rabi, PI)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Drive(Drive),
    Delay(f64),
    /// Emission on the readout channel is integrated over this window.
    Readout(f64),
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Drive(d) => d.duration,
            Segment::Delay(t) | Segment::Readout(t) => *t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
    pub repetitions: usize,
    /// When set, each repetition is padded with a delay to this length.
    pub period: Option<f64>,
}

impl PulseSequence {
    pub fn new(segments: Vec<Segment>) -> Self {
        PulseSequence {
            segments,
            repetitions: 1,
            period: None,
        }
    }

    pub fn repeated(mut self, repetitions: usize, period: f64) -> Self {
        self.repetitions = repetitions;
        self.period = Some(period);
        self
    }

    pub fn single_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    pub fn total_duration(&self) -> f64 {
        let one = self.period.unwrap_or_else(|| self.single_duration());
        one * self.repetitions as f64
    }

    pub fn validate(&self, levels: &LevelSystem) -> Result<()> {
        for seg in &self.segments {
            ensure_non_negative("sequence.duration", seg.duration())?;
            if let Segment::Drive(d) = seg {
                levels.transition(&d.transition)?;
                ensure_finite("sequence.rabi", d.rabi)?;
                ensure_finite("sequence.detuning", d.detuning)?;
                ensure_finite("sequence.phase", d.phase)?;
            }
        }
        if let Some(period) = self.period {
            ensure_non_negative("sequence.period", period)?;
            let one = self.single_duration();
            if one > period * (1.0 + 1e-12) {
                return Err(Error::invalid(
                    "sequence.period",
                    format!("segments last {one:e} s, longer than the period {period:e} s"),
                ));
            }
        }
        Ok(())
    }

    /// Segments in time order with their absolute start times, including
    /// padding delays.
    pub fn timeline(&self) -> Vec<(f64, Segment)> {
        let mut out = Vec::new();
        let mut t = 0.0;
        for rep in 0..self.repetitions {
            let start = match self.period {
                Some(p) => rep as f64 * p,
                None => t,
            };
            t = start;
            for seg in &self.segments {
                out.push((t, seg.clone()));
                t += seg.duration();
            }
            if let Some(p) = self.period {
                let pad = start + p - t;
                if pad > 0.0 {
                    out.push((t, Segment::Delay(pad)));
                    t = start + p;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ion::{build_level_system, LevelConfig};

    #[test]
    fn timeline_pads_to_period() {
        let seq = PulseSequence::new(vec![
            Segment::Drive(Drive::pi("A", 1e8)),
            Segment::Readout(1e-6),
        ])
        .repeated(3, 10e-6);
        let tl = seq.timeline();
        assert_eq!(tl.len(), 9);
        assert!((tl[3].0 - 10e-6).abs() < 1e-18);
        assert!((seq.total_duration() - 30e-6).abs() < 1e-18);
    }

    #[test]
    fn validation() {
        let levels = build_level_system(&LevelConfig::default()).unwrap();
        let bad = PulseSequence::new(vec![Segment::Drive(Drive::pi("B", 1e8))]);
        assert_eq!(bad.validate(&levels).unwrap_err(), Error::UnknownTransition("B".into()));
        let neg = PulseSequence::new(vec![Segment::Delay(-1.0)]);
        assert!(neg.validate(&levels).is_err());
        let long = PulseSequence::new(vec![Segment::Delay(2.0)]).repeated(2, 1.0);
        assert!(long.validate(&levels).is_err());
    }
}
