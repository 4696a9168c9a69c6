use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Mean and standard error of a vector-valued observable over noise
/// realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseAverage {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: usize,
}

impl NoiseAverage {
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let n = samples.len();
        let width = samples.first().map(Vec::len).ok_or(Error::Empty("samples"))?;
        if samples.iter().any(|s| s.len() != width) {
            return Err(Error::invalid("samples", "rows differ in length"));
        }
        let mut mean = vec![0.0; width];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / n as f64;
            }
        }
        let mut stderr = vec![0.0; width];
        if n > 1 {
            for s in samples {
                for ((e, v), m) in stderr.iter_mut().zip(s).zip(&mean) {
                    *e += (v - m).powi(2);
                }
            }
            for e in &mut stderr {
                *e = (*e / ((n - 1) * n) as f64).sqrt();
            }
        }
        Ok(NoiseAverage { mean, stderr, n })
    }
}

/// Run `task(index, sample_seed)` for `n_samples` noise samples in
/// parallel and average. Sample seeds depend only on `(master_seed,
/// domain, index)`, so the result is independent of thread scheduling.
pub fn average_over_noise<F>(n_samples: usize, master_seed: u64, domain: u64, task: F) -> Result<NoiseAverage>
where
    F: Fn(usize, u64) -> Result<Vec<f64>> + Sync,
{
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    let samples: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            task(i, seed::derive(master_seed, domain, i as u64)).map_err(|e| Error::Sample {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    NoiseAverage::from_samples(&samples)
}
