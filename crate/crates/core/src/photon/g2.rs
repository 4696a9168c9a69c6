use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

use super::PhotonRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Options {
    /// Largest shot separation correlated, in repetition periods.
    pub max_lag: usize,
    /// Peaks at |lag| >= far_lag set the normalization.
    pub far_lag: usize,
    /// Fine histogram bin width, s.
    pub bin_width: f64,
    /// Fine bins cover |lag| <= binned_lags periods.
    pub binned_lags: usize,
}

impl Default for G2Options {
    fn default() -> Self {
        G2Options {
            max_lag: 20,
            far_lag: 10,
            bin_width: 100e-9,
            binned_lags: 3,
        }
    }
}

/// Area of the coincidence peak at one shot separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Peak {
    pub lag: i64,
    pub lag_time: f64,
    pub counts: u64,
    pub norm: f64,
    pub g2: f64,
    pub err: f64,
}

/// Pulsed autocorrelation. Fine-bin values are normalized so that the
/// bins inside one peak sum to that peak's g2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Histogram {
    pub period: f64,
    pub n_shots: usize,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub norm: Vec<f64>,
    pub g2: Vec<f64>,
    pub g2_err: Vec<f64>,
    pub peaks: Vec<G2Peak>,
    pub far_lag: usize,
    /// Mean coincidences per shot pair over the far peaks.
    pub far_mean: f64,
}

impl G2Histogram {
    pub fn peak(&self, lag: i64) -> Option<&G2Peak> {
        self.peaks.iter().find(|p| p.lag == lag)
    }

    pub fn g2_zero(&self) -> (f64, f64) {
        self.peak(0).map_or((f64::NAN, f64::NAN), |p| (p.g2, p.err))
    }
}

fn poisson_ratio(counts: u64, norm: f64) -> (f64, f64) {
    let g = counts as f64 / norm;
    let err = if counts == 0 { 1.0 / norm } else { g / (counts as f64).sqrt() };
    (g, err)
}

/// Single-detector pulsed g2: detections are paired across shot
/// separations `k`, each peak normalized by the number of shot pairs and
/// by the mean far-lag peak.
pub fn g2_pulsed(records: &PhotonRecord, options: &G2Options) -> Result<G2Histogram> {
    let n = records.shots.len();
    if n == 0 {
        return Err(Error::Empty("photon records"));
    }
    ensure_positive("g2.bin_width", options.bin_width)?;
    if options.far_lag == 0 || options.far_lag > options.max_lag {
        return Err(Error::invalid("g2.far_lag", "must lie in 1..=max_lag"));
    }
    if options.max_lag >= n {
        return Err(Error::InsufficientStatistics(format!(
            "max_lag {} needs more than {} shots",
            options.max_lag, n
        )));
    }
    let period = records.period;
    let counts: Vec<u64> = records.shots.iter().map(|s| s.len() as u64).collect();

    let pair_counts: Vec<u64> = (0..=options.max_lag)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                counts.iter().map(|&c| c * c.saturating_sub(1)).sum()
            } else {
                counts.iter().zip(&counts[k..]).map(|(a, b)| a * b).sum()
            }
        })
        .collect();

    let far: Vec<f64> = (options.far_lag..=options.max_lag)
        .map(|k| pair_counts[k] as f64 / (n - k) as f64)
        .collect();
    let far_total: u64 = pair_counts[options.far_lag..].iter().sum();
    if far_total == 0 {
        return Err(Error::InsufficientStatistics("no far-lag coincidences".into()));
    }
    let far_mean = far.iter().sum::<f64>() / far.len() as f64;

    let max = options.max_lag as i64;
    let peaks: Vec<G2Peak> = (-max..=max)
        .map(|lag| {
            let k = lag.unsigned_abs() as usize;
            let norm = far_mean * (n - k) as f64;
            let (g2, err) = poisson_ratio(pair_counts[k], norm);
            G2Peak {
                lag,
                lag_time: lag as f64 * period,
                counts: pair_counts[k],
                norm,
                g2,
                err,
            }
        })
        .collect();

    let span = (options.binned_lags as f64 + 0.5) * period;
    let n_bins = (2.0 * span / options.bin_width).ceil() as usize;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|b| -span + b as f64 * options.bin_width).collect();
    let mut bins = vec![0u64; n_bins];
    let mut place = |dt: f64| {
        let b = ((dt + span) / options.bin_width).floor();
        if b >= 0.0 && (b as usize) < n_bins {
            bins[b as usize] += 1;
        }
    };
    for k in 0..=(options.binned_lags + 1).min(options.max_lag) {
        for s in 0..n - k {
            let (a, b) = (&records.shots[s], &records.shots[s + k]);
            for (i, ti) in a.iter().enumerate() {
                for (j, tj) in b.iter().enumerate() {
                    if k == 0 && i == j {
                        continue;
                    }
                    let dt = k as f64 * period + tj - ti;
                    place(dt);
                    if k > 0 {
                        place(-dt);
                    }
                }
            }
        }
    }
    let mut norm = Vec::with_capacity(n_bins);
    let mut g2 = Vec::with_capacity(n_bins);
    let mut g2_err = Vec::with_capacity(n_bins);
    for (b, &c) in bins.iter().enumerate() {
        let centre = 0.5 * (bin_edges[b] + bin_edges[b + 1]);
        let k = ((centre / period).round().abs() as usize).min(n - 1);
        let nb = far_mean * (n - k) as f64;
        let (g, e) = poisson_ratio(c, nb);
        norm.push(nb);
        g2.push(g);
        g2_err.push(e);
    }

    Ok(G2Histogram {
        period,
        n_shots: n,
        bin_edges,
        counts: bins,
        norm,
        g2,
        g2_err,
        peaks,
        far_lag: options.far_lag,
        far_mean,
    })
}

/// Mean normalized peak over positive lags with `lag_time` in
/// `[from, to)`, relative to the far-lag mean. Returns the ratio and its
/// Poisson error.
pub fn peak_ratio(hist: &G2Histogram, from: f64, to: f64) -> Result<(f64, f64)> {
    let far: Vec<&G2Peak> = hist.peaks.iter().filter(|p| p.lag >= hist.far_lag as i64).collect();
    let sel: Vec<&G2Peak> = hist
        .peaks
        .iter()
        .filter(|p| p.lag > 0 && p.lag_time >= from && p.lag_time < to)
        .collect();
    if sel.is_empty() || far.is_empty() {
        return Err(Error::InsufficientStatistics("no peaks in the requested lag range".into()));
    }
    let mean = |ps: &[&G2Peak]| ps.iter().map(|p| p.g2).sum::<f64>() / ps.len() as f64;
    let rel_err = |ps: &[&G2Peak]| {
        let c: u64 = ps.iter().map(|p| p.counts).sum();
        if c == 0 {
            1.0
        } else {
            1.0 / (c as f64).sqrt()
        }
    };
    let ratio = mean(&sel) / mean(&far);
    let err = ratio * rel_err(&sel).hypot(rel_err(&far));
    Ok((ratio, err))
}

/// Mean normalized peak for `0 < lag_time < near_window` over the far-lag
/// mean. Lag zero is excluded.
pub fn bunching_ratio(hist: &G2Histogram, near_window: f64) -> Result<f64> {
    peak_ratio(hist, 0.5 * hist.period, near_window).map(|r| r.0)
}
