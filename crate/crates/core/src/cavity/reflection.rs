use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CavityMode;
use crate::error::{ensure_unit_interval, Error, Result};
use crate::fit::{least_squares, FitResult};

/// One-port reflection `|1 - 2 eta / (1 + 2iQ (nu - nu0)/nu0)|^2` on a
/// frequency grid in GHz. `coupling_ratio` is kappa_ext / kappa_total.
pub fn reflection_spectrum(
    mode: &CavityMode,
    coupling_ratio: f64,
    freq_grid_ghz: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if freq_grid_ghz.is_empty() {
        return Err(Error::Empty("frequency grid"));
    }
    ensure_unit_interval("coupling_ratio", coupling_ratio)?;
    mode.validate()?;
    Ok(freq_grid_ghz
        .iter()
        .map(|&nu| {
            let x = (nu - mode.nu0_ghz) / mode.nu0_ghz;
            let z = Complex64::new(1.0, 2.0 * mode.q * x);
            let r = Complex64::new(1.0, 0.0) - 2.0 * coupling_ratio / z;
            (nu, r.norm_sqr())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionFit {
    pub q: f64,
    pub q_err: f64,
    pub nu0_ghz: f64,
    pub depth: f64,
    pub fit: FitResult,
}

/// Fit a Lorentzian dip `baseline - depth / (1 + ((nu - nu0)/hw)^2)` and
/// report `Q = nu0 / (2 hw)`.
pub fn fit_reflection_q(spectrum: &[(f64, f64)]) -> Result<ReflectionFit> {
    if spectrum.len() < 5 {
        return Err(Error::Empty("reflection spectrum (need at least 5 points)"));
    }
    let x: Vec<f64> = spectrum.iter().map(|p| p.0).collect();
    let y: Vec<f64> = spectrum.iter().map(|p| p.1).collect();

    let (imin, &ymin) = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let baseline = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * (baseline + ymin);
    let below: Vec<f64> = x
        .iter()
        .zip(&y)
        .filter(|(_, &v)| v <= half)
        .map(|(&xi, _)| xi)
        .collect();
    let span = x[x.len() - 1] - x[0];
    let hw0 = match (below.first(), below.last()) {
        (Some(lo), Some(hi)) if hi > lo => 0.5 * (hi - lo),
        _ => (span / x.len() as f64).abs().max(1e-9),
    };
    let nu_ref = x[imin];

    // fit in offsets from the grid minimum so nu0 is well conditioned
    let xs: Vec<f64> = x.iter().map(|v| v - nu_ref).collect();
    let model = |p: &[f64], xi: f64| p[0] - p[1] / (1.0 + ((xi - p[2]) / p[3]).powi(2));
    let sigma = vec![1e-3; x.len()];
    let fit = least_squares(
        "lorentzian_dip",
        &["baseline", "depth", "center_offset_ghz", "half_width_ghz"],
        model,
        &xs,
        &y,
        &sigma,
        &[baseline, baseline - ymin, 0.0, hw0],
    )?;
    let nu0 = nu_ref + fit.value("center_offset_ghz");
    let hw = fit.value("half_width_ghz").abs();
    let hw_err = fit.params[3].error;
    let q = nu0 / (2.0 * hw);
    Ok(ReflectionFit {
        q,
        q_err: q * hw_err / hw,
        nu0_ghz: nu0,
        depth: fit.value("depth"),
        fit,
    })
}
