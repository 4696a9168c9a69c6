//! Weighted nonlinear least squares (Levenberg-Marquardt) and the decay
//! models used by the protocols.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    /// 1-sigma error, scaled by the reduced chi-square.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    pub chi2_reduced: f64,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.param(name).map_or(f64::NAN, |p| p.value)
    }
}

/// Envelope shapes for coherence decays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayModel {
    /// `A exp(-x/T)`
    Exponential,
    /// `A exp(-(x/T)^2)`
    Gaussian,
}

impl DecayModel {
    pub fn name(self) -> &'static str {
        match self {
            DecayModel::Exponential => "exponential",
            DecayModel::Gaussian => "gaussian",
        }
    }

    fn power(self) -> i32 {
        match self {
            DecayModel::Exponential => 1,
            DecayModel::Gaussian => 2,
        }
    }
}

const MAX_ITER: usize = 500;

/// Minimize `sum ((y - f(p, x)) / sigma)^2` starting from `p0`.
pub fn least_squares<F>(
    model_name: &str,
    names: &[&str],
    model: F,
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    p0: &[f64],
) -> Result<FitResult>
where
    F: Fn(&[f64], f64) -> f64,
{
    let fail = |reason: String| Error::FitFailed {
        model: model_name.to_string(),
        reason,
    };
    let n = x.len();
    let m = p0.len();
    if y.len() != n || sigma.len() != n || names.len() != m {
        return Err(fail("mismatched input lengths".into()));
    }
    if n < m {
        return Err(fail(format!("{n} points for {m} parameters")));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(fail("uncertainties must be positive".into()));
    }

    let chi2 = |p: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .zip(sigma)
            .map(|((&xi, &yi), &si)| ((yi - model(p, xi)) / si).powi(2))
            .sum()
    };
    // parameters that converge to zero (e.g. centre offsets) still need a
    // finite step, taken on the scale of the abscissa
    let x_scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(n, m);
        let mut pp = p.to_vec();
        for k in 0..m {
            let h = 1e-7 * p[k].abs().max(x_scale);
            pp[k] = p[k] + h;
            let up: Vec<f64> = x.iter().map(|&xi| model(&pp, xi)).collect();
            pp[k] = p[k] - h;
            let dn: Vec<f64> = x.iter().map(|&xi| model(&pp, xi)).collect();
            pp[k] = p[k];
            for i in 0..n {
                jac[(i, k)] = (up[i] - dn[i]) / (2.0 * h) / sigma[i];
            }
        }
        jac
    };

    let mut p = p0.to_vec();
    let mut current = chi2(&p);
    if !current.is_finite() {
        return Err(fail("non-finite residuals at the initial guess".into()));
    }
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITER {
        let jac = jacobian(&p);
        let resid = DVector::from_iterator(
            n,
            (0..n).map(|i| (y[i] - model(&p, x[i])) / sigma[i]),
        );
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * resid;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&grad) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let c = chi2(&trial);
            if c.is_finite() && c <= current {
                let rel = (current - c) / current.max(1e-300);
                let small_step = step
                    .iter()
                    .zip(&trial)
                    .all(|(s, t)| s.abs() <= 1e-12 * t.abs().max(1e-300));
                p = trial;
                current = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || small_step || current == 0.0 {
                    return finish(model_name, names, &p, &jacobian(&p), current, n, m);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step left: at a minimum to working precision
            return finish(model_name, names, &p, &jacobian(&p), current, n, m);
        }
    }
    finish(model_name, names, &p, &jacobian(&p), current, n, m)
}

fn finish(
    model_name: &str,
    names: &[&str],
    p: &[f64],
    jac: &DMatrix<f64>,
    chi2: f64,
    n: usize,
    m: usize,
) -> Result<FitResult> {
    let dof = n.saturating_sub(m);
    let chi2_reduced = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let jtj = jac.transpose() * jac;
    let cov = jtj.try_inverse().ok_or_else(|| Error::FitFailed {
        model: model_name.to_string(),
        reason: "singular normal matrix (parameters not identifiable)".into(),
    })?;
    let scale = if dof > 0 { chi2_reduced } else { 1.0 };
    let params = names
        .iter()
        .zip(p)
        .enumerate()
        .map(|(k, (name, &value))| FitParam {
            name: name.to_string(),
            value,
            error: (cov[(k, k)] * scale).max(0.0).sqrt(),
        })
        .collect();
    Ok(FitResult {
        model: model_name.to_string(),
        params,
        chi2_reduced,
    })
}

/// Fit `amplitude * exp(-(x/T)^p)` with p = 1 or 2. `T` is the 1/e point.
pub fn fit_decay(model: DecayModel, x: &[f64], y: &[f64], sigma: &[f64]) -> Result<FitResult> {
    let power = model.power();
    let (amp0, t0) = decay_guess(power, x, y).ok_or_else(|| Error::FitFailed {
        model: model.name().into(),
        reason: "fewer than two positive points for the initial guess".into(),
    })?;
    let f = move |p: &[f64], xi: f64| p[0] * (-(xi / p[1]).abs().powi(power)).exp();
    let mut fit = least_squares(model.name(), &["amplitude", "t_decay"], f, x, y, sigma, &[amp0, t0])?;
    // sign of T is irrelevant to the model
    fit.params[1].value = fit.params[1].value.abs();
    Ok(fit)
}

/// Linear regression of ln y on x^p over the positive points.
fn decay_guess(power: i32, x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &yi)| yi > 0.02 * peak)
        .map(|(&xi, &yi)| (xi.abs().powi(power), yi.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let t = if slope < 0.0 {
        (-1.0 / slope).powf(1.0 / power as f64)
    } else {
        // flat or rising data: start from the span of the grid
        x.iter().cloned().fold(0.0, f64::max).max(1e-300)
    };
    Some((intercept.exp(), t))
}
