//! One-dimensional transfer-matrix model of the photonic-crystal mirrors.
//!
//! Amplitudes `(forward, backward)` are propagated left to right. A unit
//! cell starts at the left face of its first layer and ends back in the
//! medium of that first layer, so cell matrices of lossless stacks are
//! unimodular.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[Complex64; 2]; 2],
}

impl Mat2 {
    pub fn identity() -> Self {
        let (one, zero) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Mat2 {
            m: [[one, zero], [zero, one]],
        }
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    /// Half-trace magnitude; values above one mark a band gap.
    pub fn half_trace(&self) -> f64 {
        0.5 * self.trace().norm()
    }

    pub fn pow(&self, mut n: usize) -> Self {
        let mut base = *self;
        let mut acc = Mat2::identity();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    fn interface(from: f64, to: f64) -> Self {
        let s = Complex64::new((to + from) / (2.0 * to), 0.0);
        let d = Complex64::new((to - from) / (2.0 * to), 0.0);
        Mat2 { m: [[s, d], [d, s]] }
    }

    fn propagation(index: f64, thickness_nm: f64, wavelength_nm: f64) -> Self {
        let phase = 2.0 * PI * index * thickness_nm / wavelength_nm;
        let zero = Complex64::new(0.0, 0.0);
        Mat2 {
            m: [
                [Complex64::from_polar(1.0, phase), zero],
                [zero, Complex64::from_polar(1.0, -phase)],
            ],
        }
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.m, &rhs.m);
        Mat2 {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub index: f64,
    pub thickness_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitCell {
    pub layers: Vec<Layer>,
}

impl UnitCell {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Empty("unit cell layers"));
        }
        for layer in &self.layers {
            if !(layer.thickness_nm > 0.0) || !layer.thickness_nm.is_finite() {
                return Err(Error::invalid(
                    "bragg.layers.thickness_nm",
                    format!("layer thickness must be > 0, got {}", layer.thickness_nm),
                ));
            }
            if !(layer.index >= 1.0) || !layer.index.is_finite() {
                return Err(Error::invalid(
                    "bragg.layers.index",
                    format!("refractive index must be >= 1, got {}", layer.index),
                ));
            }
        }
        Ok(())
    }

    pub fn period_nm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    /// Thickness-weighted mean index.
    pub fn mean_index(&self) -> f64 {
        self.layers.iter().map(|l| l.index * l.thickness_nm).sum::<f64>() / self.period_nm()
    }
}

/// Two quarter-wave layers for the design wavelength.
pub fn quarter_wave_cell(n_high: f64, n_low: f64, wavelength_nm: f64) -> UnitCell {
    UnitCell {
        layers: vec![
            Layer {
                index: n_high,
                thickness_nm: wavelength_nm / (4.0 * n_high),
            },
            Layer {
                index: n_low,
                thickness_nm: wavelength_nm / (4.0 * n_low),
            },
        ],
    }
}

/// Mirror layout of the nanobeam: a periodic cell, per-side period counts
/// and the nominal geometry of the device they stand in for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BraggStack {
    pub cell: UnitCell,
    pub periods_left: usize,
    pub periods_right: usize,
    pub total_periods: usize,
    pub tapered_periods: usize,
    pub removed_periods: usize,
    pub slab_thickness_nm: f64,
    pub design_wavelength_nm: f64,
}

impl Default for BraggStack {
    fn default() -> Self {
        BraggStack {
            cell: quarter_wave_cell(3.48, 2.0, defaults::DESIGN_WAVELENGTH_NM),
            periods_left: 12,
            periods_right: 23,
            total_periods: defaults::TOTAL_PERIODS,
            tapered_periods: defaults::TAPERED_PERIODS,
            removed_periods: defaults::REMOVED_PERIODS,
            slab_thickness_nm: defaults::SLAB_THICKNESS_NM,
            design_wavelength_nm: defaults::DESIGN_WAVELENGTH_NM,
        }
    }
}

impl BraggStack {
    pub fn validate(&self) -> Result<()> {
        self.cell.validate()?;
        if self.periods_left == 0 || self.periods_right == 0 {
            return Err(Error::invalid("bragg.periods_left", "each mirror needs at least one period"));
        }
        crate::error::ensure_positive("bragg.design_wavelength_nm", self.design_wavelength_nm)?;
        crate::error::ensure_positive("bragg.slab_thickness_nm", self.slab_thickness_nm)
    }
}

/// Transfer matrix of one unit cell at `wavelength_nm`.
pub fn unit_cell_matrix(cell: &UnitCell, wavelength_nm: f64) -> Result<Mat2> {
    cell.validate()?;
    if !(wavelength_nm > 0.0) {
        return Err(Error::invalid("wavelength_nm", format!("must be > 0, got {wavelength_nm}")));
    }
    let layers = &cell.layers;
    let mut m = Mat2::identity();
    for (j, layer) in layers.iter().enumerate() {
        let next = layers[(j + 1) % layers.len()].index;
        m = Mat2::interface(layer.index, next)
            * Mat2::propagation(layer.index, layer.thickness_nm, wavelength_nm)
            * m;
    }
    Ok(m)
}

/// Gap intervals `(lambda_low, lambda_high)` on a sorted grid, resolved to
/// the grid spacing: each interval spans the first and last in-gap samples.
pub fn stack_bandgap(cell: &UnitCell, wavelength_grid_nm: &[f64]) -> Result<Vec<(f64, f64)>> {
    if wavelength_grid_nm.is_empty() {
        return Err(Error::Empty("wavelength grid"));
    }
    if wavelength_grid_nm.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("wavelength grid", "must be strictly increasing"));
    }
    let mut gaps = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for &lambda in wavelength_grid_nm {
        let in_gap = unit_cell_matrix(cell, lambda)?.half_trace() > 1.0;
        open = match (open, in_gap) {
            (None, true) => Some((lambda, lambda)),
            (Some((lo, _)), true) => Some((lo, lambda)),
            (Some(iv), false) => {
                gaps.push(iv);
                None
            }
            (None, false) => None,
        };
    }
    gaps.extend(open);
    Ok(gaps)
}

/// Power transmission through `periods` cells embedded in the medium of
/// the first layer.
pub fn mirror_transmission(cell: &UnitCell, periods: usize, wavelength_nm: f64) -> Result<f64> {
    let total = unit_cell_matrix(cell, wavelength_nm)?.pow(periods);
    Ok((1.0 / total.m[1][1].norm_sqr()).min(1.0))
}

/// Quality factor of a one-period spacer between two mirrors.
///
/// `Q = 4 pi n L_eff / (lambda0 (T_left + T_right))`, with `n` the cell's
/// thickness-weighted index and `L_eff` the spacer length plus the field
/// penetration `1/(2 kappa)` into each mirror, where `kappa` is the Bloch
/// decay constant `acosh(|Tr M|/2) / period`.
pub fn q_estimate(cell: &UnitCell, periods_left: usize, periods_right: usize, lambda0_nm: f64) -> Result<f64> {
    if periods_left == 0 || periods_right == 0 {
        return Err(Error::invalid("periods", "both mirrors need at least one period"));
    }
    let half_trace = unit_cell_matrix(cell, lambda0_nm)?.half_trace();
    if half_trace <= 1.0 {
        return Err(Error::invalid(
            "bragg.cell",
            format!("no band gap at {lambda0_nm} nm (|Tr|/2 = {half_trace:.6})"),
        ));
    }
    let period = cell.period_nm();
    let kappa = half_trace.acosh() / period;
    let l_eff = period + 2.0 * (1.0 / (2.0 * kappa));
    let t_sum = mirror_transmission(cell, periods_left, lambda0_nm)?
        + mirror_transmission(cell, periods_right, lambda0_nm)?;
    Ok(4.0 * PI * cell.mean_index() * l_eff / (lambda0_nm * t_sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAMBDA0: f64 = 984.5;

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|k| lo + k as f64 * step).collect()
    }

    #[test]
    fn uniform_layer_is_pure_phase() {
        let cell = UnitCell {
            layers: vec![Layer {
                index: 2.0,
                thickness_nm: 137.0,
            }],
        };
        let m = unit_cell_matrix(&cell, 900.0).unwrap();
        assert!((m.det().norm() - 1.0).abs() < 1e-12);
        assert!(m.m[0][1].norm() < 1e-15 && m.m[1][0].norm() < 1e-15);
        assert!((m.m[0][0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_wave_has_gap_at_design() {
        let cell = quarter_wave_cell(3.48, 2.0, LAMBDA0);
        assert!(unit_cell_matrix(&cell, LAMBDA0).unwrap().half_trace() > 1.0);
        let gaps = stack_bandgap(&cell, &grid(700.0, 1400.0, 0.25)).unwrap();
        assert!(gaps.iter().any(|&(lo, hi)| lo <= LAMBDA0 && LAMBDA0 <= hi));
    }

    #[test]
    fn quarter_wave_gap_edges_match_analytic() {
        // frequency gap of a quarter-wave stack: dw/w0 = (4/pi) asin(|n1-n2|/(n1+n2))
        let (n1, n2): (f64, f64) = (3.48, 2.0);
        let rel = 4.0 / PI * ((n1 - n2) / (n1 + n2)).asin();
        let lambda_hi = LAMBDA0 / (1.0 - rel / 2.0);
        let lambda_lo = LAMBDA0 / (1.0 + rel / 2.0);
        let step = 0.1;
        let gaps = stack_bandgap(&quarter_wave_cell(n1, n2, LAMBDA0), &grid(700.0, 1400.0, step)).unwrap();
        let gap = gaps.iter().find(|g| g.0 <= LAMBDA0 && LAMBDA0 <= g.1).unwrap();
        assert!((gap.0 - lambda_lo).abs() <= 2.0 * step, "{gap:?} vs {lambda_lo}");
        assert!((gap.1 - lambda_hi).abs() <= 2.0 * step, "{gap:?} vs {lambda_hi}");
    }

    #[test]
    fn uniform_cell_has_no_gap() {
        let cell = quarter_wave_cell(2.5, 2.5, LAMBDA0);
        assert!(stack_bandgap(&cell, &grid(500.0, 2000.0, 1.0)).unwrap().is_empty());
    }

    #[test]
    fn gap_width_grows_with_contrast() {
        let g = grid(600.0, 1800.0, 0.5);
        let mut prev = 0.0;
        for n_low in [3.3, 3.0, 2.6, 2.2, 1.8, 1.4, 1.0] {
            let gaps = stack_bandgap(&quarter_wave_cell(3.48, n_low, LAMBDA0), &g).unwrap();
            let gap = gaps.iter().find(|g| g.0 <= LAMBDA0 && LAMBDA0 <= g.1).unwrap();
            let width = gap.1 - gap.0;
            assert!(width > prev, "n_low {n_low}: {width} <= {prev}");
            prev = width;
        }
    }

    #[test]
    fn zero_thickness_rejected() {
        let cell = UnitCell {
            layers: vec![Layer {
                index: 2.0,
                thickness_nm: 0.0,
            }],
        };
        assert!(unit_cell_matrix(&cell, 900.0).is_err());
        assert!(stack_bandgap(&cell, &[]).is_err());
    }

    #[test]
    fn random_lossless_stacks_are_unimodular() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n_layers = rng.random_range(1..7);
            let cell = UnitCell {
                layers: (0..n_layers)
                    .map(|_| Layer {
                        index: rng.random_range(1.0..4.0),
                        thickness_nm: rng.random_range(5.0..500.0),
                    })
                    .collect(),
            };
            let lambda = rng.random_range(400.0..2000.0);
            let m = unit_cell_matrix(&cell, lambda).unwrap();
            assert!((m.det().norm() - 1.0).abs() < 1e-9);
            // inside a gap the entries grow, so compare relative to |M|^2
            let m20 = m.pow(20);
            let scale = m20.m.iter().flatten().map(|z| z.norm_sqr()).fold(1.0, f64::max);
            assert!((m20.det().norm() - 1.0).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn transmission_decays_geometrically_in_gap() {
        let cell = quarter_wave_cell(3.48, 2.0, LAMBDA0);
        assert_eq!(mirror_transmission(&cell, 0, LAMBDA0).unwrap(), 1.0);
        let t: Vec<f64> = (0..30).map(|n| mirror_transmission(&cell, n, LAMBDA0).unwrap()).collect();
        let ratios: Vec<f64> = t.windows(2).skip(8).map(|w| w[1] / w[0]).collect();
        let r0 = ratios[0];
        assert!(r0 < 1.0);
        for r in &ratios {
            assert!((r / r0 - 1.0).abs() < 0.01);
        }
        assert!(
            mirror_transmission(&cell, 12, LAMBDA0).unwrap() > mirror_transmission(&cell, 23, LAMBDA0).unwrap()
        );
    }

    #[test]
    fn q_estimate_properties() {
        let cell = quarter_wave_cell(3.48, 2.0, LAMBDA0);
        let ratio = mirror_transmission(&cell, 11, LAMBDA0).unwrap() / mirror_transmission(&cell, 10, LAMBDA0).unwrap();
        let q10 = q_estimate(&cell, 10, 10, LAMBDA0).unwrap();
        let q11 = q_estimate(&cell, 11, 11, LAMBDA0).unwrap();
        assert!((q11 / q10 * ratio - 1.0).abs() < 1e-3);
        let q20 = q_estimate(&cell, 20, 20, LAMBDA0).unwrap();
        assert!((q20 / q10 * ratio.powi(10) - 1.0).abs() < 1e-2);

        assert!(q_estimate(&cell, 12, 12, LAMBDA0).unwrap() > q_estimate(&cell, 12, 11, LAMBDA0).unwrap());
        assert!(q_estimate(&cell, 12, 23, LAMBDA0).unwrap() < q_estimate(&cell, 23, 23, LAMBDA0).unwrap());

        // Q depends only on T_left + T_right
        assert_eq!(q_estimate(&cell, 8, 15, LAMBDA0).unwrap(), q_estimate(&cell, 15, 8, LAMBDA0).unwrap());
        assert!(q_estimate(&cell, 0, 5, LAMBDA0).is_err());
        let flat = quarter_wave_cell(2.0, 2.0, LAMBDA0);
        assert!(q_estimate(&flat, 5, 5, LAMBDA0).is_err());
    }
}
