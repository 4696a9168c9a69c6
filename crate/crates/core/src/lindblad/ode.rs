//! Dormand-Prince 5(4) with FSAL and per-step error control, for linear
//! systems with constant coefficients over each call.

use crate::linalg::C64;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Underflow {
    /// Time into the integration at which the step collapsed.
    pub at: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub tol: f64,
    pub h_init: f64,
    pub h_max: f64,
}

/// Integrate `y' = f(y)` over `duration`. Returns the last accepted step.
pub fn integrate<F>(mut f: F, y: &mut [C64], duration: f64, ctl: StepControl) -> Result<f64, Underflow>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if duration <= 0.0 {
        return Ok(ctl.h_init);
    }
    let n = y.len();
    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); n]);
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    let mut y_new = vec![C64::new(0.0, 0.0); n];

    let h_min = 1e-13 * duration.max(1e-300);
    let mut h = ctl.h_init.min(ctl.h_max).min(duration).max(1e-9 * duration);
    let mut t = 0.0;
    f(y, &mut k[0]);

    while t < duration {
        let last = t + h >= duration * (1.0 - 1e-14);
        let proposal = h;
        if last {
            h = duration - t;
        }
        let stage = |tmp: &mut [C64], k: &[Vec<C64>; 7], coeffs: &[(usize, f64)], y: &[C64]| {
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for &(j, a) in coeffs {
                    acc += k[j][i] * a;
                }
                tmp[i] = y[i] + acc * h;
            }
        };
        stage(&mut tmp, &k, &[(0, A21)], y);
        f(&tmp, &mut k[1]);
        stage(&mut tmp, &k, &[(0, A31), (1, A32)], y);
        f(&tmp, &mut k[2]);
        stage(&mut tmp, &k, &[(0, A41), (1, A42), (2, A43)], y);
        f(&tmp, &mut k[3]);
        stage(&mut tmp, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)], y);
        f(&tmp, &mut k[4]);
        stage(&mut tmp, &k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], y);
        f(&tmp, &mut k[5]);
        stage(&mut y_new, &k, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)], y);
        f(&y_new, &mut k[6]);

        let mut err2 = 0.0;
        for i in 0..n {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            let sc = ctl.tol * (0.01 + y[i].norm().max(y_new[i].norm()));
            err2 += (e.norm() / sc).powi(2);
        }
        let err = (err2 / n as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            if last {
                return Ok(proposal);
            }
        }
        let factor = if !err.is_finite() {
            0.2
        } else if err == 0.0 {
            5.0
        } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(ctl.h_max);
        if h < h_min {
            return Err(Underflow { at: t });
        }
    }
    Ok(h)
}
