use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Density matrix of a `d`-level system.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: CMatrix,
}

impl DensityMatrix {
    /// Wrap a matrix after checking trace, Hermiticity and positivity.
    pub fn new(rho: CMatrix) -> Result<Self> {
        let dm = DensityMatrix { rho };
        dm.check().map_err(|reason| Error::invalid("rho0", reason))?;
        Ok(dm)
    }

    pub(crate) fn from_matrix_unchecked(rho: CMatrix) -> Self {
        DensityMatrix { rho }
    }

    pub fn pure(dim: usize, level: usize) -> Self {
        let mut rho = CMatrix::zeros(dim);
        rho[(level, level)] = C64::new(1.0, 0.0);
        DensityMatrix { rho }
    }

    /// Diagonal state with the given populations (normalized to 1).
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        if populations.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("populations", "must be finite and non-negative"));
        }
        let total: f64 = populations.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("populations", "must not all be zero"));
        }
        let n = populations.len();
        let mut rho = CMatrix::zeros(n);
        for (k, p) in populations.iter().enumerate() {
            rho[(k, k)] = C64::new(p / total, 0.0);
        }
        Ok(DensityMatrix { rho })
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.rho[(i, j)]
    }

    pub fn population(&self, level: usize) -> f64 {
        self.rho[(level, level)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.population(k)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.rho.matmul(&self.rho).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.rho.hermiticity_error()
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.rho.to_nalgebra();
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Trace, Hermiticity and positivity checks at the solver tolerances.
    pub fn check(&self) -> std::result::Result<(), String> {
        let tr = self.rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(format!("trace = {tr}"));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(format!("hermiticity error {herm:e}"));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -POSITIVITY_TOL {
            return Err(format!("negative eigenvalue {min_eig:e}"));
        }
        Ok(())
    }

    /// Zero every coherence, keeping populations.
    pub fn dephased(&self) -> Self {
        let n = self.dim();
        let mut rho = self.rho.clone();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    rho[(i, j)] = ZERO;
                }
            }
        }
        DensityMatrix { rho }
    }
}

/// Serializable population summary of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Populations(pub Vec<f64>);
