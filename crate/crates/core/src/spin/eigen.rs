use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::hamiltonian::hermitian_deviation;
use crate::error::{Error, Result};

const HERMITIAN_RTOL: f64 = 1e-12;

/// Real eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(λ) V†`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let l = Complex64::new(self.values[j], 0.0);
            for i in 0..n {
                scaled[(i, j)] *= l;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Diagonalize a Hermitian matrix.
pub fn eigendecompose(h: &DMatrix<Complex64>) -> Result<Eigensystem> {
    if !h.is_square() {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tolerance = HERMITIAN_RTOL * scale.max(f64::MIN_POSITIVE);
    let deviation = hermitian_deviation(h);
    if deviation > tolerance {
        return Err(Error::NotHermitian { deviation, tolerance });
    }
    let n = h.nrows();
    if n == 0 {
        return Ok(Eigensystem {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigensystem { values, vectors })
}
