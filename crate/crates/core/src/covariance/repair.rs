use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{IcdError, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Entrywise symmetry to 1e-12 relative to the largest entry (absolute
/// below unit scale).
pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.abs().max().max(1.0);
    let n = m.nrows();
    (0..n).all(|i| (i + 1..n).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= SYMMETRY_TOL * scale))
}

/// Nearest-PSD repair by eigenvalue clipping with the original diagonal
/// restored.
///
/// Negative eigenvalues are set to zero and the matrix rebuilt; rows and
/// columns are then rescaled symmetrically so the variances match the input.
/// Matrices whose smallest eigenvalue is already non-negative (to 1e-12 of
/// the spectral radius) are returned as-is, which makes the map idempotent.
pub fn psd_repair(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_symmetric(m) {
        return Err(IcdError::data("PSD repair requires a symmetric matrix"));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(m.clone());
    }
    let eig = SymmetricEigen::new(m.clone());
    let radius = eig.eigenvalues.abs().max();
    let smallest = eig.eigenvalues.min();
    if smallest >= -1e-12 * radius {
        return Ok(m.clone());
    }

    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clipped) * v.transpose();

    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let target = m[(i, i)];
            let got = rebuilt[(i, i)];
            if target > 0.0 && got > 0.0 {
                (target / got).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            // average the two triangles so the result is exactly symmetric
            let v = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]) * scale[i] * scale[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
        if scale[i] > 0.0 {
            out[(i, i)] = m[(i, i)];
        }
    }
    Ok(out)
}
