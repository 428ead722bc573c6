use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest admissible `|M − Mᵀ|` entry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Eigenvalues in `[NEGATIVE_EIGEN_FLOOR, 0)` are treated as roundoff.
pub const NEGATIVE_EIGEN_FLOOR: f64 = -1e-10;

/// Symmetric PSD square root of a row-major `d × d` matrix, plus the number
/// of eigenvalues that were clamped to zero.
pub fn matrix_sqrt_psd_counted(m: &[f64], d: usize) -> Result<(Vec<f64>, usize)> {
    if m.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: m.len(),
        });
    }
    if let Some(v) = m.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("matrix entry {v}")));
    }
    let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            asym = asym.max((m[i * d + j] - m[j * d + i]).abs());
        }
    }
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Asymmetric { asymmetry: asym });
    }
    if d == 1 {
        return match m[0] {
            v if v >= 0.0 => Ok((vec![v.sqrt()], 0)),
            v if v >= NEGATIVE_EIGEN_FLOOR => Ok((vec![0.0], 1)),
            v => Err(Error::Indefinite { eigenvalue: v }),
        };
    }
    let a = DMatrix::from_row_slice(d, d, m);
    let a = 0.5 * (&a + a.transpose());
    let eig = SymmetricEigen::new(a);
    let mut clamped = 0;
    let mut roots = eig.eigenvalues.clone();
    for r in roots.iter_mut() {
        if *r < 0.0 {
            if *r < NEGATIVE_EIGEN_FLOOR {
                return Err(Error::Indefinite { eigenvalue: *r });
            }
            *r = 0.0;
            clamped += 1;
        }
        *r = r.sqrt();
    }
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = 0.5 * (s[(i, j)] + s[(j, i)]);
        }
    }
    Ok((out, clamped))
}

pub fn matrix_sqrt_psd(m: &[f64], d: usize) -> Result<Vec<f64>> {
    matrix_sqrt_psd_counted(m, d).map(|(s, _)| s)
}
