//! Small dense linear-algebra helpers: Gram–Schmidt and norm estimates.

use nalgebra::{DMatrix, DVector};

/// Relative tolerance below which a row is considered dependent on the
/// rows before it in [`orthonormalize_rows`].
pub const ROW_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("row {row} is numerically dependent on the rows before it")]
pub struct RankDeficient {
    pub row: usize,
}

/// Incrementally maintained orthonormal basis of vectors in `R^n`.
///
/// Projections use modified Gram–Schmidt followed by one
/// reorthogonalization pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrthoBasis {
    vectors: Vec<DVector<f64>>,
}

impl OrthoBasis {
    pub fn new() -> Self {
        OrthoBasis { vectors: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    /// Component of `v` orthogonal to the span.
    pub fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.vectors {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        r
    }

    /// Push `v` if its residual exceeds `rel_tol · ‖v‖`; returns the residual
    /// norm and whether the vector was added.
    pub fn try_push(&mut self, v: &DVector<f64>, rel_tol: f64) -> (f64, bool) {
        let r = self.residual(v);
        let rn = r.norm();
        let scale = v.norm();
        if scale > 0.0 && rn > rel_tol * scale {
            self.vectors.push(r / rn);
            (rn, true)
        } else {
            (rn, false)
        }
    }
}

/// Orthonormal rows spanning the row space of `m`, produced row by row
/// in order. Fails if some row is dependent on the previous ones.
pub fn orthonormalize_rows(m: &DMatrix<f64>) -> Result<DMatrix<f64>, RankDeficient> {
    let mut basis = OrthoBasis::new();
    for (row, r) in m.row_iter().enumerate() {
        let v = r.transpose();
        let (_, added) = basis.try_push(&v, ROW_RANK_TOL);
        if !added {
            return Err(RankDeficient { row });
        }
    }
    Ok(rows_to_matrix(basis.vectors(), m.ncols()))
}

/// Stack vectors as the rows of an `len × ncols` matrix.
pub fn rows_to_matrix(rows: &[DVector<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Flatten a matrix row-major.
pub fn flatten_row_major(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.len(), m.transpose().iter().copied())
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Spectral norm estimate by power iteration on `AᵀA`.
///
/// Starts from a fixed non-symmetric vector so the result is deterministic.
pub fn spectral_norm_power(a: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * (i as f64 + 1.0) / n as f64);
    v /= v.norm();
    let mut sigma = 0.0;
    for _ in 0..iterations {
        let w = a.tr_mul(&(a * &v));
        let wn = w.norm();
        if wn == 0.0 {
            return (a * &v).norm();
        }
        sigma = wn.sqrt();
        v = w / wn;
    }
    sigma.max((a * &v).norm())
}

/// Spectral norm from the singular value decomposition.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}
