//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Relative pivot threshold below which a column-pivoted QR is treated as
/// rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Solves `A X = B` for square `A` via column-pivoted QR. Returns `None` when
/// `A` is numerically rank deficient.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return None;
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    if r00 == 0.0 || (0..r.nrows()).any(|i| r[(i, i)].abs() <= RANK_TOL * r00) {
        return None;
    }
    qr.solve(b)
}

pub fn solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    solve(a, &bm).map(|x| DVector::from_column_slice(x.as_slice()))
}

/// Ordinary least squares `min ||y - X beta||` via an SVD of the
/// column-scaled design; `None` if `X` is numerically rank deficient.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    if x.nrows() != y.len() || x.nrows() < x.ncols() {
        return None;
    }
    let scale: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return None;
    }
    let scaled = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] / scale[j]);
    let svd = scaled.svd(true, true);
    let max = svd.singular_values.max();
    if svd.singular_values.iter().any(|s| *s <= 1e3 * RANK_TOL * max) {
        return None;
    }
    let beta = svd.solve(y, 0.0).ok()?;
    Some(DVector::from_fn(beta.len(), |j, _| beta[j] / scale[j]))
}

/// 2-norm condition number from singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 { f64::INFINITY } else { max / min }
}
