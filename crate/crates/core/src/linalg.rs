//! Singular value decomposition of dense `nalgebra` matrices, computed by
//! `faer`. The bidiagonal QR in `nalgebra` occasionally fails to converge on
//! `+-1` matrices with repeated singular values.

use nalgebra::DMatrix;

pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m).singular_values().expect("svd of a finite matrix converges")
}

/// Thin SVD `m = u diag(s) v^T`.
pub(crate) fn svd(m: &DMatrix<f64>) -> Svd {
    let f = to_faer(m);
    let d = f.thin_svd().expect("svd of a finite matrix converges");
    let (u, v) = (d.U(), d.V());
    let s = d.S().column_vector();
    let k = s.nrows();
    Svd {
        u: DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, j)]),
        s: (0..k).map(|i| s[i]).collect(),
        v: DMatrix::from_fn(v.nrows(), k, |i, j| v[(i, j)]),
    }
}
