//! Small dense linear-algebra helpers. Matrices are nalgebra types; the SVD
//! and the symmetric eigensolver are faer's, since nalgebra's lose accuracy
//! on rank-deficient inputs.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UosError};

/// Thin SVD with singular values sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// Right singular vectors as columns (so `m = u * diag(s) * v^T`).
    pub v: DMatrix<f64>,
}

pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return ThinSvd {
            u: DMatrix::zeros(rows, 0),
            singular_values: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
        };
    }
    let svd = to_faer(m).thin_svd().expect("SVD iteration converges");
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    ThinSvd {
        u: DMatrix::from_fn(rows, k, |r, c| u[(r, order[c])]),
        singular_values: DVector::from_fn(k, |c, _| s[order[c]]),
        v: DMatrix::from_fn(cols, k, |r, c| v[(r, order[c])]),
    }
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen_ascending(m: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = to_faer(&m)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| UosError::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let (vals, vecs) = (eig.S(), eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let values = DVector::from_fn(n, |i, _| vals[order[i]]);
    let vectors = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    Ok((values, vectors))
}

/// Orthonormal basis (as columns) of the column space of `a`, from the
/// eigen-decomposition of the smaller Gram matrix. Directions whose squared
/// singular value falls below `rel_tol * sigma_max^2` are dropped.
pub fn range_basis(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(rows, 0));
    }
    if rows <= cols {
        let gram = a * a.transpose();
        let (vals, vecs) = sym_eigen_ascending(gram)?;
        let top = vals[rows - 1].max(0.0);
        if top == 0.0 {
            return Ok(DMatrix::zeros(rows, 0));
        }
        let keep: Vec<usize> = (0..rows)
            .rev()
            .filter(|&i| vals[i] > rel_tol * top)
            .collect();
        Ok(DMatrix::from_fn(rows, keep.len(), |r, c| {
            vecs[(r, keep[c])]
        }))
    } else {
        let gram = a.transpose() * a;
        let (vals, vecs) = sym_eigen_ascending(gram)?;
        let top = vals[cols - 1].max(0.0);
        if top == 0.0 {
            return Ok(DMatrix::zeros(rows, 0));
        }
        let keep: Vec<usize> = (0..cols)
            .rev()
            .filter(|&i| vals[i] > rel_tol * top)
            .collect();
        let mut q = DMatrix::zeros(rows, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let col = a * vecs.column(i);
            let norm = col.norm();
            q.set_column(c, &(col / norm));
        }
        // Re-orthonormalise: a * v / sigma loses orthogonality for small sigma.
        Ok(orthonormalize(&q))
    }
}

/// Orthonormal basis for the span of the columns of `m` (thin QR).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    m.clone().qr().q()
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    // Work with the smaller Gram matrix; exact enough for an operator norm.
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    if gram.nrows() <= 3 {
        return thin_svd(m).singular_values[0];
    }
    match sym_eigen_ascending(gram) {
        Ok((vals, _)) => vals[vals.len() - 1].max(0.0).sqrt(),
        Err(_) => thin_svd(m).singular_values[0],
    }
}

/// Moore–Penrose pseudo-inverse with relative singular-value cutoff.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = thin_svd(m);
    let (rows, cols) = m.shape();
    let mut out = DMatrix::zeros(cols, rows);
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    for k in 0..svd.singular_values.len() {
        let s = svd.singular_values[k];
        if s > rel_tol * top && s > 0.0 {
            out += (svd.v.column(k) * svd.u.column(k).transpose()) / s;
        }
    }
    out
}

/// Rows of `m` selected by `rows`, in order.
pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Max-abs deviation of `m^T m` from the identity.
pub fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let k = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}
