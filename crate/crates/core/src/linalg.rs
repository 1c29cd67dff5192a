//! Small dense helpers shared by the subspace tracker and the solvers.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Thin SVD with singular values sorted in nonincreasing order and a fixed
/// sign convention: the first non-negligible entry of every left singular
/// vector is nonnegative (the matching right vector flips with it).
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singvals: Vec<f64>,
    pub v: Option<DMatrix<f64>>,
}

/// Backed by faer: nalgebra's SVD loses accuracy on rank-deficient inputs
/// when singular vectors are requested.
pub fn svd_sorted(m: DMatrix<f64>, compute_v: bool) -> SortedSvd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return SortedSvd {
            u: DMatrix::zeros(rows, 0),
            singvals: Vec::new(),
            v: compute_v.then(|| DMatrix::zeros(cols, 0)),
        };
    }
    let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = fm.thin_svd().expect("SVD of a finite matrix converges");
    let (raw_u, raw_v, raw_s) = (svd.U(), svd.V(), svd.S().column_vector());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| raw_s[b].total_cmp(&raw_s[a]));

    let mut u = DMatrix::zeros(rows, k);
    let mut v = compute_v.then(|| DMatrix::zeros(cols, k));
    let mut singvals = Vec::with_capacity(k);
    let mut col = Vec::with_capacity(rows);
    for (dst, &src) in order.iter().enumerate() {
        singvals.push(raw_s[src]);
        col.clear();
        col.extend((0..rows).map(|i| raw_u[(i, src)]));
        let sign = leading_sign(&col);
        for (i, x) in col.iter().enumerate() {
            u[(i, dst)] = x * sign;
        }
        if let Some(v) = v.as_mut() {
            for i in 0..cols {
                v[(i, dst)] = raw_v[(i, src)] * sign;
            }
        }
    }
    SortedSvd { u, singvals, v }
}

fn leading_sign(col: &[f64]) -> f64 {
    let scale = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let cut = 1e-12 * scale;
    match col.iter().find(|x| x.abs() > cut) {
        Some(x) if *x < 0.0 => -1.0,
        _ => 1.0,
    }
}

/// Numerical-rank cutoff for singular values of a `rows x cols` matrix.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Orthonormal basis for the part of `span(e)` orthogonal to `p`, built by
/// modified Gram-Schmidt with one reorthogonalization pass. Residuals with
/// norm below `drop_tol` are discarded.
pub fn orthonormalize_against(p: &DMatrix<f64>, e: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let n = e.nrows();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..e.ncols() {
        let mut v = e.column(j).into_owned();
        for _ in 0..2 {
            if p.ncols() > 0 {
                let c = p.tr_mul(&v);
                v -= p * c;
            }
            for q in &cols {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > drop_tol {
            cols.push(v / norm);
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Estimate of the smallest eigenvalue of an SPD matrix from its Cholesky
/// factor, by inverse iteration.
pub fn min_eigenvalue(chol: &Cholesky<f64, Dyn>, dim: usize) -> f64 {
    if dim == 0 {
        return 1.0;
    }
    let mut x = DVector::from_fn(dim, |i, _| 1.0 + 0.1 * ((i * 7919) % 13) as f64);
    x /= x.norm();
    let mut lambda = f64::INFINITY;
    for _ in 0..30 {
        let y = chol.solve(&x);
        let xy = x.dot(&y);
        if !(xy > 0.0) {
            return 0.0;
        }
        let next = 1.0 / xy;
        let ny = y.norm();
        x = y / ny;
        let done = (lambda - next).abs() <= 1e-10 * next;
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}
