//! Independent reference implementations shared by the integration tests
//! and the acceptance suite. Nothing here calls into the library under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal columns by Householder QR of a Gaussian matrix.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, k);
    g.qr().q().columns(0, k).into_owned()
}

/// All subsets of `pool` with at most `max_len` elements.
pub fn subsets(pool: &[usize], max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &i in pool {
        let extended: Vec<Vec<usize>> = out
            .iter()
            .filter(|s| s.len() < max_len)
            .map(|s| {
                let mut t = s.clone();
                t.push(i);
                t
            })
            .collect();
        out.extend(extended);
    }
    for s in &mut out {
        s.sort_unstable();
    }
    out
}

/// Least squares on the listed columns through the SVD pseudo-inverse;
/// `None` when the columns are numerically dependent.
pub fn pinv_restricted(a: &DMatrix<f64>, y: &DVector<f64>, cols: &[usize]) -> Option<DVector<f64>> {
    let mut out = DVector::zeros(a.ncols());
    if cols.is_empty() {
        return Some(out);
    }
    if cols.len() > a.nrows() {
        return None;
    }
    let at = a.select_columns(cols.iter());
    let sv = at.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 1e-9 * smax {
        return None;
    }
    let x = at.pseudo_inverse(1e-14).ok()? * y;
    for (k, &i) in cols.iter().enumerate() {
        out[i] = x[k];
    }
    Some(out)
}

/// Minimum of `‖s_{T^c}‖₁` subject to `A s = y`, by enumerating the basic
/// solutions: the optimum of this linear program sits on a support of at
/// most `rank(A)` columns outside `T`, joined with `T`.
pub fn l1_brute_force(a: &DMatrix<f64>, y: &DVector<f64>, known: &[usize]) -> Option<(f64, DVector<f64>)> {
    let n = a.ncols();
    let pool: Vec<usize> = (0..n).filter(|i| !known.contains(i)).collect();
    let tol = 1e-9 * y.norm().max(1.0);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for extra in subsets(&pool, a.nrows()) {
        let mut cols = extra.clone();
        cols.extend_from_slice(known);
        cols.sort_unstable();
        let Some(s) = pinv_restricted(a, y, &cols) else { continue };
        if (y - a * &s).norm() > tol {
            continue;
        }
        let obj: f64 = extra.iter().map(|&i| s[i].abs()).sum();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, s));
        }
    }
    best
}

/// Singular values (descending) and left singular vectors of `x` from the
/// symmetric eigendecomposition of `x xᵀ`, keeping values above `floor`.
pub fn gram_svd(x: &DMatrix<f64>, floor: f64) -> (Vec<f64>, DMatrix<f64>) {
    let eig = (x * x.transpose()).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let keep: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i].max(0.0).sqrt() > floor).collect();
    let sv = keep.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
    (sv, eig.eigenvectors.select_columns(keep.iter()))
}

/// Sine of the largest principal angle between the column spans of two
/// matrices with orthonormal columns and equal rank.
pub fn max_sin_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let resid = b - a * (a.transpose() * b);
    resid.singular_values().max()
}

/// One predict/update cycle of the constant-velocity filter in matrix
/// form with the Joseph covariance update. Returns the gain and the
/// updated covariance.
pub fn kalman_cycle(
    cov: &nalgebra::Matrix2<f64>,
    q: f64,
    r: f64,
) -> (nalgebra::Vector2<f64>, nalgebra::Matrix2<f64>) {
    use nalgebra::{Matrix2, RowVector2, Vector2};
    let g = Matrix2::new(1.0, 1.0, 0.0, 1.0);
    let qm = Matrix2::new(0.0, 0.0, 0.0, q);
    let h = RowVector2::new(1.0, 0.0);
    let pred = g * cov * g.transpose() + qm;
    let s = (h * pred * h.transpose())[(0, 0)] + r;
    let k: Vector2<f64> = if s > 0.0 { pred * h.transpose() / s } else { Vector2::zeros() };
    let a = Matrix2::identity() - k * h;
    let post = a * pred * a.transpose() + k * k.transpose() * r;
    (k, post)
}

/// Mean of integer positions.
pub fn centroid(coords: &[usize]) -> f64 {
    coords.iter().map(|&c| c as f64).sum::<f64>() / coords.len() as f64
}

/// `max ‖h_S‖₁ / ‖h‖₁` over nonzero `h` in the span of `basis` (rank at most
/// 3) and `|S| ≤ s`; the null-space property of order `s` holds for
/// `I − P Pᵀ` exactly when this is below one half. Within each sign cell of
/// `h = P c` both norms are linear in `c`, so the maximum sits on a ray where
/// `r − 1` entries of `h` vanish.
pub fn nsp_ratio(basis: &DMatrix<f64>, s: usize) -> f64 {
    let (n, r) = basis.shape();
    let row = |i: usize| basis.row(i).transpose();
    let rays: Vec<DVector<f64>> = match r {
        1 => vec![DVector::from_element(1, 1.0)],
        2 => (0..n).map(|i| DVector::from_vec(vec![-basis[(i, 1)], basis[(i, 0)]])).collect(),
        3 => {
            let mut out = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (row(i), row(j));
                    let c = nalgebra::Vector3::new(a[0], a[1], a[2]).cross(&nalgebra::Vector3::new(b[0], b[1], b[2]));
                    out.push(DVector::from_column_slice(c.as_slice()));
                }
            }
            out
        }
        _ => panic!("rank {r} not supported"),
    };
    rays.iter()
        .map(|c| basis * c)
        .filter(|h| h.norm() > 1e-12)
        .map(|h| {
            let mut mags: Vec<f64> = h.iter().map(|x| x.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            mags[..s.min(n)].iter().sum::<f64>() / mags.iter().sum::<f64>()
        })
        .fold(0.0, f64::max)
}
