//! Support estimation and debiasing of the solver output, plus the
//! adaptive noise bound.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::sparsesolve::SenseOperator;
use crate::subspace::SubspaceEstimate;
use crate::support::Support;

/// A support estimate with the least-squares values on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportFit {
    pub support: Support,
    /// Zero off `support`.
    pub s_hat: DVector<f64>,
    /// `‖y − A s_hat‖₂`.
    pub residual_norm: f64,
}

/// Per-frame output of the separation step.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub s_raw: DVector<f64>,
    pub support: Support,
    pub s_hat: DVector<f64>,
    /// `M − Ψ s_hat`, or `M − s_hat` without `Ψ`.
    pub l_hat: DVector<f64>,
    pub epsilon_used: f64,
    pub residual_norm: f64,
}

impl RecoveryResult {
    pub fn new(m: &DVector<f64>, psi: Option<&DMatrix<f64>>, s_raw: DVector<f64>, fit: SupportFit, epsilon_used: f64) -> Self {
        let l_hat = match psi {
            Some(psi) => m - psi * &fit.s_hat,
            None => m - &fit.s_hat,
        };
        RecoveryResult {
            s_raw,
            support: fit.support,
            s_hat: fit.s_hat,
            l_hat,
            epsilon_used,
            residual_norm: fit.residual_norm,
        }
    }
}

/// `‖(I − P Pᵀ)(l_prev − μ)‖₂`, with `μ` the stored mean (zero if none).
pub fn adapt_epsilon(est: &SubspaceEstimate, l_hat_prev: &DVector<f64>) -> Result<f64> {
    let centered = est.center(l_hat_prev)?;
    Ok(est.project_perp(&centered)?.norm())
}

fn check_inputs<O: SenseOperator + ?Sized>(op: &O, y: &DVector<f64>, s_raw: &DVector<f64>) -> Result<()> {
    check_dim(op.measurement_dim(), y.len())?;
    check_dim(op.signal_dim(), s_raw.len())?;
    check_finite(y.as_slice(), "measurements")?;
    check_finite(s_raw.as_slice(), "solver output")
}

fn fit<O: SenseOperator + ?Sized>(op: &O, y: &DVector<f64>, support: Support) -> Result<SupportFit> {
    let s_hat = op.restricted_least_squares(y, &support)?;
    let residual_norm = (y - op.apply(&s_hat)).norm();
    Ok(SupportFit {
        support,
        s_hat,
        residual_norm,
    })
}

/// Indices of `pool` sorted by decreasing `|s_raw|`, ties by index.
fn by_magnitude(pool: impl Iterator<Item = usize>, s_raw: &DVector<f64>) -> Vec<usize> {
    let mut v: Vec<usize> = pool.collect();
    v.sort_by(|&a, &b| s_raw[b].abs().total_cmp(&s_raw[a].abs()).then(a.cmp(&b)));
    v
}

/// Largest `k` in `lo..=ordered.len()` such that `base ∪ ordered[..k]`
/// factors within the conditioning cap. Column subsets never have a worse
/// condition number, so the predicate is monotone in `k`.
fn largest_conditioned_prefix<O: SenseOperator + ?Sized>(op: &O, base: &Support, ordered: &[usize], lo: usize) -> Option<usize> {
    let ok = |k: usize| {
        let s = base.union(&Support::from_indices(ordered[..k].to_vec()));
        op.factor(&s).is_ok()
    };
    if !ok(lo) {
        return None;
    }
    let (mut good, mut bad) = (lo, ordered.len() + 1);
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Some(good)
}

/// Keeps `{i : |s_raw_i| ≥ γ}` and refits by least squares. If that set is
/// too ill-conditioned it is cut back to its largest-magnitude entries.
pub fn threshold_ls<O: SenseOperator + ?Sized>(op: &O, y: &DVector<f64>, s_raw: &DVector<f64>, gamma: f64) -> Result<SupportFit> {
    check_inputs(op, y, s_raw)?;
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be positive"));
    }
    let support = Support::from_predicate(s_raw.as_slice(), |v| v.abs() >= gamma);
    match fit(op, y, support.clone()) {
        Err(Error::IllConditioned(cond)) => {
            let ordered = by_magnitude(support.iter(), s_raw);
            let k = largest_conditioned_prefix(op, &Support::new(), &ordered, 1).ok_or(Error::IllConditioned(cond))?;
            fit(op, y, Support::from_indices(ordered[..k].to_vec()))
        }
        other => other,
    }
}

/// Add-LS-Del output; `added` is the enlarged set fitted before deletion.
#[derive(Debug, Clone, PartialEq)]
pub struct AddLsDel {
    pub added: Support,
    pub fit: SupportFit,
}

/// Adds `{i ∉ T : |s_raw_i| > α_add}` to `T`, fits by least squares,
/// deletes `{i : |value_i| < α_del}` and refits. When the enlarged set is
/// too ill-conditioned only the largest-magnitude additions are kept.
pub fn add_ls_del<O: SenseOperator + ?Sized>(
    op: &O,
    y: &DVector<f64>,
    s_raw: &DVector<f64>,
    known: &Support,
    alpha_add: f64,
    alpha_del: f64,
) -> Result<AddLsDel> {
    check_inputs(op, y, s_raw)?;
    known.check_bounds(op.signal_dim())?;
    if !(alpha_add > 0.0) || !(alpha_add <= alpha_del) {
        return Err(Error::invalid("alpha_add", "need 0 < alpha_add <= alpha_del"));
    }
    let candidates = Support::from_predicate(s_raw.as_slice(), |v| v.abs() > alpha_add).difference(known);
    let mut added = known.union(&candidates);
    let first = match fit(op, y, added.clone()) {
        Err(Error::IllConditioned(cond)) => {
            let ordered = by_magnitude(candidates.iter(), s_raw);
            let k = largest_conditioned_prefix(op, known, &ordered, 0).ok_or(Error::IllConditioned(cond))?;
            added = known.union(&Support::from_indices(ordered[..k].to_vec()));
            fit(op, y, added.clone())?
        }
        other => other?,
    };
    let kept = Support::from_indices(added.iter().filter(|&i| !(first.s_hat[i].abs() < alpha_del)).collect());
    let fit = if kept == added { first } else { fit(op, y, kept)? };
    Ok(AddLsDel { added, fit })
}
