//! Principal-components tracking: truncated-SVD initialization followed by
//! recursive PCA (decay removal, incremental SVD, new-direction retention).

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{orthonormalize_against, rank_tolerance, svd_sorted};

/// When the buffered frames are folded into the estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateTrigger {
    /// Every `tau` frames.
    Periodic,
    /// Once `tau` frames are buffered, whenever the newest frame has a
    /// component outside the current span with norm above `threshold`. The
    /// buffer then acts as a sliding window of the last `tau` frames.
    ProjectedEnergy { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    pub tau: usize,
    pub alpha: f64,
    pub trigger: UpdateTrigger,
}

impl UpdateParams {
    pub fn periodic(tau: usize, alpha: f64) -> Self {
        UpdateParams {
            tau,
            alpha,
            trigger: UpdateTrigger::Periodic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite and nonnegative"));
        }
        if let UpdateTrigger::ProjectedEnergy { threshold } = self.trigger {
            if !(threshold >= 0.0) || !threshold.is_finite() {
                return Err(Error::invalid("threshold", "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// How many leading singular directions the initialization keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitThreshold {
    /// Keep singular values strictly greater than the value.
    Absolute(f64),
    /// Keep the shortest prefix carrying at least this percentage of the
    /// squared singular values.
    Energy(f64),
}

/// Estimate of the low-rank subspace together with the frames collected
/// since the last update.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEstimate {
    basis: DMatrix<f64>,
    singvals: Vec<f64>,
    buffer: Vec<DVector<f64>>,
    params: UpdateParams,
    alpha0: f64,
    sigma_min_sq: f64,
    mean: Option<DVector<f64>>,
    updates: usize,
}

impl SubspaceEstimate {
    /// Initializes from training frames stored as the columns of `training`.
    ///
    /// `sigma_min_sq` is recorded as the per-frame variance along the
    /// weakest retained direction, `sigma_r^2 / frames`.
    pub fn init_truncated_svd(
        training: &DMatrix<f64>,
        threshold: InitThreshold,
        subtract_mean: bool,
        params: UpdateParams,
    ) -> Result<Self> {
        params.validate()?;
        let (n, frames) = training.shape();
        if n == 0 || frames == 0 {
            return Err(Error::Empty("training frames"));
        }
        check_finite(training.as_slice(), "training frames")?;
        let alpha0 = match threshold {
            InitThreshold::Absolute(a) if a >= 0.0 && a.is_finite() => a,
            InitThreshold::Absolute(_) => {
                return Err(Error::invalid("alpha0", "must be finite and nonnegative"))
            }
            InitThreshold::Energy(p) if p > 0.0 && p <= 100.0 => 0.0,
            InitThreshold::Energy(_) => return Err(Error::invalid("alpha0", "energy percentage must lie in (0, 100]")),
        };

        let mut data = training.clone();
        let mean = subtract_mean.then(|| {
            let mu = training.column_mean();
            for mut col in data.column_iter_mut() {
                col -= &mu;
            }
            mu
        });

        let svd = svd_sorted(data, false);
        let sigma_max = svd.singvals.first().copied().unwrap_or(0.0);
        let floor = rank_tolerance(n, frames, sigma_max);
        let numeric_rank = svd.singvals.iter().take_while(|s| **s > floor).count();
        let r = match threshold {
            InitThreshold::Absolute(a) => svd.singvals[..numeric_rank].iter().take_while(|s| **s > a).count(),
            InitThreshold::Energy(p) => {
                let total: f64 = svd.singvals.iter().map(|s| s * s).sum();
                let mut acc = 0.0;
                let mut r = 0;
                for s in &svd.singvals[..numeric_rank] {
                    if acc >= p / 100.0 * total {
                        break;
                    }
                    acc += s * s;
                    r += 1;
                }
                r
            }
        };
        let basis = svd.u.columns(0, r).into_owned();
        let singvals = svd.singvals[..r].to_vec();
        let sigma_min_sq = singvals.last().map_or(0.0, |s| s * s / frames as f64);
        Ok(SubspaceEstimate {
            basis,
            singvals,
            buffer: Vec::new(),
            params,
            alpha0,
            sigma_min_sq,
            mean,
            updates: 0,
        })
    }

    /// Builds an estimate from a stored basis, e.g. a checkpoint.
    pub fn from_parts(
        basis: DMatrix<f64>,
        singvals: Vec<f64>,
        params: UpdateParams,
        mean: Option<DVector<f64>>,
    ) -> Result<Self> {
        params.validate()?;
        let (n, r) = basis.shape();
        check_dim(r, singvals.len())?;
        if r > n {
            return Err(Error::invalid("basis", "more columns than rows"));
        }
        check_finite(basis.as_slice(), "basis")?;
        check_finite(&singvals, "singular values")?;
        if singvals.iter().any(|s| *s <= 0.0) || singvals.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("singvals", "must be positive and nonincreasing"));
        }
        if let Some(mu) = &mean {
            check_dim(n, mu.len())?;
            check_finite(mu.as_slice(), "mean")?;
        }
        let gram_err = (basis.tr_mul(&basis) - DMatrix::<f64>::identity(r, r)).norm();
        if gram_err > 1e-8 {
            return Err(Error::invalid("basis", "columns are not orthonormal"));
        }
        Ok(SubspaceEstimate {
            basis,
            singvals,
            buffer: Vec::new(),
            params,
            alpha0: 0.0,
            sigma_min_sq: 0.0,
            mean,
            updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn singvals(&self) -> &[f64] {
        &self.singvals
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn params(&self) -> &UpdateParams {
        &self.params
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn sigma_min_sq(&self) -> f64 {
        self.sigma_min_sq
    }

    pub fn mean(&self) -> Option<&DVector<f64>> {
        self.mean.as_ref()
    }

    /// Number of completed update cycles.
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Subtracts the stored mean, if any.
    pub fn center(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), v.len())?;
        Ok(match &self.mean {
            Some(mu) => v - mu,
            None => v.clone(),
        })
    }

    /// `(I - P P^T) v`.
    pub fn project_perp(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), v.len())?;
        Ok(self.perp(v))
    }

    pub(crate) fn perp(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.rank() == 0 {
            return v.clone();
        }
        let c = self.basis.tr_mul(v);
        v - &self.basis * c
    }

    fn buffer_matrix(&self) -> Result<DMatrix<f64>> {
        if self.buffer.is_empty() {
            return Err(Error::Empty("frame buffer"));
        }
        Ok(DMatrix::from_columns(&self.buffer))
    }

    /// Drops basis directions along which the buffered frames have
    /// per-frame variance below `alpha`.
    pub fn remove_decayed(&mut self) -> Result<()> {
        let d = self.buffer_matrix()?;
        if self.rank() == 0 {
            return Ok(());
        }
        let k = d.ncols() as f64;
        let proj = self.basis.tr_mul(&d);
        let keep: Vec<usize> = (0..self.rank())
            .filter(|&i| proj.row(i).norm_squared() / k >= self.params.alpha)
            .collect();
        if keep.len() < self.rank() {
            self.basis = self.basis.select_columns(keep.iter());
            self.singvals = keep.iter().map(|&i| self.singvals[i]).collect();
        }
        Ok(())
    }

    /// Folds the buffered frames into the basis by incremental SVD and
    /// returns the rank before the update.
    pub fn incremental_update(&mut self) -> Result<usize> {
        let d = self.buffer_matrix()?;
        let r = self.rank();
        let n = self.dim();
        let c = self.basis.tr_mul(&d);
        let e = &d - &self.basis * &c;
        let drop_tol = 1e-10 * d.norm().max(1.0);
        let j = orthonormalize_against(&self.basis, &e, drop_tol);
        let q = j.ncols();
        let kmat = j.tr_mul(&e);

        let tau = d.ncols();
        let mut b = DMatrix::zeros(r + q, r + tau);
        for i in 0..r {
            b[(i, i)] = self.singvals[i];
        }
        b.view_mut((0, r), (r, tau)).copy_from(&c);
        b.view_mut((r, r), (q, tau)).copy_from(&kmat);

        let svd = svd_sorted(b, false);
        let sigma_max = svd.singvals.first().copied().unwrap_or(0.0);
        let floor = rank_tolerance(r + q, r + tau, sigma_max);
        let keep = svd.singvals.iter().take_while(|s| **s > floor && **s > 0.0).count();

        let mut joint = DMatrix::zeros(n, r + q);
        joint.view_mut((0, 0), (n, r)).copy_from(&self.basis);
        joint.view_mut((0, r), (n, q)).copy_from(&j);
        self.basis = joint * svd.u.columns(0, keep);
        self.singvals = svd.singvals[..keep].to_vec();
        Ok(r)
    }

    /// Keeps the first `r_before` directions plus any later direction whose
    /// per-frame variance `sigma^2 / tau` reaches `alpha`, then clears the
    /// buffer.
    pub fn retain_new(&mut self, r_before: usize) {
        let tau = self.buffer.len().max(1) as f64;
        let keep: Vec<usize> = (0..self.rank())
            .filter(|&i| i < r_before || self.singvals[i] * self.singvals[i] / tau >= self.params.alpha)
            .collect();
        if keep.len() < self.rank() {
            self.basis = self.basis.select_columns(keep.iter());
            self.singvals = keep.iter().map(|&i| self.singvals[i]).collect();
        }
        self.buffer.clear();
    }

    /// Buffers one low-rank estimate and runs an update cycle when the
    /// trigger fires. Returns whether an update ran.
    pub fn push_frame(&mut self, lhat: &DVector<f64>) -> Result<bool> {
        let frame = self.center(lhat)?;
        check_finite(frame.as_slice(), "low-rank estimate")?;
        let tau = self.params.tau;
        let fire = match self.params.trigger {
            UpdateTrigger::Periodic => self.buffer.len() + 1 >= tau,
            UpdateTrigger::ProjectedEnergy { threshold } => {
                if self.buffer.len() == tau {
                    self.buffer.remove(0);
                }
                self.buffer.len() + 1 >= tau && self.perp(&frame).norm() > threshold
            }
        };
        self.buffer.push(frame);
        if fire {
            self.remove_decayed()?;
            let r_before = self.incremental_update()?;
            self.retain_new(r_before);
            self.updates += 1;
        }
        Ok(fire)
    }
}
