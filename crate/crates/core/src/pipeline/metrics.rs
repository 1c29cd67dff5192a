use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::FrameOutput;
use crate::support::Support;

/// `‖P̂ᵀ U‖²_F / ‖U‖²_F`; zero for an empty `U`.
pub fn subspace_alignment(basis: &DMatrix<f64>, u_sub: &DMatrix<f64>) -> f64 {
    let total = u_sub.norm_squared();
    if total == 0.0 || basis.ncols() == 0 {
        return 0.0;
    }
    basis.tr_mul(u_sub).norm_squared() / total
}

/// Ground truth for one frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameTruth<'a> {
    pub m: &'a DVector<f64>,
    pub l: &'a DVector<f64>,
    pub s: &'a DVector<f64>,
    pub support: &'a Support,
}

/// Squared errors and support errors for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub t: usize,
    pub err_s: f64,
    pub energy_s: f64,
    pub err_l: f64,
    pub energy_l: f64,
    /// The foreground is `M` on the true support; its estimate is `M` on the
    /// estimated support.
    pub err_o: f64,
    pub energy_o: f64,
    pub misses: usize,
    pub extras: usize,
    pub predicted_misses: Option<usize>,
    pub predicted_extras: Option<usize>,
    pub support_size: usize,
    pub rank: usize,
    pub epsilon: f64,
    pub iterations: usize,
    pub failed: bool,
    pub clipped: bool,
    pub subspace_updated: bool,
    pub alignment: Vec<f64>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

impl FrameMetrics {
    pub fn compute(t: usize, truth: FrameTruth<'_>, out: &FrameOutput, basis: &DMatrix<f64>, alignment_sets: &[DMatrix<f64>]) -> Self {
        let rec = &out.recovery;
        let est = &rec.support;
        let misses = truth.support.difference(est);
        let extras = est.difference(truth.support);
        let (err_o, energy_o) = if truth.m.len() == truth.s.len() {
            let sq = |set: &Support| set.iter().map(|i| truth.m[i] * truth.m[i]).sum::<f64>();
            (sq(&misses) + sq(&extras), sq(truth.support))
        } else {
            (0.0, 0.0)
        };
        let (predicted_misses, predicted_extras) = match &out.predicted {
            Some(p) => (Some(truth.support.difference(p).len()), Some(p.difference(truth.support).len())),
            None => (None, None),
        };
        FrameMetrics {
            t,
            err_s: (truth.s - &rec.s_hat).norm_squared(),
            energy_s: truth.s.norm_squared(),
            err_l: (truth.l - &rec.l_hat).norm_squared(),
            energy_l: truth.l.norm_squared(),
            err_o,
            energy_o,
            misses: misses.len(),
            extras: extras.len(),
            predicted_misses,
            predicted_extras,
            support_size: truth.support.len(),
            rank: basis.ncols(),
            epsilon: rec.epsilon_used,
            iterations: out.iterations,
            failed: out.failure.is_some(),
            clipped: out.clipped,
            subspace_updated: out.subspace_updated,
            alignment: alignment_sets.iter().map(|u| subspace_alignment(basis, u)).collect(),
        }
    }

    pub fn nmse_s(&self) -> f64 {
        ratio(self.err_s, self.energy_s)
    }

    pub fn nmse_l(&self) -> f64 {
        ratio(self.err_l, self.energy_l)
    }

    pub fn nmse_o(&self) -> f64 {
        ratio(self.err_o, self.energy_o)
    }
}

/// Sums over any collection of frames. Merging is associative and
/// commutative up to floating-point rounding, and exactly reproducible for a
/// fixed merge order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub frames: u64,
    pub failures: u64,
    pub err_s: f64,
    pub energy_s: f64,
    pub err_l: f64,
    pub energy_l: f64,
    pub err_o: f64,
    pub energy_o: f64,
    pub misses: u64,
    pub extras: u64,
    pub predicted_frames: u64,
    pub predicted_misses: u64,
    pub predicted_extras: u64,
    pub support_size: u64,
    /// Per-frame NMSE of `S` summed over frames with nonzero `S`.
    pub frame_nmse_s: f64,
    pub frames_with_s: u64,
    pub alignment: Vec<f64>,
}

impl Summary {
    pub fn add(&mut self, f: &FrameMetrics) {
        self.frames += 1;
        self.failures += f.failed as u64;
        self.err_s += f.err_s;
        self.energy_s += f.energy_s;
        self.err_l += f.err_l;
        self.energy_l += f.energy_l;
        self.err_o += f.err_o;
        self.energy_o += f.energy_o;
        self.misses += f.misses as u64;
        self.extras += f.extras as u64;
        if let (Some(m), Some(e)) = (f.predicted_misses, f.predicted_extras) {
            self.predicted_frames += 1;
            self.predicted_misses += m as u64;
            self.predicted_extras += e as u64;
        }
        self.support_size += f.support_size as u64;
        if f.energy_s > 0.0 {
            self.frame_nmse_s += f.nmse_s();
            self.frames_with_s += 1;
        }
        if self.alignment.len() < f.alignment.len() {
            self.alignment.resize(f.alignment.len(), 0.0);
        }
        for (acc, a) in self.alignment.iter_mut().zip(&f.alignment) {
            *acc += a;
        }
    }

    pub fn merge(&mut self, other: &Summary) {
        self.frames += other.frames;
        self.failures += other.failures;
        self.err_s += other.err_s;
        self.energy_s += other.energy_s;
        self.err_l += other.err_l;
        self.energy_l += other.energy_l;
        self.err_o += other.err_o;
        self.energy_o += other.energy_o;
        self.misses += other.misses;
        self.extras += other.extras;
        self.predicted_frames += other.predicted_frames;
        self.predicted_misses += other.predicted_misses;
        self.predicted_extras += other.predicted_extras;
        self.support_size += other.support_size;
        self.frame_nmse_s += other.frame_nmse_s;
        self.frames_with_s += other.frames_with_s;
        if self.alignment.len() < other.alignment.len() {
            self.alignment.resize(other.alignment.len(), 0.0);
        }
        for (acc, a) in self.alignment.iter_mut().zip(&other.alignment) {
            *acc += a;
        }
    }

    pub fn from_frames<'a>(frames: impl IntoIterator<Item = &'a FrameMetrics>) -> Self {
        let mut s = Summary::default();
        for f in frames {
            s.add(f);
        }
        s
    }

    /// `Σ‖S − Ŝ‖² / Σ‖S‖²`.
    pub fn nmse_s(&self) -> f64 {
        ratio(self.err_s, self.energy_s)
    }

    pub fn nmse_l(&self) -> f64 {
        ratio(self.err_l, self.energy_l)
    }

    pub fn nmse_o(&self) -> f64 {
        ratio(self.err_o, self.energy_o)
    }

    /// Average of the per-frame NMSE of `S`.
    pub fn mean_frame_nmse_s(&self) -> f64 {
        ratio(self.frame_nmse_s, self.frames_with_s as f64)
    }

    fn mean(&self, total: u64, count: u64) -> f64 {
        ratio(total as f64, count as f64)
    }

    pub fn mean_misses(&self) -> f64 {
        self.mean(self.misses, self.frames)
    }

    pub fn mean_extras(&self) -> f64 {
        self.mean(self.extras, self.frames)
    }

    pub fn mean_predicted_misses(&self) -> f64 {
        self.mean(self.predicted_misses, self.predicted_frames)
    }

    pub fn mean_predicted_extras(&self) -> f64 {
        self.mean(self.predicted_extras, self.predicted_frames)
    }

    pub fn mean_support_size(&self) -> f64 {
        self.mean(self.support_size, self.frames)
    }

    pub fn mean_alignment(&self) -> Vec<f64> {
        self.alignment.iter().map(|a| ratio(*a, self.frames as f64)).collect()
    }
}

/// Per-frame summaries across runs, indexed by test frame.
pub(crate) fn per_frame(runs: &[&[FrameMetrics]]) -> Vec<Summary> {
    let len = runs.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut out = vec![Summary::default(); len];
    for run in runs {
        for (k, f) in run.iter().enumerate() {
            out[k].add(f);
        }
    }
    out
}
