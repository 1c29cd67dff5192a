//! Frame-by-frame separation: ReProCS and ReProCS with support-predicted
//! modified-CS, plus metrics and the Monte-Carlo experiment driver.

mod experiment;
mod metrics;

pub use experiment::{
    run_experiment, run_single, AlignmentSet, Background, ExperimentReport, ExperimentSpec, FrameSource, GroundTruthFrame,
    RunReport, Scenario,
    TrackRecord, TrackingInit, TrackingSpec,
};
pub use metrics::{subspace_alignment, FrameMetrics, FrameTruth, Summary};

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::recovery::{adapt_epsilon, add_ls_del, threshold_ls, RecoveryResult, SupportFit};
use crate::sparsesolve::{solve, MatrixOp, ProjectorOp, SenseOperator, SolveConfig, SolveStatus};
use crate::subspace::SubspaceEstimate;
use crate::support::Support;
use crate::tracker::{assign_supports, check_disjoint, FrameShape, IntensityRange, ObjectTracker, ObserveMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Plain ℓ1 recovery with thresholding.
    #[default]
    Reprocs,
    /// Kalman-predicted support, modified-CS and Add-LS-Del.
    ModCs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    /// Support threshold for plain recovery.
    pub gamma: f64,
    pub alpha_add: f64,
    pub alpha_del: f64,
    /// Solver settings; `epsilon` and `known_support` are set per frame.
    pub solver: SolveConfig,
    pub observe: ObserveMode,
    /// `ε` is clamped below at this multiple of `‖M_t‖₂`.
    pub epsilon_floor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Reprocs,
            gamma: 1.0,
            alpha_add: 0.5,
            alpha_del: 1.0,
            solver: SolveConfig::default(),
            observe: ObserveMode::Median,
            epsilon_floor: 1e-8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if self.mode == Mode::ModCs && !(0.0 < self.alpha_add && self.alpha_add <= self.alpha_del && self.alpha_del.is_finite()) {
            return Err(Error::invalid("alpha_add", "need 0 < alpha_add <= alpha_del"));
        }
        if !(self.epsilon_floor >= 0.0) {
            return Err(Error::invalid("epsilon_floor", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Everything produced for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub recovery: RecoveryResult,
    /// Predicted support `T̂_{t|t−1}` (modified-CS only).
    pub predicted: Option<Support>,
    /// Support after the addition step (modified-CS only).
    pub added: Option<Support>,
    /// Per-track supports read off `ŝ` by intensity.
    pub assigned: Vec<Support>,
    /// Per-track observed `(row, col)`; `None` means the track coasted.
    pub observed: Vec<Option<(f64, f64)>>,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    /// Solver or least-squares error; `ŝ = 0` for this frame.
    pub failure: Option<Error>,
    /// A predicted support touched the border.
    pub clipped: bool,
    pub subspace_updated: bool,
}

/// One recursive separation pipeline. Strictly sequential: frame `t`
/// depends on the state left by frame `t − 1`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    est: SubspaceEstimate,
    cfg: PipelineConfig,
    psi: Option<DMatrix<f64>>,
    // `(I − P Pᵀ) Ψ` for the current basis.
    psi_op: Option<MatrixOp>,
    shape: FrameShape,
    tracks: Vec<ObjectTracker>,
    l_prev: DVector<f64>,
    frames: usize,
}

impl Pipeline {
    /// `l_prev` is the last low-rank frame of the training segment; `shape`
    /// describes the sparse signal space.
    pub fn new(est: SubspaceEstimate, cfg: PipelineConfig, psi: Option<DMatrix<f64>>, shape: FrameShape, l_prev: DVector<f64>) -> Result<Self> {
        cfg.validate()?;
        check_dim(est.dim(), l_prev.len())?;
        let signal_dim = match &psi {
            Some(p) => {
                check_dim(est.dim(), p.nrows())?;
                check_finite(p.as_slice(), "psi")?;
                p.ncols()
            }
            None => est.dim(),
        };
        check_dim(signal_dim, shape.len())?;
        Ok(Pipeline {
            est,
            cfg,
            psi,
            psi_op: None,
            shape,
            tracks: Vec::new(),
            l_prev,
            frames: 0,
        })
    }

    pub fn estimate(&self) -> &SubspaceEstimate {
        &self.est
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn set_mode(&mut self, mode: Mode) -> Result<()> {
        let mut cfg = self.cfg.clone();
        cfg.mode = mode;
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn tracks(&self) -> &[ObjectTracker] {
        &self.tracks
    }

    pub fn set_tracks(&mut self, tracks: Vec<ObjectTracker>) -> Result<()> {
        let ranges: Vec<IntensityRange> = tracks.iter().map(|t| t.intensity).collect();
        check_disjoint(&ranges)?;
        self.tracks = tracks;
        Ok(())
    }

    pub fn shape(&self) -> FrameShape {
        self.shape
    }

    pub fn frames_processed(&self) -> usize {
        self.frames
    }

    /// Processes one measurement vector.
    pub fn step(&mut self, m: &DVector<f64>) -> Result<FrameOutput> {
        check_dim(self.est.dim(), m.len())?;
        check_finite(m.as_slice(), "measurement")?;
        self.frames += 1;

        let y = self.est.project_perp(&self.est.center(m)?)?;
        let epsilon = adapt_epsilon(&self.est, &self.l_prev)?.max(self.cfg.epsilon_floor * m.norm());

        let modcs = self.cfg.mode == Mode::ModCs;
        let mut clipped = false;
        let predicted = modcs.then(|| {
            let mut union = Support::new();
            for track in &mut self.tracks {
                let p = track.predict(self.shape);
                clipped |= p.clipped;
                union = union.union(&p.support);
            }
            union
        });

        if let (Some(psi), None) = (&self.psi, &self.psi_op) {
            self.psi_op = Some(MatrixOp::projected(self.est.basis(), psi)?);
        }
        let attempt = match &self.psi_op {
            Some(op) => recover(op, &y, epsilon, predicted.as_ref(), &self.cfg),
            None => recover(&ProjectorOp::new(self.est.basis()), &y, epsilon, predicted.as_ref(), &self.cfg),
        };

        let signal_dim = self.shape.len();
        let (recovery, added, status, iterations, failure) = match attempt {
            Ok(r) => {
                let result = RecoveryResult::new(m, self.psi.as_ref(), r.s_raw, r.fit, epsilon);
                (result, r.added, Some(r.status), r.iterations, None)
            }
            Err(e) => {
                let fit = SupportFit {
                    support: Support::new(),
                    s_hat: DVector::zeros(signal_dim),
                    residual_norm: y.norm(),
                };
                let result = RecoveryResult::new(m, self.psi.as_ref(), DVector::zeros(signal_dim), fit, epsilon);
                (result, None, None, 0, Some(e))
            }
        };

        let mut assigned = Vec::new();
        let mut observed = Vec::new();
        if modcs {
            let ranges: Vec<IntensityRange> = self.tracks.iter().map(|t| t.intensity).collect();
            assigned = assign_supports(recovery.s_hat.as_slice(), &recovery.support, &ranges);
            for (track, part) in self.tracks.iter_mut().zip(&assigned) {
                let obs = if failure.is_some() {
                    None
                } else {
                    track.observe(part, self.shape, self.cfg.observe)
                };
                track.update(obs);
                observed.push(obs);
            }
        }

        let mut subspace_updated = false;
        if failure.is_none() {
            subspace_updated = self.est.push_frame(&recovery.l_hat)?;
            if subspace_updated {
                self.psi_op = None;
            }
            self.l_prev = recovery.l_hat.clone();
        }

        Ok(FrameOutput {
            recovery,
            predicted,
            added,
            assigned,
            observed,
            status,
            iterations,
            failure,
            clipped,
            subspace_updated,
        })
    }
}

struct Recovered {
    s_raw: DVector<f64>,
    fit: SupportFit,
    added: Option<Support>,
    status: SolveStatus,
    iterations: usize,
}

fn recover<O: SenseOperator + ?Sized>(
    op: &O,
    y: &DVector<f64>,
    epsilon: f64,
    known: Option<&Support>,
    cfg: &PipelineConfig,
) -> Result<Recovered> {
    let mut solver = cfg.solver.clone();
    solver.epsilon = epsilon;
    solver.known_support = known.cloned().unwrap_or_default();
    let sol = solve(op, y, &solver)?;
    let (fit, added) = match known {
        Some(t) => {
            let out = add_ls_del(op, y, &sol.x, t, cfg.alpha_add, cfg.alpha_del)?;
            (out.fit, Some(out.added))
        }
        None => (threshold_ls(op, y, &sol.x, cfg.gamma)?, None),
    };
    Ok(Recovered {
        s_raw: sol.x,
        fit,
        added,
        status: sol.status,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::UpdateParams;
    use alloc::vec;

    fn toy_estimate() -> SubspaceEstimate {
        let mut basis = DMatrix::zeros(6, 2);
        basis[(0, 0)] = 0.6;
        basis[(1, 0)] = 0.8;
        basis[(2, 1)] = 1.0;
        SubspaceEstimate::from_parts(basis, vec![3.0, 2.0], UpdateParams::periodic(5, 0.01), None).unwrap()
    }

    #[test]
    fn low_rank_only_stream_passes_through() {
        let est = toy_estimate();
        let basis = est.basis().clone();
        let mut p = Pipeline::new(est, PipelineConfig::default(), None, FrameShape::column(6), DVector::zeros(6)).unwrap();
        for k in 0..12 {
            let x = DVector::from_vec(vec![(k as f64).sin() * 4.0, (k as f64 * 0.7).cos() * 3.0]);
            let m = &basis * x;
            let out = p.step(&m).unwrap();
            assert!(out.failure.is_none());
            assert!(out.recovery.support.is_empty());
            assert_eq!(out.recovery.s_hat, DVector::zeros(6));
            assert_eq!(out.recovery.l_hat, m);
        }
    }

    #[test]
    fn conservation_holds_by_construction() {
        let est = toy_estimate();
        let basis = est.basis().clone();
        let mut p = Pipeline::new(est, PipelineConfig::default(), None, FrameShape::column(6), DVector::zeros(6)).unwrap();
        let mut s = DVector::zeros(6);
        s[4] = 7.0;
        let m = &basis * DVector::from_vec(vec![2.0, -1.0]) + &s;
        let out = p.step(&m).unwrap();
        assert_eq!(out.recovery.support.as_slice(), &[4]);
        assert_eq!(out.recovery.l_hat, &m - &out.recovery.s_hat);
        assert!((out.recovery.s_hat[4] - 7.0).abs() < 1e-9);
    }

    #[test]
    fn overlapping_track_ranges_are_rejected() {
        use crate::tracker::TrackState;
        let est = toy_estimate();
        let mut p = Pipeline::new(est, PipelineConfig::default(), None, FrameShape::column(6), DVector::zeros(6)).unwrap();
        let track = |lo, hi| {
            ObjectTracker::new(
                TrackState::exact(1.0, 0.0, 0.0, 1.0, 0).unwrap(),
                TrackState::exact(0.0, 0.0, 0.0, 1.0, 0).unwrap(),
                IntensityRange::new(lo, hi).unwrap(),
                true,
            )
        };
        assert!(p.set_tracks(vec![track(0.0, 2.0), track(1.0, 3.0)]).is_err());
        assert!(p.set_tracks(vec![track(0.0, 2.0), track(2.0, 3.0)]).is_ok());
    }
}
