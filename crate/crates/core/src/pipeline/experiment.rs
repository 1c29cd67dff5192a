use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::metrics::{per_frame, FrameMetrics, FrameTruth, Summary};
use super::{Mode, Pipeline, PipelineConfig};
use crate::error::{Error, Result};
use crate::subspace::{InitThreshold, SubspaceEstimate, UpdateParams};
use crate::support::Support;
use crate::synth::{
    compose, generate_basis_columns, stream_rng, ComposeMode, LowRankProcess, LowRankSpec, ObjectSpec, ObjectTruth,
    SupportProcess, SupportProcessSpec,
};
use crate::tracker::{
    assign_supports, check_disjoint, observe, omega_bound, FrameShape, IntensityRange, ObjectTracker, ObserveMode,
    TrackState,
};

/// Source of the low-rank part.
#[derive(Debug, Clone)]
pub enum Background {
    Synthetic(LowRankSpec),
    /// Recorded frames, one per column; frame `t` (1-based) is column `t − 1`.
    Recorded(Arc<DMatrix<f64>>),
}

impl Background {
    pub fn dim(&self) -> usize {
        match self {
            Background::Synthetic(s) => s.n,
            Background::Recorded(m) => m.nrows(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub background: Background,
    /// Constant added to every synthetic background entry.
    pub background_mean: f64,
    pub support: SupportProcessSpec,
    pub compose: ComposeMode,
    /// Optional dictionary: `M = L + Ψ S` (additive composition only).
    pub psi: Option<DMatrix<f64>>,
    /// Training frames, all with `S = 0`.
    pub t0: usize,
    /// Test frames after training.
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackingInit {
    /// Start each filter at the true position and velocity with zero
    /// covariance.
    Truth,
    /// Run plain ReProCS for `frames` frames, then locate each object by
    /// intensity and centroid; the filters start with covariance `diag(R, R)`.
    WarmUp { frames: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingSpec {
    pub init: TrackingInit,
    /// Observation noise variance.
    pub r: f64,
    /// Acceleration noise variance per axis `(row, col)`.
    pub q: (f64, f64),
    /// One band per object, in object order.
    pub intensity_ranges: Vec<IntensityRange>,
}

/// Named set of generator basis columns whose alignment with `P̂` is
/// reported every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentSet {
    pub name: String,
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub init: InitThreshold,
    pub subtract_mean: bool,
    /// Starting estimate, e.g. from a checkpoint; replaces the training SVD.
    pub initial: Option<SubspaceEstimate>,
    pub update: UpdateParams,
    /// Base configuration; `mode` is overridden by `modes`.
    pub pipeline: PipelineConfig,
    /// Modes run on identical data within each run.
    pub modes: Vec<Mode>,
    pub tracking: Option<TrackingSpec>,
    pub alignment: Vec<AlignmentSet>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let sc = &self.scenario;
        if sc.t0 == 0 {
            return Err(Error::invalid("t0", "at least one training frame is required"));
        }
        if self.modes.is_empty() {
            return Err(Error::invalid("modes", "at least one mode is required"));
        }
        self.update.validate()?;
        if !sc.background_mean.is_finite() {
            return Err(Error::invalid("background_mean", "must be finite"));
        }
        sc.support.validate()?;
        let n = sc.background.dim();
        if let Some(est) = &self.initial {
            if est.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: est.dim(),
                });
            }
        }
        match &sc.background {
            Background::Synthetic(spec) => spec.validate()?,
            Background::Recorded(frames) => {
                if frames.ncols() < sc.t0 + sc.horizon {
                    return Err(Error::invalid("frames", "fewer recorded frames than t0 + horizon"));
                }
                if !self.alignment.is_empty() {
                    return Err(Error::invalid("alignment", "needs a synthetic background"));
                }
            }
        }
        let signal_dim = match &sc.psi {
            Some(psi) => {
                if psi.nrows() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: psi.nrows(),
                    });
                }
                if sc.compose != ComposeMode::Additive {
                    return Err(Error::invalid("compose", "a dictionary requires additive composition"));
                }
                psi.ncols()
            }
            None => n,
        };
        if sc.support.dim() != signal_dim {
            return Err(Error::DimensionMismatch {
                expected: signal_dim,
                found: sc.support.dim(),
            });
        }
        if let Background::Synthetic(spec) = &sc.background {
            for set in &self.alignment {
                if let Some(&c) = set.columns.iter().find(|&&c| c >= spec.columns_used()) {
                    return Err(Error::IndexOutOfRange {
                        index: c,
                        dim: spec.columns_used(),
                    });
                }
            }
        }
        for &mode in &self.modes {
            let mut cfg = self.pipeline.clone();
            cfg.mode = mode;
            cfg.validate()?;
        }
        if self.modes.contains(&Mode::ModCs) {
            let tracking = self
                .tracking
                .as_ref()
                .ok_or_else(|| Error::invalid("tracking", "modified-CS needs a tracking section"))?;
            let SupportProcessSpec::Objects { objects, .. } = &sc.support else {
                return Err(Error::invalid("tracking", "modified-CS needs an object support process"));
            };
            if tracking.intensity_ranges.len() != objects.len() {
                return Err(Error::invalid("intensity_ranges", "need one range per object"));
            }
            check_disjoint(&tracking.intensity_ranges)?;
            if !(tracking.r >= 0.0) || !(tracking.q.0 >= 0.0) || !(tracking.q.1 >= 0.0) {
                return Err(Error::invalid("tracking", "noise variances must be nonnegative"));
            }
            if let TrackingInit::WarmUp { frames } = tracking.init {
                if frames == 0 {
                    return Err(Error::invalid("warmup", "needs at least one frame"));
                }
            }
        }
        Ok(())
    }

    fn objects(&self) -> &[ObjectSpec] {
        match &self.scenario.support {
            SupportProcessSpec::Objects { objects, .. } => objects,
            SupportProcessSpec::Uniform { .. } => &[],
        }
    }
}

/// Filter state and observation of one object at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub t: usize,
    pub object: usize,
    pub row: TrackState,
    pub col: TrackState,
    pub observed: Option<(f64, f64)>,
    pub truth: (f64, f64),
    /// Observation-error bound for single-column frames; NaN otherwise or
    /// when the object is lost.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub mode: Mode,
    pub frames: Vec<FrameMetrics>,
    pub tracks: Vec<TrackRecord>,
    /// Set if the run stopped early; frames up to that point are kept.
    pub error: Option<Error>,
}

impl RunReport {
    pub fn summary(&self) -> Summary {
        Summary::from_frames(&self.frames)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    /// Ordered by run index, then by mode order within a run.
    pub runs: Vec<RunReport>,
    pub alignment_names: Vec<String>,
}

impl ExperimentReport {
    /// Assembles a report from per-run outputs in any order.
    pub fn from_runs(mut runs: Vec<RunReport>, alignment_names: Vec<String>, modes: &[Mode]) -> Self {
        let mode_rank = |m: Mode| modes.iter().position(|x| *x == m).unwrap_or(usize::MAX);
        runs.sort_by_key(|r| (r.run, mode_rank(r.mode)));
        ExperimentReport { runs, alignment_names }
    }

    pub fn modes(&self) -> Vec<Mode> {
        let mut out: Vec<Mode> = Vec::new();
        for r in &self.runs {
            if !out.contains(&r.mode) {
                out.push(r.mode);
            }
        }
        out
    }

    /// Aggregate over all runs of `mode`, merged in run order.
    pub fn summary(&self, mode: Mode) -> Summary {
        let mut s = Summary::default();
        for r in self.runs.iter().filter(|r| r.mode == mode) {
            s.merge(&r.summary());
        }
        s
    }

    /// Per-test-frame aggregate over all runs of `mode`.
    pub fn per_frame(&self, mode: Mode) -> Vec<Summary> {
        let runs: Vec<&[FrameMetrics]> = self.runs.iter().filter(|r| r.mode == mode).map(|r| r.frames.as_slice()).collect();
        per_frame(&runs)
    }

    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }
}

/// One synthesized frame with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    /// 1-based frame index.
    pub t: usize,
    pub m: DVector<f64>,
    pub l: DVector<f64>,
    /// Zero for training frames.
    pub s: DVector<f64>,
    pub support: Support,
    pub objects: Vec<ObjectTruth>,
}

impl GroundTruthFrame {
    /// The foreground: `M` on the support, zero elsewhere.
    pub fn foreground(&self) -> DVector<f64> {
        let mut o = DVector::zeros(self.m.len());
        if self.s.len() == self.m.len() {
            for i in self.support.iter() {
                o[i] = self.m[i];
            }
        }
        o
    }
}

/// Produces the frames of a scenario in order: `t0` training frames with
/// `S = 0`, then `horizon` test frames. Stream 0 seeds the basis, stream 1
/// the low-rank process and stream 2 the sparse process.
pub struct FrameSource<'a> {
    scenario: &'a Scenario,
    process: Option<LowRankProcess>,
    sparse: SupportProcess,
    rng_low: ChaCha8Rng,
    rng_sparse: ChaCha8Rng,
    t: usize,
}

impl<'a> FrameSource<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64) -> Result<Self> {
        let n = scenario.background.dim();
        let process = match &scenario.background {
            Background::Synthetic(ls) => {
                let basis = generate_basis_columns(n, ls.columns_used(), &mut stream_rng(seed, 0))?;
                Some(LowRankProcess::new(ls.clone(), basis)?)
            }
            Background::Recorded(_) => None,
        };
        Ok(FrameSource {
            scenario,
            process,
            sparse: SupportProcess::new(scenario.support.clone())?,
            rng_low: stream_rng(seed, 1),
            rng_sparse: stream_rng(seed, 2),
            t: 0,
        })
    }

    /// Generator basis, for synthetic backgrounds.
    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.process.as_ref().map(|p| p.basis())
    }

    pub fn frames_emitted(&self) -> usize {
        self.t
    }

    /// The next frame, or `None` after `t0 + horizon` frames.
    pub fn next_frame(&mut self) -> Result<Option<GroundTruthFrame>> {
        let sc = self.scenario;
        if self.t >= sc.t0 + sc.horizon {
            return Ok(None);
        }
        self.t += 1;
        let t = self.t;
        let l = match (&mut self.process, &sc.background) {
            (Some(p), _) => p.step(&mut self.rng_low).add_scalar(sc.background_mean),
            (None, Background::Recorded(m)) => m.column(t - 1).into_owned(),
            (None, Background::Synthetic(_)) => unreachable!("synthetic background always has a process"),
        };
        if t <= sc.t0 {
            let dim = sc.support.dim();
            return Ok(Some(GroundTruthFrame {
                t,
                m: l.clone(),
                l,
                s: DVector::zeros(dim),
                support: Support::new(),
                objects: Vec::new(),
            }));
        }
        let sf = self.sparse.step(&mut self.rng_sparse);
        let (m, s) = match &sc.psi {
            Some(psi) => {
                let s = sf.values.clone();
                (&l + psi * &s, s)
            }
            None => compose(&l, &sf.values, &sf.support, sc.compose)?,
        };
        Ok(Some(GroundTruthFrame {
            t,
            m,
            l,
            s,
            support: sf.support,
            objects: sf.objects,
        }))
    }
}

struct Data {
    est: SubspaceEstimate,
    l_last: DVector<f64>,
    frames: Vec<GroundTruthFrame>,
    alignment: Vec<DMatrix<f64>>,
    shape: FrameShape,
}

fn generate(spec: &ExperimentSpec, seed: u64) -> Result<Data> {
    let sc = &spec.scenario;
    let n = sc.background.dim();
    let mut source = FrameSource::new(sc, seed)?;
    let mut training = DMatrix::zeros(n, sc.t0);
    for k in 0..sc.t0 {
        let f = source.next_frame()?.expect("training frames come first");
        training.set_column(k, &f.l);
    }
    let l_last = training.column(sc.t0 - 1).into_owned();
    let est = match &spec.initial {
        Some(est) => est.clone(),
        None => SubspaceEstimate::init_truncated_svd(&training, spec.init, spec.subtract_mean, spec.update)?,
    };
    drop(training);

    let mut frames = Vec::with_capacity(sc.horizon);
    while let Some(f) = source.next_frame()? {
        frames.push(f);
    }
    let alignment = match source.basis() {
        Some(basis) => spec.alignment.iter().map(|a| basis.select_columns(a.columns.iter())).collect(),
        None => Vec::new(),
    };
    let shape = match &sc.support {
        SupportProcessSpec::Objects { shape, .. } => *shape,
        SupportProcessSpec::Uniform { n, .. } => FrameShape::column(*n),
    };
    Ok(Data {
        est,
        l_last,
        frames,
        alignment,
        shape,
    })
}

fn truth_tracks(spec: &ExperimentSpec, tracking: &TrackingSpec, first: &[ObjectTruth]) -> Result<Vec<ObjectTracker>> {
    spec.objects()
        .iter()
        .zip(first)
        .zip(&tracking.intensity_ranges)
        .map(|((o, truth), range)| {
            Ok(ObjectTracker::new(
                TrackState::exact(truth.center.0, truth.velocity.0, tracking.q.0, tracking.r, o.half_height)?,
                TrackState::exact(truth.center.1, truth.velocity.1, tracking.q.1, tracking.r, o.half_width)?,
                *range,
                true,
            ))
        })
        .collect()
}

fn centroid(support: &Support, shape: FrameShape) -> Option<(f64, f64)> {
    let (rows, cols): (Vec<usize>, Vec<usize>) = support.iter().map(|i| shape.coords(i)).unzip();
    Some((observe(&rows, ObserveMode::Centroid)?, observe(&cols, ObserveMode::Centroid)?))
}

/// Filters started from the last two warm-up support estimates.
fn warmup_tracks(spec: &ExperimentSpec, tracking: &TrackingSpec, shape: FrameShape, history: &[(DVector<f64>, Support)]) -> Result<Vec<ObjectTracker>> {
    let locate = |(s_hat, support): &(DVector<f64>, Support)| -> Vec<Option<(f64, f64)>> {
        assign_supports(s_hat.as_slice(), support, &tracking.intensity_ranges)
            .iter()
            .map(|part| centroid(part, shape))
            .collect()
    };
    let last = locate(history.last().ok_or(Error::Empty("warm-up frames"))?);
    let prev = if history.len() >= 2 {
        locate(&history[history.len() - 2])
    } else {
        alloc::vec![None; last.len()]
    };
    let cov = [[tracking.r, 0.0], [0.0, tracking.r]];
    spec.objects()
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let (pr, pc) = last[k].ok_or_else(|| Error::invalid("warmup", "an object was not found in the last warm-up frame"))?;
            let (vr, vc) = match prev[k] {
                Some((qr, qc)) => (pr - qr, pc - qc),
                None => (0.0, 0.0),
            };
            Ok(ObjectTracker::new(
                TrackState::new(pr, vr, cov, tracking.q.0, tracking.r, o.half_height)?,
                TrackState::new(pc, vc, cov, tracking.q.1, tracking.r, o.half_width)?,
                tracking.intensity_ranges[k],
                false,
            ))
        })
        .collect()
}

fn track_records(t: usize, shape: FrameShape, pipeline: &Pipeline, observed: &[Option<(f64, f64)>], assigned: &[Support], truth: &[ObjectTruth]) -> Vec<TrackRecord> {
    pipeline
        .tracks()
        .iter()
        .enumerate()
        .map(|(k, tr)| {
            let truth_k = truth.get(k);
            let bound = match (truth_k, assigned.get(k)) {
                (Some(obj), Some(part)) if shape.cols == 1 => {
                    let misses = obj.support.difference(part).len();
                    let extras: Vec<usize> = part.difference(&obj.support).iter().map(|i| shape.coords(i).0).collect();
                    omega_bound(tr.row.half_width, obj.center.0, misses, &extras).unwrap_or(f64::NAN)
                }
                _ => f64::NAN,
            };
            TrackRecord {
                t,
                object: k,
                row: tr.row,
                col: tr.col,
                observed: observed.get(k).copied().flatten(),
                truth: truth_k.map_or((f64::NAN, f64::NAN), |o| o.center),
                bound,
            }
        })
        .collect()
}

fn run_mode(spec: &ExperimentSpec, data: &Data, mode: Mode, run: usize, seed: u64) -> RunReport {
    let mut report = RunReport {
        run,
        seed,
        mode,
        frames: Vec::new(),
        tracks: Vec::new(),
        error: None,
    };
    if let Err(e) = drive(spec, data, mode, &mut report) {
        report.error = Some(e);
    }
    report
}

fn drive(spec: &ExperimentSpec, data: &Data, mode: Mode, report: &mut RunReport) -> Result<()> {
    let sc = &spec.scenario;
    let mut cfg = spec.pipeline.clone();
    cfg.mode = Mode::Reprocs;
    let mut pipeline = Pipeline::new(data.est.clone(), cfg, sc.psi.clone(), data.shape, data.l_last.clone())?;

    let tracking = spec.tracking.as_ref().filter(|_| mode == Mode::ModCs);
    let mut warmup = 0;
    if let Some(tr) = tracking {
        match tr.init {
            TrackingInit::Truth => {
                if let Some(first) = data.frames.first() {
                    pipeline.set_tracks(truth_tracks(spec, tr, &first.objects)?)?;
                }
                pipeline.set_mode(Mode::ModCs)?;
            }
            TrackingInit::WarmUp { frames } => warmup = frames,
        }
    }

    let mut history: Vec<(DVector<f64>, Support)> = Vec::new();
    for (k, frame) in data.frames.iter().enumerate() {
        let t = sc.t0 + k + 1;
        if let (Some(tr), true) = (tracking, k == warmup && warmup > 0) {
            pipeline.set_tracks(warmup_tracks(spec, tr, data.shape, &history)?)?;
            pipeline.set_mode(Mode::ModCs)?;
        }
        let out = pipeline.step(&frame.m)?;
        if k < warmup {
            history.push((out.recovery.s_hat.clone(), out.recovery.support.clone()));
            if history.len() > 2 {
                history.remove(0);
            }
        }
        let truth = FrameTruth {
            m: &frame.m,
            l: &frame.l,
            s: &frame.s,
            support: &frame.support,
        };
        report
            .frames
            .push(FrameMetrics::compute(t, truth, &out, pipeline.estimate().basis(), &data.alignment));
        if !pipeline.tracks().is_empty() && !out.observed.is_empty() {
            report
                .tracks
                .extend(track_records(t, data.shape, &pipeline, &out.observed, &out.assigned, &frame.objects));
        }
    }
    Ok(())
}

/// One Monte-Carlo run: generates data from `seed` and runs every mode on
/// it. Generation failures are reported on each mode's record.
pub fn run_single(spec: &ExperimentSpec, run: usize, seed: u64) -> Vec<RunReport> {
    let data = spec.validate().and_then(|_| generate(spec, seed));
    match data {
        Ok(data) => spec.modes.iter().map(|&m| run_mode(spec, &data, m, run, seed)).collect(),
        Err(e) => spec
            .modes
            .iter()
            .map(|&mode| RunReport {
                run,
                seed,
                mode,
                frames: Vec::new(),
                tracks: Vec::new(),
                error: Some(e.clone()),
            })
            .collect(),
    }
}

/// Runs every seed in order; run `i` uses `seeds[i]`.
pub fn run_experiment(spec: &ExperimentSpec, seeds: &[u64]) -> Result<ExperimentReport> {
    spec.validate()?;
    let runs = seeds.iter().enumerate().flat_map(|(i, &s)| run_single(spec, i, s)).collect();
    let names = spec.alignment.iter().map(|a| a.name.clone()).collect();
    Ok(ExperimentReport::from_runs(runs, names, &spec.modes))
}
