//! Library-versus-oracle comparisons shared by the integration tests and
//! the acceptance suite. Each function returns the measured discrepancy;
//! callers decide the tolerance.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;

use reprocs_core::pipeline::{ExperimentSpec, FrameOutput, FrameSource, GroundTruthFrame, Mode, Pipeline, TrackingInit};
use reprocs_core::synth::SupportProcessSpec;
use reprocs_core::tracker::{omega_bound, FrameShape, ObjectTracker, TrackState};
use reprocs_core::{solve, MatrixOp, SolveConfig, SolveStatus, SubspaceEstimate, Support, UpdateParams};

use crate::oracles::{self, centroid, gaussian_matrix, gram_svd, kalman_cycle, l1_brute_force, max_sin_angle, rng};

pub struct Planted {
    pub a: DMatrix<f64>,
    pub s: DVector<f64>,
    pub y: DVector<f64>,
    pub support: Vec<usize>,
}

/// `y = A s` with `n ≤ 10` unknowns, `m ≤ 8` Gaussian measurements and one
/// or two nonzeros of magnitude in `[1, 5)`.
pub fn planted(seed: u64) -> Planted {
    let mut r = rng(seed);
    let n = r.random_range(4..=10);
    let m = r.random_range(3..=8.min(n));
    let a = gaussian_matrix(&mut r, m, n);
    let k = r.random_range(1..=2);
    let mut support = Vec::new();
    while support.len() < k {
        let i = r.random_range(0..n);
        if !support.contains(&i) {
            support.push(i);
        }
    }
    support.sort_unstable();
    let mut s = DVector::zeros(n);
    for &i in &support {
        let mag: f64 = r.random_range(1.0..5.0);
        s[i] = if r.random_bool(0.5) { mag } else { -mag };
    }
    let y = &a * &s;
    Planted { a, s, y, support }
}

pub struct SolverCheck {
    /// `|solver − enumeration| / max(1, enumeration)` for the ℓ1 objective.
    pub objective_gap: f64,
    pub converged: bool,
    /// Relative error of the solution when the true support is known.
    pub known_support_error: f64,
}

pub fn solver_check(seed: u64) -> SolverCheck {
    let inst = planted(seed);
    let op = MatrixOp::new(inst.a.clone()).unwrap();
    let (best, _) = l1_brute_force(&inst.a, &inst.y, &[]).unwrap();
    let sol = solve(&op, &inst.y, &SolveConfig::default()).unwrap();
    let cfg = SolveConfig {
        known_support: Support::from_indices(inst.support.clone()),
        ..SolveConfig::default()
    };
    let known = solve(&op, &inst.y, &cfg).unwrap();
    SolverCheck {
        objective_gap: (sol.objective - best).abs() / best.max(1.0),
        converged: sol.status == SolveStatus::Converged,
        known_support_error: (&known.x - &inst.s).norm() / inst.s.norm(),
    }
}

pub struct IsvdCheck {
    pub n: usize,
    pub rank: usize,
    /// Largest relative singular-value error.
    pub singular_value_error: f64,
    /// Sine of the largest principal angle to the batch subspace.
    pub angle: f64,
    /// `‖PᵀP − I‖_F` after the update.
    pub orthonormality: f64,
}

/// One update cycle from a random rank-`r` estimate with `tau` random
/// frames, compared with the batch SVD of `[P diag(σ), D]`.
pub fn isvd_check(seed: u64) -> IsvdCheck {
    let mut r = rng(seed);
    let n = r.random_range(2..=16);
    let rank = r.random_range(0..=4.min(n));
    let tau = r.random_range(1..=6);
    let basis = oracles::random_orthonormal(&mut r, n, rank);
    let mut singvals: Vec<f64> = (0..rank).map(|_| r.random_range(1.0..20.0)).collect();
    singvals.sort_by(|a, b| b.total_cmp(a));
    let frames = gaussian_matrix(&mut r, n, tau);

    let params = UpdateParams::periodic(tau, 0.0);
    let mut est = SubspaceEstimate::from_parts(basis.clone(), singvals.clone(), params, None).unwrap();
    for j in 0..tau {
        est.push_frame(&frames.column(j).into_owned()).unwrap();
    }

    let mut joint = DMatrix::zeros(n, rank + tau);
    for (k, sv) in singvals.iter().enumerate() {
        joint.set_column(k, &(basis.column(k) * *sv));
    }
    joint.columns_mut(rank, tau).copy_from(&frames);
    let (sv, u) = gram_svd(&joint, 1e-6);

    let got = est.singvals();
    let singular_value_error = if got.len() != sv.len() {
        f64::INFINITY
    } else {
        got.iter().zip(&sv).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max)
    };
    let angle = if est.rank() == u.ncols() { max_sin_angle(est.basis(), &u) } else { f64::INFINITY };
    let p = est.basis();
    let orthonormality = (p.transpose() * p - DMatrix::<f64>::identity(p.ncols(), p.ncols())).norm();
    IsvdCheck {
        n,
        rank: est.rank(),
        singular_value_error,
        angle,
        orthonormality,
    }
}

pub struct RiccatiCheck {
    /// Largest gain or covariance discrepancy, relative to `max(1, |value|)`.
    pub discrepancy: f64,
    /// Every covariance along the way was symmetric PSD.
    pub psd: bool,
}

/// `steps` predict/update cycles of one coordinate against the matrix-form
/// Joseph recursion, starting from a random PSD covariance.
pub fn riccati_check(seed: u64, q: f64, r_var: f64, steps: usize) -> RiccatiCheck {
    let mut r = rng(seed);
    let a: f64 = r.random_range(0.0..2.0);
    let c: f64 = r.random_range(0.0..2.0);
    let b: f64 = r.random_range(-1.0..1.0) * (a * c).sqrt();
    let mut oracle = Matrix2::new(a, b, b, c);
    let mut state = TrackState::new(0.0, 0.25, [[a, b], [b, c]], q, r_var, 3).unwrap();
    let mut discrepancy: f64 = 0.0;
    let mut psd = true;
    for _ in 0..steps {
        let (k, post) = kalman_cycle(&oracle, q, r_var);
        state.predict();
        psd &= state.cov_is_valid(0.0);
        let gain = state.gain();
        let observed = state.position + r.random_range(-1.0..1.0);
        state.update(observed);
        psd &= state.cov_is_valid(0.0);
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
        discrepancy = discrepancy.max(rel(gain[0], k[0])).max(rel(gain[1], k[1]));
        for i in 0..2 {
            for j in 0..2 {
                discrepancy = discrepancy.max(rel(state.cov[i][j], post[(i, j)]));
            }
        }
        oracle = post;
    }
    RiccatiCheck { discrepancy, psd }
}

pub struct OmegaSweep {
    pub cases: usize,
    pub violations: usize,
    /// Smallest `bound − |p_obs − p|` seen.
    pub worst_slack: f64,
}

/// Every combination of missed indices (leaving at least one) inside an
/// object of half-width `w`, and of extras within `margin` indices on
/// either side of it; the observation is the centroid.
pub fn omega_sweep(w: usize, margin: usize) -> OmegaSweep {
    let width = 2 * w + 1;
    let p = w + margin;
    let object: Vec<usize> = (p - w..=p + w).collect();
    let outside: Vec<usize> = (0..margin).chain(p + w + 1..p + w + 1 + margin).collect();
    let mut sweep = OmegaSweep {
        cases: 0,
        violations: 0,
        worst_slack: f64::INFINITY,
    };
    let mut coords = Vec::with_capacity(width + outside.len());
    for miss_mask in 0u32..(1 << width) {
        let misses = miss_mask.count_ones() as usize;
        if misses == width {
            continue;
        }
        for extra_mask in 0u32..(1 << outside.len()) {
            coords.clear();
            coords.extend(object.iter().enumerate().filter(|(k, _)| miss_mask & (1 << k) == 0).map(|(_, &i)| i));
            let extras: Vec<usize> = outside.iter().enumerate().filter(|(k, _)| extra_mask & (1 << k) != 0).map(|(_, &j)| j).collect();
            coords.extend(&extras);
            let error = (centroid(&coords) - p as f64).abs();
            let bound = omega_bound(w, p as f64, misses, &extras).unwrap();
            let slack = bound - error;
            sweep.cases += 1;
            if slack < -1e-12 {
                sweep.violations += 1;
            }
            sweep.worst_slack = sweep.worst_slack.min(slack);
        }
    }
    sweep
}

/// A pipeline for `mode` prepared the way the experiment runner does it,
/// with the test frames it should see.
pub struct Prepared {
    pub pipeline: Pipeline,
    pub frames: Vec<GroundTruthFrame>,
}

/// Trains on the first `t0` frames of run `seed`; modified-CS tracks start
/// from the true object states.
pub fn prepare(spec: &ExperimentSpec, seed: u64, mode: Mode) -> Prepared {
    let sc = &spec.scenario;
    let mut source = FrameSource::new(sc, seed).unwrap();
    let n = sc.background.dim();
    let mut training = DMatrix::zeros(n, sc.t0);
    for k in 0..sc.t0 {
        training.set_column(k, &source.next_frame().unwrap().unwrap().l);
    }
    let est = match &spec.initial {
        Some(e) => e.clone(),
        None => SubspaceEstimate::init_truncated_svd(&training, spec.init, spec.subtract_mean, spec.update).unwrap(),
    };
    let mut frames = Vec::new();
    while let Some(f) = source.next_frame().unwrap() {
        frames.push(f);
    }
    let (shape, objects) = match &sc.support {
        SupportProcessSpec::Objects { shape, objects, .. } => (*shape, objects.clone()),
        SupportProcessSpec::Uniform { n, .. } => (FrameShape::column(*n), Vec::new()),
    };
    let mut cfg = spec.pipeline.clone();
    cfg.mode = Mode::Reprocs;
    let l_last = training.column(sc.t0 - 1).into_owned();
    let mut pipeline = Pipeline::new(est, cfg, sc.psi.clone(), shape, l_last).unwrap();
    if mode == Mode::ModCs {
        let tr = spec.tracking.as_ref().expect("modified-CS needs tracking");
        assert_eq!(tr.init, TrackingInit::Truth);
        let tracks = objects
            .iter()
            .zip(&frames[0].objects)
            .zip(&tr.intensity_ranges)
            .map(|((o, truth), range)| {
                ObjectTracker::new(
                    TrackState::exact(truth.center.0, truth.velocity.0, tr.q.0, tr.r, o.half_height).unwrap(),
                    TrackState::exact(truth.center.1, truth.velocity.1, tr.q.1, tr.r, o.half_width).unwrap(),
                    *range,
                    true,
                )
            })
            .collect();
        pipeline.set_tracks(tracks).unwrap();
        pipeline.set_mode(Mode::ModCs).unwrap();
    }
    Prepared { pipeline, frames }
}

pub struct StepCheck {
    pub frames: usize,
    /// Frames where `l̂` is not bitwise `m − ŝ`.
    pub conservation_breaks: usize,
    /// Largest `|l̂ + ŝ − m|` relative to `eps · max|m|`.
    pub worst_drift_ulps: f64,
    /// Largest `‖P̂ᵀP̂ − I‖_F` over all frames.
    pub orthonormality: f64,
    pub updates: usize,
    pub predicted_frames: usize,
}

pub fn step_check(spec: &ExperimentSpec, seed: u64, mode: Mode) -> StepCheck {
    let Prepared { mut pipeline, frames } = prepare(spec, seed, mode);
    let mut c = StepCheck {
        frames: 0,
        conservation_breaks: 0,
        worst_drift_ulps: 0.0,
        orthonormality: 0.0,
        updates: 0,
        predicted_frames: 0,
    };
    for f in &frames {
        let out = pipeline.step(&f.m).unwrap();
        let rec = &out.recovery;
        let m = &f.m;
        if rec.l_hat != m - &rec.s_hat {
            c.conservation_breaks += 1;
        }
        let drift = (&rec.l_hat + &rec.s_hat - m).amax();
        c.worst_drift_ulps = c.worst_drift_ulps.max(drift / (f64::EPSILON * m.amax().max(f64::MIN_POSITIVE)));
        let b = pipeline.estimate().basis();
        let k = b.ncols();
        c.orthonormality = c.orthonormality.max((b.transpose() * b - DMatrix::<f64>::identity(k, k)).norm());
        c.updates += out.subspace_updated as usize;
        c.predicted_frames += out.predicted.is_some() as usize;
        c.frames += 1;
    }
    c
}

/// Replays every prefix length in `prefixes` on a fresh pipeline and
/// returns the lengths whose outputs differ from the full run.
pub fn causality_check(spec: &ExperimentSpec, seed: u64, mode: Mode, prefixes: &[usize]) -> Vec<usize> {
    let run = |len: Option<usize>| -> Vec<FrameOutput> {
        let Prepared { mut pipeline, frames } = prepare(spec, seed, mode);
        let len = len.unwrap_or(frames.len()).min(frames.len());
        frames[..len].iter().map(|f| pipeline.step(&f.m).unwrap()).collect()
    };
    let full = run(None);
    prefixes.iter().copied().filter(|&k| run(Some(k))[..] != full[..k.min(full.len())]).collect()
}
