//! Synthetic ground truth: an autoregressive low-rank process `L_t = U x_t`,
//! correlated or uniform sparse supports, and composition into `M_t`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::support::Support;
use crate::tracker::{interval_around, FrameShape};

/// Independent reproducible stream `stream` of generator `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Sample of `N(0, q)` conditioned on `|n| < 2√q`; zero when `q = 0`.
pub fn truncated_normal<R: RngCore + ?Sized>(rng: &mut R, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    loop {
        let z = normal(rng);
        if z.abs() < 2.0 {
            return z * libm::sqrt(q);
        }
    }
}

/// First `k` columns of the `n x n` orthonormal matrix obtained by
/// Gram-Schmidt on a standard Gaussian matrix drawn column by column.
/// Any prefix of columns is identical to the same prefix of the full matrix.
pub fn generate_basis_columns<R: RngCore + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Empty("basis dimension"));
    }
    if k > n {
        return Err(Error::invalid("k", "cannot exceed n"));
    }
    let mut u = DMatrix::zeros(n, k);
    for j in 0..k {
        let mut v = DVector::from_fn(n, |_, _| normal(rng));
        for _ in 0..2 {
            for i in 0..j {
                let c = u.column(i).dot(&v);
                v.axpy(-c, &u.column(i), 1.0);
            }
        }
        let norm = v.norm();
        if !(norm > 1e-10) {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        u.set_column(j, &(v / norm));
    }
    Ok(u)
}

pub fn generate_basis<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    generate_basis_columns(n, n, rng)
}

/// `count` variances starting at `top` with constant ratio.
pub fn variance_ladder(top: f64, ratio: f64, count: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(count);
    let mut x = top;
    for _ in 0..count {
        v.push(x);
        x *= ratio;
    }
    v
}

/// A change of the low-rank support at frame `time`: `added` indices enter,
/// `decayed` indices start to decay after this frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEvent {
    pub time: usize,
    pub added: Vec<usize>,
    pub decayed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankSpec {
    pub n: usize,
    /// Diagonal of `Σ`, one entry per latent index (missing entries are 0).
    pub variances: Vec<f64>,
    pub f: f64,
    pub f_d: f64,
    pub theta: f64,
    /// Latent support at `t = 1`.
    pub initial: Vec<usize>,
    pub schedule: Vec<ScheduleEvent>,
}

impl LowRankSpec {
    /// Number of leading basis columns the process touches.
    pub fn columns_used(&self) -> usize {
        let events = self.schedule.iter().flat_map(|e| e.added.iter().chain(&e.decayed));
        self.initial.iter().chain(events).map(|&i| i + 1).max().unwrap_or(0)
    }

    fn variance(&self, i: usize) -> f64 {
        self.variances.get(i).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.f_d && self.f_d < self.f && self.f < 1.0) {
            return Err(Error::invalid("f", "need 0 < f_d < f < 1"));
        }
        if !(0.0 < self.theta && self.theta < 1.0) {
            return Err(Error::invalid("theta", "need 0 < theta < 1"));
        }
        if self.variances.len() > self.n || self.variances.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("variances", "need at most n finite nonnegative entries"));
        }
        let cols = self.columns_used();
        if cols > self.n {
            return Err(Error::IndexOutOfRange { index: cols - 1, dim: self.n });
        }
        let mut phase = vec![Phase::Off; cols];
        for &i in &self.initial {
            phase[i] = Phase::Steady;
        }
        let mut events: Vec<&ScheduleEvent> = self.schedule.iter().collect();
        events.sort_by_key(|e| e.time);
        for e in events {
            if e.time == 0 {
                return Err(Error::invalid("schedule", "event times start at 1"));
            }
            for &i in &e.added {
                if phase[i] != Phase::Off {
                    return Err(Error::invalid("schedule", "added index is already or was previously active"));
                }
                phase[i] = Phase::Added(e.time);
            }
            for &i in &e.decayed {
                if !matches!(phase[i], Phase::Steady | Phase::Added(_)) || e.added.contains(&i) {
                    return Err(Error::invalid("schedule", "decayed index must be active before the event"));
                }
                phase[i] = Phase::Decaying(e.time);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Off,
    /// Enters at the given frame, then follows the AR-1 model.
    Added(usize),
    Steady,
    /// Decays for frames after the given one.
    Decaying(usize),
}

/// Running state of `x_t`; `x_0 = 0`.
#[derive(Debug, Clone)]
pub struct LowRankProcess {
    spec: LowRankSpec,
    basis: DMatrix<f64>,
    x: DVector<f64>,
    phase: Vec<Phase>,
    t: usize,
}

impl LowRankProcess {
    /// `basis` holds at least the first `spec.columns_used()` columns of `U`.
    pub fn new(spec: LowRankSpec, basis: DMatrix<f64>) -> Result<Self> {
        spec.validate()?;
        let k = spec.columns_used();
        if basis.nrows() != spec.n || basis.ncols() < k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: basis.ncols(),
            });
        }
        let basis = basis.columns(0, k).into_owned();
        let mut phase = vec![Phase::Off; k];
        for &i in &spec.initial {
            phase[i] = Phase::Steady;
        }
        Ok(LowRankProcess {
            spec,
            basis,
            x: DVector::zeros(k),
            phase,
            t: 0,
        })
    }

    pub fn spec(&self) -> &LowRankSpec {
        &self.spec
    }

    /// The basis columns in use, `U[:, 0..columns_used]`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Latent state after the most recent step.
    pub fn latent(&self) -> &DVector<f64> {
        &self.x
    }

    /// Index of the most recently generated frame (0 before the first).
    pub fn time(&self) -> usize {
        self.t
    }

    /// Advances to the next frame and returns `x_t`.
    pub fn step_latent<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> &DVector<f64> {
        self.t += 1;
        let t = self.t;
        for e in self.spec.schedule.iter().filter(|e| e.time == t) {
            for &i in &e.added {
                self.phase[i] = Phase::Added(t);
            }
            for &i in &e.decayed {
                self.phase[i] = Phase::Decaying(t);
            }
        }
        let (f, f_d, theta) = (self.spec.f, self.spec.f_d, self.spec.theta);
        for i in 0..self.x.len() {
            let var = self.spec.variance(i);
            let (gain, q) = match self.phase[i] {
                Phase::Off => (0.0, 0.0),
                Phase::Added(at) if at == t => (0.0, theta * var),
                Phase::Added(_) | Phase::Steady => (f, (1.0 - f * f) * var),
                Phase::Decaying(at) if t > at => (f_d, 0.0),
                Phase::Decaying(_) => (f, (1.0 - f * f) * var),
            };
            let noise = if q > 0.0 { libm::sqrt(q) * normal(rng) } else { 0.0 };
            self.x[i] = gain * self.x[i] + noise;
        }
        &self.x
    }

    /// Advances to the next frame and returns `L_t = U x_t`.
    pub fn step<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> DVector<f64> {
        self.step_latent(rng);
        &self.basis * &self.x
    }
}

/// How objects move between frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// Each frame an object moves one index up, down, left or right with the
    /// given probabilities and otherwise stays. Moves that would leave the
    /// frame are cancelled.
    RandomWalk { up: f64, down: f64, left: f64, right: f64 },
    /// Constant velocity per axis with truncated-Gaussian velocity changes of
    /// variance `q_row`, `q_col`.
    ConstantVelocity { q_row: f64, q_col: f64 },
}

/// A `(2 half_height + 1) x (2 half_width + 1)` rectangle of constant value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub half_height: usize,
    pub half_width: usize,
    /// Center `(row, col)` at the first frame.
    pub center: (f64, f64),
    /// Initial velocity `(row, col)`; ignored by random walks.
    pub velocity: (f64, f64),
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SupportProcessSpec {
    Objects {
        shape: FrameShape,
        motion: Motion,
        objects: Vec<ObjectSpec>,
    },
    /// A fresh uniformly random support of `size` indices each frame.
    Uniform { n: usize, size: usize, magnitude: f64 },
}

impl SupportProcessSpec {
    pub fn dim(&self) -> usize {
        match self {
            SupportProcessSpec::Objects { shape, .. } => shape.len(),
            SupportProcessSpec::Uniform { n, .. } => *n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SupportProcessSpec::Uniform { n, size, magnitude } => {
                if size > n {
                    return Err(Error::invalid("size", "cannot exceed n"));
                }
                if !magnitude.is_finite() {
                    return Err(Error::NonFinite("magnitude"));
                }
            }
            SupportProcessSpec::Objects { shape, motion, objects } => {
                if shape.is_empty() {
                    return Err(Error::Empty("frame shape"));
                }
                match *motion {
                    Motion::RandomWalk { up, down, left, right } => {
                        let p = [up, down, left, right];
                        if p.iter().any(|x| !(*x >= 0.0)) || up + down + left + right > 1.0 + 1e-12 {
                            return Err(Error::invalid("motion", "move probabilities must be nonnegative and sum to at most 1"));
                        }
                        for o in objects {
                            let inside = |c: f64, h: usize, dim: usize| {
                                libm::trunc(c) == c && c >= h as f64 && c + h as f64 <= dim as f64 - 1.0
                            };
                            if !inside(o.center.0, o.half_height, shape.rows) || !inside(o.center.1, o.half_width, shape.cols) {
                                return Err(Error::invalid("objects", "random-walk objects need integer centers inside the frame"));
                            }
                        }
                    }
                    Motion::ConstantVelocity { q_row, q_col } => {
                        if !(q_row >= 0.0) || !(q_col >= 0.0) {
                            return Err(Error::invalid("motion", "velocity noise variances must be nonnegative"));
                        }
                    }
                }
                for o in objects {
                    let vals = [o.center.0, o.center.1, o.velocity.0, o.velocity.1, o.magnitude];
                    if vals.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite("object spec"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Ground truth of one object at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTruth {
    pub support: Support,
    pub center: (f64, f64),
    pub velocity: (f64, f64),
}

/// One frame of the sparse process.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFrame {
    pub support: Support,
    /// Object values on `support`, zero elsewhere.
    pub values: DVector<f64>,
    pub objects: Vec<ObjectTruth>,
    /// Some object touched the border (cancelled move or clipped extent).
    pub clipped: bool,
}

#[derive(Debug, Clone)]
pub struct SupportProcess {
    spec: SupportProcessSpec,
    centers: Vec<(f64, f64)>,
    velocities: Vec<(f64, f64)>,
    started: bool,
}

impl SupportProcess {
    pub fn new(spec: SupportProcessSpec) -> Result<Self> {
        spec.validate()?;
        let (centers, velocities) = match &spec {
            SupportProcessSpec::Objects { objects, .. } => objects.iter().map(|o| (o.center, o.velocity)).unzip(),
            SupportProcessSpec::Uniform { .. } => (Vec::new(), Vec::new()),
        };
        Ok(SupportProcess {
            spec,
            centers,
            velocities,
            started: false,
        })
    }

    pub fn spec(&self) -> &SupportProcessSpec {
        &self.spec
    }

    /// Moves the objects (except on the first call) and returns the frame.
    pub fn step<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> SparseFrame {
        let first = !self.started;
        self.started = true;
        match &self.spec {
            SupportProcessSpec::Uniform { n, size, magnitude } => {
                let support = uniform_support(*n, *size, rng);
                let mut values = DVector::zeros(*n);
                for i in support.iter() {
                    values[i] = *magnitude;
                }
                SparseFrame {
                    support,
                    values,
                    objects: Vec::new(),
                    clipped: false,
                }
            }
            SupportProcessSpec::Objects { shape, motion, objects } => {
                let (shape, motion) = (*shape, *motion);
                let mut clipped = false;
                if !first {
                    let states = self.centers.iter_mut().zip(self.velocities.iter_mut());
                    for ((center, velocity), o) in states.zip(objects) {
                        clipped |= advance(center, velocity, shape, motion, o, rng);
                    }
                }
                let mut values = DVector::zeros(shape.len());
                let mut truth = Vec::with_capacity(objects.len());
                for (k, o) in objects.iter().enumerate() {
                    let (c, v) = (self.centers[k], self.velocities[k]);
                    let support = match (interval_around(c.0, o.half_height, shape.rows), interval_around(c.1, o.half_width, shape.cols)) {
                        (Some(r), Some(cc)) => {
                            clipped |= r.clipped || cc.clipped;
                            shape.rectangle(r, cc)
                        }
                        _ => {
                            clipped = true;
                            Support::new()
                        }
                    };
                    for i in support.iter() {
                        values[i] = o.magnitude;
                    }
                    truth.push(ObjectTruth {
                        support,
                        center: c,
                        velocity: v,
                    });
                }
                let support = Support::from_predicate(values.as_slice(), |x| x != 0.0);
                SparseFrame {
                    support,
                    values,
                    objects: truth,
                    clipped,
                }
            }
        }
    }
}

// Returns true if a move was cancelled at the border.
fn advance<R: RngCore + ?Sized>(
    center: &mut (f64, f64),
    velocity: &mut (f64, f64),
    shape: FrameShape,
    motion: Motion,
    o: &ObjectSpec,
    rng: &mut R,
) -> bool {
    match motion {
        Motion::RandomWalk { up, down, left, right } => {
            let u: f64 = rng.random();
            let (dr, dc) = if u < up {
                (-1.0, 0.0)
            } else if u < up + down {
                (1.0, 0.0)
            } else if u < up + down + left {
                (0.0, -1.0)
            } else if u < up + down + left + right {
                (0.0, 1.0)
            } else {
                (0.0, 0.0)
            };
            let (r, c) = *center;
            let (nr, nc) = (r + dr, c + dc);
            let fits = |x: f64, h: usize, dim: usize| x >= h as f64 && x + h as f64 <= dim as f64 - 1.0;
            if fits(nr, o.half_height, shape.rows) && fits(nc, o.half_width, shape.cols) {
                *center = (nr, nc);
                false
            } else {
                true
            }
        }
        Motion::ConstantVelocity { q_row, q_col } => {
            let (p, v) = (center, velocity);
            p.0 += v.0;
            p.1 += v.1;
            v.0 += truncated_normal(rng, q_row);
            v.1 += truncated_normal(rng, q_col);
            false
        }
    }
}

/// Uniformly random `size`-subset of `0..n`.
pub fn uniform_support<R: RngCore + ?Sized>(n: usize, size: usize, rng: &mut R) -> Support {
    let size = size.min(n);
    Support::from_indices(rand::seq::index::sample(rng, n, size).into_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComposeMode {
    /// `S_t = O_t`.
    #[default]
    Additive,
    /// `O_t` replaces the background on its support: `S_t = O_t − L_t` on `T_t`.
    Overlay,
}

/// Returns `(M_t, S_t)` with `M_t = L_t + S_t`.
pub fn compose(l: &DVector<f64>, o: &DVector<f64>, support: &Support, mode: ComposeMode) -> Result<(DVector<f64>, DVector<f64>)> {
    if l.len() != o.len() {
        return Err(Error::DimensionMismatch {
            expected: l.len(),
            found: o.len(),
        });
    }
    support.check_bounds(l.len())?;
    let mut s = DVector::zeros(l.len());
    for i in support.iter() {
        s[i] = match mode {
            ComposeMode::Additive => o[i],
            ComposeMode::Overlay => o[i] - l[i],
        };
    }
    Ok((l + &s, s))
}
