//! Constant-velocity Kalman tracking of object positions, support
//! prediction from the tracked position, and observed-location extraction.
//!
//! The state is `g = [p; v]` with `g_t = G g_{t-1} + [0; n_t]`,
//! `G = [[1, 1], [0, 1]]`, `n_t ~ N(0, Q)`, and observation
//! `p_obs = p + w_t`, `w_t ~ N(0, R)`. A 2D object is tracked as two
//! independent 1D states over its row and column coordinates.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::support::Support;

/// Round half away from zero.
pub fn round_half_away(x: f64) -> f64 {
    libm::round(x)
}

/// Observation variance `B² / 3` for an observation error uniform on `[-B, B]`.
pub fn uniform_observation_variance(b: f64) -> f64 {
    b * b / 3.0
}

/// Kalman state of one coordinate of one object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub position: f64,
    pub velocity: f64,
    /// Row-major 2x2 covariance of `[p; v]`.
    pub cov: [[f64; 2]; 2],
    /// Acceleration noise variance.
    pub q: f64,
    /// Observation noise variance.
    pub r: f64,
    /// The object spans `2 * half_width + 1` indices along this axis.
    pub half_width: usize,
}

/// A closed index interval, possibly cut short by the frame border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
    /// True if the unclipped interval extended past either border.
    pub clipped: bool,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }
}

/// `[round(center) − w, round(center) + w]` clipped to `[0, dim − 1]`; `None`
/// if the interval misses the frame entirely.
pub fn interval_around(center: f64, half_width: usize, dim: usize) -> Option<Interval> {
    let c = round_half_away(center);
    let w = half_width as f64;
    let (lo, hi) = (c - w, c + w);
    let top = dim as f64 - 1.0;
    if dim == 0 || hi < 0.0 || lo > top {
        return None;
    }
    Some(Interval {
        lo: lo.max(0.0) as usize,
        hi: hi.min(top) as usize,
        clipped: lo < 0.0 || hi > top,
    })
}

impl TrackState {
    pub fn new(position: f64, velocity: f64, cov: [[f64; 2]; 2], q: f64, r: f64, half_width: usize) -> Result<Self> {
        if !position.is_finite() || !velocity.is_finite() {
            return Err(Error::NonFinite("track state"));
        }
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::invalid("q", "must be finite and nonnegative"));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::invalid("r", "must be finite and nonnegative"));
        }
        let s = TrackState {
            position,
            velocity,
            cov,
            q,
            r,
            half_width,
        };
        if !s.cov_is_valid(1e-12) {
            return Err(Error::invalid("cov", "must be symmetric positive semidefinite"));
        }
        Ok(s)
    }

    /// Exact state known: zero covariance.
    pub fn exact(position: f64, velocity: f64, q: f64, r: f64, half_width: usize) -> Result<Self> {
        TrackState::new(position, velocity, [[0.0; 2]; 2], q, r, half_width)
    }

    /// Symmetric within `tol` and both eigenvalues `≥ -tol`.
    pub fn cov_is_valid(&self, tol: f64) -> bool {
        let [[a, b], [c, d]] = self.cov;
        if [a, b, c, d].iter().any(|x| !x.is_finite()) || (b - c).abs() > tol {
            return false;
        }
        let off = 0.5 * (b + c);
        let mean = 0.5 * (a + d);
        let spread = libm::sqrt(0.25 * (a - d) * (a - d) + off * off);
        mean - spread >= -tol
    }

    /// `g ← G g`, `Σ ← G Σ Gᵀ + diag(0, Q)`.
    pub fn predict(&mut self) {
        self.position += self.velocity;
        let [[s11, s12], [_, s22]] = self.cov;
        let p11 = s11 + 2.0 * s12 + s22;
        let p12 = s12 + s22;
        let p22 = s22 + self.q;
        self.cov = [[p11, p12], [p12, p22]];
    }

    /// Indices covered by the object at its current position estimate.
    pub fn interval(&self, dim: usize) -> Option<Interval> {
        interval_around(self.position, self.half_width, dim)
    }

    /// `H Σ Hᵀ + R`.
    pub fn innovation_variance(&self) -> f64 {
        self.cov[0][0] + self.r
    }

    /// Kalman gain for the current covariance; zero when the innovation
    /// variance vanishes.
    pub fn gain(&self) -> [f64; 2] {
        let denom = self.innovation_variance();
        if denom <= 0.0 {
            [0.0, 0.0]
        } else {
            [self.cov[0][0] / denom, self.cov[1][0] / denom]
        }
    }

    /// Measurement update with an observed position.
    pub fn update(&mut self, observed: f64) {
        let k = self.gain();
        let innovation = observed - self.position;
        self.position += k[0] * innovation;
        self.velocity += k[1] * innovation;
        let [[s11, s12], [s21, s22]] = self.cov;
        // Σ − K H Σ, with H Σ = [s11, s12].
        let n11 = s11 - k[0] * s11;
        let n12 = s12 - k[0] * s12;
        let n21 = s21 - k[1] * s11;
        let n22 = s22 - k[1] * s12;
        let off = 0.5 * (n12 + n21);
        self.cov = [[n11, off], [off, n22]];
    }
}

/// How an observed location is read off an estimated support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObserveMode {
    Centroid,
    /// Lower median, robust to a few far-away extras.
    #[default]
    Median,
}

/// Observed location of a set of coordinates; `None` when empty.
pub fn observe(coords: &[usize], mode: ObserveMode) -> Option<f64> {
    if coords.is_empty() {
        return None;
    }
    Some(match mode {
        ObserveMode::Centroid => coords.iter().map(|&c| c as f64).sum::<f64>() / coords.len() as f64,
        ObserveMode::Median => {
            let mut v = coords.to_vec();
            v.sort_unstable();
            v[(v.len() - 1) / 2] as f64
        }
    })
}

/// Bound on `|p_obs − p|` for the centroid of a support estimate of an
/// object of half-width `w` centred at `p`, with `misses` true indices
/// missing and extras at the given positions:
/// `|Δ| w / (2w + 1 − |Δ|) + |Δ_e| max_j |j − p| / (2w)`.
pub fn omega_bound(half_width: usize, position: f64, misses: usize, extras: &[usize]) -> Result<f64> {
    let width = 2 * half_width + 1;
    if misses >= width {
        return Err(Error::TrackLost { misses, width });
    }
    let w = half_width as f64;
    let miss_term = if misses == 0 {
        0.0
    } else {
        misses as f64 * w / (width - misses) as f64
    };
    let extra_term = if extras.is_empty() {
        0.0
    } else if half_width == 0 {
        f64::INFINITY
    } else {
        let far = extras.iter().map(|&j| (j as f64 - position).abs()).fold(0.0, f64::max);
        extras.len() as f64 * far / (2.0 * w)
    };
    Ok(miss_term + extra_term)
}

/// Half-open intensity band `[lo, hi)` used to split an estimated support
/// between objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityRange {
    pub lo: f64,
    pub hi: f64,
}

impl IntensityRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::invalid("intensity_range", "need lo < hi"));
        }
        Ok(IntensityRange { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v < self.hi
    }

    pub fn overlaps(&self, other: &IntensityRange) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

/// Fails if any two bands overlap.
pub fn check_disjoint(ranges: &[IntensityRange]) -> Result<()> {
    for (i, a) in ranges.iter().enumerate() {
        if ranges[i + 1..].iter().any(|b| a.overlaps(b)) {
            return Err(Error::invalid("intensity_range", "ranges of different objects overlap"));
        }
    }
    Ok(())
}

/// Splits `support` by the band containing each estimated value; indices
/// whose value falls in no band are dropped.
pub fn assign_supports(s_hat: &[f64], support: &Support, ranges: &[IntensityRange]) -> Vec<Support> {
    let mut out: Vec<Vec<usize>> = ranges.iter().map(|_| Vec::new()).collect();
    for i in support.iter() {
        if let Some(k) = ranges.iter().position(|r| r.contains(s_hat[i])) {
            out[k].push(i);
        }
    }
    out.into_iter().map(Support::from_indices).collect()
}

/// Row-major frame geometry; 1D signals are a single column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameShape {
    pub rows: usize,
    pub cols: usize,
}

impl FrameShape {
    pub fn new(rows: usize, cols: usize) -> Self {
        FrameShape { rows, cols }
    }

    pub fn column(n: usize) -> Self {
        FrameShape { rows: n, cols: 1 }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Indices of the rectangle spanned by the two intervals.
    pub fn rectangle(&self, rows: Interval, cols: Interval) -> Support {
        let mut v = Vec::with_capacity(rows.len() * cols.len());
        for r in rows.lo..=rows.hi {
            for c in cols.lo..=cols.hi {
                v.push(self.index(r, c));
            }
        }
        Support::from_indices(v)
    }
}

/// Predicted support of one tracked object, with border flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub support: Support,
    pub clipped: bool,
}

/// A rectangular object tracked by a row and a column Kalman filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTracker {
    pub row: TrackState,
    pub col: TrackState,
    pub intensity: IntensityRange,
    // Set when the state already holds the prediction for the next frame.
    predicted: bool,
}

impl ObjectTracker {
    /// `predicted` marks a state that is already the one-step prediction for
    /// the next frame (e.g. initialized from ground truth).
    pub fn new(row: TrackState, col: TrackState, intensity: IntensityRange, predicted: bool) -> Self {
        ObjectTracker {
            row,
            col,
            intensity,
            predicted,
        }
    }

    /// Runs the time update (unless the state is already a prediction) and
    /// returns the predicted support.
    pub fn predict(&mut self, shape: FrameShape) -> Prediction {
        if self.predicted {
            self.predicted = false;
        } else {
            self.row.predict();
            self.col.predict();
        }
        self.support(shape)
    }

    /// Support implied by the current position estimate.
    pub fn support(&self, shape: FrameShape) -> Prediction {
        match (self.row.interval(shape.rows), self.col.interval(shape.cols)) {
            (Some(r), Some(c)) => Prediction {
                support: shape.rectangle(r, c),
                clipped: r.clipped || c.clipped,
            },
            _ => Prediction {
                support: Support::new(),
                clipped: true,
            },
        }
    }

    /// Observed (row, col) location of an assigned support.
    pub fn observe(&self, support: &Support, shape: FrameShape, mode: ObserveMode) -> Option<(f64, f64)> {
        let (rows, cols): (Vec<usize>, Vec<usize>) = support.iter().map(|i| shape.coords(i)).unzip();
        Some((observe(&rows, mode)?, observe(&cols, mode)?))
    }

    /// Measurement update; a `None` observation coasts on the prediction.
    pub fn update(&mut self, observed: Option<(f64, f64)>) {
        if let Some((r, c)) = observed {
            self.row.update(r);
            self.col.update(c);
        }
    }
}
