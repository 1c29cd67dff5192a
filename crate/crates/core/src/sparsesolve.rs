//! Weighted-ℓ1 recovery under an ℓ2 residual constraint,
//!
//! ```text
//! minimize ‖s_{T^c}‖₁  subject to  ‖y − A s‖₂ ≤ ε,
//! ```
//!
//! solved by ADMM. Operators that admit a closed-form projection onto the
//! feasible set (the complementary projector `I − P Pᵀ`) use a two-block
//! splitting `x = s`; general operators split `x = s, z = A s` and invert
//! `I + AᵀA` instead.
//!
//! Both routes first project `y` onto `range(A)`. Writing `y_r` for that
//! projection, `‖y − A s‖² = ‖y − y_r‖² + ‖y_r − A s‖²`, so the constraint
//! becomes a ball of radius `sqrt(ε² − ‖y − y_r‖²)` around `y_r`.
//!
//! Iteration stops once a feasible point is certified by a dual bound: for
//! any `μ` in `range(A)` with `(Aᵀμ)_T = 0` and `|(Aᵀμ)_i| ≤ 1` elsewhere,
//! every feasible `s` has `‖s_{T^c}‖₁ ≥ y_rᵀμ − radius·‖μ‖`.

use alloc::vec::Vec;

use libm::sqrt;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{min_eigenvalue, rank_tolerance, svd_sorted, SortedSvd};
use crate::support::Support;

/// Condition numbers above this make restricted least squares fail.
pub const MAX_CONDITION: f64 = 1e8;

/// A linear measurement operator `A: R^n -> R^m`.
pub trait SenseOperator {
    /// Factorization of the column restriction `A_S`.
    type Factor;

    fn signal_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
    fn apply_adjoint(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Orthogonal projection of a measurement vector onto `range(A)`.
    fn project_range(&self, y: &DVector<f64>) -> DVector<f64>;
    /// Minimum-norm least-squares solution `A⁺ y`.
    fn min_norm_solution(&self, y: &DVector<f64>) -> DVector<f64>;
    /// `(I + AᵀA)⁻¹ v`.
    fn solve_shifted(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Euclidean projection of `v` onto `{s : ‖A s − c‖ ≤ radius}` for
    /// `c` in `range(A)`, if the operator has a closed form for it.
    fn project_feasible(&self, _v: &DVector<f64>, _c: &DVector<f64>, _radius: f64) -> Option<DVector<f64>> {
        None
    }

    /// Factors `A_S`, failing past the conditioning cap.
    fn factor(&self, support: &Support) -> Result<Self::Factor>;
    /// `(A_Sᵀ A_S)⁻¹ rhs` with `rhs` indexed like `support`, embedded in
    /// signal space.
    fn gram_solve(&self, factor: &Self::Factor, support: &Support, rhs: &DVector<f64>) -> DVector<f64>;
    /// Least squares on the columns in `support`, embedded in signal space.
    fn least_squares_with(&self, factor: &Self::Factor, support: &Support, y: &DVector<f64>) -> DVector<f64> {
        let g = self.apply_adjoint(y);
        let rhs = DVector::from_iterator(support.len(), support.iter().map(|i| g[i]));
        self.gram_solve(factor, support, &rhs)
    }
    /// Least squares restricted to the columns in `support`; zero elsewhere.
    fn restricted_least_squares(&self, y: &DVector<f64>, support: &Support) -> Result<DVector<f64>> {
        if support.is_empty() {
            return Ok(DVector::zeros(self.signal_dim()));
        }
        let f = self.factor(support)?;
        Ok(self.least_squares_with(&f, support, y))
    }
}

fn embed(n: usize, support: &Support, values: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (k, i) in support.iter().enumerate() {
        out[i] = values[k];
    }
    out
}

/// The complementary projector `I − P Pᵀ` for an orthonormal `P`.
#[derive(Debug, Clone, Copy)]
pub struct ProjectorOp<'a> {
    basis: &'a DMatrix<f64>,
}

impl<'a> ProjectorOp<'a> {
    /// `basis` must have orthonormal columns; zero columns gives the identity.
    pub fn new(basis: &'a DMatrix<f64>) -> Self {
        ProjectorOp { basis }
    }
}

/// Gram factor of `(I − P Pᵀ)_S`. Its Gram matrix is `I − P_S P_Sᵀ`; when
/// `|S|` exceeds the rank the factored matrix is `I − P_Sᵀ P_S` and the
/// inverse follows from the Woodbury identity.
pub struct ProjectorFactor {
    rows: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    woodbury: bool,
}

impl SenseOperator for ProjectorOp<'_> {
    type Factor = ProjectorFactor;

    fn signal_dim(&self) -> usize {
        self.basis.nrows()
    }

    fn measurement_dim(&self) -> usize {
        self.basis.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.basis.ncols() == 0 {
            return v.clone();
        }
        let c = self.basis.tr_mul(v);
        v - self.basis * c
    }

    fn apply_adjoint(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply(v)
    }

    fn project_range(&self, y: &DVector<f64>) -> DVector<f64> {
        self.apply(y)
    }

    fn min_norm_solution(&self, y: &DVector<f64>) -> DVector<f64> {
        self.apply(y)
    }

    fn solve_shifted(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.apply(v) * 0.5
    }

    fn project_feasible(&self, v: &DVector<f64>, c: &DVector<f64>, radius: f64) -> Option<DVector<f64>> {
        let d = self.apply(v) - c;
        let norm = d.norm();
        Some(if norm <= radius {
            v.clone()
        } else {
            v - d * (1.0 - radius / norm)
        })
    }

    fn factor(&self, support: &Support) -> Result<ProjectorFactor> {
        support.check_bounds(self.signal_dim())?;
        let r = self.basis.ncols();
        let rows = self.basis.select_rows(support.as_slice().iter());
        if r == 0 || support.is_empty() {
            return Ok(ProjectorFactor {
                rows,
                chol: None,
                woodbury: false,
            });
        }
        let woodbury = support.len() > r;
        let gram = if !woodbury {
            DMatrix::identity(support.len(), support.len()) - &rows * rows.transpose()
        } else if 2 * support.len() > self.basis.nrows() {
            // `I − P_Sᵀ P_S = P_Cᵀ P_C` for the complement `C`, which has
            // fewer rows and no cancellation.
            let rest = self.basis.select_rows(support.complement(self.signal_dim()).as_slice().iter());
            rest.transpose() * rest
        } else {
            DMatrix::identity(r, r) - rows.transpose() * &rows
        };
        Ok(ProjectorFactor {
            chol: Some(factor_gram(gram)?),
            rows,
            woodbury,
        })
    }

    fn gram_solve(&self, f: &ProjectorFactor, support: &Support, rhs: &DVector<f64>) -> DVector<f64> {
        let values = match &f.chol {
            None => rhs.clone(),
            Some(chol) if f.woodbury => rhs + &f.rows * chol.solve(&f.rows.tr_mul(rhs)),
            Some(chol) => chol.solve(rhs),
        };
        embed(self.signal_dim(), support, &values)
    }
}

/// Cholesky factor of a Gram matrix `A_Tᵀ A_T` whose largest eigenvalue is
/// at most one, rejecting it past the conditioning cap.
fn factor_gram(g: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let dim = g.nrows();
    let chol = Cholesky::new(g).ok_or(Error::IllConditioned(f64::INFINITY))?;
    let lambda = min_eigenvalue(&chol, dim);
    let cond = if lambda > 0.0 { 1.0 / sqrt(lambda) } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    Ok(chol)
}

/// An explicit dense `m x n` operator.
#[derive(Debug, Clone)]
pub struct MatrixOp {
    a: DMatrix<f64>,
    // Thin SVD of `a`.
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v: DMatrix<f64>,
    rank: usize,
}

impl MatrixOp {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        check_finite(a.as_slice(), "sensing matrix")?;
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Err(Error::Empty("sensing matrix"));
        }
        let svd = svd_sorted(a.clone(), true);
        let sigma_max = svd.singvals.first().copied().unwrap_or(0.0);
        let tol = rank_tolerance(m, n, sigma_max);
        let rank = svd.singvals.iter().take_while(|s| **s > tol).count();
        Ok(MatrixOp {
            a,
            u: svd.u,
            sigma: svd.singvals,
            v: svd.v.expect("right vectors requested"),
            rank,
        })
    }

    /// `(I − P Pᵀ) Ψ`, the operator seen after projecting out the low-rank
    /// part when the sparse part is observed through `Ψ`.
    pub fn projected(basis: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<Self> {
        check_dim(basis.nrows(), psi.nrows())?;
        let a = if basis.ncols() == 0 {
            psi.clone()
        } else {
            psi - basis * basis.tr_mul(psi)
        };
        MatrixOp::new(a)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

impl SenseOperator for MatrixOp {
    type Factor = SortedSvd;

    fn signal_dim(&self) -> usize {
        self.a.ncols()
    }

    fn measurement_dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.a * v
    }

    fn apply_adjoint(&self, v: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(v)
    }

    fn project_range(&self, y: &DVector<f64>) -> DVector<f64> {
        let ur = self.u.columns(0, self.rank);
        ur * ur.tr_mul(y)
    }

    fn min_norm_solution(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut c = self.u.columns(0, self.rank).tr_mul(y);
        for (ci, s) in c.iter_mut().zip(&self.sigma) {
            *ci /= s;
        }
        self.v.columns(0, self.rank) * c
    }

    fn solve_shifted(&self, v: &DVector<f64>) -> DVector<f64> {
        // (I + AᵀA)⁻¹ = I − V diag(σ²/(1+σ²)) Vᵀ
        let mut c = self.v.tr_mul(v);
        for (ci, s) in c.iter_mut().zip(&self.sigma) {
            *ci *= s * s / (1.0 + s * s);
        }
        v - &self.v * c
    }

    fn factor(&self, support: &Support) -> Result<SortedSvd> {
        support.check_bounds(self.signal_dim())?;
        if support.len() > self.measurement_dim() {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        let svd = svd_sorted(self.a.select_columns(support.as_slice().iter()), true);
        if let (Some(smax), Some(smin)) = (svd.singvals.first(), svd.singvals.last()) {
            let cond = if *smin > 0.0 { smax / smin } else { f64::INFINITY };
            if !(cond <= MAX_CONDITION) {
                return Err(Error::IllConditioned(cond));
            }
        }
        Ok(svd)
    }

    fn gram_solve(&self, f: &SortedSvd, support: &Support, rhs: &DVector<f64>) -> DVector<f64> {
        let v = f.v.as_ref().expect("right vectors computed");
        let mut c = v.tr_mul(rhs);
        for (ci, s) in c.iter_mut().zip(&f.singvals) {
            *ci /= s * s;
        }
        embed(self.signal_dim(), support, &(v * c))
    }

    fn least_squares_with(&self, f: &SortedSvd, support: &Support, y: &DVector<f64>) -> DVector<f64> {
        let v = f.v.as_ref().expect("right vectors computed");
        let mut c = f.u.tr_mul(y);
        for (ci, s) in c.iter_mut().zip(&f.singvals) {
            *ci /= s;
        }
        embed(self.signal_dim(), support, &(v * c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub epsilon: f64,
    /// Indices whose magnitude is not penalized.
    pub known_support: Support,
    pub max_iters: usize,
    pub tol: f64,
    /// Try least squares on the recovered support and keep it if better.
    pub polish: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            epsilon: 0.0,
            known_support: Support::new(),
            max_iters: 5000,
            tol: 1e-6,
            polish: true,
        }
    }
}

impl SolveConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SolveConfig {
            epsilon,
            ..SolveConfig::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be finite and nonnegative"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        self.known_support.check_bounds(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// A feasible point was certified optimal within `tol`, or the iterates
    /// settled on a feasible point.
    Converged,
    /// The iteration budget ran out; the best feasible iterate is returned.
    MaxIterations,
    /// `ε` is below the distance from `y` to `range(A)`; the returned point
    /// minimizes the objective over the least-squares solutions instead.
    ResidualFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: DVector<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `‖x_{T^c}‖₁`.
    pub objective: f64,
    /// Largest certified lower bound on the optimal objective.
    pub lower_bound: f64,
    /// `‖y − A x‖₂`.
    pub residual_norm: f64,
}

/// `‖x_{T^c}‖₁`.
pub fn weighted_l1(x: &DVector<f64>, known: &Support) -> f64 {
    x.iter()
        .enumerate()
        .filter(|(i, _)| !known.contains(*i))
        .map(|(_, v)| v.abs())
        .sum()
}

/// Least squares on the columns in `support`; zero elsewhere.
pub fn least_squares_on<O: SenseOperator + ?Sized>(op: &O, y: &DVector<f64>, support: &Support) -> Result<DVector<f64>> {
    check_dim(op.measurement_dim(), y.len())?;
    check_finite(y.as_slice(), "measurements")?;
    support.check_bounds(op.signal_dim())?;
    op.restricted_least_squares(y, support)
}

/// Solves the weighted-ℓ1 program, using the closed-form feasible-set
/// projection when the operator provides one.
pub fn solve<O: SenseOperator + ?Sized>(op: &O, y: &DVector<f64>, cfg: &SolveConfig) -> Result<Solution> {
    run(op, y, cfg, true)
}

/// Same contract as [`solve`], always using the general splitting.
pub fn solve_general<O: SenseOperator + ?Sized>(op: &O, y: &DVector<f64>, cfg: &SolveConfig) -> Result<Solution> {
    run(op, y, cfg, false)
}

struct Problem<'a, O: SenseOperator + ?Sized> {
    op: &'a O,
    y: &'a DVector<f64>,
    y_r: DVector<f64>,
    radius: f64,
    feas_bound: f64,
    weights: Vec<f64>,
    cfg: &'a SolveConfig,
    /// Factor of `A_T` for the known support, when it is well conditioned.
    known_factor: Option<O::Factor>,
}

impl<O: SenseOperator + ?Sized> Problem<'_, O> {
    fn residual(&self, x: &DVector<f64>) -> f64 {
        (self.y - self.op.apply(x)).norm()
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        x.iter().zip(&self.weights).map(|(v, w)| w * v.abs()).sum()
    }

    fn shrink(&self, v: &DVector<f64>, kappa: f64) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            v.iter().zip(&self.weights).map(|(x, w)| {
                let t = w * kappa;
                if *x > t {
                    x - t
                } else if *x < -t {
                    x + t
                } else {
                    0.0
                }
            }),
        )
    }

    /// Lower bound on the optimal value from a dual estimate `mu`, after
    /// moving it into `range(A)`, removing its action on `T` and scaling it
    /// into the dual-feasible box.
    fn dual_bound(&self, mu: &DVector<f64>) -> Option<f64> {
        let known = &self.cfg.known_support;
        let mut mu = self.op.project_range(mu);
        if !known.is_empty() {
            let f = self.known_factor.as_ref()?;
            let c = self.op.least_squares_with(f, known, &mu);
            mu -= self.op.apply(&c);
        }
        let g = self.op.apply_adjoint(&mu);
        let peak = g
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .fold(0.0_f64, |m, (v, _)| m.max(v.abs()));
        let value = self.y_r.dot(&mu) - self.radius * mu.norm();
        if peak == 0.0 || !(value > 0.0) {
            return Some(0.0);
        }
        Some(value / peak)
    }

    fn gap_closed(&self, objective: f64, bound: f64) -> bool {
        objective - bound <= self.cfg.tol * (1.0 + objective)
    }
}

struct Candidate {
    x: DVector<f64>,
    objective: f64,
    residual: f64,
}

impl Candidate {
    fn new<O: SenseOperator + ?Sized>(p: &Problem<'_, O>, x: DVector<f64>) -> Self {
        Candidate {
            objective: p.objective(&x),
            residual: p.residual(&x),
            x,
        }
    }

    fn feasible(&self, bound: f64) -> bool {
        self.residual <= bound
    }

    /// Feasible beats infeasible; among feasible points the lower objective
    /// wins, with near-ties going to the lower residual; among infeasible
    /// ones the lower residual wins.
    fn better_than(&self, other: &Candidate, bound: f64) -> bool {
        match (self.feasible(bound), other.feasible(bound)) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => {
                let tie = 1e-12 * other.objective.max(1.0);
                if (self.objective - other.objective).abs() <= tie {
                    self.residual < other.residual
                } else {
                    self.objective < other.objective
                }
            }
            (false, false) => self.residual < other.residual,
        }
    }
}

/// Keeps the best point and the best dual bound seen, and decides when to
/// stop.
struct Tracker {
    best: Option<Candidate>,
    lower: f64,
    /// Support last used for a least-squares candidate; the candidate only
    /// changes with the support.
    polished: Option<Support>,
    /// Support and signs behind the last sign-based dual candidate.
    signed: Option<Vec<(usize, bool)>>,
    known_offered: bool,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            best: None,
            lower: 0.0,
            polished: None,
            signed: None,
            known_offered: false,
        }
    }

    fn offer(&mut self, c: Candidate, bound: f64) {
        if self.best.as_ref().is_none_or(|b| c.better_than(b, bound)) {
            self.best = Some(c);
        }
    }

    fn raise<O: SenseOperator + ?Sized>(&mut self, p: &Problem<'_, O>, mu: &DVector<f64>) {
        if let Some(b) = p.dual_bound(mu) {
            self.lower = self.lower.max(b);
        }
    }

    fn certified<O: SenseOperator + ?Sized>(&self, p: &Problem<'_, O>) -> bool {
        self.best
            .as_ref()
            .is_some_and(|b| b.feasible(p.feas_bound) && p.gap_closed(b.objective, self.lower))
    }

    /// Scores the iterate `x` and the multiplier estimate `mu`; with
    /// polishing, also least squares on the iterate's support and dual
    /// candidates built from the best point. Returns true once a feasible
    /// point is certified, or when the iterates settled on a feasible one.
    fn check<O: SenseOperator + ?Sized>(&mut self, p: &Problem<'_, O>, x: &DVector<f64>, mu: &DVector<f64>, settled: bool) -> bool {
        self.offer(Candidate::new(p, x.clone()), p.feas_bound);
        self.raise(p, mu);
        if self.certified(p) {
            return true;
        }
        if p.cfg.polish {
            let known = &p.cfg.known_support;
            let joint = Support::from_predicate(x.as_slice(), |v| v != 0.0).union(known);
            let mut factored = None;
            if !joint.is_empty() && self.polished.as_ref() != Some(&joint) {
                if let Ok(f) = p.op.factor(&joint) {
                    self.offer(Candidate::new(p, p.op.least_squares_with(&f, &joint, p.y)), p.feas_bound);
                    factored = Some(f);
                }
                self.polished = Some(joint.clone());
            }
            if let (Some(f), false) = (&p.known_factor, self.known_offered) {
                self.offer(Candidate::new(p, p.op.least_squares_with(f, known, p.y)), p.feas_bound);
                self.known_offered = true;
            }
            self.raise_from_best(p, factored.map(|f| (joint, f)));
            if self.certified(p) {
                return true;
            }
        }
        settled && self.best.as_ref().is_some_and(|b| b.feasible(p.feas_bound))
    }

    /// Dual candidates from the best primal point: the residual direction
    /// (optimal when the constraint is active), and the minimum-norm `μ`
    /// with `(Aᵀμ)_i = sign(x_i)` on the support and `0` on `T`. `cached`
    /// is a factor already computed for some support.
    fn raise_from_best<O: SenseOperator + ?Sized>(&mut self, p: &Problem<'_, O>, cached: Option<(Support, O::Factor)>) {
        let Some(best) = &self.best else { return };
        let x = best.x.clone();
        let residual = &p.y_r - p.op.apply(&x);
        self.raise(p, &residual);

        let known = &p.cfg.known_support;
        let joint = Support::from_predicate(x.as_slice(), |v| v != 0.0).union(known);
        if joint.is_empty() {
            return;
        }
        let key: Vec<(usize, bool)> = joint.iter().map(|i| (i, x[i] > 0.0)).collect();
        if self.signed.as_ref() == Some(&key) {
            return;
        }
        self.signed = Some(key);
        let factor = match cached {
            Some((s, f)) if s == joint => Ok(f),
            _ => p.op.factor(&joint),
        };
        if let Ok(f) = factor {
            let signs = DVector::from_iterator(
                joint.len(),
                joint.iter().map(|i| if known.contains(i) { 0.0 } else { x[i].signum() }),
            );
            let c = p.op.gram_solve(&f, &joint, &signs);
            let mu = p.op.apply(&c);
            self.raise(p, &mu);
        }
    }
}

const RELAX: f64 = 1.6;
const BALANCE_RATIO: f64 = 10.0;
const BALANCE_EVERY: usize = 10;
const CHECK_EVERY: usize = 25;

fn run<O: SenseOperator + ?Sized>(op: &O, y: &DVector<f64>, cfg: &SolveConfig, closed_form: bool) -> Result<Solution> {
    let n = op.signal_dim();
    check_dim(op.measurement_dim(), y.len())?;
    check_finite(y.as_slice(), "measurements")?;
    cfg.validate(n)?;

    let ynorm = y.norm();
    if ynorm == 0.0 {
        return Ok(Solution {
            x: DVector::zeros(n),
            status: SolveStatus::Converged,
            iterations: 0,
            objective: 0.0,
            lower_bound: 0.0,
            residual_norm: 0.0,
        });
    }

    let eps = cfg.epsilon.max(1e-10 * ynorm);
    let y_r = op.project_range(y);
    let floor = (y - &y_r).norm();
    let at_floor = eps <= floor;
    let radius = if at_floor { 0.0 } else { sqrt(eps * eps - floor * floor) };
    let feas_bound = if at_floor {
        floor * (1.0 + cfg.tol) + 1e-8 * ynorm
    } else {
        cfg.epsilon * (1.0 + cfg.tol) + 1e-8 * ynorm
    };
    let weights: Vec<f64> = (0..n)
        .map(|i| if cfg.known_support.contains(i) { 0.0 } else { 1.0 })
        .collect();
    let known_factor = if cfg.known_support.is_empty() {
        None
    } else {
        op.factor(&cfg.known_support).ok()
    };
    let problem = Problem {
        op,
        y,
        y_r,
        radius,
        feas_bound,
        weights,
        cfg,
        known_factor,
    };

    let mut tracker = Tracker::new();
    let fast = closed_form && op.project_feasible(&DVector::zeros(n), &problem.y_r, radius).is_some();
    let (fallback, iterations, converged) = if fast {
        admm_projected(&problem, &mut tracker)
    } else {
        admm_general(&problem, &mut tracker)
    };
    if !tracker.best.as_ref().is_some_and(|b| b.feasible(feas_bound)) {
        tracker.offer(Candidate::new(&problem, fallback), feas_bound);
    }
    let lower_bound = tracker.lower;
    let pick = tracker.best.expect("at least one candidate offered");

    let status = if at_floor {
        SolveStatus::ResidualFloor
    } else if converged && pick.feasible(feas_bound) {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    Ok(Solution {
        objective: pick.objective,
        lower_bound,
        residual_norm: pick.residual,
        x: pick.x,
        status,
        iterations,
    })
}

fn initial_rho(y: &DVector<f64>) -> f64 {
    let rms = y.norm() / sqrt(y.len() as f64);
    1.0 / rms.max(1e-300)
}

/// ADMM on `min f(x) + 1_C(s)` subject to `x = s`, with `C` the feasible
/// set and its projection in closed form. Returns a feasible fallback, the
/// iteration count and whether the stopping rule fired.
fn admm_projected<O: SenseOperator + ?Sized>(p: &Problem<'_, O>, tracker: &mut Tracker) -> (DVector<f64>, usize, bool) {
    let n = p.op.signal_dim();
    let project = |v: &DVector<f64>| p.op.project_feasible(v, &p.y_r, p.radius).expect("closed form available");
    let tol = p.cfg.tol;
    let mut rho = initial_rho(p.y);
    let mut s = project(&DVector::zeros(n));
    let mut x = s.clone();
    let mut u = DVector::zeros(n);

    for k in 1..=p.cfg.max_iters {
        let x_prev = x.clone();
        x = p.shrink(&(&s - &u), 1.0 / rho);
        let xh = &x * RELAX + &s * (1.0 - RELAX);
        let s_prev = s.clone();
        s = project(&(&xh + &u));
        u += &xh - &s;

        let scale = x.norm().max(s.norm()).max(1e-300);
        let r_pri = (&x - &s).norm();
        let r_dual = rho * (&s - &s_prev).norm();
        let settled = (&x - &x_prev).norm() <= tol * scale && r_pri <= tol * scale;
        if settled || k % CHECK_EVERY == 0 {
            // -ρu is a subgradient of the objective at x; the projector is
            // its own adjoint pseudo-inverse.
            let mu = p.op.apply(&(&u * -rho));
            if tracker.check(p, &x, &mu, settled) {
                return (s, k, true);
            }
        }
        if k % BALANCE_EVERY == 0 {
            if r_pri > BALANCE_RATIO * r_dual {
                rho *= 2.0;
                u /= 2.0;
            } else if r_dual > BALANCE_RATIO * r_pri {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    tracker.offer(Candidate::new(p, x), p.feas_bound);
    (s, p.cfg.max_iters, false)
}

/// ADMM on `min f(x) + 1_B(z)` subject to `x = s, z = A s`, with `B` the
/// ball around `y_r`.
fn admm_general<O: SenseOperator + ?Sized>(p: &Problem<'_, O>, tracker: &mut Tracker) -> (DVector<f64>, usize, bool) {
    let n = p.op.signal_dim();
    let m = p.op.measurement_dim();
    let tol = p.cfg.tol;
    let ball = |v: DVector<f64>| {
        let d = &v - &p.y_r;
        let norm = d.norm();
        if norm <= p.radius {
            v
        } else {
            &p.y_r + d * (p.radius / norm)
        }
    };
    let mut rho = initial_rho(p.y);
    let mut x = DVector::zeros(n);
    let mut z = ball(DVector::zeros(m));
    let mut u = DVector::zeros(n);
    let mut v = DVector::zeros(m);

    for k in 1..=p.cfg.max_iters {
        let rhs = (&x - &u) + p.op.apply_adjoint(&(&z - &v));
        let s = p.op.solve_shifted(&rhs);
        let as_ = p.op.apply(&s);

        let xh = &s * RELAX + &x * (1.0 - RELAX);
        let zh = &as_ * RELAX + &z * (1.0 - RELAX);
        let x_prev = x.clone();
        let z_prev = z.clone();
        x = p.shrink(&(&xh + &u), 1.0 / rho);
        z = ball(&zh + &v);
        u += &xh - &x;
        v += &zh - &z;

        let scale = x.norm().max(s.norm()).max(1e-300);
        let r_pri = sqrt((&s - &x).norm_squared() + (&as_ - &z).norm_squared());
        let r_dual = rho * sqrt((&x - &x_prev).norm_squared() + (&z - &z_prev).norm_squared());
        let settled = (&x - &x_prev).norm() <= tol * scale && r_pri <= tol * scale;
        if settled || k % CHECK_EVERY == 0 {
            // At a fixed point Aᵀ(-ρv) = ρu is a subgradient of the objective.
            let mu = &v * -rho;
            if tracker.check(p, &x, &mu, settled) {
                return (p.op.min_norm_solution(&p.y_r), k, true);
            }
        }
        if k % BALANCE_EVERY == 0 {
            if r_pri > BALANCE_RATIO * r_dual {
                rho *= 2.0;
                u /= 2.0;
                v /= 2.0;
            } else if r_dual > BALANCE_RATIO * r_pri {
                rho /= 2.0;
                u *= 2.0;
                v *= 2.0;
            }
        }
    }
    tracker.offer(Candidate::new(p, x), p.feas_bound);
    (p.op.min_norm_solution(&p.y_r), p.cfg.max_iters, false)
}
