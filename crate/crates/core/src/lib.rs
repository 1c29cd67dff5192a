//! Recursive separation of sparse signals from low-rank backgrounds:
//! projected ℓ1 recovery, recursive PCA, Kalman support prediction and the
//! synthetic generators used to evaluate them. `no_std` with `alloc`.

#![no_std]
// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod linalg;
pub mod pipeline;
pub mod recovery;
pub mod sparsesolve;
pub mod subspace;
pub mod support;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use subspace::{InitThreshold, SubspaceEstimate, UpdateParams, UpdateTrigger};
pub use support::Support;
pub use sparsesolve::{
    least_squares_on, solve, solve_general, MatrixOp, ProjectorOp, SenseOperator, Solution, SolveConfig, SolveStatus,
};
pub use recovery::{add_ls_del, adapt_epsilon, threshold_ls, AddLsDel, RecoveryResult, SupportFit};
