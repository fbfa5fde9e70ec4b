//! Sparse recovery by iteratively re-weighted least squares.
//!
//! - [`linalg`]: sensing matrices, kernel bases, weighted least-squares solves.
//! - [`sparsity`]: rearrangements and best k-term approximation errors.
//! - [`irls`]: the ℓ_1 / ℓ_τ iteration, traces and rate diagnostics.
//! - [`verify`]: RIP / NSP constants, exhaustive sparse and ℓ_1 oracles.
//! - [`experiments`]: seeded instances, traces, phase-transition tables.
//! - [`io`]: text matrix format and CSV schemas.

pub mod experiments;
pub mod io;
pub mod irls;
pub mod linalg;
pub mod lp;
pub mod sparsity;
pub mod verify;

pub use irls::{irls_run, irls_step, IrlsConfig, IrlsError, IterateState, IterationRecord, RecoveryResult, Termination};
pub use linalg::{null_space_basis, weighted_ls_solve, LinalgError, NullSpaceBasis, RealVector, SensingMatrix};
