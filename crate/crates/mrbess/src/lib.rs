//! Sparse reduced-rank regression by best subset selection.
//!
//! The estimator solves
//!
//! ```text
//! min over C in R^{p x q} of (2n)^-1 ||Y - X C||_F^2
//!     subject to rank(C) <= r and at most s nonzero rows of C
//! ```
//!
//! with a primal-dual active-set iteration: each step performs a closed-form
//! reduced-rank regression on the current candidate support, scores every
//! predictor by a row-wise "sacrifice", and hard-thresholds to the next
//! support. The rank/sparsity pair is tuned either by a generalized
//! information criterion (two-stage coordinate search or full grid) or by a
//! held-out validation split.
//!
//! Crate layout:
//! - [`model`]: validated datasets, column normalization, fit results, metrics
//! - [`rrr`]: restricted reduced-rank regression and the primal-dual update
//! - [`solver`]: the fixed-(r, s) active-set iteration
//! - [`tuning`]: GIC, coordinate/grid search, validation-split tuning
//! - [`simulation`]: synthetic data generation and the replication harness
//! - [`report`]: CSV matrix I/O and JSON/CSV run reports

pub use nalgebra;

pub mod error;
pub mod model;
pub mod report;
pub mod rrr;
pub mod simulation;
pub mod solver;
pub mod tuning;

pub use error::{MrbessError, Result};
pub use model::{
    compute_metrics, denormalize_coefficients, validate_and_normalize, Dataset, FitResult,
    GramPolicy, MetricsRecord, SolverConfig,
};
pub use solver::{solve_fixed, IterationTrace, TerminationStatus};
pub use tuning::{gic, tune_gic, tune_grid_gic, tune_validation, GicRecord, TuneReport};
