//! Domain types: validated datasets with the sqrt(n) column-normalization
//! contract, solver configuration, fit results and evaluation metrics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MrbessError, Result};
use crate::solver::{IterationTrace, TerminationStatus};

/// Default convergence tolerance on `||C_{k+1} - C_k||_F`.
pub const DEFAULT_TOL: f64 = 1e-5;
/// Default iteration cap for the active-set loop.
pub const DEFAULT_MAX_ITER: usize = 100;

/// How to invert an ill-conditioned restricted Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramPolicy {
    /// Fail with [`MrbessError::SingularGram`] when the condition number
    /// reaches 1e12.
    ErrorOnSingular,
    /// Fall back to the Moore-Penrose pseudo-inverse, truncating singular
    /// values below 1e-12 of the largest.
    PseudoInverse,
}

/// A validated regression problem.
///
/// Every nonzero column of `x` is rescaled to l2 norm sqrt(n). The original
/// scale is kept in `col_scales` (original column norm divided by sqrt(n));
/// an entry is zero exactly when the raw column was identically zero. Zero
/// columns stay in place so indices line up with the caller's data, but they
/// are never admitted to an active set.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    col_scales: DVector<f64>,
    centered: bool,
    x_means: Option<DVector<f64>>,
    y_means: Option<DVector<f64>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    /// Normalized design matrix (columns of norm sqrt(n), zero columns kept).
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Per-column scale factors; `col_scales[j] == 0` marks a zero column.
    pub fn col_scales(&self) -> &DVector<f64> {
        &self.col_scales
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    /// Column means subtracted from `x`, when centering was requested.
    pub fn x_means(&self) -> Option<&DVector<f64>> {
        self.x_means.as_ref()
    }

    pub fn y_means(&self) -> Option<&DVector<f64>> {
        self.y_means.as_ref()
    }

    pub fn is_zero_column(&self, j: usize) -> bool {
        self.col_scales[j] == 0.0
    }

    /// Indices of identically-zero design columns.
    pub fn zero_columns(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.is_zero_column(j)).collect()
    }

    pub fn num_nonzero_columns(&self) -> usize {
        self.col_scales.iter().filter(|&&s| s != 0.0).count()
    }

    /// Row subset sharing this dataset's column scaling. Used by the
    /// validation-split tuner; the subset's columns are deliberately not
    /// re-normalized so that coefficients stay in one common scale.
    pub(crate) fn subset_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
            col_scales: self.col_scales.clone(),
            centered: self.centered,
            x_means: self.x_means.clone(),
            y_means: self.y_means.clone(),
        }
    }
}

/// Configuration of one fixed-(rank, sparsity) solve.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Requested rank `r >= 1`. Silently capped to `sparsity` (a matrix with
    /// `s` nonzero rows has rank at most `s`); the cap is reported through
    /// [`FitResult::rank_capped`].
    pub rank: usize,
    /// Number of active rows `s`, `1 <= s <= p`.
    pub sparsity: usize,
    /// Stop once `||C_{k+1} - C_k||_F <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub gram_policy: GramPolicy,
    /// Optional explicit initial active set (0-based, `sparsity` distinct
    /// indices). Defaults to the screening initialization.
    pub init_active_set: Option<Vec<usize>>,
}

impl SolverConfig {
    pub fn new(rank: usize, sparsity: usize) -> Self {
        SolverConfig {
            rank,
            sparsity,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            gram_policy: GramPolicy::PseudoInverse,
            init_active_set: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_gram_policy(mut self, policy: GramPolicy) -> Self {
        self.gram_policy = policy;
        self
    }

    pub fn with_init_active_set(mut self, active: Vec<usize>) -> Self {
        self.init_active_set = Some(active);
        self
    }
}

/// Output of a fixed-(r, s) solve.
///
/// `c = b * v^T` holds entrywise; rows of `c` outside `active_set` are exactly
/// zero; the columns of `v` are orthonormal. `loss` is the restricted
/// reduced-rank loss `(2n)^-1 ||Y - X C||_F^2` on the final active set.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub c: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// Sorted 0-based active row indices, `|active_set| == sparsity`.
    pub active_set: Vec<usize>,
    /// Effective rank used by the solve (after capping to `sparsity`).
    pub rank: usize,
    pub sparsity: usize,
    pub loss: f64,
    /// GIC of this fit; `NaN` when the penalty is undefined (p < 2).
    pub gic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cycled: bool,
    /// Requested rank exceeded `sparsity` and was capped.
    pub rank_capped: bool,
    /// Fewer positive eigenvalues than `rank` were available at some
    /// iteration; the missing factor columns were completed from the zero
    /// eigenspace.
    pub rank_deficient: bool,
    /// The screening initialization found fewer than `sparsity` columns with
    /// positive score and padded the set with the smallest unused indices.
    pub init_padded: bool,
    pub trace: IterationTrace,
}

impl FitResult {
    pub fn status(&self) -> TerminationStatus {
        self.trace.status
    }
}

/// Accuracy and selection metrics for one fitted coefficient matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// `||C_hat - C_star||_F^2 / (p q)`
    pub er_c: f64,
    /// `||X (C_hat - C_star)||_F^2 / (n q)`
    pub er_xc: f64,
    /// False positive rate over row supports; 0 when there are no true zeros.
    pub fpr: f64,
    /// False negative rate over row supports; 0 when there are no true nonzeros.
    pub fnr: f64,
    /// Numerical rank of `C_hat` (singular values above 1e-8 of the largest).
    pub est_rank: usize,
    pub wall_time_s: f64,
}

/// Validate raw inputs and normalize every nonzero column of `x_raw` to
/// l2 norm sqrt(n).
///
/// With `center`, column means of both matrices are subtracted first (and
/// stored on the dataset); scales are then computed on the centered columns.
pub fn validate_and_normalize(
    x_raw: &DMatrix<f64>,
    y: &DMatrix<f64>,
    center: bool,
) -> Result<Dataset> {
    let n = x_raw.nrows();
    if y.nrows() != n {
        return Err(MrbessError::DimensionMismatch(format!(
            "X has {} rows but Y has {}",
            n,
            y.nrows()
        )));
    }
    if n < 3 {
        return Err(MrbessError::TooFewRows(n));
    }
    if x_raw.ncols() == 0 || y.ncols() == 0 {
        return Err(MrbessError::DimensionMismatch(
            "X and Y must each have at least one column".into(),
        ));
    }
    check_finite("X", x_raw)?;
    check_finite("Y", y)?;

    let mut x = x_raw.clone();
    let mut y = y.clone();
    let (mut x_means, mut y_means) = (None, None);
    if center {
        x_means = Some(center_columns(&mut x));
        y_means = Some(center_columns(&mut y));
    }

    let sqrt_n = (n as f64).sqrt();
    let mut col_scales = DVector::zeros(x.ncols());
    for j in 0..x.ncols() {
        let norm = x.column(j).norm();
        if norm == 0.0 {
            col_scales[j] = 0.0;
        } else {
            col_scales[j] = norm / sqrt_n;
            let mut col = x.column_mut(j);
            col *= sqrt_n / norm;
        }
    }

    Ok(Dataset {
        x,
        y,
        col_scales,
        centered: center,
        x_means,
        y_means,
    })
}

/// Undo the column normalization: row `j` of the output is row `j` of
/// `c_norm` divided by `col_scales[j]`, so fitted values are preserved
/// (`X_raw * C_out == X_norm * C_norm`). Rows of zero columns are forced to
/// zero.
pub fn denormalize_coefficients(
    c_norm: &DMatrix<f64>,
    col_scales: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if c_norm.nrows() != col_scales.len() {
        return Err(MrbessError::DimensionMismatch(format!(
            "coefficient matrix has {} rows but there are {} column scales",
            c_norm.nrows(),
            col_scales.len()
        )));
    }
    let mut out = c_norm.clone();
    for j in 0..out.nrows() {
        let scale = col_scales[j];
        let mut row = out.row_mut(j);
        if scale == 0.0 {
            row.fill(0.0);
        } else {
            row /= scale;
        }
    }
    Ok(out)
}

/// Numerical rank: number of singular values above `rel_tol` times the
/// largest one. An all-zero matrix has rank 0.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let svals = m.clone().singular_values();
    let max = svals.iter().cloned().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    svals.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Estimation/prediction errors and support-recovery rates of `c_hat`
/// against the truth `c_star`, both in the scale of `x`.
///
/// A row counts as selected iff its l2 norm is nonzero exactly; the solver
/// constructs exact zeros off the active set, so no threshold is involved.
pub fn compute_metrics(
    c_hat: &DMatrix<f64>,
    c_star: &DMatrix<f64>,
    x: &DMatrix<f64>,
    elapsed_s: f64,
) -> Result<MetricsRecord> {
    if c_hat.shape() != c_star.shape() {
        return Err(MrbessError::DimensionMismatch(format!(
            "C_hat is {:?} but C_star is {:?}",
            c_hat.shape(),
            c_star.shape()
        )));
    }
    if x.ncols() != c_hat.nrows() {
        return Err(MrbessError::DimensionMismatch(format!(
            "X has {} columns but C has {} rows",
            x.ncols(),
            c_hat.nrows()
        )));
    }

    let (p, q) = c_hat.shape();
    let n = x.nrows();
    let diff = c_hat - c_star;
    let er_c = diff.norm_squared() / (p * q) as f64;
    let er_xc = (x * &diff).norm_squared() / (n * q) as f64;

    let selected = |m: &DMatrix<f64>, i: usize| m.row(i).iter().any(|&v| v != 0.0);
    let (mut tp, mut fp, mut tn, mut fal_n) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..p {
        match (selected(c_star, i), selected(c_hat, i)) {
            (true, true) => tp += 1,
            (true, false) => fal_n += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    // Degenerate denominators (no true zeros / no true nonzeros) report 0.
    let fpr = if tn + fp == 0 {
        0.0
    } else {
        fp as f64 / (tn + fp) as f64
    };
    let fnr = if tp + fal_n == 0 {
        0.0
    } else {
        fal_n as f64 / (tp + fal_n) as f64
    };

    Ok(MetricsRecord {
        er_c,
        er_xc,
        fpr,
        fnr,
        est_rank: numerical_rank(c_hat, 1e-8),
        wall_time_s: elapsed_s,
    })
}

fn check_finite(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(MrbessError::NonFinite {
                    matrix: name,
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

fn center_columns(m: &mut DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    let mut means = DVector::zeros(m.ncols());
    for j in 0..m.ncols() {
        let mean = m.column(j).sum() / n;
        means[j] = mean;
        m.column_mut(j).add_scalar_mut(-mean);
    }
    means
}
