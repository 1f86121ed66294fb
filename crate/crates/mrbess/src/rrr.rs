//! Closed-form reduced-rank regression on a restricted support and the
//! primal-dual update that scores predictors for hard thresholding.
//!
//! Everything here is a pure function of its inputs, so operations may be
//! called concurrently on shared read-only matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{MrbessError, Result};
use crate::model::GramPolicy;

/// Condition-number limit above which a restricted Gram matrix is treated as
/// singular.
pub const GRAM_COND_LIMIT: f64 = 1e12;
/// Relative truncation threshold for the pseudo-inverse fallback.
pub const PINV_REL_TOL: f64 = 1e-12;
/// Relative threshold (in eigenvalue scale) below which an eigenvalue counts
/// as zero when deciding rank deficiency of the response cross-product.
pub const POS_EIG_REL_TOL: f64 = 1e-12;

/// Primal coefficients on the active set and dual correlations off it.
///
/// Complementarity: rows of `b` outside `active_set` are zero, rows of
/// `gamma` inside it are zero.
#[derive(Debug, Clone)]
pub struct PrimalDualState {
    pub b: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub active_set: Vec<usize>,
}

/// Row-wise importance scores `delta[j] = ||b_j + gamma_j||_2`.
#[derive(Debug, Clone)]
pub struct Sacrifice {
    pub delta: Vec<f64>,
}

/// Top right factors of the restricted regression.
#[derive(Debug, Clone)]
pub struct RightFactors {
    /// q x r matrix with orthonormal columns, descending eigenvalue order.
    pub v: DMatrix<f64>,
    /// The r leading eigenvalues of `Y^T P_A Y` (unnormalized).
    pub eigvals: Vec<f64>,
    /// Fewer than `r` positive eigenvalues were available; trailing columns
    /// of `v` come from the zero eigenspace.
    pub rank_deficient: bool,
}

/// Closed-form reduced-rank fit restricted to an active set.
#[derive(Debug, Clone)]
pub struct RestrictedFit {
    pub c: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub loss: f64,
    pub rank_deficient: bool,
}

/// Eigendecomposition of a restricted Gram matrix `X_A^T X_A`, the shared
/// machinery behind its inverse and inverse square root.
pub(crate) struct GramEigen {
    vectors: DMatrix<f64>,
    /// Descending.
    values: DVector<f64>,
}

impl GramEigen {
    pub(crate) fn new(x: &DMatrix<f64>, active: &[usize]) -> Self {
        let xa = x.select_columns(active);
        let mut g = xa.tr_mul(&xa);
        symmetrize(&mut g);
        let (values, vectors) = sym_eigen_desc(g);
        GramEigen { vectors, values }
    }

    pub(crate) fn condition_number(&self) -> f64 {
        let max = self.values[0].max(0.0);
        let min = self.values[self.values.len() - 1];
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Spectral function `sum_i f(lambda_i) v_i v_i^T`, with the policy
    /// deciding what happens past the condition limit. Under the
    /// pseudo-inverse policy eigenvalues at or below `PINV_REL_TOL` of the
    /// largest are dropped.
    fn apply_spectral(&self, policy: GramPolicy, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
        let size = self.values.len();
        let degenerate = self.condition_number() >= GRAM_COND_LIMIT;
        if degenerate && policy == GramPolicy::ErrorOnSingular {
            return Err(MrbessError::SingularGram { size });
        }
        let cutoff = if degenerate {
            self.values[0].max(0.0) * PINV_REL_TOL
        } else {
            0.0
        };
        let mapped = DVector::from_iterator(
            size,
            self.values
                .iter()
                .map(|&l| if l > cutoff { f(l) } else { 0.0 }),
        );
        let scaled = &self.vectors * DMatrix::from_diagonal(&mapped);
        Ok(scaled * self.vectors.transpose())
    }

    pub(crate) fn inverse(&self, policy: GramPolicy) -> Result<DMatrix<f64>> {
        self.apply_spectral(policy, |l| 1.0 / l)
    }

    pub(crate) fn inverse_sqrt(&self, policy: GramPolicy) -> Result<DMatrix<f64>> {
        self.apply_spectral(policy, |l| 1.0 / l.sqrt())
    }
}

/// Inverse of `X_A^T X_A` when well conditioned; under the pseudo-inverse
/// policy the Moore-Penrose pseudo-inverse otherwise.
pub fn restricted_gram_inverse(
    x: &DMatrix<f64>,
    active: &[usize],
    policy: GramPolicy,
) -> Result<DMatrix<f64>> {
    check_active(x.ncols(), active)?;
    GramEigen::new(x, active).inverse(policy)
}

/// Leading `r` orthonormal right factors of the support-restricted problem:
/// eigenvectors of `Y^T X_A (X_A^T X_A)^-1 X_A^T Y` in descending eigenvalue
/// order.
///
/// When `|A| < q` the decomposition runs on the |A| x q factor
/// `(X_A^T X_A)^-1/2 X_A^T Y` (right singular vectors), which is cheaper and
/// better conditioned; otherwise on the q x q cross-product directly. Each
/// column's sign is fixed so that its entry of largest absolute value is
/// positive (ties resolved to the lower index).
pub fn top_r_right_factors(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    active: &[usize],
    r: usize,
    policy: GramPolicy,
) -> Result<RightFactors> {
    check_active(x.ncols(), active)?;
    let (n, q) = (y.nrows(), y.ncols());
    let s = active.len();
    if r < 1 || r > s.min(q).min(n) {
        return Err(MrbessError::InvalidConfig(format!(
            "rank {r} out of range 1..=min(|A|={s}, q={q}, n={n})"
        )));
    }
    if s < q {
        factors_via_svd(x, y, active, r, policy)
    } else {
        factors_via_eigen(x, y, active, r, policy)
    }
}

fn factors_via_svd(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    active: &[usize],
    r: usize,
    policy: GramPolicy,
) -> Result<RightFactors> {
    let gram = GramEigen::new(x, active);
    let inv_sqrt = gram.inverse_sqrt(policy)?;
    let t = x.select_columns(active).tr_mul(y);
    let m = inv_sqrt * t;
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let q = y.ncols();
    let mut v = DMatrix::zeros(q, r);
    let mut eigvals = Vec::with_capacity(r);
    for (k, &idx) in order.iter().take(r).enumerate() {
        let sigma = svd.singular_values[idx];
        eigvals.push(sigma * sigma);
        v.column_mut(k).copy_from(&v_t.row(idx).transpose());
    }
    fix_column_signs(&mut v);

    let lambda_max = order
        .first()
        .map(|&i| svd.singular_values[i] * svd.singular_values[i])
        .unwrap_or(0.0);
    let positive = order
        .iter()
        .filter(|&&i| {
            let l = svd.singular_values[i] * svd.singular_values[i];
            l > POS_EIG_REL_TOL * lambda_max && l > 0.0
        })
        .count();
    Ok(RightFactors {
        v,
        eigvals,
        rank_deficient: positive < r,
    })
}

fn factors_via_eigen(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    active: &[usize],
    r: usize,
    policy: GramPolicy,
) -> Result<RightFactors> {
    let gram = GramEigen::new(x, active);
    let inv = gram.inverse(policy)?;
    let t = x.select_columns(active).tr_mul(y);
    let mut w = t.tr_mul(&(inv * &t));
    symmetrize(&mut w);
    let (values, vectors) = sym_eigen_desc(w);

    let q = y.ncols();
    let mut v = DMatrix::zeros(q, r);
    let mut eigvals = Vec::with_capacity(r);
    for k in 0..r {
        eigvals.push(values[k]);
        v.column_mut(k).copy_from(&vectors.column(k));
    }
    fix_column_signs(&mut v);

    let lambda_max = values[0].max(0.0);
    let positive = values
        .iter()
        .filter(|&&l| l > POS_EIG_REL_TOL * lambda_max && l > 0.0)
        .count();
    Ok(RightFactors {
        v,
        eigvals,
        rank_deficient: positive < r,
    })
}

/// Closed-form reduced-rank regression restricted to `active`: right factors
/// from [`top_r_right_factors`], `B_A = (X_A^T X_A)^-1 X_A^T Y V` (zero rows
/// elsewhere), `C = B V^T`, and the loss `(2n)^-1 ||Y - X C||_F^2`.
pub fn rrr_restricted_fit(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    active: &[usize],
    r: usize,
    policy: GramPolicy,
) -> Result<RestrictedFit> {
    let factors = top_r_right_factors(x, y, active, r, policy)?;
    let (b, xc) = primal_on_support(x, y, active, &factors.v, policy)?;
    let n = y.nrows();
    let loss = (y - &xc).norm_squared() / (2.0 * n as f64);
    let c = &b * factors.v.transpose();
    Ok(RestrictedFit {
        c,
        b,
        v: factors.v,
        loss,
        rank_deficient: factors.rank_deficient,
    })
}

/// One primal-dual update at fixed right factors `v`: the primal rows on the
/// active set solve the restricted least squares `min ||Y V - X B||_F`, the
/// dual rows off it are the scaled residual correlations
/// `X_I^T (Y V - X B) / n`.
pub fn primal_dual_update(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    active: &[usize],
    v: &DMatrix<f64>,
    policy: GramPolicy,
) -> Result<PrimalDualState> {
    check_active(x.ncols(), active)?;
    let n = y.nrows();
    let yv = y * v;
    let xa = x.select_columns(active);
    let gram = GramEigen::new(x, active);
    let ba = gram.inverse(policy)? * xa.tr_mul(&yv);

    let p = x.ncols();
    let r = v.ncols();
    let mut b = DMatrix::zeros(p, r);
    for (i, &j) in active.iter().enumerate() {
        b.row_mut(j).copy_from(&ba.row(i));
    }

    let resid = yv - xa * ba;
    let mut gamma = x.tr_mul(&resid) / n as f64;
    for &j in active {
        gamma.row_mut(j).fill(0.0);
    }

    Ok(PrimalDualState {
        b,
        gamma,
        v: v.clone(),
        active_set: active.to_vec(),
    })
}

/// Row-wise sacrifice scores: `delta[j] = ||b_j + gamma_j||_2`. By
/// complementarity this is `||b_j||` on the active set and `||gamma_j||` off
/// it.
pub fn sacrifices(state: &PrimalDualState) -> Sacrifice {
    let (p, r) = state.b.shape();
    let delta = (0..p)
        .map(|j| {
            let mut acc = 0.0;
            for k in 0..r {
                let t = state.b[(j, k)] + state.gamma[(j, k)];
                acc += t * t;
            }
            acc.sqrt()
        })
        .collect();
    Sacrifice { delta }
}

/// `B` scattered to p rows plus the fitted values `X B V^T`, shared by the
/// restricted fit and the solver loop.
fn primal_on_support(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    active: &[usize],
    v: &DMatrix<f64>,
    policy: GramPolicy,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let xa = x.select_columns(active);
    let gram = GramEigen::new(x, active);
    let ba = gram.inverse(policy)? * xa.tr_mul(&(y * v));
    let p = x.ncols();
    let mut b = DMatrix::zeros(p, v.ncols());
    for (i, &j) in active.iter().enumerate() {
        b.row_mut(j).copy_from(&ba.row(i));
    }
    let xc = xa * ba * v.transpose();
    Ok((b, xc))
}

fn check_active(p: usize, active: &[usize]) -> Result<()> {
    if active.is_empty() {
        return Err(MrbessError::InvalidConfig(
            "active set must not be empty".into(),
        ));
    }
    if let Some(&j) = active.iter().find(|&&j| j >= p) {
        return Err(MrbessError::InvalidConfig(format!(
            "active index {j} out of range for p = {p}"
        )));
    }
    Ok(())
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending and the
/// column order of the eigenvectors permuted to match.
pub(crate) fn sym_eigen_desc(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Flip each column so its entry of largest absolute value is positive; the
/// lowest index wins ties. Makes eigenvector output deterministic.
pub(crate) fn fix_column_signs(v: &mut DMatrix<f64>) {
    for k in 0..v.ncols() {
        let mut best = 0;
        let mut best_abs = v[(0, k)].abs();
        for i in 1..v.nrows() {
            let a = v[(i, k)].abs();
            if a > best_abs {
                best = i;
                best_abs = a;
            }
        }
        if v[(best, k)] < 0.0 {
            v.column_mut(k).neg_mut();
        }
    }
}
