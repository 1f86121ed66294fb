//! Rank/sparsity selection: the generalized information criterion, the
//! two-stage coordinate search, a full-grid sweep, and a validation-split
//! tuner.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MrbessError, Result};
use crate::model::{Dataset, FitResult, GramPolicy, SolverConfig, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::solver::{solve_fixed, TerminationStatus};

/// Solver knobs shared by every cell of a tuning sweep.
#[derive(Debug, Clone)]
pub struct TuneOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub gram_policy: GramPolicy,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            gram_policy: GramPolicy::PseudoInverse,
        }
    }
}

impl TuneOptions {
    fn config(&self, rank: usize, sparsity: usize) -> SolverConfig {
        SolverConfig::new(rank, sparsity)
            .with_tol(self.tol)
            .with_max_iter(self.max_iter)
            .with_gram_policy(self.gram_policy)
    }
}

/// GIC of one evaluated (sparsity, rank) cell. A failed cell carries
/// `loss = gic = +inf`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GicRecord {
    pub s: usize,
    pub r_nominal: usize,
    /// `min(r_nominal, s)`: the rank the fit can actually attain.
    pub r_effective: usize,
    pub loss: f64,
    pub penalty: f64,
    pub gic: f64,
}

/// Iteration accounting for one solver invocation inside a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverCallStat {
    pub s: usize,
    pub r: usize,
    pub iterations: usize,
    pub status: TerminationStatus,
}

impl SolverCallStat {
    pub fn from_fit(fit: &FitResult) -> Self {
        SolverCallStat {
            s: fit.sparsity,
            r: fit.rank,
            iterations: fit.iterations,
            status: fit.status(),
        }
    }
}

/// Output of the two-stage coordinate search.
#[derive(Debug, Clone)]
pub struct TuneReport {
    /// Sparsity sweep at the maximal rank.
    pub stage1: Vec<GicRecord>,
    /// Rank sweep at the chosen sparsity.
    pub stage2: Vec<GicRecord>,
    pub chosen_s: usize,
    pub chosen_r: usize,
    pub fit: FitResult,
    pub solver_calls: Vec<SolverCallStat>,
    pub failed_cells: usize,
}

/// Output of the exhaustive grid sweep.
#[derive(Debug, Clone)]
pub struct GridReport {
    pub records: Vec<GicRecord>,
    pub chosen_s: usize,
    pub chosen_r: usize,
    pub fit: FitResult,
    pub solver_calls: Vec<SolverCallStat>,
    pub failed_cells: usize,
}

/// One cell of the validation sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub s: usize,
    pub r: usize,
    /// Held-out prediction error `||Y_val - X_val C||_F^2 / (n_val q)`.
    pub val_error: f64,
}

/// Output of the validation-split tuner.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub cells: Vec<ValidationRecord>,
    pub chosen_s: usize,
    pub chosen_r: usize,
    /// Refit on all rows at the chosen pair.
    pub fit: FitResult,
    pub solver_calls: Vec<SolverCallStat>,
    pub failed_cells: usize,
    pub n_train: usize,
    pub n_val: usize,
}

/// Generalized information criterion:
/// `loss + q (s + r) (log log n) sqrt(log(p) / n)` with decimal logs.
///
/// Requires `n >= 11` (so `log log n > 0`) and `p >= 2` (so `log p > 0`).
pub fn gic(loss: f64, n: usize, p: usize, q: usize, s: usize, r: usize) -> Result<f64> {
    Ok(loss + gic_penalty(n, p, q, s, r)?)
}

/// The complexity penalty alone.
///
/// Decimal logs keep the penalty on the scale at which the criterion
/// separates signal from noise in the reference experiments; natural logs
/// inflate it roughly eightfold and make the sweep drop true predictors.
pub fn gic_penalty(n: usize, p: usize, q: usize, s: usize, r: usize) -> Result<f64> {
    if n <= 10 || p < 2 {
        return Err(MrbessError::InvalidPenalty { n, p });
    }
    let n_f = n as f64;
    let p_f = p as f64;
    Ok(q as f64 * (s + r) as f64 * n_f.log10().log10() * (p_f.log10() / n_f).sqrt())
}

/// Two-stage coordinate search: sweep sparsity at rank `r_max`, fix the
/// GIC-minimal sparsity, then sweep rank. Ties go to the smaller value.
/// Failed cells score `+inf` instead of aborting the sweep.
pub fn tune_gic(
    dataset: &Dataset,
    s_max: usize,
    r_max: usize,
    opts: &TuneOptions,
) -> Result<TuneReport> {
    check_tune_ranges(dataset, s_max, r_max)?;
    let (n, p, q) = (dataset.n(), dataset.p(), dataset.q());
    if n <= 10 || p < 2 {
        return Err(MrbessError::InvalidPenalty { n, p });
    }
    let mut calls = Vec::new();
    let mut failed = 0usize;

    let mut stage1 = Vec::with_capacity(s_max);
    for s in 1..=s_max {
        let rec = match solve_fixed(dataset, &opts.config(r_max, s)) {
            Ok(fit) => {
                calls.push(SolverCallStat::from_fit(&fit));
                gic_record(n, p, q, s, r_max, fit.loss)?
            }
            Err(_) => {
                failed += 1;
                failed_record(n, p, q, s, r_max)?
            }
        };
        stage1.push(rec);
    }
    let best_s = argmin_gic(&stage1).ok_or(MrbessError::AllCellsFailed(stage1.len()))?;
    let chosen_s = stage1[best_s].s;

    let mut stage2 = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let rec = match solve_fixed(dataset, &opts.config(r, chosen_s)) {
            Ok(fit) => {
                calls.push(SolverCallStat::from_fit(&fit));
                gic_record(n, p, q, chosen_s, r, fit.loss)?
            }
            Err(_) => {
                failed += 1;
                failed_record(n, p, q, chosen_s, r)?
            }
        };
        stage2.push(rec);
    }
    let best_r = argmin_gic(&stage2).ok_or(MrbessError::AllCellsFailed(stage2.len()))?;
    let chosen_r = stage2[best_r].r_nominal;

    let fit = solve_fixed(dataset, &opts.config(chosen_r, chosen_s))?;
    calls.push(SolverCallStat::from_fit(&fit));

    Ok(TuneReport {
        stage1,
        stage2,
        chosen_s,
        chosen_r,
        fit,
        solver_calls: calls,
        failed_cells: failed,
    })
}

/// Exhaustive sweep over every (s, r) with `r <= min(r_max, s)`; global GIC
/// argmin with ties to smaller s, then smaller r. This is the expensive
/// baseline the coordinate search is checked against.
pub fn tune_grid_gic(
    dataset: &Dataset,
    s_max: usize,
    r_max: usize,
    opts: &TuneOptions,
) -> Result<GridReport> {
    check_tune_ranges(dataset, s_max, r_max)?;
    let (n, p, q) = (dataset.n(), dataset.p(), dataset.q());
    if n <= 10 || p < 2 {
        return Err(MrbessError::InvalidPenalty { n, p });
    }
    let mut calls = Vec::new();
    let mut failed = 0usize;

    let mut records = Vec::new();
    for s in 1..=s_max {
        for r in 1..=r_max.min(s) {
            let rec = match solve_fixed(dataset, &opts.config(r, s)) {
                Ok(fit) => {
                    calls.push(SolverCallStat::from_fit(&fit));
                    gic_record(n, p, q, s, r, fit.loss)?
                }
                Err(_) => {
                    failed += 1;
                    failed_record(n, p, q, s, r)?
                }
            };
            records.push(rec);
        }
    }
    let best = argmin_gic(&records).ok_or(MrbessError::AllCellsFailed(records.len()))?;
    let (chosen_s, chosen_r) = (records[best].s, records[best].r_nominal);

    let fit = solve_fixed(dataset, &opts.config(chosen_r, chosen_s))?;
    calls.push(SolverCallStat::from_fit(&fit));

    Ok(GridReport {
        records,
        chosen_s,
        chosen_r,
        fit,
        solver_calls: calls,
        failed_cells: failed,
    })
}

/// Validation-split tuner: fit every (s, r) cell on a seeded random subset of
/// rows, score held-out prediction error, pick the minimizer (ties to smaller
/// s, then r), and refit on all rows.
pub fn tune_validation(
    dataset: &Dataset,
    s_max: usize,
    r_max: usize,
    train_fraction: f64,
    seed: u64,
    opts: &TuneOptions,
) -> Result<ValidationReport> {
    check_tune_ranges(dataset, s_max, r_max)?;
    if !train_fraction.is_finite() || train_fraction <= 0.0 || train_fraction >= 1.0 {
        return Err(MrbessError::InvalidConfig(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n = dataset.n();
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    if n_train < s_max {
        return Err(MrbessError::InfeasibleSplit {
            train_rows: n_train,
            s_max,
        });
    }
    if r_max > n_train.min(dataset.q()) {
        return Err(MrbessError::InvalidConfig(format!(
            "r_max {r_max} exceeds min(train rows = {n_train}, q = {})",
            dataset.q()
        )));
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut train: Vec<usize> = indices[..n_train].to_vec();
    let mut val: Vec<usize> = indices[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    let n_val = val.len();

    let train_ds = dataset.subset_rows(&train);
    let x_val = dataset.x().select_rows(&val);
    let y_val = dataset.y().select_rows(&val);

    let mut calls = Vec::new();
    let mut failed = 0usize;
    let mut cells = Vec::new();
    for s in 1..=s_max {
        for r in 1..=r_max.min(s) {
            let val_error = match solve_fixed(&train_ds, &opts.config(r, s)) {
                Ok(fit) => {
                    calls.push(SolverCallStat::from_fit(&fit));
                    validation_error(&x_val, &y_val, &fit.c)
                }
                Err(_) => {
                    failed += 1;
                    f64::INFINITY
                }
            };
            cells.push(ValidationRecord { s, r, val_error });
        }
    }
    let best = cells
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, c)| match acc {
            Some((_, v)) if v <= c.val_error => acc,
            _ if c.val_error.is_finite() => Some((i, c.val_error)),
            _ => acc,
        })
        .map(|(i, _)| i)
        .ok_or(MrbessError::AllCellsFailed(cells.len()))?;
    let (chosen_s, chosen_r) = (cells[best].s, cells[best].r);

    let fit = solve_fixed(dataset, &opts.config(chosen_r, chosen_s))?;
    calls.push(SolverCallStat::from_fit(&fit));

    Ok(ValidationReport {
        cells,
        chosen_s,
        chosen_r,
        fit,
        solver_calls: calls,
        failed_cells: failed,
        n_train,
        n_val,
    })
}

fn validation_error(x_val: &DMatrix<f64>, y_val: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let resid = y_val - x_val * c;
    resid.norm_squared() / (y_val.nrows() * y_val.ncols()) as f64
}

fn check_tune_ranges(dataset: &Dataset, s_max: usize, r_max: usize) -> Result<()> {
    let (n, p, q) = (dataset.n(), dataset.p(), dataset.q());
    if s_max < 1 || s_max > p {
        return Err(MrbessError::InvalidConfig(format!(
            "s_max {s_max} out of range 1..=p={p}"
        )));
    }
    if r_max < 1 || r_max > n.min(q) {
        return Err(MrbessError::InvalidConfig(format!(
            "r_max {r_max} out of range 1..=min(n={n}, q={q})"
        )));
    }
    Ok(())
}

// Cell penalties use the nominal requested rank, not the attainable
// min(r, s): the stage-1 sweep compares GIC across s at one fixed r_max, and
// a rank-capped penalty would grow by two units per s-step below r_max,
// systematically under-selecting the support. With the nominal rank the
// per-s slope is constant and the sweep agrees with the full grid.
fn gic_record(n: usize, p: usize, q: usize, s: usize, r_nominal: usize, loss: f64) -> Result<GicRecord> {
    let penalty = gic_penalty(n, p, q, s, r_nominal)?;
    Ok(GicRecord {
        s,
        r_nominal,
        r_effective: r_nominal.min(s),
        loss,
        penalty,
        gic: loss + penalty,
    })
}

fn failed_record(n: usize, p: usize, q: usize, s: usize, r_nominal: usize) -> Result<GicRecord> {
    Ok(GicRecord {
        s,
        r_nominal,
        r_effective: r_nominal.min(s),
        loss: f64::INFINITY,
        penalty: gic_penalty(n, p, q, s, r_nominal)?,
        gic: f64::INFINITY,
    })
}

/// Index of the smallest finite GIC; earlier records win ties, so the sweep
/// order (ascending s, then r) encodes the tie-break rule.
fn argmin_gic(records: &[GicRecord]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, rec) in records.iter().enumerate() {
        if !rec.gic.is_finite() {
            continue;
        }
        match best {
            Some((_, v)) if v <= rec.gic => {}
            _ => best = Some((i, rec.gic)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_and_normalize;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut ChaCha20Rng, n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))
    }

    /// Noiseless low-rank instance on an orthogonal scaled design.
    fn noiseless_instance(seed: u64) -> (Dataset, usize, usize) {
        let n = 40;
        let p = 12;
        let q = 6;
        let (s_star, r_star) = (3, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(n, p);
        for j in 0..p {
            x[(j, j)] = (n as f64).sqrt();
        }
        let b = randn(&mut rng, s_star, r_star) * 3.0;
        let v = randn(&mut rng, q, r_star);
        let mut c_star = DMatrix::zeros(p, q);
        let block = &b * v.transpose();
        for i in 0..s_star {
            c_star.row_mut(i).copy_from(&block.row(i));
        }
        let y = &x * &c_star;
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        (ds, s_star, r_star)
    }

    #[test]
    fn gic_penalty_matches_high_precision_oracle() {
        // 2 * 2 * log10(log10 100) * sqrt(log10(10) / 100), computed
        // independently at 30 decimal digits.
        let pen = gic_penalty(100, 10, 2, 1, 1).unwrap();
        assert!((pen - 0.12041199826559248).abs() < 1e-16, "penalty = {pen}");
        let l = 3.5;
        assert_eq!(gic(l, 100, 10, 2, 1, 1).unwrap(), l + pen);
    }

    #[test]
    fn gic_null_model_is_pure_loss() {
        let loss = 1.25;
        assert_eq!(gic(loss, 50, 4, 3, 0, 0).unwrap(), loss);
    }

    #[test]
    fn gic_penalty_is_positive_for_valid_sizes() {
        assert!(gic_penalty(11, 2, 1, 1, 1).unwrap() > 0.0);
        assert!(gic_penalty(1000, 2, 1, 1, 1).unwrap() > 0.0);
    }

    #[test]
    fn gic_penalty_increases_in_s_and_r() {
        let base = gic_penalty(100, 20, 5, 3, 2).unwrap();
        assert!(gic_penalty(100, 20, 5, 4, 2).unwrap() > base);
        assert!(gic_penalty(100, 20, 5, 3, 3).unwrap() > base);
    }

    #[test]
    fn gic_rejects_degenerate_sizes() {
        // log10(log10 n) is zero at n = 10: the penalty needs n >= 11.
        assert!(matches!(
            gic(0.0, 10, 12, 1, 1, 1),
            Err(MrbessError::InvalidPenalty { n: 10, p: 12 })
        ));
        assert!(matches!(
            gic(0.0, 100, 1, 1, 1, 1),
            Err(MrbessError::InvalidPenalty { n: 100, p: 1 })
        ));
    }

    #[test]
    fn coordinate_search_finds_truth_on_noiseless_data() {
        let (ds, s_star, r_star) = noiseless_instance(211);
        let report = tune_gic(&ds, 6, 4, &TuneOptions::default()).unwrap();
        assert_eq!((report.chosen_s, report.chosen_r), (s_star, r_star));
        assert!(report.fit.loss < 1e-12);

        // Full grid agrees here.
        let grid = tune_grid_gic(&ds, 6, 4, &TuneOptions::default()).unwrap();
        assert_eq!((grid.chosen_s, grid.chosen_r), (s_star, r_star));
    }

    #[test]
    fn reports_decompose_gic_exactly() {
        let (ds, _, _) = noiseless_instance(223);
        let report = tune_gic(&ds, 5, 3, &TuneOptions::default()).unwrap();
        for rec in report.stage1.iter().chain(report.stage2.iter()) {
            if rec.gic.is_finite() {
                assert_eq!(rec.gic, rec.loss + rec.penalty);
                assert_eq!(rec.r_effective, rec.r_nominal.min(rec.s));
            }
        }
        // Chosen values minimize their stages.
        let min1 = report
            .stage1
            .iter()
            .map(|r| r.gic)
            .fold(f64::INFINITY, f64::min);
        let chosen1 = report
            .stage1
            .iter()
            .find(|r| r.s == report.chosen_s)
            .unwrap();
        assert_eq!(chosen1.gic, min1);
    }

    #[test]
    fn stage2_losses_non_increasing_in_rank_on_stable_support() {
        let (ds, _, _) = noiseless_instance(227);
        let report = tune_gic(&ds, 5, 4, &TuneOptions::default()).unwrap();
        // On this clean instance every stage-2 fit lands on the same support,
        // so the restricted-regression monotonicity applies directly.
        let mut prev = f64::INFINITY;
        for rec in &report.stage2 {
            assert!(rec.loss <= prev + 1e-10);
            prev = rec.loss;
        }
    }

    #[test]
    fn single_cell_sweep_returns_that_fit() {
        let (ds, _, _) = noiseless_instance(229);
        let report = tune_gic(&ds, 1, 1, &TuneOptions::default()).unwrap();
        assert_eq!((report.chosen_s, report.chosen_r), (1, 1));
        let grid = tune_grid_gic(&ds, 1, 1, &TuneOptions::default()).unwrap();
        assert_eq!((grid.chosen_s, grid.chosen_r), (1, 1));
        assert_eq!(grid.records.len(), 1);
    }

    #[test]
    fn grid_cell_count_is_exhaustive() {
        let (ds, _, _) = noiseless_instance(233);
        let grid = tune_grid_gic(&ds, 6, 3, &TuneOptions::default()).unwrap();
        let expected: usize = (1..=6).map(|s| 3usize.min(s)).sum();
        assert_eq!(grid.records.len(), expected);
        // The coordinate search evaluates only s_max + r_max cells.
        let report = tune_gic(&ds, 6, 3, &TuneOptions::default()).unwrap();
        assert_eq!(report.stage1.len() + report.stage2.len(), 6 + 3);
    }

    #[test]
    fn validation_picks_zero_error_pair_on_noiseless_data() {
        // Gaussian design so every row carries signal from all true
        // predictors; the smallest zero-error cell is then the truth.
        let n = 40;
        let p = 12;
        let q = 6;
        let (s_star, r_star) = (3, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(239);
        let x = randn(&mut rng, n, p);
        let b = randn(&mut rng, s_star, r_star) * 3.0;
        let v = randn(&mut rng, q, r_star);
        let mut c_star = DMatrix::zeros(p, q);
        let block = &b * v.transpose();
        for i in 0..s_star {
            c_star.row_mut(i).copy_from(&block.row(i));
        }
        let y = &x * &c_star;
        let ds = validate_and_normalize(&x, &y, false).unwrap();

        let report = tune_validation(&ds, 6, 4, 0.8, 31, &TuneOptions::default()).unwrap();
        let best = report
            .cells
            .iter()
            .find(|c| c.s == report.chosen_s && c.r == report.chosen_r)
            .unwrap();
        assert!(best.val_error < 1e-12, "val error {}", best.val_error);
        // Cells below the true sparsity leave real signal unexplained, so
        // the winner is at least as large; among zero-error cells only
        // rounding noise orders the choice.
        assert!(report.chosen_s >= s_star);
        assert!(report.chosen_r >= r_star);
        for j in 0..s_star {
            assert!(report.fit.active_set.contains(&j));
        }
    }

    #[test]
    fn validation_split_is_deterministic() {
        let (ds, _, _) = noiseless_instance(241);
        let a = tune_validation(&ds, 5, 3, 0.8, 77, &TuneOptions::default()).unwrap();
        let b = tune_validation(&ds, 5, 3, 0.8, 77, &TuneOptions::default()).unwrap();
        assert_eq!(a.chosen_s, b.chosen_s);
        assert_eq!(a.chosen_r, b.chosen_r);
        assert_eq!(a.n_train, b.n_train);
        for (ca, cb) in a.cells.iter().zip(b.cells.iter()) {
            assert_eq!(ca.val_error.to_bits(), cb.val_error.to_bits());
        }
    }

    #[test]
    fn validation_rejects_infeasible_split() {
        let (ds, _, _) = noiseless_instance(251);
        let n = ds.n(); // 40
        // 90% of rows still fewer than s_max = n.
        let err = tune_validation(&ds, ds.p(), 3, 0.25, 1, &TuneOptions::default());
        match err {
            Err(MrbessError::InfeasibleSplit { train_rows, s_max }) => {
                assert_eq!(train_rows, n / 4);
                assert_eq!(s_max, ds.p());
            }
            other => panic!("expected InfeasibleSplit, got {other:?}"),
        }
    }

    #[test]
    fn tune_ranges_are_validated() {
        let (ds, _, _) = noiseless_instance(257);
        assert!(tune_gic(&ds, 0, 1, &TuneOptions::default()).is_err());
        assert!(tune_gic(&ds, ds.p() + 1, 1, &TuneOptions::default()).is_err());
        assert!(tune_gic(&ds, 3, ds.q() + 1, &TuneOptions::default()).is_err());
        assert!(
            tune_validation(&ds, 3, 2, 1.0, 1, &TuneOptions::default()).is_err(),
            "train_fraction = 1 must be rejected"
        );
    }
}
