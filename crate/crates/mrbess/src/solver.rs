//! The fixed-(rank, sparsity) active-set iteration: alternate the closed-form
//! restricted fit with a hard-thresholding update of the support until the
//! coefficient matrix stabilizes.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MrbessError, Result};
use crate::model::{Dataset, FitResult, SolverConfig};
use crate::rrr::{
    fix_column_signs, primal_dual_update, rrr_restricted_fit, sacrifices, top_r_right_factors,
};
use crate::tuning;

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationStatus {
    /// `||C_{k+1} - C_k||_F <= tol`.
    TolConverged,
    /// The selected support reproduced itself.
    ActiveSetFixedPoint,
    /// A previously visited support recurred; the lowest-loss iterate of the
    /// cycle was returned.
    CycleDetected,
    /// Iteration cap reached.
    MaxIter,
}

/// One record per executed iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    /// FNV-1a hash of the support the iterate was fitted on.
    pub active_set_hash: u64,
    /// `||C_{k+1} - C_k||_F`.
    pub c_delta: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub status: TerminationStatus,
}

/// Screening initialization: score each design column by the l2 norm of its
/// correlation with `Y V0`, where `V0` holds the top-`r` right singular
/// vectors of `Y`, and keep the `s` largest (ties to the smaller index).
///
/// `excluded` marks columns that must never be selected (identically-zero
/// design columns). Returns the sorted support plus a flag set when fewer
/// than `s` columns had a positive score and the set was padded with the
/// smallest-index unselected candidates.
pub fn init_active_set(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    r: usize,
    s: usize,
    excluded: &[bool],
) -> Result<(Vec<usize>, bool)> {
    let (n, q) = (y.nrows(), y.ncols());
    let p = x.ncols();
    if r < 1 || r > n.min(q) {
        return Err(MrbessError::InvalidConfig(format!(
            "screening rank {r} out of range 1..=min(n={n}, q={q})"
        )));
    }
    if s < 1 || s > p {
        return Err(MrbessError::InvalidConfig(format!(
            "sparsity {s} out of range 1..=p={p}"
        )));
    }

    let svd = y.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut v0 = DMatrix::zeros(q, r);
    for (k, &idx) in order.iter().take(r).enumerate() {
        v0.column_mut(k).copy_from(&v_t.row(idx).transpose());
    }
    fix_column_signs(&mut v0);

    let scores = x.tr_mul(&(y * v0));
    let mut delta: Vec<f64> = (0..p).map(|j| scores.row(j).norm()).collect();
    for (j, flag) in excluded.iter().enumerate() {
        if *flag {
            delta[j] = f64::NEG_INFINITY;
        }
    }
    let active = select_active(&delta, s);
    let padded = active.iter().any(|&j| delta[j] <= 0.0);
    Ok((active, padded))
}

/// Indices of the `s` largest scores, ties resolved to the smaller index.
/// Returns exactly `s` indices, sorted ascending.
pub fn select_active(delta: &[f64], s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..delta.len()).collect();
    order.sort_by(|&i, &j| delta[j].total_cmp(&delta[i]).then(i.cmp(&j)));
    let mut active: Vec<usize> = order.into_iter().take(s).collect();
    active.sort_unstable();
    active
}

/// Run the primal-dual active-set iteration at fixed rank and sparsity.
///
/// Starting from the screening support (or `config.init_active_set`), each
/// iteration recomputes the right factors on the current support, updates the
/// primal/dual variables, scores every row, and hard-thresholds to the next
/// support. The loop stops when the coefficient change drops below `tol`,
/// the support reproduces itself, a support recurs (cycle), or `max_iter` is
/// reached. The returned fit is the closed-form restricted regression on the
/// final support, so `(c, b, v, active_set, loss)` are mutually consistent.
pub fn solve_fixed(dataset: &Dataset, config: &SolverConfig) -> Result<FitResult> {
    let x = dataset.x();
    let y = dataset.y();
    let (n, p, q) = (dataset.n(), dataset.p(), dataset.q());

    let s = config.sparsity;
    if s < 1 || s > p {
        return Err(MrbessError::InvalidConfig(format!(
            "sparsity {s} out of range 1..=p={p}"
        )));
    }
    let usable = dataset.num_nonzero_columns();
    if s > usable {
        return Err(MrbessError::InvalidConfig(format!(
            "sparsity {s} exceeds the {usable} nonzero design columns"
        )));
    }
    if config.rank < 1 {
        return Err(MrbessError::InvalidConfig("rank must be >= 1".into()));
    }
    // A matrix with s nonzero rows has rank at most s.
    let rank_capped = config.rank > s;
    let r = config.rank.min(s);
    if r > q.min(n) {
        return Err(MrbessError::InvalidConfig(format!(
            "rank {r} exceeds min(q={q}, n={n})"
        )));
    }
    if !config.tol.is_finite() || config.tol <= 0.0 {
        return Err(MrbessError::InvalidConfig(format!(
            "tolerance must be positive, got {}",
            config.tol
        )));
    }
    if config.max_iter < 1 {
        return Err(MrbessError::InvalidConfig("max_iter must be >= 1".into()));
    }

    let excluded: Vec<bool> = (0..p).map(|j| dataset.is_zero_column(j)).collect();
    let (init, init_padded) = match &config.init_active_set {
        Some(set) => (validate_initial_set(set, p, s, &excluded)?, false),
        None => init_active_set(x, y, r, s, &excluded)?,
    };

    let mut current = init;
    let mut c_prev = DMatrix::<f64>::zeros(p, q);
    let mut visited: HashMap<Vec<usize>, usize> = HashMap::new();
    visited.insert(current.clone(), 0);
    let mut supports: Vec<Vec<usize>> = Vec::new();
    let mut losses: Vec<f64> = Vec::new();
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut rank_deficient = false;

    let mut status = TerminationStatus::MaxIter;
    let mut final_support: Option<Vec<usize>> = None;

    for k in 0..config.max_iter {
        let factors = top_r_right_factors(x, y, &current, r, config.gram_policy)?;
        rank_deficient |= factors.rank_deficient;
        let state = primal_dual_update(x, y, &current, &factors.v, config.gram_policy)?;

        let mut delta = sacrifices(&state).delta;
        for (j, flag) in excluded.iter().enumerate() {
            if *flag {
                delta[j] = f64::NEG_INFINITY;
            }
        }
        let next = select_active(&delta, s);

        let c_next = &state.b * factors.v.transpose();
        let c_delta = (&c_next - &c_prev).norm();
        let loss = (y - x.select_columns(&current)
            * state.b.select_rows(&current)
            * factors.v.transpose())
        .norm_squared()
            / (2.0 * n as f64);

        records.push(IterationRecord {
            active_set_hash: active_set_hash(&current),
            c_delta,
            loss,
        });
        supports.push(current.clone());
        losses.push(loss);

        if c_delta <= config.tol {
            status = TerminationStatus::TolConverged;
            final_support = Some(current);
            break;
        }
        if next == current {
            status = TerminationStatus::ActiveSetFixedPoint;
            final_support = Some(current);
            break;
        }
        if let Some(&first_seen) = visited.get(&next) {
            // The supports visited from first_seen through k form the cycle;
            // return the one with the smallest loss (earliest on ties).
            let best = (first_seen..=k)
                .min_by(|&a, &b| losses[a].total_cmp(&losses[b]))
                .expect("cycle window is nonempty");
            status = TerminationStatus::CycleDetected;
            final_support = Some(supports[best].clone());
            break;
        }

        visited.insert(next.clone(), k + 1);
        c_prev = c_next;
        current = next;
    }

    let iterations = records.len();
    // On MaxIter the last fitted support is returned (the freshly selected
    // one was never fitted).
    let final_support =
        final_support.unwrap_or_else(|| supports.last().expect("at least one iteration").clone());

    let fit = rrr_restricted_fit(x, y, &final_support, r, config.gram_policy)?;
    rank_deficient |= fit.rank_deficient;
    // NaN when the penalty is undefined (tiny n or p); fitting still works.
    let gic = tuning::gic(fit.loss, n, p, q, s, r).unwrap_or(f64::NAN);

    Ok(FitResult {
        c: fit.c,
        b: fit.b,
        v: fit.v,
        active_set: final_support,
        rank: r,
        sparsity: s,
        loss: fit.loss,
        gic,
        iterations,
        converged: matches!(
            status,
            TerminationStatus::TolConverged | TerminationStatus::ActiveSetFixedPoint
        ),
        cycled: status == TerminationStatus::CycleDetected,
        rank_capped,
        rank_deficient,
        init_padded,
        trace: IterationTrace { records, status },
    })
}

fn validate_initial_set(set: &[usize], p: usize, s: usize, excluded: &[bool]) -> Result<Vec<usize>> {
    if set.len() != s {
        return Err(MrbessError::InvalidConfig(format!(
            "initial active set has {} indices, expected sparsity {s}",
            set.len()
        )));
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != s {
        return Err(MrbessError::InvalidConfig(
            "initial active set contains duplicate indices".into(),
        ));
    }
    if let Some(&j) = sorted.iter().find(|&&j| j >= p) {
        return Err(MrbessError::InvalidConfig(format!(
            "initial active index {j} out of range for p = {p}"
        )));
    }
    if let Some(&j) = sorted.iter().find(|&&j| excluded[j]) {
        return Err(MrbessError::InvalidConfig(format!(
            "initial active index {j} is an identically-zero design column"
        )));
    }
    Ok(sorted)
}

/// FNV-1a over the index set; stable across runs for reproducible traces.
pub fn active_set_hash(active: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &j in active {
        for byte in (j as u64).to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_and_normalize, GramPolicy};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut ChaCha20Rng, n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))
    }

    /// Noiseless instance on an exactly orthogonal scaled design.
    fn orthogonal_instance(
        n: usize,
        p: usize,
        q: usize,
        s_star: usize,
        r_star: usize,
        seed: u64,
    ) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(n, p);
        for j in 0..p {
            x[(j, j)] = (n as f64).sqrt();
        }
        let b = randn(&mut rng, s_star, r_star);
        let v = randn(&mut rng, q, r_star);
        let mut c_star = DMatrix::zeros(p, q);
        let block = &b * v.transpose();
        for i in 0..s_star {
            c_star.row_mut(i).copy_from(&block.row(i));
        }
        let y = &x * &c_star;
        (x, y, c_star)
    }

    #[test]
    fn select_active_basic_and_ties() {
        assert_eq!(select_active(&[5.0, 1.0, 4.0, 2.0], 2), vec![0, 2]);
        assert_eq!(select_active(&[3.0, 3.0, 3.0], 2), vec![0, 1]);
    }

    #[test]
    fn select_active_matches_sort_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(97);
        for _ in 0..50 {
            let p = 20;
            let delta: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..10.0)).collect();
            let s = rng.random_range(1..=p);
            let got = select_active(&delta, s);

            let mut pairs: Vec<(usize, f64)> = delta.iter().cloned().enumerate().collect();
            pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut expected: Vec<usize> = pairs.into_iter().take(s).map(|(i, _)| i).collect();
            expected.sort_unstable();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn init_selects_dominant_predictor() {
        let mut rng = ChaCha20Rng::seed_from_u64(101);
        let n = 20;
        let p = 6;
        let x = randn(&mut rng, n, p);
        // Y driven entirely by column 0.
        let c: DMatrix<f64> = randn(&mut rng, 1, 4);
        let y = DMatrix::from_column_slice(n, 1, x.column(0).as_slice()) * c;
        let (active, padded) = init_active_set(&x, &y, 1, 2, &[false; 6]).unwrap();
        assert!(active.contains(&0), "active = {active:?}");
        assert!(!padded);
    }

    #[test]
    fn init_tie_rule_picks_lowest_indices() {
        // Y = 0 makes every score zero: the set is padded from the left.
        let mut rng = ChaCha20Rng::seed_from_u64(103);
        let x = randn(&mut rng, 10, 5);
        let y = DMatrix::zeros(10, 3);
        let (active, padded) = init_active_set(&x, &y, 1, 3, &[false; 5]).unwrap();
        assert_eq!(active, vec![0, 1, 2]);
        assert!(padded);
    }

    #[test]
    fn init_matches_brute_force_screening() {
        let mut rng = ChaCha20Rng::seed_from_u64(107);
        let n = 15;
        let p = 12;
        let q = 5;
        let r = 2;
        let x = randn(&mut rng, n, p);
        let y = randn(&mut rng, n, q);
        let (active, _) = init_active_set(&x, &y, r, 4, &[false; 12]).unwrap();

        // Oracle: explicit scores from the top-r right singular vectors.
        let svd = y.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let mut v0 = DMatrix::zeros(q, r);
        for (k, &idx) in order.iter().take(r).enumerate() {
            v0.column_mut(k).copy_from(&v_t.row(idx).transpose());
        }
        fix_column_signs(&mut v0);
        let yv = &y * &v0;
        let delta: Vec<f64> = (0..p).map(|j| x.column(j).tr_mul(&yv).norm()).collect();
        let expected = select_active(&delta, 4);
        assert_eq!(active, expected);
    }

    #[test]
    fn init_never_selects_excluded_columns() {
        let mut rng = ChaCha20Rng::seed_from_u64(109);
        let x = randn(&mut rng, 12, 6);
        let y = randn(&mut rng, 12, 3);
        let mut excluded = vec![false; 6];
        excluded[0] = true;
        excluded[3] = true;
        let (active, _) = init_active_set(&x, &y, 1, 4, &excluded).unwrap();
        assert!(!active.contains(&0) && !active.contains(&3));
    }

    #[test]
    fn solve_recovers_noiseless_orthogonal_truth() {
        let (x, y, c_star) = orthogonal_instance(30, 12, 6, 4, 2, 113);
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        let config = SolverConfig::new(2, 4);
        let fit = solve_fixed(&ds, &config).unwrap();
        assert_eq!(fit.active_set, vec![0, 1, 2, 3]);
        // Already normalized columns: coefficients are directly comparable.
        assert!((&fit.c - &c_star).norm() < 1e-8, "err {}", (&fit.c - &c_star).norm());
        assert!(fit.iterations <= 2, "iterations = {}", fit.iterations);
        assert!(fit.converged);
    }

    #[test]
    fn full_support_equals_restricted_fit() {
        let mut rng = ChaCha20Rng::seed_from_u64(127);
        let x = randn(&mut rng, 25, 6);
        let y = randn(&mut rng, 25, 4);
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        let config = SolverConfig::new(2, 6);
        let fit = solve_fixed(&ds, &config).unwrap();
        let all: Vec<usize> = (0..6).collect();
        let oracle =
            rrr_restricted_fit(ds.x(), ds.y(), &all, 2, GramPolicy::PseudoInverse).unwrap();
        assert_eq!(fit.active_set, all);
        assert!((fit.c - oracle.c).norm() < 1e-12);
        assert!((fit.loss - oracle.loss).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_status_is_consistent_under_rerun() {
        let (x, y, _) = orthogonal_instance(24, 10, 5, 3, 2, 131);
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        let config = SolverConfig::new(2, 3);
        let fit = solve_fixed(&ds, &config).unwrap();
        if fit.status() == TerminationStatus::ActiveSetFixedPoint {
            let again = solve_fixed(
                &ds,
                &SolverConfig::new(2, 3).with_init_active_set(fit.active_set.clone()),
            )
            .unwrap();
            assert_eq!(again.active_set, fit.active_set);
            assert!((again.c - &fit.c).norm() < 1e-12);
        }
    }

    #[test]
    fn oracle_support_yields_oracle_estimate() {
        let mut rng = ChaCha20Rng::seed_from_u64(137);
        let n = 40;
        let p = 15;
        let q = 6;
        let x = randn(&mut rng, n, p);
        let b = randn(&mut rng, 3, 2);
        let v = randn(&mut rng, q, 2);
        let mut c_star = DMatrix::zeros(p, q);
        let block = &b * v.transpose();
        for (i, &j) in [2usize, 7, 11].iter().enumerate() {
            c_star.row_mut(j).copy_from(&block.row(i));
        }
        let e = randn(&mut rng, n, q) * 0.05;
        let y = &x * &c_star + e;
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        let fit = solve_fixed(&ds, &SolverConfig::new(2, 3)).unwrap();
        if fit.active_set == vec![2, 7, 11] {
            let oracle = rrr_restricted_fit(
                ds.x(),
                ds.y(),
                &fit.active_set,
                2,
                GramPolicy::PseudoInverse,
            )
            .unwrap();
            assert_eq!(fit.c, oracle.c);
        }
    }

    #[test]
    fn rank_capping_is_reported() {
        let (x, y, _) = orthogonal_instance(20, 8, 5, 3, 2, 139);
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        let fit = solve_fixed(&ds, &SolverConfig::new(5, 3)).unwrap();
        assert!(fit.rank_capped);
        assert_eq!(fit.rank, 3);
        assert_eq!(fit.v.ncols(), 3);
    }

    #[test]
    fn zero_columns_never_enter_the_active_set() {
        let mut rng = ChaCha20Rng::seed_from_u64(149);
        let mut x = randn(&mut rng, 20, 8);
        x.column_mut(2).fill(0.0);
        x.column_mut(5).fill(0.0);
        let y = randn(&mut rng, 20, 4);
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        let fit = solve_fixed(&ds, &SolverConfig::new(2, 4)).unwrap();
        assert!(!fit.active_set.contains(&2) && !fit.active_set.contains(&5));

        // Sparsity beyond the usable columns is rejected.
        assert!(matches!(
            solve_fixed(&ds, &SolverConfig::new(2, 7)),
            Err(MrbessError::InvalidConfig(_))
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (x, y, _) = orthogonal_instance(10, 5, 3, 2, 1, 151);
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        assert!(solve_fixed(&ds, &SolverConfig::new(0, 2)).is_err());
        assert!(solve_fixed(&ds, &SolverConfig::new(1, 0)).is_err());
        assert!(solve_fixed(&ds, &SolverConfig::new(1, 6)).is_err());
        assert!(solve_fixed(&ds, &SolverConfig::new(4, 4)).is_err()); // r > q
        let mut bad_tol = SolverConfig::new(1, 2);
        bad_tol.tol = 0.0;
        assert!(solve_fixed(&ds, &bad_tol).is_err());
        let bad_init = SolverConfig::new(1, 2).with_init_active_set(vec![0, 9]);
        assert!(solve_fixed(&ds, &bad_init).is_err());
    }

    #[test]
    fn trace_is_bounded_and_statused() {
        let mut rng = ChaCha20Rng::seed_from_u64(157);
        let x = randn(&mut rng, 30, 10);
        let y = randn(&mut rng, 30, 5);
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        let config = SolverConfig::new(2, 3).with_max_iter(7);
        let fit = solve_fixed(&ds, &config).unwrap();
        assert!(fit.trace.records.len() <= 7);
        assert_eq!(fit.iterations, fit.trace.records.len());
        if fit.status() == TerminationStatus::TolConverged {
            assert!(fit.trace.records.last().unwrap().c_delta <= config.tol);
        }
    }

    #[test]
    fn geometric_convergence_smoke() {
        // Well-conditioned Gaussian designs should terminate fast.
        let mut slow = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(7000 + seed);
            let n = 60;
            let p = 20;
            let q = 6;
            let x = randn(&mut rng, n, p);
            let b = randn(&mut rng, 4, 2);
            let v = randn(&mut rng, q, 2);
            let mut c_star = DMatrix::zeros(p, q);
            let block = 2.0 * &b * v.transpose();
            for i in 0..4 {
                c_star.row_mut(i).copy_from(&block.row(i));
            }
            let signal = &x * &c_star;
            let noise = randn(&mut rng, n, q);
            // SNR >= 1 in Frobenius scale.
            let scale = signal.norm() / (2.0 * noise.norm());
            let y = &signal + noise * scale;
            let ds = validate_and_normalize(&x, &y, false).unwrap();
            let fit = solve_fixed(&ds, &SolverConfig::new(2, 4)).unwrap();
            if fit.status() == TerminationStatus::MaxIter || fit.iterations > 20 {
                slow += 1;
            }
        }
        assert!(slow <= 1, "{slow} of 100 runs exceeded the iteration budget");
    }

    #[test]
    fn hash_is_order_insensitive_for_sorted_sets_and_stable() {
        assert_eq!(active_set_hash(&[1, 2, 3]), active_set_hash(&[1, 2, 3]));
        assert_ne!(active_set_hash(&[1, 2, 3]), active_set_hash(&[1, 2, 4]));
    }

    #[test]
    fn fit_result_structural_invariants() {
        let mut rng = ChaCha20Rng::seed_from_u64(163);
        let x = randn(&mut rng, 35, 12);
        let y = randn(&mut rng, 35, 6);
        let ds = validate_and_normalize(&x, &y, false).unwrap();
        let fit = solve_fixed(&ds, &SolverConfig::new(3, 5)).unwrap();

        assert_eq!(fit.active_set.len(), fit.sparsity);
        assert!(fit.active_set.windows(2).all(|w| w[0] < w[1]));

        // C = B V^T entrywise; V orthonormal.
        let rebuilt = &fit.b * fit.v.transpose();
        assert!((&fit.c - rebuilt).amax() <= 1e-10);
        let vtv = fit.v.tr_mul(&fit.v);
        assert!((vtv - DMatrix::identity(3, 3)).amax() <= 1e-8);

        // Rows off the active set are exactly zero.
        for j in 0..12 {
            if !fit.active_set.contains(&j) {
                assert_eq!(fit.c.row(j).norm(), 0.0);
            }
        }
        assert!(crate::model::numerical_rank(&fit.c, 1e-8) <= fit.rank.min(fit.sparsity));
    }
}
