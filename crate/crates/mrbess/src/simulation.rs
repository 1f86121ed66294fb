//! Synthetic data generation with exact signal-to-noise control, plus the
//! replication harness that aggregates per-method metrics into a benchmark
//! table.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MrbessError, Result};

/// Per-tuner outcome of one replication: metrics plus per-call solver stats,
/// or `None` on failure.
type TunerOutcome = Option<(MetricsRecord, Vec<SolverCallStat>)>;
use crate::model::{compute_metrics, denormalize_coefficients, validate_and_normalize, FitResult, MetricsRecord};
use crate::solver::solve_fixed;
use crate::tuning::{tune_gic, tune_grid_gic, tune_validation, SolverCallStat, TuneOptions};

/// Covariance family of the noise rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Autoregressive: `sigma_ij = rho^|i-j|`.
    Ar,
    /// Strong correlation: unit diagonal, constant `rho` off it.
    Sc,
}

/// Everything that defines one synthetic scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub s_star: usize,
    pub r_star: usize,
    /// Base singular weight; the k-th weight is `d0 + step * k`, k = 1..r*.
    pub d0: f64,
    pub step: f64,
    /// AR decay of the design covariance.
    pub design_rho: f64,
    pub noise_kind: NoiseKind,
    pub noise_rho: f64,
    pub snr: f64,
    pub replications: usize,
    pub base_seed: u64,
}

impl SimulationSpec {
    pub fn new(n: usize, p: usize, q: usize, s_star: usize, r_star: usize, snr: f64) -> Self {
        SimulationSpec {
            n,
            p,
            q,
            s_star,
            r_star,
            d0: 5.0,
            step: 5.0,
            design_rho: 0.5,
            noise_kind: NoiseKind::Ar,
            noise_rho: 0.3,
            snr,
            replications: 1,
            base_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(MrbessError::TooFewRows(self.n));
        }
        if self.r_star < 1 || self.r_star > self.s_star || self.s_star > self.p {
            return Err(MrbessError::Simulation(format!(
                "need 1 <= r* ({}) <= s* ({}) <= p ({})",
                self.r_star, self.s_star, self.p
            )));
        }
        if self.r_star > self.n.min(self.q) {
            return Err(MrbessError::Simulation(format!(
                "r* ({}) exceeds min(n = {}, q = {})",
                self.r_star, self.n, self.q
            )));
        }
        if !self.snr.is_finite() || self.snr <= 0.0 {
            return Err(MrbessError::Simulation(format!(
                "snr must be positive, got {}",
                self.snr
            )));
        }
        if !self.step.is_finite() || self.step <= 0.0 || self.d0 < 0.0 {
            return Err(MrbessError::Simulation(
                "singular weights must be strictly increasing (step > 0, d0 >= 0)".into(),
            ));
        }
        if self.design_rho.abs() >= 1.0 || self.noise_rho.abs() >= 1.0 {
            return Err(MrbessError::Simulation(
                "covariance decay parameters must lie in (-1, 1)".into(),
            ));
        }
        if self.replications < 1 {
            return Err(MrbessError::Simulation("need at least one replication".into()));
        }
        Ok(())
    }
}

/// How each benchmarked method picks its hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TunerKind {
    Fixed { rank: usize, sparsity: usize },
    Gic { s_max: usize, r_max: usize },
    Grid { s_max: usize, r_max: usize },
    Validation {
        s_max: usize,
        r_max: usize,
        train_fraction: f64,
    },
}

impl TunerKind {
    pub fn label(&self) -> String {
        match self {
            TunerKind::Fixed { rank, sparsity } => format!("fixed(r={rank},s={sparsity})"),
            TunerKind::Gic { .. } => "gic".to_string(),
            TunerKind::Grid { .. } => "grid".to_string(),
            TunerKind::Validation { .. } => "validation".to_string(),
        }
    }
}

/// Mean or standard deviation of each metric over replications.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub er_c: f64,
    pub er_xc: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub est_rank: f64,
    pub wall_time_s: f64,
}

/// Aggregated results of one method under one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub p: usize,
    pub mean: MetricsSummary,
    pub sd: MetricsSummary,
    pub replications_used: usize,
    pub failures: usize,
    pub solver_calls: usize,
    /// Calls that stopped before the iteration cap within 20 iterations.
    pub solver_calls_ok: usize,
    /// Per-replication metrics (successful replications only, in order).
    pub records: Vec<MetricsRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<MethodRow>,
    pub replications: usize,
    /// Replications in which every tuner failed.
    pub failed_replications: usize,
}

/// One fully generated replication.
#[derive(Debug, Clone)]
pub struct Instance {
    pub c_star: DMatrix<f64>,
    /// True row support of `c_star`, 0-based.
    pub support: Vec<usize>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// Noise variance scale realized by the SNR control.
    pub omega: f64,
    /// Seed reserved for a validation split on this instance.
    pub split_seed: u64,
}

/// Generate coefficient, design and noise for one replication seed. The
/// benchmark uses `rep_seed = base_seed + rep`, so a single replication can
/// be reproduced in isolation from the same seed.
pub fn gen_instance(spec: &SimulationSpec, rep_seed: u64) -> Result<Instance> {
    let mut master = ChaCha20Rng::seed_from_u64(rep_seed);
    let coef_seed = master.next_u64();
    let design_seed = master.next_u64();
    let noise_seed = master.next_u64();
    let split_seed = master.next_u64();

    let (c_star, support, _d) = gen_coefficient(spec, coef_seed);
    let x = gen_design(spec, design_seed);
    let signal = &x * &c_star;
    let (e, omega) = gen_noise_with_snr(&signal, spec, noise_seed)?;
    let y = signal + e;
    Ok(Instance {
        c_star,
        support,
        x,
        y,
        omega,
        split_seed,
    })
}

/// Coefficient construction: `C* = B D A^T` with unit-norm Gaussian response
/// factors, unit-norm uniform predictor factors on the first `s*` rows, and
/// strictly increasing singular weights. Returns the coefficient matrix, its
/// row support (0-based) and the diagonal weights.
pub fn gen_coefficient(spec: &SimulationSpec, seed: u64) -> (DMatrix<f64>, Vec<usize>, DVector<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (p, q, s, r) = (spec.p, spec.q, spec.s_star, spec.r_star);

    let mut a = DMatrix::<f64>::zeros(q, r);
    for k in 0..r {
        for i in 0..q {
            a[(i, k)] = rng.sample(StandardNormal);
        }
    }
    // Entries uniform on [-1, -0.3] U [0.3, 1]: magnitude then sign.
    let mut b = DMatrix::<f64>::zeros(p, r);
    for k in 0..r {
        for i in 0..s {
            let mag = rng.random_range(0.3..=1.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            b[(i, k)] = sign * mag;
        }
    }
    normalize_columns(&mut a);
    normalize_columns(&mut b);

    let d = DVector::from_iterator(r, (1..=r).map(|k| spec.d0 + spec.step * k as f64));
    let c_star = &b * DMatrix::from_diagonal(&d) * a.transpose();
    (c_star, (0..s).collect(), d)
}

/// Design rows i.i.d. from a centered Gaussian with AR covariance
/// `0.5^|i-j|` (decay configurable), generated through the covariance's
/// Cholesky factor.
pub fn gen_design(spec: &SimulationSpec, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let z = standard_normal_matrix(&mut rng, spec.n, spec.p);
    if spec.design_rho == 0.0 {
        return z;
    }
    let l = ar_cholesky(spec.p, spec.design_rho);
    z * l.transpose()
}

/// Noise rows i.i.d. Gaussian with the requested covariance family, rescaled
/// so that the realized signal-to-noise ratio
/// `eta_{r*} / ||E||_F` equals `spec.snr` exactly, where `eta_{r*}` is the
/// r*-th largest singular value of the signal `X C*`. Returns the noise and
/// the variance scale `omega = c^2`.
pub fn gen_noise_with_snr(
    xc_star: &DMatrix<f64>,
    spec: &SimulationSpec,
    seed: u64,
) -> Result<(DMatrix<f64>, f64)> {
    let svals = xc_star.clone().singular_values();
    let mut sorted: Vec<f64> = svals.iter().cloned().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let eta = sorted.get(spec.r_star - 1).copied().unwrap_or(0.0);
    if eta <= 0.0 {
        return Err(MrbessError::Simulation(format!(
            "signal X C* has fewer than r* = {} nonzero singular values",
            spec.r_star
        )));
    }

    let l = match spec.noise_kind {
        NoiseKind::Ar => ar_cholesky(spec.q, spec.noise_rho),
        NoiseKind::Sc => sc_cholesky(spec.q, spec.noise_rho)?,
    };
    // A zero draw has probability zero but would break the scaling; retry on
    // a shifted seed.
    for attempt in 0..8 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(attempt));
        let e_raw = standard_normal_matrix(&mut rng, spec.n, spec.q) * l.transpose();
        let norm = e_raw.norm();
        if norm > 0.0 {
            let c = eta / (spec.snr * norm);
            return Ok((e_raw * c, c * c));
        }
    }
    Err(MrbessError::Simulation(
        "noise draw was identically zero in 8 attempts".into(),
    ))
}

/// Run `spec.replications` seeded replications, apply every tuner to each,
/// and aggregate means and standard deviations per method. Replications run
/// in parallel; results are keyed by per-replication seeds, so the table is
/// identical for any thread count.
pub fn run_benchmark(
    spec: &SimulationSpec,
    tuners: &[TunerKind],
    opts: &TuneOptions,
) -> Result<BenchmarkTable> {
    spec.validate()?;
    if tuners.is_empty() {
        return Err(MrbessError::Simulation("no tuners requested".into()));
    }

    let reps: Vec<usize> = (1..=spec.replications).collect();
    let outcomes: Vec<Vec<TunerOutcome>> = reps
        .par_iter()
        .map(|&rep| run_replication(spec, tuners, opts, rep))
        .collect();

    let mut failed_replications = 0usize;
    for rep_result in &outcomes {
        if rep_result.iter().all(|o| o.is_none()) {
            failed_replications += 1;
        }
    }

    let mut rows = Vec::with_capacity(tuners.len());
    for (t, tuner) in tuners.iter().enumerate() {
        let mut records = Vec::new();
        let mut calls = 0usize;
        let mut calls_ok = 0usize;
        let mut failures = 0usize;
        for rep_result in &outcomes {
            match &rep_result[t] {
                Some((metrics, stats)) => {
                    records.push(metrics.clone());
                    calls += stats.len();
                    calls_ok += stats
                        .iter()
                        .filter(|s| {
                            s.status != crate::solver::TerminationStatus::MaxIter
                                && s.iterations <= 20
                        })
                        .count();
                }
                None => failures += 1,
            }
        }
        let (mean, sd) = summarize(&records);
        rows.push(MethodRow {
            method: tuner.label(),
            p: spec.p,
            mean,
            sd,
            replications_used: records.len(),
            failures,
            solver_calls: calls,
            solver_calls_ok: calls_ok,
            records,
        });
    }

    Ok(BenchmarkTable {
        rows,
        replications: spec.replications,
        failed_replications,
    })
}

/// Generate one replication and run every tuner on it. Tuner or generation
/// failures surface as `None` entries rather than aborting the benchmark.
fn run_replication(
    spec: &SimulationSpec,
    tuners: &[TunerKind],
    opts: &TuneOptions,
    rep: usize,
) -> Vec<TunerOutcome> {
    let seed = spec.base_seed.wrapping_add(rep as u64);
    let instance = match gen_instance(spec, seed) {
        Ok(inst) => inst,
        Err(_) => return vec![None; tuners.len()],
    };

    tuners
        .iter()
        .map(|tuner| {
            let start = Instant::now();
            let fitted = fit_one(tuner, &instance.x, &instance.y, opts, instance.split_seed);
            let elapsed = start.elapsed().as_secs_f64();
            fitted
                .and_then(|(fit, stats, scales)| {
                    let c_denorm = denormalize_coefficients(&fit.c, &scales)?;
                    let metrics =
                        compute_metrics(&c_denorm, &instance.c_star, &instance.x, elapsed)?;
                    Ok((metrics, stats))
                })
                .ok()
        })
        .collect()
}

fn fit_one(
    tuner: &TunerKind,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: &TuneOptions,
    split_seed: u64,
) -> Result<(FitResult, Vec<SolverCallStat>, DVector<f64>)> {
    let dataset = validate_and_normalize(x, y, false)?;
    let scales = dataset.col_scales().clone();
    let (fit, stats) = match tuner {
        TunerKind::Fixed { rank, sparsity } => {
            let config = crate::model::SolverConfig::new(*rank, *sparsity)
                .with_tol(opts.tol)
                .with_max_iter(opts.max_iter)
                .with_gram_policy(opts.gram_policy);
            let fit = solve_fixed(&dataset, &config)?;
            let stat = SolverCallStat::from_fit(&fit);
            (fit, vec![stat])
        }
        TunerKind::Gic { s_max, r_max } => {
            let report = tune_gic(&dataset, *s_max, *r_max, opts)?;
            (report.fit, report.solver_calls)
        }
        TunerKind::Grid { s_max, r_max } => {
            let report = tune_grid_gic(&dataset, *s_max, *r_max, opts)?;
            (report.fit, report.solver_calls)
        }
        TunerKind::Validation {
            s_max,
            r_max,
            train_fraction,
        } => {
            let report =
                tune_validation(&dataset, *s_max, *r_max, *train_fraction, split_seed, opts)?;
            (report.fit, report.solver_calls)
        }
    };
    Ok((fit, stats, scales))
}

fn summarize(records: &[MetricsRecord]) -> (MetricsSummary, MetricsSummary) {
    let fields: [fn(&MetricsRecord) -> f64; 6] = [
        |m| m.er_c,
        |m| m.er_xc,
        |m| m.fpr,
        |m| m.fnr,
        |m| m.est_rank as f64,
        |m| m.wall_time_s,
    ];
    let mut means = [0.0f64; 6];
    let mut sds = [0.0f64; 6];
    let k = records.len();
    if k > 0 {
        for (f, slot) in fields.iter().zip(means.iter_mut()) {
            *slot = records.iter().map(f).sum::<f64>() / k as f64;
        }
        if k > 1 {
            for ((f, mean), slot) in fields.iter().zip(means.iter()).zip(sds.iter_mut()) {
                let ss: f64 = records.iter().map(|r| (f(r) - mean).powi(2)).sum();
                *slot = (ss / (k - 1) as f64).sqrt();
            }
        }
    }
    let pack = |v: [f64; 6]| MetricsSummary {
        er_c: v[0],
        er_xc: v[1],
        fpr: v[2],
        fnr: v[3],
        est_rank: v[4],
        wall_time_s: v[5],
    };
    (pack(means), pack(sds))
}

fn normalize_columns(m: &mut DMatrix<f64>) {
    for k in 0..m.ncols() {
        let norm = m.column(k).norm();
        if norm > 0.0 {
            let mut col = m.column_mut(k);
            col /= norm;
        }
    }
}

fn standard_normal_matrix(rng: &mut ChaCha20Rng, n: usize, m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            out[(i, j)] = rng.sample(StandardNormal);
        }
    }
    out
}

/// Cholesky factor of the AR covariance `rho^|i-j|`.
fn ar_cholesky(dim: usize, rho: f64) -> DMatrix<f64> {
    let sigma = DMatrix::from_fn(dim, dim, |i, j| rho.powi((i as i32 - j as i32).abs()));
    nalgebra::Cholesky::new(sigma)
        .expect("AR covariance is positive definite for |rho| < 1")
        .l()
}

/// Cholesky factor of the equicorrelation covariance (unit diagonal, `rho`
/// off it).
fn sc_cholesky(dim: usize, rho: f64) -> Result<DMatrix<f64>> {
    let sigma = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { rho });
    nalgebra::Cholesky::new(sigma)
        .map(|c| c.l())
        .ok_or_else(|| {
            MrbessError::Simulation(format!(
                "equicorrelation covariance with rho = {rho} is not positive definite at q = {dim}"
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::numerical_rank;
    use crate::rrr::rrr_restricted_fit;
    use crate::model::GramPolicy;

    fn small_spec() -> SimulationSpec {
        SimulationSpec::new(50, 12, 6, 4, 2, 1.0)
    }

    #[test]
    fn singular_weights_follow_the_ladder() {
        let spec = SimulationSpec::new(20, 10, 8, 5, 3, 1.0);
        let (_, _, d) = gen_coefficient(&spec, 1);
        assert_eq!(d.as_slice(), &[10.0, 15.0, 20.0]);
    }

    #[test]
    fn coefficient_has_exact_rank_and_support() {
        let spec = small_spec();
        for seed in 0..5 {
            let (c_star, support, _) = gen_coefficient(&spec, seed);
            assert_eq!(numerical_rank(&c_star, 1e-8), spec.r_star);
            assert_eq!(support, vec![0, 1, 2, 3]);
            for i in 0..spec.p {
                let nonzero = c_star.row(i).norm() > 0.0;
                assert_eq!(nonzero, i < spec.s_star, "row {i}");
            }
        }
    }

    #[test]
    fn independent_design_has_small_cross_correlation() {
        let mut spec = small_spec();
        spec.n = 2000;
        spec.design_rho = 0.0;
        let x = gen_design(&spec, 99);
        for j in 0..spec.p - 1 {
            let r = sample_correlation(&x, j, j + 1);
            assert!(r.abs() < 0.1, "corr({j},{}) = {r}", j + 1);
        }
    }

    #[test]
    fn design_lag_one_correlation_matches_decay() {
        let mut spec = small_spec();
        spec.n = 5000;
        spec.design_rho = 0.5;
        let x = gen_design(&spec, 7);
        for j in 0..spec.p - 1 {
            let r = sample_correlation(&x, j, j + 1);
            assert!((r - 0.5).abs() < 0.05, "lag-1 corr at {j} = {r}");
        }
    }

    #[test]
    fn design_is_deterministic_under_seed() {
        let spec = small_spec();
        let a = gen_design(&spec, 42);
        let b = gen_design(&spec, 42);
        assert_eq!(a, b);
        let c = gen_design(&spec, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_snr_is_exact() {
        let spec = small_spec();
        let (c_star, _, _) = gen_coefficient(&spec, 3);
        let x = gen_design(&spec, 4);
        let signal = &x * &c_star;
        let (e, omega) = gen_noise_with_snr(&signal, &spec, 5).unwrap();

        let mut svals: Vec<f64> = signal.clone().singular_values().iter().cloned().collect();
        svals.sort_by(|a, b| b.total_cmp(a));
        let eta = svals[spec.r_star - 1];
        let realized = eta / e.norm();
        assert!(
            (realized - spec.snr).abs() <= 1e-10 * spec.snr,
            "realized snr {realized}"
        );
        assert!(omega > 0.0);
    }

    #[test]
    fn noise_vanishes_at_large_snr() {
        let mut spec = small_spec();
        spec.snr = 1e9;
        let (c_star, _, _) = gen_coefficient(&spec, 3);
        let x = gen_design(&spec, 4);
        let signal = &x * &c_star;
        let (e, _) = gen_noise_with_snr(&signal, &spec, 5).unwrap();
        assert!(e.norm() < 1e-5);
    }

    #[test]
    fn sc_noise_has_flat_correlation() {
        let mut spec = small_spec();
        spec.n = 5000;
        spec.q = 8;
        spec.noise_kind = NoiseKind::Sc;
        let (c_star, _, _) = gen_coefficient(&spec, 11);
        let x = gen_design(&spec, 12);
        let signal = &x * &c_star;
        let (e, _) = gen_noise_with_snr(&signal, &spec, 13).unwrap();
        for j in 0..spec.q - 1 {
            for k in (j + 1)..spec.q {
                let r = sample_correlation(&e, j, k);
                assert!((r - 0.3).abs() < 0.05, "corr({j},{k}) = {r}");
            }
        }
    }

    #[test]
    fn ar_noise_lag_one_correlation() {
        let mut spec = small_spec();
        spec.n = 5000;
        spec.q = 8;
        let (c_star, _, _) = gen_coefficient(&spec, 21);
        let x = gen_design(&spec, 22);
        let signal = &x * &c_star;
        let (e, _) = gen_noise_with_snr(&signal, &spec, 23).unwrap();
        for j in 0..spec.q - 1 {
            let r = sample_correlation(&e, j, j + 1);
            assert!((r - 0.3).abs() < 0.05, "lag-1 corr at {j} = {r}");
        }
    }

    #[test]
    fn oracle_fit_beats_null_model_in_prediction() {
        let mut spec = small_spec();
        spec.snr = 0.5;
        for rep in 0..5u64 {
            let (c_star, support, _) = gen_coefficient(&spec, 100 + rep);
            let x = gen_design(&spec, 200 + rep);
            let signal = &x * &c_star;
            let (e, _) = gen_noise_with_snr(&signal, &spec, 300 + rep).unwrap();
            let y = &signal + &e;

            let ds = validate_and_normalize(&x, &y, false).unwrap();
            let fit = rrr_restricted_fit(
                ds.x(),
                ds.y(),
                &support,
                spec.r_star,
                GramPolicy::PseudoInverse,
            )
            .unwrap();
            let c_hat = crate::model::denormalize_coefficients(&fit.c, ds.col_scales()).unwrap();
            let oracle = compute_metrics(&c_hat, &c_star, &x, 0.0).unwrap();
            let null = compute_metrics(&DMatrix::zeros(spec.p, spec.q), &c_star, &x, 0.0).unwrap();
            assert!(
                oracle.er_xc < null.er_xc,
                "oracle {} vs null {}",
                oracle.er_xc,
                null.er_xc
            );
        }
    }

    #[test]
    fn single_replication_has_zero_sd() {
        let mut spec = small_spec();
        spec.replications = 1;
        let table = run_benchmark(
            &spec,
            &[TunerKind::Fixed {
                rank: spec.r_star,
                sparsity: spec.s_star,
            }],
            &TuneOptions::default(),
        )
        .unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.replications_used, 1);
        assert_eq!(row.sd.er_c, 0.0);
        assert_eq!(row.sd.est_rank, 0.0);
    }

    #[test]
    fn benchmark_statistics_are_reproducible() {
        let mut spec = small_spec();
        spec.replications = 4;
        spec.base_seed = 9;
        let tuners = vec![
            TunerKind::Fixed {
                rank: spec.r_star,
                sparsity: spec.s_star,
            },
            TunerKind::Gic { s_max: 6, r_max: 3 },
        ];
        let a = run_benchmark(&spec, &tuners, &TuneOptions::default()).unwrap();
        let b = run_benchmark(&spec, &tuners, &TuneOptions::default()).unwrap();
        for (ra, rb) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(ra.mean.er_c.to_bits(), rb.mean.er_c.to_bits());
            assert_eq!(ra.mean.fpr.to_bits(), rb.mean.fpr.to_bits());
            assert_eq!(ra.mean.est_rank.to_bits(), rb.mean.est_rank.to_bits());
            assert_eq!(ra.sd.er_c.to_bits(), rb.sd.er_c.to_bits());
        }
    }

    fn sample_correlation(m: &DMatrix<f64>, j: usize, k: usize) -> f64 {
        let n = m.nrows() as f64;
        let (cj, ck) = (m.column(j), m.column(k));
        let (mj, mk) = (cj.sum() / n, ck.sum() / n);
        let mut num = 0.0;
        let mut vj = 0.0;
        let mut vk = 0.0;
        for i in 0..m.nrows() {
            let a = cj[i] - mj;
            let b = ck[i] - mk;
            num += a * b;
            vj += a * a;
            vk += b * b;
        }
        num / (vj.sqrt() * vk.sqrt())
    }
}
