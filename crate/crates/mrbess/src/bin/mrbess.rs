//! Command-line front end: fit/tune on CSV matrices, generate synthetic
//! datasets, and run replicated benchmarks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mrbess::model::{denormalize_coefficients, validate_and_normalize, GramPolicy, SolverConfig};
use mrbess::report::{
    write_bench_csv, write_json_report, write_matrix_csv, FitSummary, RunReport, TuneTrace,
};
use mrbess::simulation::{gen_instance, run_benchmark, NoiseKind, SimulationSpec, TunerKind};
use mrbess::solver::solve_fixed;
use mrbess::tuning::{tune_gic, tune_grid_gic, tune_validation, TuneOptions};
use mrbess::Result;

#[derive(Parser)]
#[command(
    name = "mrbess",
    version,
    about = "Sparse reduced-rank regression by best subset selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit at a fixed rank and row sparsity on CSV matrices
    Fit(FitArgs),
    /// Tune rank and sparsity (GIC coordinate search, full grid, or validation split)
    Tune(TuneArgs),
    /// Generate one synthetic dataset and write X/Y/C_star CSVs
    Simulate(SimulateArgs),
    /// Run a replicated synthetic benchmark and aggregate a results table
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GramPolicyArg {
    /// Fall back to a truncated pseudo-inverse on near-singular Gram matrices
    PseudoInverse,
    /// Fail when the restricted Gram matrix is near-singular
    ErrorOnSingular,
}

impl From<GramPolicyArg> for GramPolicy {
    fn from(v: GramPolicyArg) -> Self {
        match v {
            GramPolicyArg::PseudoInverse => GramPolicy::PseudoInverse,
            GramPolicyArg::ErrorOnSingular => GramPolicy::ErrorOnSingular,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TuneMode {
    /// Two-stage GIC coordinate search
    Gic,
    /// Exhaustive GIC grid
    Grid,
    /// Validation split: fit on a train fraction, pick the lowest held-out error
    Cv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NoiseArg {
    Ar,
    Sc,
}

impl From<NoiseArg> for NoiseKind {
    fn from(v: NoiseArg) -> Self {
        match v {
            NoiseArg::Ar => NoiseKind::Ar,
            NoiseArg::Sc => NoiseKind::Sc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Gic,
    Grid,
    Validation,
    Fixed,
}

#[derive(Args, Serialize)]
struct FitArgs {
    /// Design matrix CSV (n rows, p columns)
    #[arg(long, value_name = "PATH")]
    x: PathBuf,
    /// Response matrix CSV (n rows, q columns)
    #[arg(long, value_name = "PATH")]
    y: PathBuf,
    /// Rank of the coefficient matrix
    #[arg(long)]
    rank: usize,
    /// Number of active predictor rows
    #[arg(long)]
    sparsity: usize,
    /// Convergence tolerance on the coefficient change
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Subtract column means of X and Y before fitting
    #[arg(long)]
    center: bool,
    /// Skip one header row in the input CSVs
    #[arg(long)]
    has_header: bool,
    #[arg(long, value_enum, default_value_t = GramPolicyArg::PseudoInverse)]
    gram_policy: GramPolicyArg,
    /// Report coefficients in the internal sqrt(n) column scaling instead of
    /// the original one
    #[arg(long)]
    keep_normalized: bool,
    /// JSON report path (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Coefficient matrix CSV path
    #[arg(long, value_name = "PATH", default_value = "C.csv")]
    coef_out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args, Serialize)]
struct TuneArgs {
    #[arg(long, value_name = "PATH")]
    x: PathBuf,
    #[arg(long, value_name = "PATH")]
    y: PathBuf,
    /// Largest sparsity level to sweep
    #[arg(long)]
    smax: usize,
    /// Largest rank to sweep
    #[arg(long, default_value_t = 10)]
    rmax: usize,
    #[arg(long, value_enum, default_value_t = TuneMode::Gic)]
    tune_mode: TuneMode,
    /// Training fraction of the validation split (cv mode)
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Seed of the validation split (cv mode)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long)]
    center: bool,
    #[arg(long)]
    has_header: bool,
    #[arg(long, value_enum, default_value_t = GramPolicyArg::PseudoInverse)]
    gram_policy: GramPolicyArg,
    #[arg(long)]
    keep_normalized: bool,
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_name = "PATH", default_value = "C.csv")]
    coef_out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    /// True number of nonzero coefficient rows
    #[arg(long)]
    sstar: usize,
    /// True rank of the coefficient matrix
    #[arg(long)]
    rstar: usize,
    /// Signal-to-noise ratio (r*-th singular value of X C* over ||E||_F)
    #[arg(long)]
    snr: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Ar)]
    noise: NoiseArg,
    #[arg(long, default_value_t = 0.3)]
    noise_rho: f64,
    #[arg(long, default_value_t = 0.5)]
    design_rho: f64,
    #[arg(long, default_value_t = 5.0)]
    d0: f64,
    #[arg(long, default_value_t = 5.0)]
    step: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory receiving X.csv, Y.csv and C_star.csv
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
    /// JSON report path (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    #[arg(long)]
    sstar: usize,
    #[arg(long)]
    rstar: usize,
    #[arg(long)]
    snr: f64,
    /// Number of replications
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Base seed; replication i uses seed + i
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Ar)]
    noise: NoiseArg,
    #[arg(long, default_value_t = 0.3)]
    noise_rho: f64,
    #[arg(long, default_value_t = 0.5)]
    design_rho: f64,
    /// Comma-separated tuning methods to benchmark
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gic")]
    methods: Vec<MethodArg>,
    /// Rank of the fixed method
    #[arg(long)]
    rank: Option<usize>,
    /// Sparsity of the fixed method
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long, default_value_t = 20)]
    smax: usize,
    #[arg(long, default_value_t = 10)]
    rmax: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Worker threads (default: available parallelism; env MRBESS_THREADS)
    #[arg(long)]
    threads: Option<usize>,
    /// Table path (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// csv writes the aggregated table, json the full report
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Tune(args) => run_tune(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Bench(args) => run_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn usage_error(violations: Vec<String>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(mrbess::MrbessError::InvalidConfig(violations.join("; ")))
    }
}

fn run_fit(args: FitArgs) -> Result<()> {
    let mut violations = Vec::new();
    if args.rank < 1 {
        violations.push("--rank must be >= 1".into());
    }
    if args.sparsity < 1 {
        violations.push("--sparsity must be >= 1".into());
    }
    if !args.tol.is_finite() || args.tol <= 0.0 {
        violations.push("--tol must be > 0".into());
    }
    if args.max_iter < 1 {
        violations.push("--max-iter must be >= 1".into());
    }
    if args.format != FormatArg::Json {
        violations.push("--format csv is only available for bench".into());
    }
    usage_error(violations)?;

    let started = Instant::now();
    let x = mrbess::report::read_matrix_csv(&args.x, args.has_header)?;
    let y = mrbess::report::read_matrix_csv(&args.y, args.has_header)?;
    let dataset = validate_and_normalize(&x, &y, args.center)?;

    let config = SolverConfig::new(args.rank, args.sparsity)
        .with_tol(args.tol)
        .with_max_iter(args.max_iter)
        .with_gram_policy(args.gram_policy.into());
    let fit = solve_fixed(&dataset, &config)?;

    let coefs = if args.keep_normalized {
        fit.c.clone()
    } else {
        denormalize_coefficients(&fit.c, dataset.col_scales())?
    };
    write_matrix_csv(&args.coef_out, &coefs)?;

    let report = RunReport {
        command: "fit".into(),
        config: serde_json::to_value(&args)?,
        fit: Some(FitSummary::from_fit(
            &fit,
            Some(args.coef_out.display().to_string()),
        )),
        tune_trace: None,
        metrics: None,
        bench: None,
        timing_s: started.elapsed().as_secs_f64(),
    };
    emit_json(&report, args.output.as_deref())
}

fn run_tune(args: TuneArgs) -> Result<()> {
    let mut violations = Vec::new();
    if args.smax < 1 {
        violations.push("--smax must be >= 1".into());
    }
    if args.rmax < 1 {
        violations.push("--rmax must be >= 1".into());
    }
    if !args.tol.is_finite() || args.tol <= 0.0 {
        violations.push("--tol must be > 0".into());
    }
    if args.max_iter < 1 {
        violations.push("--max-iter must be >= 1".into());
    }
    if args.tune_mode == TuneMode::Cv
        && (!args.train_fraction.is_finite()
            || args.train_fraction <= 0.0
            || args.train_fraction >= 1.0)
    {
        violations.push("--train-fraction must lie strictly between 0 and 1".into());
    }
    if args.format != FormatArg::Json {
        violations.push("--format csv is only available for bench".into());
    }
    usage_error(violations)?;

    let started = Instant::now();
    let x = mrbess::report::read_matrix_csv(&args.x, args.has_header)?;
    let y = mrbess::report::read_matrix_csv(&args.y, args.has_header)?;
    let dataset = validate_and_normalize(&x, &y, args.center)?;
    let opts = TuneOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        gram_policy: args.gram_policy.into(),
    };

    let (fit, trace) = match args.tune_mode {
        TuneMode::Gic => {
            let report = tune_gic(&dataset, args.smax, args.rmax, &opts)?;
            let trace = TuneTrace::from_tune(&report);
            (report.fit, trace)
        }
        TuneMode::Grid => {
            let report = tune_grid_gic(&dataset, args.smax, args.rmax, &opts)?;
            let trace = TuneTrace::from_grid(&report);
            (report.fit, trace)
        }
        TuneMode::Cv => {
            let report = tune_validation(
                &dataset,
                args.smax,
                args.rmax,
                args.train_fraction,
                args.seed,
                &opts,
            )?;
            let trace = TuneTrace::from_validation(&report);
            (report.fit, trace)
        }
    };

    let coefs = if args.keep_normalized {
        fit.c.clone()
    } else {
        denormalize_coefficients(&fit.c, dataset.col_scales())?
    };
    write_matrix_csv(&args.coef_out, &coefs)?;

    let report = RunReport {
        command: "tune".into(),
        config: serde_json::to_value(&args)?,
        fit: Some(FitSummary::from_fit(
            &fit,
            Some(args.coef_out.display().to_string()),
        )),
        tune_trace: Some(trace),
        metrics: None,
        bench: None,
        timing_s: started.elapsed().as_secs_f64(),
    };
    emit_json(&report, args.output.as_deref())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let mut violations = Vec::new();
    if !args.snr.is_finite() || args.snr <= 0.0 {
        violations.push("--snr must be > 0".into());
    }
    if args.format != FormatArg::Json {
        violations.push("--format csv is only available for bench".into());
    }
    usage_error(violations)?;

    let started = Instant::now();
    let mut spec = SimulationSpec::new(args.n, args.p, args.q, args.sstar, args.rstar, args.snr);
    spec.noise_kind = args.noise.into();
    spec.noise_rho = args.noise_rho;
    spec.design_rho = args.design_rho;
    spec.d0 = args.d0;
    spec.step = args.step;
    spec.validate()?;

    let instance = gen_instance(&spec, args.seed)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|source| mrbess::MrbessError::Io {
        path: args.out_dir.display().to_string(),
        source,
    })?;
    let x_path = args.out_dir.join("X.csv");
    let y_path = args.out_dir.join("Y.csv");
    let c_path = args.out_dir.join("C_star.csv");
    write_matrix_csv(&x_path, &instance.x)?;
    write_matrix_csv(&y_path, &instance.y)?;
    write_matrix_csv(&c_path, &instance.c_star)?;

    let mut config = serde_json::to_value(&args)?;
    if let serde_json::Value::Object(map) = &mut config {
        map.insert("omega".into(), serde_json::json!(instance.omega));
        map.insert(
            "support".into(),
            serde_json::json!(instance
                .support
                .iter()
                .map(|&j| j + 1)
                .collect::<Vec<usize>>()),
        );
        map.insert(
            "files".into(),
            serde_json::json!({
                "x": x_path.display().to_string(),
                "y": y_path.display().to_string(),
                "c_star": c_path.display().to_string(),
            }),
        );
    }

    let report = RunReport {
        command: "simulate".into(),
        config,
        fit: None,
        tune_trace: None,
        metrics: None,
        bench: None,
        timing_s: started.elapsed().as_secs_f64(),
    };
    emit_json(&report, args.output.as_deref())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let mut violations = Vec::new();
    if !args.snr.is_finite() || args.snr <= 0.0 {
        violations.push("--snr must be > 0".into());
    }
    if args.reps < 1 {
        violations.push("--reps must be >= 1".into());
    }
    if args.smax < 1 || args.rmax < 1 {
        violations.push("--smax and --rmax must be >= 1".into());
    }
    if args.methods.is_empty() {
        violations.push("--methods must not be empty".into());
    }
    if args.methods.contains(&MethodArg::Fixed)
        && (args.rank.is_none() || args.sparsity.is_none())
    {
        violations.push("the fixed method needs --rank and --sparsity".into());
    }
    if !args.train_fraction.is_finite()
        || args.train_fraction <= 0.0
        || args.train_fraction >= 1.0
    {
        violations.push("--train-fraction must lie strictly between 0 and 1".into());
    }
    usage_error(violations)?;

    let started = Instant::now();
    let mut spec = SimulationSpec::new(args.n, args.p, args.q, args.sstar, args.rstar, args.snr);
    spec.noise_kind = args.noise.into();
    spec.noise_rho = args.noise_rho;
    spec.design_rho = args.design_rho;
    spec.replications = args.reps;
    spec.base_seed = args.seed;
    spec.validate()?;

    let tuners: Vec<TunerKind> = args
        .methods
        .iter()
        .map(|m| match m {
            MethodArg::Gic => TunerKind::Gic {
                s_max: args.smax,
                r_max: args.rmax,
            },
            MethodArg::Grid => TunerKind::Grid {
                s_max: args.smax,
                r_max: args.rmax,
            },
            MethodArg::Validation => TunerKind::Validation {
                s_max: args.smax,
                r_max: args.rmax,
                train_fraction: args.train_fraction,
            },
            MethodArg::Fixed => TunerKind::Fixed {
                rank: args.rank.unwrap(),
                sparsity: args.sparsity.unwrap(),
            },
        })
        .collect();
    let opts = TuneOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        gram_policy: GramPolicy::PseudoInverse,
    };

    let threads = args.threads.or_else(|| {
        std::env::var("MRBESS_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let table = match threads {
        Some(k) if k > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| mrbess::MrbessError::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| run_benchmark(&spec, &tuners, &opts)),
        _ => run_benchmark(&spec, &tuners, &opts),
    }?;

    match args.format {
        FormatArg::Csv => match &args.output {
            Some(path) => write_bench_csv(path, &table)?,
            None => print!("{}", mrbess::report::bench_csv_string(&table)),
        },
        FormatArg::Json => {
            let report = RunReport {
                command: "bench".into(),
                config: serde_json::to_value(&args)?,
                fit: None,
                tune_trace: None,
                metrics: None,
                bench: Some(table),
                timing_s: started.elapsed().as_secs_f64(),
            };
            emit_json(&report, args.output.as_deref())?;
        }
    }
    Ok(())
}

fn emit_json(report: &RunReport, path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => write_json_report(path, report),
        None => {
            println!("{}", serde_json::to_string_pretty(report)?);
            Ok(())
        }
    }
}
