// Negated comparisons are deliberate: `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! jitmed: jittered-median estimation of a Poisson intensity.
//!
//! Subcommands: `theory` (exact medians, the correction function H, the
//! w_n/Delta_n sequences), `estimate` (run one estimator on a file of
//! counts), `simulate` (Monte Carlo comparison grid) and `bench` (wall-clock
//! timing of the estimators).
//!
//! Exit codes: 0 success, 2 usage, 3 input data, 4 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use jitmed::estimators::{
    lambda_jittered, lambda_median_raw, lambda_mle, tukey_estimate, CountSample, Estimate, Method,
    TukeyConfig,
};
use jitmed::simulation::{
    bench, run_grid, BenchConfig, ContaminationConfig, GridRow, MonteCarloConfig,
};
use jitmed::theory::{self, delta_sequence, expansion_residual, h_function, theoretical_median};
use jitmed::Intensity;

mod input;
mod output;

use output::{emit, opt_cell, CsvRow, Format, SCHEMA_VERSION};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Numeric(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "jitmed",
    version,
    about = "Jittered-median estimation of a Poisson intensity"
)]
struct Cli {
    /// Output format for all subcommands.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for the simulation loop; falls back to the
    /// JITMED_THREADS environment variable, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Theoretical quantities of the jittered distribution.
    Theory {
        #[command(subcommand)]
        action: TheoryAction,
    },
    /// Estimate the rate from a file of counts.
    Estimate {
        /// One nonnegative integer per line, or single-column CSV with
        /// header `count`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        method: Method,
        /// Jitter seed (jittered method, and Tukey's starting value).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cutoff constant for the Tukey objective.
        #[arg(long, default_value_t = 6.0)]
        tukey_k: f64,
    },
    /// Monte Carlo comparison of the estimators.
    Simulate {
        /// Rates: a single value, a comma list, or A:B:STEP. Default: 20
        /// values spread over [1, 10].
        #[arg(long)]
        lambdas: Option<String>,
        /// Sample size per replication.
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Replications per rate (default 2000; 10000 under --paper-scale).
        #[arg(long)]
        reps: Option<u32>,
        /// Outlier proportion of the additive-outlier model.
        #[arg(long, default_value_t = 0.0)]
        pi: f64,
        /// Target signal-to-noise ratio in dB; derives the outlier shift.
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
        /// Explicit integer outlier shift (alternative to --snr).
        #[arg(long)]
        sqrt_h: Option<u32>,
        /// Comma list of jittered,mle,median,tukey, or `all`.
        #[arg(long, default_value = "jittered,mle,median")]
        estimators: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Full study scale: 100 rates in [1, 10] and 10000 replications.
        #[arg(long, default_value_t = false)]
        paper_scale: bool,
    },
    /// Average wall time of each estimator across sample sizes.
    Bench {
        /// Comma list of sizes (scientific notation accepted), ascending.
        #[arg(long)]
        sizes: String,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        lambda: f64,
        /// Replications averaged per cell.
        #[arg(long, default_value_t = 10)]
        reps: u32,
        /// Comma list of methods, or `all`.
        #[arg(long, default_value = "all")]
        methods: String,
        /// Sizes whose estimated footprint exceeds this print NA.
        #[arg(long, default_value_t = 10.0)]
        memory_budget_gb: f64,
        /// Print cells under 0.05 s as `0*`.
        #[arg(long, default_value_t = false)]
        star_floor: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum TheoryAction {
    /// Exact median of the jittered distribution.
    Median {
        #[arg(long, conflicts_with = "grid")]
        lambda: Option<f64>,
        /// Rate grid A:B:STEP (inclusive ends).
        #[arg(long)]
        grid: Option<String>,
    },
    /// The piecewise-cubic correction function on [0, 1].
    H {
        #[arg(long)]
        x: f64,
    },
    /// The sequence w_n(x, k) with its rescaled difference Delta_n.
    Wn {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
    },
    /// Residual of the second-order expansion of Delta_n over an n sweep.
    Residual {
        #[arg(long)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        /// Comma list of sequence indices.
        #[arg(long)]
        n_sweep: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => match std::env::var("JITMED_THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| {
                CliError::Usage(format!("JITMED_THREADS must be a thread count, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    let format = cli.format;
    match cli.command {
        Command::Theory { action } => cmd_theory(format, action),
        Command::Estimate {
            input,
            method,
            seed,
            tukey_k,
        } => cmd_estimate(format, &input, method, seed, tukey_k),
        Command::Simulate {
            lambdas,
            n,
            reps,
            pi,
            snr,
            sqrt_h,
            estimators,
            seed,
            paper_scale,
        } => {
            let cfg = build_simulate_config(
                lambdas.as_deref(),
                n,
                reps,
                pi,
                snr,
                sqrt_h,
                &estimators,
                seed,
                paper_scale,
            )?;
            with_pool(threads, || cmd_simulate(format, &cfg))
        }
        Command::Bench {
            sizes,
            lambda,
            reps,
            methods,
            memory_budget_gb,
            star_floor,
            seed,
        } => {
            let cfg = BenchConfig {
                sizes: parse_sizes(&sizes)?,
                lambda,
                methods: parse_methods(&methods)?,
                reps,
                memory_budget_bytes: (memory_budget_gb * (1u64 << 30) as f64) as u64,
                master_seed: seed,
            };
            cmd_bench(format, &cfg, star_floor)
        }
    }
}

fn with_pool<F: FnOnce() -> Result<(), CliError> + Send>(
    threads: Option<usize>,
    f: F,
) -> Result<(), CliError> {
    match threads {
        None => f(),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

// ---------------------------------------------------------------- theory --

#[derive(Serialize)]
struct MedianRow {
    lambda: f64,
    median: f64,
    delta: f64,
    h_at_frac: f64,
}

impl CsvRow for MedianRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.lambda.to_string(),
            self.median.to_string(),
            self.delta.to_string(),
            self.h_at_frac.to_string(),
        ]
    }
}

#[derive(Serialize)]
struct HRow {
    x: f64,
    h: f64,
}

impl CsvRow for HRow {
    fn cells(&self) -> Vec<String> {
        vec![self.x.to_string(), self.h.to_string()]
    }
}

#[derive(Serialize)]
struct WnRow {
    n: u64,
    x: f64,
    k: f64,
    w: f64,
    delta_n: Option<f64>,
    branch: String,
}

impl CsvRow for WnRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.x.to_string(),
            self.k.to_string(),
            self.w.to_string(),
            opt_cell(self.delta_n),
            self.branch.clone(),
        ]
    }
}

#[derive(Serialize)]
struct ResidualRow {
    n: u64,
    x: f64,
    k: f64,
    delta_n: f64,
    residual: f64,
}

impl CsvRow for ResidualRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.x.to_string(),
            self.k.to_string(),
            self.delta_n.to_string(),
            self.residual.to_string(),
        ]
    }
}

fn intensity(lambda: f64) -> Result<Intensity, CliError> {
    Intensity::new(lambda).map_err(|e| CliError::Usage(e.to_string()))
}

fn theory_usage(e: theory::TheoryError) -> CliError {
    match e {
        theory::TheoryError::BranchChange => CliError::Numeric(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn cmd_theory(format: Format, action: TheoryAction) -> Result<(), CliError> {
    match action {
        TheoryAction::Median { lambda, grid } => {
            let rates = match (lambda, grid) {
                (Some(l), None) => vec![l],
                (None, Some(spec)) => parse_rate_grid(&spec)?,
                (None, None) | (Some(_), Some(_)) => {
                    return Err(CliError::Usage(
                        "give exactly one of --lambda or --grid".into(),
                    ))
                }
            };
            let rows: Vec<MedianRow> = rates
                .into_iter()
                .map(|l| {
                    let sol = theoretical_median(intensity(l)?);
                    Ok(MedianRow {
                        lambda: l,
                        median: sol.median,
                        delta: sol.delta,
                        h_at_frac: sol.h_at_frac,
                    })
                })
                .collect::<Result<_, CliError>>()?;
            emit(
                format,
                "theory.median",
                &["lambda", "median", "delta", "h_at_frac"],
                &rows,
            );
            Ok(())
        }
        TheoryAction::H { x } => {
            let h = h_function(x).map_err(theory_usage)?;
            emit(format, "theory.h", &["x", "h"], &[HRow { x, h }]);
            Ok(())
        }
        TheoryAction::Wn { n, x, k } => {
            let p = theory::w_sequence(n, x, k).map_err(theory_usage)?;
            let row = WnRow {
                n: p.n,
                x: p.x,
                k: p.k,
                w: p.w,
                delta_n: p.delta_n,
                branch: p.branch.to_string(),
            };
            emit(
                format,
                "theory.wn",
                &["n", "x", "k", "w", "delta_n", "branch"],
                &[row],
            );
            Ok(())
        }
        TheoryAction::Residual { x, k, n_sweep } => {
            let ns = parse_u64_list(&n_sweep)?;
            let rows: Vec<ResidualRow> = ns
                .into_iter()
                .map(|n| {
                    let delta_n = delta_sequence(n, x, k).map_err(theory_usage)?;
                    let residual = expansion_residual(n, x, k).map_err(theory_usage)?;
                    Ok(ResidualRow {
                        n,
                        x,
                        k,
                        delta_n,
                        residual,
                    })
                })
                .collect::<Result<_, CliError>>()?;
            emit(
                format,
                "theory.residual",
                &["n", "x", "k", "delta_n", "residual"],
                &rows,
            );
            Ok(())
        }
    }
}

// -------------------------------------------------------------- estimate --

#[derive(Serialize)]
struct EstimateRow {
    method: Method,
    n: usize,
    value: f64,
    std_error: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    iterations: Option<u32>,
    seed: u64,
}

impl CsvRow for EstimateRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.method.to_string(),
            self.n.to_string(),
            self.value.to_string(),
            opt_cell(self.std_error),
            opt_cell(self.ci_lo),
            opt_cell(self.ci_hi),
            opt_cell(self.iterations),
            self.seed.to_string(),
        ]
    }
}

fn cmd_estimate(
    format: Format,
    path: &std::path::Path,
    method: Method,
    seed: u64,
    tukey_k: f64,
) -> Result<(), CliError> {
    let counts = input::read_counts(path)?;
    let n = counts.len();
    let sample = CountSample::new(counts).map_err(|e| CliError::Input(e.to_string()))?;
    let est: Estimate = match method {
        Method::Jittered => lambda_jittered(&sample, seed),
        Method::Mle => lambda_mle(&sample),
        Method::MedianRaw => lambda_median_raw(&sample),
        Method::Tukey => {
            let cfg = TukeyConfig {
                k: tukey_k,
                ..TukeyConfig::default()
            };
            let init = lambda_jittered(&sample, seed).value;
            tukey_estimate(&sample, &cfg, Some(init))
                .map_err(|e| CliError::Numeric(e.to_string()))?
        }
    };
    let row = EstimateRow {
        method,
        n,
        value: est.value,
        std_error: est.std_error,
        ci_lo: est.ci95.map(|c| c.0),
        ci_hi: est.ci95.map(|c| c.1),
        iterations: est.iterations,
        seed,
    };
    emit(
        format,
        "estimate",
        &[
            "method",
            "n",
            "value",
            "std_error",
            "ci_lo",
            "ci_hi",
            "iterations",
            "seed",
        ],
        &[row],
    );
    Ok(())
}

// -------------------------------------------------------------- simulate --

#[derive(Serialize)]
struct SimRow(GridRow);

impl CsvRow for SimRow {
    fn cells(&self) -> Vec<String> {
        let r = &self.0;
        vec![
            r.lambda.to_string(),
            r.estimator.to_string(),
            r.bias.to_string(),
            r.rmse.to_string(),
            r.mean_estimate.to_string(),
            r.reps_used.to_string(),
            opt_cell(r.normality.map(|q| q.qq_slope)),
            opt_cell(r.normality.map(|q| q.qq_intercept)),
            r.wall_time_s.to_string(),
            r.sqrt_h.to_string(),
        ]
    }
}

#[allow(clippy::too_many_arguments)]
fn build_simulate_config(
    lambdas: Option<&str>,
    n: usize,
    reps: Option<u32>,
    pi: f64,
    snr: Option<f64>,
    sqrt_h: Option<u32>,
    estimators: &str,
    seed: u64,
    paper_scale: bool,
) -> Result<MonteCarloConfig, CliError> {
    let lambdas = match lambdas {
        Some(spec) => parse_rate_list(spec)?,
        None => {
            let points = if paper_scale { 100 } else { 20 };
            linspace(1.0, 10.0, points)
        }
    };
    let reps = reps.unwrap_or(if paper_scale { 10_000 } else { 2_000 });
    let contamination = if pi > 0.0 {
        let cfg = match (snr, sqrt_h) {
            (Some(db), None) => ContaminationConfig {
                pi,
                sqrt_h: 0,
                snr_target_db: Some(db),
            },
            (None, Some(s)) => ContaminationConfig {
                pi,
                sqrt_h: s,
                snr_target_db: None,
            },
            (None, None) => {
                return Err(CliError::Usage(
                    "--pi > 0 needs --snr or --sqrt-h".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "--snr and --sqrt-h are mutually exclusive".into(),
                ))
            }
        };
        Some(cfg)
    } else {
        if sqrt_h.is_some_and(|s| s > 0) {
            return Err(CliError::Usage("--sqrt-h needs --pi > 0".into()));
        }
        None
    };
    Ok(MonteCarloConfig {
        lambdas,
        n,
        reps,
        master_seed: seed,
        estimators: parse_methods(estimators)?,
        contamination,
        tukey: TukeyConfig::default(),
    })
}

fn cmd_simulate(format: Format, cfg: &MonteCarloConfig) -> Result<(), CliError> {
    let report = run_grid(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let rows: Vec<SimRow> = report.rows.into_iter().map(SimRow).collect();
    emit(
        format,
        "simulate",
        &[
            "lambda",
            "estimator",
            "bias",
            "rmse",
            "mean_estimate",
            "reps_used",
            "qq_slope",
            "qq_intercept",
            "wall_time_s",
            "sqrt_h",
        ],
        &rows,
    );
    Ok(())
}

// ----------------------------------------------------------------- bench --

#[derive(Serialize)]
struct BenchRow {
    method: Method,
    n: u64,
    seconds: Option<f64>,
}

impl CsvRow for BenchRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.method.to_string(),
            self.n.to_string(),
            opt_cell(self.seconds),
        ]
    }
}

fn cmd_bench(format: Format, cfg: &BenchConfig, star_floor: bool) -> Result<(), CliError> {
    let report = bench(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    match format {
        Format::Csv => {
            // method x size matrix, one column per requested size.
            let mut header = vec!["method".to_string()];
            header.extend(cfg.sizes.iter().map(|n| n.to_string()));
            println!("{}", header.join(","));
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let mut cells = vec![method.to_string()];
                for si in 0..cfg.sizes.len() {
                    let cell = &report.cells[mi * cfg.sizes.len() + si];
                    cells.push(match cell.mean_seconds {
                        None => "NA".to_string(),
                        Some(t) if star_floor && t < 0.05 => "0*".to_string(),
                        Some(t) => t.to_string(),
                    });
                }
                println!("{}", cells.join(","));
            }
        }
        Format::Json => {
            let rows: Vec<BenchRow> = report
                .cells
                .iter()
                .map(|c| BenchRow {
                    method: c.method,
                    n: c.n,
                    seconds: c.mean_seconds,
                })
                .collect();
            let doc = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "command": "bench",
                "rows": rows,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
    }
    Ok(())
}

// --------------------------------------------------------------- parsing --

fn linspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![a];
    }
    let step = (b - a) / (points - 1) as f64;
    (0..points).map(|i| a + i as f64 * step).collect()
}

/// A:B:STEP with both endpoints included (up to rounding of the last step).
fn parse_rate_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "grid must be A:B:STEP, got {spec:?}"
        )));
    }
    let a: f64 = parse_f64(parts[0])?;
    let b: f64 = parse_f64(parts[1])?;
    let step: f64 = parse_f64(parts[2])?;
    if !(step > 0.0) || !(a <= b) {
        return Err(CliError::Usage(format!(
            "grid needs A <= B and STEP > 0, got {spec:?}"
        )));
    }
    let count = ((b - a) / step + 1e-6).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = a + i as f64 * step;
            if (v - b).abs() < step * 1e-6 {
                b
            } else {
                v
            }
        })
        .collect())
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{s:?} is not a number")))
}

/// A single rate, a comma list, or A:B:STEP.
fn parse_rate_list(spec: &str) -> Result<Vec<f64>, CliError> {
    if spec.contains(':') {
        return parse_rate_grid(spec);
    }
    spec.split(',').map(parse_f64).collect()
}

fn parse_u64_list(spec: &str) -> Result<Vec<u64>, CliError> {
    spec.split(',')
        .map(|s| {
            let v = parse_f64(s)?;
            if v < 1.0 || v.fract() != 0.0 {
                return Err(CliError::Usage(format!(
                    "{s:?} is not a positive integer"
                )));
            }
            Ok(v as u64)
        })
        .collect()
}

/// Sizes accept scientific notation (1e6) and must be whole numbers.
fn parse_sizes(spec: &str) -> Result<Vec<u64>, CliError> {
    spec.split(',')
        .map(|s| {
            let v = parse_f64(s)?;
            if v < 1.0 || v.fract() != 0.0 || v > 1e12 {
                return Err(CliError::Usage(format!("{s:?} is not a valid size")));
            }
            Ok(v as u64)
        })
        .collect()
}

fn parse_methods(spec: &str) -> Result<Vec<Method>, CliError> {
    if spec == "all" {
        return Ok(vec![
            Method::Jittered,
            Method::Mle,
            Method::MedianRaw,
            Method::Tukey,
        ]);
    }
    let mut methods = Vec::new();
    for part in spec.split(',') {
        let m: Method = part
            .trim()
            .parse()
            .map_err(|e: String| CliError::Usage(e))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(CliError::Usage("no estimators given".into()));
    }
    Ok(methods)
}
