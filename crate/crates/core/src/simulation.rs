//! Reproducible Monte Carlo harness: exact Poisson sampling, the
//! additive-outlier contamination model, an estimator-comparison grid, and a
//! wall-clock benchmark.
//!
//! Every replication draws from substreams keyed by
//! (master seed, rate index, replication, purpose), so reports are bit
//! identical for a given config no matter how many threads run the
//! replication loop: parallel workers fill an indexed result vector and the
//! reduction is a fixed-order pairwise sum. Per-row wall times are the one
//! exception; they are measured, not derived.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::estimators::{
    lambda_jittered, lambda_median_raw, lambda_mle, tukey_estimate, CountSample, Method,
    TukeyConfig,
};
use crate::poisson::{integer_median, pmf, Intensity};
use crate::rng::{mix64, substream, Stream, SUBSTREAM_SHIFT};

/// Substream purposes within one (rate, replication) pair.
const PURPOSE_SAMPLE: u64 = 0;
const PURPOSE_JITTER: u64 = 1;
const PURPOSE_CONTAMINATION: u64 = 2;
/// Ids are spaced by this; one slot is spare.
const PURPOSES_PER_PAIR: u64 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Exact Poisson draw: sequential inversion for small rates, transformed
/// rejection with squeeze (PTRS) above 30.
pub fn poisson_sampler(lambda: f64, stream: &mut Stream) -> u32 {
    assert!(
        lambda > 0.0 && lambda.is_finite(),
        "rate must be positive and finite, got {lambda}"
    );
    if lambda <= 30.0 {
        let mut u = stream.next_open01();
        let mut p = (-lambda).exp();
        let mut k = 0u32;
        let cap = (lambda + 40.0 * lambda.sqrt() + 60.0) as u32;
        while u > p && k < cap {
            u -= p;
            k += 1;
            p *= lambda / k as f64;
        }
        k
    } else {
        debug_assert!(lambda < 4e9, "count would overflow u32");
        let b = 0.931 + 2.53 * lambda.sqrt();
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);
        let ln_lam = lambda.ln();
        loop {
            let u = stream.next_open01() - 0.5;
            let mut v = stream.next_open01();
            let us = 0.5 - u.abs();
            let kf = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
            if us >= 0.07 && v <= v_r {
                return kf as u32;
            }
            if kf < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            v = (v * inv_alpha / (a / (us * us) + b)).ln();
            if v <= kf * ln_lam - lambda - ln_gamma(kf + 1.0) {
                return kf as u32;
            }
        }
    }
}

/// Additive-outlier model settings: each count independently gains
/// `+sqrt_h` with probability `pi`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContaminationConfig {
    /// Outlier proportion, in [0, 1).
    pub pi: f64,
    /// Integer outlier shift; derived from `snr_target_db` when that is set.
    pub sqrt_h: u32,
    /// Target signal-to-noise ratio in decibels; when present, `sqrt_h` is
    /// derived per rate.
    pub snr_target_db: Option<f64>,
}

impl ContaminationConfig {
    fn validate(&self) -> Result<(), SimulationError> {
        if !(0.0..1.0).contains(&self.pi) {
            return Err(SimulationError::InvalidConfig(format!(
                "pi must lie in [0, 1), got {}",
                self.pi
            )));
        }
        if self.pi == 0.0 && self.sqrt_h != 0 {
            return Err(SimulationError::InvalidConfig(
                "sqrt_h must be 0 when pi = 0".into(),
            ));
        }
        Ok(())
    }
}

/// The integer `s >= 1` whose outlier shift `s^2` comes closest to the target
/// signal-to-noise ratio `10 log10(lambda / (s^2 pi (1 - pi)))` in decibels;
/// ties go to the smaller s. Degenerate `pi = 0` yields 0.
pub fn solve_h_from_snr(lambda: f64, pi: f64, snr_target_db: f64) -> Result<u32, SimulationError> {
    if pi == 0.0 {
        return Ok(0);
    }
    if !(0.0..1.0).contains(&pi) || !(lambda > 0.0) {
        return Err(SimulationError::InvalidConfig(format!(
            "need lambda > 0 and pi in [0, 1), got lambda={lambda} pi={pi}"
        )));
    }
    let gap = |s: u64| {
        let h = (s * s) as f64;
        (10.0 * (lambda / (h * pi * (1.0 - pi))).log10() - snr_target_db).abs()
    };
    // The dB gap is monotone in |log s - log s*|, so only the integers
    // around the real-valued solution compete.
    let s_real = (lambda / (pi * (1.0 - pi) * 10f64.powf(snr_target_db / 10.0))).sqrt();
    let center = s_real.floor().max(1.0) as u64;
    let mut best = u64::MAX;
    let mut best_gap = f64::INFINITY;
    for s in center.saturating_sub(2).max(1)..=center + 2 {
        let g = gap(s);
        if g < best_gap || (g == best_gap && s < best) {
            best = s;
            best_gap = g;
        }
    }
    Ok(u32::try_from(best).unwrap_or(u32::MAX))
}

fn contaminate_with_flags(counts: &[u32], keep: &[bool], sqrt_h: u32) -> Vec<u32> {
    counts
        .iter()
        .zip(keep)
        .map(|(&c, &k)| if k { c } else { c.saturating_add(sqrt_h) })
        .collect()
}

/// Apply the additive-outlier model. With `pi = 0` or `sqrt_h = 0` the input
/// is returned unchanged and the stream is not consumed.
pub fn contaminate(
    sample: &CountSample,
    cfg: &ContaminationConfig,
    stream: &mut Stream,
) -> CountSample {
    if cfg.pi == 0.0 || cfg.sqrt_h == 0 {
        return sample.clone();
    }
    let keep: Vec<bool> = (0..sample.len())
        .map(|_| stream.next_open01() >= cfg.pi)
        .collect();
    CountSample::new(contaminate_with_flags(sample.counts(), &keep, cfg.sqrt_h))
        .expect("same length as input")
}

/// Monte Carlo grid settings.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloConfig {
    pub lambdas: Vec<f64>,
    pub n: usize,
    pub reps: u32,
    pub master_seed: u64,
    /// Estimators to run, in reporting order.
    pub estimators: Vec<Method>,
    pub contamination: Option<ContaminationConfig>,
    /// Settings forwarded to the Tukey estimator when it is requested.
    pub tukey: TukeyConfig,
}

impl MonteCarloConfig {
    fn validate(&self) -> Result<(), SimulationError> {
        if self.lambdas.is_empty() {
            return Err(SimulationError::InvalidConfig("no rates given".into()));
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(SimulationError::InvalidConfig(
                "rates must be positive and finite".into(),
            ));
        }
        if self.n == 0 {
            return Err(SimulationError::InvalidConfig("n must be >= 1".into()));
        }
        if self.reps == 0 {
            return Err(SimulationError::InvalidConfig("reps must be >= 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(SimulationError::InvalidConfig("no estimators given".into()));
        }
        let pairs = self.lambdas.len() as u64 * self.reps as u64;
        if pairs * PURPOSES_PER_PAIR >= 1 << (64 - SUBSTREAM_SHIFT) {
            return Err(SimulationError::InvalidConfig(format!(
                "lambdas x reps = {pairs} exceeds the stream id space"
            )));
        }
        if let Some(c) = &self.contamination {
            c.validate()?;
        }
        Ok(())
    }
}

/// Normality diagnostics of the standardized jittered-median deviations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Normality {
    pub mean: f64,
    pub sd: f64,
    /// Slope and intercept of the normal probability plot's fitted line
    /// (sorted deviations regressed on standard-normal quantiles).
    pub qq_slope: f64,
    pub qq_intercept: f64,
}

/// One (rate, estimator) cell of the grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridRow {
    pub lambda: f64,
    pub estimator: Method,
    pub bias: f64,
    pub rmse: f64,
    pub mean_estimate: f64,
    pub reps_used: u32,
    pub failures: u32,
    pub normality: Option<Normality>,
    /// Effective outlier shift at this rate (0 without contamination).
    pub sqrt_h: u32,
    /// Total seconds spent inside this estimator across replications.
    /// Measured, so excluded from determinism guarantees.
    pub wall_time_s: f64,
}

/// Monte Carlo results keyed by (rate, estimator).
#[derive(Debug, Clone, Serialize)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    pub n: usize,
    pub reps: u32,
}

/// Fixed-order pairwise sum: deterministic and accurate for long
/// accumulations.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

struct RepOutcome {
    /// Per requested estimator: the estimate, or None on failure.
    values: Vec<Option<f64>>,
    /// Seconds spent per estimator.
    elapsed: Vec<f64>,
    /// Standardized deviation of the jittered estimate, when requested.
    delta: Option<f64>,
}

/// Run the Monte Carlo grid.
///
/// Within one replication every estimator sees the same sample, which keeps
/// their comparison paired. Tukey starts from that replication's jittered
/// estimate. The replication loop runs on the current rayon pool.
pub fn run_grid(cfg: &MonteCarloConfig) -> Result<GridReport, SimulationError> {
    cfg.validate()?;
    let base = mix64(cfg.master_seed);
    let want_delta = cfg.estimators.contains(&Method::Jittered);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");

    let mut rows = Vec::with_capacity(cfg.lambdas.len() * cfg.estimators.len());
    for (lambda_idx, &lambda) in cfg.lambdas.iter().enumerate() {
        let sqrt_h = match &cfg.contamination {
            Some(c) if c.pi > 0.0 => match c.snr_target_db {
                Some(db) => solve_h_from_snr(lambda, c.pi, db)?,
                None => c.sqrt_h,
            },
            _ => 0,
        };
        let contamination = cfg.contamination.map(|c| ContaminationConfig {
            sqrt_h,
            ..c
        });

        let outcomes: Vec<RepOutcome> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let pair = lambda_idx as u64 * cfg.reps as u64 + rep as u64;
                let id = pair * PURPOSES_PER_PAIR;
                let mut sample_stream = Stream::new(substream(base, id + PURPOSE_SAMPLE));
                let jitter_seed = substream(base, id + PURPOSE_JITTER);

                let counts: Vec<u32> = (0..cfg.n)
                    .map(|_| poisson_sampler(lambda, &mut sample_stream))
                    .collect();
                let mut sample = CountSample::new(counts).expect("n >= 1");
                if let Some(c) = &contamination {
                    let mut stream =
                        Stream::new(substream(base, id + PURPOSE_CONTAMINATION));
                    sample = contaminate(&sample, c, &mut stream);
                }

                // The jittered estimate doubles as Tukey's starting value.
                let needs_jittered = want_delta
                    || cfg.estimators.contains(&Method::Tukey)
                    || cfg.estimators.contains(&Method::Jittered);
                let jittered = needs_jittered.then(|| lambda_jittered(&sample, jitter_seed));

                let mut values = Vec::with_capacity(cfg.estimators.len());
                let mut elapsed = Vec::with_capacity(cfg.estimators.len());
                let mut delta = None;
                for &method in &cfg.estimators {
                    let t0 = Instant::now();
                    let value = match method {
                        Method::Jittered => {
                            let est = jittered.as_ref().expect("computed above");
                            delta = crate::estimators::delta_lambda_stat(lambda, est, cfg.n).ok();
                            Some(est.value)
                        }
                        Method::Mle => Some(lambda_mle(&sample).value),
                        Method::MedianRaw => Some(lambda_median_raw(&sample).value),
                        Method::Tukey => {
                            let init = jittered.as_ref().map(|e| e.value);
                            tukey_estimate(&sample, &cfg.tukey, init).ok().map(|e| e.value)
                        }
                    };
                    elapsed.push(t0.elapsed().as_secs_f64());
                    values.push(value);
                }
                RepOutcome {
                    values,
                    elapsed,
                    delta,
                }
            })
            .collect();

        for (est_idx, &estimator) in cfg.estimators.iter().enumerate() {
            let estimates: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.values[est_idx])
                .collect();
            let reps_used = estimates.len() as u32;
            let failures = cfg.reps - reps_used;
            let wall_time_s = outcomes.iter().map(|o| o.elapsed[est_idx]).sum();

            let (bias, rmse, mean_estimate) = if estimates.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let m = pairwise_sum(&estimates) / reps_used as f64;
                let sq: Vec<f64> = estimates
                    .iter()
                    .map(|v| (v - lambda) * (v - lambda))
                    .collect();
                let msq = pairwise_sum(&sq) / reps_used as f64;
                (m - lambda, msq.sqrt(), m)
            };

            let normality = if estimator == Method::Jittered {
                let deltas: Vec<f64> = outcomes.iter().filter_map(|o| o.delta).collect();
                normality_of(&deltas, &normal)
            } else {
                None
            };

            rows.push(GridRow {
                lambda,
                estimator,
                bias,
                rmse,
                mean_estimate,
                reps_used,
                failures,
                normality,
                sqrt_h,
                wall_time_s,
            });
        }
    }

    Ok(GridReport {
        rows,
        n: cfg.n,
        reps: cfg.reps,
    })
}

fn normality_of(deltas: &[f64], normal: &Normal) -> Option<Normality> {
    let r = deltas.len();
    if r < 3 {
        return None;
    }
    let rf = r as f64;
    let mean = pairwise_sum(deltas) / rf;
    let centered_sq: Vec<f64> = deltas.iter().map(|d| (d - mean) * (d - mean)).collect();
    let sd = (pairwise_sum(&centered_sq) / (rf - 1.0)).sqrt();

    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let quantiles: Vec<f64> = (0..r)
        .map(|i| normal.inverse_cdf((i as f64 + 0.5) / rf))
        .collect();
    let q_mean = pairwise_sum(&quantiles) / rf;
    let mut s_qq = 0.0;
    let mut s_qd = 0.0;
    for (q, d) in quantiles.iter().zip(&sorted) {
        s_qq += (q - q_mean) * (q - q_mean);
        s_qd += (q - q_mean) * (d - mean);
    }
    let slope = s_qd / s_qq;
    Some(Normality {
        mean,
        sd,
        qq_slope: slope,
        qq_intercept: mean - slope * q_mean,
    })
}

/// Benchmark settings.
#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    /// Sample sizes, strictly ascending.
    pub sizes: Vec<u64>,
    pub lambda: f64,
    pub methods: Vec<Method>,
    pub reps: u32,
    /// Estimated footprints beyond this refuse to run (NA cell).
    pub memory_budget_bytes: u64,
    pub master_seed: u64,
}

/// Mean wall time of one estimator at one size; None when the footprint
/// estimate exceeded the budget.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BenchCell {
    pub method: Method,
    pub n: u64,
    pub mean_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
    pub reps: u32,
}

/// Estimated peak footprint in bytes of running `method` on n counts:
/// the u32 data plus method scratch. Below the histogram threshold the
/// medians copy the data (u32 scratch, or n jittered f64 values); above it
/// they hold a count table plus, for the jittered median, one histogram bin
/// of jitters. The Tukey solver keeps an f64 copy of the sample.
pub fn bench_footprint_bytes(method: Method, n: u64, lambda: f64) -> u64 {
    let data = 4 * n;
    let hist_path = n >= (1 << 18);
    let table = 8 * (lambda + 10.0 * lambda.sqrt() + 20.0) as u64;
    let aux = match method {
        Method::Mle => 0,
        Method::MedianRaw => {
            if hist_path {
                table
            } else {
                4 * n
            }
        }
        Method::Jittered => {
            if hist_path {
                let li = Intensity::new(lambda).expect("validated");
                let mode_mass = pmf(li, integer_median(li));
                let bin = (1.5 * mode_mass * n as f64) as u64;
                8 * bin + table
            } else {
                8 * n
            }
        }
        Method::Tukey => 8 * n,
    };
    data + aux
}

/// Time each estimator over each size. Data are generated once per
/// (replication, size) and reused across methods; the timed section covers
/// exactly one estimator evaluation (including jitter generation for the
/// jittered median) and runs serially.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport, SimulationError> {
    if cfg.sizes.is_empty() || cfg.methods.is_empty() || cfg.reps == 0 {
        return Err(SimulationError::InvalidConfig(
            "sizes, methods and reps must be nonempty".into(),
        ));
    }
    if !cfg.sizes.windows(2).all(|w| w[0] < w[1]) {
        return Err(SimulationError::InvalidConfig(
            "sizes must be strictly ascending".into(),
        ));
    }
    if !(cfg.lambda > 0.0) || !cfg.lambda.is_finite() {
        return Err(SimulationError::InvalidConfig(format!(
            "rate must be positive and finite, got {}",
            cfg.lambda
        )));
    }

    let base = mix64(cfg.master_seed);
    let mut totals = vec![0.0f64; cfg.methods.len() * cfg.sizes.len()];
    let mut runnable = vec![false; cfg.methods.len() * cfg.sizes.len()];
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (si, &n) in cfg.sizes.iter().enumerate() {
            runnable[mi * cfg.sizes.len() + si] =
                bench_footprint_bytes(method, n, cfg.lambda) <= cfg.memory_budget_bytes;
        }
    }

    for rep in 0..cfg.reps as u64 {
        for (si, &n) in cfg.sizes.iter().enumerate() {
            if !cfg
                .methods
                .iter()
                .enumerate()
                .any(|(mi, _)| runnable[mi * cfg.sizes.len() + si])
            {
                continue;
            }
            let pair = rep * cfg.sizes.len() as u64 + si as u64;
            let id = pair * PURPOSES_PER_PAIR;
            let mut stream = Stream::new(substream(base, id + PURPOSE_SAMPLE));
            let jitter_seed = substream(base, id + PURPOSE_JITTER);
            let counts: Vec<u32> = (0..n)
                .map(|_| poisson_sampler(cfg.lambda, &mut stream))
                .collect();
            let sample = CountSample::new(counts).expect("n >= 1");

            for (mi, &method) in cfg.methods.iter().enumerate() {
                if !runnable[mi * cfg.sizes.len() + si] {
                    continue;
                }
                let t0 = Instant::now();
                match method {
                    Method::Jittered => {
                        std::hint::black_box(lambda_jittered(&sample, jitter_seed).value);
                    }
                    Method::Mle => {
                        std::hint::black_box(lambda_mle(&sample).value);
                    }
                    Method::MedianRaw => {
                        std::hint::black_box(lambda_median_raw(&sample).value);
                    }
                    Method::Tukey => {
                        let est = tukey_estimate(&sample, &TukeyConfig::default(), None);
                        std::hint::black_box(est.map(|e| e.value).unwrap_or(f64::NAN));
                    }
                }
                totals[mi * cfg.sizes.len() + si] += t0.elapsed().as_secs_f64();
            }
        }
    }

    let mut cells = Vec::with_capacity(cfg.methods.len() * cfg.sizes.len());
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (si, &n) in cfg.sizes.iter().enumerate() {
            let idx = mi * cfg.sizes.len() + si;
            cells.push(BenchCell {
                method,
                n,
                mean_seconds: runnable[idx].then(|| totals[idx] / cfg.reps as f64),
            });
        }
    }
    Ok(BenchReport {
        cells,
        reps: cfg.reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_tiny_rate_is_zero() {
        let mut stream = Stream::new(1);
        for _ in 0..1000 {
            assert_eq!(poisson_sampler(1e-9, &mut stream), 0);
        }
    }

    fn mean_and_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn sampler_moments_inversion_regime() {
        let mut stream = Stream::new(2);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| poisson_sampler(5.0, &mut stream) as f64)
            .collect();
        let (mean, var) = mean_and_var(&draws);
        // 4-sigma bands: mean +- 4 sqrt(lambda/n), var +- 4 sqrt((lambda + 2 lambda^2)/n).
        assert!((mean - 5.0).abs() < 0.009, "mean {mean}");
        assert!((var - 5.0).abs() < 0.030, "var {var}");
    }

    #[test]
    fn sampler_moments_rejection_regime() {
        let mut stream = Stream::new(3);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| poisson_sampler(100.0, &mut stream) as f64)
            .collect();
        let (mean, var) = mean_and_var(&draws);
        assert!((mean - 100.0).abs() < 0.04, "mean {mean}");
        assert!((var - 100.0).abs() < 0.57, "var {var}");
    }

    #[test]
    fn sampler_is_deterministic() {
        let a: Vec<u32> = {
            let mut s = Stream::new(77);
            (0..100).map(|_| poisson_sampler(12.0, &mut s)).collect()
        };
        let b: Vec<u32> = {
            let mut s = Stream::new(77);
            (0..100).map(|_| poisson_sampler(12.0, &mut s)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn snr_shift_examples() {
        assert_eq!(solve_h_from_snr(5.0, 0.1, -10.0).unwrap(), 24);
        assert_eq!(solve_h_from_snr(5.0, 0.0, -10.0).unwrap(), 0);
        assert_eq!(solve_h_from_snr(5.0, 0.5, -10.0).unwrap(), 14);
        assert!(solve_h_from_snr(5.0, 1.2, -10.0).is_err());
    }

    #[test]
    fn snr_shift_matches_enumeration_oracle() {
        let enumerate = |lambda: f64, pi: f64, target: f64| -> u32 {
            let mut best = 1u64;
            let mut best_gap = f64::INFINITY;
            for s in 1..=10_000u64 {
                let h = (s * s) as f64;
                let g = (10.0 * (lambda / (h * pi * (1.0 - pi))).log10() - target).abs();
                if g < best_gap {
                    best = s;
                    best_gap = g;
                }
            }
            best as u32
        };
        for &lambda in &[0.5, 1.0, 5.0, 17.0, 120.0] {
            for &pi in &[0.01, 0.05, 0.1, 0.2, 0.5, 0.9] {
                for &target in &[-20.0, -10.0, -3.0, 0.0, 6.0] {
                    assert_eq!(
                        solve_h_from_snr(lambda, pi, target).unwrap(),
                        enumerate(lambda, pi, target),
                        "lambda={lambda} pi={pi} target={target}"
                    );
                }
            }
        }
    }

    #[test]
    fn contaminate_forced_flags() {
        // keep = (epsilon == 1); the middle observation is the outlier.
        let out = contaminate_with_flags(&[1, 2, 3], &[true, false, true], 5);
        assert_eq!(out, vec![1, 7, 3]);
    }

    #[test]
    fn contaminate_degenerate_is_identity() {
        let sample = CountSample::new(vec![3, 1, 4, 1, 5]).unwrap();
        let cfg = ContaminationConfig {
            pi: 0.0,
            sqrt_h: 0,
            snr_target_db: None,
        };
        let mut stream = Stream::new(5);
        let out = contaminate(&sample, &cfg, &mut stream);
        assert_eq!(out.counts(), sample.counts());
    }

    #[test]
    fn contaminated_fraction_in_binomial_band() {
        let n = 1_000_000;
        let sample = CountSample::new(vec![0u32; n]).unwrap();
        let cfg = ContaminationConfig {
            pi: 0.1,
            sqrt_h: 7,
            snr_target_db: None,
        };
        let mut stream = Stream::new(8);
        let out = contaminate(&sample, &cfg, &mut stream);
        let hits = out.counts().iter().filter(|&&c| c == 7).count() as f64;
        let frac = hits / n as f64;
        assert!((frac - 0.1).abs() < 0.0012, "fraction {frac}");
    }

    fn quick_config() -> MonteCarloConfig {
        MonteCarloConfig {
            lambdas: vec![5.0],
            n: 50,
            reps: 3,
            master_seed: 9,
            estimators: vec![Method::Mle],
            contamination: None,
            tukey: TukeyConfig::default(),
        }
    }

    #[test]
    fn grid_shape_single_cell() {
        let report = run_grid(&quick_config()).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.reps_used, 3);
        assert_eq!(row.failures, 0);
        assert_eq!(row.estimator, Method::Mle);
        assert!(row.normality.is_none());
        assert!(row.rmse >= row.bias.abs());
    }

    #[test]
    fn grid_rejects_bad_configs() {
        let mut cfg = quick_config();
        cfg.lambdas.clear();
        assert!(run_grid(&cfg).is_err());
        let mut cfg = quick_config();
        cfg.reps = 0;
        assert!(run_grid(&cfg).is_err());
        let mut cfg = quick_config();
        cfg.n = 0;
        assert!(run_grid(&cfg).is_err());
        let mut cfg = quick_config();
        cfg.estimators.clear();
        assert!(run_grid(&cfg).is_err());
        let mut cfg = quick_config();
        cfg.contamination = Some(ContaminationConfig {
            pi: 0.0,
            sqrt_h: 3,
            snr_target_db: None,
        });
        assert!(run_grid(&cfg).is_err());
    }

    #[test]
    fn grid_mle_rmse_matches_theory() {
        let cfg = MonteCarloConfig {
            lambdas: vec![5.0],
            n: 200,
            reps: 10_000,
            master_seed: 31415,
            estimators: vec![Method::Mle],
            contamination: None,
            tukey: TukeyConfig::default(),
        };
        let report = run_grid(&cfg).unwrap();
        let rmse = report.rows[0].rmse;
        let theoretical = (5.0f64 / 200.0).sqrt();
        assert!(
            (rmse - theoretical).abs() <= 0.05 * theoretical,
            "rmse {rmse}"
        );
    }

    #[test]
    fn grid_is_thread_count_invariant() {
        let cfg = MonteCarloConfig {
            lambdas: vec![2.0, 7.5],
            n: 64,
            reps: 200,
            master_seed: 123,
            estimators: vec![Method::Jittered, Method::Mle, Method::MedianRaw, Method::Tukey],
            contamination: Some(ContaminationConfig {
                pi: 0.05,
                sqrt_h: 0,
                snr_target_db: Some(-10.0),
            }),
            tukey: TukeyConfig::default(),
        };
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_grid(&cfg).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.bias.to_bits(), rb.bias.to_bits());
            assert_eq!(ra.rmse.to_bits(), rb.rmse.to_bits());
            assert_eq!(ra.mean_estimate.to_bits(), rb.mean_estimate.to_bits());
            assert_eq!(ra.reps_used, rb.reps_used);
            assert_eq!(ra.sqrt_h, rb.sqrt_h);
            match (ra.normality, rb.normality) {
                (None, None) => {}
                (Some(na), Some(nb)) => {
                    assert_eq!(na.mean.to_bits(), nb.mean.to_bits());
                    assert_eq!(na.sd.to_bits(), nb.sd.to_bits());
                    assert_eq!(na.qq_slope.to_bits(), nb.qq_slope.to_bits());
                    assert_eq!(na.qq_intercept.to_bits(), nb.qq_intercept.to_bits());
                }
                other => panic!("normality mismatch: {other:?}"),
            }
        }
    }

    #[test]
    fn grid_records_estimator_failures() {
        // Tiny rate and sample: many replications are all zeros, which the
        // Tukey estimator rejects.
        let cfg = MonteCarloConfig {
            lambdas: vec![0.05],
            n: 3,
            reps: 50,
            master_seed: 7,
            estimators: vec![Method::Tukey, Method::Mle],
            contamination: None,
            tukey: TukeyConfig::default(),
        };
        let report = run_grid(&cfg).unwrap();
        let tukey_row = &report.rows[0];
        assert_eq!(tukey_row.estimator, Method::Tukey);
        assert!(tukey_row.failures > 0);
        assert_eq!(tukey_row.reps_used + tukey_row.failures, 50);
        let mle_row = &report.rows[1];
        assert_eq!(mle_row.failures, 0);
    }

    #[test]
    fn bench_smoke_all_methods() {
        let cfg = BenchConfig {
            sizes: vec![10_000],
            lambda: std::f64::consts::PI,
            methods: vec![Method::Mle, Method::MedianRaw, Method::Jittered, Method::Tukey],
            reps: 3,
            memory_budget_bytes: 10 << 30,
            master_seed: 1,
        };
        let report = bench(&cfg).unwrap();
        assert_eq!(report.cells.len(), 4);
        let times: Vec<f64> = report
            .cells
            .iter()
            .map(|c| c.mean_seconds.unwrap())
            .collect();
        assert!(times.iter().all(|t| t.is_finite() && *t >= 0.0));
        // MLE is the cheapest.
        let mle_time = report
            .cells
            .iter()
            .find(|c| c.method == Method::Mle)
            .unwrap()
            .mean_seconds
            .unwrap();
        assert!(times.iter().all(|&t| mle_time <= t + 1e-9));
    }

    #[test]
    fn bench_respects_memory_budget() {
        let cfg = BenchConfig {
            sizes: vec![10_000],
            lambda: 3.0,
            methods: vec![Method::Mle, Method::Tukey],
            reps: 1,
            memory_budget_bytes: 50_000, // fits 4n data only
            master_seed: 1,
        };
        let report = bench(&cfg).unwrap();
        let mle = report.cells.iter().find(|c| c.method == Method::Mle).unwrap();
        let tukey = report.cells.iter().find(|c| c.method == Method::Tukey).unwrap();
        assert!(mle.mean_seconds.is_some());
        assert!(tukey.mean_seconds.is_none(), "12n exceeds the budget");
    }

    #[test]
    fn bench_rejects_unsorted_sizes() {
        let cfg = BenchConfig {
            sizes: vec![100, 10],
            lambda: 3.0,
            methods: vec![Method::Mle],
            reps: 1,
            memory_budget_bytes: 10 << 30,
            master_seed: 1,
        };
        assert!(bench(&cfg).is_err());
    }
}
