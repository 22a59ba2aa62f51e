//! Estimators of the Poisson rate, built for samples up to 1e8 counts.
//!
//! The jittered-median estimator is `median(counts + U(0,1) jitter) - 1/3`;
//! its sampling error is asymptotically normal with scale
//! `sigma = 1 / (2 P(N = floor(lambda + 1/3)))`, approximately
//! `sqrt(pi lambda / 2)`. The MLE (sample mean) and the raw integer median
//! serve as baselines, and Tukey's modified M-estimator as the robust
//! competitor: a redescending objective with a bias-correction term `a`
//! recalibrated at every outer iteration so the objective is centred under
//! the current rate.
//!
//! The sample median follows the averaged-pair convention for even n (what
//! `median` in R or NumPy computes; the estimator recipe and its sampling
//! theory assume it, since the lower-of-two order statistic carries a
//! systematic -1/(2 n f) offset). It is computed by in-place selection.
//! Above the histogram threshold (2^18 counts) the jittered median switches to a histogram fast
//! path that selects the needed order statistics among single bins of
//! jitters, regenerating them from (seed, index) instead of storing n
//! uniforms; the result is bit-identical to the naive path.

use serde::Serialize;
use thiserror::Error;

use crate::poisson::{pmf, Intensity};
use crate::rng::{stream_nth, u64_to_open01};

/// Jitter seed used for Tukey's starting value when the caller supplies no
/// initial estimate.
const DEFAULT_INIT_SEED: u64 = 0x6a69_746d_6564;

/// Sample size from which the jittered median takes the histogram path.
const HIST_PATH_MIN: usize = 1 << 18;

/// Largest count value the histogram path will allocate a table for.
const HIST_MAX_COUNT: u32 = 1 << 30;

/// Floor applied to Tukey iterates; the M-equation is degenerate as the rate
/// approaches zero (every residual leaves the cutoff window).
const TUKEY_MIN_LAMBDA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("sample must contain at least one observation")]
    EmptySample,
    #[error("estimate {0} is not above -1/3, so floor(estimate + 1/3) is negative")]
    SigmaOutOfDomain(f64),
    #[error("pmf underflows at estimate {0}; dispersion not estimable")]
    SigmaNotEstimable(f64),
    #[error("statistic is defined for the jittered estimator, got {0}")]
    MethodMismatch(Method),
    #[error("histogram over counts up to {0} exceeds the memory guard")]
    HistogramTooLarge(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sample is all zeros; the M-estimator needs a positive count")]
    AllZeroSample,
    #[error("calibration found no sign change of the expected objective over [-k, k]")]
    CalibrationFailed,
    #[error("no sign change of the M-equation after 60 bracket doublings around {0}")]
    NoBracket(f64),
    #[error("fixed point not reached after {iterations} iterations; last iterate {last}")]
    NotConverged { last: f64, iterations: u32 },
}

/// Which estimator produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Jittered,
    Mle,
    #[serde(rename = "median")]
    MedianRaw,
    Tukey,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Jittered => write!(f, "jittered"),
            Method::Mle => write!(f, "mle"),
            Method::MedianRaw => write!(f, "median"),
            Method::Tukey => write!(f, "tukey"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jittered" => Ok(Method::Jittered),
            "mle" => Ok(Method::Mle),
            "median" => Ok(Method::MedianRaw),
            "tukey" => Ok(Method::Tukey),
            other => Err(format!(
                "unknown method {other:?}; expected jittered, mle, median or tukey"
            )),
        }
    }
}

/// A nonempty sample of nonnegative integer counts.
#[derive(Debug, Clone)]
pub struct CountSample {
    counts: Vec<u32>,
}

impl CountSample {
    pub fn new(counts: Vec<u32>) -> Result<Self, EstimatorError> {
        if counts.is_empty() {
            return Err(EstimatorError::EmptySample);
        }
        Ok(Self { counts })
    }

    #[inline]
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }
}

/// Counts together with their uniform jitters; the jitters are a pure
/// function of (seed, index) and can be regenerated at any time.
#[derive(Debug, Clone)]
pub struct JitteredSample {
    counts: Vec<u32>,
    jitters: Vec<f64>,
    jitter_seed: u64,
}

impl JitteredSample {
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn jitters(&self) -> &[f64] {
        &self.jitters
    }

    pub fn jitter_seed(&self) -> u64 {
        self.jitter_seed
    }

    /// The jittered values `count_i + u_i`.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.counts
            .iter()
            .zip(&self.jitters)
            .map(|(&c, &u)| c as f64 + u)
    }
}

/// A point estimate with its method tag and normal-approximation error bars.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
    pub std_error: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    /// Outer fixed-point iterations (Tukey only).
    pub iterations: Option<u32>,
}

impl Estimate {
    fn new(value: f64, method: Method, std_error: Option<f64>) -> Self {
        let ci95 = std_error.map(|se| (value - 1.96 * se, value + 1.96 * se));
        Estimate {
            value,
            method,
            std_error,
            ci95,
            iterations: None,
        }
    }
}

/// Tuning for Tukey's modified M-estimator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TukeyConfig {
    /// Cutoff constant of the redescending objective.
    pub k: f64,
    /// Stop when successive rate iterates differ by no more than this.
    pub fixed_point_tol: f64,
    pub max_outer_iter: u32,
    /// Guaranteed bound on |E psi| at the returned calibration root.
    pub a_solver_tol: f64,
    /// Poisson terms below this probability are dropped from expectations.
    pub expectation_tail_eps: f64,
}

impl Default for TukeyConfig {
    fn default() -> Self {
        TukeyConfig {
            k: 6.0,
            fixed_point_tol: 1e-4,
            max_outer_iter: 100,
            a_solver_tol: 1e-10,
            expectation_tail_eps: 1e-16,
        }
    }
}

impl TukeyConfig {
    fn validate(&self) -> Result<(), EstimatorError> {
        if !(self.k > 0.0) {
            return Err(EstimatorError::InvalidConfig(format!(
                "k must be positive, got {}",
                self.k
            )));
        }
        if !(self.fixed_point_tol > 0.0) || !(self.a_solver_tol > 0.0) {
            return Err(EstimatorError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.expectation_tail_eps > 0.0) {
            return Err(EstimatorError::InvalidConfig(
                "expectation_tail_eps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The sample median: the middle value for odd n, the average of the two
/// central values for even n.
///
/// Selects in place: `values` is reordered around the central elements.
pub fn sample_median(values: &mut [f64]) -> Result<f64, EstimatorError> {
    if values.is_empty() {
        return Err(EstimatorError::EmptySample);
    }
    let n = values.len();
    let idx = n.div_ceil(2) - 1;
    let (_, lower, upper) = values.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    if n % 2 == 1 {
        return Ok(*lower);
    }
    let lower = *lower;
    let upper = upper
        .iter()
        .copied()
        .min_by(|a, b| a.total_cmp(b))
        .expect("even n >= 2 leaves an upper partition");
    Ok((lower + upper) / 2.0)
}

/// The jitter attached to observation `index` under `seed`; strictly inside
/// (0, 1).
#[inline]
pub fn jitter_at(seed: u64, index: u64) -> f64 {
    u64_to_open01(stream_nth(seed, index))
}

/// Attach uniform jitters to a sample. Deterministic in (seed, index).
pub fn jitter(sample: &CountSample, seed: u64) -> JitteredSample {
    let jitters = (0..sample.len() as u64).map(|i| jitter_at(seed, i)).collect();
    JitteredSample {
        counts: sample.counts.clone(),
        jitters,
        jitter_seed: seed,
    }
}

fn jittered_median_naive_with<F: Fn(u64) -> f64>(counts: &[u32], jitter_of: F) -> f64 {
    let mut values: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 + jitter_of(i as u64))
        .collect();
    sample_median(&mut values).expect("counts are nonempty")
}

/// Diagnostics from the histogram fast path.
#[derive(Debug, Clone, Copy)]
pub struct HistogramMedianStats {
    pub median: f64,
    /// Bytes of auxiliary allocation (histogram table + one bin of jitters).
    pub aux_bytes: usize,
}

/// Jittered median via an integer-count histogram.
///
/// Finds the bin holding each needed jittered order statistic from the count
/// histogram, then selects it among only that bin's jitters, regenerated
/// from (seed, index). Equals the naive `sample_median(counts + jitters)`
/// bit for bit: the jittered values of bin b all round within [b, b+1], so
/// concatenating the bins in count order, each sorted by jitter, sorts the
/// rounded sums too, and the even-n average is formed from the same two
/// values in the same order.
pub fn histogram_median(sample: &CountSample, seed: u64) -> Result<f64, EstimatorError> {
    histogram_median_with_stats(sample, seed).map(|s| s.median)
}

/// Bin index and within-bin rank (1-based) of the `rank`-th jittered value.
fn locate_rank(hist: &[u64], rank: u64) -> (usize, usize) {
    let mut below = 0u64;
    for (c, &h) in hist.iter().enumerate() {
        if below + h >= rank {
            return (c, (rank - below) as usize);
        }
        below += h;
    }
    unreachable!("rank <= n by construction");
}

/// Regenerated jitters of every observation whose count equals `bin`.
fn collect_bin_jitters(counts: &[u32], seed: u64, bin: usize, capacity: u64) -> Vec<f64> {
    let mut bin_jitters: Vec<f64> = Vec::with_capacity(capacity as usize);
    for (i, &c) in counts.iter().enumerate() {
        if c as usize == bin {
            bin_jitters.push(jitter_at(seed, i as u64));
        }
    }
    bin_jitters
}

/// [`histogram_median`] plus its auxiliary-memory footprint.
pub fn histogram_median_with_stats(
    sample: &CountSample,
    seed: u64,
) -> Result<HistogramMedianStats, EstimatorError> {
    let counts = sample.counts();
    let n = counts.len();

    // One pass builds the table, growing on demand; counts are
    // Poisson-scale, so growth stops after a handful of doublings.
    let mut hist: Vec<u64> = Vec::new();
    for &c in counts {
        let idx = c as usize;
        if idx >= hist.len() {
            if c >= HIST_MAX_COUNT {
                return Err(EstimatorError::HistogramTooLarge(c));
            }
            hist.resize((idx + 1).next_power_of_two(), 0);
        }
        hist[idx] += 1;
    }
    let mut aux_bytes = hist.capacity() * std::mem::size_of::<u64>();

    let rank = n.div_ceil(2) as u64;
    let (bin, local) = locate_rank(&hist, rank);
    let mut bin_jitters = collect_bin_jitters(counts, seed, bin, hist[bin]);
    aux_bytes += bin_jitters.capacity() * std::mem::size_of::<f64>();

    let (_, u, upper) = bin_jitters.select_nth_unstable_by(local - 1, |a, b| a.total_cmp(b));
    let lower_value = bin as f64 + *u;
    if n % 2 == 1 {
        return Ok(HistogramMedianStats {
            median: lower_value,
            aux_bytes,
        });
    }

    // Even n: the (rank+1)-th value usually sits in the same bin, where the
    // selection already left it as the minimum of the upper partition.
    let upper_value = match upper.iter().copied().min_by(|a, b| a.total_cmp(b)) {
        Some(u_next) => bin as f64 + u_next,
        None => {
            let (bin2, local2) = locate_rank(&hist, rank + 1);
            let mut next_jitters = collect_bin_jitters(counts, seed, bin2, hist[bin2]);
            aux_bytes += next_jitters.capacity() * std::mem::size_of::<f64>();
            let (_, u2, _) =
                next_jitters.select_nth_unstable_by(local2 - 1, |a, b| a.total_cmp(b));
            bin2 as f64 + *u2
        }
    };
    Ok(HistogramMedianStats {
        median: (lower_value + upper_value) / 2.0,
        aux_bytes,
    })
}

fn jittered_median(sample: &CountSample, seed: u64) -> f64 {
    if sample.len() >= HIST_PATH_MIN {
        if let Ok(m) = histogram_median(sample, seed) {
            return m;
        }
    }
    jittered_median_naive_with(sample.counts(), |i| jitter_at(seed, i))
}

/// The jittered-median estimator: `median(counts + jitters) - 1/3`.
pub fn lambda_jittered(sample: &CountSample, seed: u64) -> Estimate {
    let value = jittered_median(sample, seed) - 1.0 / 3.0;
    let se = sigma_hat(value)
        .ok()
        .map(|s| s / (sample.len() as f64).sqrt());
    Estimate::new(value, Method::Jittered, se)
}

/// Maximum likelihood estimator: the sample mean, with
/// `se = sqrt(value / n)`. The count sum is exact in u64.
pub fn lambda_mle(sample: &CountSample) -> Estimate {
    let n = sample.len() as f64;
    let sum: u64 = sample.counts().iter().map(|&c| u64::from(c)).sum();
    let value = sum as f64 / n;
    Estimate::new(value, Method::Mle, Some((value / n).sqrt()))
}

/// Raw sample median of the integer counts. No standard error: the discrete
/// median has no regular asymptotics, which is what jittering repairs.
///
/// Large samples go through a count histogram instead of selection; the two
/// routes agree exactly (integer order statistics).
pub fn lambda_median_raw(sample: &CountSample) -> Estimate {
    let value = if sample.len() >= HIST_PATH_MIN {
        raw_median_by_histogram(sample.counts())
            .unwrap_or_else(|| raw_median_by_selection(sample.counts()))
    } else {
        raw_median_by_selection(sample.counts())
    };
    Estimate::new(value, Method::MedianRaw, None)
}

fn raw_median_by_selection(counts: &[u32]) -> f64 {
    let mut scratch: Vec<u32> = counts.to_vec();
    let n = scratch.len();
    let idx = n.div_ceil(2) - 1;
    let (_, m, upper) = scratch.select_nth_unstable(idx);
    if n % 2 == 1 {
        *m as f64
    } else {
        let hi = *upper.iter().min().expect("even n >= 2");
        (*m as f64 + hi as f64) / 2.0
    }
}

fn raw_median_by_histogram(counts: &[u32]) -> Option<f64> {
    let n = counts.len();
    let max = *counts.iter().max().expect("nonempty");
    if max >= HIST_MAX_COUNT {
        return None;
    }
    let mut hist = vec![0u64; max as usize + 1];
    for &c in counts {
        hist[c as usize] += 1;
    }
    let rank = n.div_ceil(2) as u64;
    let mut below = 0u64;
    let mut iter = hist.iter().enumerate();
    let mut bin = 0usize;
    for (c, &h) in iter.by_ref() {
        if below + h >= rank {
            bin = c;
            break;
        }
        below += h;
    }
    if n % 2 == 1 {
        return Some(bin as f64);
    }
    // Even n: the (rank+1)-th value is in the same bin unless the rank sits
    // exactly at the bin's upper edge.
    let second = if below + hist[bin] > rank {
        bin
    } else {
        iter.find(|(_, &h)| h > 0).expect("rank + 1 <= n").0
    };
    Some((bin as f64 + second as f64) / 2.0)
}

/// `P(N = floor(v + 1/3))` at rate `v`, extended below v = 0 by the k = 0
/// closed form `exp(-v)` (the floor is 0 whenever v < 2/3).
fn pmf_at_shifted_floor(v: f64) -> f64 {
    let k = (v + 1.0 / 3.0).floor() as u64;
    if k == 0 {
        (-v).exp()
    } else {
        // k >= 1 implies v >= 2/3 > 0.
        pmf(Intensity::new(v).expect("positive by the floor bound"), k)
    }
}

/// Plug-in asymptotic scale of the jittered estimator:
/// `1 / (2 P(N_v = floor(v + 1/3)))`.
pub fn sigma_hat(lambda_hat: f64) -> Result<f64, EstimatorError> {
    if !lambda_hat.is_finite() || lambda_hat <= -1.0 / 3.0 {
        return Err(EstimatorError::SigmaOutOfDomain(lambda_hat));
    }
    let p = pmf_at_shifted_floor(lambda_hat);
    if p <= 0.0 {
        return Err(EstimatorError::SigmaNotEstimable(lambda_hat));
    }
    Ok(1.0 / (2.0 * p))
}

/// Stirling approximation of the same scale: `sqrt(pi v / 2)`.
pub fn sigma_stirling(lambda_hat: f64) -> Result<f64, EstimatorError> {
    if !(lambda_hat > 0.0) {
        return Err(EstimatorError::SigmaOutOfDomain(lambda_hat));
    }
    Ok((std::f64::consts::PI * lambda_hat / 2.0).sqrt())
}

/// The standardized deviation
/// `2 sqrt(n) (value - lambda) P(N = floor(value + 1/3))`, approximately
/// N(0, 1) under the model.
pub fn delta_lambda_stat(
    lambda_true: f64,
    estimate: &Estimate,
    n: usize,
) -> Result<f64, EstimatorError> {
    if estimate.method != Method::Jittered {
        return Err(EstimatorError::MethodMismatch(estimate.method));
    }
    let v = estimate.value;
    if !v.is_finite() || v <= -1.0 / 3.0 {
        return Err(EstimatorError::SigmaOutOfDomain(v));
    }
    let p = pmf_at_shifted_floor(v);
    if p <= 0.0 {
        return Err(EstimatorError::SigmaNotEstimable(v));
    }
    Ok(2.0 * (n as f64).sqrt() * (v - lambda_true) * p)
}

/// Tukey's modified redescending objective.
///
/// The squared bracket uses the raw standardized residual while the leading
/// factor and the cutoff indicator use the residual shifted by `a`.
pub fn tukey_psi(y: f64, lambda: f64, a: f64, k: f64) -> f64 {
    debug_assert!(lambda > 0.0);
    let r = (y - lambda) / lambda.sqrt();
    let shifted = r - a;
    if shifted.abs() > k {
        return 0.0;
    }
    let w = k * k - r * r;
    shifted * w * w
}

/// Poisson probability table covering every count whose pmf clears
/// `tail_eps`, over at least `lambda +- 12 sqrt(lambda) + 20`; the objective
/// window only reaches `|y - lambda| <~ (k + |a|) sqrt(lambda)`, far inside.
fn poisson_table(lambda: f64, tail_eps: f64) -> Vec<(f64, f64)> {
    let li = Intensity::new(lambda).expect("validated by callers");
    let sd = lambda.sqrt();
    let mut lo = (lambda - 12.0 * sd - 20.0).max(0.0).floor() as u64;
    let mut hi = (lambda + 12.0 * sd + 20.0).ceil() as u64;
    while lo > 0 && pmf(li, lo) >= tail_eps {
        lo -= 1;
    }
    while pmf(li, hi) >= tail_eps {
        hi += 1;
    }
    (lo..=hi).map(|y| (y as f64, pmf(li, y))).collect()
}

fn expected_psi(table: &[(f64, f64)], lambda: f64, a: f64, k: f64) -> f64 {
    table
        .iter()
        .map(|&(y, p)| p * tukey_psi(y, lambda, a, k))
        .sum()
}

/// Calibration term `a(lambda, k)`: a root of `E psi_{k,a}(Y, lambda) = 0`
/// over a in [-k, k], located by a sign-change scan and bisected to machine
/// width so `|E psi|` at the root is within `cfg.a_solver_tol`. With several
/// sign changes the root of smallest |a| is returned.
pub fn tukey_a(lambda: f64, k: f64, cfg: &TukeyConfig) -> Result<f64, EstimatorError> {
    cfg.validate()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(EstimatorError::InvalidConfig(format!(
            "rate must be positive and finite, got {lambda}"
        )));
    }
    if !(k > 0.0) {
        return Err(EstimatorError::InvalidConfig(format!(
            "k must be positive, got {k}"
        )));
    }
    let table = poisson_table(lambda, cfg.expectation_tail_eps);
    let g = |a: f64| expected_psi(&table, lambda, a, k);

    const GRID: usize = 480;
    let step = 2.0 * k / GRID as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_a = -k;
    let mut prev_g = g(prev_a);
    for i in 1..=GRID {
        let a_i = -k + step * i as f64;
        let g_i = g(a_i);
        if prev_g == 0.0 {
            roots.push(prev_a);
        } else if prev_g * g_i < 0.0 {
            let (mut lo, mut hi) = (prev_a, a_i);
            let mut g_lo = prev_g;
            for _ in 0..100 {
                if hi - lo <= 1e-14 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let g_mid = g(mid);
                if g_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if g_lo * g_mid < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    g_lo = g_mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_a = a_i;
        prev_g = g_i;
    }
    if prev_g == 0.0 {
        roots.push(prev_a);
    }

    let root = roots
        .into_iter()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .ok_or(EstimatorError::CalibrationFailed)?;
    if g(root).abs() > cfg.a_solver_tol {
        return Err(EstimatorError::CalibrationFailed);
    }
    Ok(root)
}

/// Sum of the objective over the sample; the M-equation is its root in the
/// rate.
fn m_equation(ys: &[f64], lambda: f64, a: f64, k: f64) -> f64 {
    ys.iter().map(|&y| tukey_psi(y, lambda, a, k)).sum()
}

/// Root of the M-equation near `center`: the bracket grows geometrically
/// until the equation changes sign, then bisection takes over. The objective
/// is not monotone in the rate, so derivative methods are not safe here.
fn solve_m_equation(ys: &[f64], a: f64, k: f64, center: f64) -> Result<f64, EstimatorError> {
    let f = |l: f64| m_equation(ys, l, a, k);
    let mut d = (0.1 * center).max(0.1);
    let mut lo = (center - d).max(TUKEY_MIN_LAMBDA);
    let mut hi = center + d;
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let mut doublings = 0;
    while f_lo * f_hi > 0.0 || (f_lo == 0.0 && f_hi == 0.0) {
        doublings += 1;
        if doublings > 60 {
            return Err(EstimatorError::NoBracket(center));
        }
        d *= 2.0;
        lo = (center - d).max(TUKEY_MIN_LAMBDA);
        hi = center + d;
        f_lo = f(lo);
        f_hi = f(hi);
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    let tol = 1e-10 * center.abs().max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Tukey's modified M-estimator, iterated to a fixed point.
///
/// Alternates (1) recalibrating `a` at the current rate and (2) solving the
/// M-equation for the next rate, stopping when successive iterates differ by
/// at most `cfg.fixed_point_tol`. Without an explicit `init` the jittered
/// median under a fixed internal seed provides a robust start.
pub fn tukey_estimate(
    sample: &CountSample,
    cfg: &TukeyConfig,
    init: Option<f64>,
) -> Result<Estimate, EstimatorError> {
    cfg.validate()?;
    if sample.counts().iter().all(|&c| c == 0) {
        return Err(EstimatorError::AllZeroSample);
    }
    let ys: Vec<f64> = sample.counts().iter().map(|&c| c as f64).collect();
    let start = init.unwrap_or_else(|| lambda_jittered(sample, DEFAULT_INIT_SEED).value);
    let mut lam = start.max(TUKEY_MIN_LAMBDA);
    for iter in 1..=cfg.max_outer_iter {
        let a = tukey_a(lam, cfg.k, cfg)?;
        let next = solve_m_equation(&ys, a, cfg.k, lam)?;
        if (next - lam).abs() <= cfg.fixed_point_tol {
            let mut est = Estimate::new(next, Method::Tukey, None);
            est.iterations = Some(iter);
            return Ok(est);
        }
        lam = next;
    }
    Err(EstimatorError::NotConverged {
        last: lam,
        iterations: cfg.max_outer_iter,
    })
}
