//! Poisson probability kernels and the jittered distribution they induce.
//!
//! Everything is evaluated in log space; the CDF goes through the regularized
//! upper incomplete gamma function (`P(N <= k) = Q(k+1, lambda)`), which stays
//! accurate for `lambda` up to at least 1e6 where partial summation would be
//! both slow and cancellation-prone.

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Below this log-probability `exp` underflows to zero; `pmf` returns 0.0.
const LOG_PMF_UNDERFLOW: f64 = -745.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error("intensity must be a positive finite real, got {0}")]
    InvalidIntensity(f64),
    #[error("argument must be a finite nonnegative real, got {0}")]
    NegativeArgument(f64),
}

/// A validated Poisson rate: positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize)]
#[serde(transparent)]
pub struct Intensity(f64);

impl Intensity {
    pub fn new(lambda: f64) -> Result<Self, PoissonError> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(Self(lambda))
        } else {
            Err(PoissonError::InvalidIntensity(lambda))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// `ln(1+t) - t` without cancellation for small |t|.
pub(crate) fn ln_1p_minus_t(t: f64) -> f64 {
    if t.abs() < 1e-3 {
        // -t^2/2 + t^3/3 - ...; the first omitted term is O(t^7).
        -t * t * (1.0 / 2.0 - t * (1.0 / 3.0 - t * (1.0 / 4.0 - t * (1.0 / 5.0 - t / 6.0))))
    } else {
        t.ln_1p() - t
    }
}

/// ln( x^a e^{-x} / Gamma(a) ) for a > 0, x > 0.
///
/// The direct expression loses digits once `a ln x`, `x` and `ln Gamma(a)`
/// grow large while their O(1) combination is what matters (half an ulp of
/// ln Gamma(201) is already 6e-14). For a >= 20 it is rewritten through
/// Stirling's series as `a (ln1p(t) - t) + ln(a / 2 pi) / 2 - corr(a)` with
/// t = (x-a)/a, where every piece is O(1) and computed without cancellation.
fn log_prefactor(a: f64, x: f64) -> f64 {
    if a < 20.0 {
        return a * x.ln() - x - ln_gamma(a);
    }
    let t = (x - a) / a;
    let a2 = a * a;
    let corr = (1.0 / 12.0
        - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * a2)) / a2) / a2) / a2)
        / a;
    a * ln_1p_minus_t(t) + 0.5 * (a / (2.0 * std::f64::consts::PI)).ln() - corr
}

/// ln P(N_lambda = k) = k ln(lambda) - lambda - ln(k!).
pub fn log_pmf(lambda: Intensity, k: u64) -> f64 {
    let l = lambda.get();
    if k == 0 {
        return -l;
    }
    log_prefactor(k as f64 + 1.0, l) - l.ln()
}

/// P(N_lambda = k), with documented underflow to 0.0 below exp(-745).
pub fn pmf(lambda: Intensity, k: u64) -> f64 {
    let lp = log_pmf(lambda, k);
    if lp < LOG_PMF_UNDERFLOW {
        0.0
    } else {
        lp.exp()
    }
}

/// P(N_lambda <= k) via the regularized upper incomplete gamma function,
/// `Q(k+1, lambda)`.
pub fn cdf(lambda: Intensity, k: u64) -> f64 {
    gamma_q(k as f64 + 1.0, lambda.get())
}

/// Smallest integer m with P(N_lambda <= m) >= 1/2.
pub fn integer_median(lambda: Intensity) -> u64 {
    let l = lambda.get();
    if cdf(lambda, 0) >= 0.5 {
        return 0;
    }
    // The Poisson median never exceeds lambda + 1/3, so this bracket is safe.
    let mut lo = 0u64; // cdf(lo) < 1/2
    let mut hi = (l + 2.0).floor() as u64; // cdf(hi) >= 1/2
    debug_assert!(cdf(lambda, hi) >= 0.5);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if cdf(lambda, mid) >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Density of Z = N + U at t >= 0: piecewise constant, P(N = floor(t)).
pub fn jittered_density(lambda: Intensity, t: f64) -> Result<f64, PoissonError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(PoissonError::NegativeArgument(t));
    }
    Ok(pmf(lambda, t.floor() as u64))
}

/// CDF of Z = N + U at t >= 0:
/// `F(t) = P(N <= floor(t) - 1) + (t - floor(t)) * P(N = floor(t))`,
/// with `F(t) = t * P(N = 0)` on [0, 1).
pub fn jittered_cdf(lambda: Intensity, t: f64) -> Result<f64, PoissonError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(PoissonError::NegativeArgument(t));
    }
    let m = t.floor() as u64;
    let frac = t - t.floor();
    let below = if m == 0 { 0.0 } else { cdf(lambda, m - 1) };
    Ok(below + frac * pmf(lambda, m))
}

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
///
/// Series for x < a + 1, Lentz continued fraction otherwise. Near x ~ a both
/// need O(sqrt(a)) terms, so the iteration cap scales with a; fixed small caps
/// are what breaks textbook implementations at a ~ 1e5.
pub(crate) fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    let max_iter = 64 + (10.0 * a.sqrt()) as usize;
    let prefactor = log_prefactor(a, x).exp();
    if x < a + 1.0 {
        // P(a, x) by series, return the complement.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..max_iter {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term < sum * f64::EPSILON {
                break;
            }
        }
        1.0 - prefactor * sum
    } else {
        // Q(a, x) by modified Lentz on the standard continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut f = d;
        for i in 1..max_iter {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            f *= delta;
            if (delta - 1.0).abs() < f64::EPSILON {
                break;
            }
        }
        prefactor * f
    }
}
