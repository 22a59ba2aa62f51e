//! The exact median of the jittered Poisson distribution and the sequence
//! machinery behind its `lambda + 1/3 + H(x)/lambda` asymptotics.
//!
//! `H` is the piecewise cubic carrying the O(1/lambda) correction; its range
//! is [-8/405, 4/135]. The sequences `w_n`, `Delta_n` and the kernel `c_n`
//! let the asymptotics be verified numerically: `w_n(x, k)` is the jittered
//! CDF at `n + x + 1/3 + k/(n+x)`, and the rescaled successive difference
//! `Delta_n` tends to `3 (H(x) - k) / (2 (n+1+x)^2)`, so the sign of
//! `H(x) - k` decides whether `w_n` approaches 1/2 from below or above.
//!
//! `Delta_n` is evaluated through closed forms in which every term is O(1/n),
//! never through `w_{n+1} - w_n` directly: the raw difference is O(1/n^2.5)
//! against values of 1/2, losing all significant digits past n ~ 1e3.

use std::sync::OnceLock;

use serde::Serialize;
use thiserror::Error;

use crate::poisson::{self, Intensity, PoissonError};

const TWO_THIRDS: f64 = 2.0 / 3.0;

/// Supremum of H, attained at integer lambda: 4/135.
pub const H_SUP: f64 = 4.0 / 135.0;
/// Infimum of H, attained at fractional part 2/3: -8/405.
pub const H_INF: f64 = -8.0 / 405.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("x must lie in [0, 1], got {0}")]
    XOutOfRange(f64),
    #[error("x must lie in [0, 1), got {0}")]
    XOutOfBinRange(f64),
    #[error("n must be at least 1")]
    ZeroN,
    #[error("x + k/(n+x) = {0} falls outside [-1/3, 5/3)")]
    ShiftOutOfRange(f64),
    #[error("branch changes between n and n+1; closed-form difference is undefined there")]
    BranchChange,
    #[error(transparent)]
    Poisson(#[from] PoissonError),
}

/// Piecewise-cubic correction to the jittered median, on [0, 1].
///
/// Continuous everywhere (the two branches agree at 2/3) and periodic in the
/// sense H(0) = H(1) = 4/135.
pub fn h_function(x: f64) -> Result<f64, TheoryError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(TheoryError::XOutOfRange(x));
    }
    Ok(if x <= TWO_THIRDS {
        x * x * (x - 1.0) / 3.0 + 4.0 / 135.0
    } else {
        x / 3.0 * (x * x - 4.0 * x + 5.0) - 86.0 / 135.0
    })
}

/// The solved median of `Z = N + U` with diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MedianSolution {
    pub lambda: Intensity,
    /// The exact median of the jittered distribution.
    pub median: f64,
    /// median - lambda - 1/3; `lambda * delta` oscillates within [-8/405, 4/135].
    pub delta: f64,
    /// H evaluated at the fractional part of lambda.
    pub h_at_frac: f64,
    /// Width of the final root bracket (0 when the in-bin solve is exact).
    pub bracket_width: f64,
    /// Number of CDF/PMF evaluations spent locating and solving the bin.
    pub evaluations: u32,
}

/// Exact median of the jittered distribution.
///
/// Locates the integer bin [m, m+1) holding the median by binary search on
/// the Poisson CDF, then solves the linear in-bin equation in closed form:
/// `t = m + (1/2 - P(N <= m-1)) / P(N = m)`. Falls back to bisection on the
/// jittered CDF in the (practically unreachable) case the bin pmf underflows.
pub fn theoretical_median(lambda: Intensity) -> MedianSolution {
    let l = lambda.get();
    let mut evaluations = 0u32;

    // Smallest m with P(N <= m) >= 1/2; the median then lies in (m, m+1].
    let m = if poisson::cdf(lambda, 0) >= 0.5 {
        evaluations += 1;
        0
    } else {
        let mut lo = 0u64;
        let mut hi = (l + 2.0).floor() as u64;
        evaluations += 1;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            evaluations += 1;
            if poisson::cdf(lambda, mid) >= 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let below = if m == 0 { 0.0 } else { poisson::cdf(lambda, m - 1) };
    let p = poisson::pmf(lambda, m);
    evaluations += 2;

    let (median, bracket_width) = if p > 0.0 {
        (m as f64 + (0.5 - below) / p, 0.0)
    } else {
        // Bin pmf underflowed: bisect the jittered CDF inside [m, m+1].
        let mut lo = m as f64;
        let mut hi = m as f64 + 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            evaluations += 1;
            if poisson::jittered_cdf(lambda, mid).unwrap() < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), hi - lo)
    };

    let frac = l - l.floor();
    MedianSolution {
        lambda,
        median,
        delta: median - l - 1.0 / 3.0,
        h_at_frac: h_function(frac).expect("fractional part is in [0, 1)"),
        bracket_width,
        evaluations,
    }
}

/// Which closed form of `w_n` applies, decided by where `x + k/(n+x)` falls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Shift in [-1/3, 2/3): correction term rides on P(N = n).
    Low,
    /// Shift in [2/3, 5/3): correction term rides on P(N = n+1).
    High,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Low => write!(f, "low"),
            Branch::High => write!(f, "high"),
        }
    }
}

/// One evaluation of the `w_n`/`Delta_n` machinery.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SequencePoint {
    pub n: u64,
    pub x: f64,
    pub k: f64,
    /// `w_n(x, k) = P(Z_{n+x} <= n + x + 1/3 + k/(n+x))`; always in [0, 1].
    pub w: f64,
    /// Rescaled difference `Delta_n(x, k)`; absent when the branch changes
    /// between n and n+1 so the closed form does not apply.
    pub delta_n: Option<f64>,
    pub branch: Branch,
}

fn classify(n: u64, x: f64, k: f64) -> Result<Branch, TheoryError> {
    if n == 0 {
        return Err(TheoryError::ZeroN);
    }
    if !(0.0..1.0).contains(&x) {
        return Err(TheoryError::XOutOfBinRange(x));
    }
    let shift = x + k / (n as f64 + x);
    if !(-1.0 / 3.0..5.0 / 3.0).contains(&shift) {
        return Err(TheoryError::ShiftOutOfRange(shift));
    }
    // Exact tie at 2/3: the high form applies for k >= 0, the low one below.
    Ok(if shift > TWO_THIRDS || (shift == TWO_THIRDS && k >= 0.0) {
        Branch::High
    } else {
        Branch::Low
    })
}

/// `w_n(x, k)` through the branch-appropriate closed form, together with
/// `Delta_n` when defined.
pub fn w_sequence(n: u64, x: f64, k: f64) -> Result<SequencePoint, TheoryError> {
    let branch = classify(n, x, k)?;
    let nf = n as f64;
    let lambda = Intensity::new(nf + x)?;
    let coeff = x - TWO_THIRDS + k / (nf + x);
    let w = match branch {
        Branch::Low => poisson::cdf(lambda, n) + coeff * poisson::pmf(lambda, n),
        Branch::High => poisson::cdf(lambda, n) + coeff * poisson::pmf(lambda, n + 1),
    };
    let delta_n = delta_sequence(n, x, k).ok();
    Ok(SequencePoint {
        n,
        x,
        k,
        w,
        delta_n,
        branch,
    })
}

use crate::poisson::ln_1p_minus_t;

/// `c_n(v, x) = ((n+v+x)/(n+1+x))^{n+1} e^{1-v}`; positive, equals 1 at v = 1.
pub fn c_n(n: u64, v: f64, x: f64) -> f64 {
    c_n_minus_one(n, v, x) + 1.0
}

/// `c_n(v, x) - 1`, accurate relative to its own O(1/n) size. The exponent is
/// assembled as `(n+1)(ln1p(-u) + u) + (1-v) x/(n+1+x)` with
/// `u = (1-v)/(n+1+x)`, so no term suffers cancellation.
fn c_n_minus_one(n: u64, v: f64, x: f64) -> f64 {
    let np1 = n as f64 + 1.0;
    let big_n = np1 + x;
    let u = (1.0 - v) / big_n;
    let exponent = np1 * ln_1p_minus_t(-u) + (1.0 - v) * x / big_n;
    exponent.exp_m1()
}

/// 32-point Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre_unit() -> &'static [(f64, f64); 32] {
    static NODES: OnceLock<[(f64, f64); 32]> = OnceLock::new();
    NODES.get_or_init(|| {
        const N: usize = 32;
        let mut out = [(0.0, 0.0); N];
        for (i, slot) in out.iter_mut().enumerate() {
            // Newton iteration on P_32 from the usual cosine initial guess.
            let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let mut p0 = 1.0;
                let mut p1 = t;
                for j in 2..=N {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * t * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = (N as f64) * (t * p1 - p0) / (t * t - 1.0);
                let step = p1 / dp;
                t -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let weight = 2.0 / ((1.0 - t * t) * dp * dp);
            // Map from [-1, 1] to [0, 1].
            *slot = (0.5 * (1.0 - t), 0.5 * weight);
        }
        out
    })
}

/// `int_0^1 (c_n(v, x) - 1) dv` by 32-node Gauss-Legendre; the integrand is
/// analytic in v, so the quadrature error is far below the 1/n^2 scale probed.
fn integral_c_n_minus_one(n: u64, x: f64) -> f64 {
    gauss_legendre_unit()
        .iter()
        .map(|&(v, w)| w * c_n_minus_one(n, v, x))
        .sum()
}

/// `Delta_n(x, k)`: the `(n+1)!/g_{n+1}(n+1+x)`-rescaled difference
/// `w_{n+1} - w_n`, via closed forms whose terms are all O(1/n).
///
/// Errors if n and n+1 do not share a branch; the closed forms require both
/// members of the difference to take the same shape.
pub fn delta_sequence(n: u64, x: f64, k: f64) -> Result<f64, TheoryError> {
    let branch = classify(n, x, k)?;
    let branch_next = classify(n + 1, x, k)?;
    if branch != branch_next {
        return Err(TheoryError::BranchChange);
    }

    let nf = n as f64;
    let np1 = nf + 1.0;
    let c0m1 = c_n_minus_one(n, 0.0, x);
    let int_m1 = integral_c_n_minus_one(n, x);
    let r_n = k / (nf + x);
    let r_np1 = k / (np1 + x);

    Ok(match branch {
        Branch::Low => {
            // rho = (n+1)/(n+x) = 1 + (1-x)/(n+x); 1 - c0*rho is assembled
            // from its small parts so the O(1/n) result keeps full precision.
            let q = (1.0 - x) / (nf + x);
            let one_minus_c0_rho = -(c0m1 + q + c0m1 * q);
            let rho = np1 / (nf + x);
            (c0m1 - int_m1) + (x - TWO_THIRDS) * one_minus_c0_rho + r_np1
                - rho * (1.0 + c0m1) * r_n
        }
        Branch::High => {
            let q = (np1 + x) / (nf + 2.0);
            let q_minus_c0 = (x - 1.0) / (nf + 2.0) - c0m1;
            (c0m1 - int_m1) + (x - TWO_THIRDS) * q_minus_c0 + q * r_np1 - (1.0 + c0m1) * r_n
        }
    })
}

/// `Delta_n * 2(n+1+x)^2 / 3 - (H(x) - k)`: tends to 0 as n grows.
pub fn expansion_residual(n: u64, x: f64, k: f64) -> Result<f64, TheoryError> {
    let delta = delta_sequence(n, x, k)?;
    let big_n = n as f64 + 1.0 + x;
    let h = h_function(x)?;
    Ok(delta * 2.0 * big_n * big_n / 3.0 - (h - k))
}
