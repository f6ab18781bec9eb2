//! Closed-form probabilities, moments and limit values for the detachment
//! process, each evaluable exactly (big rationals) or in the log domain.
//!
//! Conventions used throughout: `n` is the passenger count, `k` the time
//! (equivalently the number of buses), and "detached" at time `k` means all
//! `n` passengers occupy distinct buses. The probability of that event is
//! `(k)_n / k^n`; everything else here is built from it, from the terminating
//! 2F0 series for multi-time events, or from Stirling-number identities for
//! the support size.
//!
//! Exact mode is intended for `n, k` up to a few hundred (every oracle
//! comparison runs there); the f64 entry points evaluate in the log domain
//! and stay stable for `n` in the thousands and `k` up to ~1e8.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

use crate::combinatorics::{
    binomial, falling_factorial, falling_ratio_exact, ln_big, log_add_exp, log_falling_ratio,
    pow_ratio, stirling2, two_f_zero_exact, two_f_zero_log, ExactProb, LogProb,
};
use crate::{Error, Result};

fn big_ratio(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

// ---------------------------------------------------------------------------
// Single-time detachment
// ---------------------------------------------------------------------------

/// P(all `n` passengers detached at time `k`) = `(k)_n / k^n`, exactly.
pub fn detached_prob_exact(n: u64, k: u64) -> ExactProb {
    assert!(n >= 1 && k >= 1);
    if k < n {
        return ExactProb::zero();
    }
    falling_ratio_exact(k, n).expect("k >= n checked")
}

/// Log-domain P(detached at `k`).
pub fn detached_log_prob(n: u64, k: u64) -> LogProb {
    assert!(n >= 1 && k >= 1);
    if k < n {
        return LogProb::never();
    }
    log_falling_ratio(k, n).expect("k >= n checked")
}

pub fn detached_prob(n: u64, k: u64) -> f64 {
    detached_log_prob(n, k).prob()
}

/// P(`k` is a detachment time) = `n (n-1) (k-2)_{n-2} / k^n`: the process is
/// detached at `k` but was not at `k-1`. Zero when `n = 1` or `k < n`.
pub fn detachment_time_prob_exact(n: u64, k: u64) -> ExactProb {
    assert!(n >= 1 && k >= 1);
    if n == 1 || k < n {
        return ExactProb::zero();
    }
    let numer = BigInt::from(n) * BigInt::from(n - 1) * falling_factorial(k as i64 - 2, n - 2);
    ExactProb::new(numer, BigInt::from(k).pow(n as u32))
}

pub fn detachment_time_prob(n: u64, k: u64) -> f64 {
    assert!(n >= 1 && k >= 1);
    if n == 1 || k < n {
        return 0.0;
    }
    // n(n-1)/k^2 * prod_{j=2}^{n-1} (1 - j/k)
    let kf = k as f64;
    let mut log = (n as f64).ln() + ((n - 1) as f64).ln() - 2.0 * kf.ln();
    for j in 2..n {
        log += (-(j as f64) / kf).ln_1p();
    }
    log.exp()
}

/// Two-sided birthday-style bounds on `log P(detached at k)` for `k >= n >= 2`:
///
/// ```text
/// -n(n-1)/2k - n(n-1)(2n-1)/12k^2 - n^2(n-1)^2 / (12 k^2 (k-n+1))
///     <= log pi <= -n(n-1)/2k - n(n-1)(2n-1)/12k^2
/// ```
pub fn detached_log_prob_bounds(n: u64, k: u64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::PassengerCountTooSmall { n, min: 2 });
    }
    if k < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k });
    }
    let nf = n as f64;
    let kf = k as f64;
    let upper = -nf * (nf - 1.0) / (2.0 * kf) - nf * (nf - 1.0) * (2.0 * nf - 1.0) / (12.0 * kf * kf);
    let lower = upper - nf * nf * (nf - 1.0) * (nf - 1.0) / (12.0 * kf * kf * (kf - nf + 1.0));
    Ok((lower, upper))
}

// ---------------------------------------------------------------------------
// Multi-time detachment via the terminating 2F0 series
// ---------------------------------------------------------------------------

/// P(detached at `k` and still detached at `k + l`), exactly:
/// `((k)_n / (k+l)^n) * sum_{r<=min(n,l)} C(n,r) (l)_r / k^r`.
pub fn joint_detached_exact(n: u64, k: u64, l: u64) -> Result<ExactProb> {
    assert!(n >= 1 && l >= 1);
    if k < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k });
    }
    let series = two_f_zero_exact(n, l, &big_ratio(1, k));
    let front = BigRational::new(falling_factorial(k as i64, n), BigInt::from(k + l).pow(n as u32));
    Ok(ExactProb::from_ratio(front * series))
}

pub fn joint_detached(n: u64, k: u64, l: u64) -> Result<f64> {
    assert!(n >= 1 && l >= 1);
    if k < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k });
    }
    let kf = k as f64;
    let log_front =
        log_falling_ratio(k, n).expect("k >= n").log() + n as f64 * (kf.ln() - ((k + l) as f64).ln());
    Ok((log_front + two_f_zero_log(n, l, 1.0 / kf).log()).exp())
}

/// P(detached at `k2` | detached at `k1`) = `(k1/k2)^n 2F0(-n, -(k2-k1); -; 1/k1)`.
pub fn cond_detached_exact(n: u64, k1: u64, k2: u64) -> Result<ExactProb> {
    assert!(n >= 1);
    if k1 < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k: k1 });
    }
    if k2 <= k1 {
        return Err(Error::TimesNotIncreasing {
            earlier: k1,
            later: k2,
        });
    }
    let series = two_f_zero_exact(n, k2 - k1, &big_ratio(1, k1));
    let front = BigRational::new(BigInt::from(k1).pow(n as u32), BigInt::from(k2).pow(n as u32));
    Ok(ExactProb::from_ratio(front * series))
}

pub fn cond_detached(n: u64, k1: u64, k2: u64) -> Result<f64> {
    assert!(n >= 1);
    if k1 < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k: k1 });
    }
    if k2 <= k1 {
        return Err(Error::TimesNotIncreasing {
            earlier: k1,
            later: k2,
        });
    }
    let log_front = n as f64 * ((k1 as f64).ln() - (k2 as f64).ln());
    Ok((log_front + two_f_zero_log(n, k2 - k1, 1.0 / k1 as f64).log()).exp())
}

/// P(detached at `k2` | not detached at `k1`), for `n >= 2`, `k1 < k2 <= ...`:
/// `(pi_{n,k2} - joint(n, k1, k2-k1)) / (1 - pi_{n,k1})`; the joint term
/// vanishes when `k1 < n`.
pub fn cond_detached_given_not_exact(n: u64, k1: u64, k2: u64) -> Result<ExactProb> {
    if n < 2 {
        return Err(Error::PassengerCountTooSmall { n, min: 2 });
    }
    if k2 <= k1 {
        return Err(Error::TimesNotIncreasing {
            earlier: k1,
            later: k2,
        });
    }
    if k2 < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k: k2 });
    }
    let joint = if k1 < n {
        BigRational::zero()
    } else {
        joint_detached_exact(n, k1, k2 - k1)?.into_ratio()
    };
    let pi_k1 = detached_prob_exact(n, k1).into_ratio();
    let denom = BigRational::one() - &pi_k1;
    if denom.is_zero() {
        return Err(Error::ConditionOnNullEvent { n, k: k1 });
    }
    let numer = detached_prob_exact(n, k2).into_ratio() - joint;
    Ok(ExactProb::from_ratio(numer / denom))
}

pub fn cond_detached_given_not(n: u64, k1: u64, k2: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::PassengerCountTooSmall { n, min: 2 });
    }
    if k2 <= k1 {
        return Err(Error::TimesNotIncreasing {
            earlier: k1,
            later: k2,
        });
    }
    if k2 < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k: k2 });
    }
    let joint = if k1 < n {
        0.0
    } else {
        joint_detached(n, k1, k2 - k1)?
    };
    let pi_k1 = detached_prob(n, k1);
    if pi_k1 >= 1.0 {
        return Err(Error::ConditionOnNullEvent { n, k: k1 });
    }
    Ok((detached_prob(n, k2) - joint) / (1.0 - pi_k1))
}

/// P(detached at all of `k1 < k2 < k3`), chained through the Markov property.
pub fn triple_detached_exact(n: u64, k1: u64, k2: u64, k3: u64) -> Result<ExactProb> {
    if n == 1 {
        return Ok(ExactProb::one());
    }
    let first = detached_prob_exact(n, k1);
    if k1 < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k: k1 });
    }
    let ratio = first.into_ratio()
        * cond_detached_exact(n, k1, k2)?.into_ratio()
        * cond_detached_exact(n, k2, k3)?.into_ratio();
    Ok(ExactProb::from_ratio(ratio))
}

pub fn triple_detached(n: u64, k1: u64, k2: u64, k3: u64) -> Result<f64> {
    if n == 1 {
        return Ok(1.0);
    }
    if k1 < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k: k1 });
    }
    Ok(detached_prob(n, k1) * cond_detached(n, k1, k2)? * cond_detached(n, k2, k3)?)
}

/// P(detached at `k1` and `k3` but not at `k2`) =
/// `joint(n, k1, k3-k1) - triple(n, k1, k2, k3)`; nonnegative by construction.
pub fn sandwich_prob_exact(n: u64, k1: u64, k2: u64, k3: u64) -> Result<ExactProb> {
    if n == 1 {
        return Ok(ExactProb::zero());
    }
    if k2 <= k1 {
        return Err(Error::TimesNotIncreasing {
            earlier: k1,
            later: k2,
        });
    }
    if k3 <= k2 {
        return Err(Error::TimesNotIncreasing {
            earlier: k2,
            later: k3,
        });
    }
    let outer = joint_detached_exact(n, k1, k3 - k1)?.into_ratio();
    let inner = triple_detached_exact(n, k1, k2, k3)?.into_ratio();
    let diff = outer - inner;
    assert!(!diff.is_negative(), "sandwich probability must be >= 0");
    Ok(ExactProb::from_ratio(diff))
}

pub fn sandwich_prob(n: u64, k1: u64, k2: u64, k3: u64) -> Result<f64> {
    if n == 1 {
        return Ok(0.0);
    }
    if k2 <= k1 {
        return Err(Error::TimesNotIncreasing {
            earlier: k1,
            later: k2,
        });
    }
    if k3 <= k2 {
        return Err(Error::TimesNotIncreasing {
            earlier: k2,
            later: k3,
        });
    }
    Ok(joint_detached(n, k1, k3 - k1)? - triple_detached(n, k1, k2, k3)?)
}

// ---------------------------------------------------------------------------
// Permanent detachment time
// ---------------------------------------------------------------------------

/// CDF of the permanent detachment time: `P(tau <= k) = C(k,n) / C(k+n-1,n)`,
/// with `C(a,b) = 0` for `a < b` (so the CDF vanishes for `k < n`).
pub fn permanent_detachment_cdf_exact(n: u64, k: u64) -> ExactProb {
    assert!(n >= 1 && k >= 1);
    if k < n {
        return ExactProb::zero();
    }
    ExactProb::from_ratio(BigRational::new(binomial(k, n), binomial(k + n - 1, n)))
}

/// `log P(tau <= k)`, stable for `k` up to 1e18.
pub fn permanent_detachment_log_cdf(n: u64, k: u64) -> LogProb {
    assert!(n >= 1 && k >= 1);
    if k < n {
        return LogProb::never();
    }
    // log prod_{j=0}^{n-1} (k-j)/(k+n-1-j), each factor as log1p of a small ratio.
    let mut acc = 0.0;
    for j in 0..n {
        let denom = (k + n - 1 - j) as f64;
        acc += (-((n - 1) as f64) / denom).ln_1p();
    }
    LogProb::from_log(acc)
}

pub fn permanent_detachment_cdf(n: u64, k: u64) -> f64 {
    permanent_detachment_log_cdf(n, k).prob()
}

/// CDF of the inverse exponential law IE(1): `F(x) = exp(-1/x)` for `x > 0`.
///
/// This is the n^2-scaling limit of the permanent detachment time. Its
/// density `x^{-2} exp(-1/x)` has a unique mode at `x = 1/2`.
pub fn inverse_exponential_cdf(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::NonPositive {
            name: "x",
            value: x,
        });
    }
    Ok((-1.0 / x).exp())
}

pub fn inverse_exponential_density(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::NonPositive {
            name: "x",
            value: x,
        });
    }
    Ok((-1.0 / x).exp() / (x * x))
}

// ---------------------------------------------------------------------------
// Expected number of detachment states
// ---------------------------------------------------------------------------

/// `e(n, k) = sum_{j=n}^{k} (j)_n / j^n`, the expected number of times the
/// process is in a detached state up to time `k`. Zero when `k < n`.
///
/// Evaluated in the log domain with an O(1) per-term update
/// (`log pi_{n,j+1} = log pi_{n,j} - log1p(-n/(j+1)) + n log1p(-1/(j+1))`)
/// and Kahan-compensated accumulation, so a sweep to `k ~ 3e7` is both fast
/// and accurate to ~1e-11 absolute.
pub fn expected_detachment_states(n: u64, k: u64) -> f64 {
    assert!(n >= 1);
    if k < n {
        return 0.0;
    }
    let nf = n as f64;
    let mut log_pi = log_falling_ratio(n, n).expect("n >= 1").log();
    let mut sum = 0.0;
    let mut comp = 0.0; // Kahan compensation
    for j in n..=k {
        let term = log_pi.exp();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if j < k {
            let next = (j + 1) as f64;
            log_pi += -(-nf / next).ln_1p() + nf * (-1.0 / next).ln_1p();
        }
    }
    sum
}

/// Exact-rational `e(n, k)` for small instances.
pub fn expected_detachment_states_exact(n: u64, k: u64) -> ExactProb {
    assert!(n >= 1);
    let mut sum = BigRational::zero();
    let mut j = n;
    while j <= k {
        sum += detached_prob_exact(n, j).into_ratio();
        j += 1;
    }
    ExactProb::from_ratio(sum)
}

/// The critical time scale `k(n, y) = n^2 / (2 (2 log n - 2 log log n + y))`
/// at which `e(n, k(n, y))` converges to `c(y) = exp(-y)/8`.
#[derive(Debug, Clone, Copy)]
pub struct CriticalWindow {
    pub n: u64,
    pub y: f64,
    /// `k(n, y)`, as a real; callers floor it to an integer time.
    pub time: f64,
    /// The limit `c(y) = exp(-y)/8` of the expected detachment-state count.
    pub limit: f64,
}

pub fn critical_window(n: u64, y: f64) -> Result<CriticalWindow> {
    if n < 3 {
        return Err(Error::PassengerCountTooSmall { n, min: 3 });
    }
    let ln_n = (n as f64).ln();
    let denom = 2.0 * (2.0 * ln_n - 2.0 * ln_n.ln() + y);
    if denom <= 0.0 {
        return Err(Error::CriticalWindowDenominator { n, y });
    }
    Ok(CriticalWindow {
        n,
        y,
        time: (n as f64) * (n as f64) / denom,
        limit: (-y).exp() / 8.0,
    })
}

// ---------------------------------------------------------------------------
// Lonely-passenger moments
// ---------------------------------------------------------------------------

/// Mean, variance and concentration ratio of the lonely-passenger count.
///
/// `mean = n (1-1/k)^{n-1}`; `variance = mean + k(k-1) A - mean^2` with
/// `A = n(n-1)/k^2 (1-2/k)^{n-2}` (taken as 0 at `k = 1`); `ratio =
/// variance / mean^2`, absent when the mean vanishes (`k = 1`, `n >= 2`).
#[derive(Debug, Clone, Copy)]
pub struct LonelyMoments {
    pub mean: f64,
    pub variance: f64,
    pub concentration_ratio: Option<f64>,
}

pub fn lonely_moments(n: u64, k: u64) -> LonelyMoments {
    assert!(n >= 1 && k >= 1);
    let nf = n as f64;
    let kf = k as f64;
    if n == 1 {
        return LonelyMoments {
            mean: 1.0,
            variance: 0.0,
            concentration_ratio: Some(0.0),
        };
    }
    if k == 1 {
        return LonelyMoments {
            mean: 0.0,
            variance: 0.0,
            concentration_ratio: None,
        };
    }
    let log_mean = nf.ln() + (nf - 1.0) * (-1.0 / kf).ln_1p();
    let mean = log_mean.exp();
    // log A, with the (1-2/k)^{n-2} factor handled at k = 2 (0^0 = 1).
    let log_pair = if k == 2 {
        if n == 2 {
            nf.ln() + (nf - 1.0).ln() - 2.0 * kf.ln()
        } else {
            f64::NEG_INFINITY
        }
    } else {
        nf.ln() + (nf - 1.0).ln() - 2.0 * kf.ln() + (nf - 2.0) * (-2.0 / kf).ln_1p()
    };
    let pair = log_pair.exp();
    let variance = mean + kf * (kf - 1.0) * pair - mean * mean;
    // ratio = 1/mean + exp(log(k(k-1)A) - 2 log mean) - 1, assembled with
    // expm1 so the near-cancellation at large n,k is not lost to rounding.
    let log_t = (kf * (kf - 1.0)).ln() + log_pair - 2.0 * log_mean;
    let ratio = (-log_mean).exp() + log_t.exp_m1();
    LonelyMoments {
        mean,
        variance,
        concentration_ratio: Some(ratio),
    }
}

/// Exact mean and variance of the lonely-passenger count.
pub fn lonely_moments_exact(n: u64, k: u64) -> (BigRational, BigRational) {
    assert!(n >= 1 && k >= 1);
    let mean = BigRational::new(
        BigInt::from(n) * BigInt::from(k - 1).pow((n - 1) as u32),
        BigInt::from(k).pow((n - 1) as u32),
    );
    let pair = if n < 2 || k < 2 {
        BigRational::zero()
    } else {
        BigRational::new(
            BigInt::from(n) * BigInt::from(n - 1) * BigInt::from(k - 2).pow((n - 2) as u32),
            BigInt::from(k).pow(n as u32),
        )
    };
    let kk = BigRational::from(BigInt::from(k) * BigInt::from(k - 1));
    let variance = &mean + kk * pair - &mean * &mean;
    (mean, variance)
}

// ---------------------------------------------------------------------------
// Support size (number of non-empty buses)
// ---------------------------------------------------------------------------

/// Tail of the support size via Stirling numbers:
/// `P(N_k >= m) = k!/(k-m)! (k^{-m} + sum_{u=m}^{n-1} k^{-(u+1)} S(u, m-1))`.
pub fn support_tail_exact(n: u64, k: u64, m: u64) -> Result<ExactProb> {
    if n < 2 {
        return Err(Error::PassengerCountTooSmall { n, min: 2 });
    }
    if m < 1 || m > n.min(k) {
        return Err(Error::SupportSizeOutOfRange { n, k, m });
    }
    // Common denominator k^n: inner = k^{n-m} + sum_u k^{n-u-1} S(u, m-1).
    let big_k = BigInt::from(k);
    let mut inner = big_k.pow((n - m) as u32);
    for u in m..n {
        inner += big_k.pow((n - u - 1) as u32) * stirling2(u, m - 1);
    }
    let value = BigRational::new(falling_factorial(k as i64, m) * inner, big_k.pow(n as u32));
    Ok(ExactProb::from_ratio(value))
}

/// Log-domain support tail; all terms are nonnegative.
pub fn support_tail(n: u64, k: u64, m: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::PassengerCountTooSmall { n, min: 2 });
    }
    if m < 1 || m > n.min(k) {
        return Err(Error::SupportSizeOutOfRange { n, k, m });
    }
    let ln_k = (k as f64).ln();
    let mut log_inner = -(m as f64) * ln_k;
    for u in m..n {
        let s = stirling2(u, m - 1);
        if s.is_zero() {
            continue;
        }
        log_inner = log_add_exp(log_inner, ln_big(&s) - (u + 1) as f64 * ln_k);
    }
    let mut log_front = 0.0;
    for j in 0..m {
        log_front += ((k - j) as f64).ln();
    }
    Ok((log_front + log_inner).exp())
}

/// Exact pmf of the support size, indexed `r = 1 ..= min(n, k)`, by the
/// alternating-sum formula
/// `P(N_k = r) = C(k-1, r-1) sum_{j=1}^{r} (-1)^{r-j} C(r-1, j-1) (j/k)^{n-1}`.
///
/// Rationals keep the alternating sum exact; use [`support_pmf`] (forward
/// birth-chain recursion, no cancellation) for large instances in floating
/// point.
pub fn support_pmf_exact(n: u64, k: u64) -> Vec<ExactProb> {
    assert!(n >= 1 && k >= 1);
    let denom = BigInt::from(k).pow((n - 1) as u32);
    let top = n.min(k);
    let mut pmf = Vec::with_capacity(top as usize);
    for r in 1..=top {
        let mut sum = BigInt::zero();
        for j in 1..=r {
            let term = binomial(r - 1, j - 1) * BigInt::from(j).pow((n - 1) as u32);
            if (r - j) % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        let mass = BigRational::new(binomial(k - 1, r - 1) * sum, denom.clone());
        pmf.push(ExactProb::from_ratio(mass));
    }
    pmf
}

/// Exact pmf of the support size by the forward birth-chain recursion:
/// seating passengers one at a time, the support grows by one with
/// probability `(k - m)/k` and stays with probability `m/k`.
pub fn support_pmf_chain_exact(n: u64, k: u64) -> Vec<ExactProb> {
    assert!(n >= 1 && k >= 1);
    let top = n.min(k) as usize;
    let mut dist = vec![BigRational::zero(); top + 1];
    dist[1] = BigRational::one();
    for _passenger in 2..=n {
        let mut next = vec![BigRational::zero(); top + 1];
        for (m, mass) in dist.iter().enumerate().skip(1) {
            if mass.is_zero() {
                continue;
            }
            let stay = mass * big_ratio(m as u64, k);
            next[m] += stay;
            // Mass never flows past min(n, k): support <= passengers seated,
            // and growth from m = k has probability zero.
            if m < top {
                let grow = mass * big_ratio(k - m as u64, k);
                next[m + 1] += grow;
            }
        }
        dist = next;
    }
    dist.into_iter()
        .skip(1)
        .map(ExactProb::from_ratio)
        .collect()
}

/// f64 pmf of the support size via the same birth-chain recursion.
pub fn support_pmf(n: u64, k: u64) -> Vec<f64> {
    assert!(n >= 1 && k >= 1);
    let top = n.min(k) as usize;
    let kf = k as f64;
    let mut dist = vec![0.0; top + 1];
    dist[1] = 1.0;
    for _passenger in 2..=n {
        let mut next = vec![0.0; top + 1];
        for (m, &mass) in dist.iter().enumerate().skip(1) {
            if mass == 0.0 {
                continue;
            }
            next[m] += mass * m as f64 / kf;
            if m < top {
                next[m + 1] += mass * (kf - m as f64) / kf;
            }
        }
        dist = next;
    }
    dist.split_off(1)
}

/// Generating function of the support size:
/// `G_n(z) = sum_{j=1}^{k} C(k-1, j-1) (j/k)^{n-1} z^j (1-z)^{k-j}`.
pub fn support_gf_exact(n: u64, k: u64, z: &BigRational) -> BigRational {
    assert!(n >= 1 && k >= 1);
    let one_minus = BigRational::one() - z;
    let mut total = BigRational::zero();
    for j in 1..=k {
        let coeff = BigRational::new(
            binomial(k - 1, j - 1) * BigInt::from(j).pow((n - 1) as u32),
            BigInt::from(k).pow((n - 1) as u32),
        );
        let mut term = coeff;
        for _ in 0..j {
            term *= z;
        }
        for _ in 0..(k - j) {
            term *= &one_minus;
        }
        total += term;
    }
    total
}

pub fn support_gf(n: u64, k: u64, z: f64) -> f64 {
    assert!(n >= 1 && k >= 1);
    let kf = k as f64;
    let mut total = 0.0;
    for j in 1..=k {
        let coeff = binomial(k - 1, j - 1).to_f64().unwrap_or(f64::INFINITY)
            * (j as f64 / kf).powi((n - 1) as i32);
        total += coeff * z.powi(j as i32) * (1.0 - z).powi((k - j) as i32);
    }
    total
}

/// Exact mean and variance of the support size:
/// `mean = k (1 - (1-1/k)^n)`,
/// `var = (k-1) [ (1-1/k)^{n-1} - (k-1)(1-1/k)^{2(n-1)} + (k-2)(1-2/k)^{n-1} ]`.
pub fn support_moments_exact(n: u64, k: u64) -> (BigRational, BigRational) {
    assert!(n >= 1 && k >= 1);
    let q1 = big_ratio(k - 1, k); // 1 - 1/k
    let q1_pow = pow_ratio(&q1, n - 1);
    let mean = BigRational::from(BigInt::from(k)) * (BigRational::one() - &q1_pow * &q1);
    let q2_pow = if k >= 2 {
        pow_ratio(&big_ratio(k - 2, k), n - 1)
    } else {
        BigRational::zero()
    };
    let km1 = BigRational::from(BigInt::from(k - 1));
    let km2 = BigRational::from(BigInt::from(k)) - BigRational::from(BigInt::from(2));
    let variance = &km1 * (&q1_pow - &km1 * &q1_pow * &q1_pow + km2 * q2_pow);
    (mean, variance)
}

pub fn support_moments(n: u64, k: u64) -> (f64, f64) {
    assert!(n >= 1 && k >= 1);
    if n == 1 || k == 1 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    let kf = k as f64;
    let q1 = ((nf - 1.0) * (-1.0 / kf).ln_1p()).exp(); // (1-1/k)^{n-1}
    let mean = kf * (-(nf * (-1.0 / kf).ln_1p()).exp_m1());
    let q2 = if k == 2 {
        0.0 // (1-2/k)^{n-1} with n >= 2
    } else {
        ((nf - 1.0) * (-2.0 / kf).ln_1p()).exp()
    };
    let variance = (kf - 1.0) * (q1 - (kf - 1.0) * q1 * q1 + (kf - 2.0) * q2);
    (mean, variance)
}

// ---------------------------------------------------------------------------
// Large-time limits: extremes and the detachment-indicator scaling limit
// ---------------------------------------------------------------------------

/// Which extreme of the occupied bus numbers to consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Min,
    Max,
}

/// Large-`k` limit CDFs of `min_bus/k` and `max_bus/k`: Beta(1, n) and
/// Beta(n, 1), i.e. `1 - (1-x)^n` and `x^n` on `[0, 1]`.
pub fn extreme_limit_cdf(n: u64, x: f64, which: Extreme) -> Result<f64> {
    assert!(n >= 1);
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutsideUnitInterval(x));
    }
    Ok(match which {
        Extreme::Min => 1.0 - (1.0 - x).powi(n as i32),
        Extreme::Max => x.powi(n as i32),
    })
}

/// Limit moments of the scaled extremes and range.
#[derive(Debug, Clone, Copy)]
pub struct ExtremeLimitMoments {
    pub min_mean: f64,
    pub max_mean: f64,
    pub range_mean: f64,
    /// Common limit standard deviation of both `min/k` and `max/k`.
    pub std_dev: f64,
}

pub fn extreme_limit_moments(n: u64) -> ExtremeLimitMoments {
    assert!(n >= 1);
    let nf = n as f64;
    ExtremeLimitMoments {
        min_mean: 1.0 / (nf + 1.0),
        max_mean: nf / (nf + 1.0),
        range_mean: (nf - 1.0) / (nf + 1.0),
        std_dev: (nf / (nf + 2.0)).sqrt() / (nf + 1.0),
    }
}

/// Finite-dimensional limit values of the detachment indicator process
/// observed at times `c n^2 < d n^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    /// lim P(detached at c n^2) = exp(-1/(2c)).
    Single,
    /// lim P(detached at d n^2 | detached at c n^2) = exp(-(d-c)/(2 d^2)).
    CondDetached,
    /// lim P(detached at d n^2 | not detached at c n^2).
    CondGivenNot,
    /// lim P(detached at both times) = exp(-1/(2c) - (d-c)/(2 d^2)).
    Joint,
}

pub fn scaling_limit_value(kind: LimitKind, c: f64, d: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::NonPositive {
            name: "c",
            value: c,
        });
    }
    if kind != LimitKind::Single && !(d > c) {
        return Err(Error::NonPositive {
            name: "d - c",
            value: d - c,
        });
    }
    let single = (-1.0 / (2.0 * c)).exp();
    Ok(match kind {
        LimitKind::Single => single,
        LimitKind::CondDetached => (-(d - c) / (2.0 * d * d)).exp(),
        LimitKind::Joint => (-1.0 / (2.0 * c) - (d - c) / (2.0 * d * d)).exp(),
        LimitKind::CondGivenNot => {
            ((-1.0 / (2.0 * d)).exp() - (-1.0 / (2.0 * c) - (d - c) / (2.0 * d * d)).exp())
                / (1.0 - single)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frac(n: i64, d: i64) -> ExactProb {
        ExactProb::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn detached_prob_examples() {
        assert_eq!(detached_prob_exact(1, 5), ExactProb::one());
        assert_eq!(detached_prob_exact(3, 2), ExactProb::zero());
        assert_eq!(detached_prob_exact(3, 3), frac(2, 9));
        assert_relative_eq!(detached_prob(3, 3), 2.0 / 9.0, max_relative = 1e-13);
    }

    #[test]
    fn detached_prob_strictly_increasing_in_k() {
        for n in 2..=8u64 {
            let mut prev = detached_prob_exact(n, n);
            for k in (n + 1)..=60 {
                let cur = detached_prob_exact(n, k);
                assert!(cur > prev, "pi not strictly increasing at n={n}, k={k}");
                prev = cur;
            }
        }
    }

    #[test]
    fn detachment_time_prob_examples() {
        assert_eq!(detachment_time_prob_exact(1, 7), ExactProb::zero());
        assert_eq!(detachment_time_prob_exact(2, 2), frac(1, 2));
        assert_eq!(detachment_time_prob_exact(3, 4), frac(3, 16));
        assert_relative_eq!(detachment_time_prob(3, 4), 3.0 / 16.0, max_relative = 1e-13);
    }

    #[test]
    fn log_prob_bounds_examples() {
        for (n, k) in [(2u64, 100u64), (10, 10), (2, 2)] {
            let (lo, hi) = detached_log_prob_bounds(n, k).unwrap();
            let actual = detached_log_prob(n, k).log();
            assert!(lo <= actual && actual <= hi, "bounds fail at ({n},{k})");
        }
        assert!(detached_log_prob_bounds(3, 2).is_err());
    }

    #[test]
    fn log_prob_bounds_sweep_to_500() {
        for n in 2..=500u64 {
            for k in [n, n + 1, 2 * n, 4 * n, n * n, 500.max(n)] {
                if k < n || k > 500 * 500 {
                    continue;
                }
                let (lo, hi) = detached_log_prob_bounds(n, k).unwrap();
                let actual = detached_log_prob(n, k).log();
                assert!(
                    lo <= actual && actual <= hi,
                    "bounds fail at ({n},{k}): {lo} <= {actual} <= {hi}"
                );
            }
        }
    }

    #[test]
    fn joint_detached_examples() {
        assert_eq!(joint_detached_exact(1, 3, 2).unwrap(), ExactProb::one());
        assert_eq!(joint_detached_exact(2, 2, 1).unwrap(), frac(4, 9));
        assert_eq!(joint_detached_exact(2, 3, 1).unwrap(), frac(5, 8));
        assert_eq!(joint_detached_exact(2, 2, 2).unwrap(), frac(7, 16));
        assert!(joint_detached_exact(3, 2, 1).is_err());
        assert_relative_eq!(
            joint_detached(2, 2, 1).unwrap(),
            4.0 / 9.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cond_detached_examples() {
        assert_eq!(cond_detached_exact(2, 2, 3).unwrap(), frac(8, 9));
        assert_eq!(cond_detached_exact(1, 4, 9).unwrap(), ExactProb::one());
        assert_eq!(cond_detached_exact(2, 3, 4).unwrap(), frac(15, 16));
        assert!(cond_detached_exact(2, 3, 3).is_err());
    }

    #[test]
    fn joint_factorises_exactly() {
        for n in 1..=6u64 {
            for k in n..=8 {
                for l in 1..=6 {
                    let joint = joint_detached_exact(n, k, l).unwrap();
                    let product = detached_prob_exact(n, k).into_ratio()
                        * cond_detached_exact(n, k, k + l).unwrap().into_ratio();
                    assert_eq!(joint.into_ratio(), product, "mismatch at ({n},{k},{l})");
                }
            }
        }
    }

    #[test]
    fn cond_given_not_examples() {
        assert_eq!(cond_detached_given_not_exact(2, 2, 3).unwrap(), frac(4, 9));
        assert_eq!(cond_detached_given_not_exact(2, 1, 2).unwrap(), frac(1, 2));
        assert!(cond_detached_given_not_exact(1, 2, 3).is_err());
    }

    #[test]
    fn triple_and_sandwich_examples() {
        assert_eq!(triple_detached_exact(2, 2, 3, 4).unwrap(), frac(5, 12));
        assert_eq!(triple_detached_exact(1, 5, 6, 7).unwrap(), ExactProb::one());
        assert_eq!(triple_detached_exact(2, 2, 3, 5).unwrap(), frac(92, 225));
        assert_eq!(sandwich_prob_exact(2, 2, 3, 4).unwrap(), frac(1, 48));
        assert_eq!(sandwich_prob_exact(1, 2, 3, 4).unwrap(), ExactProb::zero());
        let s = sandwich_prob_exact(3, 3, 4, 5).unwrap();
        assert!(s.ratio() >= &BigRational::zero());
    }

    #[test]
    fn permanent_cdf_examples() {
        assert_eq!(permanent_detachment_cdf_exact(1, 1), ExactProb::one());
        assert_eq!(permanent_detachment_cdf_exact(2, 3), frac(1, 2));
        assert_eq!(permanent_detachment_cdf_exact(5, 4), ExactProb::zero());
        // n = 2 closed form: (k-1)/(k+1).
        for k in 2..=50u64 {
            assert_eq!(
                permanent_detachment_cdf_exact(2, k),
                frac(k as i64 - 1, k as i64 + 1)
            );
        }
        assert_relative_eq!(permanent_detachment_cdf(2, 9), 0.8, max_relative = 1e-13);
    }

    #[test]
    fn permanent_cdf_tail_scale() {
        // k (1 - F(k)) -> n(n-1); already within 0.2% at k = 1e5 for n = 3.
        let k = 100_000u64;
        let n = 3u64;
        let tail = 1.0 - permanent_detachment_cdf(n, k);
        let ratio = k as f64 * tail / (n as f64 * (n - 1) as f64);
        assert!((ratio - 1.0).abs() < 2e-3, "ratio = {ratio}");
    }

    #[test]
    fn inverse_exponential_basics() {
        assert_relative_eq!(
            inverse_exponential_cdf(1.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert!(inverse_exponential_cdf(1e12).unwrap() > 1.0 - 1e-11);
        assert!(inverse_exponential_cdf(-1.0).is_err());
        // Density mode at 1/2 by grid search.
        let mut best = (0.0, f64::MIN);
        let mut x = 0.01;
        while x <= 5.0 {
            let d = inverse_exponential_density(x).unwrap();
            if d > best.1 {
                best = (x, d);
            }
            x += 1e-3;
        }
        assert!((best.0 - 0.5).abs() < 2e-3, "mode at {}", best.0);
    }

    #[test]
    fn expected_states_examples() {
        assert_eq!(expected_detachment_states_exact(2, 1), ExactProb::zero());
        assert_eq!(expected_detachment_states_exact(2, 3), frac(7, 6));
        assert_eq!(expected_detachment_states_exact(3, 4), frac(43, 72));
        assert_eq!(expected_detachment_states(2, 1), 0.0);
    }

    #[test]
    fn expected_states_float_matches_exact() {
        for n in 1..=8u64 {
            for k in [n, n + 3, 2 * n, 40, 60] {
                if k < n {
                    continue;
                }
                let exact = expected_detachment_states_exact(n, k).to_f64();
                let float = expected_detachment_states(n, k);
                assert_relative_eq!(float, exact, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn expected_states_nondecreasing_in_k() {
        for n in 2..=5u64 {
            let mut prev = 0.0;
            for k in 1..=200 {
                let cur = expected_detachment_states(n, k);
                assert!(cur >= prev);
                prev = cur;
            }
        }
    }

    #[test]
    fn critical_window_examples() {
        let w = critical_window(100, 0.0).unwrap();
        assert!((w.time - 812.2).abs() < 0.1, "k(100, 0) = {}", w.time);
        assert_relative_eq!(w.limit, 0.125, max_relative = 1e-15);
        let w1 = critical_window(100, 1.0).unwrap();
        assert_relative_eq!(w1.limit, (-1.0f64).exp() / 8.0, max_relative = 1e-15);
        assert!(critical_window(2, 0.0).is_err());
    }

    #[test]
    fn lonely_moments_examples() {
        let m = lonely_moments(2, 2);
        assert_relative_eq!(m.mean, 1.0, max_relative = 1e-14);
        assert_relative_eq!(m.variance, 1.0, max_relative = 1e-13);
        let m = lonely_moments(3, 3);
        assert_relative_eq!(m.mean, 4.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(m.variance, 8.0 / 9.0, max_relative = 1e-12);
        let m = lonely_moments(1, 9);
        assert_eq!((m.mean, m.variance), (1.0, 0.0));
        assert!(lonely_moments(5, 1).concentration_ratio.is_none());

        let (mean, var) = lonely_moments_exact(3, 3);
        assert_eq!(mean, frac(4, 3).into_ratio());
        assert_eq!(var, frac(8, 9).into_ratio());
    }

    #[test]
    fn lonely_ratio_consistent_with_direct_formula() {
        for (n, k) in [(10u64, 7u64), (50, 13), (200, 41), (1000, 97)] {
            let m = lonely_moments(n, k);
            let direct = m.variance / (m.mean * m.mean);
            assert_relative_eq!(
                m.concentration_ratio.unwrap(),
                direct,
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn support_tail_examples() {
        assert_eq!(support_tail_exact(2, 2, 1).unwrap(), ExactProb::one());
        assert_eq!(support_tail_exact(3, 3, 2).unwrap(), frac(8, 9));
        assert_eq!(
            support_tail_exact(3, 3, 3).unwrap(),
            detached_prob_exact(3, 3)
        );
        assert!(support_tail_exact(3, 3, 4).is_err());
        assert_relative_eq!(
            support_tail(3, 3, 2).unwrap(),
            8.0 / 9.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn support_pmf_examples_and_consistency() {
        assert_eq!(support_pmf_exact(2, 2), vec![frac(1, 2), frac(1, 2)]);
        assert_eq!(support_pmf_exact(1, 5), vec![ExactProb::one()]);
        assert_eq!(support_pmf_exact(3, 2), vec![frac(1, 4), frac(3, 4)]);
        for n in 1..=6u64 {
            for k in 1..=7u64 {
                let alt = support_pmf_exact(n, k);
                let chain = support_pmf_chain_exact(n, k);
                assert_eq!(alt, chain, "paths disagree at ({n},{k})");
                let total: BigRational = alt.iter().map(|p| p.ratio().clone()).sum();
                assert_eq!(total, BigRational::one(), "pmf does not sum to 1");
                let float = support_pmf(n, k);
                for (e, f) in alt.iter().zip(float) {
                    assert_relative_eq!(e.to_f64(), f, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn support_pmf_tail_agrees_with_stirling_tail() {
        for n in 2..=6u64 {
            for k in 1..=7u64 {
                let pmf = support_pmf_exact(n, k);
                for m in 1..=n.min(k) {
                    let tail: BigRational = pmf[(m - 1) as usize..]
                        .iter()
                        .map(|p| p.ratio().clone())
                        .sum();
                    assert_eq!(
                        tail,
                        support_tail_exact(n, k, m).unwrap().into_ratio(),
                        "tail mismatch at ({n},{k},{m})"
                    );
                }
            }
        }
    }

    #[test]
    fn support_gf_matches_pmf() {
        // Agreement at k+1 distinct points pins the degree <= k polynomial.
        for n in 1..=5u64 {
            for k in 1..=5u64 {
                let pmf = support_pmf_exact(n, k);
                for point in 0..=k {
                    let z = BigRational::new(BigInt::from(point), BigInt::from(k + 1));
                    let gf = support_gf_exact(n, k, &z);
                    let direct: BigRational = pmf
                        .iter()
                        .enumerate()
                        .map(|(i, p)| p.ratio() * pow_ratio(&z, i as u64 + 1))
                        .sum();
                    assert_eq!(gf, direct, "gf mismatch at ({n},{k},z={z})");
                }
            }
        }
        assert_eq!(
            support_gf_exact(4, 3, &BigRational::one()),
            BigRational::one()
        );
        assert_eq!(support_gf(3, 2, 0.0), 0.0);
        assert_relative_eq!(support_gf(4, 3, 1.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn support_moments_examples() {
        let (mean, var) = support_moments_exact(2, 2);
        assert_eq!(mean, frac(3, 2).into_ratio());
        assert_eq!(var, frac(1, 4).into_ratio());
        let (mean, var) = support_moments_exact(1, 6);
        assert_eq!(mean, BigRational::one());
        assert_eq!(var, BigRational::zero());
        let (mean, _) = support_moments_exact(3, 3);
        assert_eq!(mean, frac(19, 9).into_ratio());

        let (mf, vf) = support_moments(3, 3);
        assert_relative_eq!(mf, 19.0 / 9.0, max_relative = 1e-12);
        let (_, var33) = support_moments_exact(3, 3);
        assert_relative_eq!(vf, var33.to_f64().unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn support_moments_match_pmf_moments() {
        for n in 1..=6u64 {
            for k in 1..=7u64 {
                let pmf = support_pmf_exact(n, k);
                let mean: BigRational = pmf
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p.ratio() * BigRational::from(BigInt::from(i as u64 + 1)))
                    .sum();
                let second: BigRational = pmf
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        p.ratio() * BigRational::from(BigInt::from((i as u64 + 1) * (i as u64 + 1)))
                    })
                    .sum();
                let var = second - &mean * &mean;
                let (fmean, fvar) = support_moments_exact(n, k);
                assert_eq!(mean, fmean, "support mean mismatch at ({n},{k})");
                assert_eq!(var, fvar, "support variance mismatch at ({n},{k})");
            }
        }
    }

    #[test]
    fn extreme_limits() {
        assert_relative_eq!(
            extreme_limit_cdf(1, 0.3, Extreme::Min).unwrap(),
            0.3,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            extreme_limit_cdf(2, 0.5, Extreme::Max).unwrap(),
            0.25,
            max_relative = 1e-15
        );
        assert!(extreme_limit_cdf(2, 1.5, Extreme::Max).is_err());
        let m = extreme_limit_moments(3);
        assert_relative_eq!(m.range_mean, 0.5, max_relative = 1e-15);
        assert_relative_eq!(m.min_mean, 0.25, max_relative = 1e-15);
        assert_relative_eq!(
            m.std_dev,
            (3.0f64 / 5.0).sqrt() / 4.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn scaling_limit_examples() {
        assert_relative_eq!(
            scaling_limit_value(LimitKind::Single, 1.0, 0.0).unwrap(),
            (-0.5f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            scaling_limit_value(LimitKind::CondDetached, 1.0, 2.0).unwrap(),
            (-0.125f64).exp(),
            max_relative = 1e-15
        );
        // d downarrow c: conditional limit tends to 1.
        let near = scaling_limit_value(LimitKind::CondDetached, 1.0, 1.0 + 1e-9).unwrap();
        assert!((near - 1.0).abs() < 1e-9);
        assert!(scaling_limit_value(LimitKind::Joint, 2.0, 1.0).is_err());
        assert!(scaling_limit_value(LimitKind::Single, -1.0, 0.0).is_err());
        // Joint = single * cond at matching scales.
        let j = scaling_limit_value(LimitKind::Joint, 1.0, 2.0).unwrap();
        let s = scaling_limit_value(LimitKind::Single, 1.0, 0.0).unwrap();
        let c = scaling_limit_value(LimitKind::CondDetached, 1.0, 2.0).unwrap();
        assert_relative_eq!(j, s * c, max_relative = 1e-14);
    }

    #[test]
    fn cond_detached_approaches_scaling_limit() {
        // O(1/n) convergence at (c, d) = (1, 2).
        let limit = scaling_limit_value(LimitKind::CondDetached, 1.0, 2.0).unwrap();
        let mut prev_err = f64::INFINITY;
        for n in [50u64, 100, 200] {
            let v = cond_detached(n, n * n, 2 * n * n).unwrap();
            let err = (v - limit).abs();
            assert!(err < 5.0 / n as f64, "error {err} too large at n={n}");
            assert!(err < prev_err);
            prev_err = err;
        }
    }
}
