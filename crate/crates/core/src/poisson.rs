//! Poisson-passenger variant of the process and a binomial
//! stochastic-dominance decision procedure.
//!
//! With a Poisson(lambda) passenger count, bus occupancies at time `k` are
//! i.i.d. Poisson(lambda/k), which turns several process questions into
//! one-line computations: full detachment has probability
//! `exp(-lambda) (1 + lambda/k)^k` and the lonely count is exactly
//! `Bin(k, (lambda/k) exp(-lambda/k))`. Monotonicity of the lonely count in
//! `k` then reduces to a criterion for stochastic dominance between binomial
//! laws, implemented here both as the zero-atom test ([`binomial_dominates`])
//! and as an exhaustive exact CDF comparison ([`binomial_dominates_cdf`], the
//! oracle of record - any disagreement is a bug, never a runtime fallback).

use num::rational::BigRational;
use num::traits::{One, Zero};

use crate::combinatorics::{binomial, pow_ratio};
use crate::{Error, Result};

/// A binomial law `Bin(trials, success_prob)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialSpec {
    pub trials: u64,
    pub success_prob: f64,
}

impl BinomialSpec {
    pub fn new(trials: u64, success_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&success_prob) {
            return Err(Error::NotAProbability {
                name: "success_prob",
                value: success_prob,
            });
        }
        Ok(BinomialSpec {
            trials,
            success_prob,
        })
    }
}

/// P(full detachment at time `k`) under a Poisson(lambda) passenger count:
/// `exp(-lambda) (1 + lambda/k)^k`. Increasing in `k`, and tends to 1 as
/// `k -> infinity` whenever `lambda(k)^2 = o(k)`.
pub fn full_detachment_prob(lambda: f64, k: u64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::NonPositive {
            name: "lambda",
            value: lambda,
        });
    }
    assert!(k >= 1);
    Ok((-lambda + k as f64 * (lambda / k as f64).ln_1p()).exp())
}

/// P(no bus holds exactly one passenger) under Poisson(lambda) passengers:
/// `(1 - (lambda/k) exp(-lambda/k))^k`. Nonincreasing in `k` for fixed
/// lambda.
pub fn no_lonely_prob(lambda: f64, k: u64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::NonPositive {
            name: "lambda",
            value: lambda,
        });
    }
    assert!(k >= 1);
    let x = lambda / k as f64;
    Ok((k as f64 * (-x * (-x).exp()).ln_1p()).exp())
}

/// Zero-atom dominance criterion: `sub` is stochastically dominated by `dom`
/// iff `dom.trials >= sub.trials` and `P(dom = 0) <= P(sub = 0)`.
///
/// The zero-atom comparison runs in the log domain; success probabilities of
/// exactly 0 or 1 are dispatched by case analysis first so no `log(0)`
/// sentinel leaks into the comparison.
pub fn binomial_dominates(sub: &BinomialSpec, dom: &BinomialSpec) -> bool {
    let (m, q) = (sub.trials, sub.success_prob);
    let (n, p) = (dom.trials, dom.success_prob);
    if n < m {
        return false;
    }
    // P(dom = 0) = (1-p)^n <= (1-q)^m = P(sub = 0)?
    if p >= 1.0 {
        return true; // left side is 0 (n >= 1)
    }
    if q >= 1.0 {
        return false; // right side is 0 but left is positive
    }
    if q <= 0.0 {
        return true; // right side is 1
    }
    if p <= 0.0 {
        return false; // left side is 1, right is < 1
    }
    n as f64 * (-p).ln_1p() <= m as f64 * (-q).ln_1p()
}

/// Exhaustive dominance check: computes both CDFs exactly (success
/// probabilities are mapped to their exact binary rationals) and verifies
/// `CDF_dom(t) <= CDF_sub(t)` for every integer `t`.
pub fn binomial_dominates_cdf(sub: &BinomialSpec, dom: &BinomialSpec) -> bool {
    let sub_cdf = exact_cdf(sub);
    let dom_cdf = exact_cdf(dom);
    let top = sub_cdf.len().max(dom_cdf.len());
    let one = BigRational::one();
    for t in 0..top {
        let s = sub_cdf.get(t).unwrap_or(&one);
        let d = dom_cdf.get(t).unwrap_or(&one);
        if d > s {
            return false;
        }
    }
    true
}

/// Exact binomial CDF values at t = 0, 1, ..., trials.
fn exact_cdf(spec: &BinomialSpec) -> Vec<BigRational> {
    let n = spec.trials;
    let p = BigRational::from_float(spec.success_prob).expect("probability is finite");
    let q = BigRational::one() - &p;
    let mut cdf = Vec::with_capacity(n as usize + 1);
    let mut acc = BigRational::zero();
    for t in 0..=n {
        let term = BigRational::from(binomial(n, t)) * pow_ratio(&p, t) * pow_ratio(&q, n - t);
        acc += term;
        cdf.push(acc.clone());
    }
    cdf
}

/// The binomial law of the lonely-passenger count at time `k` under
/// Poisson(lambda) passengers: `Bin(k, (lambda/k) exp(-lambda/k))`.
pub fn lonely_count_law(lambda: f64, k: u64) -> Result<BinomialSpec> {
    if lambda <= 0.0 {
        return Err(Error::NonPositive {
            name: "lambda",
            value: lambda,
        });
    }
    assert!(k >= 1);
    let x = lambda / k as f64;
    BinomialSpec::new(k, x * (-x).exp())
}

/// Monotonicity of the Poissonized lonely count: the law at `k1` is
/// stochastically dominated by the law at `k2 > k1`, for every lambda.
/// Returns the criterion verdict (which must always be `true`).
pub fn poisson_lonely_dominates(lambda: f64, k1: u64, k2: u64) -> Result<bool> {
    if k2 <= k1 {
        return Err(Error::TimesNotIncreasing {
            earlier: k1,
            later: k2,
        });
    }
    let sub = lonely_count_law(lambda, k1)?;
    let dom = lonely_count_law(lambda, k2)?;
    Ok(binomial_dominates(&sub, &dom))
}
