//! Arbitrary-precision and log-domain combinatorial kernels.
//!
//! Everything else in the crate is built on the four primitives here: falling
//! factorials, the stable log of the collision-free ratio `(k)_n / k^n`,
//! Stirling numbers of the second kind, and the terminating hypergeometric
//! series `2F0(-n, -l; -; z) = sum_r C(n,r) (l)_r z^r`.
//!
//! Two numeric carriers are used throughout: [`ExactProb`] (reduced big
//! rationals, bit-exact, for small instances and every oracle comparison) and
//! [`LogProb`] (natural-log f64, for large parameters where exact arithmetic
//! is hopeless but relative error stays at machine scale).

use std::fmt;
use std::sync::OnceLock;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Exact probability: a reduced big rational.
///
/// `BigRational` keeps the value in lowest terms with a positive denominator,
/// which is exactly the invariant we need.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactProb(BigRational);

impl ExactProb {
    pub fn new(numer: BigInt, denom: BigInt) -> Self {
        assert!(!denom.is_zero(), "ExactProb denominator must be nonzero");
        ExactProb(BigRational::new(numer, denom))
    }

    pub fn from_ratio(ratio: BigRational) -> Self {
        ExactProb(ratio)
    }

    pub fn from_u64(n: u64, d: u64) -> Self {
        Self::new(BigInt::from(n), BigInt::from(d))
    }

    pub fn zero() -> Self {
        ExactProb(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactProb(BigRational::one())
    }

    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn into_ratio(self) -> BigRational {
        self.0
    }

    /// True when the value lies in `[0, 1]`.
    pub fn is_probability(&self) -> bool {
        !self.0.is_negative() && self.0 <= BigRational::one()
    }

    /// Nearest f64, robust to numerator/denominator far beyond f64 range.
    pub fn to_f64(&self) -> f64 {
        big_ratio_to_f64(&self.0)
    }

    pub fn to_log(&self) -> LogProb {
        if self.0.is_zero() {
            return LogProb::never();
        }
        assert!(
            self.0.is_positive(),
            "cannot take the log of a negative value"
        );
        LogProb::from_log(ln_big(self.0.numer()) - ln_big(self.0.denom()))
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Log-domain nonnegative real: stores `ln(x)`, with `-inf` encoding zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub fn from_log(log_value: f64) -> Self {
        LogProb(log_value)
    }

    pub fn from_prob(p: f64) -> Self {
        assert!(p >= 0.0, "LogProb encodes nonnegative quantities");
        LogProb(p.ln())
    }

    /// The zero probability.
    pub fn never() -> Self {
        LogProb(f64::NEG_INFINITY)
    }

    pub fn certain() -> Self {
        LogProb(0.0)
    }

    pub fn log(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    /// Product of the underlying values (sum of logs).
    pub fn and(self, other: LogProb) -> LogProb {
        LogProb(self.0 + other.0)
    }

    /// Sum of the underlying values (log-add-exp).
    pub fn or(self, other: LogProb) -> LogProb {
        LogProb(log_add_exp(self.0, other.0))
    }
}

/// `log(exp(a) + exp(b))` without overflow; handles `-inf` operands.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Natural log of a positive big integer, accurate to f64 precision.
pub fn ln_big(x: &BigInt) -> f64 {
    assert!(x.is_positive(), "ln_big requires a positive integer");
    if let Some(v) = x.to_f64().filter(|v| v.is_finite()) {
        return v.ln();
    }
    // Too large for f64: take the top 64 bits as mantissa.
    let bits = x.bits();
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit mantissa fits f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn big_ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64().filter(|v| v.is_finite()) {
        return v;
    }
    if r.is_zero() {
        return 0.0;
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let ln = ln_big(&r.numer().abs()) - ln_big(r.denom());
    sign * ln.exp()
}

/// Falling factorial `a (a-1) ... (a-r+1)`; the empty product (`r = 0`) is 1.
///
/// Total on all integers `a`: in particular it vanishes when `0 <= a < r`.
pub fn falling_factorial(a: i64, r: u64) -> BigInt {
    let mut acc = BigInt::one();
    for j in 0..r {
        let factor = a - j as i64;
        if factor == 0 {
            return BigInt::zero();
        }
        acc *= factor;
    }
    acc
}

/// Binomial coefficient `C(n, r)` with the convention `C(n, r) = 0` for `r > n`.
pub fn binomial(n: u64, r: u64) -> BigInt {
    if r > n {
        return BigInt::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigInt::one();
    for j in 0..r {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

/// `log((k)_n / k^n) = sum_{j=1}^{n-1} log(1 - j/k)`, summed directly.
///
/// Summing `ln_1p(-j/k)` term by term stays accurate even when `n` is close
/// to `k`, where a log-gamma difference would cancel catastrophically.
pub fn log_falling_ratio(k: u64, n: u64) -> Result<LogProb> {
    if n == 0 || k == 0 || n > k {
        return Err(Error::InvalidRatioArgs { n, k });
    }
    let kf = k as f64;
    let mut acc = 0.0;
    for j in 1..n {
        acc += (-(j as f64) / kf).ln_1p();
    }
    Ok(LogProb::from_log(acc))
}

/// Exact `(k)_n / k^n` as a rational, the companion of [`log_falling_ratio`].
pub fn falling_ratio_exact(k: u64, n: u64) -> Result<ExactProb> {
    if n == 0 || k == 0 || n > k {
        return Err(Error::InvalidRatioArgs { n, k });
    }
    let numer = falling_factorial(k as i64, n);
    let denom = BigInt::from(k).pow(n as u32);
    Ok(ExactProb::new(numer, denom))
}

/// Dense table of Stirling numbers of the second kind `S(a, b)`.
///
/// Row-major, built once by the triangular recurrence
/// `S(a, b) = b S(a-1, b) + S(a-1, b-1)`, immutable afterwards and safe to
/// share across threads.
#[derive(Debug)]
pub struct StirlingTable {
    max_a: usize,
    max_b: usize,
    entries: Vec<BigInt>,
}

impl StirlingTable {
    pub fn new(max_a: usize, max_b: usize) -> Self {
        let stride = max_b + 1;
        let mut entries = vec![BigInt::zero(); (max_a + 1) * stride];
        entries[0] = BigInt::one(); // S(0, 0) = 1
        for a in 1..=max_a {
            for b in 1..=max_b.min(a) {
                let prev_same = entries[(a - 1) * stride + b].clone();
                let prev_diag = entries[(a - 1) * stride + b - 1].clone();
                entries[a * stride + b] = BigInt::from(b as u64) * prev_same + prev_diag;
            }
        }
        StirlingTable {
            max_a,
            max_b,
            entries,
        }
    }

    pub fn max_a(&self) -> usize {
        self.max_a
    }

    pub fn max_b(&self) -> usize {
        self.max_b
    }

    pub fn get(&self, a: u64, b: u64) -> &BigInt {
        assert!(
            a as usize <= self.max_a && b as usize <= self.max_b,
            "S({a}, {b}) outside the table ({} x {})",
            self.max_a,
            self.max_b
        );
        &self.entries[a as usize * (self.max_b + 1) + b as usize]
    }
}

const CACHED_STIRLING: usize = 200;

fn cached_stirling_table() -> &'static StirlingTable {
    static TABLE: OnceLock<StirlingTable> = OnceLock::new();
    TABLE.get_or_init(|| StirlingTable::new(CACHED_STIRLING, CACHED_STIRLING))
}

/// Stirling number of the second kind `S(a, b)`.
///
/// Served from a shared table for `a, b <= 200`; larger arguments fall back
/// to a rolling-row evaluation of the same recurrence.
pub fn stirling2(a: u64, b: u64) -> BigInt {
    if b > a {
        return BigInt::zero();
    }
    if a as usize <= CACHED_STIRLING && b as usize <= CACHED_STIRLING {
        return cached_stirling_table().get(a, b).clone();
    }
    // Rolling row: entry j holds S(row, j) for j <= b.
    let width = b as usize + 1;
    let mut row = vec![BigInt::zero(); width];
    row[0] = BigInt::one();
    for _step in 1..=a {
        for j in (1..width).rev() {
            let carried = row[j - 1].clone();
            row[j] = BigInt::from(j as u64) * &row[j] + carried;
        }
        row[0] = BigInt::zero();
    }
    row.pop().expect("row is nonempty")
}

/// `base^exp` by binary exponentiation.
pub fn pow_ratio(base: &BigRational, exp: u64) -> BigRational {
    let mut acc = BigRational::one();
    let mut sq = base.clone();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &sq;
        }
        sq = &sq * &sq;
        e >>= 1;
    }
    acc
}

/// Exact value of the terminating series `sum_{r=0}^{min(n,l)} C(n,r) (l)_r z^r`
/// (`2F0(-n, -l; -; z)` written with falling factorials).
pub fn two_f_zero_exact(n: u64, l: u64, z: &BigRational) -> BigRational {
    let mut sum = BigRational::one();
    let mut term = BigRational::one();
    for r in 0..n.min(l) {
        // C(n,r+1)/C(n,r) = (n-r)/(r+1); (l)_{r+1}/(l)_r = (l-r)
        let step = BigRational::new(BigInt::from((n - r) * (l - r)), BigInt::from(r + 1));
        term = term * step * z;
        sum += &term;
    }
    sum
}

/// Log of the same series for real `z > 0`; all terms are nonnegative so the
/// log-sum-exp accumulation keeps relative error at machine scale times the
/// number of terms.
pub fn two_f_zero_log(n: u64, l: u64, z: f64) -> LogProb {
    assert!(z > 0.0, "log-domain series needs z > 0");
    let ln_z = z.ln();
    let mut log_sum = 0.0; // r = 0 term is 1
    let mut log_term = 0.0;
    for r in 0..n.min(l) {
        log_term += ((n - r) as f64).ln() + ((l - r) as f64).ln() - ((r + 1) as f64).ln() + ln_z;
        log_sum = log_add_exp(log_sum, log_term);
    }
    LogProb::from_log(log_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num::traits::Pow;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn falling_factorial_basics() {
        assert_eq!(falling_factorial(5, 3), BigInt::from(60));
        assert_eq!(falling_factorial(7, 0), BigInt::one());
        assert_eq!(falling_factorial(-3, 0), BigInt::one());
        assert_eq!(falling_factorial(2, 3), BigInt::zero());
        assert_eq!(falling_factorial(-2, 3), BigInt::from(-24)); // (-2)(-3)(-4)
    }

    #[test]
    fn binomial_basics() {
        assert_eq!(binomial(4, 2), BigInt::from(6));
        assert_eq!(binomial(10, 0), BigInt::one());
        assert_eq!(binomial(3, 5), BigInt::zero());
        assert_eq!(binomial(52, 5), BigInt::from(2598960u64));
    }

    #[test]
    fn log_falling_ratio_examples() {
        assert_eq!(log_falling_ratio(5, 1).unwrap().log(), 0.0);
        assert_relative_eq!(
            log_falling_ratio(3, 3).unwrap().log(),
            (2.0f64 / 9.0).ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            log_falling_ratio(2, 2).unwrap().log(),
            0.5f64.ln(),
            max_relative = 1e-14
        );
        assert!(log_falling_ratio(3, 4).is_err());
    }

    #[test]
    fn log_falling_ratio_matches_exact_up_to_40() {
        for k in 1..=40u64 {
            for n in 1..=k {
                let exact = falling_ratio_exact(k, n).unwrap().to_f64();
                let logged = log_falling_ratio(k, n).unwrap().prob();
                assert_relative_eq!(logged, exact, max_relative = 1e-12);
            }
        }
    }

    /// Count set partitions of `a` labelled items into exactly `b` blocks by
    /// brute force over block assignments in canonical form.
    fn partition_count(a: u64, b: u64) -> u64 {
        fn rec(remaining: u64, used_blocks: u64, target: u64, labels: &mut Vec<u64>) -> u64 {
            if remaining == 0 {
                return u64::from(used_blocks == target);
            }
            let mut total = 0;
            // The next item joins an existing block or opens block `used_blocks`.
            for block in 0..=used_blocks.min(target - 1) {
                labels.push(block);
                let next_used = used_blocks.max(block + 1);
                total += rec(remaining - 1, next_used, target, labels);
                labels.pop();
            }
            total
        }
        if b == 0 {
            return u64::from(a == 0);
        }
        rec(a, 0, b, &mut Vec::new())
    }

    #[test]
    fn stirling_matches_partition_enumeration() {
        assert_eq!(stirling2(4, 2), BigInt::from(7));
        for a in 0..=7u64 {
            for b in 0..=7u64 {
                assert_eq!(
                    stirling2(a, b),
                    BigInt::from(partition_count(a, b)),
                    "S({a},{b})"
                );
            }
        }
    }

    #[test]
    fn stirling_edges() {
        for n in 1..=30u64 {
            assert_eq!(stirling2(n, n), BigInt::one());
            assert_eq!(stirling2(n, 1), BigInt::one());
        }
        assert_eq!(stirling2(3, 5), BigInt::zero());
        assert_eq!(stirling2(0, 0), BigInt::one());
        assert_eq!(stirling2(5, 0), BigInt::zero());
    }

    #[test]
    fn stirling_rolling_row_agrees_with_table() {
        // Exercise the >200 fallback against the recurrence on a fresh table.
        let big = StirlingTable::new(205, 12);
        for b in 0..=12u64 {
            assert_eq!(&stirling2(205, b), big.get(205, b));
        }
    }

    #[test]
    fn stirling_summation_formula_to_60() {
        // S(a+1, b+1) = sum_{j=b}^{a} (b+1)^{a-j} S(j, b)
        let table = StirlingTable::new(60, 60);
        for a in 0..60u64 {
            for b in 0..=a.min(59) {
                let mut sum = BigInt::zero();
                for j in b..=a {
                    sum += BigInt::from(b + 1).pow((a - j) as u32) * table.get(j, b);
                }
                assert_eq!(&sum, table.get(a + 1, b + 1), "summation at ({a},{b})");
            }
        }
    }

    #[test]
    fn stirling_rennie_dobson_bounds() {
        // (b^2+b+2) b^{a-b-1} / 2 - 1 <= S(a,b) <= C(a,b) b^{a-b} / 2,
        // valid strictly below the diagonal (both sides fail at a = b, where
        // S(a,a) = 1).
        for a in 2..=60u64 {
            for b in 1..a {
                let s = stirling2(a, b);
                let two = BigInt::from(2);
                let lower = (BigInt::from(b * b + b + 2) * BigInt::from(b).pow((a - b - 1) as u32)
                    - &two)
                    / &two;
                let upper = binomial(a, b) * BigInt::from(b).pow((a - b) as u32) / &two;
                assert!(lower <= s, "lower bound at ({a},{b})");
                assert!(s <= upper, "upper bound at ({a},{b})");
            }
        }
    }

    #[test]
    fn two_f_zero_examples() {
        assert_eq!(two_f_zero_exact(2, 1, &ratio(1, 2)), ratio(2, 1));
        assert_eq!(two_f_zero_exact(1, 1, &ratio(3, 7)), ratio(10, 7)); // 1 + z
        assert_eq!(two_f_zero_exact(2, 2, &ratio(1, 2)), ratio(7, 2));
    }

    #[test]
    fn two_f_zero_symmetric_in_n_and_l() {
        let zs = [ratio(1, 2), ratio(1, 7), ratio(3, 5), ratio(2, 1)];
        for n in 1..=12u64 {
            for l in 1..=12u64 {
                for z in &zs {
                    assert_eq!(
                        two_f_zero_exact(n, l, z),
                        two_f_zero_exact(l, n, z),
                        "asymmetric at n={n}, l={l}"
                    );
                }
            }
        }
    }

    #[test]
    fn two_f_zero_term_identity() {
        // C(n,r)(l)_r = r! C(n,r) C(l,r): both orderings produce the same term.
        for n in 1..=8u64 {
            for l in 1..=8u64 {
                for r in 0..=n.min(l) {
                    let via_falling = binomial(n, r) * falling_factorial(l as i64, r);
                    let mut r_fact = BigInt::one();
                    for j in 1..=r {
                        r_fact *= BigInt::from(j);
                    }
                    let via_binomials = r_fact * binomial(n, r) * binomial(l, r);
                    assert_eq!(via_falling, via_binomials);
                }
            }
        }
    }

    #[test]
    fn two_f_zero_log_matches_exact() {
        for n in 1..=15u64 {
            for l in 1..=15u64 {
                let z = ratio(1, 3);
                let exact = two_f_zero_exact(n, l, &z)
                    .to_f64()
                    .expect("fits f64 at this size");
                let logged = two_f_zero_log(n, l, 1.0 / 3.0).prob();
                assert_relative_eq!(logged, exact, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn log_prob_algebra() {
        let half = LogProb::from_prob(0.5);
        let third = LogProb::from_prob(1.0 / 3.0);
        assert_relative_eq!(half.and(third).prob(), 1.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(half.or(third).prob(), 5.0 / 6.0, max_relative = 1e-14);
        assert_eq!(LogProb::never().or(half).prob(), 0.5);
        assert_eq!(LogProb::never().and(half).prob(), 0.0);
    }

    #[test]
    fn exact_prob_display_and_log() {
        let p = ExactProb::from_u64(2, 9);
        assert_eq!(p.to_string(), "2/9");
        assert!(p.is_probability());
        assert_relative_eq!(p.to_log().prob(), 2.0 / 9.0, max_relative = 1e-14);
        // Values beyond f64 range still convert via logs.
        let huge = BigInt::from(10u64).pow(400u32);
        let tiny = ExactProb::new(BigInt::one(), huge.clone());
        assert!(tiny.to_f64() == 0.0 || tiny.to_f64() < 1e-300);
        assert_relative_eq!(
            tiny.to_log().log(),
            -400.0 * std::f64::consts::LN_10,
            max_relative = 1e-12
        );
        let near_one = ExactProb::new(&huge - BigInt::one(), huge);
        assert_relative_eq!(near_one.to_f64(), 1.0, max_relative = 1e-12);
    }
}
