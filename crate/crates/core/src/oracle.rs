//! Brute-force exact ground truth on tiny instances.
//!
//! Everything here is exhaustive enumeration in exact integer/rational
//! arithmetic - no floating point anywhere. Single-time laws iterate all
//! `k^n` equiprobable assignments; multi-time laws additionally iterate
//! displacement vectors for the block transition (each passenger either
//! stays, with weight `k`, or picks one of the `l` new buses, with weight 1,
//! over the common denominator `k + l`). Outcome weights are integers over a
//! fixed power denominator, so accumulation is exact and cheap; masses are
//! normalised to rationals only at the end.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Zero};

use crate::combinatorics::ExactProb;
use crate::exact::detached_prob_exact;
use crate::{Error, Result};

pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Exact probability mass function over arbitrary outcome labels.
#[derive(Debug, Clone)]
pub struct ExactPmf<K: Ord> {
    masses: BTreeMap<K, BigRational>,
}

impl<K: Ord> ExactPmf<K> {
    fn from_counts(counts: BTreeMap<K, BigInt>, denom: BigInt) -> Self {
        let masses = counts
            .into_iter()
            .map(|(key, count)| (key, BigRational::new(count, denom.clone())))
            .collect();
        let pmf = ExactPmf { masses };
        debug_assert!(pmf.total().is_one(), "oracle pmf must sum to one");
        pmf
    }

    pub fn mass(&self, key: &K) -> BigRational {
        self.masses.get(key).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &BigRational)> {
        self.masses.iter()
    }

    pub fn total(&self) -> BigRational {
        self.masses.values().sum()
    }

    pub fn prob_of(&self, mut predicate: impl FnMut(&K) -> bool) -> BigRational {
        self.masses
            .iter()
            .filter(|(k, _)| predicate(k))
            .map(|(_, m)| m)
            .sum()
    }
}

/// Joint observable label of a single-time outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SingleOutcome {
    pub lonely: u32,
    pub support: u32,
    pub clumping: u64,
}

/// Exact joint law of (lonely count, support size, clumping) at one time.
#[derive(Debug, Clone)]
pub struct SingleTimeLaw {
    pub n: u64,
    pub k: u64,
    pmf: ExactPmf<SingleOutcome>,
    /// Joint counts of (lonely, support) over the common denominator k^n.
    lonely_support: BTreeMap<(u32, u32), BigInt>,
    denom: BigInt,
}

/// Incrementally maintained histogram statistics of one assignment.
struct Histogram {
    counts: Vec<u32>,
    lonely: u32,
    support: u32,
    clumping: u64,
}

impl Histogram {
    fn all_in_first(n: u64, buses: u64) -> Self {
        let mut counts = vec![0u32; buses as usize + 1];
        counts[1] = n as u32;
        Histogram {
            counts,
            lonely: u32::from(n == 1),
            support: 1,
            clumping: n * n,
        }
    }

    fn move_one(&mut self, from: u64, to: u64) {
        if from == to {
            return;
        }
        let old = self.counts[from as usize];
        self.counts[from as usize] -= 1;
        self.clumping -= 2 * old as u64 - 1;
        match old {
            1 => {
                self.lonely -= 1;
                self.support -= 1;
            }
            2 => self.lonely += 1,
            _ => {}
        }
        let new = self.counts[to as usize] + 1;
        self.counts[to as usize] = new;
        self.clumping += 2 * new as u64 - 1;
        match new {
            1 => {
                self.lonely += 1;
                self.support += 1;
            }
            2 => self.lonely -= 1,
            _ => {}
        }
    }
}

/// Odometer over `digits^n` states; yields which digit changed. The total
/// number of digit changes over a full sweep is at most twice the state
/// count, so incremental updates are amortised O(1).
struct Odometer {
    digits: Vec<u64>,
    base: u64,
}

impl Odometer {
    fn new(len: u64, base: u64) -> Self {
        Odometer {
            digits: vec![0; len as usize],
            base,
        }
    }

    /// Advance to the next state, reporting `(position, old, new)` for every
    /// digit that changed; returns false when the sweep is complete.
    fn advance(&mut self, mut on_change: impl FnMut(usize, u64, u64)) -> bool {
        for (pos, digit) in self.digits.iter_mut().enumerate() {
            let old = *digit;
            if old + 1 < self.base {
                *digit = old + 1;
                on_change(pos, old, old + 1);
                return true;
            }
            *digit = 0;
            on_change(pos, old, 0);
        }
        false
    }
}

fn check_budget(outcomes: u128, budget: u128) -> Result<()> {
    if outcomes > budget {
        return Err(Error::BudgetExceeded { outcomes, budget });
    }
    Ok(())
}

/// `base^exp` saturating at `u128::MAX` (which always exceeds any budget).
fn pow_outcomes(base: u64, exp: u64) -> u128 {
    u32::try_from(exp)
        .ok()
        .and_then(|e| (base as u128).checked_pow(e))
        .unwrap_or(u128::MAX)
}

/// Enumerate all `k^n` assignments and return the exact joint law of
/// (lonely, support, clumping).
pub fn enumerate_single_time(n: u64, k: u64, budget: u128) -> Result<SingleTimeLaw> {
    assert!(n >= 1 && k >= 1);
    check_budget(pow_outcomes(k, n), budget)?;

    let mut histogram = Histogram::all_in_first(n, k);
    let mut odo = Odometer::new(n, k);
    let mut counts: BTreeMap<SingleOutcome, u64> = BTreeMap::new();
    let mut pair_counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    loop {
        let outcome = SingleOutcome {
            lonely: histogram.lonely,
            support: histogram.support,
            clumping: histogram.clumping,
        };
        *counts.entry(outcome).or_insert(0) += 1;
        *pair_counts.entry((histogram.lonely, histogram.support)).or_insert(0) += 1;
        if !odo.advance(|_pos, old, new| histogram.move_one(old + 1, new + 1)) {
            break;
        }
    }

    let denom = BigInt::from(k).pow(n as u32);
    let big_counts = counts
        .into_iter()
        .map(|(key, c)| (key, BigInt::from(c)))
        .collect();
    let lonely_support = pair_counts
        .into_iter()
        .map(|(key, c)| (key, BigInt::from(c)))
        .collect();
    Ok(SingleTimeLaw {
        n,
        k,
        pmf: ExactPmf::from_counts(big_counts, denom.clone()),
        lonely_support,
        denom,
    })
}

impl SingleTimeLaw {
    pub fn pmf(&self) -> &ExactPmf<SingleOutcome> {
        &self.pmf
    }

    pub fn detached_prob(&self) -> BigRational {
        self.pmf.prob_of(|o| o.lonely as u64 == self.n)
    }

    /// Marginal pmf of the lonely count, indexed 0..=n.
    pub fn lonely_pmf(&self) -> Vec<BigRational> {
        let mut pmf = vec![BigRational::zero(); self.n as usize + 1];
        for ((lonely, _), count) in &self.lonely_support {
            pmf[*lonely as usize] += BigRational::new(count.clone(), self.denom.clone());
        }
        pmf
    }

    /// Marginal pmf of the support size, indexed r = 1..=min(n, k).
    pub fn support_pmf(&self) -> Vec<BigRational> {
        let top = self.n.min(self.k) as usize;
        let mut pmf = vec![BigRational::zero(); top];
        for ((_, support), count) in &self.lonely_support {
            pmf[*support as usize - 1] += BigRational::new(count.clone(), self.denom.clone());
        }
        pmf
    }

    /// Conditional pmf of the lonely count given support size `a`.
    pub fn lonely_given_support(&self, a: u32) -> Option<Vec<BigRational>> {
        let total: BigInt = self
            .lonely_support
            .iter()
            .filter(|((_, s), _)| *s == a)
            .map(|(_, c)| c.clone())
            .sum();
        if total.is_zero() {
            return None;
        }
        let mut pmf = vec![BigRational::zero(); self.n as usize + 1];
        for ((lonely, support), count) in &self.lonely_support {
            if *support == a {
                pmf[*lonely as usize] += BigRational::new(count.clone(), total.clone());
            }
        }
        Some(pmf)
    }

    pub fn lonely_mean(&self) -> BigRational {
        mean_of(&self.lonely_pmf(), 0)
    }

    pub fn lonely_variance(&self) -> BigRational {
        variance_of(&self.lonely_pmf(), 0)
    }

    pub fn support_mean(&self) -> BigRational {
        mean_of(&self.support_pmf(), 1)
    }

    pub fn support_variance(&self) -> BigRational {
        variance_of(&self.support_pmf(), 1)
    }

    /// P(support >= m).
    pub fn support_tail(&self, m: u64) -> BigRational {
        self.support_pmf()
            .iter()
            .enumerate()
            .filter(|(i, _)| (*i as u64 + 1) >= m)
            .map(|(_, p)| p)
            .sum()
    }
}

fn mean_of(pmf: &[BigRational], offset: u64) -> BigRational {
    pmf.iter()
        .enumerate()
        .map(|(i, p)| p * BigRational::from(BigInt::from(i as u64 + offset)))
        .sum()
}

fn variance_of(pmf: &[BigRational], offset: u64) -> BigRational {
    let mean = mean_of(pmf, offset);
    let second: BigRational = pmf
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let v = i as u64 + offset;
            p * BigRational::from(BigInt::from(v * v))
        })
        .sum();
    second - &mean * &mean
}

/// Exact joint law of the lonely counts at times `k` and `k + l`.
#[derive(Debug, Clone)]
pub struct TwoTimeLaw {
    pub n: u64,
    pub k: u64,
    pub l: u64,
    /// `joint[a][b]` = integer weight of (L_k = a, L_{k+l} = b) over
    /// `k^n (k+l)^n`.
    joint: Vec<Vec<u128>>,
    denom: BigInt,
}

/// Enumerate assignments at time `k` and block displacements to `k + l`.
pub fn enumerate_two_time(n: u64, k: u64, l: u64, budget: u128) -> Result<TwoTimeLaw> {
    assert!(n >= 1 && k >= 1 && l >= 1);
    let outcomes = pow_outcomes(k, n).saturating_mul(pow_outcomes(l + 1, n));
    check_budget(outcomes, budget)?;

    // Weight of a displacement vector: k per stayer over denominator (k+l)^n.
    let stay_weight: Vec<u128> = (0..=n).map(|s| (k as u128).pow(s as u32)).collect();
    let mut joint = vec![vec![0u128; n as usize + 1]; n as usize + 1];

    let mut first = Histogram::all_in_first(n, k);
    let mut outer = Odometer::new(n, k);
    loop {
        // Inner sweep over displacement digits: 0 = stay, j = move to bus k+j.
        let mut second = Histogram {
            counts: {
                let mut c = first.counts.clone();
                c.resize((k + l) as usize + 1, 0);
                c
            },
            lonely: first.lonely,
            support: first.support,
            clumping: first.clumping,
        };
        let mut stayers = n;
        let outer_digits = outer.digits.clone();
        let mut inner = Odometer::new(n, l + 1);
        loop {
            joint[first.lonely as usize][second.lonely as usize] +=
                stay_weight[stayers as usize];
            let advanced = inner.advance(|pos, old, new| {
                let home = outer_digits[pos] + 1;
                let from = if old == 0 { home } else { k + old };
                let to = if new == 0 { home } else { k + new };
                match (old == 0, new == 0) {
                    (true, false) => stayers -= 1,
                    (false, true) => stayers += 1,
                    _ => {}
                }
                second.move_one(from, to);
            });
            if !advanced {
                break;
            }
        }
        if !outer.advance(|_pos, old, new| first.move_one(old + 1, new + 1)) {
            break;
        }
    }

    let denom = BigInt::from(k).pow(n as u32) * BigInt::from(k + l).pow(n as u32);
    Ok(TwoTimeLaw { n, k, l, joint, denom })
}

impl TwoTimeLaw {
    fn prob(&self, mut predicate: impl FnMut(u64, u64) -> bool) -> BigRational {
        let mut total = BigInt::zero();
        for (a, row) in self.joint.iter().enumerate() {
            for (b, w) in row.iter().enumerate() {
                if *w != 0 && predicate(a as u64, b as u64) {
                    total += BigInt::from(*w);
                }
            }
        }
        BigRational::new(total, self.denom.clone())
    }

    /// P(detached at both times).
    pub fn joint_detached(&self) -> BigRational {
        let n = self.n;
        self.prob(|a, b| a == n && b == n)
    }

    /// P(detached at `k + l` | detached at `k`).
    pub fn cond_detached(&self) -> BigRational {
        let n = self.n;
        self.joint_detached() / self.prob(|a, _| a == n)
    }

    /// P(detached at `k + l` | not detached at `k`).
    pub fn cond_detached_given_not(&self) -> BigRational {
        let n = self.n;
        self.prob(|a, b| a < n && b == n) / self.prob(|a, _| a < n)
    }

    /// P(not detached at `k`, detached at `k + l`); with `l = 1` this is the
    /// probability that `k + 1` is a detachment time.
    pub fn detachment_transition_prob(&self) -> BigRational {
        let n = self.n;
        self.prob(|a, b| a < n && b == n)
    }

    /// Marginal pmf of the lonely count at the second time, indexed 0..=n.
    pub fn second_lonely_pmf(&self) -> Vec<BigRational> {
        let mut pmf = vec![BigRational::zero(); self.n as usize + 1];
        for row in &self.joint {
            for (b, w) in row.iter().enumerate() {
                if *w != 0 {
                    pmf[b] += BigRational::new(BigInt::from(*w), self.denom.clone());
                }
            }
        }
        pmf
    }
}

/// Exact detachment-indicator law at three increasing times.
#[derive(Debug, Clone)]
pub struct ThreeTimeLaw {
    /// Weights indexed by (detached at k1, at k2, at k3).
    cells: [[[BigInt; 2]; 2]; 2],
    denom: BigInt,
}

/// Enumerate three-time paths: assignments at `k1`, block displacements to
/// `k2`, then to `k3`.
pub fn enumerate_three_time(n: u64, k1: u64, k2: u64, k3: u64, budget: u128) -> Result<ThreeTimeLaw> {
    assert!(n >= 1 && k1 >= 1);
    if k2 <= k1 {
        return Err(Error::TimesNotIncreasing { earlier: k1, later: k2 });
    }
    if k3 <= k2 {
        return Err(Error::TimesNotIncreasing { earlier: k2, later: k3 });
    }
    let l1 = k2 - k1;
    let l2 = k3 - k2;
    let outcomes = pow_outcomes(k1, n)
        .saturating_mul(pow_outcomes(l1 + 1, n))
        .saturating_mul(pow_outcomes(l2 + 1, n));
    check_budget(outcomes, budget)?;

    let w1: Vec<u128> = (0..=n).map(|s| (k1 as u128).pow(s as u32)).collect();
    let w2: Vec<u128> = (0..=n).map(|s| (k2 as u128).pow(s as u32)).collect();
    let mut cells: [[[BigInt; 2]; 2]; 2] = Default::default();

    let mut first = Histogram::all_in_first(n, k1);
    let mut outer = Odometer::new(n, k1);
    loop {
        let outer_digits = outer.digits.clone();
        let d1 = usize::from(first.lonely as u64 == n);

        let mut second = Histogram {
            counts: {
                let mut c = first.counts.clone();
                c.resize(k2 as usize + 1, 0);
                c
            },
            lonely: first.lonely,
            support: first.support,
            clumping: first.clumping,
        };
        let mut stay1 = n;
        let mut middle = Odometer::new(n, l1 + 1);
        loop {
            let d2 = usize::from(second.lonely as u64 == n);
            // Innermost sweep from the state at k2.
            let middle_digits = middle.digits.clone();
            let mut third = Histogram {
                counts: {
                    let mut c = second.counts.clone();
                    c.resize(k3 as usize + 1, 0);
                    c
                },
                lonely: second.lonely,
                support: second.support,
                clumping: second.clumping,
            };
            let mut stay2 = n;
            let mut inner = Odometer::new(n, l2 + 1);
            loop {
                let d3 = usize::from(third.lonely as u64 == n);
                cells[d1][d2][d3] += BigInt::from(w1[stay1 as usize] * w2[stay2 as usize]);
                let advanced = inner.advance(|pos, old, new| {
                    let home = if middle_digits[pos] == 0 {
                        outer_digits[pos] + 1
                    } else {
                        k1 + middle_digits[pos]
                    };
                    let from = if old == 0 { home } else { k2 + old };
                    let to = if new == 0 { home } else { k2 + new };
                    match (old == 0, new == 0) {
                        (true, false) => stay2 -= 1,
                        (false, true) => stay2 += 1,
                        _ => {}
                    }
                    third.move_one(from, to);
                });
                if !advanced {
                    break;
                }
            }
            let advanced = middle.advance(|pos, old, new| {
                let home = outer_digits[pos] + 1;
                let from = if old == 0 { home } else { k1 + old };
                let to = if new == 0 { home } else { k1 + new };
                match (old == 0, new == 0) {
                    (true, false) => stay1 -= 1,
                    (false, true) => stay1 += 1,
                    _ => {}
                }
                second.move_one(from, to);
            });
            if !advanced {
                break;
            }
        }
        if !outer.advance(|_pos, old, new| first.move_one(old + 1, new + 1)) {
            break;
        }
    }

    let denom = BigInt::from(k1).pow(n as u32)
        * BigInt::from(k2).pow(n as u32)
        * BigInt::from(k3).pow(n as u32);
    Ok(ThreeTimeLaw { cells, denom })
}

impl ThreeTimeLaw {
    fn prob(&self, predicate: impl Fn(bool, bool, bool) -> bool) -> BigRational {
        let mut total = BigInt::zero();
        for d1 in 0..2 {
            for d2 in 0..2 {
                for d3 in 0..2 {
                    if predicate(d1 == 1, d2 == 1, d3 == 1) {
                        total += &self.cells[d1][d2][d3];
                    }
                }
            }
        }
        BigRational::new(total, self.denom.clone())
    }

    /// P(detached at all three times).
    pub fn triple_detached(&self) -> BigRational {
        self.prob(|a, b, c| a && b && c)
    }

    /// P(detached at the outer times but not the middle one).
    pub fn sandwich(&self) -> BigRational {
        self.prob(|a, b, c| a && !b && c)
    }
}

/// Exact bracketing of the permanent-detachment CDF: the closed form
/// `P(tau <= k)` below, the truncated infinite product
/// `pi_{n,k} prod_{i=k+1}^{upper} ((i-1)/i)^n (n+i-1)/(i-1)` above. The
/// product decreases to the CDF as `upper` grows.
#[derive(Debug, Clone)]
pub struct TailBracket {
    pub lower: ExactProb,
    pub upper: ExactProb,
}

pub fn permanent_cdf_truncated(n: u64, k: u64, upper: u64) -> Result<TailBracket> {
    if k < n {
        return Err(Error::TimeBeforePossibleDetachment { n, k });
    }
    if upper <= k {
        return Err(Error::TimesNotIncreasing { earlier: k, later: upper });
    }
    let mut product = detached_prob_exact(n, k).into_ratio();
    for i in (k + 1)..=upper {
        // ((i-1)/i)^n * (n+i-1)/(i-1) = (i-1)^{n-1} (n+i-1) / i^n
        let numer = BigInt::from(i - 1).pow((n - 1) as u32) * BigInt::from(n + i - 1);
        let denom = BigInt::from(i).pow(n as u32);
        product *= BigRational::new(numer, denom);
    }
    let exact = crate::exact::permanent_detachment_cdf_exact(n, k);
    debug_assert!(product >= *exact.ratio());
    Ok(TailBracket {
        lower: exact,
        upper: ExactProb::from_ratio(product),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn single_time_examples() {
        let law = enumerate_single_time(2, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(
            law.pmf().mass(&SingleOutcome { lonely: 0, support: 1, clumping: 4 }),
            ratio(1, 2)
        );
        assert_eq!(
            law.pmf().mass(&SingleOutcome { lonely: 2, support: 2, clumping: 2 }),
            ratio(1, 2)
        );

        let law = enumerate_single_time(1, 3, DEFAULT_BUDGET).unwrap();
        assert_eq!(
            law.pmf().mass(&SingleOutcome { lonely: 1, support: 1, clumping: 1 }),
            BigRational::one()
        );

        let law = enumerate_single_time(3, 3, DEFAULT_BUDGET).unwrap();
        let lonely = law.lonely_pmf();
        assert_eq!(lonely[3], ratio(2, 9));
        assert_eq!(lonely[1], ratio(2, 3));
        assert_eq!(lonely[0], ratio(1, 9));
        assert_eq!(law.detached_prob(), ratio(2, 9));
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(
            enumerate_single_time(30, 30, DEFAULT_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(enumerate_two_time(5, 4, 3, 100).is_err());
    }

    #[test]
    fn two_time_examples() {
        let law = enumerate_two_time(2, 2, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(law.joint_detached(), ratio(4, 9));
        let law = enumerate_two_time(1, 3, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(law.joint_detached(), BigRational::one());
        let law = enumerate_two_time(2, 3, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(law.joint_detached(), ratio(5, 8));
    }

    #[test]
    fn second_marginal_matches_single_time() {
        // The marginal at time k+l of the two-time law is the single-time law.
        for (n, k, l) in [(2u64, 2u64, 2u64), (3, 2, 2), (3, 3, 1)] {
            let two = enumerate_two_time(n, k, l, DEFAULT_BUDGET).unwrap();
            let single = enumerate_single_time(n, k + l, DEFAULT_BUDGET).unwrap();
            assert_eq!(two.second_lonely_pmf(), single.lonely_pmf(), "({n},{k},{l})");
        }
    }

    #[test]
    fn three_time_examples() {
        let law = enumerate_three_time(2, 2, 3, 4, DEFAULT_BUDGET).unwrap();
        assert_eq!(law.triple_detached(), ratio(5, 12));
        assert_eq!(law.sandwich(), ratio(1, 48));

        let law = enumerate_three_time(1, 2, 3, 4, DEFAULT_BUDGET).unwrap();
        assert_eq!(law.triple_detached(), BigRational::one());
        assert_eq!(law.sandwich(), BigRational::zero());
    }

    #[test]
    fn truncated_product_brackets_the_cdf() {
        let bracket = permanent_cdf_truncated(2, 3, 1000).unwrap();
        assert_eq!(bracket.lower, ExactProb::from_u64(1, 2));
        let gap = bracket.upper.ratio() - bracket.lower.ratio();
        assert!(gap > BigRational::zero() && gap < ratio(1, 100), "gap = {gap}");

        let bracket = permanent_cdf_truncated(1, 1, 500).unwrap();
        assert_eq!(bracket.upper, ExactProb::one());
        assert_eq!(bracket.lower, ExactProb::one());

        let bracket = permanent_cdf_truncated(3, 5, 10_000).unwrap();
        assert_eq!(bracket.lower, ExactProb::from_u64(2, 7));
        assert!(bracket.upper.ratio() >= bracket.lower.ratio());
        assert!(bracket.upper.ratio() - bracket.lower.ratio() < ratio(1, 100));
    }
}
