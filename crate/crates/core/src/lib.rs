//! Exact analytics, Monte Carlo simulation and brute-force oracles for the
//! *detachment process*: `n` passengers start in a single bus and, each time a
//! new bus `k` arrives, every passenger independently relocates to it with
//! probability `1/k`. At any fixed time `k` the configuration is uniform over
//! the `k^n` assignments of passengers to buses (Maxwell-Boltzmann statistics),
//! but the interesting questions are about the *process*: when do all
//! passengers first sit in distinct buses, when does that become permanent,
//! how fast does clumping decay, and so on.
//!
//! The crate is organised in five layers:
//!
//! * [`combinatorics`] - arbitrary-precision and log-domain kernels (falling
//!   factorials, Stirling numbers, the terminating 2F0 series);
//! * [`exact`] - closed-form probabilities, moments and limit values for the
//!   process, each evaluable exactly (rationals) or in the log domain;
//! * [`poisson`] - the Poisson-passenger variant and a binomial
//!   stochastic-dominance criterion with an exhaustive CDF verifier;
//! * [`sim`] - a reproducible, event-driven Monte Carlo engine with full
//!   observables and exact inverse-CDF sampling of the permanent detachment
//!   time;
//! * [`oracle`] - exhaustive enumeration of small instances in exact rational
//!   arithmetic, the ground truth every formula is tested against.

pub mod combinatorics;
pub mod exact;
pub mod oracle;
pub mod poisson;
pub mod sim;

use thiserror::Error;

/// Domain errors raised when an operation's preconditions are violated.
///
/// Messages spell out the violated precondition so a CLI front end can print
/// them verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("requires k >= n (got n={n}, k={k}): no detached state exists before time n")]
    TimeBeforePossibleDetachment { n: u64, k: u64 },
    #[error("requires n <= k with n,k >= 1 (got n={n}, k={k})")]
    InvalidRatioArgs { n: u64, k: u64 },
    #[error("times must be strictly increasing (got {earlier} then {later})")]
    TimesNotIncreasing { earlier: u64, later: u64 },
    #[error("requires {name} > 0 (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("requires {name} in [0, 1] (got {value})")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("requires 1 <= m <= min(n, k) (got n={n}, k={k}, m={m})")]
    SupportSizeOutOfRange { n: u64, k: u64, m: u64 },
    #[error("requires x in [0, 1] (got {0})")]
    OutsideUnitInterval(f64),
    #[error("critical-window denominator 2(2 log n - 2 log log n + y) must be positive (n={n}, y={y})")]
    CriticalWindowDenominator { n: u64, y: f64 },
    #[error("lonely-count mean is zero at n={n}, k={k}; concentration ratio undefined")]
    ZeroMean { n: u64, k: u64 },
    #[error("conditioning event has probability zero (n={n}, k={k})")]
    ConditionOnNullEvent { n: u64, k: u64 },
    #[error("enumeration budget exceeded: {outcomes} outcomes > budget {budget}")]
    BudgetExceeded { outcomes: u128, budget: u128 },
    #[error("requires n >= {min} (got {n})")]
    PassengerCountTooSmall { n: u64, min: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
