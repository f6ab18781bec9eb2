//! Parallel Monte Carlo estimation over independent replicas.
//!
//! Replicas are embarrassingly parallel: replica `r` draws from stream
//! `(seed, r)`, results are collected indexed by replica and reduced in a
//! fixed order, so estimates are independent of thread count and scheduling.

use rand::Rng;
use rayon::prelude::*;

use super::rng::RngStream;
use super::trajectory::{run_trajectory, TrajectoryConfig};
use super::Observables;

/// Quantity estimated by [`mc_estimate`]. Time-indexed estimands sample the
/// single-time marginal directly (the configuration at time `k` is uniform
/// over the `k^n` assignments); the stopping-time estimands drive full
/// trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimand {
    /// First time in a state of detachment (censored at the horizon).
    FirstDetachment,
    /// Fraction of times `<= horizon` spent in a state of detachment.
    DetachmentShare,
    /// Indicator of a state of detachment at `time`.
    DetachedAt { time: u64 },
    /// Lonely count at `time`, divided by `n`.
    LonelyFractionAt { time: u64 },
    /// Support size at `time`, divided by `n`.
    SupportFractionAt { time: u64 },
    /// Relative clumping at `time`.
    RelativeClumpingAt { time: u64 },
    /// Indicator of relative clumping exceeding `threshold` at `time`.
    RelativeClumpingExceedsAt { time: u64, threshold: f64 },
}

impl Estimand {
    fn needs_trajectory(&self) -> bool {
        matches!(
            self,
            Estimand::FirstDetachment | Estimand::DetachmentShare
        )
    }

    fn time(&self) -> Option<u64> {
        match *self {
            Estimand::DetachedAt { time }
            | Estimand::LonelyFractionAt { time }
            | Estimand::SupportFractionAt { time }
            | Estimand::RelativeClumpingAt { time }
            | Estimand::RelativeClumpingExceedsAt { time, .. } => Some(time),
            _ => None,
        }
    }
}

/// Point estimate with its standard error.
///
/// `censored` counts replicas whose value was unobservable within the
/// horizon (only possible for [`Estimand::FirstDetachment`]); those replicas
/// are excluded from the mean but always reported, never silently dropped.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: u64,
    pub censored: u64,
}

fn summarize(values: &[f64], censored: u64) -> McEstimate {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    McEstimate {
        mean,
        std_error: (var / m).sqrt(),
        replicas: values.len() as u64 + censored,
        censored,
    }
}

/// Run `replicas` independent replicas and estimate `estimand`.
pub fn mc_estimate(
    n: u64,
    horizon: u64,
    replicas: u64,
    estimand: Estimand,
    seed: u64,
) -> McEstimate {
    assert!(replicas >= 2, "a standard error needs at least two replicas");
    if let Some(t) = estimand.time() {
        assert!(t <= horizon, "estimand time beyond horizon");
    }

    if !estimand.needs_trajectory() {
        let time = estimand.time().expect("time-indexed estimand");
        let values: Vec<f64> = observables_at(n, time, replicas, seed)
            .into_iter()
            .map(|obs| match estimand {
                Estimand::DetachedAt { .. } => f64::from(obs.lonely as u64 == n),
                Estimand::LonelyFractionAt { .. } => obs.lonely as f64 / n as f64,
                Estimand::SupportFractionAt { .. } => obs.support as f64 / n as f64,
                Estimand::RelativeClumpingAt { .. } => obs.relative_clumping,
                Estimand::RelativeClumpingExceedsAt { threshold, .. } => {
                    f64::from(obs.relative_clumping > threshold)
                }
                _ => unreachable!(),
            })
            .collect();
        return summarize(&values, 0);
    }

    let config = TrajectoryConfig::new(horizon, vec![]);
    let outcomes: Vec<Option<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let rec = run_trajectory(n, &config, RngStream::new(seed, r));
            match estimand {
                Estimand::FirstDetachment => rec.first_detachment.map(|t| t as f64),
                Estimand::DetachmentShare => {
                    Some(rec.detachment_state_count as f64 / horizon as f64)
                }
                _ => unreachable!(),
            }
        })
        .collect();
    let censored = outcomes.iter().filter(|v| v.is_none()).count() as u64;
    let values: Vec<f64> = outcomes.into_iter().flatten().collect();
    summarize(&values, censored)
}

/// Observables of the single-time marginal at time `k` for `replicas`
/// independent replicas (replica `r` uses stream `(seed, r)`).
pub fn sample_marginal_observables(n: u64, k: u64, replicas: u64, seed: u64) -> Vec<Observables> {
    observables_at(n, k, replicas, seed)
}

fn observables_at(n: u64, k: u64, replicas: u64, seed: u64) -> Vec<Observables> {
    assert!(n >= 1 && k >= 1);
    if n <= 64 {
        (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(seed, r).rng();
                sample_small(n, k, &mut rng)
            })
            .collect()
    } else {
        assert!(k <= 1 << 27, "dense occupancy buffer would exceed memory");
        (0..replicas)
            .into_par_iter()
            .map_init(
                || DenseScratch::new(k),
                |scratch, r| {
                    let mut rng = RngStream::new(seed, r).rng();
                    scratch.sample(n, k, &mut rng)
                },
            )
            .collect()
    }
}

/// Direct Maxwell-Boltzmann draw of the configuration at time `k` (uniform
/// over the `k^n` assignments) with all observables, for one replica.
pub fn sample_single_time<R: Rng>(n: u64, k: u64, rng: &mut R) -> Observables {
    if n <= 64 {
        sample_small(n, k, rng)
    } else {
        DenseScratch::new(k).sample(n, k, rng)
    }
}

fn sample_small<R: Rng>(n: u64, k: u64, rng: &mut R) -> Observables {
    let mut buses: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=k)).collect();
    buses.sort_unstable();
    let mut lonely = 0u32;
    let mut support = 0u32;
    let mut clumping = 0u64;
    let mut i = 0usize;
    while i < buses.len() {
        let mut j = i + 1;
        while j < buses.len() && buses[j] == buses[i] {
            j += 1;
        }
        let count = (j - i) as u64;
        support += 1;
        clumping += count * count;
        if count == 1 {
            lonely += 1;
        }
        i = j;
    }
    Observables::assemble(n, lonely, support, buses[0], *buses.last().unwrap(), clumping)
}

struct DenseScratch {
    counts: Vec<u32>,
    touched: Vec<u64>,
}

impl DenseScratch {
    fn new(k: u64) -> Self {
        DenseScratch {
            counts: vec![0; k as usize + 1],
            touched: Vec::new(),
        }
    }

    fn sample<R: Rng>(&mut self, n: u64, k: u64, rng: &mut R) -> Observables {
        assert!(self.counts.len() == k as usize + 1);
        for _ in 0..n {
            let bus = rng.gen_range(1..=k);
            let c = &mut self.counts[bus as usize];
            if *c == 0 {
                self.touched.push(bus);
            }
            *c += 1;
        }
        let mut lonely = 0u32;
        let mut clumping = 0u64;
        let mut min_bus = u64::MAX;
        let mut max_bus = 0u64;
        for &bus in &self.touched {
            let count = self.counts[bus as usize] as u64;
            clumping += count * count;
            if count == 1 {
                lonely += 1;
            }
            min_bus = min_bus.min(bus);
            max_bus = max_bus.max(bus);
        }
        let support = self.touched.len() as u32;
        for &bus in &self.touched {
            self.counts[bus as usize] = 0;
        }
        self.touched.clear();
        Observables::assemble(n, lonely, support, min_bus, max_bus, clumping)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;

    #[test]
    fn detached_indicator_matches_formula() {
        let est = mc_estimate(3, 3, 100_000, Estimand::DetachedAt { time: 3 }, 0xabc);
        let p = 2.0 / 9.0;
        assert!(est.censored == 0);
        assert!(
            (est.mean - p).abs() < 3.0 * est.std_error + 1e-9,
            "mean = {}, se = {}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn lonely_fraction_matches_moment_formula() {
        let n = 200u64;
        let k = 500u64;
        let est = mc_estimate(n, k, 20_000, Estimand::LonelyFractionAt { time: k }, 7);
        let want = exact::lonely_moments(n, k).mean / n as f64;
        assert!(
            (est.mean - want).abs() < 3.5 * est.std_error,
            "mean = {}, want = {want}",
            est.mean
        );
    }

    #[test]
    fn support_fraction_matches_moment_formula() {
        let n = 100u64;
        let k = 300u64;
        let est = mc_estimate(n, k, 20_000, Estimand::SupportFractionAt { time: k }, 11);
        let (mean, _) = exact::support_moments(n, k);
        let want = mean / n as f64;
        assert!(
            (est.mean - want).abs() < 3.5 * est.std_error,
            "mean = {}, want = {want}",
            est.mean
        );
    }

    #[test]
    fn dense_and_small_paths_agree_in_distribution() {
        // n = 80 uses the dense path; compare lonely mean against the formula.
        let n = 80u64;
        let k = 160u64;
        let est = mc_estimate(n, k, 20_000, Estimand::LonelyFractionAt { time: k }, 23);
        let want = exact::lonely_moments(n, k).mean / n as f64;
        assert!((est.mean - want).abs() < 3.5 * est.std_error);
    }

    #[test]
    fn first_detachment_estimate_is_uncensored_at_long_horizon() {
        let est = mc_estimate(3, 2_000, 4_000, Estimand::FirstDetachment, 99);
        assert_eq!(est.censored, 0);
        assert!(est.mean > 3.0);
    }

    #[test]
    fn estimates_are_reproducible() {
        let a = mc_estimate(4, 50, 5_000, Estimand::DetachedAt { time: 50 }, 1234);
        let b = mc_estimate(4, 50, 5_000, Estimand::DetachedAt { time: 50 }, 1234);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std_error, b.std_error);
    }
}
