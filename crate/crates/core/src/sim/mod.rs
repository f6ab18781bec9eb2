//! Monte Carlo engine for the detachment process.
//!
//! The state keeps only nonzero bus occupancies plus incrementally maintained
//! observables, so one relocation costs O(log n) and a whole step costs
//! O(expected movers): the relocation count at time `k` is Binomial(n, 1/k),
//! which makes the expected total work over a horizon `K` only O(n log K).
//! [`trajectory`] pushes this further with an event-jump driver that skips
//! the (eventually long) stretches where nobody relocates at all.

pub mod estimate;
pub mod rng;
pub mod trajectory;

pub use estimate::{mc_estimate, sample_marginal_observables, Estimand, McEstimate};
pub use rng::RngStream;
pub use trajectory::{
    coupled_first_detachments, run_stopped_clumping, run_trajectory,
    sample_permanent_detachment_time, SamplePoint, TrajectoryConfig, TrajectoryRecord,
};

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

/// Snapshot of every observable of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    /// Number of passengers alone in their bus.
    pub lonely: u32,
    /// Number of non-empty buses (support size).
    pub support: u32,
    pub min_bus: u64,
    pub max_bus: u64,
    pub range: u64,
    /// Sum of squared bus occupancies.
    pub clumping: u64,
    /// `log(clumping / n)`, in `[0, log n]`.
    pub relative_clumping: f64,
}

impl Observables {
    pub(crate) fn assemble(
        n: u64,
        lonely: u32,
        support: u32,
        min_bus: u64,
        max_bus: u64,
        clumping: u64,
    ) -> Self {
        Observables {
            lonely,
            support,
            min_bus,
            max_bus,
            range: max_bus - min_bus,
            clumping,
            relative_clumping: (clumping as f64 / n as f64).ln(),
        }
    }
}

/// Configuration of the process at a given time: the passenger-to-bus
/// assignment plus its occupancy histogram (nonzero entries only), with the
/// lonely count and the clumping statistic maintained incrementally.
#[derive(Debug, Clone)]
pub struct OccupancyState {
    time: u64,
    assignment: Vec<u64>,
    occupancy: BTreeMap<u64, u32>,
    lonely: u32,
    clumping: u64,
}

impl OccupancyState {
    /// Initial state: all `n` passengers in bus 1 at time 1.
    pub fn new(n: u64) -> Self {
        assert!(n >= 1);
        let mut occupancy = BTreeMap::new();
        occupancy.insert(1, n as u32);
        OccupancyState {
            time: 1,
            assignment: vec![1; n as usize],
            occupancy,
            lonely: u32::from(n == 1),
            clumping: n * n,
        }
    }

    pub fn passenger_count(&self) -> u64 {
        self.assignment.len() as u64
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn assignment(&self) -> &[u64] {
        &self.assignment
    }

    pub fn occupancy(&self) -> &BTreeMap<u64, u32> {
        &self.occupancy
    }

    pub fn lonely_count(&self) -> u32 {
        self.lonely
    }

    pub fn support_size(&self) -> u32 {
        self.occupancy.len() as u32
    }

    /// All passengers in distinct buses?
    pub fn is_detached(&self) -> bool {
        self.lonely as u64 == self.passenger_count()
    }

    pub fn observables(&self) -> Observables {
        let min_bus = *self.occupancy.keys().next().expect("occupancy nonempty");
        let max_bus = *self.occupancy.keys().next_back().expect("occupancy nonempty");
        Observables::assemble(
            self.passenger_count(),
            self.lonely,
            self.support_size(),
            min_bus,
            max_bus,
            self.clumping,
        )
    }

    /// Move one passenger, updating occupancy, lonely count and clumping.
    fn relocate(&mut self, passenger: usize, new_bus: u64) {
        let old_bus = self.assignment[passenger];
        if old_bus == new_bus {
            return;
        }
        self.assignment[passenger] = new_bus;

        let old_count = {
            let c = self.occupancy.get_mut(&old_bus).expect("passenger's bus is occupied");
            let before = *c;
            *c -= 1;
            if *c == 0 {
                self.occupancy.remove(&old_bus);
            }
            before
        };
        self.clumping -= 2 * old_count as u64 - 1;
        match old_count {
            1 => self.lonely -= 1, // the mover was lonely
            2 => self.lonely += 1, // its companion becomes lonely
            _ => {}
        }

        let new_count = {
            let c = self.occupancy.entry(new_bus).or_insert(0);
            *c += 1;
            *c
        };
        self.clumping += 2 * new_count as u64 - 1;
        match new_count {
            1 => self.lonely += 1, // the mover is now lonely
            2 => self.lonely -= 1, // it joined a previously lonely passenger
            _ => {}
        }
    }

    /// Advance one time unit: each passenger independently relocates to the
    /// newly arrived bus `time + 1` with probability `1/(time + 1)`.
    pub fn step<R: Rng>(&mut self, rng: &mut R) {
        self.time += 1;
        let k = self.time;
        let n = self.passenger_count();
        let movers = sample_binomial(n, 1.0 / k as f64, rng);
        if movers > 0 {
            for passenger in sample_distinct(n, movers, rng) {
                self.relocate(passenger as usize, k);
            }
        }
    }

    /// Advance `l` time units in one draw: each passenger stays with
    /// probability `time/(time + l)`, otherwise moves to a uniformly chosen
    /// bus among the `l` new ones. Distributionally identical to `l`
    /// successive [`OccupancyState::step`] calls.
    pub fn block_step<R: Rng>(&mut self, l: u64, rng: &mut R) {
        assert!(l >= 1);
        let k = self.time;
        let n = self.passenger_count();
        let movers = sample_binomial(n, l as f64 / (k + l) as f64, rng);
        if movers > 0 {
            for passenger in sample_distinct(n, movers, rng) {
                let new_bus = k + 1 + rng.gen_range(0..l);
                self.relocate(passenger as usize, new_bus);
            }
        }
        self.time = k + l;
    }

    /// Relocate exactly `movers` uniformly chosen passengers to bus
    /// `event_time`; used by the event-jump trajectory driver.
    pub(crate) fn apply_event<R: Rng>(&mut self, event_time: u64, movers: u64, rng: &mut R) {
        debug_assert!(event_time > self.time && movers >= 1);
        let n = self.passenger_count();
        for passenger in sample_distinct(n, movers, rng) {
            self.relocate(passenger as usize, event_time);
        }
        self.time = event_time;
    }

    #[cfg(test)]
    fn check_consistency(&self) {
        let mut histogram = BTreeMap::new();
        for &bus in &self.assignment {
            *histogram.entry(bus).or_insert(0u32) += 1;
        }
        assert_eq!(histogram, self.occupancy);
        let lonely = histogram.values().filter(|&&c| c == 1).count() as u32;
        assert_eq!(lonely, self.lonely);
        let clumping: u64 = histogram.values().map(|&c| (c as u64) * (c as u64)).sum();
        assert_eq!(clumping, self.clumping);
    }
}

/// Binomial(n, p) by sequential inversion; O(np + 1) expected work, which is
/// O(1) in the simulator where p = O(1/time).
pub(crate) fn sample_binomial<R: Rng>(n: u64, p: f64, rng: &mut R) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let u: f64 = rng.gen();
    let ratio = p / (1.0 - p);
    let mut pmf = (n as f64 * (-p).ln_1p()).exp(); // (1-p)^n
    let mut cdf = pmf;
    let mut b = 0u64;
    while u > cdf && b < n {
        pmf *= ratio * (n - b) as f64 / (b + 1) as f64;
        cdf += pmf;
        b += 1;
    }
    b
}

/// `count` distinct indices uniformly from `0..n`.
pub(crate) fn sample_distinct<R: Rng>(n: u64, count: u64, rng: &mut R) -> Vec<u64> {
    debug_assert!(count <= n);
    if count == n {
        return (0..n).collect();
    }
    if count * 4 <= n {
        // Sparse: rejection on a small set.
        let mut chosen = Vec::with_capacity(count as usize);
        while (chosen.len() as u64) < count {
            let idx = rng.gen_range(0..n);
            if !chosen.contains(&idx) {
                chosen.push(idx);
            }
        }
        chosen
    } else {
        // Dense: partial Fisher-Yates.
        let mut pool: Vec<u64> = (0..n).collect();
        for i in 0..count as usize {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(count as usize);
        pool
    }
}
