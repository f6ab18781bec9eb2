//! Event-driven trajectory simulation and exact stopping-time sampling.
//!
//! Between relocations the configuration is frozen, and the probability that
//! nobody relocates during `(k, m]` telescopes to `(k/m)^n`. The driver
//! therefore jumps straight from one relocation event to the next by inverse
//! CDF, giving exact per-time-unit detachment tracking at O(n log horizon)
//! total cost instead of O(horizon).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::rng::RngStream;
use super::{sample_binomial, OccupancyState, Observables};
use crate::exact::permanent_detachment_log_cdf;

/// Horizon and sampling plan for one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub horizon: u64,
    /// Times (within `[1, horizon]`) at which observables are recorded.
    pub sample_times: Vec<u64>,
}

impl TrajectoryConfig {
    pub fn new(horizon: u64, mut sample_times: Vec<u64>) -> Self {
        assert!(horizon >= 1);
        sample_times.sort_unstable();
        sample_times.dedup();
        assert!(
            sample_times.iter().all(|&t| (1..=horizon).contains(&t)),
            "sample times must lie in [1, horizon]"
        );
        TrajectoryConfig {
            horizon,
            sample_times,
        }
    }
}

/// Observables recorded at one sample time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SamplePoint {
    pub time: u64,
    #[serde(flatten)]
    pub observables: Observables,
}

/// Everything recorded about one simulated trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub n: u64,
    pub stream: RngStream,
    pub horizon: u64,
    /// First time the process is in a state of detachment, if observed.
    pub first_detachment: Option<u64>,
    /// Latest detachment time (transition into detachment) observed.
    pub last_detachment_time: Option<u64>,
    /// Number of times `t <= horizon` in a state of detachment.
    pub detachment_state_count: u64,
    pub detached_at_horizon: bool,
    /// True when no detachment state was observed within the horizon.
    pub censored: bool,
    pub samples: Vec<SamplePoint>,
}

/// Smallest event time `m > k`, or `None` if it falls beyond the horizon.
/// `P(no relocation in (k, m]) = (k/m)^n`.
fn next_event_time<R: Rng>(k: u64, n: u64, horizon: u64, rng: &mut R) -> Option<u64> {
    let w = 1.0 - rng.gen::<f64>(); // (0, 1]
    let target = k as f64 * w.powf(-1.0 / n as f64);
    if target > horizon as f64 {
        return None;
    }
    let mut t = target.ceil() as u64;
    if t <= k {
        t = k + 1;
    }
    Some(t.min(horizon))
}

/// Number of movers at an event time `t`: Binomial(n, 1/t) conditioned to be
/// at least 1, sampled by sequential inversion of the conditional pmf.
fn sample_event_movers<R: Rng>(n: u64, t: u64, rng: &mut R) -> u64 {
    if n == 1 {
        return 1;
    }
    let p = 1.0 / t as f64;
    let q = 1.0 - p;
    let p0 = (n as f64 * (-p).ln_1p()).exp(); // q^n
    let target = rng.gen::<f64>() * (1.0 - p0);
    let mut pmf = n as f64 * p * (q.powi(n as i32 - 1)); // b = 1 term
    let mut cdf = pmf;
    let mut b = 1u64;
    while target > cdf && b < n {
        pmf *= (p / q) * (n - b) as f64 / (b + 1) as f64;
        cdf += pmf;
        b += 1;
    }
    b
}

/// Simulate one trajectory with full detachment tracking.
pub fn run_trajectory(n: u64, config: &TrajectoryConfig, stream: RngStream) -> TrajectoryRecord {
    let mut rng = stream.rng();
    let mut state = OccupancyState::new(n);
    let horizon = config.horizon;

    let mut first_detachment = None;
    let mut last_detachment_time = None;
    let mut detachment_state_count = 0u64;
    let mut samples = Vec::with_capacity(config.sample_times.len());
    let mut next_sample = config.sample_times.iter().copied().peekable();

    // Detachment run in progress (the state at `k` is detached).
    let mut in_run = state.is_detached();
    if in_run {
        first_detachment = Some(1);
        last_detachment_time = Some(1);
    }

    let mut k = 1u64; // state is valid on [k, next event)
    loop {
        let next_event = next_event_time(k, n, horizon, &mut rng);
        let segment_end = next_event.map_or(horizon, |t| t - 1).min(horizon);

        if in_run {
            detachment_state_count += segment_end - k + 1;
        }
        while let Some(&t) = next_sample.peek() {
            if t > segment_end {
                break;
            }
            samples.push(SamplePoint {
                time: t,
                observables: state.observables(),
            });
            next_sample.next();
        }

        let Some(event_time) = next_event else { break };
        let movers = sample_event_movers(n, event_time, &mut rng);
        state.apply_event(event_time, movers, &mut rng);
        k = event_time;

        let detached = state.is_detached();
        if detached && !in_run {
            first_detachment.get_or_insert(k);
            last_detachment_time = Some(k);
        }
        in_run = detached;
    }

    TrajectoryRecord {
        n,
        stream,
        horizon,
        first_detachment,
        last_detachment_time,
        detachment_state_count,
        detached_at_horizon: state.is_detached(),
        censored: first_detachment.is_none(),
        samples,
    }
}

/// Sample the permanent detachment time exactly by inverse CDF: the least `k`
/// with `P(tau <= k) >= u`, located by exponential then binary search over
/// the monotone CDF. Always terminates since the CDF tends to 1.
pub fn sample_permanent_detachment_time<R: Rng>(n: u64, rng: &mut R) -> u64 {
    assert!(n >= 1);
    if n == 1 {
        return 1;
    }
    let mut w = 1.0 - rng.gen::<f64>();
    while w >= 1.0 {
        w = 1.0 - rng.gen::<f64>();
    }
    let log_u = w.ln();
    let log_cdf = |k: u64| permanent_detachment_log_cdf(n, k).log();

    let mut lo = n; // smallest time with positive CDF
    if log_cdf(lo) >= log_u {
        return lo;
    }
    let mut hi = lo;
    loop {
        hi = hi.saturating_mul(2);
        if log_cdf(hi) >= log_u || hi >= u64::MAX / 2 {
            break;
        }
        lo = hi;
    }
    // Least k in (lo, hi] with CDF >= u.
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if log_cdf(mid) >= log_u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Path of the clumping statistic stopped at the first time
/// `>= ceil(n/2)` with a lonely passenger: returns
/// `clumping(k /\ tau_lon)` for `k = ceil(n/2) ..= k_max`.
pub fn run_stopped_clumping(n: u64, k_max: u64, stream: RngStream) -> Vec<u64> {
    assert!(n >= 3, "the stopped process starts at ceil(n/2) >= 2");
    let floor = n.div_ceil(2);
    assert!(k_max >= floor);
    let mut rng = stream.rng();
    let mut state = OccupancyState::new(n);
    let mut frozen: Option<u64> = None;
    let mut path = Vec::with_capacity((k_max - floor + 1) as usize);
    for k in 2..=k_max {
        if frozen.is_none() {
            state.step(&mut rng);
        }
        if k >= floor {
            if frozen.is_none() && state.lonely_count() >= 1 {
                frozen = Some(state.observables().clumping);
            }
            path.push(frozen.unwrap_or_else(|| state.observables().clumping));
        }
    }
    path
}

/// First detachment times of the coupled processes on `2 ..= max_n`
/// passengers driven by shared randomness: entry `i` is the first time the
/// leading `i + 2` passengers all sit in distinct buses (None if censored).
///
/// The coupling follows each passenger's own relocation decisions, so the
/// restriction to the first `n` passengers is exactly the `n`-passenger
/// process and first detachment times are monotone in `n` path by path.
pub fn coupled_first_detachments(
    max_n: u64,
    horizon: u64,
    stream: RngStream,
) -> Vec<Option<u64>> {
    assert!(max_n >= 2);
    let mut rng: ChaCha8Rng = stream.rng();
    let mut buses: Vec<u64> = vec![1; max_n as usize];
    let mut firsts: Vec<Option<u64>> = vec![None; (max_n - 1) as usize];
    for k in 2..=horizon {
        let movers = sample_binomial(max_n, 1.0 / k as f64, &mut rng);
        if movers > 0 {
            for passenger in super::sample_distinct(max_n, movers, &mut rng) {
                buses[passenger as usize] = k;
            }
        }
        // Prefix n is detached iff the first n buses are pairwise distinct.
        let mut seen: Vec<u64> = vec![buses[0]];
        for n in 2..=max_n {
            let bus = buses[(n - 1) as usize];
            if seen.contains(&bus) {
                break; // every longer prefix shares this collision
            }
            seen.push(bus);
            if firsts[(n - 2) as usize].is_none() {
                firsts[(n - 2) as usize] = Some(k);
            }
        }
        if firsts.iter().all(Option::is_some) {
            break;
        }
    }
    firsts
}
