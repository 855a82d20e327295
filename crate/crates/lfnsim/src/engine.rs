//! Deterministic discrete-event core: integer-nanosecond virtual clock,
//! priority event queue with insertion-order tie-breaking, and seeded
//! per-stream random sources.
//!
//! Everything here is single-threaded within one simulation run. Replaying a
//! run with the same seed produces bit-identical event sequences.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Virtual time in integer nanoseconds since simulation start.
///
/// All delays (propagation, serialization, timers) are computed in integer
/// nanoseconds; there is no floating-point clock anywhere in the hot path.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    /// Converts a second count from config input, rounding to whole nanoseconds.
    pub fn from_secs_f64(s: f64) -> Self {
        assert!(s >= 0.0 && s.is_finite(), "invalid time: {s}");
        SimTime((s * 1e9).round() as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    pub fn min(self, other: SimTime) -> SimTime {
        SimTime(self.0.min(other.0))
    }

    pub fn max(self, other: SimTime) -> SimTime {
        SimTime(self.0.max(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}

/// Handle returned by [`Engine::schedule`]; permits cancellation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct EventHandle(u64);

struct Entry<T> {
    fire_at: SimTime,
    seq_no: u64,
    payload: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq_no == other.seq_no
    }
}
impl<T> Eq for Entry<T> {}
impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Events with equal fire_at are processed in ascending seq_no
        // (insertion order), independent of heap internals.
        self.fire_at
            .cmp(&other.fire_at)
            .then_with(|| self.seq_no.cmp(&other.seq_no))
    }
}

/// Counters reported after a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub events_processed: u64,
    pub final_clock: SimTime,
}

/// The event engine: clock plus pending-event queue.
///
/// `T` is an engine-opaque action descriptor; the simulation's dispatcher
/// interprets it.
pub struct Engine<T> {
    now: SimTime,
    heap: BinaryHeap<Reverse<Entry<T>>>,
    next_seq: u64,
    cancelled: HashSet<u64>,
    processed: u64,
}

impl<T> Default for Engine<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Engine<T> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            heap: BinaryHeap::new(),
            next_seq: 0,
            cancelled: HashSet::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    /// Enqueues an event. Scheduling in the past is a programming error and
    /// fails loudly.
    pub fn schedule(&mut self, fire_at: SimTime, payload: T) -> EventHandle {
        assert!(
            fire_at >= self.now,
            "scheduled event in the past: fire_at={fire_at:?} now={:?}",
            self.now
        );
        let seq_no = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry {
            fire_at,
            seq_no,
            payload,
        }));
        EventHandle(seq_no)
    }

    pub fn schedule_after(&mut self, delay: SimTime, payload: T) -> EventHandle {
        self.schedule(self.now + delay, payload)
    }

    /// Cancels a pending event. Returns false if it already fired or was
    /// already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq {
            return false;
        }
        self.cancelled.insert(handle.0)
    }

    /// Processes all events with `fire_at <= t` and leaves the clock at `t`.
    /// Calling again with the same `t` is a no-op.
    pub fn run_until<F>(&mut self, t: SimTime, mut handler: F) -> EngineStats
    where
        F: FnMut(&mut Engine<T>, SimTime, T),
    {
        assert!(t >= self.now, "run_until into the past");
        while let Some(Reverse(entry)) = self.heap.peek() {
            if entry.fire_at > t {
                break;
            }
            let Reverse(entry) = self.heap.pop().unwrap();
            if self.cancelled.remove(&entry.seq_no) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now, "clock must be monotone");
            self.now = entry.fire_at;
            self.processed += 1;
            handler(self, entry.fire_at, entry.payload);
        }
        self.now = t;
        self.stats()
    }

    pub fn stats(&self) -> EngineStats {
        EngineStats {
            events_processed: self.processed,
            final_clock: self.now,
        }
    }
}

/// Derives a stream seed from the global seed and a stable stream label.
///
/// The derivation depends only on `(global_seed, label)`, so adding or
/// removing other streams never changes the draws of an existing one.
pub fn derive_stream_seed(global_seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, then splitmix64 finalization mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ global_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A named, independently seeded random stream.
///
/// One stream per link direction and per stochastic scenario element keeps
/// loss sequences stable when unrelated configuration changes.
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(global_seed: u64, label: &str) -> Self {
        RngStream {
            rng: ChaCha8Rng::seed_from_u64(derive_stream_seed(global_seed, label)),
        }
    }

    /// Returns true with probability `p`, independently per draw.
    /// `p` outside [0, 1] is rejected.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        assert!(
            (0.0..=1.0).contains(&p),
            "bernoulli probability out of range: {p}"
        );
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.rng.random::<f64>() < p
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_delay_event_fires_after_current() {
        let mut eng: Engine<u32> = Engine::new();
        eng.schedule(SimTime::ZERO, 1);
        let mut order = Vec::new();
        eng.run_until(SimTime::from_secs(1), |eng, now, v| {
            order.push(v);
            if v == 1 {
                // schedule at t=now: fires immediately after this event
                eng.schedule(now, 2);
            }
        });
        assert_eq!(order, vec![1, 2]);
    }

    #[test]
    fn equal_fire_times_processed_in_insertion_order() {
        let mut eng: Engine<u32> = Engine::new();
        let t = SimTime::from_millis(5);
        for v in 0..100 {
            eng.schedule(t, v);
        }
        let mut order = Vec::new();
        eng.run_until(SimTime::from_secs(1), |_, _, v| order.push(v));
        assert_eq!(order, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn cancelled_event_never_fires() {
        let mut eng: Engine<u32> = Engine::new();
        let h = eng.schedule(SimTime::from_millis(1), 7);
        eng.schedule(SimTime::from_millis(2), 8);
        assert!(eng.cancel(h));
        assert!(!eng.cancel(h));
        let mut seen = Vec::new();
        eng.run_until(SimTime::from_secs(1), |_, _, v| seen.push(v));
        assert_eq!(seen, vec![8]);
    }

    #[test]
    fn empty_queue_run_until_advances_clock() {
        let mut eng: Engine<u32> = Engine::new();
        let stats = eng.run_until(SimTime::from_secs(10), |_, _, _| {});
        assert_eq!(stats.events_processed, 0);
        assert_eq!(stats.final_clock, SimTime::from_secs(10));
    }

    #[test]
    fn run_until_same_time_twice_is_noop() {
        let mut eng: Engine<u32> = Engine::new();
        eng.schedule(SimTime::from_secs(2), 1);
        let t = SimTime::from_secs(5);
        let s1 = eng.run_until(t, |_, _, _| {});
        let s2 = eng.run_until(t, |_, _, _| {});
        assert_eq!(s1, s2);
    }

    #[test]
    #[should_panic(expected = "past")]
    fn scheduling_in_the_past_fails_loudly() {
        let mut eng: Engine<u32> = Engine::new();
        eng.schedule(SimTime::from_secs(1), 1);
        eng.run_until(SimTime::from_secs(2), |eng, _, _| {
            eng.schedule(SimTime::from_millis(500), 2);
        });
    }

    #[test]
    fn bernoulli_edge_probabilities() {
        let mut s = RngStream::new(1, "edge");
        assert!((0..1000).all(|_| !s.bernoulli(0.0)));
        assert!((0..1000).all(|_| s.bernoulli(1.0)));
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn bernoulli_rejects_invalid_probability() {
        let mut s = RngStream::new(1, "bad");
        s.bernoulli(1.5);
    }

    #[test]
    fn streams_are_reproducible_and_independent() {
        let draws = |labels: &[&str], which: &str| -> Vec<u64> {
            let mut streams: Vec<RngStream> =
                labels.iter().map(|l| RngStream::new(42, l)).collect();
            // interleave draws across all streams, keep only `which`
            let idx = labels.iter().position(|l| *l == which).unwrap();
            let mut out = Vec::new();
            for _ in 0..64 {
                for (i, s) in streams.iter_mut().enumerate() {
                    let v = s.next_u64();
                    if i == idx {
                        out.push(v);
                    }
                }
            }
            out
        };
        let a_before = draws(&["link/a/fwd", "link/a/rev"], "link/a/fwd");
        // Adding a new stream must not change draws on existing streams.
        let a_after = draws(&["link/a/fwd", "link/a/rev", "link/b/fwd"], "link/a/fwd");
        assert_eq!(a_before, a_after);
    }

    #[test]
    fn bernoulli_hit_rate_near_p() {
        // 0.01% over 2,046,000 draws: central 99% binomial interval ~[168, 242]
        let mut s = RngStream::new(1, "loss");
        let hits = (0..2_046_000).filter(|_| s.bernoulli(0.0001)).count();
        assert!(
            (168..=242).contains(&hits),
            "hit count {hits} outside central 99% interval"
        );
    }

    proptest! {
        #[test]
        fn events_fire_in_nondecreasing_time_order(
            times in proptest::collection::vec(0u64..1_000_000, 1..200)
        ) {
            let mut eng: Engine<usize> = Engine::new();
            for (i, t) in times.iter().enumerate() {
                eng.schedule(SimTime::from_nanos(*t), i);
            }
            let mut fired: Vec<(SimTime, usize)> = Vec::new();
            eng.run_until(SimTime::from_secs(1), |_, now, v| fired.push((now, v)));
            prop_assert_eq!(fired.len(), times.len());
            for w in fired.windows(2) {
                prop_assert!(w[0].0 <= w[1].0);
                // ties keep insertion order
                if w[0].0 == w[1].0 {
                    prop_assert!(w[0].1 < w[1].1);
                }
            }
        }

        #[test]
        fn same_seed_same_draws(seed in any::<u64>()) {
            let mut a = RngStream::new(seed, "s");
            let mut b = RngStream::new(seed, "s");
            for _ in 0..256 {
                prop_assert_eq!(a.next_u64(), b.next_u64());
            }
        }
    }
}
