//! Deterministic discrete-event kernel.
//!
//! Events execute in `(time, seq)` order where `seq` is a per-scheduler
//! insertion counter, so simultaneous events run in the order they were
//! scheduled. Random draws come from named substreams that are independent
//! of each other's consumption.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    ScheduledInPast { at: SimTime, now: SimTime },
}

/// Opaque handle returned by [`Scheduler::schedule`], used for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Entry<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> Ord for Entry<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    cancelled: HashSet<u64>,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of live (not cancelled) pending events.
    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<EventHandle, EngineError> {
        if at < self.now {
            return Err(EngineError::ScheduledInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time: at, seq, event });
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current time. Cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventHandle {
        let at = self.now + delay;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time: at, seq, event });
        EventHandle(seq)
    }

    /// Cancels a pending event. The handle must not have fired yet.
    pub fn cancel(&mut self, handle: EventHandle) {
        debug_assert!(handle.0 < self.next_seq);
        self.cancelled.insert(handle.0);
    }

    /// Pops the next live event with `time <= t_end`, advancing the clock to it.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        loop {
            let head = self.heap.peek()?;
            if head.time > t_end {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            if !self.cancelled.is_empty() && self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.time >= self.now);
            self.now = entry.time;
            return Some((entry.time, entry.event));
        }
    }

    /// Executes every event with `time <= t_end` through `handler`, then
    /// parks the clock at `t_end`. Returns the number of events executed.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        let mut count = 0;
        while let Some((t, ev)) = self.pop_until(t_end) {
            handler(self, t, ev);
            count += 1;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        count
    }
}

/// Named random substreams derived from one 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement,
    Traffic,
    Jitter,
    Backoff,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Placement => 1,
            Stream::Traffic => 2,
            Stream::Jitter => 3,
            Stream::Backoff => 4,
        }
    }
}

/// Each substream is a ChaCha generator keyed by the seed with a distinct
/// stream id, so draws from one never shift another.
pub fn rng_stream(seed: u64, stream: Stream) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

#[derive(Clone)]
pub struct RngStreams {
    pub placement: ChaCha12Rng,
    pub traffic: ChaCha12Rng,
    pub jitter: ChaCha12Rng,
    pub backoff: ChaCha12Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams {
            placement: rng_stream(seed, Stream::Placement),
            traffic: rng_stream(seed, Stream::Traffic),
            jitter: rng_stream(seed, Stream::Jitter),
            backoff: rng_stream(seed, Stream::Backoff),
        }
    }
}
