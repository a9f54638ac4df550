//! DCF building blocks: configuration, the bounded transmit queue, contention
//! window bookkeeping and broadcast jitter. The event-driven state machine
//! that strings these together lives in [`crate::network`].

use std::collections::VecDeque;

use rand::Rng;

use crate::frame::{Frame, ACK_LEN, CTS_LEN, RTS_LEN};
use crate::phy::RadioConfig;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacConfig {
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub queue_capacity: usize,
    pub slot_time: SimTime,
    pub sifs: SimTime,
    pub difs: SimTime,
    pub max_jitter: SimTime,
    /// RFC 5148 periodic-message mode: jitter is subtracted from an interval.
    /// No wARP-Path message is periodic, so this stays off.
    pub periodic_jitter_interval: Option<SimTime>,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            cw_min: 15,
            cw_max: 1023,
            retry_limit: 7,
            queue_capacity: 14,
            slot_time: SimTime::from_micros(20),
            sifs: SimTime::from_micros(10),
            difs: SimTime::from_micros(50),
            max_jitter: SimTime::from_millis(5),
            periodic_jitter_interval: None,
        }
    }
}

impl MacConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.cw_min > self.cw_max {
            return Err(format!("cw_min {} exceeds cw_max {}", self.cw_min, self.cw_max));
        }
        if self.queue_capacity < 1 {
            return Err("queue_capacity must be at least 1".into());
        }
        Ok(())
    }

    /// Jitter before a broadcast: uniform in `[0, max_jitter)`, or
    /// `interval - uniform[0, max_jitter)` in periodic mode.
    pub fn broadcast_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> SimTime {
        let j = sample_jitter(rng, self.max_jitter);
        match self.periodic_jitter_interval {
            Some(interval) => interval.saturating_sub(j),
            None => j,
        }
    }

    /// Random backoff of `uniform{0..=cw}` slots.
    pub fn backoff<R: Rng + ?Sized>(&self, rng: &mut R, cw: u32) -> SimTime {
        self.slot_time.mul(rng.gen_range(0..=cw) as u64)
    }
}

pub fn sample_jitter<R: Rng + ?Sized>(rng: &mut R, max_jitter: SimTime) -> SimTime {
    if max_jitter == SimTime::ZERO {
        return SimTime::ZERO;
    }
    SimTime::from_nanos(rng.gen_range(0..max_jitter.as_nanos()))
}

/// Binary exponential backoff state for the frame at the queue head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryState {
    pub cw: u32,
    pub retries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryOutcome {
    Retry,
    GiveUp,
}

impl RetryState {
    pub fn new(cfg: &MacConfig) -> Self {
        RetryState { cw: cfg.cw_min, retries: 0 }
    }

    pub fn on_failure(&mut self, cfg: &MacConfig) -> RetryOutcome {
        self.retries += 1;
        if self.retries > cfg.retry_limit {
            *self = RetryState::new(cfg);
            return RetryOutcome::GiveUp;
        }
        self.cw = (self.cw * 2 + 1).min(cfg.cw_max);
        RetryOutcome::Retry
    }

    pub fn on_success(&mut self, cfg: &MacConfig) {
        *self = RetryState::new(cfg);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enqueue {
    Queued,
    DroppedQueueFull,
}

/// FIFO of frames awaiting transmission. The head is the frame in service.
#[derive(Debug, Clone)]
pub struct TxQueue {
    frames: VecDeque<Frame>,
    capacity: usize,
}

impl TxQueue {
    pub fn new(capacity: usize) -> Self {
        TxQueue { frames: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, f: Frame) -> Enqueue {
        if self.frames.len() >= self.capacity {
            return Enqueue::DroppedQueueFull;
        }
        self.frames.push_back(f);
        Enqueue::Queued
    }

    pub fn head(&self) -> Option<&Frame> {
        self.frames.front()
    }

    pub fn pop(&mut self) -> Option<Frame> {
        self.frames.pop_front()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Airtimes of the handshake pieces for one data frame.
#[derive(Debug, Clone, Copy)]
pub struct Handshake {
    pub rts: SimTime,
    pub cts: SimTime,
    pub data: SimTime,
    pub ack: SimTime,
}

impl Handshake {
    pub fn for_frame(radio: &RadioConfig, data: &Frame) -> Self {
        Handshake {
            rts: radio.airtime(RTS_LEN),
            cts: radio.airtime(CTS_LEN),
            data: radio.airtime(data.total_len()),
            ack: radio.airtime(ACK_LEN),
        }
    }

    /// NAV carried by the RTS: everything after it up to the end of the ACK.
    pub fn rts_duration(&self, sifs: SimTime) -> SimTime {
        sifs.mul(3) + self.cts + self.data + self.ack
    }

    pub fn cts_duration(rts_duration: SimTime, sifs: SimTime, cts: SimTime) -> SimTime {
        rts_duration.saturating_sub(sifs + cts)
    }

    pub fn data_duration(&self, sifs: SimTime) -> SimTime {
        sifs + self.ack
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{rng_stream, Stream};
    use crate::frame::MacAddress;

    fn frame(uid: u64) -> Frame {
        Frame::data(MacAddress::for_node(0), MacAddress::for_node(1), MacAddress::for_node(1), 64, uid, SimTime::ZERO)
            .unwrap()
    }

    #[test]
    fn queue_drops_at_capacity() {
        let mut q = TxQueue::new(14);
        for i in 0..14 {
            assert_eq!(q.push(frame(i)), Enqueue::Queued);
        }
        assert_eq!(q.push(frame(14)), Enqueue::DroppedQueueFull);
        assert_eq!(q.len(), 14);
        assert_eq!(q.pop().unwrap().uid, 0);
    }

    #[test]
    fn eight_failures_exhaust_seven_retries() {
        let cfg = MacConfig::default();
        let mut st = RetryState::new(&cfg);
        let mut cws = vec![st.cw];
        for _ in 0..7 {
            assert_eq!(st.on_failure(&cfg), RetryOutcome::Retry);
            cws.push(st.cw);
        }
        assert_eq!(cws, vec![15, 31, 63, 127, 255, 511, 1023, 1023]);
        assert_eq!(st.on_failure(&cfg), RetryOutcome::GiveUp);
        assert_eq!(st, RetryState::new(&cfg));
    }

    #[test]
    fn jitter_in_half_open_range() {
        let mut rng = rng_stream(1, Stream::Jitter);
        let max = SimTime::from_millis(5);
        for _ in 0..10_000 {
            assert!(sample_jitter(&mut rng, max) < max);
        }
        assert_eq!(sample_jitter(&mut rng, SimTime::ZERO), SimTime::ZERO);
    }

    #[test]
    fn periodic_mode_subtracts_jitter() {
        let cfg = MacConfig { periodic_jitter_interval: Some(SimTime::from_secs(1)), ..MacConfig::default() };
        let mut rng = rng_stream(2, Stream::Jitter);
        for _ in 0..100 {
            let d = cfg.broadcast_delay(&mut rng);
            assert!(d > SimTime::from_millis(995) && d <= SimTime::from_secs(1));
        }
    }

    #[test]
    fn backoff_is_slot_multiple_within_window() {
        let cfg = MacConfig::default();
        let mut rng = rng_stream(3, Stream::Backoff);
        for _ in 0..1000 {
            let b = cfg.backoff(&mut rng, 15);
            assert_eq!(b.as_nanos() % cfg.slot_time.as_nanos(), 0);
            assert!(b <= cfg.slot_time.mul(15));
        }
    }
}
