use std::collections::{HashMap, VecDeque};
use std::net::Ipv4Addr;

use crate::frame::MacAddress;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArpConfig {
    /// Requests per resolution attempt, the first one included.
    pub retry_count: u32,
    pub retry_timeout: SimTime,
    pub cache_timeout: SimTime,
    /// Packets held while a resolution is pending; the newest wins.
    pub buffer_capacity: usize,
}

impl Default for ArpConfig {
    fn default() -> Self {
        ArpConfig {
            retry_count: 5,
            retry_timeout: SimTime::from_millis(200),
            cache_timeout: SimTime::from_secs(120),
            buffer_capacity: 1,
        }
    }
}

/// Application datagram waiting for (or carried by) a data frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppPacket {
    pub uid: u64,
    pub session: usize,
    pub dst_node: usize,
    pub size: u32,
    pub origin_time: SimTime,
}

#[derive(Debug)]
struct Pending {
    attempt: u64,
    requests_sent: u32,
    buffer: VecDeque<AppPacket>,
}

#[derive(Debug, PartialEq, Eq)]
pub struct Submit {
    /// Set when this submission opened a new resolution attempt; the caller
    /// sends the first request and arms the retry timer with this id.
    pub new_attempt: Option<u64>,
    /// Packets pushed out of the bounded buffer.
    pub superseded: Vec<AppPacket>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum RetryVerdict {
    /// Timer belongs to a finished attempt.
    Stale,
    /// Send another request and re-arm.
    Resend,
    /// Out of retries; these buffered packets are lost.
    Failed(Vec<AppPacket>),
}

/// Per-host ARP cache and pending-resolution state.
#[derive(Debug)]
pub struct ArpResolver {
    cfg: ArpConfig,
    cache: HashMap<Ipv4Addr, (MacAddress, SimTime)>,
    pending: HashMap<Ipv4Addr, Pending>,
    next_attempt: u64,
}

impl ArpResolver {
    pub fn new(cfg: ArpConfig) -> Self {
        ArpResolver { cfg, cache: HashMap::new(), pending: HashMap::new(), next_attempt: 0 }
    }

    pub fn config(&self) -> &ArpConfig {
        &self.cfg
    }

    /// Cached hardware address, if younger than the cache timeout.
    pub fn lookup(&mut self, ip: Ipv4Addr, now: SimTime) -> Option<MacAddress> {
        let &(mac, filled) = self.cache.get(&ip)?;
        if now.saturating_sub(filled) > self.cfg.cache_timeout {
            self.cache.remove(&ip);
            return None;
        }
        Some(mac)
    }

    pub fn is_pending(&self, ip: Ipv4Addr) -> bool {
        self.pending.contains_key(&ip)
    }

    pub fn requests_sent(&self, ip: Ipv4Addr) -> Option<u32> {
        self.pending.get(&ip).map(|p| p.requests_sent)
    }

    /// Buffers `pkt` until `ip` resolves.
    pub fn submit(&mut self, ip: Ipv4Addr, pkt: AppPacket) -> Submit {
        let cap = self.cfg.buffer_capacity;
        let mut new_attempt = None;
        let next_attempt = &mut self.next_attempt;
        let p = self.pending.entry(ip).or_insert_with(|| {
            let attempt = *next_attempt;
            *next_attempt += 1;
            new_attempt = Some(attempt);
            Pending { attempt, requests_sent: 1, buffer: VecDeque::new() }
        });
        p.buffer.push_back(pkt);
        let mut superseded = Vec::new();
        while p.buffer.len() > cap {
            superseded.extend(p.buffer.pop_front());
        }
        Submit { new_attempt, superseded }
    }

    pub fn on_retry_timer(&mut self, ip: Ipv4Addr, attempt: u64) -> RetryVerdict {
        match self.pending.get_mut(&ip) {
            Some(p) if p.attempt == attempt => {
                if p.requests_sent < self.cfg.retry_count {
                    p.requests_sent += 1;
                    RetryVerdict::Resend
                } else {
                    let p = self.pending.remove(&ip).expect("present");
                    RetryVerdict::Failed(p.buffer.into())
                }
            }
            _ => RetryVerdict::Stale,
        }
    }

    /// Records a mapping learned from an ARP message and releases anything
    /// waiting on it.
    pub fn on_reply(&mut self, ip: Ipv4Addr, mac: MacAddress, now: SimTime) -> Vec<AppPacket> {
        self.cache.insert(ip, (mac, now));
        self.pending.remove(&ip).map(|p| p.buffer.into()).unwrap_or_default()
    }

    pub fn invalidate(&mut self, ip: Ipv4Addr) {
        self.cache.remove(&ip);
    }
}
