//! Scenario construction: node placement, the flow generator, traffic
//! profiles and host-side ARP resolution.

mod arp;
mod config;

pub use arp::{AppPacket, ArpConfig, ArpResolver, RetryVerdict, Submit};
pub use config::{ConfigError, ScenarioConfig, Traffic, TrafficProfile, SCENARIO_KEYS};

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// I.i.d. uniform positions over the configured area.
pub fn place_nodes<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<Position> {
    (0..cfg.node_count)
        .map(|_| {
            let x = rng.gen::<f64>() * cfg.area_width;
            let y = rng.gen::<f64>() * cfg.area_height;
            Position::new(x, y)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    /// 1-based.
    pub index: usize,
    pub source: usize,
    pub destination: usize,
    pub start: SimTime,
    pub packet_count: u64,
    pub packet_size: u32,
    pub send_interval: SimTime,
}

impl Session {
    pub fn bytes_total(&self) -> u64 {
        self.packet_count * self.packet_size as u64
    }

    /// Time the last packet would be generated plus one interval.
    pub fn end(&self) -> SimTime {
        self.start + self.send_interval.mul(self.packet_count)
    }

    /// Generation time of packet `seq` (0-based).
    pub fn packet_time(&self, seq: u64) -> SimTime {
        self.start + self.send_interval.mul(seq)
    }
}

/// Uniform ordered (source, destination) pair with source != destination.
pub fn pick_pair<R: Rng + ?Sized>(rng: &mut R, node_count: usize) -> (usize, usize) {
    let src = rng.gen_range(0..node_count);
    let mut dst = rng.gen_range(0..node_count - 1);
    if dst >= src {
        dst += 1;
    }
    (src, dst)
}

/// Sessions at fixed spacing with geometric packet counts (support >= 1).
pub fn generate_sessions<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<Session> {
    let profile = cfg.traffic.profile();
    let p = 1.0 / profile.mean_session_packets;
    let geo = Geometric::new(p).expect("mean session length must be >= 1");
    (0..cfg.session_count)
        .map(|k| {
            let (source, destination) = pick_pair(rng, cfg.node_count);
            Session {
                index: k + 1,
                source,
                destination,
                start: cfg.first_session_at + cfg.session_spacing.mul(k as u64),
                packet_count: 1 + geo.sample(rng),
                packet_size: profile.packet_size,
                send_interval: profile.send_interval,
            }
        })
        .collect()
}
