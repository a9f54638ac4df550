//! Wired ARP-Path baseline: switches lock a source to the port its first
//! broadcast copy arrived on. Each switch `i` has host `i` on port 0 and
//! its neighbours on ports 1.. in ascending neighbour order.

use std::collections::HashMap;

use thiserror::Error;

use crate::engine::Scheduler;
use crate::frame::MacAddress;
use crate::relay::{Learn, RelayConfig};
use crate::time::SimTime;

pub const HOST_PORT: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortTableEntry {
    pub locked_mac: MacAddress,
    pub port: usize,
    pub learned_at: SimTime,
    pub refreshed_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiredKind {
    ArpRequest,
    ArpReply,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WiredFrame {
    pub kind: WiredKind,
    pub source: MacAddress,
    pub destination: MacAddress,
    pub uid: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WiredDecision {
    pub learned: Learn,
    pub out_ports: Vec<usize>,
}

fn live(since: SimTime, now: SimTime, window: SimTime) -> bool {
    now.saturating_sub(since) <= window
}

#[derive(Debug, Clone)]
pub struct Switch {
    cfg: RelayConfig,
    port_count: usize,
    table: HashMap<MacAddress, PortTableEntry>,
    blocked: HashMap<MacAddress, SimTime>,
}

impl Switch {
    pub fn new(port_count: usize, cfg: RelayConfig) -> Self {
        Switch { cfg, port_count, table: HashMap::new(), blocked: HashMap::new() }
    }

    pub fn port_count(&self) -> usize {
        self.port_count
    }

    pub fn entry(&self, mac: MacAddress) -> Option<&PortTableEntry> {
        self.table.get(&mac)
    }

    pub fn lookup(&self, mac: MacAddress, now: SimTime) -> Option<usize> {
        self.table.get(&mac).filter(|e| live(e.refreshed_at, now, self.cfg.lt_aging)).map(|e| e.port)
    }

    fn learn_or_block(&mut self, src: MacAddress, port: usize, now: SimTime) -> Learn {
        if self.blocked.get(&src).is_some_and(|&t| live(t, now, self.cfg.bt_blocking)) {
            if let Some(e) = self.table.get_mut(&src) {
                if e.port == port && live(e.refreshed_at, now, self.cfg.lt_aging) {
                    e.refreshed_at = now;
                }
            }
            return Learn::Blocked;
        }
        self.table.insert(src, PortTableEntry { locked_mac: src, port, learned_at: now, refreshed_at: now });
        self.blocked.insert(src, now);
        Learn::Accepted
    }

    /// Output ports for a frame received on `input_port`. Never includes the
    /// input port.
    pub fn process_frame_wired(&mut self, f: &WiredFrame, input_port: usize, now: SimTime) -> WiredDecision {
        let learned = self.learn_or_block(f.source, input_port, now);
        let out_ports = if f.destination.is_broadcast() {
            if learned == Learn::Accepted {
                (0..self.port_count).filter(|&p| p != input_port).collect()
            } else {
                Vec::new()
            }
        } else {
            let hit = self.lookup(f.destination, now);
            if f.kind == WiredKind::Data {
                if let (Some(_), Some(e)) = (hit, self.table.get_mut(&f.destination)) {
                    e.refreshed_at = now;
                }
            }
            hit.filter(|&p| p != input_port).into_iter().collect()
        };
        WiredDecision { learned, out_ports }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WiredError {
    #[error("switch {0} is listed as its own neighbour")]
    SelfLoop(usize),
    #[error("neighbour {1} of switch {0} is out of range")]
    UnknownNeighbour(usize, usize),
    #[error("switch {at} has no live entry toward the destination")]
    DeadEnd { at: usize },
    #[error("port walk revisited switch {at}")]
    Loop { at: usize },
}

#[derive(Debug)]
enum WiredEvent {
    AtSwitch { switch: usize, port: usize, frame: WiredFrame },
    AtHost { host: usize, frame: WiredFrame },
}

/// Switch fabric with a fixed per-link latency.
pub struct WiredNetwork {
    sched: Scheduler<WiredEvent>,
    switches: Vec<Switch>,
    neighbours: Vec<Vec<usize>>,
    latency: SimTime,
    next_uid: u64,
    arp_targets: HashMap<u64, usize>,
    delivered: Vec<(usize, WiredFrame)>,
}

impl WiredNetwork {
    pub fn new(adjacency: &[Vec<usize>], latency: SimTime, cfg: RelayConfig) -> Result<Self, WiredError> {
        let n = adjacency.len();
        let mut neighbours = vec![Vec::new(); n];
        for (i, adj) in adjacency.iter().enumerate() {
            for &j in adj {
                if j >= n {
                    return Err(WiredError::UnknownNeighbour(i, j));
                }
                if j == i {
                    return Err(WiredError::SelfLoop(i));
                }
                neighbours[i].push(j);
                neighbours[j].push(i);
            }
        }
        for a in &mut neighbours {
            a.sort_unstable();
            a.dedup();
        }
        let switches = neighbours.iter().map(|a| Switch::new(a.len() + 1, cfg)).collect();
        Ok(WiredNetwork { sched: Scheduler::new(), switches, neighbours, latency, next_uid: 1, arp_targets: HashMap::new(), delivered: Vec::new() })
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn switch(&self, i: usize) -> &Switch {
        &self.switches[i]
    }

    /// Frames that reached a host addressed to it, in arrival order.
    pub fn delivered(&self) -> &[(usize, WiredFrame)] {
        &self.delivered
    }

    fn host_send(&mut self, host: usize, kind: WiredKind, destination: MacAddress) -> u64 {
        let uid = self.next_uid;
        self.next_uid += 1;
        let frame = WiredFrame { kind, source: MacAddress::for_node(host), destination, uid };
        self.sched.schedule_in(self.latency, WiredEvent::AtSwitch { switch: host, port: HOST_PORT, frame });
        uid
    }

    /// Host `src` broadcasts an ARP Request for host `target`; the target
    /// answers with a unicast reply.
    pub fn explore(&mut self, src: usize, target: usize) -> u64 {
        let uid = self.host_send(src, WiredKind::ArpRequest, MacAddress::BROADCAST);
        self.arp_targets.insert(uid, target);
        uid
    }

    pub fn send_data(&mut self, src: usize, dst: usize) -> u64 {
        self.host_send(src, WiredKind::Data, MacAddress::for_node(dst))
    }

    pub fn run_until(&mut self, t_end: SimTime) -> u64 {
        let mut count = 0;
        while let Some((_, ev)) = self.sched.pop_until(t_end) {
            count += 1;
            match ev {
                WiredEvent::AtSwitch { switch, port, frame } => {
                    let now = self.sched.now();
                    let d = self.switches[switch].process_frame_wired(&frame, port, now);
                    for p in d.out_ports {
                        let ev = if p == HOST_PORT {
                            WiredEvent::AtHost { host: switch, frame }
                        } else {
                            let next = self.neighbours[switch][p - 1];
                            let back = self.port_to(next, switch);
                            WiredEvent::AtSwitch { switch: next, port: back, frame }
                        };
                        self.sched.schedule_in(self.latency, ev);
                    }
                }
                WiredEvent::AtHost { host, frame } => self.on_host(host, frame),
            }
        }
        self.sched.run_until(t_end, |_, _, _| {});
        count
    }

    fn on_host(&mut self, host: usize, frame: WiredFrame) {
        let me = MacAddress::for_node(host);
        match frame.kind {
            WiredKind::ArpRequest => {
                if self.arp_targets.get(&frame.uid) == Some(&host) {
                    self.delivered.push((host, frame));
                    self.host_send(host, WiredKind::ArpReply, frame.source);
                }
            }
            _ if frame.destination == me => self.delivered.push((host, frame)),
            _ => {}
        }
    }

    fn port_to(&self, from: usize, to: usize) -> usize {
        1 + self.neighbours[from].binary_search(&to).expect("links are symmetric")
    }

    /// Switch sequence from `from` to host `to`'s switch, following live
    /// port entries for host `to`.
    pub fn path(&self, from: usize, to: usize) -> Result<Vec<usize>, WiredError> {
        let now = self.now();
        let target = MacAddress::for_node(to);
        let mut path = vec![from];
        let mut at = from;
        let mut seen = vec![false; self.switches.len()];
        seen[from] = true;
        loop {
            let port = self.switches[at].lookup(target, now).ok_or(WiredError::DeadEnd { at })?;
            if port == HOST_PORT {
                return if at == to { Ok(path) } else { Err(WiredError::DeadEnd { at }) };
            }
            let next = self.neighbours[at][port - 1];
            if seen[next] {
                return Err(WiredError::Loop { at: next });
            }
            seen[next] = true;
            path.push(next);
            at = next;
        }
    }
}
