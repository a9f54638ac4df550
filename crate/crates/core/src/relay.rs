//! wARP-Path relay: node locking through a Learning/Lookup Table (LT) and a
//! Blocking/Broadcast Table (BT).
//!
//! The LT maps a learned source MAC to the neighbour that delivered its first
//! copy. The BT records when that lock was taken; while it is live, later
//! copies from the same source are discarded and cannot move the LT entry.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::frame::{Frame, FrameKind, MacAddress};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayConfig {
    pub lt_aging: SimTime,
    pub bt_blocking: SimTime,
}

impl Default for RelayConfig {
    fn default() -> Self {
        RelayConfig { lt_aging: SimTime::from_secs(120), bt_blocking: SimTime::from_secs(1) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearningTableEntry {
    pub locked_mac: MacAddress,
    pub next_hop: MacAddress,
    pub learned_at: SimTime,
    pub refreshed_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockingTableEntry {
    pub locked_mac: MacAddress,
    pub blocked_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Learn {
    Accepted,
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayAction {
    DeliverUp,
    Forward,
    DeliverUpAndForward,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayDecision {
    pub action: RelayAction,
    /// Present for `Forward` and `DeliverUpAndForward`; BROADCAST when rebroadcasting.
    pub next_hop: Option<MacAddress>,
}

impl RelayDecision {
    fn new(action: RelayAction, next_hop: Option<MacAddress>) -> Self {
        RelayDecision { action, next_hop }
    }

    pub fn delivers_up(&self) -> bool {
        matches!(self.action, RelayAction::DeliverUp | RelayAction::DeliverUpAndForward)
    }

    pub fn forwards(&self) -> bool {
        matches!(self.action, RelayAction::Forward | RelayAction::DeliverUpAndForward)
    }
}

fn live(since: SimTime, now: SimTime, window: SimTime) -> bool {
    now.saturating_sub(since) <= window
}

#[derive(Debug, Clone, Default)]
pub struct LearningTable {
    entries: HashMap<MacAddress, LearningTableEntry>,
}

impl LearningTable {
    pub fn get(&self, mac: MacAddress) -> Option<&LearningTableEntry> {
        self.entries.get(&mac)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by locked MAC.
    pub fn entries(&self) -> Vec<LearningTableEntry> {
        let mut v: Vec<_> = self.entries.values().copied().collect();
        v.sort_by_key(|e| e.locked_mac);
        v
    }
}

#[derive(Debug, Clone, Default)]
pub struct BlockingTable {
    entries: HashMap<MacAddress, BlockingTableEntry>,
}

impl BlockingTable {
    pub fn get(&self, mac: MacAddress) -> Option<&BlockingTableEntry> {
        self.entries.get(&mac)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Relay {
    me: MacAddress,
    cfg: RelayConfig,
    lt: LearningTable,
    bt: BlockingTable,
}

impl Relay {
    pub fn new(me: MacAddress, cfg: RelayConfig) -> Self {
        Relay { me, cfg, lt: LearningTable::default(), bt: BlockingTable::default() }
    }

    pub fn address(&self) -> MacAddress {
        self.me
    }

    pub fn learning_table(&self) -> &LearningTable {
        &self.lt
    }

    pub fn blocking_table(&self) -> &BlockingTable {
        &self.bt
    }

    /// Forwarding decision for a frame this node physically received.
    pub fn process_frame(&mut self, f: &Frame, now: SimTime) -> RelayDecision {
        if f.source() == self.me {
            return RelayDecision::new(RelayAction::Discard, None);
        }
        let learned = self.learn_or_block(f.source(), f.transmitter(), now);
        let dst = f.destination();
        let next_hop = if dst.is_broadcast() {
            (learned == Learn::Accepted).then_some(MacAddress::BROADCAST)
        } else if dst == self.me {
            None
        } else if f.kind == FrameKind::Data {
            self.lookup_and_refresh(dst, now)
        } else {
            self.lookup(dst, now)
        };

        if dst == self.me {
            RelayDecision::new(RelayAction::DeliverUp, None)
        } else if dst.is_broadcast() && next_hop.is_some() {
            RelayDecision::new(RelayAction::DeliverUpAndForward, next_hop)
        } else if next_hop.is_some() {
            RelayDecision::new(RelayAction::Forward, next_hop)
        } else {
            RelayDecision::new(RelayAction::Discard, None)
        }
    }

    /// Locks `src` behind `transmitter` unless a live lock already exists.
    pub fn learn_or_block(&mut self, src: MacAddress, transmitter: MacAddress, now: SimTime) -> Learn {
        debug_assert_ne!(src, self.me);
        let blocked = self
            .bt
            .entries
            .get(&src)
            .is_some_and(|b| live(b.blocked_at, now, self.cfg.bt_blocking));
        if blocked {
            let aging = self.cfg.lt_aging;
            if let Some(e) = self.lt.entries.get_mut(&src) {
                if e.next_hop == transmitter && live(e.refreshed_at, now, aging) {
                    e.refreshed_at = now;
                }
            }
            return Learn::Blocked;
        }
        self.lt.entries.insert(
            src,
            LearningTableEntry { locked_mac: src, next_hop: transmitter, learned_at: now, refreshed_at: now },
        );
        self.bt.entries.insert(src, BlockingTableEntry { locked_mac: src, blocked_at: now });
        Learn::Accepted
    }

    /// Next hop toward `dst` from a live LT entry. Does not refresh.
    pub fn lookup(&self, dst: MacAddress, now: SimTime) -> Option<MacAddress> {
        if dst.is_broadcast() {
            return None;
        }
        self.lt
            .entries
            .get(&dst)
            .filter(|e| live(e.refreshed_at, now, self.cfg.lt_aging))
            .map(|e| e.next_hop)
    }

    /// Lookup on behalf of data forwarding; a hit extends the entry's life.
    pub fn lookup_and_refresh(&mut self, dst: MacAddress, now: SimTime) -> Option<MacAddress> {
        if dst.is_broadcast() {
            return None;
        }
        let aging = self.cfg.lt_aging;
        let e = self.lt.entries.get_mut(&dst)?;
        if !live(e.refreshed_at, now, aging) {
            return None;
        }
        e.refreshed_at = now;
        Some(e.next_hop)
    }

    /// Evicts aged LT entries and expired BT entries. Returns how many went.
    pub fn age_tables(&mut self, now: SimTime) -> usize {
        let before = self.lt.entries.len() + self.bt.entries.len();
        let (aging, blocking) = (self.cfg.lt_aging, self.cfg.bt_blocking);
        self.lt.entries.retain(|_, e| live(e.refreshed_at, now, aging));
        self.bt.entries.retain(|_, e| live(e.blocked_at, now, blocking));
        before - self.lt.entries.len() - self.bt.entries.len()
    }

    /// CSV rows `node,locked_mac,next_hop,learned_at,refreshed_at`, no header.
    pub fn dump_table(&self, node: usize) -> String {
        let mut out = String::new();
        for e in self.lt.entries() {
            let _ = writeln!(
                out,
                "{node},{},{},{},{}",
                e.locked_mac, e.next_hop, e.learned_at, e.refreshed_at
            );
        }
        out
    }
}

pub const TABLE_DUMP_HEADER: &str = "node,locked_mac,next_hop,learned_at,refreshed_at";
