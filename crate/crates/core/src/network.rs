//! The wireless network: every node runs a host (applications + ARP), a
//! wARP-Path relay and a DCF MAC over one shared free-space channel.

use std::collections::{HashMap, VecDeque};
use std::net::Ipv4Addr;

use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::engine::{EventHandle, RngStreams, Scheduler};
use crate::frame::{ip_for_node, node_for_ip, ArpFields, Frame, FrameKind, MacAddress};
use crate::mac::{Enqueue, Handshake, MacConfig, RetryOutcome, RetryState, TxQueue};
use crate::metrics::{MetricsLog, SessionRow, TraceRecord};
use crate::phy::{self, Arrival, LossReason, RadioConfig, Reception};
use crate::relay::{Relay, RelayAction, RelayConfig};
use crate::scenario::{AppPacket, ArpConfig, ArpResolver, Position, RetryVerdict, Session};
use crate::time::SimTime;
use crate::trace::{Trace, TraceEvent, TraceKind};

/// How the shared medium treats overlapping signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// SINR capture with propagation delay.
    Realistic,
    /// No interference and no propagation delay: every in-range frame decodes
    /// unless the receiver is transmitting. Carrier sense still applies.
    Ideal,
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub radio: RadioConfig,
    pub mac: MacConfig,
    pub relay: RelayConfig,
    pub arp: ArpConfig,
    pub channel: ChannelMode,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            radio: RadioConfig::default(),
            mac: MacConfig::default(),
            relay: RelayConfig::default(),
            arp: ArpConfig::default(),
            channel: ChannelMode::Realistic,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("invalid radio configuration: {0}")]
    Radio(String),
    #[error("invalid MAC configuration: {0}")]
    Mac(String),
    #[error("network needs at least one node")]
    Empty,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("node {at} has no live entry toward the destination")]
    DeadEnd { at: usize },
    #[error("next-hop walk revisited node {at}")]
    Loop { at: usize },
    #[error("next hop {0} is not a node of this network")]
    UnknownHop(MacAddress),
}

type TxId = u64;

#[derive(Debug)]
enum Event {
    AppTick { session: usize, seq: u64 },
    ArpRetry { node: usize, ip: Ipv4Addr, attempt: u64 },
    MacAccess { node: usize },
    MacTimeout { node: usize },
    MacRespond { node: usize, frame: Box<Frame> },
    TxEnd { node: usize, tx: TxId },
    SignalStart { node: usize, tx: TxId },
    SignalEnd { node: usize, tx: TxId },
    NavEnd { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Contending,
    TxBroadcast,
    TxRts,
    AwaitCts,
    SendData,
    TxData,
    AwaitAck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TxRole {
    Broadcast,
    Rts,
    Data,
    Response,
}

struct Transmission {
    sender: usize,
    frame: Frame,
    start: SimTime,
    end: SimTime,
}

const DEDUP_DEPTH: usize = 8;

struct Dcf {
    queue: TxQueue,
    phase: Phase,
    retry: RetryState,
    backoff_left: Option<SimTime>,
    slotted: bool,
    access_timer: Option<EventHandle>,
    difs_end: SimTime,
    timeout: Option<EventHandle>,
    busy_signals: u32,
    transmitting: Option<TxRole>,
    responding: bool,
    nav_until: SimTime,
    /// Recently accepted (uid) per transmitter, for retransmission filtering.
    seen: HashMap<MacAddress, VecDeque<u64>>,
}

impl Dcf {
    fn new(cfg: &MacConfig) -> Self {
        Dcf {
            queue: TxQueue::new(cfg.queue_capacity),
            phase: Phase::Idle,
            retry: RetryState::new(cfg),
            backoff_left: None,
            slotted: true,
            access_timer: None,
            difs_end: SimTime::ZERO,
            timeout: None,
            busy_signals: 0,
            transmitting: None,
            responding: false,
            nav_until: SimTime::ZERO,
            seen: HashMap::new(),
        }
    }

    fn medium_idle(&self, now: SimTime) -> bool {
        self.transmitting.is_none() && !self.responding && self.busy_signals == 0 && now >= self.nav_until
    }

    /// True if this (transmitter, uid) was already accepted.
    fn is_duplicate(&mut self, tx: MacAddress, uid: u64) -> bool {
        let ring = self.seen.entry(tx).or_default();
        if ring.contains(&uid) {
            return true;
        }
        if ring.len() == DEDUP_DEPTH {
            ring.pop_front();
        }
        ring.push_back(uid);
        false
    }
}

struct Node {
    mac: MacAddress,
    ip: Ipv4Addr,
    relay: Relay,
    dcf: Dcf,
    arp: ArpResolver,
}

/// One neighbour within decoding or sensing range of a transmitter.
#[derive(Clone, Copy)]
struct Link {
    to: usize,
    delay: SimTime,
    senses: bool,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ArpCounts {
    pub requests: u64,
    pub replies: u64,
}

pub struct Network {
    cfg: NetworkConfig,
    sched: Scheduler<Event>,
    nodes: Vec<Node>,
    positions: Vec<Position>,
    rx_power_mw: Vec<f64>,
    prop: Vec<SimTime>,
    links: Vec<Vec<Link>>,
    air: VecDeque<Transmission>,
    air_front: TxId,
    next_tx: TxId,
    horizon: SimTime,
    /// Longest airtime put on the channel so far.
    max_air: SimTime,
    jitter_rng: ChaCha12Rng,
    backoff_rng: ChaCha12Rng,
    trace: Trace,
    metrics: MetricsLog,
    sessions: Vec<Session>,
    arp_counts: HashMap<(usize, usize), ArpCounts>,
    next_uid: u64,
    events: u64,
}

impl Network {
    pub fn new(positions: &[Position], cfg: NetworkConfig, seed: u64, trace: Trace) -> Result<Self, NetworkError> {
        cfg.radio.validate().map_err(NetworkError::Radio)?;
        cfg.mac.validate().map_err(NetworkError::Mac)?;
        let n = positions.len();
        if n == 0 {
            return Err(NetworkError::Empty);
        }
        let ideal = cfg.channel == ChannelMode::Ideal;
        let mut rx_power_mw = vec![0.0; n * n];
        let mut prop = vec![SimTime::ZERO; n * n];
        let mut links = vec![Vec::new(); n];
        let floor = cfg.radio.sensitivity_dbm.min(cfg.radio.energy_detect_dbm);
        let mut max_prop = SimTime::ZERO;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = positions[i].distance(&positions[j]);
                let p_dbm = cfg.radio.rx_power_dbm(d);
                rx_power_mw[i * n + j] = phy::dbm_to_mw(p_dbm);
                let delay = if ideal { SimTime::ZERO } else { RadioConfig::propagation_delay(d) };
                prop[i * n + j] = delay;
                max_prop = max_prop.max(delay);
                let in_range = if ideal { p_dbm >= cfg.radio.sensitivity_dbm } else { p_dbm >= floor };
                if in_range {
                    links[i].push(Link { to: j, delay, senses: p_dbm >= cfg.radio.energy_detect_dbm });
                }
            }
        }
        let nodes = (0..n)
            .map(|i| {
                let mac = MacAddress::for_node(i);
                Node {
                    mac,
                    ip: ip_for_node(i),
                    relay: Relay::new(mac, cfg.relay),
                    dcf: Dcf::new(&cfg.mac),
                    arp: ArpResolver::new(cfg.arp.clone()),
                }
            })
            .collect();
        let rng = RngStreams::new(seed);
        Ok(Network {
            horizon: max_prop.mul(2) + SimTime::from_micros(1),
            max_air: SimTime::ZERO,
            cfg,
            sched: Scheduler::new(),
            nodes,
            positions: positions.to_vec(),
            rx_power_mw,
            prop,
            links,
            air: VecDeque::new(),
            air_front: 0,
            next_tx: 0,
            jitter_rng: rng.jitter,
            backoff_rng: rng.backoff,
            trace,
            metrics: MetricsLog::default(),
            sessions: Vec::new(),
            arp_counts: HashMap::new(),
            next_uid: 1,
            events: 0,
        })
    }

    // ---- public surface -------------------------------------------------

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    /// Nodes that can decode `node`'s transmissions.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let floor = self.cfg.radio.sensitivity_dbm;
        let n = self.nodes.len();
        self.links[node]
            .iter()
            .filter(|l| phy::mw_to_dbm(self.rx_power_mw[node * n + l.to]) >= floor)
            .map(|l| l.to)
            .collect()
    }

    pub fn relay(&self, node: usize) -> &Relay {
        &self.nodes[node].relay
    }

    pub fn queue_len(&self, node: usize) -> usize {
        self.nodes[node].dcf.queue.len()
    }

    pub fn metrics(&self) -> &MetricsLog {
        &self.metrics
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn trace_mut(&mut self) -> &mut Trace {
        &mut self.trace
    }

    pub fn into_parts(self) -> (MetricsLog, Trace) {
        (self.metrics, self.trace)
    }

    pub fn events_executed(&self) -> u64 {
        self.events
    }

    pub fn arp_counts(&self, source: usize, target: usize) -> ArpCounts {
        self.arp_counts.get(&(source, target)).copied().unwrap_or_default()
    }

    /// Registers an application session; its first packet fires at `start`.
    pub fn add_session(&mut self, s: Session) {
        let idx = self.sessions.len();
        if s.packet_count > 0 {
            self.sched
                .schedule(s.start, Event::AppTick { session: idx, seq: 0 })
                .expect("session starts in the past");
        }
        self.sessions.push(s);
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    /// Generates one application packet at `src` for `dst` right now.
    pub fn send_app_packet(&mut self, src: usize, dst: usize, size: u32) -> u64 {
        let now = self.now();
        let uid = self.alloc_uid();
        self.metrics.generated(TraceRecord {
            uid,
            size,
            generated_at: now,
            delivered_at: None,
            source: src,
            destination: dst,
            session: 0,
        });
        let pkt = AppPacket { uid, session: 0, dst_node: dst, size, origin_time: now };
        self.trace_app(TraceKind::Generated, src, &pkt);
        self.host_send(src, pkt);
        uid
    }

    /// Floods one ARP Request from `src` asking for `target`, bypassing the
    /// resolver (no retries). Returns the request uid.
    pub fn explore(&mut self, src: usize, target: usize) -> u64 {
        self.send_arp_request(src, ip_for_node(target))
    }

    /// Places a ready-made frame in `node`'s transmit queue.
    pub fn inject(&mut self, node: usize, frame: Frame) -> Enqueue {
        self.mac_enqueue(node, frame)
    }

    pub fn alloc_uid(&mut self) -> u64 {
        let uid = self.next_uid;
        self.next_uid += 1;
        uid
    }

    /// Runs every event up to and including `t_end`.
    pub fn run_until(&mut self, t_end: SimTime) -> u64 {
        let mut count = 0;
        while let Some((_, ev)) = self.sched.pop_until(t_end) {
            self.dispatch(ev);
            count += 1;
        }
        let _ = self.sched.run_until(t_end, |_, _, _| unreachable!());
        self.events += count;
        count
    }

    /// Walks live LT entries from `from` toward `to` without refreshing them.
    pub fn path(&self, from: usize, to: usize) -> Result<Vec<usize>, PathError> {
        let now = self.now();
        let target = self.nodes[to].mac;
        let mut path = vec![from];
        let mut at = from;
        let mut visited = vec![false; self.nodes.len()];
        visited[from] = true;
        while at != to {
            let hop = self.nodes[at].relay.lookup(target, now).ok_or(PathError::DeadEnd { at })?;
            let next = hop.node_index().filter(|&i| i < self.nodes.len()).ok_or(PathError::UnknownHop(hop))?;
            if visited[next] {
                return Err(PathError::Loop { at: next });
            }
            visited[next] = true;
            path.push(next);
            at = next;
        }
        Ok(path)
    }

    /// Per-session rows, with traffic counted up to `t_end`.
    pub fn session_rows(&self, t_end: SimTime) -> Vec<SessionRow> {
        let mut sent = vec![0u64; self.sessions.len() + 1];
        let mut recv = vec![0u64; self.sessions.len() + 1];
        for r in self.metrics.records() {
            if r.session == 0 || r.generated_at > t_end {
                continue;
            }
            sent[r.session] += r.size as u64;
            if r.delivered_at.is_some_and(|d| d <= t_end) {
                recv[r.session] += r.size as u64;
            }
        }
        self.sessions
            .iter()
            .map(|s| {
                let c = self.arp_counts(s.source, s.destination);
                SessionRow {
                    index: s.index,
                    source: s.source,
                    destination: s.destination,
                    bytes: s.bytes_total(),
                    start: s.start,
                    end: s.end(),
                    arp_requests: c.requests,
                    arp_replies: c.replies,
                    sent_bytes: sent[s.index],
                    received_bytes: recv[s.index],
                }
            })
            .collect()
    }

    // ---- dispatch -------------------------------------------------------

    fn dispatch(&mut self, ev: Event) {
        match ev {
            Event::AppTick { session, seq } => self.on_app_tick(session, seq),
            Event::ArpRetry { node, ip, attempt } => self.on_arp_retry(node, ip, attempt),
            Event::MacAccess { node } => self.on_access(node),
            Event::MacTimeout { node } => self.on_timeout(node),
            Event::MacRespond { node, frame } => self.on_respond(node, *frame),
            Event::TxEnd { node, tx } => self.on_tx_end(node, tx),
            Event::SignalStart { node, tx } => self.on_signal_start(node, tx),
            Event::SignalEnd { node, tx } => self.on_signal_end(node, tx),
            Event::NavEnd { node } => self.refresh_contention(node),
        }
    }

    fn record(&mut self, node: usize, kind: TraceKind, f: &Frame) {
        if self.trace.wants(kind) {
            let ev = TraceEvent::for_frame(self.now(), node, kind, f);
            self.trace.record(ev);
        }
    }

    fn trace_app(&mut self, kind: TraceKind, node: usize, pkt: &AppPacket) {
        if self.trace.wants(kind) {
            let ev = TraceEvent {
                time: self.now(),
                node,
                event: kind,
                kind: FrameKind::Data,
                uid: pkt.uid,
                src: self.nodes[node].mac,
                dst: MacAddress::for_node(pkt.dst_node),
                tx: None,
                rx: None,
                bytes: pkt.size,
            };
            self.trace.record(ev);
        }
    }

    // ---- application and ARP -------------------------------------------

    fn on_app_tick(&mut self, idx: usize, seq: u64) {
        let s = self.sessions[idx].clone();
        let now = self.now();
        let uid = self.alloc_uid();
        self.metrics.generated(TraceRecord {
            uid,
            size: s.packet_size,
            generated_at: now,
            delivered_at: None,
            source: s.source,
            destination: s.destination,
            session: s.index,
        });
        let pkt = AppPacket { uid, session: s.index, dst_node: s.destination, size: s.packet_size, origin_time: now };
        self.trace_app(TraceKind::Generated, s.source, &pkt);
        self.host_send(s.source, pkt);
        if seq + 1 < s.packet_count {
            let at = s.packet_time(seq + 1);
            self.sched.schedule(at, Event::AppTick { session: idx, seq: seq + 1 }).expect("monotone session clock");
        }
    }

    /// Sends via the cached mapping and the local LT, or parks the packet
    /// behind an ARP resolution.
    fn host_send(&mut self, node: usize, pkt: AppPacket) {
        let now = self.now();
        let ip = ip_for_node(pkt.dst_node);
        let n = &mut self.nodes[node];
        if let Some(mac) = n.arp.lookup(ip, now) {
            if let Some(next_hop) = n.relay.lookup_and_refresh(mac, now) {
                let f = Frame::data(n.mac, mac, next_hop, pkt.size, pkt.uid, pkt.origin_time)
                    .expect("node addresses are unicast");
                self.mac_enqueue(node, f);
                return;
            }
            n.arp.invalidate(ip);
        }
        let submit = n.arp.submit(ip, pkt);
        for old in &submit.superseded {
            self.trace_app(TraceKind::DropArpSuperseded, node, old);
        }
        if let Some(attempt) = submit.new_attempt {
            self.send_arp_request(node, ip);
            let timeout = self.cfg.arp.retry_timeout;
            self.sched.schedule_in(timeout, Event::ArpRetry { node, ip, attempt });
        }
    }

    fn send_arp_request(&mut self, node: usize, target_ip: Ipv4Addr) -> u64 {
        let uid = self.alloc_uid();
        let n = &self.nodes[node];
        let fields = ArpFields { sender_ip: n.ip, target_ip };
        let f = Frame::arp_request(n.mac, fields, uid, self.now()).expect("unicast source");
        if let Some(t) = node_for_ip(target_ip) {
            self.arp_counts.entry((node, t)).or_default().requests += 1;
        }
        self.record(node, TraceKind::ArpRequest, &f);
        self.mac_enqueue(node, f);
        uid
    }

    fn on_arp_retry(&mut self, node: usize, ip: Ipv4Addr, attempt: u64) {
        match self.nodes[node].arp.on_retry_timer(ip, attempt) {
            RetryVerdict::Stale => {}
            RetryVerdict::Resend => {
                self.send_arp_request(node, ip);
                let timeout = self.cfg.arp.retry_timeout;
                self.sched.schedule_in(timeout, Event::ArpRetry { node, ip, attempt });
            }
            RetryVerdict::Failed(lost) => {
                for p in &lost {
                    self.trace_app(TraceKind::DropArpFail, node, p);
                }
            }
        }
    }

    /// Upper-layer handling of a frame the relay delivered to this node.
    fn deliver_up(&mut self, node: usize, f: &Frame) {
        let me = self.nodes[node].mac;
        let Ok(up) = f.decapsulate_for_upper(me) else { return };
        let now = self.now();
        match up.kind {
            FrameKind::ArpRequest => {
                let Some(arp) = up.arp else { return };
                if arp.target_ip != self.nodes[node].ip {
                    return;
                }
                let requester = up.source();
                let flushed = self.nodes[node].arp.on_reply(arp.sender_ip, requester, now);
                let Some(next_hop) = self.nodes[node].relay.lookup(requester, now) else {
                    self.record(node, TraceKind::DropNoRoute, &up);
                    return;
                };
                let uid = self.alloc_uid();
                let fields = ArpFields { sender_ip: self.nodes[node].ip, target_ip: arp.sender_ip };
                let reply = Frame::arp_reply(me, requester, next_hop, fields, uid, now).expect("unicast source");
                self.record(node, TraceKind::ArpReply, &reply);
                self.mac_enqueue(node, reply);
                for p in flushed {
                    self.host_send(node, p);
                }
            }
            FrameKind::ArpReply => {
                let Some(arp) = up.arp else { return };
                if let Some(t) = node_for_ip(arp.sender_ip) {
                    self.arp_counts.entry((node, t)).or_default().replies += 1;
                }
                self.record(node, TraceKind::ArpResolved, &up);
                let flushed = self.nodes[node].arp.on_reply(arp.sender_ip, up.source(), now);
                for p in flushed {
                    self.host_send(node, p);
                }
            }
            FrameKind::Data => {
                if self.metrics.delivered(up.uid, now) {
                    self.record(node, TraceKind::Delivered, &up);
                }
            }
            _ => {}
        }
    }

    // ---- relay ----------------------------------------------------------

    fn relay_input(&mut self, node: usize, f: Frame) {
        let now = self.now();
        let decision = self.nodes[node].relay.process_frame(&f, now);
        match decision.action {
            RelayAction::Discard => self.record(node, TraceKind::RelayDiscard, &f),
            _ => {
                if decision.delivers_up() {
                    self.record(node, TraceKind::RelayDeliver, &f);
                    self.deliver_up(node, &f);
                }
                if let (true, Some(next_hop)) = (decision.forwards(), decision.next_hop) {
                    let me = self.nodes[node].mac;
                    if let Ok(out) = f.rewrite_for_hop(me, next_hop) {
                        self.record(node, TraceKind::RelayForward, &out);
                        self.mac_enqueue(node, out);
                    }
                }
            }
        }
    }

    // ---- DCF ------------------------------------------------------------

    fn mac_enqueue(&mut self, node: usize, f: Frame) -> Enqueue {
        let res = self.nodes[node].dcf.queue.push(f.clone());
        match res {
            Enqueue::DroppedQueueFull => self.record(node, TraceKind::DropQueueFull, &f),
            Enqueue::Queued => {
                self.record(node, TraceKind::Enqueue, &f);
                if self.nodes[node].dcf.phase == Phase::Idle {
                    self.start_contention(node);
                }
            }
        }
        res
    }

    fn start_contention(&mut self, node: usize) {
        let cfg = &self.cfg.mac;
        let dcf = &mut self.nodes[node].dcf;
        let Some(head) = dcf.queue.head() else {
            dcf.phase = Phase::Idle;
            return;
        };
        dcf.phase = Phase::Contending;
        if dcf.backoff_left.is_none() {
            if head.receiver().is_broadcast() {
                dcf.backoff_left = Some(cfg.broadcast_delay(&mut self.jitter_rng));
                dcf.slotted = false;
            } else {
                dcf.backoff_left = Some(cfg.backoff(&mut self.backoff_rng, dcf.retry.cw));
                dcf.slotted = true;
            }
        }
        self.refresh_contention(node);
    }

    /// Starts, or freezes, the DIFS + backoff countdown to match the medium.
    fn refresh_contention(&mut self, node: usize) {
        let now = self.now();
        let difs = self.cfg.mac.difs;
        let slot = self.cfg.mac.slot_time;
        let dcf = &mut self.nodes[node].dcf;
        if dcf.phase != Phase::Contending {
            return;
        }
        let idle = dcf.medium_idle(now);
        match (idle, dcf.access_timer) {
            (true, None) => {
                dcf.difs_end = now + difs;
                let left = dcf.backoff_left.unwrap_or(SimTime::ZERO);
                dcf.access_timer = Some(self.sched.schedule_in(difs + left, Event::MacAccess { node }));
            }
            (false, Some(h)) => {
                self.sched.cancel(h);
                dcf.access_timer = None;
                if now > dcf.difs_end {
                    let mut elapsed = now - dcf.difs_end;
                    if dcf.slotted {
                        elapsed = slot.mul(elapsed.as_nanos() / slot.as_nanos());
                    }
                    dcf.backoff_left = dcf.backoff_left.map(|b| b.saturating_sub(elapsed));
                }
            }
            _ => {}
        }
    }

    fn on_access(&mut self, node: usize) {
        let sifs = self.cfg.mac.sifs;
        let dcf = &mut self.nodes[node].dcf;
        dcf.access_timer = None;
        dcf.backoff_left = None;
        debug_assert_eq!(dcf.phase, Phase::Contending);
        let head = dcf.queue.head().expect("contending without a frame").clone();
        if head.receiver().is_broadcast() {
            dcf.phase = Phase::TxBroadcast;
            self.start_tx(node, head, TxRole::Broadcast);
        } else {
            dcf.phase = Phase::TxRts;
            let hs = Handshake::for_frame(&self.cfg.radio, &head);
            let rts = Frame::control(FrameKind::Rts, self.nodes[node].mac, head.receiver(), head.uid, hs.rts_duration(sifs))
                .expect("unicast transmitter");
            self.start_tx(node, rts, TxRole::Rts);
        }
    }

    fn start_tx(&mut self, node: usize, f: Frame, role: TxRole) {
        let now = self.now();
        let end = now + self.cfg.radio.airtime(f.total_len());
        self.max_air = self.max_air.max(end - now);
        self.record(node, TraceKind::TxStart, &f);
        self.nodes[node].dcf.transmitting = Some(role);
        self.refresh_contention(node);
        let tx = self.next_tx;
        self.next_tx += 1;
        self.sched.schedule_in(end - now, Event::TxEnd { node, tx });
        for l in &self.links[node] {
            self.sched.schedule_in(l.delay, Event::SignalStart { node: l.to, tx });
            self.sched.schedule_in(end - now + l.delay, Event::SignalEnd { node: l.to, tx });
        }
        self.air.push_back(Transmission { sender: node, frame: f, start: now, end });
        self.prune_air();
    }

    fn prune_air(&mut self) {
        let now = self.now();
        let max_air = self.max_air;
        while let Some(front) = self.air.front() {
            if front.end + max_air + self.horizon < now {
                self.air.pop_front();
                self.air_front += 1;
            } else {
                break;
            }
        }
    }

    fn air(&self, tx: TxId) -> &Transmission {
        &self.air[(tx - self.air_front) as usize]
    }

    fn on_tx_end(&mut self, node: usize, tx: TxId) {
        let role = self.nodes[node].dcf.transmitting.take().expect("tx end without tx");
        let (kind_done, frame) = {
            let t = self.air(tx);
            (t.frame.kind, t.frame.clone())
        };
        let _ = kind_done;
        self.record(node, TraceKind::TxEnd, &frame);
        let mac = &self.cfg.mac;
        let radio = &self.cfg.radio;
        let dcf = &mut self.nodes[node].dcf;
        match role {
            TxRole::Broadcast => {
                let f = dcf.queue.pop().expect("broadcast head");
                self.record(node, TraceKind::MacOk, &f);
                self.next_frame(node);
            }
            TxRole::Rts => {
                dcf.phase = Phase::AwaitCts;
                let wait = mac.sifs + radio.airtime(crate::frame::CTS_LEN) + mac.slot_time + self.horizon;
                dcf.timeout = Some(self.sched.schedule_in(wait, Event::MacTimeout { node }));
            }
            TxRole::Data => {
                dcf.phase = Phase::AwaitAck;
                let wait = mac.sifs + radio.airtime(crate::frame::ACK_LEN) + mac.slot_time + self.horizon;
                dcf.timeout = Some(self.sched.schedule_in(wait, Event::MacTimeout { node }));
            }
            TxRole::Response => dcf.responding = false,
        }
        self.refresh_contention(node);
    }

    fn next_frame(&mut self, node: usize) {
        let dcf = &mut self.nodes[node].dcf;
        dcf.phase = Phase::Idle;
        dcf.backoff_left = None;
        if !dcf.queue.is_empty() {
            self.start_contention(node);
        }
    }

    fn on_timeout(&mut self, node: usize) {
        let cfg = self.cfg.mac.clone();
        let dcf = &mut self.nodes[node].dcf;
        dcf.timeout = None;
        if !matches!(dcf.phase, Phase::AwaitCts | Phase::AwaitAck) {
            return;
        }
        match dcf.retry.on_failure(&cfg) {
            RetryOutcome::GiveUp => {
                let f = dcf.queue.pop().expect("unicast head");
                self.record(node, TraceKind::DropRetryLimit, &f);
                self.next_frame(node);
            }
            RetryOutcome::Retry => {
                dcf.phase = Phase::Idle;
                dcf.backoff_left = None;
                self.start_contention(node);
            }
        }
    }

    fn on_respond(&mut self, node: usize, f: Frame) {
        let dcf = &mut self.nodes[node].dcf;
        if dcf.transmitting.is_some() {
            if f.kind.is_control() {
                dcf.responding = false;
            } else {
                dcf.phase = Phase::AwaitAck;
                dcf.timeout = Some(self.sched.schedule_in(SimTime::ZERO, Event::MacTimeout { node }));
            }
            return;
        }
        if f.kind.is_control() {
            self.start_tx(node, f, TxRole::Response);
        } else {
            debug_assert_eq!(dcf.phase, Phase::SendData);
            dcf.phase = Phase::TxData;
            self.start_tx(node, f, TxRole::Data);
        }
    }

    fn on_signal_start(&mut self, node: usize, tx: TxId) {
        let sender = self.air(tx).sender;
        if self.senses(sender, node) {
            self.nodes[node].dcf.busy_signals += 1;
            self.refresh_contention(node);
        }
    }

    fn senses(&self, from: usize, to: usize) -> bool {
        self.links[from].iter().find(|l| l.to == to).is_some_and(|l| l.senses)
    }

    fn on_signal_end(&mut self, node: usize, tx: TxId) {
        let sender = self.air(tx).sender;
        if self.senses(sender, node) {
            self.nodes[node].dcf.busy_signals -= 1;
        }
        let outcome = self.reception(node, tx);
        let frame = self.air(tx).frame.clone();
        match outcome {
            Reception::Decoded => {
                self.record(node, TraceKind::RxOk, &frame);
                self.mac_receive(node, frame);
            }
            Reception::Lost(reason) => {
                let kind = match reason {
                    LossReason::BelowSensitivity => TraceKind::LostBelowSensitivity,
                    LossReason::Sinr => TraceKind::LostSinr,
                    LossReason::HalfDuplex => TraceKind::LostHalfDuplex,
                };
                self.record(node, kind, &frame);
            }
        }
        self.refresh_contention(node);
    }

    fn reception(&self, rx: usize, tx: TxId) -> Reception {
        let n = self.nodes.len();
        let t = self.air(tx);
        let delay = self.prop[t.sender * n + rx];
        let signal = Arrival { power_mw: self.rx_power_mw[t.sender * n + rx], start: t.start + delay, end: t.end + delay };
        let mut interferers = Vec::new();
        let mut own = Vec::new();
        for (i, o) in self.air.iter().enumerate() {
            if self.air_front + i as u64 == tx {
                continue;
            }
            if o.sender == rx {
                own.push((o.start, o.end));
            } else if self.cfg.channel == ChannelMode::Realistic {
                let d = self.prop[o.sender * n + rx];
                interferers.push(Arrival { power_mw: self.rx_power_mw[o.sender * n + rx], start: o.start + d, end: o.end + d });
            }
        }
        phy::reception_outcome(&self.cfg.radio, &signal, &interferers, &own)
    }

    fn set_nav(&mut self, node: usize, until: SimTime) {
        let dcf = &mut self.nodes[node].dcf;
        if until > dcf.nav_until {
            dcf.nav_until = until;
            self.sched.schedule(until, Event::NavEnd { node }).expect("nav in the future");
        }
        self.refresh_contention(node);
    }

    /// MAC receive path for a decoded frame.
    fn mac_receive(&mut self, node: usize, f: Frame) {
        let now = self.now();
        let me = self.nodes[node].mac;
        let sifs = self.cfg.mac.sifs;
        let rx = f.receiver();
        if rx != me && !rx.is_broadcast() {
            if f.duration > SimTime::ZERO {
                self.set_nav(node, now + f.duration);
            }
            return;
        }
        let dcf = &mut self.nodes[node].dcf;
        match f.kind {
            FrameKind::Rts => {
                let busy = matches!(
                    dcf.phase,
                    Phase::TxRts | Phase::AwaitCts | Phase::SendData | Phase::TxData | Phase::AwaitAck
                );
                if dcf.transmitting.is_none() && !dcf.responding && now >= dcf.nav_until && !busy {
                    dcf.responding = true;
                    let cts_air = self.cfg.radio.airtime(crate::frame::CTS_LEN);
                    let dur = Handshake::cts_duration(f.duration, sifs, cts_air);
                    let cts = Frame::control(FrameKind::Cts, me, f.transmitter(), f.uid, dur).expect("unicast");
                    self.sched.schedule_in(sifs, Event::MacRespond { node, frame: Box::new(cts) });
                }
            }
            FrameKind::Cts => {
                let expected = dcf.queue.head().map(|h| (h.receiver(), h.uid));
                if dcf.phase == Phase::AwaitCts && expected == Some((f.transmitter(), f.uid)) {
                    if let Some(h) = dcf.timeout.take() {
                        self.sched.cancel(h);
                    }
                    dcf.phase = Phase::SendData;
                    let mut data = dcf.queue.head().expect("checked").clone();
                    let hs = Handshake::for_frame(&self.cfg.radio, &data);
                    data.duration = hs.data_duration(sifs);
                    self.sched.schedule_in(sifs, Event::MacRespond { node, frame: Box::new(data) });
                }
            }
            FrameKind::Ack => {
                let expected = dcf.queue.head().map(|h| (h.receiver(), h.uid));
                if dcf.phase == Phase::AwaitAck && expected == Some((f.transmitter(), f.uid)) {
                    if let Some(h) = dcf.timeout.take() {
                        self.sched.cancel(h);
                    }
                    let cfg = self.cfg.mac.clone();
                    dcf.retry.on_success(&cfg);
                    let done = dcf.queue.pop().expect("checked");
                    self.record(node, TraceKind::MacOk, &done);
                    self.next_frame(node);
                }
            }
            FrameKind::ArpRequest | FrameKind::ArpReply | FrameKind::Data => {
                if rx.is_broadcast() {
                    self.relay_input(node, f);
                    return;
                }
                if !dcf.responding && dcf.transmitting.is_none() {
                    dcf.responding = true;
                    let ack = Frame::control(FrameKind::Ack, me, f.transmitter(), f.uid, SimTime::ZERO).expect("unicast");
                    self.sched.schedule_in(sifs, Event::MacRespond { node, frame: Box::new(ack) });
                }
                if !dcf.is_duplicate(f.transmitter(), f.uid) {
                    self.relay_input(node, f);
                }
            }
        }
    }
}
