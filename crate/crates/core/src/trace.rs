//! Per-frame event stream in the canonical CSV form
//! `time,node,event,kind,uid,src,dst,tx,rx,bytes`.

use std::fmt;
use std::io::{self, Write};

use crate::frame::{Frame, FrameKind, MacAddress};
use crate::time::SimTime;

pub const TRACE_HEADER: &str = "time,node,event,kind,uid,src,dst,tx,rx,bytes";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Generated,
    Delivered,
    Enqueue,
    DropQueueFull,
    DropRetryLimit,
    DropArpFail,
    DropArpSuperseded,
    DropNoRoute,
    TxStart,
    TxEnd,
    RxOk,
    LostBelowSensitivity,
    LostSinr,
    LostHalfDuplex,
    MacOk,
    RelayForward,
    RelayDeliver,
    RelayDiscard,
    ArpRequest,
    ArpReply,
    ArpResolved,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Generated => "generated",
            TraceKind::Delivered => "delivered",
            TraceKind::Enqueue => "enqueue",
            TraceKind::DropQueueFull => "drop_queue_full",
            TraceKind::DropRetryLimit => "drop_retry_limit",
            TraceKind::DropArpFail => "drop_arp_fail",
            TraceKind::DropArpSuperseded => "drop_arp_superseded",
            TraceKind::DropNoRoute => "drop_no_route",
            TraceKind::TxStart => "tx_start",
            TraceKind::TxEnd => "tx_end",
            TraceKind::RxOk => "rx_ok",
            TraceKind::LostBelowSensitivity => "lost_below_sensitivity",
            TraceKind::LostSinr => "lost_sinr",
            TraceKind::LostHalfDuplex => "lost_half_duplex",
            TraceKind::MacOk => "mac_ok",
            TraceKind::RelayForward => "relay_forward",
            TraceKind::RelayDeliver => "relay_deliver",
            TraceKind::RelayDiscard => "relay_discard",
            TraceKind::ArpRequest => "arp_request",
            TraceKind::ArpReply => "arp_reply",
            TraceKind::ArpResolved => "arp_resolved",
        }
    }

    /// Kept in `summary` traces: application, ARP and drop events.
    pub fn is_summary(self) -> bool {
        matches!(
            self,
            TraceKind::Generated
                | TraceKind::Delivered
                | TraceKind::DropQueueFull
                | TraceKind::DropRetryLimit
                | TraceKind::DropArpFail
                | TraceKind::DropArpSuperseded
                | TraceKind::DropNoRoute
                | TraceKind::ArpRequest
                | TraceKind::ArpReply
                | TraceKind::ArpResolved
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: SimTime,
    pub node: usize,
    pub event: TraceKind,
    pub kind: FrameKind,
    pub uid: u64,
    pub src: MacAddress,
    pub dst: MacAddress,
    pub tx: Option<MacAddress>,
    pub rx: Option<MacAddress>,
    pub bytes: u32,
}

impl TraceEvent {
    pub fn for_frame(time: SimTime, node: usize, event: TraceKind, f: &Frame) -> Self {
        TraceEvent {
            time,
            node,
            event,
            kind: f.kind,
            uid: f.uid,
            src: f.source(),
            dst: f.destination(),
            tx: Some(f.transmitter()),
            rx: Some(f.receiver()),
            bytes: f.total_len(),
        }
    }
}

struct Opt(Option<MacAddress>);

impl fmt::Display for Opt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(m) => write!(f, "{m}"),
            None => Ok(()),
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{},{},{}",
            self.time,
            self.node,
            self.event.as_str(),
            self.kind,
            self.uid,
            self.src,
            self.dst,
            Opt(self.tx),
            Opt(self.rx),
            self.bytes
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLevel {
    Off,
    Summary,
    Full,
}

enum Sink {
    Discard,
    Memory(Vec<TraceEvent>),
    Writer(Box<dyn Write + Send>),
}

pub struct Trace {
    level: TraceLevel,
    sink: Sink,
    error: Option<io::Error>,
}

impl Trace {
    pub fn off() -> Self {
        Trace { level: TraceLevel::Off, sink: Sink::Discard, error: None }
    }

    pub fn memory(level: TraceLevel) -> Self {
        Trace { level, sink: Sink::Memory(Vec::new()), error: None }
    }

    /// Streams CSV lines (header first) into `w`.
    pub fn writer(level: TraceLevel, mut w: Box<dyn Write + Send>) -> Self {
        let error = writeln!(w, "{TRACE_HEADER}").err();
        Trace { level, sink: Sink::Writer(w), error }
    }

    pub fn level(&self) -> TraceLevel {
        self.level
    }

    #[inline]
    pub fn wants(&self, kind: TraceKind) -> bool {
        match self.level {
            TraceLevel::Off => false,
            TraceLevel::Summary => kind.is_summary(),
            TraceLevel::Full => true,
        }
    }

    pub fn record(&mut self, ev: TraceEvent) {
        if !self.wants(ev.event) {
            return;
        }
        match &mut self.sink {
            Sink::Discard => {}
            Sink::Memory(v) => v.push(ev),
            Sink::Writer(w) => {
                if self.error.is_none() {
                    self.error = writeln!(w, "{ev}").err();
                }
            }
        }
    }

    pub fn events(&self) -> &[TraceEvent] {
        match &self.sink {
            Sink::Memory(v) => v,
            _ => &[],
        }
    }

    /// Flushes the writer and surfaces the first I/O error seen.
    pub fn finish(&mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        if let Sink::Writer(w) = &mut self.sink {
            w.flush()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_line_shape() {
        let f = Frame::data(
            MacAddress::for_node(0),
            MacAddress::for_node(2),
            MacAddress::for_node(1),
            64,
            17,
            SimTime::ZERO,
        )
        .unwrap();
        let ev = TraceEvent::for_frame(SimTime::from_nanos(1_500_000_001), 0, TraceKind::TxStart, &f);
        assert_eq!(
            ev.to_string(),
            "1.500000001,0,tx_start,data,17,02:00:00:00:00:01,02:00:00:00:00:03,02:00:00:00:00:01,02:00:00:00:00:02,98"
        );
        assert_eq!(ev.to_string().split(',').count(), TRACE_HEADER.split(',').count());
    }

    #[test]
    fn summary_level_filters_channel_events() {
        let mut t = Trace::memory(TraceLevel::Summary);
        let f = Frame::data(MacAddress::for_node(0), MacAddress::for_node(1), MacAddress::for_node(1), 64, 1, SimTime::ZERO)
            .unwrap();
        t.record(TraceEvent::for_frame(SimTime::ZERO, 0, TraceKind::TxStart, &f));
        t.record(TraceEvent::for_frame(SimTime::ZERO, 0, TraceKind::Generated, &f));
        assert_eq!(t.events().len(), 1);
        assert_eq!(t.events()[0].event, TraceKind::Generated);
    }
}
