//! MAC addresses, the four-address frame, and per-hop address rewriting.
//!
//! Logical addresses (`source`, `destination`) are fixed end to end.
//! Physical addresses (`transmitter`, `receiver`) name the current hop.

use std::fmt;
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::time::SimTime;

/// Header plus FCS for data and ARP frames, in bytes.
pub const DATA_HEADER_LEN: u32 = 34;
pub const RTS_LEN: u32 = 20;
pub const CTS_LEN: u32 = 14;
pub const ACK_LEN: u32 = 14;
/// ARP payload for IPv4 over a 48-bit hardware address.
pub const ARP_PAYLOAD_LEN: u32 = 28;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("broadcast address used as {0}")]
    BroadcastSender(&'static str),
    #[error("node {node} asked to forward its own frame (uid {uid})")]
    ForwardingOwnFrame { node: MacAddress, uid: u64 },
    #[error("frame for {destination} decapsulated at {node}")]
    NotAddressedToMe { node: MacAddress, destination: MacAddress },
}

/// 48-bit IEEE MAC address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddress(u64);

impl MacAddress {
    pub const BROADCAST: MacAddress = MacAddress(0xffff_ffff_ffff);

    const NODE_BASE: u64 = 0x0200_0000_0000;

    pub fn new(value: u64) -> Self {
        MacAddress(value & 0xffff_ffff_ffff)
    }

    /// Locally administered address for simulator node `index`.
    pub fn for_node(index: usize) -> Self {
        MacAddress(Self::NODE_BASE | (index as u64 + 1))
    }

    /// Inverse of [`MacAddress::for_node`].
    pub fn node_index(self) -> Option<usize> {
        if self.0 & !0xff_ffff == Self::NODE_BASE && self.0 & 0xff_ffff != 0 {
            Some((self.0 & 0xff_ffff) as usize - 1)
        } else {
            None
        }
    }

    pub fn is_broadcast(self) -> bool {
        self == Self::BROADCAST
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[2], b[3], b[4], b[5], b[6], b[7]
        )
    }
}

impl fmt::Debug for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Protocol (IPv4) address of simulator node `index`.
pub fn ip_for_node(index: usize) -> Ipv4Addr {
    Ipv4Addr::from(0x0a00_0000u32 | (index as u32 + 1))
}

pub fn node_for_ip(ip: Ipv4Addr) -> Option<usize> {
    let v = u32::from(ip);
    (v & 0xff00_0000 == 0x0a00_0000 && v & 0x00ff_ffff != 0).then(|| (v & 0x00ff_ffff) as usize - 1)
}

/// The four 802.11 address fields as used for relaying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AddressBlock {
    receiver: MacAddress,
    transmitter: MacAddress,
    destination: MacAddress,
    source: MacAddress,
}

impl AddressBlock {
    pub fn new(
        receiver: MacAddress,
        transmitter: MacAddress,
        destination: MacAddress,
        source: MacAddress,
    ) -> Result<Self, FrameError> {
        if transmitter.is_broadcast() {
            return Err(FrameError::BroadcastSender("transmitter"));
        }
        if source.is_broadcast() {
            return Err(FrameError::BroadcastSender("source"));
        }
        Ok(AddressBlock { receiver, transmitter, destination, source })
    }

    /// Block for a frame leaving its originator toward `receiver`.
    pub fn originate(
        source: MacAddress,
        destination: MacAddress,
        receiver: MacAddress,
    ) -> Result<Self, FrameError> {
        Self::new(receiver, source, destination, source)
    }

    pub fn receiver(&self) -> MacAddress {
        self.receiver
    }
    pub fn transmitter(&self) -> MacAddress {
        self.transmitter
    }
    pub fn destination(&self) -> MacAddress {
        self.destination
    }
    pub fn source(&self) -> MacAddress {
        self.source
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    ArpRequest,
    ArpReply,
    Data,
    Rts,
    Cts,
    Ack,
}

impl FrameKind {
    pub fn is_control(self) -> bool {
        matches!(self, FrameKind::Rts | FrameKind::Cts | FrameKind::Ack)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::ArpRequest => "arp_request",
            FrameKind::ArpReply => "arp_reply",
            FrameKind::Data => "data",
            FrameKind::Rts => "rts",
            FrameKind::Cts => "cts",
            FrameKind::Ack => "ack",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// ARP sender/target protocol addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArpFields {
    pub sender_ip: Ipv4Addr,
    pub target_ip: Ipv4Addr,
}

/// Layer-2 PDU. Modeled structurally; no bit-level encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    addrs: AddressBlock,
    /// Application payload bytes (the ARP body for ARP frames).
    pub payload_len: u32,
    pub header_len: u32,
    /// Identifies the logical packet; preserved across hops and retries.
    pub uid: u64,
    /// Generation time at the originating application.
    pub origin_time: SimTime,
    /// NAV value carried in the duration field.
    pub duration: SimTime,
    pub arp: Option<ArpFields>,
}

impl Frame {
    pub fn arp_request(
        src: MacAddress,
        fields: ArpFields,
        uid: u64,
        now: SimTime,
    ) -> Result<Frame, FrameError> {
        Ok(Frame {
            kind: FrameKind::ArpRequest,
            addrs: AddressBlock::originate(src, MacAddress::BROADCAST, MacAddress::BROADCAST)?,
            payload_len: ARP_PAYLOAD_LEN,
            header_len: DATA_HEADER_LEN,
            uid,
            origin_time: now,
            duration: SimTime::ZERO,
            arp: Some(fields),
        })
    }

    pub fn arp_reply(
        src: MacAddress,
        requester: MacAddress,
        next_hop: MacAddress,
        fields: ArpFields,
        uid: u64,
        now: SimTime,
    ) -> Result<Frame, FrameError> {
        Ok(Frame {
            kind: FrameKind::ArpReply,
            addrs: AddressBlock::originate(src, requester, next_hop)?,
            payload_len: ARP_PAYLOAD_LEN,
            header_len: DATA_HEADER_LEN,
            uid,
            origin_time: now,
            duration: SimTime::ZERO,
            arp: Some(fields),
        })
    }

    pub fn data(
        src: MacAddress,
        dst: MacAddress,
        next_hop: MacAddress,
        payload_len: u32,
        uid: u64,
        origin_time: SimTime,
    ) -> Result<Frame, FrameError> {
        Ok(Frame {
            kind: FrameKind::Data,
            addrs: AddressBlock::originate(src, dst, next_hop)?,
            payload_len,
            header_len: DATA_HEADER_LEN,
            uid,
            origin_time,
            duration: SimTime::ZERO,
            arp: None,
        })
    }

    /// RTS, CTS or ACK between two neighbours.
    pub fn control(
        kind: FrameKind,
        transmitter: MacAddress,
        receiver: MacAddress,
        uid: u64,
        duration: SimTime,
    ) -> Result<Frame, FrameError> {
        let header_len = match kind {
            FrameKind::Rts => RTS_LEN,
            FrameKind::Cts => CTS_LEN,
            FrameKind::Ack => ACK_LEN,
            _ => unreachable!("not a control frame: {kind}"),
        };
        Ok(Frame {
            kind,
            addrs: AddressBlock::new(receiver, transmitter, receiver, transmitter)?,
            payload_len: 0,
            header_len,
            uid,
            origin_time: SimTime::ZERO,
            duration,
            arp: None,
        })
    }

    pub fn addrs(&self) -> &AddressBlock {
        &self.addrs
    }

    pub fn source(&self) -> MacAddress {
        self.addrs.source
    }
    pub fn destination(&self) -> MacAddress {
        self.addrs.destination
    }
    pub fn transmitter(&self) -> MacAddress {
        self.addrs.transmitter
    }
    pub fn receiver(&self) -> MacAddress {
        self.addrs.receiver
    }

    /// Bytes on air: header plus payload.
    pub fn total_len(&self) -> u32 {
        self.header_len + self.payload_len
    }

    /// Copy of this frame for the next hop. Logical addresses and uid are kept.
    pub fn rewrite_for_hop(
        &self,
        new_transmitter: MacAddress,
        new_receiver: MacAddress,
    ) -> Result<Frame, FrameError> {
        if new_transmitter == self.addrs.source {
            return Err(FrameError::ForwardingOwnFrame { node: new_transmitter, uid: self.uid });
        }
        let addrs = AddressBlock::new(
            new_receiver,
            new_transmitter,
            self.addrs.destination,
            self.addrs.source,
        )?;
        Ok(Frame { addrs, ..self.clone() })
    }

    /// Moves the logical addresses into the physical fields so the upper
    /// layer sees the originator as the sender.
    pub fn decapsulate_for_upper(&self, node: MacAddress) -> Result<Frame, FrameError> {
        let dst = self.addrs.destination;
        if dst != node && !dst.is_broadcast() {
            return Err(FrameError::NotAddressedToMe { node, destination: dst });
        }
        let addrs = AddressBlock { receiver: dst, transmitter: self.addrs.source, ..self.addrs };
        Ok(Frame { addrs, ..self.clone() })
    }
}
