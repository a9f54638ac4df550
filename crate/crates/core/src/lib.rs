//! Discrete-event simulation of wARP-Path bridging over an 802.11 DCF ad hoc
//! network, with a wired ARP-Path baseline.

pub mod engine;
pub mod frame;
pub mod mac;
pub mod metrics;
pub mod network;
pub mod phy;
pub mod relay;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod trace;
pub mod wired;

pub use network::{ChannelMode, Network, NetworkConfig};
pub use scenario::{ScenarioConfig, Traffic};
pub use time::SimTime;
