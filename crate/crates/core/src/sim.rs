//! End-to-end scenario runs.

use crate::engine::RngStreams;
use crate::mac::MacConfig;
use crate::metrics::{SessionRow, SummaryTable, TraceRecord};
use crate::network::{Network, NetworkConfig, NetworkError};
use crate::scenario::{generate_sessions, place_nodes, Position, ScenarioConfig, Session};
use crate::time::SimTime;
use crate::trace::Trace;

/// Interval width used for interval delays and the summary.
pub const INTERVAL: SimTime = SimTime::from_secs(1);

pub fn network_config_for(cfg: &ScenarioConfig) -> NetworkConfig {
    let profile = cfg.traffic.profile();
    NetworkConfig {
        mac: MacConfig { cw_min: profile.cw_min, max_jitter: cfg.max_jitter, ..MacConfig::default() },
        ..NetworkConfig::default()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub positions: Vec<Position>,
    pub sessions: Vec<Session>,
    pub records: Vec<TraceRecord>,
    pub session_rows: Vec<SessionRow>,
    pub summary: SummaryTable,
    pub events: u64,
}

/// Places nodes, draws sessions, and runs the network to `sim_end`.
pub fn run_scenario(cfg: &ScenarioConfig, trace: Trace) -> Result<(RunResult, Trace), NetworkError> {
    let mut rng = RngStreams::new(cfg.seed);
    let positions = place_nodes(cfg, &mut rng.placement);
    let sessions = generate_sessions(cfg, &mut rng.traffic);
    let mut net = Network::new(&positions, network_config_for(cfg), cfg.seed, trace)?;
    for s in &sessions {
        net.add_session(s.clone());
    }
    net.run_until(cfg.sim_end);
    let session_rows = net.session_rows(cfg.sim_end);
    let events = net.events_executed();
    let (metrics, trace) = net.into_parts();
    let records = metrics.records().to_vec();
    let summary = SummaryTable::compute(&records, cfg.sim_end, INTERVAL);
    Ok((RunResult { positions, sessions, records, session_rows, summary, events }, trace))
}
