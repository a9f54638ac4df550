//! Free-space radio channel and SINR-threshold reception.

use std::f64::consts::PI;

use crate::time::SimTime;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub tx_power_mw: f64,
    pub sensitivity_dbm: f64,
    pub energy_detect_dbm: f64,
    pub sinr_threshold_db: f64,
    pub noise_floor_dbm: f64,
    pub carrier_freq_hz: f64,
    pub bit_rate_bps: f64,
    pub bandwidth_hz: f64,
    /// DSSS long preamble + PLCP header.
    pub preamble: SimTime,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            tx_power_mw: 2.0,
            sensitivity_dbm: -85.0,
            energy_detect_dbm: -85.0,
            sinr_threshold_db: 4.0,
            noise_floor_dbm: -110.0,
            carrier_freq_hz: 2.4e9,
            bit_rate_bps: 1e6,
            bandwidth_hz: 2e6,
            preamble: SimTime::from_micros(192),
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), String> {
        let powers = [
            self.tx_power_mw,
            self.sensitivity_dbm,
            self.energy_detect_dbm,
            self.sinr_threshold_db,
            self.noise_floor_dbm,
        ];
        if powers.iter().any(|p| !p.is_finite()) {
            return Err("radio powers must be finite".into());
        }
        if !(self.tx_power_mw > 0.0) {
            return Err("tx_power must be positive".into());
        }
        if !(self.bit_rate_bps > 0.0) || !self.bit_rate_bps.is_finite() {
            return Err("bit_rate must be positive".into());
        }
        if !(self.carrier_freq_hz > 0.0) {
            return Err("carrier frequency must be positive".into());
        }
        Ok(())
    }

    pub fn tx_power_dbm(&self) -> f64 {
        mw_to_dbm(self.tx_power_mw)
    }

    /// Free-space path loss in dB. Distances under 1 m use the 1 m value.
    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(1.0);
        20.0 * d.log10() + 20.0 * self.carrier_freq_hz.log10() + 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10()
    }

    pub fn rx_power_dbm(&self, distance_m: f64) -> f64 {
        self.tx_power_dbm() - self.path_loss_db(distance_m)
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_floor_dbm)
    }

    /// Time on air for `bytes` at the configured bit rate, preamble included.
    pub fn airtime(&self, bytes: u32) -> SimTime {
        let bits = bytes as f64 * 8.0;
        self.preamble + SimTime::from_secs_f64(bits / self.bit_rate_bps)
    }

    pub fn propagation_delay(distance_m: f64) -> SimTime {
        SimTime::from_secs_f64(distance_m / SPEED_OF_LIGHT)
    }
}

/// A signal as seen at one receiver: power and arrival interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub power_mw: f64,
    pub start: SimTime,
    pub end: SimTime,
}

impl Arrival {
    fn overlaps(&self, start: SimTime, end: SimTime) -> bool {
        self.start < end && start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossReason {
    BelowSensitivity,
    Sinr,
    HalfDuplex,
}

impl LossReason {
    pub fn as_str(self) -> &'static str {
        match self {
            LossReason::BelowSensitivity => "below_sensitivity",
            LossReason::Sinr => "sinr",
            LossReason::HalfDuplex => "half_duplex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reception {
    Decoded,
    Lost(LossReason),
}

/// Largest total interferer power present at any instant of `[start, end)`.
pub fn peak_interference_mw(start: SimTime, end: SimTime, interferers: &[Arrival]) -> f64 {
    let mut edges: Vec<(SimTime, bool, f64)> = Vec::with_capacity(interferers.len() * 2);
    for i in interferers.iter().filter(|i| i.overlaps(start, end)) {
        edges.push((i.start.max(start), true, i.power_mw));
        edges.push((i.end.min(end), false, i.power_mw));
    }
    // half-open intervals: an interferer ending exactly when another starts never overlaps it
    edges.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut level, mut peak) = (0.0f64, 0.0f64);
    for (_, rising, p) in edges {
        if rising {
            level += p;
            peak = peak.max(level);
        } else {
            level -= p;
        }
    }
    peak
}

/// Decides whether `signal` decodes at a receiver given every other signal
/// reaching it and the receiver's own transmit intervals.
pub fn reception_outcome(
    cfg: &RadioConfig,
    signal: &Arrival,
    interferers: &[Arrival],
    own_tx: &[(SimTime, SimTime)],
) -> Reception {
    if own_tx.iter().any(|&(s, e)| s < signal.end && signal.start < e) {
        return Reception::Lost(LossReason::HalfDuplex);
    }
    if mw_to_dbm(signal.power_mw) < cfg.sensitivity_dbm {
        return Reception::Lost(LossReason::BelowSensitivity);
    }
    let interference = peak_interference_mw(signal.start, signal.end, interferers);
    let sinr_db = mw_to_dbm(signal.power_mw / (cfg.noise_mw() + interference));
    if sinr_db >= cfg.sinr_threshold_db {
        Reception::Decoded
    } else {
        Reception::Lost(LossReason::Sinr)
    }
}
