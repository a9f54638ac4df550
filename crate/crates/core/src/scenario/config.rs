use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Traffic {
    SData,
    Voice,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficProfile {
    pub packet_size: u32,
    pub send_interval: SimTime,
    /// Mean of the geometric session length, in packets.
    pub mean_session_packets: f64,
    /// Contention window floor used network-wide for this traffic type.
    pub cw_min: u32,
}

impl TrafficProfile {
    /// Offered load of one active session in bits per second.
    pub fn rate_bps(&self) -> f64 {
        self.packet_size as f64 * 8.0 / self.send_interval.as_secs_f64()
    }
}

impl Traffic {
    pub fn profile(self) -> TrafficProfile {
        let send_interval = SimTime::from_millis(20);
        // mean session duration is 900 s (S_DATA) / 600 s (VOICE) of 20 ms packets
        match self {
            Traffic::SData => TrafficProfile {
                packet_size: 64,
                send_interval,
                mean_session_packets: 900.0 / 0.02,
                cw_min: 15,
            },
            Traffic::Voice => TrafficProfile {
                packet_size: 160,
                send_interval,
                mean_session_packets: 600.0 / 0.02,
                cw_min: 20,
            },
        }
    }
}

impl FromStr for Traffic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "s_data" | "sdata" => Ok(Traffic::SData),
            "voice" => Ok(Traffic::Voice),
            _ => Err(format!("unknown traffic type `{s}`")),
        }
    }
}

impl fmt::Display for Traffic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Traffic::SData => "s_data",
            Traffic::Voice => "voice",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub node_count: usize,
    pub area_width: f64,
    pub area_height: f64,
    pub session_count: usize,
    pub first_session_at: SimTime,
    pub session_spacing: SimTime,
    pub traffic: Traffic,
    pub sim_end: SimTime,
    pub seed: u64,
    pub max_jitter: SimTime,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            node_count: 50,
            area_width: 1500.0,
            area_height: 1500.0,
            session_count: 10,
            first_session_at: SimTime::from_millis(200),
            session_spacing: SimTime::from_secs(10),
            traffic: Traffic::SData,
            sim_end: SimTime::from_secs(600),
            seed: 1,
            max_jitter: SimTime::from_millis(5),
        }
    }
}

pub const SCENARIO_KEYS: &[&str] = &[
    "node_count",
    "area_width",
    "area_height",
    "session_count",
    "first_session_at",
    "session_spacing",
    "traffic",
    "sim_end",
    "seed",
    "max_jitter",
];

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.node_count < 2 {
            return Err(ConfigError::Invalid("node_count must be at least 2".into()));
        }
        if !(self.area_width >= 0.0 && self.area_height >= 0.0)
            || !self.area_width.is_finite()
            || !self.area_height.is_finite()
        {
            return Err(ConfigError::Invalid("area must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Parses flat `key = value` text. `#` starts a comment; times are seconds.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue { line: line_no, key: key.to_string(), value: value.to_string() };
            let secs = || -> Result<SimTime, ConfigError> {
                let v: f64 = value.parse().map_err(|_| bad())?;
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(bad());
                }
                Ok(SimTime::from_secs_f64(v))
            };
            match key {
                "node_count" => cfg.node_count = value.parse().map_err(|_| bad())?,
                "area_width" => cfg.area_width = value.parse().map_err(|_| bad())?,
                "area_height" => cfg.area_height = value.parse().map_err(|_| bad())?,
                "session_count" => cfg.session_count = value.parse().map_err(|_| bad())?,
                "first_session_at" => cfg.first_session_at = secs()?,
                "session_spacing" => cfg.session_spacing = secs()?,
                "traffic" => cfg.traffic = value.parse().map_err(|_| bad())?,
                "sim_end" => cfg.sim_end = secs()?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                "max_jitter" => cfg.max_jitter = secs()?,
                _ => return Err(ConfigError::UnknownKey { line: line_no, key: key.to_string() }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inverse of [`ScenarioConfig::parse`].
    pub fn to_kv_string(&self) -> String {
        format!(
            "node_count = {}\narea_width = {}\narea_height = {}\nsession_count = {}\n\
             first_session_at = {}\nsession_spacing = {}\ntraffic = {}\nsim_end = {}\nseed = {}\nmax_jitter = {}\n",
            self.node_count,
            self.area_width,
            self.area_height,
            self.session_count,
            self.first_session_at,
            self.session_spacing,
            self.traffic,
            self.sim_end,
            self.seed,
            self.max_jitter
        )
    }
}
