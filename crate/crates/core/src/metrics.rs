//! Goodput and end-to-end delay over per-packet generation/delivery records,
//! plus CSV export of the series and summary tables.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub uid: u64,
    pub size: u32,
    pub generated_at: SimTime,
    pub delivered_at: Option<SimTime>,
    pub source: usize,
    pub destination: usize,
    pub session: usize,
}

impl TraceRecord {
    /// End-to-end delay if delivered by `t`.
    fn delay_by(&self, t: SimTime) -> Option<SimTime> {
        self.delivered_at.filter(|&r| r <= t).map(|r| r - self.generated_at)
    }
}

/// Accumulates records as the simulation runs.
#[derive(Debug, Default, Clone)]
pub struct MetricsLog {
    records: Vec<TraceRecord>,
    by_uid: HashMap<u64, usize>,
}

impl MetricsLog {
    pub fn generated(&mut self, rec: TraceRecord) {
        debug_assert!(rec.delivered_at.is_none());
        self.by_uid.insert(rec.uid, self.records.len());
        self.records.push(rec);
    }

    /// Marks `uid` delivered. Returns false for unknown or repeated deliveries.
    pub fn delivered(&mut self, uid: u64, at: SimTime) -> bool {
        let Some(&i) = self.by_uid.get(&uid) else { return false };
        let rec = &mut self.records[i];
        if rec.delivered_at.is_some() {
            return false;
        }
        debug_assert!(at >= rec.generated_at);
        rec.delivered_at = Some(at);
        true
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayScope {
    AllHosts,
    Host(usize),
}

fn mean_secs(sum_ns: u128, n: u64) -> Option<f64> {
    (n > 0).then(|| sum_ns as f64 / n as f64 / 1e9)
}

/// Percentage of generated bytes delivered, both counted up to `t`.
pub fn goodput_ratio(records: &[TraceRecord], t: SimTime) -> f64 {
    let mut generated = 0u64;
    let mut delivered = 0u64;
    for r in records {
        if r.generated_at <= t {
            generated += r.size as u64;
        }
        if r.delivered_at.is_some_and(|d| d <= t) {
            delivered += r.size as u64;
        }
    }
    if generated == 0 {
        0.0
    } else {
        100.0 * delivered as f64 / generated as f64
    }
}

/// Mean end-to-end delay in seconds over deliveries up to `t`.
pub fn avg_e2e_delay(records: &[TraceRecord], t: SimTime, scope: DelayScope) -> Option<f64> {
    let (mut sum, mut n) = (0u128, 0u64);
    for r in records {
        if let DelayScope::Host(h) = scope {
            if r.destination != h {
                continue;
            }
        }
        if let Some(d) = r.delay_by(t) {
            sum += d.as_nanos() as u128;
            n += 1;
        }
    }
    mean_secs(sum, n)
}

/// Mean delay over deliveries inside the `dt`-wide interval containing `t`.
pub fn interval_delay(records: &[TraceRecord], t: SimTime, dt: SimTime) -> Option<f64> {
    assert!(dt > SimTime::ZERO, "interval width must be positive");
    let lo = SimTime::from_nanos(t.as_nanos() / dt.as_nanos() * dt.as_nanos());
    let hi = lo + dt;
    let (mut sum, mut n) = (0u128, 0u64);
    for r in records {
        if let Some(rx) = r.delivered_at {
            if lo <= rx && rx < hi {
                sum += (rx - r.generated_at).as_nanos() as u128;
                n += 1;
            }
        }
    }
    mean_secs(sum, n)
}

/// Goodput sampled at each grid time, computed in one sweep.
pub fn goodput_series(records: &[TraceRecord], grid: &[SimTime]) -> Vec<f64> {
    let mut gen: Vec<(SimTime, u64)> = records.iter().map(|r| (r.generated_at, r.size as u64)).collect();
    let mut del: Vec<(SimTime, u64)> =
        records.iter().filter_map(|r| r.delivered_at.map(|d| (d, r.size as u64))).collect();
    gen.sort_unstable();
    del.sort_unstable();
    let (mut gi, mut di, mut g, mut d) = (0, 0, 0u64, 0u64);
    grid.iter()
        .map(|&t| {
            while gi < gen.len() && gen[gi].0 <= t {
                g += gen[gi].1;
                gi += 1;
            }
            while di < del.len() && del[di].0 <= t {
                d += del[di].1;
                di += 1;
            }
            if g == 0 {
                0.0
            } else {
                100.0 * d as f64 / g as f64
            }
        })
        .collect()
}

/// Cumulative mean delay at each grid time (None before the first delivery).
pub fn cumulative_delay_series(records: &[TraceRecord], grid: &[SimTime], scope: DelayScope) -> Vec<Option<f64>> {
    let mut del: Vec<(SimTime, u64)> = records
        .iter()
        .filter(|r| match scope {
            DelayScope::AllHosts => true,
            DelayScope::Host(h) => r.destination == h,
        })
        .filter_map(|r| r.delivered_at.map(|d| (d, (d - r.generated_at).as_nanos())))
        .collect();
    del.sort_unstable();
    let (mut i, mut sum, mut n) = (0, 0u128, 0u64);
    grid.iter()
        .map(|&t| {
            while i < del.len() && del[i].0 <= t {
                sum += del[i].1 as u128;
                n += 1;
                i += 1;
            }
            mean_secs(sum, n)
        })
        .collect()
}

/// Non-empty intervals as `(interval_start, mean_delay, count)` in time order.
pub fn interval_delay_series(records: &[TraceRecord], dt: SimTime) -> Vec<(SimTime, f64, u64)> {
    assert!(dt > SimTime::ZERO, "interval width must be positive");
    let mut buckets: BTreeMap<u64, (u128, u64)> = BTreeMap::new();
    for r in records {
        if let Some(rx) = r.delivered_at {
            let b = buckets.entry(rx.as_nanos() / dt.as_nanos()).or_default();
            b.0 += (rx - r.generated_at).as_nanos() as u128;
            b.1 += 1;
        }
    }
    buckets
        .into_iter()
        .map(|(k, (sum, n))| (dt.mul(k), mean_secs(sum, n).expect("non-empty"), n))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub goodput_percent: f64,
    pub avg_delay: Option<f64>,
    pub last_interval_delay: Option<f64>,
    pub sent_bytes: u64,
    pub sent_packets: u64,
    pub received_bytes: u64,
    pub received_packets: u64,
}

impl SummaryTable {
    /// Results at `sim_end`; the last interval is the final complete `dt`
    /// before it.
    pub fn compute(records: &[TraceRecord], sim_end: SimTime, dt: SimTime) -> Self {
        let mut s = SummaryTable {
            goodput_percent: goodput_ratio(records, sim_end),
            avg_delay: avg_e2e_delay(records, sim_end, DelayScope::AllHosts),
            last_interval_delay: sim_end.checked_sub(dt).and_then(|t| interval_delay(records, t, dt)),
            sent_bytes: 0,
            sent_packets: 0,
            received_bytes: 0,
            received_packets: 0,
        };
        for r in records.iter().filter(|r| r.generated_at <= sim_end) {
            s.sent_bytes += r.size as u64;
            s.sent_packets += 1;
            if r.delay_by(sim_end).is_some() {
                s.received_bytes += r.size as u64;
                s.received_packets += 1;
            }
        }
        s
    }
}

/// One row of `sessions.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRow {
    pub index: usize,
    pub source: usize,
    pub destination: usize,
    /// Full session volume, including packets past the end of the run.
    pub bytes: u64,
    pub start: SimTime,
    pub end: SimTime,
    pub arp_requests: u64,
    pub arp_replies: u64,
    pub sent_bytes: u64,
    pub received_bytes: u64,
}

impl SessionRow {
    pub fn path_discovered(&self) -> bool {
        self.arp_replies > 0
    }
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

/// Writes the goodput, delay, summary and session CSVs into `out_dir`.
pub fn export(
    out_dir: &Path,
    records: &[TraceRecord],
    sessions: &[SessionRow],
    sim_end: SimTime,
    dt: SimTime,
) -> io::Result<()> {
    fs::create_dir_all(out_dir)?;
    let step = SimTime::from_secs(1);
    let grid: Vec<SimTime> = if records.is_empty() {
        Vec::new()
    } else {
        (1..=sim_end.as_nanos() / step.as_nanos()).map(|k| step.mul(k)).collect()
    };

    let mut w = create(out_dir, "goodput.csv")?;
    writeln!(w, "time,goodput_percent")?;
    for (t, g) in grid.iter().zip(goodput_series(records, &grid)) {
        writeln!(w, "{t},{g}")?;
    }
    w.flush()?;

    let mut w = create(out_dir, "delay_cum.csv")?;
    writeln!(w, "time,avg_delay")?;
    for (t, d) in grid.iter().zip(cumulative_delay_series(records, &grid, DelayScope::AllHosts)) {
        if let Some(d) = d {
            writeln!(w, "{t},{d}")?;
        }
    }
    w.flush()?;

    let mut w = create(out_dir, "delay_interval.csv")?;
    writeln!(w, "interval_start,avg_delay,packets")?;
    for (start, d, n) in interval_delay_series(records, dt) {
        writeln!(w, "{start},{d},{n}")?;
    }
    w.flush()?;

    let mut hosts: Vec<usize> = records.iter().filter(|r| r.delivered_at.is_some()).map(|r| r.destination).collect();
    hosts.sort_unstable();
    hosts.dedup();
    let mut w = create(out_dir, "delay_per_host.csv")?;
    writeln!(w, "time,host,avg_delay")?;
    let per_host: Vec<Vec<Option<f64>>> = hosts
        .iter()
        .map(|&h| cumulative_delay_series(records, &grid, DelayScope::Host(h)))
        .collect();
    for (gi, t) in grid.iter().enumerate() {
        for (hi, h) in hosts.iter().enumerate() {
            if let Some(d) = per_host[hi][gi] {
                writeln!(w, "{t},{h},{d}")?;
            }
        }
    }
    w.flush()?;

    let s = SummaryTable::compute(records, sim_end, dt);
    let mut w = create(out_dir, "summary.csv")?;
    writeln!(w, "metric,value")?;
    writeln!(w, "goodput_ratio_percent,{}", s.goodput_percent)?;
    writeln!(w, "avg_e2e_delay,{}", s.avg_delay.unwrap_or(0.0))?;
    writeln!(w, "avg_e2e_delay_last_interval,{}", s.last_interval_delay.unwrap_or(0.0))?;
    writeln!(w, "total_sent_bytes,{}", s.sent_bytes)?;
    writeln!(w, "total_sent_packets,{}", s.sent_packets)?;
    writeln!(w, "total_received_bytes,{}", s.received_bytes)?;
    writeln!(w, "total_received_packets,{}", s.received_packets)?;
    w.flush()?;

    let mut w = create(out_dir, "sessions.csv")?;
    writeln!(
        w,
        "session,source,destination,bytes,start,end,arp_requests,arp_replies,path_discovered,sent_bytes,received_bytes"
    )?;
    for r in sessions {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.source,
            r.destination,
            r.bytes,
            r.start,
            r.end,
            r.arp_requests,
            r.arp_replies,
            r.path_discovered(),
            r.sent_bytes,
            r.received_bytes
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(uid: u64, gen_ms: u64, rx_ms: Option<u64>, dst: usize) -> TraceRecord {
        TraceRecord {
            uid,
            size: 64,
            generated_at: SimTime::from_millis(gen_ms),
            delivered_at: rx_ms.map(SimTime::from_millis),
            source: 0,
            destination: dst,
            session: 1,
        }
    }

    #[test]
    fn full_delivery_is_hundred_percent() {
        let r = vec![rec(1, 0, Some(5), 1), rec(2, 20, Some(25), 1)];
        assert_eq!(goodput_ratio(&r, SimTime::from_secs(1)), 100.0);
        assert_eq!(goodput_ratio(&[], SimTime::from_secs(1)), 0.0);
    }

    #[test]
    fn single_packet_delay() {
        let r = vec![rec(1, 0, Some(5), 1)];
        assert_eq!(avg_e2e_delay(&r, SimTime::from_secs(1), DelayScope::AllHosts), Some(0.005));
        assert_eq!(avg_e2e_delay(&r, SimTime::from_millis(4), DelayScope::AllHosts), None);
    }

    #[test]
    fn host_scope_degenerates_to_all() {
        let r = vec![rec(1, 0, Some(5), 3), rec(2, 20, Some(29), 3)];
        let t = SimTime::from_secs(1);
        assert_eq!(avg_e2e_delay(&r, t, DelayScope::Host(3)), avg_e2e_delay(&r, t, DelayScope::AllHosts));
        assert_eq!(avg_e2e_delay(&r, t, DelayScope::Host(4)), None);
    }

    #[test]
    fn two_intervals_versus_cumulative() {
        let r = vec![rec(1, 100, Some(101), 1), rec(2, 1100, Some(1103), 1)];
        let dt = SimTime::from_secs(1);
        let series: Vec<f64> = interval_delay_series(&r, dt).iter().map(|x| x.1).collect();
        assert_eq!(series, vec![0.001, 0.003]);
        assert_eq!(interval_delay(&r, SimTime::from_millis(1500), dt), Some(0.003));
        assert_eq!(avg_e2e_delay(&r, SimTime::from_secs(2), DelayScope::AllHosts), Some(0.002));
    }

    #[test]
    fn log_delivers_once() {
        let mut log = MetricsLog::default();
        log.generated(rec(7, 0, None, 1));
        assert!(log.delivered(7, SimTime::from_millis(3)));
        assert!(!log.delivered(7, SimTime::from_millis(4)));
        assert!(!log.delivered(8, SimTime::from_millis(4)));
        assert_eq!(log.records()[0].delivered_at, Some(SimTime::from_millis(3)));
    }

    #[test]
    fn series_agree_with_pointwise() {
        let r: Vec<_> = (0..50)
            .map(|i| rec(i, i * 37, (i % 3 != 0).then_some(i * 37 + 5 + i % 7), (i % 4) as usize))
            .collect();
        let grid: Vec<SimTime> = (0..5).map(|k| SimTime::from_millis(k * 400)).collect();
        let g = goodput_series(&r, &grid);
        let c = cumulative_delay_series(&r, &grid, DelayScope::AllHosts);
        let h = cumulative_delay_series(&r, &grid, DelayScope::Host(2));
        for (i, &t) in grid.iter().enumerate() {
            assert_eq!(g[i], goodput_ratio(&r, t));
            assert_eq!(c[i], avg_e2e_delay(&r, t, DelayScope::AllHosts));
            assert_eq!(h[i], avg_e2e_delay(&r, t, DelayScope::Host(2)));
        }
    }
}
