//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

mod common;

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{adjacency, ring_edges, ring_positions, ideal_config, network, random_connected, range_oracle, A, B};
use warp_sim::engine::{rng_stream, Stream};
use warp_sim::frame::{Frame, FrameKind, MacAddress};
use warp_sim::mac::{Enqueue, MacConfig};
use warp_sim::metrics::{self, DelayScope, TraceRecord};
use warp_sim::network::NetworkConfig;
use warp_sim::phy::RadioConfig;
use warp_sim::relay::{Learn, Relay, RelayConfig};
use warp_sim::scenario::{Position, ScenarioConfig, Traffic};
use warp_sim::sim::run_scenario;
use warp_sim::time::SimTime;
use warp_sim::trace::{Trace, TraceKind, TraceLevel};
use warp_sim::wired::WiredNetwork;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mac(i: usize) -> MacAddress {
    MacAddress::for_node(i)
}

fn ring_path() -> Outcome {
    let started = Instant::now();
    let mut net = network(&ring_positions(), ideal_config(SimTime::ZERO), 1, Trace::off());
    net.explore(A, B);
    net.run_until(SimTime::from_secs(1));
    let path = net.path(A, B).map_err(|e| e.to_string())?;
    ensure(path == vec![A, 1, 2, 3, 6, B], || format!("path {path:?}"))?;

    let now = net.now();
    let toward_a = [(1, A), (2, 1), (3, 2), (4, 1), (5, 4), (6, 3), (B, 6)];
    for (node, hop) in toward_a {
        let got = net.relay(node).lookup(mac(A), now);
        ensure(got == Some(mac(hop)), || format!("node {node} LT[A] = {got:?}, want {hop}"))?;
    }
    let toward_b = [(A, 1), (1, 2), (2, 3), (3, 6), (6, B)];
    for (node, hop) in toward_b {
        let got = net.relay(node).lookup(mac(B), now);
        ensure(got == Some(mac(hop)), || format!("node {node} LT[B] = {got:?}, want {hop}"))?;
    }
    for node in [4, 5] {
        let got = net.relay(node).lookup(mac(B), now);
        ensure(got.is_none(), || format!("off-path node {node} learned B via {got:?}"))?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"))?;
    Ok(format!("A-1-2-3-6-B, 12 LT entries match, {:.1} ms", elapsed.as_secs_f64() * 1e3))
}

fn wired_wireless_equivalence() -> Outcome {
    let adj = adjacency(8, &ring_edges());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..100 {
        let src = rng.gen_range(0..8);
        let dst = (src + rng.gen_range(1..8)) % 8;

        let mut wired = WiredNetwork::new(&adj, SimTime::from_micros(1), RelayConfig::default())
            .map_err(|e| e.to_string())?;
        wired.explore(src, dst);
        wired.run_until(SimTime::from_secs(1));
        let w = wired.path(src, dst).map_err(|e| format!("wired {src}->{dst}: {e}"))?;

        let mut net = network(&ring_positions(), ideal_config(SimTime::ZERO), trial, Trace::off());
        for (i, a) in adj.iter().enumerate() {
            ensure(net.neighbors(i) == *a, || format!("radio twin adjacency differs at node {i}"))?;
        }
        net.explore(src, dst);
        net.run_until(SimTime::from_secs(1));
        let r = net.path(src, dst).map_err(|e| format!("wireless {src}->{dst}: {e}"))?;
        ensure(w == r, || format!("pair {src}->{dst}: wired {w:?} vs wireless {r:?}"))?;
    }
    Ok("100 pairs, identical hop sequences".into())
}

struct SweepStats {
    topologies: usize,
    loop_violations: usize,
    rebroadcast_violations: usize,
    delivery_violations: usize,
}

fn random_sweep() -> SweepStats {
    let range = range_oracle(&RadioConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut stats = SweepStats { topologies: 0, loop_violations: 0, rebroadcast_violations: 0, delivery_violations: 0 };
    for t in 0..500u64 {
        let n = rng.gen_range(5..=30);
        let pos = random_connected(&mut rng, n, range * 0.98);
        let src = rng.gen_range(0..n);
        let dst = (src + rng.gen_range(1..n)) % n;
        let mut net = network(&pos, ideal_config(SimTime::from_millis(5)), t, Trace::memory(TraceLevel::Full));
        let uid = net.explore(src, dst);
        net.run_until(SimTime::from_secs(3));
        stats.topologies += 1;

        for v in 0..n {
            if v != src && net.relay(v).lookup(mac(src), net.now()).is_some() && net.path(v, src).is_err() {
                stats.loop_violations += 1;
            }
        }
        if net.path(src, dst).is_err() {
            stats.loop_violations += 1;
        }

        let mut sends = vec![0u32; n];
        let mut target_copies = 0;
        let mut replies_at_src = 0;
        for ev in net.trace().events() {
            match ev.event {
                TraceKind::TxStart if ev.kind == FrameKind::ArpRequest && ev.uid == uid => sends[ev.node] += 1,
                TraceKind::RelayDeliver if ev.kind == FrameKind::ArpRequest && ev.uid == uid && ev.node == dst => {
                    target_copies += 1
                }
                TraceKind::ArpResolved if ev.node == src => replies_at_src += 1,
                _ => {}
            }
        }
        stats.rebroadcast_violations += sends.iter().filter(|&&c| c > 1).count();
        if target_copies != 1 || replies_at_src != 1 {
            stats.delivery_violations += 1;
        }
    }
    stats
}

fn loop_freedom(s: &SweepStats) -> Outcome {
    ensure(s.loop_violations == 0, || format!("{} violations in {} topologies", s.loop_violations, s.topologies))?;
    Ok(format!("{} topologies, 0 violations", s.topologies))
}

fn single_delivery(s: &SweepStats) -> Outcome {
    ensure(s.rebroadcast_violations == 0 && s.delivery_violations == 0, || {
        format!("{} repeated rebroadcasts, {} delivery violations", s.rebroadcast_violations, s.delivery_violations)
    })?;
    Ok(format!("{} topologies, 0 violations", s.topologies))
}

fn parameter_boundaries() -> Outcome {
    // LT aging and BT blocking
    let mut relay = Relay::new(mac(1), RelayConfig::default());
    let t0 = SimTime::from_secs(5);
    ensure(relay.learn_or_block(mac(0), mac(2), t0) == Learn::Accepted, || "first lock".into())?;
    let lt_keep = t0 + SimTime::from_secs(120);
    ensure(relay.lookup(mac(0), lt_keep) == Some(mac(2)), || "LT entry gone at 120.000 s".into())?;
    ensure(relay.lookup(mac(0), lt_keep + SimTime::from_millis(1)).is_none(), || "LT entry alive at 120.001 s".into())?;
    let bt_keep = t0 + SimTime::from_secs(1);
    ensure(relay.learn_or_block(mac(0), mac(3), bt_keep) == Learn::Blocked, || "BT lapsed at 1.000 s".into())?;
    ensure(
        relay.learn_or_block(mac(0), mac(3), bt_keep + SimTime::from_millis(1)) == Learn::Accepted,
        || "BT still blocking at 1.001 s".into(),
    )?;

    // ARP: 5 requests 200 ms apart, then the pending packet is dropped
    let far = [Position::new(0.0, 0.0), Position::new(1000.0, 0.0)];
    let mut net = network(&far, NetworkConfig::default(), 1, Trace::memory(TraceLevel::Summary));
    net.send_app_packet(0, 1, 64);
    net.run_until(SimTime::from_secs(3));
    let times = |k: TraceKind| -> Vec<SimTime> {
        net.trace().events().iter().filter(|e| e.event == k && e.node == 0).map(|e| e.time).collect()
    };
    let want: Vec<SimTime> = (0..5).map(|i| SimTime::from_millis(200 * i)).collect();
    ensure(times(TraceKind::ArpRequest) == want, || format!("ARP requests at {:?}", times(TraceKind::ArpRequest)))?;
    ensure(times(TraceKind::DropArpFail) == vec![SimTime::from_secs(1)], || "ARP failure not at 1.0 s".into())?;

    // MAC: 1 + 7 attempts, then drop
    let pair = [Position::new(0.0, 0.0), Position::new(100.0, 0.0)];
    let mut net = network(&pair, NetworkConfig::default(), 1, Trace::memory(TraceLevel::Full));
    let ghost = mac(40);
    let f = Frame::data(mac(0), ghost, ghost, 64, 9_000, SimTime::ZERO).map_err(|e| e.to_string())?;
    net.inject(0, f);
    net.run_until(SimTime::from_secs(2));
    let rts = net
        .trace()
        .events()
        .iter()
        .filter(|e| e.event == TraceKind::TxStart && e.kind == FrameKind::Rts && e.node == 0)
        .count();
    let dropped = net.trace().events().iter().filter(|e| e.event == TraceKind::DropRetryLimit).count();
    ensure(rts == 8 && dropped == 1, || format!("{rts} RTS attempts, {dropped} drops"))?;

    // queue: the 15th frame finds 14 queued and is dropped
    let mut net = network(&pair, NetworkConfig::default(), 1, Trace::off());
    let mut results = Vec::new();
    for uid in 0..15 {
        let f = Frame::data(mac(0), mac(1), mac(1), 64, 100 + uid, SimTime::ZERO).map_err(|e| e.to_string())?;
        results.push(net.inject(0, f));
    }
    ensure(
        results[..14].iter().all(|r| *r == Enqueue::Queued) && results[14] == Enqueue::DroppedQueueFull,
        || format!("queue results {results:?}"),
    )?;

    // broadcast jitter in [0, 5 ms)
    let cfg = MacConfig::default();
    let mut rng = rng_stream(7, Stream::Jitter);
    let max = SimTime::from_millis(5);
    let samples: Vec<SimTime> = (0..100_000).map(|_| cfg.broadcast_delay(&mut rng)).collect();
    ensure(samples.iter().all(|&j| j < max), || "jitter reached 5 ms".into())?;
    let hi = samples.iter().max().copied().unwrap_or(SimTime::ZERO);
    ensure(hi > SimTime::from_micros(4_990), || format!("jitter never came near 5 ms (max {hi})"))?;
    Ok("LT 120 s, BT 1 s, ARP 5x200 ms, 8 MAC attempts, queue 14, jitter [0, 5 ms)".into())
}

fn rec(uid: u64, size: u32, gen_ms: u64, delay_ms: Option<u64>) -> TraceRecord {
    let g = SimTime::from_millis(gen_ms);
    TraceRecord {
        uid,
        size,
        generated_at: g,
        delivered_at: delay_ms.map(|d| g + SimTime::from_millis(d)),
        source: 0,
        destination: 1,
        session: 1,
    }
}

fn close(got: f64, want: f64) -> bool {
    ((got - want) / want).abs() <= 1e-9
}

fn metric_formulas() -> Outcome {
    // packet i: generated at 100 i ms, 100 B if even else 200 B, delay (i+1) ms; 8 and 9 are lost
    let records: Vec<TraceRecord> = (0..10u64)
        .map(|i| rec(i, if i % 2 == 0 { 100 } else { 200 }, 100 * i, (i < 8).then_some(i + 1)))
        .collect();
    let checks: [(&str, Option<f64>, f64); 9] = [
        ("goodput(10 s)", Some(metrics::goodput_ratio(&records, SimTime::from_secs(10))), 80.0),
        ("goodput(0.35 s)", Some(metrics::goodput_ratio(&records, SimTime::from_millis(350))), 100.0),
        (
            "goodput(0.3035 s)",
            Some(metrics::goodput_ratio(&records, SimTime::from_micros(303_500))),
            200.0 / 3.0,
        ),
        ("delay(10 s)", metrics::avg_e2e_delay(&records, SimTime::from_secs(10), DelayScope::AllHosts), 0.0045),
        ("delay(0.25 s)", metrics::avg_e2e_delay(&records, SimTime::from_millis(250), DelayScope::AllHosts), 0.002),
        ("interval[0, 0.25)", metrics::interval_delay(&records, SimTime::from_millis(100), SimTime::from_millis(250)), 0.002),
        ("interval[0.25, 0.5)", metrics::interval_delay(&records, SimTime::from_millis(300), SimTime::from_millis(250)), 0.0045),
        ("interval[0.5, 0.75)", metrics::interval_delay(&records, SimTime::from_millis(700), SimTime::from_millis(250)), 0.007),
        ("delay(0.5 s)", metrics::avg_e2e_delay(&records, SimTime::from_millis(500), DelayScope::AllHosts), 0.003),
    ];
    for (name, got, want) in checks {
        let got = got.ok_or_else(|| format!("{name} absent"))?;
        ensure(close(got, want), || format!("{name} = {got}, want {want}"))?;
    }
    let none = metrics::interval_delay(&records, SimTime::from_millis(800), SimTime::from_millis(250));
    ensure(none.is_none(), || "empty interval should be absent".into())?;
    Ok("10-packet trace, 9 values within 1e-9".into())
}

struct SeedRun {
    goodput: f64,
    delay: Option<f64>,
    g5: f64,
    g50: f64,
    pathless: bool,
}

fn full_scale() -> Vec<Outcome> {
    const SEEDS: u64 = 20;
    let mut by_traffic = Vec::new();
    for traffic in [Traffic::SData, Traffic::Voice] {
        let runs: Vec<SeedRun> = (1..=SEEDS)
            .map(|seed| {
                let cfg = ScenarioConfig { seed, traffic, ..ScenarioConfig::default() };
                let (res, _) = run_scenario(&cfg, Trace::off()).expect("default scenario is valid");
                SeedRun {
                    goodput: res.summary.goodput_percent,
                    delay: res.summary.avg_delay,
                    g5: metrics::goodput_ratio(&res.records, SimTime::from_secs(5)),
                    g50: metrics::goodput_ratio(&res.records, SimTime::from_secs(50)),
                    pathless: res.session_rows.iter().any(|r| r.start <= cfg.sim_end && r.arp_replies == 0),
                }
            })
            .collect();
        by_traffic.push(runs);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let goodput = |runs: &[SeedRun]| mean(&runs.iter().map(|r| r.goodput).collect::<Vec<_>>());
    let (sdata, voice) = (&by_traffic[0], &by_traffic[1]);
    let (gs, gv) = (goodput(sdata), goodput(voice));

    let a = if (20.0..=60.0).contains(&gs) && gv < gs {
        Ok(format!("goodput S_DATA {gs:.2}%, VOICE {gv:.2}% over {SEEDS} seeds each"))
    } else {
        Err(format!("goodput S_DATA {gs:.2}%, VOICE {gv:.2}%"))
    };

    let mut delays = Vec::new();
    for (name, runs) in [("S_DATA", sdata), ("VOICE", voice)] {
        let d: Vec<f64> = runs.iter().filter_map(|r| r.delay).collect();
        delays.push((name, if d.is_empty() { f64::NAN } else { mean(&d) }));
    }
    let b = if delays.iter().all(|(_, d)| (0.005..=0.5).contains(d)) {
        Ok(format!("avg delay S_DATA {:.4} s, VOICE {:.4} s", delays[0].1, delays[1].1))
    } else {
        Err(format!("avg delay S_DATA {:.4} s, VOICE {:.4} s", delays[0].1, delays[1].1))
    };

    let mut c_ok = true;
    let mut notes = Vec::new();
    for (name, runs) in [("S_DATA", sdata), ("VOICE", voice)] {
        let g5 = mean(&runs.iter().map(|r| r.g5).collect::<Vec<_>>());
        let g50 = mean(&runs.iter().map(|r| r.g50).collect::<Vec<_>>());
        let pathless = runs.iter().filter(|r| r.pathless).count() as f64 / runs.len() as f64;
        c_ok &= g50 > g5 && pathless >= 0.10;
        notes.push(format!("{name} g(5)={g5:.2}% g(50)={g50:.2}% pathless-seed share {:.0}%", pathless * 100.0));
    }
    let c = if c_ok { Ok(notes.join("; ")) } else { Err(notes.join("; ")) };
    vec![a, b, c]
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = dir.path().join("scenario.txt");
    fs::write(&scenario, "node_count = 30\narea_width = 1000\narea_height = 1000\nsim_end = 40\nseed = 11\n")
        .map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_warp-sim");
    let mut outs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(bin)
            .arg("simulate")
            .arg(&scenario)
            .args(["--trace", "full", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || format!("run {k} failed: {}", String::from_utf8_lossy(&status.stderr)))?;
        outs.push(out);
    }
    let files = ["trace.csv", "goodput.csv", "delay_cum.csv", "delay_interval.csv", "delay_per_host.csv", "summary.csv", "sessions.csv"];
    let mut bytes = 0;
    for name in files {
        let a = fs::read(outs[0].join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = fs::read(outs[1].join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(a == b, || format!("{name} differs"))?;
        bytes += a.len();
    }
    ensure(bytes > 10_000, || "outputs suspiciously small".into())?;
    Ok(format!("{} files, {bytes} bytes identical", files.len()))
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wants = |id: &str| filter.is_empty() || filter.iter().any(|f| id.contains(f.as_str()));
    let mut failed = 0;
    let mut report = |id: &str, name: &str, outcome: Outcome| {
        match &outcome {
            Ok(msg) => println!("criterion {id}: PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id}: FAIL  {name}: {msg}");
            }
        }
    };
    if wants("1") {
        report("1", "ring oracle path", ring_path());
    }
    if wants("2") {
        report("2", "wired/wireless equivalence", wired_wireless_equivalence());
    }
    if wants("3") || wants("4") {
        let sweep = random_sweep();
        report("3", "loop freedom", loop_freedom(&sweep));
        report("4", "duplicate suppression and single delivery", single_delivery(&sweep));
    }
    if wants("5") {
        report("5", "parameter boundaries", parameter_boundaries());
    }
    if wants("6") {
        report("6", "metric formulas", metric_formulas());
    }
    if wants("7") {
        let mut parts = full_scale().into_iter();
        for (sub, name) in [("7a", "goodput anchors"), ("7b", "delay anchors"), ("7c", "goodput curve shape")] {
            report(sub, name, parts.next().expect("three parts"));
        }
    }
    if wants("8") {
        report("8", "determinism", determinism());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
