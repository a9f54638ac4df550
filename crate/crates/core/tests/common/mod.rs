#![allow(dead_code)]

use std::collections::VecDeque;

use rand::Rng;
use warp_sim::network::{ChannelMode, Network, NetworkConfig};
use warp_sim::phy::RadioConfig;
use warp_sim::scenario::Position;
use warp_sim::time::SimTime;
use warp_sim::trace::Trace;

pub const A: usize = 0;
pub const B: usize = 7;

/// Host A, relays 1..=6, host B. Ring 1-2-3-6-5-4-1 with A on 1 and B on 6;
/// linked pairs are 200 m apart, every other pair is more than 300 m apart.
pub fn ring_positions() -> Vec<Position> {
    [
        (-200.0, 0.0),
        (0.0, 0.0),
        (120.0, 160.0),
        (320.0, 160.0),
        (120.0, -160.0),
        (320.0, -160.0),
        (440.0, 0.0),
        (640.0, 0.0),
    ]
    .iter()
    .map(|&(x, y)| Position::new(x, y))
    .collect()
}

pub fn ring_edges() -> Vec<(usize, usize)> {
    vec![(0, 1), (1, 2), (2, 3), (3, 6), (1, 4), (4, 5), (5, 6), (6, 7)]
}

pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Radio range found by bisection on the received-power curve, independent
/// of any closed form.
pub fn range_oracle(radio: &RadioConfig) -> f64 {
    let (mut lo, mut hi) = (1.0_f64, 100_000.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radio.rx_power_dbm(mid) >= radio.sensitivity_dbm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Unit-disk graph over `positions` with the given range.
pub fn disk_graph(positions: &[Position], range: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && positions[i].distance(&positions[j]) <= range {
                adj[i].push(j);
            }
        }
    }
    adj
}

pub fn is_connected(adj: &[Vec<usize>]) -> bool {
    bfs_parents(adj, 0).iter().enumerate().all(|(i, p)| i == 0 || p.is_some())
}

/// Breadth-first parents from `root`, expanding neighbours in ascending order.
pub fn bfs_parents(adj: &[Vec<usize>], root: usize) -> Vec<Option<usize>> {
    let mut parent = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut q = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = q.pop_front() {
        let mut ns = adj[u].clone();
        ns.sort_unstable();
        for v in ns {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                q.push_back(v);
            }
        }
    }
    parent
}

/// Hop sequence `from .. to` after `from` explores for `to`: the reply walks
/// the tree rooted at `from` back from `to`.
pub fn bfs_path(adj: &[Vec<usize>], from: usize, to: usize) -> Vec<usize> {
    let parent = bfs_parents(adj, from);
    let mut path = vec![to];
    let mut at = to;
    while let Some(p) = parent[at] {
        path.push(p);
        at = p;
    }
    path.reverse();
    path
}

/// Connected random placement of `n` nodes in a square sized so the graph
/// is neither a clique nor hopeless to connect.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, range: f64) -> Vec<Position> {
    let side = range * (n as f64 / 2.5).sqrt();
    loop {
        let pos: Vec<Position> =
            (0..n).map(|_| Position::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side)).collect();
        if is_connected(&disk_graph(&pos, range)) {
            return pos;
        }
    }
}

pub fn ideal_config(jitter: SimTime) -> NetworkConfig {
    let mut cfg = NetworkConfig { channel: ChannelMode::Ideal, ..NetworkConfig::default() };
    cfg.mac.max_jitter = jitter;
    cfg
}

pub fn network(positions: &[Position], cfg: NetworkConfig, seed: u64, trace: Trace) -> Network {
    Network::new(positions, cfg, seed, trace).expect("valid network")
}
