//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};
use std::path::PathBuf;

use rndcheck::checker::canonical_bytes;
use rndcheck::cli::parse_config;
use rndcheck::netmodel::{self, ScenarioConfig, SystemState, Topology, DEFAULT_MAX_DEPTH};
use rndcheck::rnd::{SkewSign, TimingParams, SPEED_OF_LIGHT};
use rndcheck::saodv::{DuplicatePolicy, Mode, MsLevel, RoutingPolicy};
use rndcheck::NodeId;

pub const SHIPPED: [&str; 6] = ["chain3", "wormhole", "diamond", "line5", "chords5", "strict_dedup"];

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.cfg"))
}

pub fn shipped(name: &str) -> ScenarioConfig {
    let text = std::fs::read_to_string(scenario_path(name)).unwrap();
    parse_config(&text).unwrap_or_else(|d| panic!("{name}: {d:?}"))
}

pub fn params() -> TimingParams {
    TimingParams {
        clock_skew_ps: 100_000,
        mac_time_ps: 10_000_000,
        packet_time_ps: 500_000_000,
        light_speed: SPEED_OF_LIGHT,
        range_mm: 100_000,
        skew_sign: SkewSign::Paper,
    }
}

pub fn config(topology: Topology, mode: Mode) -> ScenarioConfig {
    ScenarioConfig {
        topology,
        params: params(),
        routing: RoutingPolicy { msl: MsLevel::new(1).unwrap(), mode, duplicates: DuplicatePolicy::Improving },
        overflow_assert: false,
        max_depth: DEFAULT_MAX_DEPTH,
    }
}

/// Link length profiles for the sweep, all within the 100 m range.
pub const PROFILES: [fn(usize, usize) -> u64; 3] = [
    |a, b| 10_000 * (a + b + 1) as u64,
    |_, _| 100_000,
    |a, b| [5_000, 30_000, 55_000, 80_000, 99_999][(a * 3 + b) % 5],
];

/// Every connected labeled graph on `n` nodes, as edge lists.
pub fn connected_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<_> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            for &(a, b) in &edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        if seen.iter().all(|&s| s) {
            out.push(edges);
        }
    }
    out
}

/// The criterion-2 sweep: every connected topology with 2..=4 nodes, every
/// ordered (source, dest) pair and every length profile.
pub fn benign_sweep() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for n in 2..=4 {
        for edges in connected_graphs(n) {
            for s in 0..n {
                for d in (0..n).filter(|&d| d != s) {
                    for profile in PROFILES {
                        let mut t = Topology::new(n, NodeId(s as u8), NodeId(d as u8));
                        for &(a, b) in &edges {
                            t.set_link(NodeId(a as u8), NodeId(b as u8), profile(a, b));
                        }
                        out.push(config(t, Mode::Sa));
                    }
                }
            }
        }
    }
    out
}

/// Fewest hops over all simple source→dest paths whose links are
/// admissible, by exhaustive enumeration.
pub fn brute_force_shortest(cfg: &ScenarioConfig, post: &SystemState) -> Option<usize> {
    let n = cfg.topology.node_count();
    let msl = cfg.routing.msl;
    let ok = |a: usize, b: usize| {
        let ab = post.nodes[a].neighbors.get(&NodeId(b as u8)).map(|r| r.rank);
        let ba = post.nodes[b].neighbors.get(&NodeId(a as u8)).map(|r| r.rank);
        match (ab, ba) {
            (Some(x), Some(y)) => cfg.routing.mode == Mode::Plain || (msl.admits(x) && msl.admits(y)),
            _ => false,
        }
    };
    fn walk(v: usize, d: usize, on: &mut Vec<bool>, len: usize, ok: &dyn Fn(usize, usize) -> bool, best: &mut Option<usize>) {
        if v == d {
            *best = Some(best.map_or(len, |b| b.min(len)));
            return;
        }
        for w in 0..on.len() {
            if !on[w] && ok(v, w) {
                on[w] = true;
                walk(w, d, on, len + 1, ok, best);
                on[w] = false;
            }
        }
    }
    let (s, d) = (cfg.topology.source.index(), cfg.topology.dest.index());
    let mut on = vec![false; n];
    on[s] = true;
    let mut best = None;
    walk(s, d, &mut on, 0, &ok, &mut best);
    best
}

/// Every reachable state, found by a plain BFS that shares nothing with the
/// checker except the transition relation.
pub fn reachable(cfg: &ScenarioConfig) -> Vec<SystemState> {
    let root = netmodel::routing_start(cfg).unwrap();
    let mut seen = HashSet::from([canonical_bytes(&root)]);
    let mut queue = VecDeque::from([root.clone()]);
    let mut all = vec![root];
    while let Some(s) = queue.pop_front() {
        for (_, next) in netmodel::successors(&s, cfg).unwrap() {
            if seen.insert(canonical_bytes(&next)) {
                all.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    all
}
