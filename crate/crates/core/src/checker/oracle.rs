//! Shortest admissible path between source and destination, computed from
//! the discovered ranks alone and independent of the routing protocol.

use std::collections::VecDeque;

use crate::netmodel::{SystemState, Topology};
use crate::rnd::Rank;
use crate::saodv::{Mode, MsLevel};
use crate::NodeId;

/// `rank(holder, subject)`: the rank `holder` assigned to `subject`'s probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankTable {
    n: usize,
    ranks: Vec<Option<Rank>>,
}

impl RankTable {
    pub fn from_state(state: &SystemState) -> Self {
        let n = state.nodes.len();
        let mut ranks = vec![None; n * n];
        for node in &state.nodes {
            for rec in node.neighbors.values() {
                ranks[node.id.index() * n + rec.neighbor.index()] = Some(rec.rank);
            }
        }
        RankTable { n, ranks }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn rank(&self, holder: NodeId, subject: NodeId) -> Option<Rank> {
        self.ranks[holder.index() * self.n + subject.index()]
    }

    /// A link usable by the protocol: both ends discovered each other and,
    /// in SA mode, both directed ranks meet the MSL.
    pub fn admissible(&self, a: NodeId, b: NodeId, msl: MsLevel, mode: Mode) -> bool {
        match (self.rank(a, b), self.rank(b, a)) {
            (Some(ab), Some(ba)) => mode == Mode::Plain || (msl.admits(ab) && msl.admits(ba)),
            _ => false,
        }
    }
}

/// Hop count of a shortest admissible source→dest path, or `None` if the
/// destination is unreachable over admissible links.
pub fn bfs_shortest_trusted(
    topo: &Topology,
    ranks: &RankTable,
    msl: MsLevel,
    mode: Mode,
) -> Option<u8> {
    let n = topo.node_count();
    let mut dist: Vec<Option<u8>> = vec![None; n];
    dist[topo.source.index()] = Some(0);
    let mut queue = VecDeque::from([topo.source]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v.index()]?;
        if v == topo.dest {
            return Some(d);
        }
        for w in topo.nodes() {
            if dist[w.index()].is_none() && w != v && ranks.admissible(v, w, msl, mode) {
                dist[w.index()] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    None
}
