//! Per-node security-adaptive AODV.
//!
//! A node floods route requests only to neighbors whose discovery rank meets
//! the minimum security level, answers at the destination, and unicasts the
//! reply back along the reverse path. Every transition is a pure function of
//! the node state and its inputs.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::rnd::{NeighborRecord, Rank};
use crate::NodeId;

/// Minimum rank a neighbor must hold to carry a flow's packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MsLevel(u8);

impl MsLevel {
    pub fn new(value: u8) -> Option<MsLevel> {
        (value <= 4).then_some(MsLevel(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn admits(self, rank: Rank) -> bool {
        rank.value() >= self.0
    }
}

impl fmt::Display for MsLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Neighbors below the MSL are never used.
    Sa,
    /// Ranks are recorded but ignored, i.e. ordinary AODV.
    Plain,
}

/// How a node treats a repeated `(origin, request_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DuplicatePolicy {
    /// A copy that arrives over strictly fewer hops than any earlier copy
    /// is processed again: the reverse route shortens, the request is
    /// re-flooded, and the destination answers it. Others are dropped.
    #[default]
    Improving,
    /// Only the first copy is processed (RFC 3561 discard rule).
    Strict,
}

/// Routing knobs that every node of a scenario shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoutingPolicy {
    pub msl: MsLevel,
    pub mode: Mode,
    pub duplicates: DuplicatePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Message {
    Probe {
        sender: NodeId,
        sent_ps: i64,
    },
    RouteRequest {
        origin: NodeId,
        request_id: u32,
        dest: NodeId,
        hop_count: u8,
        msl: MsLevel,
    },
    RouteReply {
        origin: NodeId,
        dest: NodeId,
        hop_count: u8,
        dest_seq: u32,
    },
    Data {
        origin: NodeId,
        dest: NodeId,
        payload_tag: u32,
    },
}

impl Message {
    pub fn hop_count(&self) -> Option<u8> {
        match *self {
            Message::RouteRequest { hop_count, .. } | Message::RouteReply { hop_count, .. } => {
                Some(hop_count)
            }
            Message::Probe { .. } | Message::Data { .. } => None,
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Message::Probe { sender, sent_ps } => write!(f, "PROBE(from={sender}, t_s={sent_ps}ps)"),
            Message::RouteRequest { origin, request_id, dest, hop_count, msl } => write!(
                f,
                "RREQ(origin={origin}, id={request_id}, dest={dest}, hops={hop_count}, msl={msl})"
            ),
            Message::RouteReply { origin, dest, hop_count, dest_seq } => write!(
                f,
                "RREP(origin={origin}, dest={dest}, hops={hop_count}, seq={dest_seq})"
            ),
            Message::Data { origin, dest, payload_tag } => {
                write!(f, "DATA(origin={origin}, dest={dest}, tag={payload_tag})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RouteEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u8,
    pub dest_seq: u32,
    pub next_hop_rank: Rank,
}

impl RouteEntry {
    /// Replacement rule: strictly newer sequence number, or the same one
    /// over strictly fewer hops.
    pub fn is_fresher_than(&self, current: &RouteEntry) -> bool {
        self.dest_seq > current.dest_seq
            || (self.dest_seq == current.dest_seq && self.hop_count < current.hop_count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeState {
    pub id: NodeId,
    pub neighbors: BTreeMap<NodeId, NeighborRecord>,
    pub routes: BTreeMap<NodeId, RouteEntry>,
    /// Requests already handled, with the fewest hops any accepted copy
    /// had travelled. The originator records 0.
    pub seen_requests: BTreeMap<(NodeId, u32), u8>,
    pub own_seq: u32,
    pub next_request_id: u32,
    /// `(dest, request_id)` of the discovery this node is waiting on.
    pub pending_request: Option<(NodeId, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("node {node} received a message from {from}, which is not a neighbor")]
    NoChannel { node: NodeId, from: NodeId },
    #[error("node {node} received a probe outside neighbor discovery")]
    UnexpectedProbe { node: NodeId },
    #[error("node {node} cannot discover a route to itself")]
    SelfRoute { node: NodeId },
}

/// Result of one node transition: the new node state and the unicast sends
/// it performs, in emission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub node: NodeState,
    pub sends: Vec<(NodeId, Message)>,
}

impl Transition {
    fn unchanged(node: &NodeState) -> Self {
        Transition { node: node.clone(), sends: Vec::new() }
    }
}

impl NodeState {
    pub fn new(id: NodeId) -> Self {
        NodeState {
            id,
            neighbors: BTreeMap::new(),
            routes: BTreeMap::new(),
            seen_requests: BTreeMap::new(),
            own_seq: 0,
            next_request_id: 0,
            pending_request: None,
        }
    }

    pub fn rank_of(&self, neighbor: NodeId) -> Option<Rank> {
        self.neighbors.get(&neighbor).map(|r| r.rank)
    }

    fn is_eligible(&self, neighbor: NodeId, msl: MsLevel, mode: Mode) -> bool {
        match (self.rank_of(neighbor), mode) {
            (None, _) => false,
            (Some(_), Mode::Plain) => true,
            (Some(rank), Mode::Sa) => msl.admits(rank),
        }
    }

    fn offer_route(&mut self, candidate: RouteEntry) -> bool {
        match self.routes.get(&candidate.dest) {
            Some(current) if !candidate.is_fresher_than(current) => false,
            _ => {
                self.routes.insert(candidate.dest, candidate);
                true
            }
        }
    }
}

/// Neighbors this node may transmit to, in ascending id order.
pub fn eligible_neighbors(node: &NodeState, msl: MsLevel, mode: Mode) -> Vec<NodeId> {
    node.neighbors
        .keys()
        .copied()
        .filter(|&n| node.is_eligible(n, msl, mode))
        .collect()
}

/// Starts route discovery toward `dest`. A node that already has a route
/// does nothing.
pub fn originate_request(
    node: &NodeState,
    dest: NodeId,
    policy: &RoutingPolicy,
) -> Result<Transition, ModelError> {
    if node.id == dest {
        return Err(ModelError::SelfRoute { node: node.id });
    }
    if node.routes.contains_key(&dest) {
        return Ok(Transition::unchanged(node));
    }
    let mut next = node.clone();
    next.own_seq += 1;
    let request_id = next.next_request_id;
    next.next_request_id += 1;
    next.pending_request = Some((dest, request_id));
    next.seen_requests.insert((node.id, request_id), 0);

    let rreq = Message::RouteRequest {
        origin: node.id,
        request_id,
        dest,
        hop_count: 0,
        msl: policy.msl,
    };
    let sends = eligible_neighbors(node, policy.msl, policy.mode)
        .into_iter()
        .map(|to| (to, rreq))
        .collect();
    Ok(Transition { node: next, sends })
}

/// Consumes one message that `from` sent to `node`.
pub fn handle_message(
    node: &NodeState,
    msg: Message,
    from: NodeId,
    policy: &RoutingPolicy,
) -> Result<Transition, ModelError> {
    let from_rank = node
        .rank_of(from)
        .ok_or(ModelError::NoChannel { node: node.id, from })?;

    match msg {
        Message::Probe { .. } => Err(ModelError::UnexpectedProbe { node: node.id }),
        Message::RouteRequest { origin, request_id, dest, hop_count, msl } => {
            if policy.mode == Mode::Sa && !msl.admits(from_rank) {
                return Ok(Transition::unchanged(node));
            }
            let arrived = hop_count.saturating_add(1);
            let key = (origin, request_id);
            if let Some(&best) = node.seen_requests.get(&key) {
                if policy.duplicates == DuplicatePolicy::Strict || arrived >= best {
                    return Ok(Transition::unchanged(node));
                }
            }

            let mut next = node.clone();
            next.seen_requests.insert(key, arrived);
            if node.id == dest {
                next.own_seq += 1;
                let rrep = Message::RouteReply {
                    origin,
                    dest,
                    hop_count: 0,
                    dest_seq: next.own_seq,
                };
                return Ok(Transition { node: next, sends: vec![(from, rrep)] });
            }

            next.offer_route(RouteEntry {
                dest: origin,
                next_hop: from,
                hop_count: arrived,
                dest_seq: 0,
                next_hop_rank: from_rank,
            });
            let rreq = Message::RouteRequest { origin, request_id, dest, hop_count: arrived, msl };
            let sends = eligible_neighbors(node, msl, policy.mode)
                .into_iter()
                .filter(|&to| to != from)
                .map(|to| (to, rreq))
                .collect();
            Ok(Transition { node: next, sends })
        }
        Message::RouteReply { origin, dest, hop_count, dest_seq } => {
            if policy.mode == Mode::Sa && !policy.msl.admits(from_rank) {
                return Ok(Transition::unchanged(node));
            }
            let arrived = hop_count.saturating_add(1);
            let mut next = node.clone();
            next.offer_route(RouteEntry {
                dest,
                next_hop: from,
                hop_count: arrived,
                dest_seq,
                next_hop_rank: from_rank,
            });
            if node.id == origin {
                next.pending_request = None;
                return Ok(Transition { node: next, sends: Vec::new() });
            }
            let sends = match node.routes.get(&origin) {
                Some(reverse) if node.is_eligible(reverse.next_hop, policy.msl, policy.mode) => {
                    let rrep = Message::RouteReply { origin, dest, hop_count: arrived, dest_seq };
                    vec![(reverse.next_hop, rrep)]
                }
                _ => Vec::new(),
            };
            Ok(Transition { node: next, sends })
        }
        Message::Data { dest, .. } => {
            if node.id == dest {
                return Ok(Transition::unchanged(node));
            }
            let sends = match node.routes.get(&dest) {
                Some(route) if node.is_eligible(route.next_hop, policy.msl, policy.mode) => {
                    vec![(route.next_hop, msg)]
                }
                _ => Vec::new(),
            };
            Ok(Transition { node: node.clone(), sends })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnd::Distance;

    fn node(id: u8, neighbors: &[(u8, u8)]) -> NodeState {
        let mut n = NodeState::new(NodeId(id));
        for &(nb, rank) in neighbors {
            n.neighbors.insert(
                NodeId(nb),
                NeighborRecord {
                    neighbor: NodeId(nb),
                    d_prime: Distance::ZERO,
                    rank: Rank::new(rank).unwrap(),
                },
            );
        }
        n
    }

    fn policy(msl: u8, mode: Mode) -> RoutingPolicy {
        RoutingPolicy {
            msl: MsLevel::new(msl).unwrap(),
            mode,
            duplicates: DuplicatePolicy::Improving,
        }
    }

    fn rreq(origin: u8, hop: u8) -> Message {
        Message::RouteRequest {
            origin: NodeId(origin),
            request_id: 0,
            dest: NodeId(2),
            hop_count: hop,
            msl: MsLevel(1),
        }
    }

    #[test]
    fn eligibility() {
        let n = node(9, &[(0, 4), (1, 0)]);
        let ids = |v: Vec<NodeId>| v.into_iter().map(|n| n.0).collect::<Vec<_>>();
        assert_eq!(ids(eligible_neighbors(&n, MsLevel(1), Mode::Sa)), vec![0]);
        assert_eq!(ids(eligible_neighbors(&n, MsLevel(0), Mode::Sa)), vec![0, 1]);
        assert_eq!(ids(eligible_neighbors(&n, MsLevel(3), Mode::Plain)), vec![0, 1]);
    }

    #[test]
    fn msl_bounds() {
        assert!(MsLevel::new(4).is_some());
        assert!(MsLevel::new(5).is_none());
    }

    #[test]
    fn originate_single_neighbor() {
        let src = node(0, &[(1, 4)]);
        let t = originate_request(&src, NodeId(2), &policy(2, Mode::Sa)).unwrap();
        assert_eq!(t.sends.len(), 1);
        assert_eq!(t.sends[0].0, NodeId(1));
        assert_eq!(t.sends[0].1.hop_count(), Some(0));
        assert_eq!(t.node.own_seq, 1);
        assert_eq!(t.node.pending_request, Some((NodeId(2), 0)));
        assert_eq!(t.node.seen_requests.get(&(NodeId(0), 0)), Some(&0));
    }

    #[test]
    fn originate_filtered_to_nothing() {
        let src = node(0, &[(1, 1)]);
        let p = policy(2, Mode::Sa);
        assert!(eligible_neighbors(&src, p.msl, p.mode).is_empty());
        let t = originate_request(&src, NodeId(2), &p).unwrap();
        assert!(t.sends.is_empty());
    }

    #[test]
    fn originate_is_idempotent_with_route() {
        let mut src = node(0, &[(1, 4)]);
        src.routes.insert(
            NodeId(2),
            RouteEntry {
                dest: NodeId(2),
                next_hop: NodeId(1),
                hop_count: 2,
                dest_seq: 1,
                next_hop_rank: Rank::MAX,
            },
        );
        let t = originate_request(&src, NodeId(2), &policy(1, Mode::Sa)).unwrap();
        assert_eq!(t.node, src);
        assert!(t.sends.is_empty());
        assert!(matches!(
            originate_request(&src, NodeId(0), &policy(1, Mode::Sa)),
            Err(ModelError::SelfRoute { .. })
        ));
    }

    #[test]
    fn chain_intermediate_rebroadcasts() {
        let mid = node(1, &[(0, 4), (2, 4)]);
        let p = policy(1, Mode::Sa);
        let t = handle_message(&mid, rreq(0, 0), NodeId(0), &p).unwrap();
        let reverse = t.node.routes[&NodeId(0)];
        assert_eq!((reverse.next_hop, reverse.hop_count), (NodeId(0), 1));
        assert_eq!(t.sends, vec![(NodeId(2), rreq(0, 1))]);

        // duplicate copy from the other side is dropped
        let again = handle_message(&t.node, rreq(0, 1), NodeId(2), &p).unwrap();
        assert_eq!(again.node, t.node);
        assert!(again.sends.is_empty());
    }

    #[test]
    fn destination_replies() {
        let dst = node(2, &[(1, 4)]);
        let t = handle_message(&dst, rreq(0, 1), NodeId(1), &policy(1, Mode::Sa)).unwrap();
        assert_eq!(
            t.sends,
            vec![(
                NodeId(1),
                Message::RouteReply { origin: NodeId(0), dest: NodeId(2), hop_count: 0, dest_seq: 1 }
            )]
        );
        assert!(t.node.routes.is_empty());
    }

    #[test]
    fn improving_copy_is_reprocessed_only_when_shorter() {
        let n = node(3, &[(1, 4), (2, 4), (4, 4)]);
        let p = policy(1, Mode::Sa);
        let long = handle_message(&n, rreq(0, 2), NodeId(2), &p).unwrap();
        assert_eq!(long.node.routes[&NodeId(0)].hop_count, 3);
        let short = handle_message(&long.node, rreq(0, 0), NodeId(1), &p).unwrap();
        assert_eq!(short.node.routes[&NodeId(0)].next_hop, NodeId(1));
        assert_eq!(short.node.routes[&NodeId(0)].hop_count, 1);
        assert_eq!(short.sends.len(), 2);
        let same = handle_message(&short.node, rreq(0, 0), NodeId(2), &p).unwrap();
        assert!(same.sends.is_empty());

        let strict = RoutingPolicy { duplicates: DuplicatePolicy::Strict, ..p };
        let t = handle_message(&long.node, rreq(0, 0), NodeId(1), &strict).unwrap();
        assert!(t.sends.is_empty());
        assert_eq!(t.node, long.node);
    }

    #[test]
    fn origin_ignores_own_request() {
        let src = node(0, &[(1, 4)]);
        let t = originate_request(&src, NodeId(2), &policy(1, Mode::Sa)).unwrap();
        let back = handle_message(&t.node, rreq(0, 1), NodeId(1), &policy(1, Mode::Sa)).unwrap();
        assert!(back.sends.is_empty());
        assert!(back.node.routes.is_empty());
    }

    #[test]
    fn reply_follows_reverse_path_and_freshness() {
        let mid = node(1, &[(0, 4), (2, 4)]);
        let p = policy(1, Mode::Sa);
        let t = handle_message(&mid, rreq(0, 0), NodeId(0), &p).unwrap();
        let rrep = |hop, seq| Message::RouteReply {
            origin: NodeId(0),
            dest: NodeId(2),
            hop_count: hop,
            dest_seq: seq,
        };
        let t = handle_message(&t.node, rrep(0, 1), NodeId(2), &p).unwrap();
        assert_eq!(t.sends, vec![(NodeId(0), rrep(1, 1))]);
        assert_eq!(t.node.routes[&NodeId(2)].hop_count, 1);

        // stale reply does not replace, but is still forwarded
        let before = t.node.routes[&NodeId(2)];
        let stale = handle_message(&t.node, rrep(3, 0), NodeId(2), &p).unwrap();
        assert_eq!(stale.node.routes[&NodeId(2)], before);
        assert_eq!(stale.sends.len(), 1);
    }

    #[test]
    fn reply_at_origin_clears_pending() {
        let src = node(0, &[(1, 4)]);
        let p = policy(1, Mode::Sa);
        let t = originate_request(&src, NodeId(2), &p).unwrap();
        let rrep = Message::RouteReply { origin: NodeId(0), dest: NodeId(2), hop_count: 1, dest_seq: 1 };
        let done = handle_message(&t.node, rrep, NodeId(1), &p).unwrap();
        assert!(done.sends.is_empty());
        assert_eq!(done.node.pending_request, None);
        assert_eq!(done.node.routes[&NodeId(2)].hop_count, 2);
    }

    #[test]
    fn sa_mode_drops_untrusted_senders() {
        let n = node(1, &[(0, 0), (2, 4)]);
        let t = handle_message(&n, rreq(0, 0), NodeId(0), &policy(1, Mode::Sa)).unwrap();
        assert!(t.sends.is_empty());
        assert!(t.node.routes.is_empty());
        let t = handle_message(&n, rreq(0, 0), NodeId(0), &policy(1, Mode::Plain)).unwrap();
        assert_eq!(t.node.routes[&NodeId(0)].next_hop_rank, Rank::UNTRUSTED);
    }

    #[test]
    fn data_forwarding() {
        let mut n = node(1, &[(0, 4), (2, 4)]);
        let data = Message::Data { origin: NodeId(0), dest: NodeId(2), payload_tag: 7 };
        let p = policy(1, Mode::Sa);
        assert!(handle_message(&n, data, NodeId(0), &p).unwrap().sends.is_empty());
        n.routes.insert(
            NodeId(2),
            RouteEntry {
                dest: NodeId(2),
                next_hop: NodeId(2),
                hop_count: 1,
                dest_seq: 1,
                next_hop_rank: Rank::MAX,
            },
        );
        assert_eq!(handle_message(&n, data, NodeId(0), &p).unwrap().sends, vec![(NodeId(2), data)]);
    }

    #[test]
    fn unknown_sender_and_probe_are_model_errors() {
        let n = node(1, &[(0, 4)]);
        let p = policy(1, Mode::Sa);
        assert!(matches!(
            handle_message(&n, rreq(0, 0), NodeId(5), &p),
            Err(ModelError::NoChannel { .. })
        ));
        let probe = Message::Probe { sender: NodeId(0), sent_ps: 0 };
        assert!(matches!(
            handle_message(&n, probe, NodeId(0), &p),
            Err(ModelError::UnexpectedProbe { .. })
        ));
    }

    #[test]
    fn handle_message_is_deterministic() {
        let mid = node(1, &[(0, 4), (2, 3), (3, 1)]);
        let p = policy(2, Mode::Sa);
        let a = handle_message(&mid, rreq(0, 0), NodeId(0), &p).unwrap();
        let b = handle_message(&mid, rreq(0, 0), NodeId(0), &p).unwrap();
        assert_eq!(a, b);
        // the msl carried in the request (1) governs the flood, not the policy's
        assert_eq!(a.sends, vec![(NodeId(2), rreq(0, 1)), (NodeId(3), rreq(0, 1))]);
    }
}
