//! The world: a static topology, one bounded FIFO channel per ordered pair
//! of connected nodes, a single wormhole tunnel, and the global transition
//! relation over [`SystemState`].
//!
//! Neighbor discovery is geometric and therefore deterministic, so it runs
//! once as an atomic phase. After that the only actions are the source's
//! single origination and delivery of the head message of some channel.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::rnd::{self, ProbeTiming, TimingParams};
use crate::saodv::{self, Message, ModelError, NodeState, RoutingPolicy, Transition};
use crate::NodeId;

/// Largest scenario the model accepts.
pub const MAX_NODES: usize = 8;
pub const CHANNEL_CAPACITY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Wormhole {
    pub end_a: NodeId,
    pub end_b: NodeId,
    /// Effective distance a tunneled probe appears to travel, in mm.
    pub tunnel_mm: u64,
}

impl Wormhole {
    pub fn joins(&self, a: NodeId, b: NodeId) -> bool {
        (self.end_a == a && self.end_b == b) || (self.end_a == b && self.end_b == a)
    }
}

/// Node count, symmetric link-distance matrix (mm, 0 = no genuine link),
/// the flow endpoints and the optional attacker tunnel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    n: usize,
    dist: Vec<u64>,
    pub source: NodeId,
    pub dest: NodeId,
    pub wormhole: Option<Wormhole>,
}

impl Topology {
    pub fn new(n: usize, source: NodeId, dest: NodeId) -> Self {
        Topology { n, dist: vec![0; n * n], source, dest, wormhole: None }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n as u8).map(NodeId)
    }

    /// Declares a genuine bidirectional link. A distance of 0 removes it.
    pub fn set_link(&mut self, a: NodeId, b: NodeId, mm: u64) {
        let n = self.n;
        self.dist[a.index() * n + b.index()] = mm;
        self.dist[b.index() * n + a.index()] = mm;
    }

    /// Genuine link distance, if any.
    pub fn link_mm(&self, a: NodeId, b: NodeId) -> Option<u64> {
        if a == b {
            return None;
        }
        let d = self.dist[a.index() * self.n + b.index()];
        (d > 0).then_some(d)
    }

    pub fn is_tunnel(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.wormhole.is_some_and(|w| w.joins(a, b))
    }

    /// Distance a probe from `a` appears to travel to `b`: the genuine
    /// distance, the tunnel distance for the wormhole pair, or 0 for `a == b`.
    pub fn effective_mm(&self, a: NodeId, b: NodeId) -> Option<u64> {
        if a == b {
            return Some(0);
        }
        if let Some(d) = self.link_mm(a, b) {
            return Some(d);
        }
        match self.wormhole {
            Some(w) if w.joins(a, b) => Some(w.tunnel_mm),
            _ => None,
        }
    }

    pub fn is_connected(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.effective_mm(a, b).is_some()
    }

    /// Every ordered pair `(from, to)` with a channel, sorted.
    pub fn connected_pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes()
            .flat_map(|a| self.nodes().map(move |b| (a, b)))
            .filter(|&(a, b)| self.is_connected(a, b))
            .collect()
    }
}

/// Everything needed to build and explore one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScenarioConfig {
    pub topology: Topology,
    pub params: TimingParams,
    pub routing: RoutingPolicy,
    /// Let sends onto a full channel go through (and be caught by the
    /// channel-capacity property) instead of blocking the delivery.
    pub overflow_assert: bool,
    pub max_depth: usize,
}

pub const DEFAULT_MAX_DEPTH: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Discovery,
    Routing,
    Quiescent,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Channel {
    pub from: NodeId,
    pub to: NodeId,
    pub queue: Vec<Message>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemState {
    pub nodes: Vec<NodeState>,
    /// Sorted by `(from, to)`.
    pub channels: Vec<Channel>,
    pub phase: Phase,
    pub origination_done: bool,
}

impl SystemState {
    pub fn channel(&self, from: NodeId, to: NodeId) -> Option<&Channel> {
        self.channel_index(from, to).map(|i| &self.channels[i])
    }

    fn channel_index(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.channels
            .binary_search_by(|c| (c.from, c.to).cmp(&(from, to)))
            .ok()
    }

    pub fn messages_in_flight(&self) -> impl Iterator<Item = (&Channel, &Message)> {
        self.channels.iter().flat_map(|c| c.queue.iter().map(move |m| (c, m)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Originate,
    Deliver { from: NodeId, to: NodeId },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Originate => f.write_str("originate"),
            Action::Deliver { from, to } => write!(f, "deliver {from} {to}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed action `{0}`")]
pub struct ParseActionError(String);

impl FromStr for Action {
    type Err = ParseActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let node = |w: &str| w.parse::<u8>().map(NodeId).map_err(|_| ParseActionError(s.to_string()));
        match words.as_slice() {
            ["originate"] => Ok(Action::Originate),
            ["deliver", from, to] => Ok(Action::Deliver { from: node(from)?, to: node(to)? }),
            _ => Err(ParseActionError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("nodes {0} and {1} are not connected")]
    NotConnected(NodeId, NodeId),
    #[error("operation requires phase {expected:?}, state is in {actual:?}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("action `{0}` is not enabled")]
    Disabled(Action),
    #[error("node {from} sent to {to} but no channel exists")]
    MissingChannel { from: NodeId, to: NodeId },
    #[error(transparent)]
    Node(#[from] ModelError),
}

/// All node tables empty, one empty channel per ordered connected pair.
pub fn initial_state(config: &ScenarioConfig) -> SystemState {
    let topo = &config.topology;
    SystemState {
        nodes: topo.nodes().map(NodeState::new).collect(),
        channels: topo
            .connected_pairs()
            .into_iter()
            .map(|(from, to)| Channel { from, to, queue: Vec::new() })
            .collect(),
        phase: Phase::Discovery,
        origination_done: false,
    }
}

/// Timestamps of a probe from `from` as observed by `to`: sent at local
/// time 0, received after the effective distance at propagation speed,
/// rounded half up to the picosecond.
pub fn probe_timing(
    from: NodeId,
    to: NodeId,
    topo: &Topology,
    params: &TimingParams,
) -> Result<ProbeTiming, NetError> {
    let mm = topo.effective_mm(from, to).ok_or(NetError::NotConnected(from, to))?;
    // ps = mm * 1e-3 / v * 1e12 = mm * 1e9 / v
    let num = u128::from(mm) * 1_000_000_000;
    let den = u128::from(params.light_speed);
    let ps = (2 * num + den) / (2 * den);
    Ok(ProbeTiming {
        sent_ps: 0,
        received_ps: i64::try_from(ps).unwrap_or(i64::MAX),
    })
}

/// Every node ranks every connected peer from that peer's probe.
pub fn run_discovery(state: &SystemState, config: &ScenarioConfig) -> Result<SystemState, NetError> {
    if state.phase != Phase::Discovery {
        return Err(NetError::WrongPhase { expected: Phase::Discovery, actual: state.phase });
    }
    let topo = &config.topology;
    let mut next = state.clone();
    for (from, to) in topo.connected_pairs() {
        let timing = probe_timing(from, to, topo, &config.params)?;
        if let Some(record) = rnd::process_probe(timing, from, &config.params) {
            next.nodes[to.index()].neighbors.insert(from, record);
        }
    }
    next.phase = Phase::Routing;
    Ok(next)
}

/// Initial state with discovery already applied: the root of exploration.
pub fn routing_start(config: &ScenarioConfig) -> Result<SystemState, NetError> {
    run_discovery(&initial_state(config), config)
}

fn require_routing(state: &SystemState) -> Result<(), NetError> {
    if state.phase == Phase::Discovery {
        return Err(NetError::WrongPhase { expected: Phase::Routing, actual: state.phase });
    }
    Ok(())
}

/// The step an action would take, or `None` if a send would block.
fn step(
    state: &SystemState,
    action: Action,
    config: &ScenarioConfig,
) -> Result<Option<SystemState>, NetError> {
    let policy: &RoutingPolicy = &config.routing;
    let (actor, transition, mut next) = match action {
        Action::Originate => {
            if state.origination_done {
                return Err(NetError::Disabled(action));
            }
            let source = config.topology.source;
            let t = saodv::originate_request(&state.nodes[source.index()], config.topology.dest, policy)?;
            let mut next = state.clone();
            next.origination_done = true;
            (source, t, next)
        }
        Action::Deliver { from, to } => {
            let idx = state.channel_index(from, to).ok_or(NetError::Disabled(action))?;
            let Some(&msg) = state.channels[idx].queue.first() else {
                return Err(NetError::Disabled(action));
            };
            let t = saodv::handle_message(&state.nodes[to.index()], msg, from, policy)?;
            let mut next = state.clone();
            next.channels[idx].queue.remove(0);
            (to, t, next)
        }
    };

    let Transition { node, sends } = transition;
    next.nodes[actor.index()] = node;
    for (target, msg) in sends {
        let idx = next
            .channel_index(actor, target)
            .ok_or(NetError::MissingChannel { from: actor, to: target })?;
        let queue = &mut next.channels[idx].queue;
        if queue.len() >= CHANNEL_CAPACITY && !config.overflow_assert {
            return Ok(None);
        }
        queue.push(msg);
    }
    next.phase = Phase::Routing;
    Ok(Some(next))
}

fn candidate_actions(state: &SystemState) -> impl Iterator<Item = Action> + '_ {
    let originate = (!state.origination_done).then_some(Action::Originate);
    originate.into_iter().chain(
        state
            .channels
            .iter()
            .filter(|c| !c.queue.is_empty())
            .map(|c| Action::Deliver { from: c.from, to: c.to }),
    )
}

/// Enabled actions in canonical order.
pub fn enabled_actions(state: &SystemState, config: &ScenarioConfig) -> Result<Vec<Action>, NetError> {
    Ok(successors_unmarked(state, config)?
        .into_iter()
        .map(|(action, _)| action)
        .collect())
}

fn successors_unmarked(
    state: &SystemState,
    config: &ScenarioConfig,
) -> Result<Vec<(Action, SystemState)>, NetError> {
    require_routing(state)?;
    let mut out = Vec::new();
    for action in candidate_actions(state) {
        if let Some(next) = step(state, action, config)? {
            out.push((action, next));
        }
    }
    Ok(out)
}

/// True iff no action is enabled.
pub fn is_quiescent(state: &SystemState, config: &ScenarioConfig) -> Result<bool, NetError> {
    require_routing(state)?;
    if !state.origination_done {
        return Ok(false);
    }
    let mut pending = state.channels.iter().filter(|c| !c.queue.is_empty()).peekable();
    if pending.peek().is_none() {
        return Ok(true);
    }
    if config.overflow_assert {
        return Ok(false);
    }
    // A node emits at most one message per outgoing channel per step, so a
    // delivery is certainly enabled when the receiver has room everywhere.
    let has_room = |node: NodeId| {
        state
            .channels
            .iter()
            .filter(|c| c.from == node)
            .all(|c| c.queue.len() < CHANNEL_CAPACITY)
    };
    if pending.any(|c| has_room(c.to)) {
        return Ok(false);
    }
    Ok(successors_unmarked(state, config)?.is_empty())
}

fn mark_phase(mut state: SystemState, config: &ScenarioConfig) -> Result<SystemState, NetError> {
    if is_quiescent(&state, config)? {
        state.phase = Phase::Quiescent;
    }
    Ok(state)
}

/// The unique successor of `state` under `action`.
pub fn apply_action(
    state: &SystemState,
    action: Action,
    config: &ScenarioConfig,
) -> Result<SystemState, NetError> {
    require_routing(state)?;
    let next = step(state, action, config)?.ok_or(NetError::Disabled(action))?;
    mark_phase(next, config)
}

/// Every enabled action paired with its successor, in canonical order.
pub fn successors(
    state: &SystemState,
    config: &ScenarioConfig,
) -> Result<Vec<(Action, SystemState)>, NetError> {
    successors_unmarked(state, config)?
        .into_iter()
        .map(|(a, s)| Ok((a, mark_phase(s, config)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnd::{Rank, SkewSign};
    use crate::saodv::{DuplicatePolicy, Mode, MsLevel};

    fn params() -> TimingParams {
        TimingParams {
            clock_skew_ps: 0,
            mac_time_ps: 0,
            packet_time_ps: 500_000_000,
            light_speed: 300_000_000,
            range_mm: 100_000,
            skew_sign: SkewSign::Paper,
        }
    }

    fn config(n: usize, links: &[(u8, u8, u64)], wormhole: Option<(u8, u8, u64)>) -> ScenarioConfig {
        let mut topology = Topology::new(n, NodeId(0), NodeId(n as u8 - 1));
        for &(a, b, mm) in links {
            topology.set_link(NodeId(a), NodeId(b), mm);
        }
        topology.wormhole = wormhole.map(|(a, b, mm)| Wormhole {
            end_a: NodeId(a),
            end_b: NodeId(b),
            tunnel_mm: mm,
        });
        ScenarioConfig {
            topology,
            params: params(),
            routing: RoutingPolicy {
                msl: MsLevel::new(1).unwrap(),
                mode: Mode::Sa,
                duplicates: DuplicatePolicy::Improving,
            },
            overflow_assert: false,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    fn chain3() -> ScenarioConfig {
        config(3, &[(0, 1, 20_000), (1, 2, 20_000)], None)
    }

    #[test]
    fn initial_channels() {
        let s = initial_state(&chain3());
        assert_eq!(s.nodes.len(), 3);
        assert_eq!(s.channels.len(), 4);
        assert!(s.nodes.iter().all(|n| n.routes.is_empty() && n.neighbors.is_empty()));
        assert_eq!(s.phase, Phase::Discovery);

        let w = config(3, &[(0, 1, 20_000), (1, 2, 20_000)], Some((0, 2, 250_000)));
        let s = initial_state(&w);
        assert_eq!(s.channels.len(), 6);
        assert!(s.channel(NodeId(0), NodeId(2)).is_some());
        assert!(s.channel(NodeId(2), NodeId(0)).is_some());

        assert_eq!(initial_state(&config(2, &[(0, 1, 5_000)], None)).channels.len(), 2);
    }

    #[test]
    fn channels_are_symmetric() {
        let w = config(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)], Some((0, 3, 1)));
        let s = initial_state(&w);
        for c in &s.channels {
            assert!(s.channel(c.to, c.from).is_some());
        }
    }

    #[test]
    fn probe_timing_examples() {
        let cfg = config(3, &[(0, 1, 30_000)], Some((0, 2, 250_000)));
        let p = cfg.params;
        let t = |a, b| probe_timing(NodeId(a), NodeId(b), &cfg.topology, &p).unwrap().received_ps;
        assert_eq!(t(0, 1), 100_000);
        assert_eq!(t(0, 2), 833_333);
        assert_eq!(t(1, 1), 0);
        assert!(matches!(
            probe_timing(NodeId(1), NodeId(2), &cfg.topology, &p),
            Err(NetError::NotConnected(..))
        ));
    }

    #[test]
    fn discovery_ranks() {
        let s = routing_start(&chain3()).unwrap();
        assert_eq!(s.phase, Phase::Routing);
        for node in &s.nodes {
            assert!(node.neighbors.values().all(|r| r.rank == Rank::MAX));
        }
        assert_eq!(s.nodes[1].neighbors.len(), 2);

        let w = config(3, &[(0, 1, 20_000), (1, 2, 20_000)], Some((0, 2, 250_000)));
        let s = routing_start(&w).unwrap();
        assert_eq!(s.nodes[0].rank_of(NodeId(2)), Some(Rank::UNTRUSTED));
        assert_eq!(s.nodes[2].rank_of(NodeId(0)), Some(Rank::UNTRUSTED));

        let isolated = config(3, &[(0, 1, 20_000)], None);
        let s = routing_start(&isolated).unwrap();
        assert!(s.nodes[2].neighbors.is_empty());

        assert!(matches!(run_discovery(&s, &isolated), Err(NetError::WrongPhase { .. })));
    }

    #[test]
    fn discovery_skips_rejected_probes() {
        let mut cfg = chain3();
        // 20 m takes ~66.7 ns; a 50 ns packet time fails the timing gate
        cfg.params.packet_time_ps = 50_000;
        let s = routing_start(&cfg).unwrap();
        assert!(s.nodes.iter().all(|n| n.neighbors.is_empty()));
    }

    #[test]
    fn fresh_state_only_originates() {
        let cfg = chain3();
        let s = routing_start(&cfg).unwrap();
        assert_eq!(enabled_actions(&s, &cfg).unwrap(), vec![Action::Originate]);
        assert!(!is_quiescent(&s, &cfg).unwrap());

        let s1 = apply_action(&s, Action::Originate, &cfg).unwrap();
        assert_eq!(s1.channel(NodeId(0), NodeId(1)).unwrap().queue.len(), 1);
        assert!(s1.origination_done);
        assert_eq!(s, routing_start(&cfg).unwrap(), "input state untouched");

        let empty = Action::Deliver { from: NodeId(1), to: NodeId(0) };
        assert_eq!(apply_action(&s1, empty, &cfg), Err(NetError::Disabled(empty)));
        assert_eq!(apply_action(&s1, Action::Originate, &cfg), Err(NetError::Disabled(Action::Originate)));
    }

    #[test]
    fn chain_runs_to_quiescence() {
        let cfg = chain3();
        let mut s = routing_start(&cfg).unwrap();
        loop {
            let actions = enabled_actions(&s, &cfg).unwrap();
            if actions.is_empty() {
                break;
            }
            // a chain has a single message in flight at a time
            assert_eq!(actions.len(), 1);
            s = apply_action(&s, actions[0], &cfg).unwrap();
        }
        assert_eq!(s.phase, Phase::Quiescent);
        assert!(is_quiescent(&s, &cfg).unwrap());
        let route = s.nodes[0].routes[&NodeId(2)];
        assert_eq!((route.next_hop, route.hop_count), (NodeId(1), 2));
    }

    #[test]
    fn two_in_flight_gives_two_deliveries() {
        let cfg = config(3, &[(0, 1, 1_000), (0, 2, 1_000)], None);
        let s = routing_start(&cfg).unwrap();
        let s = apply_action(&s, Action::Originate, &cfg).unwrap();
        let actions = enabled_actions(&s, &cfg).unwrap();
        assert_eq!(
            actions,
            vec![
                Action::Deliver { from: NodeId(0), to: NodeId(1) },
                Action::Deliver { from: NodeId(0), to: NodeId(2) },
            ]
        );
        assert!(!is_quiescent(&s, &cfg).unwrap());
    }

    #[test]
    fn full_channel_blocks_delivery() {
        let cfg = chain3();
        let mut s = routing_start(&cfg).unwrap();
        s = apply_action(&s, Action::Originate, &cfg).unwrap();
        // fill 1 -> 2 so that node 1's rebroadcast has nowhere to go
        let filler = Message::Data { origin: NodeId(1), dest: NodeId(2), payload_tag: 0 };
        let idx = s.channel_index(NodeId(1), NodeId(2)).unwrap();
        s.channels[idx].queue = vec![filler; CHANNEL_CAPACITY];
        let blocked = Action::Deliver { from: NodeId(0), to: NodeId(1) };
        let actions = enabled_actions(&s, &cfg).unwrap();
        assert!(!actions.contains(&blocked));
        assert!(actions.contains(&Action::Deliver { from: NodeId(1), to: NodeId(2) }));

        let mut overflow = cfg.clone();
        overflow.overflow_assert = true;
        let next = apply_action(&s, blocked, &overflow).unwrap();
        assert_eq!(next.channel(NodeId(1), NodeId(2)).unwrap().queue.len(), 3);
    }

    #[test]
    fn deadlocked_state_is_quiescent() {
        let cfg = config(2, &[(0, 1, 1_000)], None);
        let mut s = routing_start(&cfg).unwrap();
        s.origination_done = true;
        let rreq = |origin: u8, dest: u8| Message::RouteRequest {
            origin: NodeId(origin),
            request_id: 0,
            dest: NodeId(dest),
            hop_count: 0,
            msl: MsLevel::new(1).unwrap(),
        };
        // each head is a request addressed to its receiver, whose reply
        // would go onto the opposite channel, which is full
        s.channels[0].queue = vec![rreq(0, 1); CHANNEL_CAPACITY];
        s.channels[1].queue = vec![rreq(1, 0); CHANNEL_CAPACITY];
        assert_eq!(enabled_actions(&s, &cfg).unwrap(), vec![]);
        assert!(is_quiescent(&s, &cfg).unwrap());
    }

    #[test]
    fn action_text_round_trip() {
        for a in [Action::Originate, Action::Deliver { from: NodeId(3), to: NodeId(7) }] {
            assert_eq!(a.to_string().parse::<Action>().unwrap(), a);
        }
        assert!("deliver 1".parse::<Action>().is_err());
        assert!("jump".parse::<Action>().is_err());
    }
}
