//! The property catalogue and its evaluation on a single state.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::oracle::{bfs_shortest_trusted, RankTable};
use super::CheckError;
use crate::netmodel::{self, ScenarioConfig, SystemState, CHANNEL_CAPACITY};
use crate::saodv::Mode;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    /// P1: no cycle in any per-destination next-hop graph.
    LoopFreedom,
    /// P2: at quiescence the source's route is a shortest admissible path.
    RouteOptimality,
    /// P3: no route or message carries more than n - 1 hops.
    HopBound,
    /// P4: in SA mode every next hop meets the MSL.
    TrustedHops,
    /// P5: no route crosses the wormhole tunnel.
    WormholeExclusion,
    /// P6: no channel holds more than its capacity.
    ChannelCapacity,
    /// P7: at quiescence the source has a route whenever one is admissible.
    RouteCompleteness,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::LoopFreedom,
        Property::RouteOptimality,
        Property::HopBound,
        Property::TrustedHops,
        Property::WormholeExclusion,
        Property::ChannelCapacity,
        Property::RouteCompleteness,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Property::LoopFreedom => "P1",
            Property::RouteOptimality => "P2",
            Property::HopBound => "P3",
            Property::TrustedHops => "P4",
            Property::WormholeExclusion => "P5",
            Property::ChannelCapacity => "P6",
            Property::RouteCompleteness => "P7",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::LoopFreedom => "loop-freedom",
            Property::RouteOptimality => "route-optimality",
            Property::HopBound => "hop-bound",
            Property::TrustedHops => "trusted-hops",
            Property::WormholeExclusion => "wormhole-exclusion",
            Property::ChannelCapacity => "channel-capacity",
            Property::RouteCompleteness => "route-completeness",
        }
    }

    /// Properties that are only meaningful once nothing can move any more.
    pub fn quiescent_only(self) -> bool {
        matches!(self, Property::RouteOptimality | Property::RouteCompleteness)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown property `{0}` (expected P1..P7 or all)")]
pub struct ParsePropertyError(pub String);

impl FromStr for Property {
    type Err = ParsePropertyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Property::ALL
            .into_iter()
            .find(|p| p.code().eq_ignore_ascii_case(t) || p.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| ParsePropertyError(s.to_string()))
    }
}

/// Parses `all` or a comma-separated list into a sorted, deduplicated set.
pub fn parse_property_list(s: &str) -> Result<Vec<Property>, ParsePropertyError> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Property::ALL.to_vec());
    }
    let mut props = s
        .split(',')
        .filter(|w| !w.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Property>, _>>()?;
    props.sort();
    props.dedup();
    Ok(props)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyStatus {
    Holds,
    Violated(String),
}

impl PropertyStatus {
    pub fn holds(&self) -> bool {
        matches!(self, PropertyStatus::Holds)
    }
}

/// Facts shared by every state of one scenario: discovery is fixed before
/// routing starts, so the admissible shortest path is computed once.
#[derive(Debug, Clone)]
pub struct PropertyContext {
    pub ranks: RankTable,
    pub shortest: Option<u8>,
}

impl PropertyContext {
    pub fn new(config: &ScenarioConfig, post_discovery: &SystemState) -> Self {
        let ranks = RankTable::from_state(post_discovery);
        let shortest = bfs_shortest_trusted(
            &config.topology,
            &ranks,
            config.routing.msl,
            config.routing.mode,
        );
        PropertyContext { ranks, shortest }
    }
}

/// Evaluates `prop` on a routing-phase state. Quiescent-only properties
/// are a logic error on a state that can still move.
pub fn eval_property(
    state: &SystemState,
    prop: Property,
    config: &ScenarioConfig,
    ctx: &PropertyContext,
) -> Result<PropertyStatus, CheckError> {
    if prop.quiescent_only() && !netmodel::is_quiescent(state, config)? {
        return Err(CheckError::NotQuiescent(prop));
    }
    Ok(eval_unchecked(state, prop, config, ctx))
}

pub(crate) fn eval_unchecked(
    state: &SystemState,
    prop: Property,
    config: &ScenarioConfig,
    ctx: &PropertyContext,
) -> PropertyStatus {
    let problems = match prop {
        Property::LoopFreedom => loop_problems(state),
        Property::RouteOptimality => optimality_problems(state, config, ctx),
        Property::HopBound => hop_problems(state),
        Property::TrustedHops => trust_problems(state, config),
        Property::WormholeExclusion => wormhole_problems(state, config),
        Property::ChannelCapacity => capacity_problems(state),
        Property::RouteCompleteness => completeness_problems(state, config, ctx),
    };
    if problems.is_empty() {
        PropertyStatus::Holds
    } else {
        PropertyStatus::Violated(problems.join("; "))
    }
}

fn loop_problems(state: &SystemState) -> Vec<String> {
    let n = state.nodes.len();
    let mut out = Vec::new();
    for dest in (0..n as u8).map(NodeId) {
        let next = |v: NodeId| state.nodes[v.index()].routes.get(&dest).map(|r| r.next_hop);
        for start in (0..n as u8).map(NodeId) {
            let mut path = vec![start];
            let mut cursor = start;
            while let Some(hop) = next(cursor) {
                if hop == dest {
                    break;
                }
                if let Some(pos) = path.iter().position(|&v| v == hop) {
                    // report each cycle once, from its smallest member
                    let cycle = &path[pos..];
                    if cycle.iter().min() == Some(&start) && pos == 0 {
                        let ids: Vec<String> = cycle.iter().map(ToString::to_string).collect();
                        out.push(format!("next-hop cycle toward {dest}: {} -> {start}", ids.join(" -> ")));
                    }
                    break;
                }
                path.push(hop);
                cursor = hop;
            }
        }
    }
    out
}

fn optimality_problems(state: &SystemState, config: &ScenarioConfig, ctx: &PropertyContext) -> Vec<String> {
    let topo = &config.topology;
    let Some(route) = state.nodes[topo.source.index()].routes.get(&topo.dest) else {
        return Vec::new();
    };
    if Some(route.hop_count) == ctx.shortest {
        return Vec::new();
    }
    let best = ctx
        .shortest
        .map_or_else(|| "no admissible path exists".to_string(), |h| format!("shortest admissible path has {h}"));
    vec![format!(
        "source {} routes to {} in {} hops via {}, {best}",
        topo.source, topo.dest, route.hop_count, route.next_hop
    )]
}

fn hop_problems(state: &SystemState) -> Vec<String> {
    let bound = state.nodes.len().saturating_sub(1);
    let mut out = Vec::new();
    for node in &state.nodes {
        for route in node.routes.values() {
            if usize::from(route.hop_count) > bound {
                out.push(format!(
                    "node {} route to {} has {} hops (bound {bound})",
                    node.id, route.dest, route.hop_count
                ));
            }
        }
    }
    for (channel, msg) in state.messages_in_flight() {
        if let Some(h) = msg.hop_count() {
            if usize::from(h) > bound {
                out.push(format!("{msg} on {} -> {} exceeds bound {bound}", channel.from, channel.to));
            }
        }
    }
    out
}

fn trust_problems(state: &SystemState, config: &ScenarioConfig) -> Vec<String> {
    if config.routing.mode != Mode::Sa {
        return Vec::new();
    }
    let msl = config.routing.msl;
    state
        .nodes
        .iter()
        .flat_map(|node| node.routes.values().map(move |r| (node.id, r)))
        .filter(|(_, r)| !msl.admits(r.next_hop_rank))
        .map(|(owner, r)| {
            format!(
                "node {owner} route to {} uses next hop {} of rank {} below msl {msl}",
                r.dest, r.next_hop, r.next_hop_rank
            )
        })
        .collect()
}

fn wormhole_problems(state: &SystemState, config: &ScenarioConfig) -> Vec<String> {
    let topo = &config.topology;
    let mut out = Vec::new();
    for node in &state.nodes {
        for route in node.routes.values() {
            if !topo.is_tunnel(node.id, route.next_hop) {
                continue;
            }
            if node.id == topo.source && route.dest == topo.dest {
                out.push(format!(
                    "route source→dest via tunnel endpoint {} ({} hop{})",
                    route.next_hop,
                    route.hop_count,
                    if route.hop_count == 1 { "" } else { "s" }
                ));
            } else {
                out.push(format!(
                    "node {} routes to {} via tunnel endpoint {}",
                    node.id, route.dest, route.next_hop
                ));
            }
        }
    }
    out
}

fn capacity_problems(state: &SystemState) -> Vec<String> {
    state
        .channels
        .iter()
        .filter(|c| c.queue.len() > CHANNEL_CAPACITY)
        .map(|c| format!("channel {} -> {} holds {} messages", c.from, c.to, c.queue.len()))
        .collect()
}

fn completeness_problems(state: &SystemState, config: &ScenarioConfig, ctx: &PropertyContext) -> Vec<String> {
    let topo = &config.topology;
    match ctx.shortest {
        Some(h) if !state.nodes[topo.source.index()].routes.contains_key(&topo.dest) => vec![format!(
            "an admissible {h}-hop path exists but source {} has no route to {}",
            topo.source, topo.dest
        )],
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn property_parsing() {
        assert_eq!(parse_property_list("all").unwrap(), Property::ALL.to_vec());
        assert_eq!(
            parse_property_list("P3,p1,P3").unwrap(),
            vec![Property::LoopFreedom, Property::HopBound]
        );
        assert_eq!("wormhole-exclusion".parse::<Property>().unwrap(), Property::WormholeExclusion);
        assert!(parse_property_list("P8").is_err());
        assert!(parse_property_list("").unwrap().is_empty());
    }

    #[test]
    fn evaluation_classes() {
        let quiescent: Vec<_> = Property::ALL.into_iter().filter(|p| p.quiescent_only()).collect();
        assert_eq!(quiescent, vec![Property::RouteOptimality, Property::RouteCompleteness]);
    }
}
