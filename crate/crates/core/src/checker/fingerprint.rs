//! Canonical state encoding and its 64-bit digest.
//!
//! The encoding is fixed-width little-endian with every map walked in key
//! order, so two logically equal states always encode to the same bytes on
//! every platform regardless of how they were built.

use std::fmt;
use std::str::FromStr;

use xxhash_rust::xxh3::xxh3_64;

use crate::netmodel::{Channel, Phase, SystemState};
use crate::rnd::{Distance, NeighborRecord, Rank};
use crate::saodv::{Message, MsLevel, NodeState, RouteEntry};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(pub u64);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for Fingerprint {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(Fingerprint)
    }
}

pub fn digest(bytes: &[u8]) -> u64 {
    xxh3_64(bytes)
}

/// Digest plus the canonical bytes it was computed from.
pub fn fingerprint(state: &SystemState) -> (Fingerprint, Vec<u8>) {
    let bytes = canonical_bytes(state);
    (Fingerprint(digest(&bytes)), bytes)
}

pub fn canonical_bytes(state: &SystemState) -> Vec<u8> {
    let mut enc = Encoder(Vec::with_capacity(256));
    enc.len(state.nodes.len());
    for node in &state.nodes {
        enc.node_state(node);
    }
    enc.len(state.channels.len());
    for channel in &state.channels {
        enc.id(channel.from);
        enc.id(channel.to);
        enc.len(channel.queue.len());
        for msg in &channel.queue {
            enc.message(msg);
        }
    }
    enc.u8(match state.phase {
        Phase::Discovery => 0,
        Phase::Routing => 1,
        Phase::Quiescent => 2,
    });
    enc.u8(u8::from(state.origination_done));
    enc.0
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("collection too large to encode"));
    }

    fn id(&mut self, id: NodeId) {
        self.u8(id.0);
    }

    fn node_state(&mut self, node: &NodeState) {
        self.id(node.id);
        self.len(node.neighbors.len());
        for rec in node.neighbors.values() {
            self.id(rec.neighbor);
            self.u64(rec.d_prime.picometers());
            self.u8(rec.rank.value());
        }
        self.len(node.routes.len());
        for route in node.routes.values() {
            self.id(route.dest);
            self.id(route.next_hop);
            self.u8(route.hop_count);
            self.u32(route.dest_seq);
            self.u8(route.next_hop_rank.value());
        }
        self.len(node.seen_requests.len());
        for (&(origin, request_id), &best) in &node.seen_requests {
            self.id(origin);
            self.u32(request_id);
            self.u8(best);
        }
        self.u32(node.own_seq);
        self.u32(node.next_request_id);
        match node.pending_request {
            None => self.u8(0),
            Some((dest, request_id)) => {
                self.u8(1);
                self.id(dest);
                self.u32(request_id);
            }
        }
    }

    fn message(&mut self, msg: &Message) {
        match *msg {
            Message::Probe { sender, sent_ps } => {
                self.u8(0);
                self.id(sender);
                self.u64(sent_ps as u64);
            }
            Message::RouteRequest { origin, request_id, dest, hop_count, msl } => {
                self.u8(1);
                self.id(origin);
                self.u32(request_id);
                self.id(dest);
                self.u8(hop_count);
                self.u8(msl.value());
            }
            Message::RouteReply { origin, dest, hop_count, dest_seq } => {
                self.u8(2);
                self.id(origin);
                self.id(dest);
                self.u8(hop_count);
                self.u32(dest_seq);
            }
            Message::Data { origin, dest, payload_tag } => {
                self.u8(3);
                self.id(origin);
                self.id(dest);
                self.u32(payload_tag);
            }
        }
    }
}

/// Inverse of [`canonical_bytes`]; `None` if `bytes` is not an encoding.
pub fn decode(bytes: &[u8]) -> Option<SystemState> {
    let mut dec = Decoder(bytes);
    let n = dec.len()?;
    let nodes = (0..n).map(|_| dec.node_state()).collect::<Option<Vec<_>>>()?;
    let c = dec.len()?;
    let mut channels = Vec::with_capacity(c);
    for _ in 0..c {
        let from = dec.id()?;
        let to = dec.id()?;
        let q = dec.len()?;
        let queue = (0..q).map(|_| dec.message()).collect::<Option<Vec<_>>>()?;
        channels.push(Channel { from, to, queue });
    }
    let phase = match dec.u8()? {
        0 => Phase::Discovery,
        1 => Phase::Routing,
        2 => Phase::Quiescent,
        _ => return None,
    };
    let origination_done = match dec.u8()? {
        0 => false,
        1 => true,
        _ => return None,
    };
    dec.0.is_empty().then_some(SystemState { nodes, channels, phase, origination_done })
}

struct Decoder<'a>(&'a [u8]);

impl Decoder<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let (head, rest) = self.0.split_first_chunk::<N>()?;
        self.0 = rest;
        Some(*head)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take::<1>().map(|[b]| b)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Option<u64> {
        self.take().map(u64::from_le_bytes)
    }

    fn len(&mut self) -> Option<usize> {
        self.u32().map(|v| v as usize)
    }

    fn id(&mut self) -> Option<NodeId> {
        self.u8().map(NodeId)
    }

    fn rank(&mut self) -> Option<Rank> {
        Rank::new(self.u8()?)
    }

    fn node_state(&mut self) -> Option<NodeState> {
        let mut node = NodeState::new(self.id()?);
        for _ in 0..self.len()? {
            let neighbor = self.id()?;
            let d_prime = Distance::from_picometers(self.u64()?);
            let rank = self.rank()?;
            node.neighbors.insert(neighbor, NeighborRecord { neighbor, d_prime, rank });
        }
        for _ in 0..self.len()? {
            let dest = self.id()?;
            let next_hop = self.id()?;
            let hop_count = self.u8()?;
            let dest_seq = self.u32()?;
            let next_hop_rank = self.rank()?;
            node.routes.insert(dest, RouteEntry { dest, next_hop, hop_count, dest_seq, next_hop_rank });
        }
        for _ in 0..self.len()? {
            let origin = self.id()?;
            let request_id = self.u32()?;
            let best = self.u8()?;
            node.seen_requests.insert((origin, request_id), best);
        }
        node.own_seq = self.u32()?;
        node.next_request_id = self.u32()?;
        node.pending_request = match self.u8()? {
            0 => None,
            1 => Some((self.id()?, self.u32()?)),
            _ => return None,
        };
        Some(node)
    }

    fn message(&mut self) -> Option<Message> {
        Some(match self.u8()? {
            0 => Message::Probe { sender: self.id()?, sent_ps: self.u64()? as i64 },
            1 => Message::RouteRequest {
                origin: self.id()?,
                request_id: self.u32()?,
                dest: self.id()?,
                hop_count: self.u8()?,
                msl: MsLevel::new(self.u8()?)?,
            },
            2 => Message::RouteReply {
                origin: self.id()?,
                dest: self.id()?,
                hop_count: self.u8()?,
                dest_seq: self.u32()?,
            },
            3 => Message::Data { origin: self.id()?, dest: self.id()?, payload_tag: self.u32()? },
            _ => return None,
        })
    }
}
