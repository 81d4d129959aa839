//! Executable model of ranked neighbor discovery (RND) with security-adaptive
//! AODV routing, plus an explicit-state checker that explores every message
//! interleaving of a scenario and reports replayable counterexamples.
//!
//! Layering, bottom up:
//!
//! - [`rnd`]: timing gate, distance estimate and trust ranks.
//! - [`saodv`]: the per-node routing state machine.
//! - [`netmodel`]: topology, FIFO channels, the wormhole tunnel and the
//!   global transition relation.
//! - [`checker`]: breadth-first exploration, the property catalogue, traces.
//! - [`cli`]: scenario files, command implementations, PROMELA export.

use std::fmt;

pub mod checker;
pub mod cli;
pub mod netmodel;
pub mod rnd;
pub mod saodv;

/// Index of a node in a scenario, `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u8);

impl NodeId {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
