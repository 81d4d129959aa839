//! Explicit-state checking of a scenario against a fixed property catalogue.

mod explore;
pub mod fingerprint;
pub mod oracle;
pub mod property;
pub mod store;
pub mod trace;

use thiserror::Error;

use crate::netmodel::NetError;

pub use explore::{explore, ExploreOptions, Outcome, Verdict, Violation, DEFAULT_MEMORY_LIMIT};
pub use fingerprint::{canonical_bytes, decode, fingerprint, Fingerprint};
pub use oracle::{bfs_shortest_trusted, RankTable};
pub use property::{eval_property, parse_property_list, Property, PropertyContext, PropertyStatus};
pub use trace::{replay, replay_path, ReplayError, Trace, TraceStep};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("{0} can only be evaluated in a quiescent state")]
    NotQuiescent(property::Property),
    #[error("state store cannot hold any more states")]
    StoreFull,
    #[error(transparent)]
    Model(#[from] NetError),
}
