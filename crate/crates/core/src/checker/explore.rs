//! Breadth-first exhaustive exploration.

use std::collections::VecDeque;
use std::mem::size_of;

use super::fingerprint::{canonical_bytes, decode};
use super::property::{eval_unchecked, Property, PropertyContext, PropertyStatus};
use super::store::{StateId, StateStore};
use super::trace::{Trace, TraceStep};
use super::CheckError;
use crate::netmodel::{self, ScenarioConfig, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Holds,
    Violated,
    BoundReached,
    ResourceExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub property: Property,
    pub description: String,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    /// One witness per violated property, in discovery order. Without
    /// `keep_going` there is at most one.
    pub violations: Vec<Violation>,
    pub states_explored: u64,
    pub max_depth_seen: usize,
    /// The whole reachable space was visited: no stop at a violation, no
    /// depth truncation, no resource ceiling.
    pub complete: bool,
}

impl Verdict {
    pub fn violated_property(&self) -> Option<Property> {
        self.violations.first().map(|v| v.property)
    }

    pub fn trace(&self) -> Option<&Trace> {
        self.violations.first().map(|v| &v.trace)
    }
}

pub const DEFAULT_MEMORY_LIMIT: usize = 2 << 30;

#[derive(Debug, Clone)]
pub struct ExploreOptions {
    /// States at this depth are checked but not expanded.
    pub max_depth: usize,
    /// Keep exploring after a violation, collecting one witness per property.
    pub keep_going: bool,
    /// Disable only for small scenarios: without it the search is a tree.
    pub dedup: bool,
    /// Stored-state ceiling; exceeding it yields `ResourceExhausted`.
    pub state_limit: usize,
    /// Approximate memory ceiling in bytes for the visited set and the
    /// search queue; exceeding it yields `ResourceExhausted`.
    pub memory_limit: usize,
    pub hasher: Option<fn(&[u8]) -> u64>,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            max_depth: netmodel::DEFAULT_MAX_DEPTH,
            keep_going: false,
            dedup: true,
            state_limit: 50_000_000,
            memory_limit: DEFAULT_MEMORY_LIMIT,
            hasher: None,
        }
    }
}

impl ExploreOptions {
    pub fn for_config(config: &ScenarioConfig) -> Self {
        ExploreOptions { max_depth: config.max_depth, ..Default::default() }
    }
}

/// Explores every interleaving reachable from the post-discovery state,
/// checking each dequeued state against `props`. Stops at the first
/// violation unless `keep_going` is set; BFS order makes that violation's
/// trace a shortest one.
pub fn explore(
    config: &ScenarioConfig,
    props: &[Property],
    options: &ExploreOptions,
) -> Result<Verdict, CheckError> {
    let root = netmodel::routing_start(config)?;
    let ctx = PropertyContext::new(config, &root);
    let mut store = match options.hasher {
        Some(h) => StateStore::with_hasher(options.dedup, h),
        None => StateStore::new(options.dedup),
    };
    let root_id = store.insert(canonical_bytes(&root), None).ok_or(CheckError::StoreFull)?;

    // States live only as bytes in the store; the queue holds ids.
    let mut queue: VecDeque<(StateId, usize)> = VecDeque::new();
    queue.push_back((root_id, 0));
    drop(root);

    let mut verdict = Verdict {
        outcome: Outcome::Holds,
        violations: Vec::new(),
        states_explored: 0,
        max_depth_seen: 0,
        complete: false,
    };
    let mut truncated = false;

    while let Some((id, depth)) = queue.pop_front() {
        let state: SystemState = decode(store.bytes(id)).expect("store holds canonical encodings");
        verdict.states_explored += 1;
        verdict.max_depth_seen = verdict.max_depth_seen.max(depth);

        let next = netmodel::successors(&state, config)?;
        let quiescent = next.is_empty();
        for &prop in props {
            if prop.quiescent_only() && !quiescent {
                continue;
            }
            if verdict.violations.iter().any(|v| v.property == prop) {
                continue;
            }
            if let PropertyStatus::Violated(description) = eval_unchecked(&state, prop, config, &ctx) {
                verdict.violations.push(Violation {
                    property: prop,
                    description,
                    trace: trace_to(&store, id),
                });
                verdict.outcome = Outcome::Violated;
                if !options.keep_going {
                    return Ok(verdict);
                }
            }
        }

        if depth >= options.max_depth {
            truncated |= !quiescent;
            continue;
        }
        for (action, succ) in next {
            let queue_bytes = 2 * queue.capacity() * size_of::<(StateId, usize)>();
            if store.len() >= options.state_limit || store.peak_bytes() + queue_bytes > options.memory_limit {
                verdict.outcome = Outcome::ResourceExhausted;
                return Ok(verdict);
            }
            if let Some(child) = store.insert(canonical_bytes(&succ), Some((id, action))) {
                if queue.try_reserve(1).is_err() {
                    verdict.outcome = Outcome::ResourceExhausted;
                    return Ok(verdict);
                }
                queue.push_back((child, depth + 1));
            }
        }
    }

    if verdict.violations.is_empty() && truncated {
        verdict.outcome = Outcome::BoundReached;
    }
    verdict.complete = !truncated;
    Ok(verdict)
}

fn trace_to(store: &StateStore, id: StateId) -> Trace {
    Trace {
        steps: store
            .path_to(id)
            .into_iter()
            .enumerate()
            .map(|(i, (action, fingerprint))| TraceStep { index: i + 1, action, fingerprint })
            .collect(),
    }
}
