//! Counterexample traces: text form and replay.
//!
//! One step per line, `<index> <action> <fingerprint-hex>`, where the
//! fingerprint is that of the state reached by the step and action is
//! `originate` or `deliver <from> <to>`. Indices count from 1. Blank lines
//! and `#` comments are ignored when reading.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::fingerprint::{fingerprint, Fingerprint};
use crate::netmodel::{self, Action, NetError, ScenarioConfig, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceStep {
    pub index: usize,
    pub action: Action,
    pub fingerprint: Fingerprint,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{} {} {}", step.index, step.action, step.fingerprint)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

impl FromStr for Trace {
    type Err = TraceParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| TraceParseError { line: i + 1, message };
            let words: Vec<&str> = line.split_whitespace().collect();
            if words.len() < 3 {
                return Err(err(format!("expected `<index> <action> <fingerprint>`, got `{line}`")));
            }
            let index = words[0]
                .parse::<usize>()
                .map_err(|_| err(format!("bad step index `{}`", words[0])))?;
            let action = words[1..words.len() - 1]
                .join(" ")
                .parse::<Action>()
                .map_err(|e| err(e.to_string()))?;
            let fp_text = words[words.len() - 1];
            if fp_text.len() != 16 {
                return Err(err(format!("fingerprint `{fp_text}` must be 16 hex digits")));
            }
            let fingerprint = fp_text
                .parse::<Fingerprint>()
                .map_err(|_| err(format!("bad fingerprint `{fp_text}`")))?;
            steps.push(TraceStep { index, action, fingerprint });
        }
        Ok(Trace { steps })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {index}: expected index {expected}")]
    BadIndex { index: usize, expected: usize },
    #[error("step {index}: action `{action}` is not enabled")]
    Disabled { index: usize, action: Action },
    #[error("step {index}: fingerprint mismatch, trace has {expected}, replay reached {actual}")]
    FingerprintMismatch {
        index: usize,
        expected: Fingerprint,
        actual: Fingerprint,
    },
    #[error(transparent)]
    Model(#[from] NetError),
}

/// Every state along the trace, starting with the post-discovery state.
pub fn replay_path(config: &ScenarioConfig, trace: &Trace) -> Result<Vec<SystemState>, ReplayError> {
    let mut states = vec![netmodel::routing_start(config)?];
    for (pos, step) in trace.steps.iter().enumerate() {
        if step.index != pos + 1 {
            return Err(ReplayError::BadIndex { index: step.index, expected: pos + 1 });
        }
        let current = states.last().expect("path starts non-empty");
        let next = match netmodel::apply_action(current, step.action, config) {
            Ok(next) => next,
            Err(NetError::Disabled(action)) => {
                return Err(ReplayError::Disabled { index: step.index, action })
            }
            Err(e) => return Err(e.into()),
        };
        let (actual, _) = fingerprint(&next);
        if actual != step.fingerprint {
            return Err(ReplayError::FingerprintMismatch {
                index: step.index,
                expected: step.fingerprint,
                actual,
            });
        }
        states.push(next);
    }
    Ok(states)
}

/// Replays the trace and returns the final state.
pub fn replay(config: &ScenarioConfig, trace: &Trace) -> Result<SystemState, ReplayError> {
    Ok(replay_path(config, trace)?.pop().expect("path starts non-empty"))
}
