//! Trace reconstruction: fragments whose boundary signatures match are
//! chained into longer candidate traces, which can then be checked against the
//! program's control flow.

mod automaton;
mod chains;

use std::io::Write;

use serde::Serialize;

use crate::ir::Event;
use crate::monitor::{SignatureVector, FRAGMENT_FORMAT_VERSION};

pub use automaton::{
    build_event_automaton, build_event_automaton_with, cfg_feasible, EventAutomaton,
    FeasibilityChecker, FeasibilityError, DEFAULT_INLINE_LIMIT, DEFAULT_STATE_LIMIT,
};
pub use chains::{
    can_concat, concatenate, reconstruct, ChainBounds, ReconstructedTrace,
    DEFAULT_MAX_CHAIN_LENGTH, DEFAULT_MAX_OUTPUTS,
};

#[derive(Serialize)]
struct TraceRecord<'a> {
    v: u32,
    cshash: &'a str,
    start: &'a SignatureVector,
    events: &'a [Event],
    end: &'a SignatureVector,
    chain: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    feasible: Option<bool>,
}

/// Writes one JSON line per trace. `feasible[i]`, when given, is the
/// control-flow verdict for `traces[i]`.
pub fn write_traces(
    cshash: &str,
    traces: &[ReconstructedTrace],
    feasible: Option<&[bool]>,
    sink: &mut dyn Write,
) -> std::io::Result<usize> {
    for (i, t) in traces.iter().enumerate() {
        let rec = TraceRecord {
            v: FRAGMENT_FORMAT_VERSION,
            cshash,
            start: &t.start,
            events: &t.events,
            end: &t.end,
            chain: &t.chain,
            feasible: feasible.map(|f| f[i]),
        };
        serde_json::to_writer(&mut *sink, &rec)?;
        sink.write_all(b"\n")?;
    }
    Ok(traces.len())
}
