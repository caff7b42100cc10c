//! Runtime monitoring: runs a program under a start/stop recording policy
//! and cuts its event stream into fragments, each bracketed by the
//! signature of the state where recording started and stopped.
//!
//! Fragments are exchanged as JSON lines, one fragment per line. Every line
//! carries the hash of the condition set its signatures were computed
//! against, so files from different installations can be merged only when
//! their signatures are comparable.

mod policy;
mod signature;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{
    interpret, ConcreteState, Event, ExecLimits, GroundTruthTrace, Observer, SubjectProgram,
    Termination,
};

pub use policy::{
    Length, PolicyError, PolicyKind, RecordingPolicy, DEFAULT_BUDGET, DEFAULT_OFF_MEAN,
    DEFAULT_ON_MEAN,
};
pub use signature::{
    evaluate_signature, CompiledConditions, ConfigError, Outcome, SignatureParseError,
    SignatureVector,
};

use policy::PolicyState;

/// Version written to the `v` field of fragment records.
pub const FRAGMENT_FORMAT_VERSION: u32 = 1;

/// Installation id used when none is given.
pub const DEFAULT_INSTALLATION: &str = "local";

/// Where a fragment came from. Only evaluation code may look at the indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FragmentMeta {
    pub run: u64,
    pub inst: String,
    /// Trace index of the first event.
    pub start_index: Option<usize>,
    /// Trace index of the last event.
    pub end_index: Option<usize>,
}

/// A gap-free slice of one run's events with the signatures around it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub start: SignatureVector,
    pub events: Vec<Event>,
    pub end: SignatureVector,
    pub meta: FragmentMeta,
}

/// Fragments computed against one condition set. The position of a
/// fragment in `fragments` is its id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FragmentSet {
    pub cshash: String,
    pub fragments: Vec<Fragment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("condition-set hash mismatch: expected {expected}, found {found}")]
pub struct HashMismatch {
    pub expected: String,
    pub found: String,
}

impl FragmentSet {
    pub fn new(cshash: impl Into<String>) -> Self {
        FragmentSet {
            cshash: cshash.into(),
            fragments: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    /// Appends the fragments of `other`. Sets computed against different
    /// condition sets are refused.
    pub fn merge(&mut self, other: FragmentSet) -> Result<(), HashMismatch> {
        if other.cshash != self.cshash {
            return Err(HashMismatch {
                expected: self.cshash.clone(),
                found: other.cshash,
            });
        }
        self.fragments.extend(other.fragments);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OverheadStats {
    pub events_recorded: usize,
    pub events_total: usize,
    pub signature_evaluations: usize,
    pub recorded_fraction: f64,
}

/// Everything one monitored run produced.
#[derive(Debug, Clone)]
pub struct MonitoredRun {
    pub fragments: FragmentSet,
    pub stats: OverheadStats,
    /// The unmonitored view of the same run, for evaluation.
    pub trace: GroundTruthTrace,
}

/// Per-run options that do not affect recording decisions.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub installation: String,
    pub limits: ExecLimits,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            installation: DEFAULT_INSTALLATION.to_string(),
            limits: ExecLimits::default(),
        }
    }
}

/// Runs `program` with `input_seed` under `policy`. The run id is the seed.
pub fn run_monitored(
    program: &SubjectProgram,
    conditions: &CompiledConditions,
    policy: &RecordingPolicy,
    input_seed: u64,
) -> MonitoredRun {
    run_monitored_with(
        program,
        conditions,
        policy,
        input_seed,
        &RunOptions::default(),
    )
}

pub fn run_monitored_with(
    program: &SubjectProgram,
    conditions: &CompiledConditions,
    policy: &RecordingPolicy,
    input_seed: u64,
    options: &RunOptions,
) -> MonitoredRun {
    let mut rec = Recorder {
        conditions,
        policy: PolicyState::new(policy, input_seed),
        run: input_seed,
        inst: &options.installation,
        open: None,
        memo: None,
        fragments: Vec::new(),
        recorded: 0,
        evaluations: 0,
        total: 0,
    };
    let trace = interpret(program, input_seed, options.limits, &mut rec);
    let stats = OverheadStats {
        events_recorded: rec.recorded,
        events_total: rec.total,
        signature_evaluations: rec.evaluations,
        recorded_fraction: if rec.total == 0 {
            0.0
        } else {
            rec.recorded as f64 / rec.total as f64
        },
    };
    MonitoredRun {
        fragments: FragmentSet {
            cshash: conditions.hash().to_string(),
            fragments: rec.fragments,
        },
        stats,
        trace,
    }
}

struct Open {
    start: SignatureVector,
    start_index: usize,
    events: Vec<Event>,
}

struct Recorder<'a> {
    conditions: &'a CompiledConditions,
    policy: PolicyState<'a>,
    run: u64,
    inst: &'a str,
    open: Option<Open>,
    /// Signature at the most recently evaluated boundary.
    memo: Option<(usize, SignatureVector)>,
    fragments: Vec<Fragment>,
    recorded: usize,
    evaluations: usize,
    total: usize,
}

impl Recorder<'_> {
    /// Signature of `state`, which is the state at event boundary `index`.
    fn signature(&mut self, index: usize, state: &ConcreteState) -> SignatureVector {
        if let Some((i, sig)) = &self.memo {
            if *i == index {
                return sig.clone();
            }
        }
        self.evaluations += 1;
        let sig = self.conditions.evaluate(state);
        self.memo = Some((index, sig.clone()));
        sig
    }

    fn close(&mut self, index: usize, state: &ConcreteState) {
        if let Some(open) = self.open.take() {
            let end = self.signature(index, state);
            let len = open.events.len();
            self.fragments.push(Fragment {
                start: open.start,
                events: open.events,
                end,
                meta: FragmentMeta {
                    run: self.run,
                    inst: self.inst.to_string(),
                    start_index: Some(open.start_index),
                    end_index: Some(open.start_index + len - 1),
                },
            });
        }
    }
}

impl Observer for Recorder<'_> {
    fn on_event(&mut self, index: usize, event: &Event, state: &ConcreteState) {
        self.total = index + 1;
        let d = self.policy.decide(index, self.recorded);
        if self.open.is_some() && (!d.record || d.split) {
            self.close(index, state);
        }
        if d.record {
            if self.open.is_none() {
                let start = self.signature(index, state);
                self.open = Some(Open {
                    start,
                    start_index: index,
                    events: Vec::new(),
                });
            }
            if let Some(open) = self.open.as_mut() {
                open.events.push(event.clone());
            }
            self.recorded += 1;
        }
    }

    fn on_finish(&mut self, state: &ConcreteState, _: Termination) {
        let end = self.total;
        self.close(end, state);
    }
}

#[derive(Debug, Error)]
pub enum FragmentFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: unsupported fragment format version {found}")]
    Version { line: usize, found: u32 },
    #[error("line {line}: {source}")]
    Hash { line: usize, source: HashMismatch },
    #[error("line {line}: fragment has no events")]
    Empty { line: usize },
    #[error("line {line}: signature length {found}, expected {expected}")]
    SignatureLength {
        line: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct Record {
    v: u32,
    cshash: String,
    run: u64,
    inst: String,
    start: SignatureVector,
    events: Vec<Event>,
    end: SignatureVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    i0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    i1: Option<usize>,
}

/// Writes one JSON line per fragment and returns the number of records.
/// With `with_indices` false the trace indices are left out.
pub fn write_fragments(
    set: &FragmentSet,
    sink: &mut dyn Write,
    with_indices: bool,
) -> std::io::Result<usize> {
    for f in &set.fragments {
        let rec = Record {
            v: FRAGMENT_FORMAT_VERSION,
            cshash: set.cshash.clone(),
            run: f.meta.run,
            inst: f.meta.inst.clone(),
            start: f.start.clone(),
            events: f.events.clone(),
            end: f.end.clone(),
            i0: f.meta.start_index.filter(|_| with_indices),
            i1: f.meta.end_index.filter(|_| with_indices),
        };
        serde_json::to_writer(&mut *sink, &rec)?;
        sink.write_all(b"\n")?;
    }
    Ok(set.fragments.len())
}

/// Reads fragment records, refusing any computed against a condition set
/// other than the one hashing to `cshash`. Blank lines are skipped, so
/// files from several installations may simply be concatenated.
pub fn read_fragments(
    source: &mut dyn BufRead,
    cshash: &str,
    signature_len: usize,
) -> Result<FragmentSet, FragmentFileError> {
    let mut set = FragmentSet::new(cshash);
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|source| FragmentFileError::Json {
                line: line_no,
                source,
            })?;
        if rec.v != FRAGMENT_FORMAT_VERSION {
            return Err(FragmentFileError::Version {
                line: line_no,
                found: rec.v,
            });
        }
        if rec.cshash != cshash {
            return Err(FragmentFileError::Hash {
                line: line_no,
                source: HashMismatch {
                    expected: cshash.to_string(),
                    found: rec.cshash,
                },
            });
        }
        if rec.events.is_empty() {
            return Err(FragmentFileError::Empty { line: line_no });
        }
        for sig in [&rec.start, &rec.end] {
            if sig.len() != signature_len {
                return Err(FragmentFileError::SignatureLength {
                    line: line_no,
                    expected: signature_len,
                    found: sig.len(),
                });
            }
        }
        set.fragments.push(Fragment {
            start: rec.start,
            events: rec.events,
            end: rec.end,
            meta: FragmentMeta {
                run: rec.run,
                inst: rec.inst,
                start_index: rec.i0,
                end_index: rec.i1,
            },
        });
    }
    Ok(set)
}
