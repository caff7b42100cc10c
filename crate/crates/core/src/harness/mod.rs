//! End-to-end pipeline and its evaluation against ground truth.

mod generator;
mod metrics;
mod oracle;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::callgraph::{build_call_graph, relevant_set, CallGraphError, DEFAULT_DEPTH};
use crate::ir::{GroundTruthTrace, SubjectProgram, Termination};
use crate::monitor::{
    run_monitored_with, CompiledConditions, ConfigError, FragmentSet, MonitoredRun, PolicyError,
    RecordingPolicy, RunOptions,
};
use crate::reconstruct::{
    build_event_automaton, reconstruct, ChainBounds, FeasibilityChecker, FeasibilityError,
    ReconstructedTrace,
};
use crate::symexec::{synthesize, ConditionSet, SymConfig, SymExecError};

pub use generator::{
    generate_arith_subject, generate_source, generate_subject, GeneratorError, GeneratorParams,
};
pub use metrics::{coverage, exactness, precision, Metrics, SubstringIndex};
pub use oracle::{matching_paths, ConcreteEnv};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    CallGraph(#[from] CallGraphError),
    #[error(transparent)]
    SymExec(#[from] SymExecError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("at least one run is required")]
    NoRuns,
}

/// Everything except the policy and the number of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub depth: usize,
    pub loop_bound: usize,
    pub inline_depth: usize,
    pub max_chain_length: usize,
    pub max_outputs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let sym = SymConfig::default();
        let bounds = ChainBounds::default();
        EvalConfig {
            depth: DEFAULT_DEPTH,
            loop_bound: sym.loop_bound,
            inline_depth: sym.inline_depth,
            max_chain_length: bounds.max_chain_length,
            max_outputs: bounds.max_outputs,
        }
    }
}

impl EvalConfig {
    pub fn sym(&self) -> SymConfig {
        SymConfig {
            loop_bound: self.loop_bound,
            inline_depth: self.inline_depth,
            ..SymConfig::default()
        }
    }

    pub fn bounds(&self) -> ChainBounds {
        ChainBounds {
            max_chain_length: self.max_chain_length,
            max_outputs: self.max_outputs,
        }
    }
}

/// Steps 1 and 2: the condition set for `program`'s interfaces.
pub fn synthesize_conditions(
    program: &SubjectProgram,
    depth: usize,
    sym: &SymConfig,
) -> Result<ConditionSet, HarnessError> {
    let cg = build_call_graph(program);
    let relevance = relevant_set(program, &cg, &program.interfaces, depth)?;
    Ok(synthesize(program, &relevance, sym)?)
}

/// Monitors runs with seeds `0..n_runs` in parallel; results are in seed
/// order.
pub fn monitor_runs(
    program: &SubjectProgram,
    conditions: &CompiledConditions,
    policy: &RecordingPolicy,
    n_runs: u64,
) -> Vec<MonitoredRun> {
    let options = RunOptions::default();
    (0..n_runs)
        .into_par_iter()
        .map(|seed| run_monitored_with(program, conditions, policy, seed, &options))
        .collect()
}

/// The full output of one evaluation.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub conditions: ConditionSet,
    pub fragments: FragmentSet,
    pub traces: Vec<ReconstructedTrace>,
    pub truth: Vec<GroundTruthTrace>,
}

/// Runs the whole pipeline and measures it.
pub fn evaluate(
    program: &SubjectProgram,
    n_runs: u64,
    policy: &RecordingPolicy,
    config: &EvalConfig,
) -> Result<Metrics, HarnessError> {
    Ok(evaluate_report(program, n_runs, policy, config)?.metrics)
}

pub fn evaluate_report(
    program: &SubjectProgram,
    n_runs: u64,
    policy: &RecordingPolicy,
    config: &EvalConfig,
) -> Result<EvalReport, HarnessError> {
    if n_runs == 0 {
        return Err(HarnessError::NoRuns);
    }
    policy.validate()?;
    let set = synthesize_conditions(program, config.depth, &config.sym())?;
    let compiled = CompiledConditions::new(program, set.clone())?;
    let runs = monitor_runs(program, &compiled, policy, n_runs);

    let mut fragments = FragmentSet::new(compiled.hash());
    let mut truth = Vec::with_capacity(runs.len());
    let mut overhead = 0.0;
    let mut evaluations = 0;
    for run in runs {
        overhead += run.stats.recorded_fraction;
        evaluations += run.stats.signature_evaluations;
        fragments.fragments.extend(run.fragments.fragments);
        truth.push(run.trace);
    }

    let traces = reconstruct(&fragments, &config.bounds());
    let automaton = build_event_automaton(program);
    let mut checker = FeasibilityChecker::new(&automaton);
    let index = SubstringIndex::new(truth.iter().map(|t| t.events.as_slice()));

    let audit_ok = traces
        .iter()
        .filter(|t| junctions_hold(&fragments, t))
        .count();
    let metrics = Metrics {
        precision: precision(&mut checker, &traces)?,
        exactness: exactness(&index, &traces),
        coverage: coverage(&truth, &traces),
        overhead_proxy: overhead / n_runs as f64,
        runs: truth.len(),
        faulted_runs: truth
            .iter()
            .filter(|t| t.termination != Termination::Normal)
            .count(),
        conditions: set.len(),
        fragments: fragments.len(),
        reconstructed: traces.len(),
        multi_fragment: traces.iter().filter(|t| t.is_multi_fragment()).count(),
        longest_chain: traces.iter().map(|t| t.chain.len()).max().unwrap_or(0),
        signature_evaluations: evaluations,
        junction_audit: if traces.is_empty() {
            1.0
        } else {
            audit_ok as f64 / traces.len() as f64
        },
    };
    Ok(EvalReport {
        metrics,
        conditions: set,
        fragments,
        traces,
        truth,
    })
}

/// Recomputes a trace from its chain and checks every junction.
pub fn junctions_hold(set: &FragmentSet, t: &ReconstructedTrace) -> bool {
    let frags: Vec<_> = t.chain.iter().map(|&i| &set.fragments[i]).collect();
    let events: Vec<_> = frags.iter().flat_map(|f| f.events.iter()).collect();
    frags
        .windows(2)
        .zip(&t.junctions)
        .all(|(w, j)| w[0].end == *j && w[1].start == *j)
        && t.junctions.len() + 1 == frags.len()
        && events.len() == t.events.len()
        && events.into_iter().eq(t.events.iter())
        && frags[0].start == t.start
        && frags[frags.len() - 1].end == t.end
}

#[cfg(test)]
mod tests;
