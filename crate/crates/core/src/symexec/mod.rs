//! Condition synthesis: symbolic execution of the relevant methods and
//! distillation of their branch clauses into a state-only condition set.

mod conditions;
mod exec;
pub mod linear;
pub mod solver;

use rayon::prelude::*;
use thiserror::Error;

use crate::callgraph::RelevanceSet;
use crate::ir::SubjectProgram;

pub use conditions::{
    extract_conditions, parse_condition, Condition, ConditionFileError, ConditionSet,
    ConditionsHeader, CONDITIONS_MAGIC,
};
pub use exec::{
    symbolic_execute, PathCondition, SymConfig, DEFAULT_INLINE_DEPTH, DEFAULT_LOOP_BOUND,
    DEFAULT_MAX_PATHS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymExecError {
    #[error("path explosion in {method}: more than {limit} paths")]
    PathExplosion { method: String, limit: usize },
}

/// Union of the extracted conditions of every relevant method.
pub fn synthesize(
    program: &SubjectProgram,
    relevance: &RelevanceSet,
    config: &SymConfig,
) -> Result<ConditionSet, SymExecError> {
    let methods: Vec<_> = relevance.methods.iter().copied().collect();
    let per_method: Vec<Vec<PathCondition>> = methods
        .par_iter()
        .map(|m| symbolic_execute(program, *m, config))
        .collect::<Result<_, _>>()?;
    Ok(extract_conditions(per_method.iter().flatten()))
}

#[cfg(test)]
mod tests;
