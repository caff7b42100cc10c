use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{
    eval_state_path, ConcreteState, PathError, PathValue, ResolvedPath, SubjectProgram, Type, Value,
};
use crate::symexec::linear::{Env, Pred, Symbol};
use crate::symexec::ConditionSet;

/// Three-valued outcome of one condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    T,
    F,
    U,
}

impl Outcome {
    pub fn as_char(self) -> char {
        match self {
            Outcome::T => 'T',
            Outcome::F => 'F',
            Outcome::U => 'U',
        }
    }
}

/// Outcomes of every condition, in condition-set order. Serialized as a
/// string over `T`, `F` and `U`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SignatureVector(pub Vec<Outcome>);

impl SignatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for SignatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.0 {
            write!(f, "{}", o.as_char())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid signature `{0}`: only T, F and U are allowed")]
pub struct SignatureParseError(pub String);

impl FromStr for SignatureVector {
    type Err = SignatureParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                'T' => Ok(Outcome::T),
                'F' => Ok(Outcome::F),
                'U' => Ok(Outcome::U),
                _ => Err(SignatureParseError(s.to_string())),
            })
            .collect::<Result<_, _>>()
            .map(SignatureVector)
    }
}

impl From<SignatureVector> for String {
    fn from(s: SignatureVector) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for SignatureVector {
    type Error = SignatureParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("condition `{condition}`: {source}")]
    Path {
        condition: String,
        source: PathError,
    },
    #[error("condition `{condition}` reads non-state symbol `{symbol}`")]
    NonState { condition: String, symbol: String },
    #[error("condition `{condition}` uses `{path}` as {expected}, but it has type {found}")]
    TypeMismatch {
        condition: String,
        path: String,
        expected: &'static str,
        found: String,
    },
}

/// A condition set bound to a program's declarations, ready to evaluate.
#[derive(Debug, Clone)]
pub struct CompiledConditions {
    set: ConditionSet,
    paths: BTreeMap<Symbol, ResolvedPath>,
    hash: String,
}

impl CompiledConditions {
    pub fn new(program: &SubjectProgram, set: ConditionSet) -> Result<Self, ConfigError> {
        let mut paths = BTreeMap::new();
        for c in set.iter() {
            let expected = match c.pred {
                Pred::Bool(_) => Type::Bool,
                _ => Type::Int,
            };
            for sym in c.pred.symbols() {
                let path = sym.state_path().ok_or_else(|| ConfigError::NonState {
                    condition: c.canonical.clone(),
                    symbol: sym.to_string(),
                })?;
                let resolved = path.resolve(program).map_err(|source| ConfigError::Path {
                    condition: c.canonical.clone(),
                    source,
                })?;
                if resolved.ty != expected {
                    return Err(ConfigError::TypeMismatch {
                        condition: c.canonical.clone(),
                        path: path.to_string(),
                        expected: if expected == Type::Int {
                            "an int"
                        } else {
                            "a bool"
                        },
                        found: program.type_name(resolved.ty),
                    });
                }
                paths.insert(sym.clone(), resolved);
            }
        }
        let hash = set.hash();
        Ok(CompiledConditions { set, paths, hash })
    }

    pub fn set(&self) -> &ConditionSet {
        &self.set
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// Evaluates every condition on `state`. A condition is `U` when a path
    /// it reads runs through null, or when it divides by zero.
    pub fn evaluate(&self, state: &ConcreteState) -> SignatureVector {
        let env = StateEnv {
            state,
            paths: &self.paths,
        };
        SignatureVector(
            self.set
                .iter()
                .map(|c| match c.pred.eval(&env) {
                    Some(true) => Outcome::T,
                    Some(false) => Outcome::F,
                    None => Outcome::U,
                })
                .collect(),
        )
    }
}

/// Free-function form of [`CompiledConditions::evaluate`].
pub fn evaluate_signature(
    conditions: &CompiledConditions,
    state: &ConcreteState,
) -> SignatureVector {
    conditions.evaluate(state)
}

struct StateEnv<'a> {
    state: &'a ConcreteState,
    paths: &'a BTreeMap<Symbol, ResolvedPath>,
}

impl StateEnv<'_> {
    fn read(&self, s: &Symbol) -> Option<Value> {
        match eval_state_path(self.state, self.paths.get(s)?) {
            PathValue::Value(v) => Some(v),
            PathValue::Unknown => None,
        }
    }
}

impl Env for StateEnv<'_> {
    fn int(&self, s: &Symbol) -> Option<BigInt> {
        match self.read(s)? {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    fn boolean(&self, s: &Symbol) -> Option<bool> {
        self.read(s)?.as_bool()
    }
}
