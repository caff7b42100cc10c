//! State paths: `Owner.global.field.field...`, the only way conditions read
//! program state.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ConcreteState, FieldRef, GlobalId, SubjectProgram, Type, Value};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct StatePath {
    /// `[owner, global, field, ...]`, at least two entries.
    pub segments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("malformed state path `{0}`")]
    Malformed(String),
    #[error("state path `{path}`: {message}")]
    Unresolved { path: String, message: String },
}

impl StatePath {
    pub fn new(segments: Vec<String>) -> Self {
        debug_assert!(segments.len() >= 2);
        StatePath { segments }
    }

    /// Extends the path by one field.
    pub fn child(&self, field: &str) -> StatePath {
        let mut segments = self.segments.clone();
        segments.push(field.to_string());
        StatePath { segments }
    }

    pub fn resolve(&self, program: &SubjectProgram) -> Result<ResolvedPath, PathError> {
        let err = |message: String| PathError::Unresolved {
            path: self.to_string(),
            message,
        };
        let owner = program
            .class_id(&self.segments[0])
            .ok_or_else(|| err(format!("unknown class `{}`", self.segments[0])))?;
        let global = program
            .find_global(owner, &self.segments[1])
            .ok_or_else(|| err(format!("unknown global `{}`", self.segments[1])))?;
        let mut ty = Type::Ref(program.global(global).class);
        let mut fields = Vec::new();
        for name in &self.segments[2..] {
            let Type::Ref(class) = ty else {
                return Err(err(format!("`{name}` selected from a non-object value")));
            };
            let index = program
                .class(class)
                .fields
                .iter()
                .position(|f| &f.name == name)
                .ok_or_else(|| {
                    err(format!(
                        "class `{}` has no field `{name}`",
                        program.class(class).name
                    ))
                })?;
            let f = FieldRef { class, index };
            ty = program.field(f).ty;
            fields.push(f);
        }
        Ok(ResolvedPath { global, fields, ty })
    }
}

impl fmt::Display for StatePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("."))
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

impl FromStr for StatePath {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let segments: Vec<String> = s.split('.').map(str::to_string).collect();
        if segments.len() < 2 || !segments.iter().all(|seg| is_ident(seg)) {
            return Err(PathError::Malformed(s.to_string()));
        }
        Ok(StatePath { segments })
    }
}

impl From<StatePath> for String {
    fn from(p: StatePath) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for StatePath {
    type Error = PathError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A state path bound to a particular program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedPath {
    pub global: GlobalId,
    pub fields: Vec<FieldRef>,
    /// Type of the value the path denotes.
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathValue {
    Value(Value),
    /// Some prefix of the path is null.
    Unknown,
}

/// Reads a path in a concrete state.
pub fn eval_state_path(state: &ConcreteState, path: &ResolvedPath) -> PathValue {
    let mut current = &state.globals[path.global.0];
    for f in &path.fields {
        match current {
            Value::Ref(id) => current = &state.object(*id).fields[f.index],
            _ => return PathValue::Unknown,
        }
    }
    PathValue::Value(current.clone())
}
