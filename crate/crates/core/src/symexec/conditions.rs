//! Condition sets and their versioned text file format.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::exec::PathCondition;
use super::linear::{compare, LinExpr, NormLit, Pred, Symbol};
use crate::ir::ast::{SExpr, SExprKind};
use crate::ir::{BinOp, StatePath, UnOp};

/// First line of every condition file.
pub const CONDITIONS_MAGIC: &str = "# fragmon-conditions v1";

/// A state-only atomic predicate, stored in its canonical orientation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub pred: Pred,
    pub canonical: String,
}

/// Conditions sorted by canonical form; positions index signature vectors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConditionSet {
    conditions: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionsHeader {
    pub program_hash: Option<String>,
    pub tool_version: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditionFileError {
    #[error("not a condition file (expected first line `{CONDITIONS_MAGIC}`)")]
    BadMagic,
    #[error("malformed header line {line}: `{text}`")]
    BadHeader { line: usize, text: String },
    #[error("header announces {expected} conditions, file has {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("line {line}: cannot parse condition `{text}`: {message}")]
    Parse {
        line: usize,
        text: String,
        message: String,
    },
    #[error("line {line}: `{text}` is not canonical (canonical form: `{canonical}`)")]
    NonCanonical {
        line: usize,
        text: String,
        canonical: String,
    },
    #[error("line {line}: conditions must be unique and sorted")]
    Unsorted { line: usize },
}

/// State-only clauses of `paths`, deduplicated up to negation and sorted.
pub fn extract_conditions<'a>(paths: impl IntoIterator<Item = &'a PathCondition>) -> ConditionSet {
    ConditionSet::new(
        paths
            .into_iter()
            .flat_map(|p| p.clauses.iter())
            .filter(|l| l.pred.is_state_only())
            .map(|l| l.pred.clone()),
    )
}

impl ConditionSet {
    /// Builds a set from normalized predicates.
    pub fn new(preds: impl IntoIterator<Item = Pred>) -> Self {
        let unique: BTreeMap<String, Pred> =
            preds.into_iter().map(|p| (p.to_string(), p)).collect();
        ConditionSet {
            conditions: unique
                .into_iter()
                .map(|(canonical, pred)| Condition { pred, canonical })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn iter(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter()
    }

    pub fn canonical_forms(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .map(|c| c.canonical.as_str())
            .collect()
    }

    /// Short content hash identifying the set; fragments carry it.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.conditions {
            h.update(c.canonical.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    pub fn to_file_string(&self, program_hash: Option<&str>) -> String {
        let mut out = format!(
            "{CONDITIONS_MAGIC}\n# program: {}\n# tool: fragmon {}\n# count: {}\n",
            program_hash.unwrap_or("-"),
            env!("CARGO_PKG_VERSION"),
            self.len()
        );
        for c in &self.conditions {
            out.push_str(&c.canonical);
            out.push('\n');
        }
        out
    }

    pub fn parse_file(text: &str) -> Result<(ConditionSet, ConditionsHeader), ConditionFileError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim_end() == CONDITIONS_MAGIC => {}
            _ => return Err(ConditionFileError::BadMagic),
        }
        let mut header = ConditionsHeader {
            program_hash: None,
            tool_version: String::new(),
            count: 0,
        };
        let mut count = None;
        let mut conditions: Vec<Condition> = Vec::new();
        for (i, raw) in lines {
            let line = i + 1;
            let text = raw.trim_end();
            if let Some(rest) = text.strip_prefix('#') {
                let bad = || ConditionFileError::BadHeader {
                    line,
                    text: text.to_string(),
                };
                let (key, value) = rest.trim().split_once(':').ok_or_else(bad)?;
                let value = value.trim();
                match key.trim() {
                    "program" if value != "-" => header.program_hash = Some(value.to_string()),
                    "program" => {}
                    "tool" => header.tool_version = value.to_string(),
                    "count" => count = Some(value.parse::<usize>().map_err(|_| bad())?),
                    _ => return Err(bad()),
                }
                continue;
            }
            if text.is_empty() {
                continue;
            }
            let pred = parse_condition(text).map_err(|message| ConditionFileError::Parse {
                line,
                text: text.to_string(),
                message,
            })?;
            let canonical = pred.to_string();
            if canonical != text {
                return Err(ConditionFileError::NonCanonical {
                    line,
                    text: text.to_string(),
                    canonical,
                });
            }
            if conditions.last().is_some_and(|c| c.canonical >= canonical) {
                return Err(ConditionFileError::Unsorted { line });
            }
            conditions.push(Condition { pred, canonical });
        }
        let expected = count.ok_or(ConditionFileError::BadHeader {
            line: 0,
            text: "missing `# count:` line".into(),
        })?;
        if expected != conditions.len() {
            return Err(ConditionFileError::CountMismatch {
                expected,
                found: conditions.len(),
            });
        }
        header.count = expected;
        Ok((ConditionSet { conditions }, header))
    }
}

/// Parses one condition in canonical orientation.
pub fn parse_condition(text: &str) -> Result<Pred, String> {
    let e = crate::ir::parser::parse_expr_text(text).map_err(|e| e.to_string())?;
    match &e.kind {
        SExprKind::Binary(op, a, b) if op.is_comparison() => {
            match compare(*op, &to_lin(a)?, &to_lin(b)?) {
                NormLit::Lit(l) if l.positive => Ok(l.pred),
                NormLit::Lit(l) => Err(format!("negated orientation; write `{}`", l.pred)),
                NormLit::Const(v) => Err(format!("comparison is constant ({v})")),
            }
        }
        SExprKind::Member(..) => Ok(Pred::Bool(state_symbol(&e)?)),
        _ => Err("expected a comparison or a boolean state path".into()),
    }
}

fn state_symbol(e: &SExpr) -> Result<Symbol, String> {
    fn segments(e: &SExpr, out: &mut Vec<String>) -> Result<(), String> {
        match &e.kind {
            SExprKind::Name(n) => {
                out.push(n.clone());
                Ok(())
            }
            SExprKind::Member(base, field) => {
                segments(base, out)?;
                out.push(field.clone());
                Ok(())
            }
            _ => Err("state paths are `Class.global.field...`".into()),
        }
    }
    let mut segs = Vec::new();
    segments(e, &mut segs)?;
    if segs.len() < 2 {
        return Err(format!("`{}` is not a state path", segs.join(".")));
    }
    Ok(Symbol::from_state_path(&StatePath::new(segs)))
}

fn to_lin(e: &SExpr) -> Result<LinExpr, String> {
    Ok(match &e.kind {
        SExprKind::Int(v) => LinExpr::constant(v.clone()),
        SExprKind::Paren(x) => to_lin(x)?,
        SExprKind::Unary(UnOp::Neg, x) => to_lin(x)?.neg(),
        SExprKind::Name(_) | SExprKind::Member(..) => LinExpr::symbol(state_symbol(e)?),
        SExprKind::Binary(op, a, b) => {
            let (a, b) = (to_lin(a)?, to_lin(b)?);
            match op {
                BinOp::Add => a.add(&b),
                BinOp::Sub => a.sub(&b),
                BinOp::Mul => a.mul(&b),
                BinOp::Div => match b.as_constant() {
                    Some(d) if num::Zero::is_zero(d) => return Err("division by zero".into()),
                    Some(d) => a.div_const(d),
                    None => a.div_nonconst(&b),
                },
                _ => return Err(format!("operator `{}` inside an integer term", op.symbol())),
            }
        }
        _ => return Err("expected an integer term".into()),
    })
}
