//! The subject language: a small class-based imperative language whose
//! programs are parsed, type-checked, pretty-printed and interpreted here.
//!
//! Programs are line-oriented text (`.subj`). The grammar is documented in
//! `docs/grammar.md`. After parsing, names are resolved into the index-based
//! representation below, which is what every analysis consumes.

pub(crate) mod ast;
mod check;
mod interp;
mod lexer;
pub(crate) mod parser;
mod path;
mod printer;

use std::collections::BTreeSet;
use std::fmt;

use num::BigInt;
use thiserror::Error;

pub use interp::{
    interpret, ConcreteState, ExecLimits, Fault, GroundTruthTrace, Interpreter, MethodRun, ObjId,
    Object, Observer, Termination, Value,
};
pub use path::{eval_state_path, PathError, PathValue, ResolvedPath, StatePath};

/// Default global step budget for one interpreted run.
pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalId(pub usize);

/// A field of a class, addressed by owning class and position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldRef {
    pub class: ClassId,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodRef {
    pub class: ClassId,
    pub index: usize,
}

/// Identifies one syntactic call statement (`recv.m(..)` or `new C(..)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallSiteId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LoopId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Int,
    Bool,
    Ref(ClassId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectProgram {
    pub classes: Vec<ClassDecl>,
    pub globals: Vec<GlobalDecl>,
    pub interfaces: BTreeSet<ClassId>,
    pub entry: MethodRef,
    /// Number of call sites; ids are `0..call_sites`.
    pub call_sites: usize,
    /// Number of `while` loops; ids are `0..loops`.
    pub loops: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
    /// Index into `methods` of the method named like the class.
    pub constructor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: Type,
}

/// A class-scoped reference-typed root of the program state, written
/// `Owner.name` in state paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDecl {
    pub owner: ClassId,
    pub name: String,
    pub class: ClassId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: String,
    pub is_static: bool,
    /// Parameters are always the first `params` entries of `locals`.
    pub params: usize,
    pub locals: Vec<LocalDecl>,
    pub ret: Option<Type>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDecl {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    /// Binding strength used by the parser and printer; higher binds tighter.
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

/// Side-effect free expressions. Calls, allocation and input reads are
/// statement-level forms (see [`Rhs`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(BigInt),
    Bool(bool),
    Local(LocalId),
    This,
    Global(GlobalId),
    Field(Box<Expr>, FieldRef),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Place {
    Local(LocalId),
    Global(GlobalId),
    Field(Expr, FieldRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Call {
    pub site: CallSiteId,
    pub callee: MethodRef,
    /// `None` for static calls.
    pub receiver: Option<Expr>,
    pub args: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rhs {
    Expr(Expr),
    Null,
    /// Reads the next value of the run's seeded input stream, uniform in `lo..=hi`.
    Input {
        lo: i64,
        hi: i64,
    },
    New {
        site: CallSiteId,
        class: ClassId,
        args: Vec<Expr>,
    },
    Call(Call),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign {
        target: Place,
        value: Rhs,
        /// Printed as `var name: T = ..`.
        declares: bool,
    },
    Invoke(Call),
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    While {
        id: LoopId,
        cond: Expr,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
}

/// One monitored call: `Class.method()` or `Class()` for allocation.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(transparent)]
pub struct Event {
    pub label: String,
}

impl Event {
    pub fn new(label: impl Into<String>) -> Self {
        Event {
            label: label.into(),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("type error at {line}:{col} in `{expr}`: {message}")]
    Type {
        line: usize,
        col: usize,
        expr: String,
        message: String,
    },
    #[error("duplicate {kind} `{name}` at {line}:{col}")]
    Duplicate {
        kind: &'static str,
        name: String,
        line: usize,
        col: usize,
    },
    #[error("unresolved {kind} `{name}`")]
    Unresolved { kind: &'static str, name: String },
}

/// Parses and type-checks subject-language source text.
pub fn parse_program(text: &str) -> Result<SubjectProgram, ProgramError> {
    let module = parser::parse(text)?;
    check::lower(&module)
}

impl SubjectProgram {
    pub fn class(&self, id: ClassId) -> &ClassDecl {
        &self.classes[id.0]
    }

    pub fn method(&self, m: MethodRef) -> &MethodDecl {
        &self.classes[m.class.0].methods[m.index]
    }

    pub fn field(&self, f: FieldRef) -> &FieldDecl {
        &self.classes[f.class.0].fields[f.index]
    }

    pub fn global(&self, g: GlobalId) -> &GlobalDecl {
        &self.globals[g.0]
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.classes
            .iter()
            .position(|c| c.name == name)
            .map(ClassId)
    }

    pub fn find_method(&self, class: ClassId, name: &str) -> Option<MethodRef> {
        self.class(class)
            .methods
            .iter()
            .position(|m| m.name == name)
            .map(|index| MethodRef { class, index })
    }

    pub fn find_global(&self, owner: ClassId, name: &str) -> Option<GlobalId> {
        self.globals
            .iter()
            .position(|g| g.owner == owner && g.name == name)
            .map(GlobalId)
    }

    /// All methods in declaration order.
    pub fn methods(&self) -> impl Iterator<Item = MethodRef> + '_ {
        self.classes.iter().enumerate().flat_map(|(c, decl)| {
            (0..decl.methods.len()).map(move |index| MethodRef {
                class: ClassId(c),
                index,
            })
        })
    }

    pub fn is_constructor(&self, m: MethodRef) -> bool {
        self.class(m.class).constructor == Some(m.index)
    }

    pub fn is_interface(&self, class: ClassId) -> bool {
        self.interfaces.contains(&class)
    }

    /// `Class.method` for diagnostics and call-graph output.
    pub fn method_name(&self, m: MethodRef) -> String {
        format!("{}.{}", self.class(m.class).name, self.method(m).name)
    }

    pub fn global_name(&self, g: GlobalId) -> String {
        let decl = self.global(g);
        format!("{}.{}", self.class(decl.owner).name, decl.name)
    }

    /// The event label emitted when `m` is invoked.
    pub fn call_label(&self, m: MethodRef) -> String {
        if self.is_constructor(m) {
            format!("{}()", self.class(m.class).name)
        } else {
            format!("{}.{}()", self.class(m.class).name, self.method(m).name)
        }
    }

    /// The event label emitted when an instance of `class` is allocated.
    pub fn new_label(&self, class: ClassId) -> String {
        format!("{}()", self.class(class).name)
    }

    /// Every label the program can emit, sorted.
    pub fn event_labels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for &c in &self.interfaces {
            out.insert(self.new_label(c));
            for index in 0..self.class(c).methods.len() {
                out.insert(self.call_label(MethodRef { class: c, index }));
            }
        }
        out
    }

    pub fn type_name(&self, ty: Type) -> String {
        match ty {
            Type::Int => "int".into(),
            Type::Bool => "bool".into(),
            Type::Ref(c) => self.class(c).name.clone(),
        }
    }

    /// Canonical source text; `parse_program(p.to_source()) == p`.
    pub fn to_source(&self) -> String {
        printer::print_program(self)
    }

    /// Hex SHA-256 of the canonical source text.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_source().as_bytes()))
    }

    /// Renders an expression in the context of `method` (for diagnostics).
    pub fn render_expr(&self, method: MethodRef, expr: &Expr) -> String {
        printer::render_expr(self, method, expr)
    }
}

/// Calls `f` on each statement of `body`, recursing into nested blocks.
pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for stmt in body {
        f(stmt);
        match stmt {
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                walk_stmts(then_branch, f);
                walk_stmts(else_branch, f);
            }
            Stmt::While { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests;
