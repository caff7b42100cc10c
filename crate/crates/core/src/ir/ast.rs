//! Unresolved syntax tree produced by the parser.

use num::BigInt;

use super::lexer::Pos;
use super::{BinOp, UnOp};

#[derive(Debug, Clone)]
pub(crate) struct Module {
    pub interfaces: Vec<(String, Pos)>,
    pub entry: Option<(String, String, Pos)>,
    pub classes: Vec<ClassItem>,
}

#[derive(Debug, Clone)]
pub(crate) enum TypeName {
    Int,
    Bool,
    Class(String),
}

#[derive(Debug, Clone)]
pub(crate) struct ClassItem {
    pub name: String,
    pub pos: Pos,
    pub fields: Vec<(String, TypeName, Pos)>,
    pub globals: Vec<(String, String, Pos)>,
    pub methods: Vec<MethodItem>,
}

#[derive(Debug, Clone)]
pub(crate) struct MethodItem {
    pub name: String,
    pub pos: Pos,
    pub is_static: bool,
    pub params: Vec<(String, TypeName, Pos)>,
    pub ret: Option<TypeName>,
    pub body: Vec<SStmt>,
}

#[derive(Debug, Clone)]
pub(crate) struct SExpr {
    pub kind: SExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub(crate) enum SExprKind {
    Int(BigInt),
    Bool(bool),
    This,
    Name(String),
    Member(Box<SExpr>, String),
    Unary(UnOp, Box<SExpr>),
    Binary(BinOp, Box<SExpr>, Box<SExpr>),
    Paren(Box<SExpr>),
}

#[derive(Debug, Clone)]
pub(crate) struct SCall {
    /// `None` for a bare `m(..)` call on the current class.
    pub receiver: Option<SExpr>,
    pub method: String,
    pub args: Vec<SExpr>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub(crate) enum SRhs {
    Expr(SExpr),
    Null,
    Input(i64, i64),
    New(String, Vec<SExpr>, Pos),
    Call(SCall),
}

#[derive(Debug, Clone)]
pub(crate) enum SStmt {
    Var {
        name: String,
        ty: TypeName,
        value: SRhs,
        pos: Pos,
    },
    Assign {
        target: SExpr,
        value: SRhs,
        pos: Pos,
    },
    Call(SCall),
    If {
        cond: SExpr,
        then_branch: Vec<SStmt>,
        else_branch: Vec<SStmt>,
    },
    While {
        cond: SExpr,
        body: Vec<SStmt>,
    },
    Return(Option<SExpr>, Pos),
}
