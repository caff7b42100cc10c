use num::ToPrimitive;

use super::ast::*;
use super::lexer::{tokenize, Pos, Tok, Token};
use super::{BinOp, ProgramError, UnOp};

pub(crate) fn parse(src: &str) -> Result<Module, ProgramError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        i: 0,
    };
    p.module()
}

/// Parses a single expression (used for condition files).
pub(crate) fn parse_expr_text(src: &str) -> Result<SExpr, ProgramError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        i: 0,
    };
    p.skip_newlines();
    let e = p.expr()?;
    p.skip_newlines();
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

type PResult<T> = Result<T, ProgramError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ProgramError {
        let t = &self.toks[self.i];
        ProgramError::Syntax {
            line: t.pos.line,
            col: t.pos.col,
            message: format!("expected {wanted}, found {}", t.tok.describe()),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let pos = self.bump().pos;
                Ok((name, pos))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    /// A statement or declaration ends at a newline, or just before a `}`.
    fn end_line(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::RBrace | Tok::Eof => Ok(()),
            _ => Err(self.unexpected("end of line")),
        }
    }

    fn module(&mut self) -> PResult<Module> {
        let mut module = Module {
            interfaces: Vec::new(),
            entry: None,
            classes: Vec::new(),
        };
        loop {
            self.skip_newlines();
            match self.peek() {
                Tok::Eof => break,
                Tok::Interface => {
                    self.bump();
                    loop {
                        module.interfaces.push(self.ident()?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.end_line()?;
                }
                Tok::Entry => {
                    let pos = self.bump().pos;
                    let (class, _) = self.ident()?;
                    self.expect(Tok::Dot, "`.`")?;
                    let (method, _) = self.ident()?;
                    if module.entry.is_some() {
                        return Err(ProgramError::Duplicate {
                            kind: "entry declaration",
                            name: format!("{class}.{method}"),
                            line: pos.line,
                            col: pos.col,
                        });
                    }
                    module.entry = Some((class, method, pos));
                    self.end_line()?;
                }
                Tok::Class => module.classes.push(self.class()?),
                _ => return Err(self.unexpected("`class`, `interface` or `entry`")),
            }
        }
        Ok(module)
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(match name.as_str() {
                    "int" => TypeName::Int,
                    "bool" => TypeName::Bool,
                    _ => TypeName::Class(name),
                })
            }
            _ => Err(self.unexpected("type")),
        }
    }

    fn class(&mut self) -> PResult<ClassItem> {
        let pos = self.expect(Tok::Class, "`class`")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut item = ClassItem {
            name,
            pos,
            fields: Vec::new(),
            globals: Vec::new(),
            methods: Vec::new(),
        };
        loop {
            self.skip_newlines();
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Field => {
                    self.bump();
                    let (fname, fpos) = self.ident()?;
                    self.expect(Tok::Colon, "`:`")?;
                    let ty = self.type_name()?;
                    item.fields.push((fname, ty, fpos));
                    self.end_line()?;
                }
                Tok::Global => {
                    self.bump();
                    let (gname, gpos) = self.ident()?;
                    self.expect(Tok::Colon, "`:`")?;
                    let (class, _) = self.ident()?;
                    item.globals.push((gname, class, gpos));
                    self.end_line()?;
                }
                Tok::Static | Tok::Method => item.methods.push(self.method()?),
                _ => return Err(self.unexpected("`field`, `global`, `method` or `}`")),
            }
        }
        self.end_line()?;
        Ok(item)
    }

    fn method(&mut self) -> PResult<MethodItem> {
        let is_static = if *self.peek() == Tok::Static {
            self.bump();
            true
        } else {
            false
        };
        let pos = self.expect(Tok::Method, "`method`")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (pname, ppos) = self.ident()?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.type_name()?;
                params.push((pname, ty, ppos));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let ret = if *self.peek() == Tok::Colon {
            self.bump();
            Some(self.type_name()?)
        } else {
            None
        };
        let body = self.block()?;
        self.end_line()?;
        Ok(MethodItem {
            name,
            pos,
            is_static,
            params,
            ret,
            body,
        })
    }

    fn block(&mut self) -> PResult<Vec<SStmt>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            if *self.peek() == Tok::RBrace {
                self.bump();
                return Ok(out);
            }
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            out.push(self.stmt()?);
        }
    }

    fn stmt(&mut self) -> PResult<SStmt> {
        match self.peek() {
            Tok::Var => {
                let pos = self.bump().pos;
                let (name, _) = self.ident()?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.type_name()?;
                self.expect(Tok::Assign, "`=`")?;
                let value = self.rhs()?;
                self.end_line()?;
                Ok(SStmt::Var {
                    name,
                    ty,
                    value,
                    pos,
                })
            }
            Tok::If => self.if_stmt(),
            Tok::While => {
                self.bump();
                let cond = self.expr()?;
                let body = self.block()?;
                self.end_line()?;
                Ok(SStmt::While { cond, body })
            }
            Tok::Return => {
                let pos = self.bump().pos;
                let value = match self.peek() {
                    Tok::Newline | Tok::RBrace | Tok::Eof => None,
                    _ => Some(self.expr()?),
                };
                self.end_line()?;
                Ok(SStmt::Return(value, pos))
            }
            Tok::Ident(_) | Tok::This => {
                let start = self.pos();
                let target = self.postfix()?;
                if *self.peek() == Tok::LParen {
                    let call = self.finish_call(target)?;
                    self.end_line()?;
                    return Ok(SStmt::Call(call));
                }
                self.expect(Tok::Assign, "`=` or `(`")?;
                let value = self.rhs()?;
                self.end_line()?;
                Ok(SStmt::Assign {
                    target,
                    value,
                    pos: start,
                })
            }
            _ => Err(self.unexpected("statement")),
        }
    }

    fn if_stmt(&mut self) -> PResult<SStmt> {
        self.expect(Tok::If, "`if`")?;
        let cond = self.expr()?;
        let then_branch = self.block()?;
        let else_branch = if *self.peek() == Tok::Else {
            self.bump();
            if *self.peek() == Tok::If {
                vec![self.if_stmt()?]
            } else {
                let b = self.block()?;
                self.end_line()?;
                b
            }
        } else {
            self.end_line()?;
            Vec::new()
        };
        Ok(SStmt::If {
            cond,
            then_branch,
            else_branch,
        })
    }

    /// `name(.name)*` or `this(.name)*`.
    fn postfix(&mut self) -> PResult<SExpr> {
        let pos = self.pos();
        let mut e = match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                SExpr {
                    kind: SExprKind::Name(name),
                    pos,
                }
            }
            Tok::This => {
                self.bump();
                SExpr {
                    kind: SExprKind::This,
                    pos,
                }
            }
            _ => return Err(self.unexpected("name")),
        };
        while *self.peek() == Tok::Dot {
            self.bump();
            let (member, mpos) = self.ident()?;
            e = SExpr {
                kind: SExprKind::Member(Box::new(e), member),
                pos: mpos,
            };
        }
        Ok(e)
    }

    /// Turns a parsed `recv.m` / `m` path followed by `(` into a call.
    fn finish_call(&mut self, path: SExpr) -> PResult<SCall> {
        let pos = path.pos;
        let (receiver, method) = match path.kind {
            SExprKind::Member(recv, m) => (Some(*recv), m),
            SExprKind::Name(m) => (None, m),
            _ => {
                return Err(ProgramError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    message: "`this` is not callable".into(),
                })
            }
        };
        let args = self.args()?;
        Ok(SCall {
            receiver,
            method,
            args,
            pos,
        })
    }

    fn args(&mut self) -> PResult<Vec<SExpr>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn rhs(&mut self) -> PResult<SRhs> {
        let pos = self.pos();
        match self.peek() {
            Tok::Null => {
                self.bump();
                Ok(SRhs::Null)
            }
            Tok::New => {
                self.bump();
                let (class, _) = self.ident()?;
                let args = self.args()?;
                Ok(SRhs::New(class, args, pos))
            }
            Tok::Input => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let lo = self.signed_literal()?;
                self.expect(Tok::Comma, "`,`")?;
                let hi = self.signed_literal()?;
                self.expect(Tok::RParen, "`)`")?;
                if lo > hi {
                    return Err(ProgramError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        message: format!("empty input range {lo}..{hi}"),
                    });
                }
                Ok(SRhs::Input(lo, hi))
            }
            Tok::Ident(_) | Tok::This => {
                let save = self.i;
                let path = self.postfix()?;
                if *self.peek() == Tok::LParen {
                    return Ok(SRhs::Call(self.finish_call(path)?));
                }
                self.i = save;
                Ok(SRhs::Expr(self.expr()?))
            }
            _ => Ok(SRhs::Expr(self.expr()?)),
        }
    }

    fn signed_literal(&mut self) -> PResult<i64> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(v) => {
                let pos = self.bump().pos;
                let v = if neg { -v } else { v };
                v.to_i64().ok_or(ProgramError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    message: "input bound out of range".into(),
                })
            }
            _ => Err(self.unexpected("integer literal")),
        }
    }

    pub(crate) fn expr(&mut self) -> PResult<SExpr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Or => BinOp::Or,
            Tok::And => BinOp::And,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<SExpr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let pos = self.bump().pos;
            let rhs = self.binary(prec + 1)?;
            if op.is_comparison() {
                if let Some(next) = self.binop() {
                    if next.is_comparison() {
                        return Err(ProgramError::Syntax {
                            line: self.pos().line,
                            col: self.pos().col,
                            message: "comparison operators do not chain".into(),
                        });
                    }
                }
            }
            lhs = SExpr {
                kind: SExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                pos,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<SExpr> {
        let pos = self.pos();
        match self.peek() {
            Tok::Minus => {
                self.bump();
                let e = self.unary()?;
                Ok(SExpr {
                    kind: SExprKind::Unary(UnOp::Neg, Box::new(e)),
                    pos,
                })
            }
            Tok::Not => {
                self.bump();
                let e = self.unary()?;
                Ok(SExpr {
                    kind: SExprKind::Unary(UnOp::Not, Box::new(e)),
                    pos,
                })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<SExpr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(SExpr {
                    kind: SExprKind::Int(v),
                    pos,
                })
            }
            Tok::True | Tok::False => {
                let b = *self.peek() == Tok::True;
                self.bump();
                Ok(SExpr {
                    kind: SExprKind::Bool(b),
                    pos,
                })
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(SExpr {
                    kind: SExprKind::Paren(Box::new(e)),
                    pos,
                })
            }
            Tok::Ident(_) | Tok::This => {
                let e = self.postfix()?;
                if *self.peek() == Tok::LParen {
                    return Err(ProgramError::Syntax {
                        line: self.pos().line,
                        col: self.pos().col,
                        message:
                            "calls may only appear as a statement or assignment right-hand side"
                                .into(),
                    });
                }
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}
