//! Name resolution and type checking: lowers the parser's syntax tree into a
//! [`SubjectProgram`].

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::lexer::Pos;
use super::*;

type CResult<T> = Result<T, ProgramError>;

pub(crate) fn lower(module: &Module) -> CResult<SubjectProgram> {
    let mut class_ids = BTreeMap::new();
    for (i, c) in module.classes.iter().enumerate() {
        if class_ids.insert(c.name.clone(), ClassId(i)).is_some() {
            return Err(dup("class", &c.name, c.pos));
        }
    }
    let resolve_type = |t: &TypeName, pos: Pos| -> CResult<Type> {
        Ok(match t {
            TypeName::Int => Type::Int,
            TypeName::Bool => Type::Bool,
            TypeName::Class(name) => Type::Ref(
                *class_ids
                    .get(name)
                    .ok_or_else(|| type_err(pos, name, format!("unknown class `{name}`")))?,
            ),
        })
    };

    // Declarations first so that bodies may reference anything.
    let mut classes = Vec::new();
    let mut globals = Vec::new();
    let mut signatures: Vec<Vec<(Vec<Type>, Option<Type>)>> = Vec::new();
    for (ci, c) in module.classes.iter().enumerate() {
        let mut members = BTreeSet::new();
        let mut fields = Vec::new();
        for (name, ty, pos) in &c.fields {
            if !members.insert(name.clone()) {
                return Err(dup("member", name, *pos));
            }
            fields.push(FieldDecl {
                name: name.clone(),
                ty: resolve_type(ty, *pos)?,
            });
        }
        for (name, class, pos) in &c.globals {
            if !members.insert(name.clone()) {
                return Err(dup("member", name, *pos));
            }
            let class = *class_ids
                .get(class)
                .ok_or_else(|| type_err(*pos, name, format!("unknown class `{class}`")))?;
            globals.push(GlobalDecl {
                owner: ClassId(ci),
                name: name.clone(),
                class,
            });
        }
        let mut method_names = BTreeSet::new();
        let mut sigs = Vec::new();
        let mut constructor = None;
        for (mi, m) in c.methods.iter().enumerate() {
            if !method_names.insert(m.name.clone()) {
                return Err(dup("method", &m.name, m.pos));
            }
            let mut params = Vec::new();
            for (_, pty, ppos) in &m.params {
                params.push(resolve_type(pty, *ppos)?);
            }
            let ret = match &m.ret {
                Some(t) => Some(resolve_type(t, m.pos)?),
                None => None,
            };
            if m.name == c.name {
                if m.is_static || ret.is_some() {
                    return Err(type_err(
                        m.pos,
                        &m.name,
                        "constructor must be a non-static method without a return type".into(),
                    ));
                }
                constructor = Some(mi);
            }
            sigs.push((params, ret));
        }
        signatures.push(sigs);
        classes.push(ClassDecl {
            name: c.name.clone(),
            fields,
            methods: Vec::new(),
            constructor,
        });
    }

    let mut interfaces = BTreeSet::new();
    for (name, _) in &module.interfaces {
        let id = class_ids
            .get(name)
            .ok_or_else(|| ProgramError::Unresolved {
                kind: "interface class",
                name: name.clone(),
            })?;
        interfaces.insert(*id);
    }

    let mut program = SubjectProgram {
        classes,
        globals,
        interfaces,
        entry: MethodRef {
            class: ClassId(0),
            index: 0,
        },
        call_sites: 0,
        loops: 0,
    };

    let mut counters = Counters::default();
    for (ci, c) in module.classes.iter().enumerate() {
        for (mi, m) in c.methods.iter().enumerate() {
            let decl = {
                let mut lw = MethodLowerer {
                    module,
                    program: &program,
                    signatures: &signatures,
                    class: ClassId(ci),
                    is_static: m.is_static,
                    ret: signatures[ci][mi].1,
                    locals: Vec::new(),
                    scopes: vec![Vec::new()],
                    counters: &mut counters,
                };
                for (pname, pty, ppos) in &m.params {
                    let ty = lw.resolve_type(pty, *ppos)?;
                    lw.declare(pname, ty, *ppos)?;
                }
                let body = lw.block(&m.body)?;
                MethodDecl {
                    name: m.name.clone(),
                    is_static: m.is_static,
                    params: m.params.len(),
                    locals: lw.locals,
                    ret: signatures[ci][mi].1,
                    body,
                }
            };
            program.classes[ci].methods.push(decl);
        }
    }
    program.call_sites = counters.sites;
    program.loops = counters.loops;

    let (class, method, pos) = module.entry.as_ref().ok_or(ProgramError::Unresolved {
        kind: "entry method",
        name: "<missing entry declaration>".into(),
    })?;
    let entry_name = format!("{class}.{method}");
    let entry = program
        .class_id(class)
        .and_then(|c| program.find_method(c, method))
        .ok_or(ProgramError::Unresolved {
            kind: "entry method",
            name: entry_name.clone(),
        })?;
    let decl = program.method(entry);
    if !decl.is_static || decl.params != 0 || decl.ret.is_some() {
        return Err(type_err(
            *pos,
            &entry_name,
            "entry must be a static method without parameters or return type".into(),
        ));
    }
    program.entry = entry;
    Ok(program)
}

fn dup(kind: &'static str, name: &str, pos: Pos) -> ProgramError {
    ProgramError::Duplicate {
        kind,
        name: name.to_string(),
        line: pos.line,
        col: pos.col,
    }
}

fn type_err(pos: Pos, expr: &str, message: String) -> ProgramError {
    ProgramError::Type {
        line: pos.line,
        col: pos.col,
        expr: expr.to_string(),
        message,
    }
}

#[derive(Default)]
struct Counters {
    sites: usize,
    loops: usize,
}

struct MethodLowerer<'a> {
    module: &'a Module,
    program: &'a SubjectProgram,
    signatures: &'a [Vec<(Vec<Type>, Option<Type>)>],
    class: ClassId,
    is_static: bool,
    ret: Option<Type>,
    locals: Vec<LocalDecl>,
    scopes: Vec<Vec<(String, LocalId)>>,
    counters: &'a mut Counters,
}

/// Renders surface syntax for diagnostics.
pub(crate) fn show(e: &SExpr) -> String {
    match &e.kind {
        SExprKind::Int(v) => v.to_string(),
        SExprKind::Bool(b) => b.to_string(),
        SExprKind::This => "this".into(),
        SExprKind::Name(n) => n.clone(),
        SExprKind::Member(b, m) => format!("{}.{m}", show(b)),
        SExprKind::Unary(UnOp::Neg, x) => format!("-{}", show(x)),
        SExprKind::Unary(UnOp::Not, x) => format!("not {}", show(x)),
        SExprKind::Binary(op, a, b) => format!("{} {} {}", show(a), op.symbol(), show(b)),
        SExprKind::Paren(x) => format!("({})", show(x)),
    }
}

impl MethodLowerer<'_> {
    fn declare(&mut self, name: &str, ty: Type, pos: Pos) -> CResult<LocalId> {
        if self.locals.iter().any(|l| l.name == name) {
            return Err(dup("local", name, pos));
        }
        let class = self.program.class(self.class);
        if class.fields.iter().any(|f| f.name == name)
            || self
                .program
                .globals
                .iter()
                .any(|g| g.owner == self.class && g.name == name)
        {
            return Err(dup("local shadowing a member", name, pos));
        }
        let id = LocalId(self.locals.len());
        self.locals.push(LocalDecl {
            name: name.to_string(),
            ty,
        });
        self.scopes
            .last_mut()
            .expect("scope")
            .push((name.to_string(), id));
        Ok(id)
    }

    fn lookup_local(&self, name: &str) -> Option<LocalId> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, id)| *id)
    }

    fn resolve_type(&self, t: &TypeName, pos: Pos) -> CResult<Type> {
        Ok(match t {
            TypeName::Int => Type::Int,
            TypeName::Bool => Type::Bool,
            TypeName::Class(name) => Type::Ref(
                self.program
                    .class_id(name)
                    .ok_or_else(|| type_err(pos, name, format!("unknown class `{name}`")))?,
            ),
        })
    }

    fn block(&mut self, stmts: &[SStmt]) -> CResult<Vec<Stmt>> {
        self.scopes.push(Vec::new());
        let mut out = Vec::with_capacity(stmts.len());
        for s in stmts {
            out.push(self.stmt(s)?);
        }
        self.scopes.pop();
        Ok(out)
    }

    fn type_name(&self, t: Type) -> String {
        self.program.type_name(t)
    }

    fn stmt(&mut self, s: &SStmt) -> CResult<Stmt> {
        Ok(match s {
            SStmt::Var {
                name,
                ty,
                value,
                pos,
            } => {
                let ty = self.resolve_type(ty, *pos)?;
                let value = self.rhs(value, ty, &format!("var {name}"), *pos)?;
                let id = self.declare(name, ty, *pos)?;
                Stmt::Assign {
                    target: Place::Local(id),
                    value,
                    declares: true,
                }
            }
            SStmt::Assign { target, value, pos } => {
                let (place, ty) = self.place(target)?;
                let value = self.rhs(value, ty, &show(target), *pos)?;
                Stmt::Assign {
                    target: place,
                    value,
                    declares: false,
                }
            }
            SStmt::Call(call) => Stmt::Invoke(self.call(call)?.0),
            SStmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let cond = self.expect_expr(cond, Type::Bool)?;
                Stmt::If {
                    cond,
                    then_branch: self.block(then_branch)?,
                    else_branch: self.block(else_branch)?,
                }
            }
            SStmt::While { cond, body } => {
                let cond = self.expect_expr(cond, Type::Bool)?;
                let id = LoopId(self.counters.loops);
                self.counters.loops += 1;
                Stmt::While {
                    id,
                    cond,
                    body: self.block(body)?,
                }
            }
            SStmt::Return(value, pos) => match (value, self.ret) {
                (None, None) => Stmt::Return(None),
                (Some(e), Some(t)) => Stmt::Return(Some(self.expect_expr(e, t)?)),
                (None, Some(t)) => {
                    return Err(type_err(
                        *pos,
                        "return",
                        format!("missing return value of type {}", self.type_name(t)),
                    ))
                }
                (Some(e), None) => {
                    return Err(type_err(
                        e.pos,
                        &show(e),
                        "method has no return type".into(),
                    ))
                }
            },
        })
    }

    fn rhs(&mut self, rhs: &SRhs, expected: Type, target: &str, pos: Pos) -> CResult<Rhs> {
        let mismatch = |found: String| {
            type_err(
                pos,
                target,
                format!(
                    "cannot assign {found} to a {} location",
                    self.program.type_name(expected)
                ),
            )
        };
        Ok(match rhs {
            SRhs::Expr(e) => {
                let (lowered, ty) = self.expr(e)?;
                if ty != expected {
                    return Err(type_err(
                        e.pos,
                        &show(e),
                        format!(
                            "expected {}, found {} (assigned to `{target}`)",
                            self.type_name(expected),
                            self.type_name(ty)
                        ),
                    ));
                }
                Rhs::Expr(lowered)
            }
            SRhs::Null => {
                if !matches!(expected, Type::Ref(_)) {
                    return Err(mismatch("null".into()));
                }
                Rhs::Null
            }
            SRhs::Input(lo, hi) => {
                if expected != Type::Int {
                    return Err(mismatch("input(..)".into()));
                }
                Rhs::Input { lo: *lo, hi: *hi }
            }
            SRhs::New(class_name, args, npos) => {
                let class = self.program.class_id(class_name).ok_or_else(|| {
                    type_err(*npos, class_name, format!("unknown class `{class_name}`"))
                })?;
                if expected != Type::Ref(class) {
                    return Err(mismatch(format!("new {class_name}")));
                }
                let params = match self.program.class(class).constructor {
                    Some(ci) => self.signatures[class.0][ci].0.clone(),
                    None => Vec::new(),
                };
                let args = self.args(args, &params, class_name, *npos)?;
                let site = self.next_site();
                Rhs::New { site, class, args }
            }
            SRhs::Call(call) => {
                let (call, ret) = self.call(call)?;
                match ret {
                    Some(t) if t == expected => Rhs::Call(call),
                    Some(t) => return Err(mismatch(format!("a {} result", self.type_name(t)))),
                    None => return Err(mismatch("the result of a void method".into())),
                }
            }
        })
    }

    fn next_site(&mut self) -> CallSiteId {
        let id = CallSiteId(self.counters.sites);
        self.counters.sites += 1;
        id
    }

    fn args(
        &mut self,
        args: &[SExpr],
        params: &[Type],
        callee: &str,
        pos: Pos,
    ) -> CResult<Vec<Expr>> {
        if args.len() != params.len() {
            return Err(type_err(
                pos,
                callee,
                format!("expected {} arguments, found {}", params.len(), args.len()),
            ));
        }
        args.iter()
            .zip(params)
            .map(|(a, t)| self.expect_expr(a, *t))
            .collect()
    }

    /// `Some(class)` when `e` names a class rather than a value.
    fn as_class_name(&self, e: &SExpr) -> Option<ClassId> {
        match &e.kind {
            SExprKind::Name(n) if self.value_name(n).is_none() => self.program.class_id(n),
            _ => None,
        }
    }

    fn value_name(&self, name: &str) -> Option<(Expr, Type)> {
        if let Some(id) = self.lookup_local(name) {
            return Some((Expr::Local(id), self.locals[id.0].ty));
        }
        let class = self.program.class(self.class);
        if !self.is_static {
            if let Some(index) = class.fields.iter().position(|f| f.name == name) {
                let f = FieldRef {
                    class: self.class,
                    index,
                };
                return Some((Expr::Field(Box::new(Expr::This), f), class.fields[index].ty));
            }
        }
        self.program
            .find_global(self.class, name)
            .map(|g| (Expr::Global(g), Type::Ref(self.program.global(g).class)))
    }

    fn call(&mut self, call: &SCall) -> CResult<(Call, Option<Type>)> {
        let (class, receiver, want_static) = match &call.receiver {
            None => (self.class, None, None),
            Some(r) => match self.as_class_name(r) {
                Some(c) => (c, None, Some(true)),
                None => {
                    let (e, ty) = self.expr(r)?;
                    match ty {
                        Type::Ref(c) => (c, Some(e), Some(false)),
                        _ => {
                            return Err(type_err(
                                r.pos,
                                &show(r),
                                "method receiver must be an object".into(),
                            ))
                        }
                    }
                }
            },
        };
        let class_name = &self.program.class(class).name;
        let display = format!("{class_name}.{}", call.method);
        let index = self.module.classes[class.0]
            .methods
            .iter()
            .position(|m| m.name == call.method)
            .ok_or_else(|| type_err(call.pos, &display, format!("unknown method `{display}`")))?;
        let callee = MethodRef { class, index };
        let is_static = self.module.classes[class.0].methods[index].is_static;
        if Some(callee.index) == self.program.class(class).constructor {
            return Err(type_err(
                call.pos,
                &display,
                "constructors are invoked with `new`".into(),
            ));
        }
        let receiver = match (want_static, is_static) {
            (Some(true), true) | (None, true) => None,
            (Some(false), false) => receiver,
            (None, false) => {
                if self.is_static {
                    return Err(type_err(
                        call.pos,
                        &display,
                        "instance method called without a receiver in a static method".into(),
                    ));
                }
                Some(Expr::This)
            }
            (Some(true), false) => {
                return Err(type_err(
                    call.pos,
                    &display,
                    "instance method called on a class".into(),
                ))
            }
            (Some(false), true) => {
                return Err(type_err(
                    call.pos,
                    &display,
                    "static method called on an object".into(),
                ))
            }
        };
        let (params, ret) = self.signatures[class.0][index].clone();
        let args = self.args(&call.args, &params, &display, call.pos)?;
        let site = self.next_site();
        Ok((
            Call {
                site,
                callee,
                receiver,
                args,
            },
            ret,
        ))
    }

    fn place(&mut self, target: &SExpr) -> CResult<(Place, Type)> {
        let bad = || type_err(target.pos, &show(target), "not assignable".into());
        match &target.kind {
            SExprKind::Name(n) => match self.value_name(n) {
                Some((Expr::Local(id), ty)) => Ok((Place::Local(id), ty)),
                Some((Expr::Global(g), ty)) => Ok((Place::Global(g), ty)),
                Some((Expr::Field(base, f), ty)) => Ok((Place::Field(*base, f), ty)),
                _ => Err(type_err(target.pos, n, format!("unknown name `{n}`"))),
            },
            SExprKind::Member(..) => match self.expr(target)? {
                (Expr::Global(g), ty) => Ok((Place::Global(g), ty)),
                (Expr::Field(base, f), ty) => Ok((Place::Field(*base, f), ty)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }

    fn expect_expr(&mut self, e: &SExpr, ty: Type) -> CResult<Expr> {
        let (lowered, found) = self.expr(e)?;
        if found != ty {
            return Err(type_err(
                e.pos,
                &show(e),
                format!(
                    "expected {}, found {}",
                    self.type_name(ty),
                    self.type_name(found)
                ),
            ));
        }
        Ok(lowered)
    }

    fn expr(&mut self, e: &SExpr) -> CResult<(Expr, Type)> {
        let err = |msg: String| type_err(e.pos, &show(e), msg);
        match &e.kind {
            SExprKind::Int(v) => Ok((Expr::Int(v.clone()), Type::Int)),
            SExprKind::Bool(b) => Ok((Expr::Bool(*b), Type::Bool)),
            SExprKind::Paren(x) => self.expr(x),
            SExprKind::This => {
                if self.is_static {
                    Err(err("`this` in a static method".into()))
                } else {
                    Ok((Expr::This, Type::Ref(self.class)))
                }
            }
            SExprKind::Name(n) => self.value_name(n).ok_or_else(|| {
                if self.program.class_id(n).is_some() {
                    err(format!("class `{n}` used as a value"))
                } else {
                    err(format!("unknown name `{n}`"))
                }
            }),
            SExprKind::Member(base, member) => {
                if let Some(c) = self.as_class_name(base) {
                    let g = self.program.find_global(c, member).ok_or_else(|| {
                        err(format!(
                            "class `{}` has no global `{member}`",
                            self.program.class(c).name
                        ))
                    })?;
                    return Ok((Expr::Global(g), Type::Ref(self.program.global(g).class)));
                }
                let (b, ty) = self.expr(base)?;
                let Type::Ref(c) = ty else {
                    return Err(err("field access on a non-object value".into()));
                };
                let class = self.program.class(c);
                let index = class
                    .fields
                    .iter()
                    .position(|f| &f.name == member)
                    .ok_or_else(|| {
                        err(format!("class `{}` has no field `{member}`", class.name))
                    })?;
                let f = FieldRef { class: c, index };
                Ok((Expr::Field(Box::new(b), f), class.fields[index].ty))
            }
            SExprKind::Unary(UnOp::Neg, x) if matches!(x.kind, SExprKind::Int(_)) => {
                let SExprKind::Int(v) = &x.kind else {
                    unreachable!()
                };
                Ok((Expr::Int(-v), Type::Int))
            }
            SExprKind::Unary(op, x) => {
                let want = match op {
                    UnOp::Neg => Type::Int,
                    UnOp::Not => Type::Bool,
                };
                let x = self.expect_expr(x, want)?;
                Ok((Expr::Unary(*op, Box::new(x)), want))
            }
            SExprKind::Binary(op, a, b) => {
                let (operand, result) = match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => (Type::Int, Type::Int),
                    BinOp::And | BinOp::Or => (Type::Bool, Type::Bool),
                    _ => (Type::Int, Type::Bool),
                };
                let a = self.expect_expr(a, operand)?;
                let b = self.expect_expr(b, operand)?;
                Ok((Expr::Binary(*op, Box::new(a), Box::new(b)), result))
            }
        }
    }
}
