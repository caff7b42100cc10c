//! Canonical source rendering. Output re-parses to an identical program.

use std::fmt::Write;

use super::*;

const INDENT: &str = "    ";

pub(crate) fn print_program(p: &SubjectProgram) -> String {
    let mut out = String::new();
    if !p.interfaces.is_empty() {
        let names: Vec<&str> = p
            .interfaces
            .iter()
            .map(|c| p.class(*c).name.as_str())
            .collect();
        writeln!(out, "interface {}", names.join(", ")).unwrap();
    }
    writeln!(out, "entry {}", p.method_name(p.entry)).unwrap();
    for (ci, class) in p.classes.iter().enumerate() {
        let cid = ClassId(ci);
        writeln!(out).unwrap();
        writeln!(out, "class {} {{", class.name).unwrap();
        for f in &class.fields {
            writeln!(out, "{INDENT}field {}: {}", f.name, p.type_name(f.ty)).unwrap();
        }
        for g in p.globals.iter().filter(|g| g.owner == cid) {
            writeln!(out, "{INDENT}global {}: {}", g.name, p.class(g.class).name).unwrap();
        }
        for index in 0..class.methods.len() {
            let m = MethodRef { class: cid, index };
            print_method(p, m, &mut out);
        }
        writeln!(out, "}}").unwrap();
    }
    out
}

fn print_method(p: &SubjectProgram, m: MethodRef, out: &mut String) {
    let decl = p.method(m);
    let params: Vec<String> = decl.locals[..decl.params]
        .iter()
        .map(|l| format!("{}: {}", l.name, p.type_name(l.ty)))
        .collect();
    let stat = if decl.is_static { "static " } else { "" };
    let ret = decl
        .ret
        .map(|t| format!(": {}", p.type_name(t)))
        .unwrap_or_default();
    writeln!(
        out,
        "{INDENT}{stat}method {}({}){ret} {{",
        decl.name,
        params.join(", ")
    )
    .unwrap();
    let pr = Printer { p, m };
    pr.block(&decl.body, 2, out);
    writeln!(out, "{INDENT}}}").unwrap();
}

pub(crate) fn render_expr(p: &SubjectProgram, m: MethodRef, e: &Expr) -> String {
    Printer { p, m }.expr(e)
}

struct Printer<'a> {
    p: &'a SubjectProgram,
    m: MethodRef,
}

impl Printer<'_> {
    fn block(&self, body: &[Stmt], depth: usize, out: &mut String) {
        for s in body {
            self.stmt(s, depth, out);
        }
    }

    fn stmt(&self, s: &Stmt, depth: usize, out: &mut String) {
        let pad = INDENT.repeat(depth);
        match s {
            Stmt::Assign {
                target,
                value,
                declares,
            } => {
                let rhs = self.rhs(value);
                match (target, declares) {
                    (Place::Local(id), true) => {
                        let l = &self.p.method(self.m).locals[id.0];
                        writeln!(
                            out,
                            "{pad}var {}: {} = {rhs}",
                            l.name,
                            self.p.type_name(l.ty)
                        )
                        .unwrap();
                    }
                    _ => writeln!(out, "{pad}{} = {rhs}", self.place(target)).unwrap(),
                }
            }
            Stmt::Invoke(call) => writeln!(out, "{pad}{}", self.call(call)).unwrap(),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                writeln!(out, "{pad}if {} {{", self.expr(cond)).unwrap();
                self.block(then_branch, depth + 1, out);
                self.else_part(else_branch, depth, out);
            }
            Stmt::While { cond, body, .. } => {
                writeln!(out, "{pad}while {} {{", self.expr(cond)).unwrap();
                self.block(body, depth + 1, out);
                writeln!(out, "{pad}}}").unwrap();
            }
            Stmt::Return(None) => writeln!(out, "{pad}return").unwrap(),
            Stmt::Return(Some(e)) => writeln!(out, "{pad}return {}", self.expr(e)).unwrap(),
        }
    }

    fn else_part(&self, else_branch: &[Stmt], depth: usize, out: &mut String) {
        let pad = INDENT.repeat(depth);
        match else_branch {
            [] => writeln!(out, "{pad}}}").unwrap(),
            [Stmt::If {
                cond,
                then_branch,
                else_branch,
            }] => {
                writeln!(out, "{pad}}} else if {} {{", self.expr(cond)).unwrap();
                self.block(then_branch, depth + 1, out);
                self.else_part(else_branch, depth, out);
            }
            _ => {
                writeln!(out, "{pad}}} else {{").unwrap();
                self.block(else_branch, depth + 1, out);
                writeln!(out, "{pad}}}").unwrap();
            }
        }
    }

    fn rhs(&self, r: &Rhs) -> String {
        match r {
            Rhs::Expr(e) => self.expr(e),
            Rhs::Null => "null".into(),
            Rhs::Input { lo, hi } => format!("input({lo}, {hi})"),
            Rhs::New { class, args, .. } => {
                format!("new {}({})", self.p.class(*class).name, self.args(args))
            }
            Rhs::Call(c) => self.call(c),
        }
    }

    fn args(&self, args: &[Expr]) -> String {
        args.iter()
            .map(|a| self.expr(a))
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn call(&self, c: &Call) -> String {
        let name = &self.p.method(c.callee).name;
        let args = self.args(&c.args);
        match &c.receiver {
            Some(Expr::This) => format!("this.{name}({args})"),
            Some(r) => format!("{}.{name}({args})", self.expr(r)),
            None if c.callee.class == self.m.class => format!("{name}({args})"),
            None => format!("{}.{name}({args})", self.p.class(c.callee.class).name),
        }
    }

    fn place(&self, pl: &Place) -> String {
        match pl {
            Place::Local(id) => self.local(*id),
            Place::Global(g) => self.global(*g),
            Place::Field(base, f) => self.field(base, *f),
        }
    }

    fn local(&self, id: LocalId) -> String {
        self.p.method(self.m).locals[id.0].name.clone()
    }

    fn global(&self, g: GlobalId) -> String {
        let decl = self.p.global(g);
        if decl.owner == self.m.class {
            decl.name.clone()
        } else {
            self.p.global_name(g)
        }
    }

    fn field(&self, base: &Expr, f: FieldRef) -> String {
        let name = &self.p.field(f).name;
        match base {
            Expr::This => name.clone(),
            other => format!("{}.{name}", self.expr(other)),
        }
    }

    pub(crate) fn expr(&self, e: &Expr) -> String {
        match e {
            Expr::Int(v) => v.to_string(),
            Expr::Bool(b) => b.to_string(),
            Expr::Local(id) => self.local(*id),
            Expr::This => "this".into(),
            Expr::Global(g) => self.global(*g),
            Expr::Field(base, f) => self.field(base, *f),
            Expr::Unary(op, x) => {
                let inner = match **x {
                    Expr::Binary(..) => format!("({})", self.expr(x)),
                    _ => self.expr(x),
                };
                match op {
                    UnOp::Neg => format!("-{inner}"),
                    UnOp::Not => format!("not {inner}"),
                }
            }
            Expr::Binary(op, a, b) => {
                let prec = op.precedence();
                let wrap = |child: &Expr, right: bool| {
                    let s = self.expr(child);
                    match child {
                        Expr::Binary(cop, ..) => {
                            let cp = cop.precedence();
                            let needs = cp < prec || (cp == prec && (right || op.is_comparison()));
                            if needs {
                                format!("({s})")
                            } else {
                                s
                            }
                        }
                        _ => s,
                    }
                };
                format!("{} {} {}", wrap(a, false), op.symbol(), wrap(b, true))
            }
        }
    }
}
