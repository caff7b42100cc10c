//! Path-enumerating symbolic execution of a single method.
//!
//! Each path is executed by a straight-line interpreter that consults a
//! decision prefix at every symbolic branch. When both directions of a new
//! branch are feasible the interpreter takes the `true` side and queues the
//! prefix leading to the `false` side. Paths are therefore produced in
//! lexicographic order of their decision vectors.

use std::collections::{BTreeMap, BTreeSet};

use num::{BigInt, Zero};

use super::linear::{compare, LinExpr, Literal, NormLit, Pred, Root, Symbol};
use super::solver::{check, Feasibility, Range, SolverLimits};
use super::SymExecError;
use crate::ir::{
    BinOp, Call, ClassId, Expr, Fault, FieldRef, GlobalId, MethodRef, Place, Rhs, Stmt,
    SubjectProgram, Type, UnOp,
};

pub const DEFAULT_LOOP_BOUND: usize = 3;
pub const DEFAULT_INLINE_DEPTH: usize = 2;
pub const DEFAULT_MAX_PATHS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymConfig {
    /// Maximum iterations of any single loop entry.
    pub loop_bound: usize,
    /// Calls nested deeper than this are not inlined; their effects are
    /// havocked.
    pub inline_depth: usize,
    /// Upper bound on explored paths per method.
    pub max_paths: usize,
    pub solver: SolverLimits,
}

impl Default for SymConfig {
    fn default() -> Self {
        SymConfig {
            loop_bound: DEFAULT_LOOP_BOUND,
            inline_depth: DEFAULT_INLINE_DEPTH,
            max_paths: DEFAULT_MAX_PATHS,
            solver: SolverLimits::default(),
        }
    }
}

/// The branch decisions along one feasible path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCondition {
    pub path_id: usize,
    /// Branch literals in encounter order.
    pub clauses: Vec<Literal>,
    /// Ranges of the `input(..)` reads on this path (assumptions, not clauses).
    pub ranges: Vec<Range>,
    /// Set when the path ends in a runtime fault.
    pub fault: Option<Fault>,
    /// False when nonlinear arithmetic or a solver limit made feasibility
    /// conservative.
    pub exact: bool,
}

/// Enumerates the feasible paths of `method` with loops bounded by
/// `config.loop_bound`.
pub fn symbolic_execute(
    program: &SubjectProgram,
    method: MethodRef,
    config: &SymConfig,
) -> Result<Vec<PathCondition>, SymExecError> {
    let summaries = Summaries::new(program);
    let mut worklist: Vec<Vec<bool>> = vec![Vec::new()];
    let mut paths = Vec::new();
    let mut explored = 0usize;
    while let Some(prefix) = worklist.pop() {
        explored += 1;
        if explored > config.max_paths {
            return Err(SymExecError::PathExplosion {
                method: program.method_name(method),
                limit: config.max_paths,
            });
        }
        let mut run = PathRun::new(program, config, &summaries, &prefix);
        let outcome = run.execute(method);
        // Deeper alternatives are explored first.
        worklist.append(&mut run.pending);
        let fault = match outcome {
            Ok(()) => None,
            Err(Abort::Fault(f)) => Some(f),
            Err(Abort::LoopBound | Abort::Infeasible) => continue,
        };
        paths.push(PathCondition {
            path_id: paths.len(),
            clauses: run.clauses,
            ranges: run.ranges,
            fault,
            exact: run.exact,
        });
    }
    Ok(paths)
}

/// Fields and globals a method may write, transitively.
struct Summaries {
    fields: BTreeMap<MethodRef, BTreeSet<FieldRef>>,
    globals: BTreeMap<MethodRef, BTreeSet<GlobalId>>,
    reads_input: BTreeSet<MethodRef>,
}

impl Summaries {
    fn new(program: &SubjectProgram) -> Self {
        let mut direct_fields: BTreeMap<MethodRef, BTreeSet<FieldRef>> = BTreeMap::new();
        let mut direct_globals: BTreeMap<MethodRef, BTreeSet<GlobalId>> = BTreeMap::new();
        let mut callees: BTreeMap<MethodRef, BTreeSet<MethodRef>> = BTreeMap::new();
        let mut reads_input = BTreeSet::new();
        for m in program.methods() {
            let fields = direct_fields.entry(m).or_default();
            let globals = direct_globals.entry(m).or_default();
            let calls = callees.entry(m).or_default();
            crate::ir::walk_stmts(&program.method(m).body, &mut |s| {
                if let Stmt::Assign { target, value, .. } = s {
                    match target {
                        Place::Field(_, f) => {
                            fields.insert(*f);
                        }
                        Place::Global(g) => {
                            globals.insert(*g);
                        }
                        Place::Local(_) => {}
                    }
                    match value {
                        Rhs::Input { .. } => {
                            reads_input.insert(m);
                        }
                        Rhs::New { class, .. } => {
                            if let Some(index) = program.class(*class).constructor {
                                calls.insert(MethodRef {
                                    class: *class,
                                    index,
                                });
                            }
                        }
                        Rhs::Call(c) => {
                            calls.insert(c.callee);
                        }
                        _ => {}
                    }
                }
                if let Stmt::Invoke(c) = s {
                    calls.insert(c.callee);
                }
            });
        }
        let mut out = Summaries {
            fields: BTreeMap::new(),
            globals: BTreeMap::new(),
            reads_input: BTreeSet::new(),
        };
        for m in program.methods() {
            let mut seen = BTreeSet::new();
            let mut stack = vec![m];
            let mut fields = BTreeSet::new();
            let mut globals = BTreeSet::new();
            let mut input = false;
            while let Some(x) = stack.pop() {
                if !seen.insert(x) {
                    continue;
                }
                fields.extend(direct_fields[&x].iter().copied());
                globals.extend(direct_globals[&x].iter().copied());
                input |= reads_input.contains(&x);
                stack.extend(callees[&x].iter().copied());
            }
            out.fields.insert(m, fields);
            out.globals.insert(m, globals);
            if input {
                out.reads_input.insert(m);
            }
        }
        out
    }
}

enum Abort {
    Fault(Fault),
    LoopBound,
    Infeasible,
}

impl From<Fault> for Abort {
    fn from(f: Fault) -> Self {
        Abort::Fault(f)
    }
}

type R<T> = Result<T, Abort>;

#[derive(Debug, Clone)]
enum SVal {
    Int(LinExpr),
    Bool(bool),
    Ref(SRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SRef {
    Null,
    Obj(usize),
}

struct SObj {
    class: ClassId,
    /// The symbolic path this object was read from; `None` for objects
    /// allocated on the path.
    origin: Option<Symbol>,
    fields: BTreeMap<usize, SVal>,
}

struct Frame {
    this: SRef,
    locals: Vec<SVal>,
}

enum Flow {
    Next,
    Return(Option<SVal>),
}

struct PathRun<'a> {
    program: &'a SubjectProgram,
    config: &'a SymConfig,
    summaries: &'a Summaries,
    prefix: &'a [bool],
    decisions: Vec<bool>,
    pending: Vec<Vec<bool>>,
    clauses: Vec<Literal>,
    ranges: Vec<Range>,
    exact: bool,
    heap: Vec<SObj>,
    globals: BTreeMap<GlobalId, SRef>,
    havocked: BTreeSet<FieldRef>,
    next_input: u32,
    next_opaque: u32,
    inputs_opaque: bool,
}

impl<'a> PathRun<'a> {
    fn new(
        program: &'a SubjectProgram,
        config: &'a SymConfig,
        summaries: &'a Summaries,
        prefix: &'a [bool],
    ) -> Self {
        PathRun {
            program,
            config,
            summaries,
            prefix,
            decisions: Vec::new(),
            pending: Vec::new(),
            clauses: Vec::new(),
            ranges: Vec::new(),
            exact: true,
            heap: Vec::new(),
            globals: BTreeMap::new(),
            havocked: BTreeSet::new(),
            next_input: 0,
            next_opaque: 0,
            inputs_opaque: false,
        }
    }

    fn execute(&mut self, method: MethodRef) -> R<()> {
        let decl = self.program.method(method);
        let this = if decl.is_static {
            SRef::Null
        } else {
            self.lazy(method.class, Symbol::root(Root::This))
        };
        let mut args = Vec::with_capacity(decl.params);
        for local in &decl.locals[..decl.params] {
            let sym = Symbol::root(Root::Param(local.name.clone()));
            args.push(self.symbolic(local.ty, sym)?);
        }
        self.invoke(method, this, args, 0)?;
        Ok(())
    }

    // ---- branching ---------------------------------------------------

    fn decide(&mut self, lit: NormLit) -> R<bool> {
        let lit = match lit {
            NormLit::Const(b) => return Ok(b),
            NormLit::Lit(l) => l,
        };
        if lit.pred.is_nonlinear() {
            self.exact = false;
        }
        let pos = self.decisions.len();
        let choice = if pos < self.prefix.len() {
            self.prefix[pos]
        } else {
            let t = self.feasible(&lit);
            let f = self.feasible(&lit.negate());
            match (t.possibly_sat(), f.possibly_sat()) {
                (true, true) => {
                    let mut alt = self.decisions.clone();
                    alt.push(false);
                    self.pending.push(alt);
                    true
                }
                (true, false) => true,
                (false, true) => false,
                (false, false) => return Err(Abort::Infeasible),
            }
        };
        self.decisions.push(choice);
        self.clauses.push(if choice { lit } else { lit.negate() });
        Ok(choice)
    }

    fn feasible(&mut self, lit: &Literal) -> Feasibility {
        self.clauses.push(lit.clone());
        let result = check(&self.clauses, &self.ranges, &self.config.solver);
        self.clauses.pop();
        if result == Feasibility::Unknown {
            self.exact = false;
        }
        result
    }

    // ---- symbolic heap ---------------------------------------------------

    fn lazy(&mut self, class: ClassId, origin: Symbol) -> SRef {
        self.heap.push(SObj {
            class,
            origin: Some(origin),
            fields: BTreeMap::new(),
        });
        SRef::Obj(self.heap.len() - 1)
    }

    /// A value read from `sym`; booleans are resolved by branching.
    fn symbolic(&mut self, ty: Type, sym: Symbol) -> R<SVal> {
        Ok(match ty {
            Type::Int => SVal::Int(LinExpr::symbol(sym)),
            Type::Bool => SVal::Bool(self.decide(NormLit::Lit(Literal {
                pred: Pred::Bool(sym),
                positive: true,
            }))?),
            Type::Ref(c) => SVal::Ref(self.lazy(c, sym)),
        })
    }

    fn opaque(&mut self, ty: Type) -> R<SVal> {
        let k = self.next_opaque;
        self.next_opaque += 1;
        self.symbolic(ty, Symbol::root(Root::Opaque(k)))
    }

    fn read_global(&mut self, g: GlobalId) -> SRef {
        if let Some(r) = self.globals.get(&g) {
            return *r;
        }
        let decl = self.program.global(g);
        let origin = Symbol::root(Root::State {
            owner: self.program.class(decl.owner).name.clone(),
            global: decl.name.clone(),
        });
        let r = self.lazy(decl.class, origin);
        self.globals.insert(g, r);
        r
    }

    fn read_field(&mut self, obj: SRef, f: FieldRef) -> R<SVal> {
        let SRef::Obj(id) = obj else {
            return Err(Abort::Fault(Fault::NullDereference));
        };
        if let Some(v) = self.heap[id].fields.get(&f.index) {
            return Ok(v.clone());
        }
        let ty = self.program.field(f).ty;
        let v = if self.havocked.contains(&f) {
            self.opaque(ty)?
        } else {
            let origin = self.heap[id]
                .origin
                .clone()
                .expect("allocated objects initialize every field");
            let name = &self.program.field(f).name;
            self.symbolic(ty, origin.child(name))?
        };
        self.heap[id].fields.insert(f.index, v.clone());
        Ok(v)
    }

    /// Forgets everything a non-inlined call to `callee` may have changed.
    fn havoc(&mut self, callee: MethodRef) {
        let fields = self.summaries.fields[&callee].clone();
        for f in &fields {
            for obj in &mut self.heap {
                if obj.class == f.class {
                    obj.fields.remove(&f.index);
                }
            }
            self.havocked.insert(*f);
        }
        for g in self.summaries.globals[&callee].clone() {
            let class = self.program.global(g).class;
            let k = self.next_opaque;
            self.next_opaque += 1;
            let r = self.lazy(class, Symbol::root(Root::Opaque(k)));
            self.globals.insert(g, r);
        }
        if self.summaries.reads_input.contains(&callee) {
            self.inputs_opaque = true;
        }
    }

    // ---- statements --------------------------------------------------

    fn invoke(
        &mut self,
        method: MethodRef,
        this: SRef,
        args: Vec<SVal>,
        depth: usize,
    ) -> R<Option<SVal>> {
        let program = self.program;
        let decl = program.method(method);
        let mut locals: Vec<SVal> = decl.locals.iter().map(|l| default_value(l.ty)).collect();
        for (slot, v) in locals.iter_mut().zip(args) {
            *slot = v;
        }
        let mut frame = Frame { this, locals };
        match self.block(&decl.body, &mut frame, depth)? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(decl.ret.map(default_value)),
        }
    }

    fn block(&mut self, body: &[Stmt], frame: &mut Frame, depth: usize) -> R<Flow> {
        for s in body {
            if let Flow::Return(v) = self.stmt(s, frame, depth)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &Stmt, frame: &mut Frame, depth: usize) -> R<Flow> {
        match s {
            Stmt::Assign { target, value, .. } => {
                let v = self.rhs(value, frame, depth)?;
                self.store(target, v, frame)?;
            }
            Stmt::Invoke(call) => {
                self.call(call, frame, depth)?;
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let branch = if self.eval_bool(cond, frame)? {
                    then_branch
                } else {
                    else_branch
                };
                return self.block(branch, frame, depth);
            }
            Stmt::While { cond, body, .. } => {
                let mut iterations = 0;
                while self.eval_bool(cond, frame)? {
                    if iterations == self.config.loop_bound {
                        return Err(Abort::LoopBound);
                    }
                    iterations += 1;
                    if let Flow::Return(v) = self.block(body, frame, depth)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.eval(e, frame)?),
                    None => None,
                };
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn store(&mut self, target: &Place, v: SVal, frame: &mut Frame) -> R<()> {
        match target {
            Place::Local(id) => frame.locals[id.0] = v,
            Place::Global(g) => {
                let SVal::Ref(r) = v else {
                    unreachable!("globals are reference-typed")
                };
                self.globals.insert(*g, r);
            }
            Place::Field(base, f) => {
                let SRef::Obj(id) = self.eval_ref(base, frame)? else {
                    return Err(Abort::Fault(Fault::NullDereference));
                };
                self.heap[id].fields.insert(f.index, v);
            }
        }
        Ok(())
    }

    fn rhs(&mut self, r: &Rhs, frame: &mut Frame, depth: usize) -> R<SVal> {
        match r {
            Rhs::Expr(e) => self.eval(e, frame),
            Rhs::Null => Ok(SVal::Ref(SRef::Null)),
            Rhs::Input { lo, hi } => {
                if self.inputs_opaque {
                    return self.opaque(Type::Int);
                }
                let k = self.next_input;
                self.next_input += 1;
                let symbol = Symbol::root(Root::Input(k));
                self.ranges.push(Range {
                    symbol: symbol.clone(),
                    lo: BigInt::from(*lo),
                    hi: BigInt::from(*hi),
                });
                Ok(SVal::Int(LinExpr::symbol(symbol)))
            }
            Rhs::New { class, args, .. } => {
                let args = self.eval_args(args, frame)?;
                let fields = self
                    .program
                    .class(*class)
                    .fields
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (i, default_value(f.ty)))
                    .collect();
                self.heap.push(SObj {
                    class: *class,
                    origin: None,
                    fields,
                });
                let obj = SRef::Obj(self.heap.len() - 1);
                if let Some(index) = self.program.class(*class).constructor {
                    let ctor = MethodRef {
                        class: *class,
                        index,
                    };
                    self.enter(ctor, obj, args, depth)?;
                }
                Ok(SVal::Ref(obj))
            }
            Rhs::Call(call) => Ok(self
                .call(call, frame, depth)?
                .expect("type-checked non-void call")),
        }
    }

    fn call(&mut self, call: &Call, frame: &mut Frame, depth: usize) -> R<Option<SVal>> {
        let this = match &call.receiver {
            Some(r) => match self.eval_ref(r, frame)? {
                SRef::Null => return Err(Abort::Fault(Fault::NullDereference)),
                obj => obj,
            },
            None => SRef::Null,
        };
        let args = self.eval_args(&call.args, frame)?;
        self.enter(call.callee, this, args, depth)
    }

    /// Inlines `callee` or, past the inlining depth, havocs its effects.
    fn enter(
        &mut self,
        callee: MethodRef,
        this: SRef,
        args: Vec<SVal>,
        depth: usize,
    ) -> R<Option<SVal>> {
        if depth < self.config.inline_depth {
            return self.invoke(callee, this, args, depth + 1);
        }
        self.havoc(callee);
        match self.program.method(callee).ret {
            Some(ty) => Ok(Some(self.opaque(ty)?)),
            None => Ok(None),
        }
    }

    // ---- expressions ---------------------------------------------------

    fn eval_args(&mut self, args: &[Expr], frame: &Frame) -> R<Vec<SVal>> {
        args.iter().map(|a| self.eval(a, frame)).collect()
    }

    fn eval(&mut self, e: &Expr, frame: &Frame) -> R<SVal> {
        Ok(match e {
            Expr::Int(_) | Expr::Unary(UnOp::Neg, _) => SVal::Int(self.eval_int(e, frame)?),
            Expr::Binary(op, ..)
                if !op.is_comparison() && !matches!(op, BinOp::And | BinOp::Or) =>
            {
                SVal::Int(self.eval_int(e, frame)?)
            }
            Expr::Bool(_) | Expr::Unary(UnOp::Not, _) | Expr::Binary(..) => {
                SVal::Bool(self.eval_bool(e, frame)?)
            }
            Expr::Local(id) => frame.locals[id.0].clone(),
            Expr::This => SVal::Ref(frame.this),
            Expr::Global(g) => SVal::Ref(self.read_global(*g)),
            Expr::Field(base, f) => {
                let obj = self.eval_ref(base, frame)?;
                self.read_field(obj, *f)?
            }
        })
    }

    fn eval_ref(&mut self, e: &Expr, frame: &Frame) -> R<SRef> {
        match self.eval(e, frame)? {
            SVal::Ref(r) => Ok(r),
            other => unreachable!("type-checked reference expected, found {other:?}"),
        }
    }

    fn eval_int(&mut self, e: &Expr, frame: &Frame) -> R<LinExpr> {
        Ok(match e {
            Expr::Int(v) => LinExpr::constant(v.clone()),
            Expr::Unary(UnOp::Neg, x) => self.eval_int(x, frame)?.neg(),
            Expr::Binary(op, a, b) => {
                let a = self.eval_int(a, frame)?;
                let b = self.eval_int(b, frame)?;
                match op {
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => {
                        let product = a.mul(&b);
                        if product.is_nonlinear() {
                            self.exact = false;
                        }
                        product
                    }
                    BinOp::Div => match b.as_constant() {
                        Some(d) if d.is_zero() => return Err(Abort::Fault(Fault::DivisionByZero)),
                        Some(d) => a.div_const(d),
                        None => {
                            if self.decide(compare(BinOp::Eq, &b, &LinExpr::default()))? {
                                return Err(Abort::Fault(Fault::DivisionByZero));
                            }
                            self.exact = false;
                            a.div_nonconst(&b)
                        }
                    },
                    other => unreachable!("`{}` is not arithmetic", other.symbol()),
                }
            }
            other => match self.eval(other, frame)? {
                SVal::Int(v) => v,
                v => unreachable!("type-checked int expected, found {v:?}"),
            },
        })
    }

    /// Evaluates a condition with short-circuit semantics, branching on
    /// every atomic comparison.
    fn eval_bool(&mut self, e: &Expr, frame: &Frame) -> R<bool> {
        match e {
            Expr::Bool(b) => Ok(*b),
            Expr::Unary(UnOp::Not, x) => Ok(!self.eval_bool(x, frame)?),
            Expr::Binary(BinOp::And, a, b) => {
                Ok(self.eval_bool(a, frame)? && self.eval_bool(b, frame)?)
            }
            Expr::Binary(BinOp::Or, a, b) => {
                Ok(self.eval_bool(a, frame)? || self.eval_bool(b, frame)?)
            }
            Expr::Binary(op, a, b) if op.is_comparison() => {
                let a = self.eval_int(a, frame)?;
                let b = self.eval_int(b, frame)?;
                self.decide(compare(*op, &a, &b))
            }
            other => match self.eval(other, frame)? {
                SVal::Bool(v) => Ok(v),
                v => unreachable!("type-checked bool expected, found {v:?}"),
            },
        }
    }
}

fn default_value(ty: Type) -> SVal {
    match ty {
        Type::Int => SVal::Int(LinExpr::default()),
        Type::Bool => SVal::Bool(false),
        Type::Ref(_) => SVal::Ref(SRef::Null),
    }
}
