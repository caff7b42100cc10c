//! Concrete interpreter. Produces ground-truth event traces and exposes every
//! event, with the state just before it, to an [`Observer`].

use num::{BigInt, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::*;

/// Default limit on nested method activations.
pub const DEFAULT_MAX_CALL_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    Null,
    Ref(ObjId),
}

impl Value {
    pub fn default_for(ty: Type) -> Value {
        match ty {
            Type::Int => Value::Int(BigInt::zero()),
            Type::Bool => Value::Bool(false),
            Type::Ref(_) => Value::Null,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Object {
    pub class: ClassId,
    pub fields: Vec<Value>,
}

/// The whole program state: global roots plus the heap. Locals are not part
/// of it; conditions only ever read through globals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteState {
    pub globals: Vec<Value>,
    pub heap: Vec<Object>,
}

impl ConcreteState {
    /// All globals null, empty heap.
    pub fn initial(program: &SubjectProgram) -> Self {
        ConcreteState {
            globals: vec![Value::Null; program.globals.len()],
            heap: Vec::new(),
        }
    }

    /// Allocates an object with default field values.
    pub fn alloc(&mut self, program: &SubjectProgram, class: ClassId) -> ObjId {
        let fields = program
            .class(class)
            .fields
            .iter()
            .map(|f| Value::default_for(f.ty))
            .collect();
        self.heap.push(Object { class, fields });
        ObjId(self.heap.len() - 1)
    }

    pub fn object(&self, id: ObjId) -> &Object {
        &self.heap[id.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    NullDereference,
    DivisionByZero,
    StepBudgetExceeded,
    CallDepthExceeded,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fault::NullDereference => "null dereference",
            Fault::DivisionByZero => "division by zero",
            Fault::StepBudgetExceeded => "step budget exceeded",
            Fault::CallDepthExceeded => "call depth exceeded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "fault", rename_all = "snake_case")]
pub enum Termination {
    Normal,
    Fault(Fault),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecLimits {
    pub step_budget: u64,
    pub max_call_depth: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            step_budget: DEFAULT_STEP_BUDGET,
            max_call_depth: DEFAULT_MAX_CALL_DEPTH,
        }
    }
}

/// The complete event sequence of one run. A faulting run is truncated at
/// the fault.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthTrace {
    pub input_seed: u64,
    pub events: Vec<Event>,
    pub termination: Termination,
}

/// Receives every event of a run. `state` is the state immediately before
/// the event.
pub trait Observer {
    fn on_event(&mut self, index: usize, event: &Event, state: &ConcreteState);
    fn on_finish(&mut self, state: &ConcreteState, termination: Termination);

    /// Called when `caller` invokes `callee`, before the callee's body runs.
    fn on_call(&mut self, _caller: MethodRef, _callee: MethodRef) {}
}

impl Observer for () {
    fn on_event(&mut self, _: usize, _: &Event, _: &ConcreteState) {}
    fn on_finish(&mut self, _: &ConcreteState, _: Termination) {}
}

/// Outcome of [`Interpreter::run_method`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodRun {
    pub result: Result<Option<Value>, Fault>,
    /// Values returned by `input(..)` reads, in order.
    pub inputs: Vec<BigInt>,
    /// The largest iteration count of any single loop entry.
    pub max_loop_iterations: usize,
}

/// Runs the entry method of `program` with the given input seed.
pub fn interpret(
    program: &SubjectProgram,
    input_seed: u64,
    limits: ExecLimits,
    observer: &mut dyn Observer,
) -> GroundTruthTrace {
    let mut it = Interpreter::new(program, input_seed, limits);
    it.observer = Some(observer);
    let result = it.invoke(program.entry, None, Vec::new());
    let termination = match result {
        Ok(_) => Termination::Normal,
        Err(f) => Termination::Fault(f),
    };
    if let Some(obs) = it.observer.as_mut() {
        obs.on_finish(&it.state, termination);
    }
    GroundTruthTrace {
        input_seed,
        events: it.events,
        termination,
    }
}

enum Flow {
    Next,
    Return(Option<Value>),
}

struct Frame {
    this: Value,
    locals: Vec<Value>,
}

pub struct Interpreter<'p, 'o> {
    program: &'p SubjectProgram,
    observer: Option<&'o mut dyn Observer>,
    pub state: ConcreteState,
    rng: ChaCha8Rng,
    limits: ExecLimits,
    steps: u64,
    depth: usize,
    stack: Vec<MethodRef>,
    events: Vec<Event>,
    inputs: Vec<BigInt>,
    max_loop_iterations: usize,
}

type R<T> = Result<T, Fault>;

impl<'p, 'o> Interpreter<'p, 'o> {
    pub fn new(program: &'p SubjectProgram, input_seed: u64, limits: ExecLimits) -> Self {
        Interpreter {
            program,
            observer: None,
            state: ConcreteState::initial(program),
            rng: ChaCha8Rng::seed_from_u64(input_seed),
            limits,
            steps: 0,
            depth: 0,
            stack: Vec::new(),
            events: Vec::new(),
            inputs: Vec::new(),
            max_loop_iterations: 0,
        }
    }

    /// Events emitted so far.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Runs one method against the current state. `this` is ignored for
    /// static methods.
    pub fn run_method(&mut self, method: MethodRef, this: Value, args: Vec<Value>) -> MethodRun {
        self.inputs.clear();
        self.max_loop_iterations = 0;
        let this = if self.program.method(method).is_static {
            None
        } else {
            Some(this)
        };
        let result = self.invoke(method, this, args);
        MethodRun {
            result,
            inputs: std::mem::take(&mut self.inputs),
            max_loop_iterations: self.max_loop_iterations,
        }
    }

    fn tick(&mut self) -> R<()> {
        self.steps += 1;
        if self.steps > self.limits.step_budget {
            Err(Fault::StepBudgetExceeded)
        } else {
            Ok(())
        }
    }

    fn emit(&mut self, label: String) {
        let event = Event::new(label);
        if let Some(obs) = self.observer.as_mut() {
            obs.on_event(self.events.len(), &event, &self.state);
        }
        self.events.push(event);
    }

    fn invoke(
        &mut self,
        method: MethodRef,
        this: Option<Value>,
        args: Vec<Value>,
    ) -> R<Option<Value>> {
        if self.depth >= self.limits.max_call_depth {
            return Err(Fault::CallDepthExceeded);
        }
        let program = self.program;
        let decl = program.method(method);
        let mut locals: Vec<Value> = decl
            .locals
            .iter()
            .map(|l| Value::default_for(l.ty))
            .collect();
        for (slot, v) in locals.iter_mut().zip(args) {
            *slot = v;
        }
        let mut frame = Frame {
            this: this.unwrap_or(Value::Null),
            locals,
        };
        if let (Some(&caller), Some(obs)) = (self.stack.last(), self.observer.as_mut()) {
            obs.on_call(caller, method);
        }
        self.depth += 1;
        self.stack.push(method);
        let flow = self.block(&decl.body, &mut frame);
        self.stack.pop();
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(decl.ret.map(Value::default_for)),
        }
    }

    fn block(&mut self, body: &[Stmt], frame: &mut Frame) -> R<Flow> {
        for s in body {
            if let Flow::Return(v) = self.stmt(s, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &Stmt, frame: &mut Frame) -> R<Flow> {
        self.tick()?;
        match s {
            Stmt::Assign { target, value, .. } => {
                let v = self.rhs(value, frame)?;
                self.store(target, v, frame)?;
            }
            Stmt::Invoke(call) => {
                self.call(call, frame)?;
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let branch = if self.cond(cond, frame)? {
                    then_branch
                } else {
                    else_branch
                };
                return self.block(branch, frame);
            }
            Stmt::While { cond, body, .. } => {
                let mut iterations = 0usize;
                loop {
                    if !self.cond(cond, frame)? {
                        break;
                    }
                    iterations += 1;
                    self.max_loop_iterations = self.max_loop_iterations.max(iterations);
                    if let Flow::Return(v) = self.block(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                    self.tick()?;
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

    fn cond(&mut self, e: &Expr, frame: &Frame) -> R<bool> {
        Ok(self
            .eval(e, frame)?
            .as_bool()
            .expect("type-checked condition"))
    }

    fn store(&mut self, target: &Place, v: Value, frame: &mut Frame) -> R<()> {
        match target {
            Place::Local(id) => frame.locals[id.0] = v,
            Place::Global(g) => self.state.globals[g.0] = v,
            Place::Field(base, f) => {
                let obj = self.deref(base, frame)?;
                self.state.heap[obj.0].fields[f.index] = v;
            }
        }
        Ok(())
    }

    fn deref(&self, e: &Expr, frame: &Frame) -> R<ObjId> {
        match self.eval(e, frame)? {
            Value::Ref(id) => Ok(id),
            _ => Err(Fault::NullDereference),
        }
    }

    fn rhs(&mut self, r: &Rhs, frame: &mut Frame) -> R<Value> {
        match r {
            Rhs::Expr(e) => self.eval(e, frame),
            Rhs::Null => Ok(Value::Null),
            Rhs::Input { lo, hi } => {
                let v = BigInt::from(self.rng.random_range(*lo..=*hi));
                self.inputs.push(v.clone());
                Ok(Value::Int(v))
            }
            Rhs::New { class, args, .. } => {
                let args = self.eval_args(args, frame)?;
                let program = self.program;
                if program.is_interface(*class) {
                    self.emit(program.new_label(*class));
                }
                let obj = self.state.alloc(program, *class);
                if let Some(index) = program.class(*class).constructor {
                    let ctor = MethodRef {
                        class: *class,
                        index,
                    };
                    self.invoke(ctor, Some(Value::Ref(obj)), args)?;
                }
                Ok(Value::Ref(obj))
            }
            Rhs::Call(call) => Ok(self.call(call, frame)?.expect("type-checked non-void call")),
        }
    }

    fn eval_args(&self, args: &[Expr], frame: &Frame) -> R<Vec<Value>> {
        args.iter().map(|a| self.eval(a, frame)).collect()
    }

    fn call(&mut self, call: &Call, frame: &mut Frame) -> R<Option<Value>> {
        let this = match &call.receiver {
            Some(r) => Some(Value::Ref(self.deref(r, frame)?)),
            None => None,
        };
        let args = self.eval_args(&call.args, frame)?;
        let program = self.program;
        if program.is_interface(call.callee.class) {
            self.emit(program.call_label(call.callee));
        }
        self.invoke(call.callee, this, args)
    }

    fn eval(&self, e: &Expr, frame: &Frame) -> R<Value> {
        Ok(match e {
            Expr::Int(v) => Value::Int(v.clone()),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Local(id) => frame.locals[id.0].clone(),
            Expr::This => frame.this.clone(),
            Expr::Global(g) => self.state.globals[g.0].clone(),
            Expr::Field(base, f) => {
                let obj = self.deref(base, frame)?;
                self.state.heap[obj.0].fields[f.index].clone()
            }
            Expr::Unary(UnOp::Neg, x) => Value::Int(-int(self.eval(x, frame)?)),
            Expr::Unary(UnOp::Not, x) => Value::Bool(!boolean(self.eval(x, frame)?)),
            Expr::Binary(BinOp::And, a, b) => {
                Value::Bool(boolean(self.eval(a, frame)?) && boolean(self.eval(b, frame)?))
            }
            Expr::Binary(BinOp::Or, a, b) => {
                Value::Bool(boolean(self.eval(a, frame)?) || boolean(self.eval(b, frame)?))
            }
            Expr::Binary(op, a, b) => {
                let x = int(self.eval(a, frame)?);
                let y = int(self.eval(b, frame)?);
                apply_int_op(*op, &x, &y)?
            }
        })
    }
}

/// Applies an arithmetic or comparison operator. Division truncates toward
/// zero.
pub(crate) fn apply_int_op(op: BinOp, x: &BigInt, y: &BigInt) -> Result<Value, Fault> {
    Ok(match op {
        BinOp::Add => Value::Int(x + y),
        BinOp::Sub => Value::Int(x - y),
        BinOp::Mul => Value::Int(x * y),
        BinOp::Div => {
            if y.is_zero() {
                return Err(Fault::DivisionByZero);
            }
            Value::Int(x / y)
        }
        BinOp::Lt => Value::Bool(x < y),
        BinOp::Le => Value::Bool(x <= y),
        BinOp::Gt => Value::Bool(x > y),
        BinOp::Ge => Value::Bool(x >= y),
        BinOp::Eq => Value::Bool(x == y),
        BinOp::Ne => Value::Bool(x != y),
        BinOp::And | BinOp::Or => unreachable!("boolean operator on ints"),
    })
}

fn int(v: Value) -> BigInt {
    match v {
        Value::Int(i) => i,
        other => panic!("type-checked int expected, found {other:?}"),
    }
}

fn boolean(v: Value) -> bool {
    v.as_bool().expect("type-checked bool")
}
