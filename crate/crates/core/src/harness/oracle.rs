//! Concrete evaluation of path conditions, for checking symbolic execution
//! against the interpreter.

use num::BigInt;

use crate::ir::{
    eval_state_path, ConcreteState, ExecLimits, Interpreter, MethodRef, PathValue, SubjectProgram,
    Value,
};
use crate::symexec::linear::{Env, Root, Symbol};
use crate::symexec::PathCondition;

/// Symbol values of one concrete invocation.
pub struct ConcreteEnv<'a> {
    pub program: &'a SubjectProgram,
    /// Parameter names and values.
    pub params: Vec<(String, Value)>,
    /// Values returned by `input(..)`, in order.
    pub inputs: Vec<BigInt>,
    /// The state when the method was entered.
    pub entry_state: &'a ConcreteState,
}

impl ConcreteEnv<'_> {
    fn value(&self, s: &Symbol) -> Option<Value> {
        match &s.root {
            Root::Param(name) if s.fields.is_empty() => self
                .params
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v.clone()),
            Root::Input(k) if s.fields.is_empty() => {
                self.inputs.get(*k as usize).cloned().map(Value::Int)
            }
            Root::State { .. } => {
                let resolved = s.state_path()?.resolve(self.program).ok()?;
                match eval_state_path(self.entry_state, &resolved) {
                    PathValue::Value(v) => Some(v),
                    PathValue::Unknown => None,
                }
            }
            _ => None,
        }
    }
}

impl Env for ConcreteEnv<'_> {
    fn int(&self, s: &Symbol) -> Option<BigInt> {
        match self.value(s)? {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    fn boolean(&self, s: &Symbol) -> Option<bool> {
        self.value(s)?.as_bool()
    }
}

/// Runs static `method` on `args` from `state` and counts the paths whose
/// clauses all hold for that run. Returns `None` when some loop ran more
/// than `loop_bound` iterations, since such runs have no path.
pub fn matching_paths(
    program: &SubjectProgram,
    method: MethodRef,
    paths: &[PathCondition],
    args: &[Value],
    state: &ConcreteState,
    loop_bound: usize,
) -> Option<usize> {
    let mut it = Interpreter::new(program, 0, ExecLimits::default());
    it.state = state.clone();
    let run = it.run_method(method, Value::Null, args.to_vec());
    if run.max_loop_iterations > loop_bound {
        return None;
    }
    let decl = program.method(method);
    let env = ConcreteEnv {
        program,
        params: decl.locals[..decl.params]
            .iter()
            .map(|l| l.name.clone())
            .zip(args.iter().cloned())
            .collect(),
        inputs: run.inputs,
        entry_state: state,
    };
    Some(
        paths
            .iter()
            .filter(|pc| pc.clauses.iter().all(|l| l.eval(&env) == Some(true)))
            .count(),
    )
}
