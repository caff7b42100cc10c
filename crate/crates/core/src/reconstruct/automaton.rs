//! An automaton over event labels whose language contains every event
//! sequence the program can produce from its entry method.
//!
//! The automaton is the interprocedural control-flow graph with branch
//! conditions ignored and everything except interface events turned into
//! ε-moves. Callees are inlined at each call site up to a depth and size
//! limit, which keeps calls and returns matched. Beyond the limit, and for
//! recursion, a call jumps into a single shared copy of the callee whose
//! exit returns to every such call site. That loses call/return matching
//! but never drops a real sequence.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::ir::{Event, MethodRef, Rhs, Stmt, SubjectProgram};

/// Nesting depth up to which callees are copied into their call sites.
pub const DEFAULT_INLINE_LIMIT: usize = 6;
/// Once the automaton has this many states, further calls use shared copies.
pub const DEFAULT_STATE_LIMIT: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeasibilityError {
    #[error("unknown event label `{0}`")]
    UnknownLabel(String),
}

#[derive(Debug, Clone)]
pub struct EventAutomaton {
    labels: BTreeMap<String, u32>,
    eps: Vec<Vec<u32>>,
    moves: Vec<Vec<(u32, u32)>>,
    initial: u32,
    accepting: u32,
    /// States reachable from `initial` that can still reach `accepting`.
    useful: Vec<bool>,
}

struct Builder<'p> {
    program: &'p SubjectProgram,
    labels: BTreeMap<String, u32>,
    eps: Vec<Vec<u32>>,
    moves: Vec<Vec<(u32, u32)>>,
    shared: HashMap<MethodRef, (u32, u32)>,
    inline_stack: Vec<MethodRef>,
    inline_limit: usize,
    state_limit: usize,
}

impl Builder<'_> {
    fn state(&mut self) -> u32 {
        self.eps.push(Vec::new());
        self.moves.push(Vec::new());
        (self.eps.len() - 1) as u32
    }

    fn eps(&mut self, from: u32, to: u32) {
        self.eps[from as usize].push(to);
    }

    fn event(&mut self, from: u32, label: &str) -> u32 {
        let to = self.state();
        let l = self.labels[label];
        self.moves[from as usize].push((l, to));
        to
    }

    /// A fresh copy of `m`'s body; returns its entry and exit.
    fn inline(&mut self, m: MethodRef) -> (u32, u32) {
        let entry = self.state();
        let exit = self.state();
        self.inline_stack.push(m);
        let program = self.program;
        let end = self.block(&program.method(m).body, entry, exit);
        self.eps(end, exit);
        self.inline_stack.pop();
        (entry, exit)
    }

    fn shared(&mut self, m: MethodRef) -> (u32, u32) {
        if let Some(&pair) = self.shared.get(&m) {
            return pair;
        }
        let entry = self.state();
        let exit = self.state();
        self.shared.insert(m, (entry, exit));
        // Calls made from a shared copy also go to shared copies.
        let saved = std::mem::replace(&mut self.inline_limit, 0);
        let program = self.program;
        let end = self.block(&program.method(m).body, entry, exit);
        self.eps(end, exit);
        self.inline_limit = saved;
        (entry, exit)
    }

    fn body_of(&mut self, from: u32, m: MethodRef) -> u32 {
        let inline = self.inline_stack.len() < self.inline_limit
            && !self.inline_stack.contains(&m)
            && self.eps.len() < self.state_limit;
        let (entry, exit) = if inline {
            self.inline(m)
        } else {
            self.shared(m)
        };
        self.eps(from, entry);
        let after = self.state();
        self.eps(exit, after);
        after
    }

    fn call(&mut self, from: u32, callee: MethodRef) -> u32 {
        let from = if self.program.is_interface(callee.class) {
            let label = self.program.call_label(callee);
            self.event(from, &label)
        } else {
            from
        };
        self.body_of(from, callee)
    }

    fn block(&mut self, body: &[Stmt], mut cur: u32, exit: u32) -> u32 {
        for s in body {
            cur = self.stmt(s, cur, exit);
        }
        cur
    }

    fn stmt(&mut self, s: &Stmt, cur: u32, exit: u32) -> u32 {
        let program = self.program;
        match s {
            Stmt::Assign { value, .. } => match value {
                Rhs::Call(c) => self.call(cur, c.callee),
                Rhs::New { class, .. } => {
                    let mut cur = cur;
                    if program.is_interface(*class) {
                        let label = program.new_label(*class);
                        cur = self.event(cur, &label);
                    }
                    match program.class(*class).constructor {
                        Some(index) => self.body_of(
                            cur,
                            MethodRef {
                                class: *class,
                                index,
                            },
                        ),
                        None => cur,
                    }
                }
                Rhs::Expr(_) | Rhs::Null | Rhs::Input { .. } => cur,
            },
            Stmt::Invoke(c) => self.call(cur, c.callee),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                let join = self.state();
                let t = self.block(then_branch, cur, exit);
                self.eps(t, join);
                let e = self.block(else_branch, cur, exit);
                self.eps(e, join);
                join
            }
            Stmt::While { body, .. } => {
                let head = self.state();
                self.eps(cur, head);
                let end = self.block(body, head, exit);
                self.eps(end, head);
                head
            }
            Stmt::Return(_) => {
                self.eps(cur, exit);
                // Anything after a return is unreachable.
                self.state()
            }
        }
    }
}

/// Builds the automaton with the default inlining limits.
pub fn build_event_automaton(program: &SubjectProgram) -> EventAutomaton {
    build_event_automaton_with(program, DEFAULT_INLINE_LIMIT, DEFAULT_STATE_LIMIT)
}

pub fn build_event_automaton_with(
    program: &SubjectProgram,
    inline_limit: usize,
    state_limit: usize,
) -> EventAutomaton {
    let labels = program
        .event_labels()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i as u32))
        .collect();
    let mut b = Builder {
        program,
        labels,
        eps: Vec::new(),
        moves: Vec::new(),
        shared: HashMap::new(),
        inline_stack: Vec::new(),
        inline_limit,
        state_limit,
    };
    // The entry is always inlined so that the accepting state is unique.
    b.inline_limit = b.inline_limit.max(1);
    let (initial, accepting) = b.inline(program.entry);
    let mut a = EventAutomaton {
        labels: b.labels,
        eps: b.eps,
        moves: b.moves,
        initial,
        accepting,
        useful: Vec::new(),
    };
    a.useful = a.useful_states();
    a
}

impl EventAutomaton {
    pub fn state_count(&self) -> usize {
        self.eps.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    fn successors(&self, s: u32) -> impl Iterator<Item = u32> + '_ {
        self.eps[s as usize]
            .iter()
            .copied()
            .chain(self.moves[s as usize].iter().map(|&(_, t)| t))
    }

    fn useful_states(&self) -> Vec<bool> {
        let n = self.state_count();
        let mut fwd = vec![false; n];
        let mut stack = vec![self.initial];
        fwd[self.initial as usize] = true;
        while let Some(s) = stack.pop() {
            for t in self.successors(s) {
                if !fwd[t as usize] {
                    fwd[t as usize] = true;
                    stack.push(t);
                }
            }
        }
        let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
        for s in 0..n as u32 {
            for t in self.successors(s) {
                preds[t as usize].push(s);
            }
        }
        let mut back = vec![false; n];
        let mut stack = vec![self.accepting];
        back[self.accepting as usize] = true;
        while let Some(s) = stack.pop() {
            for &p in &preds[s as usize] {
                if !back[p as usize] {
                    back[p as usize] = true;
                    stack.push(p);
                }
            }
        }
        fwd.iter().zip(back).map(|(a, b)| *a && b).collect()
    }

    /// Accepts exactly the words of the language (prefix semantics), for
    /// tests and diagnostics.
    pub fn accepts_word(&self, events: &[Event]) -> Result<bool, FeasibilityError> {
        let ids = self.label_ids(events)?;
        let mut set = self.closure(vec![self.initial]);
        for l in ids {
            set = self.step(&set, l);
        }
        Ok(set.binary_search(&self.accepting).is_ok())
    }

    fn label_ids(&self, events: &[Event]) -> Result<Vec<u32>, FeasibilityError> {
        events
            .iter()
            .map(|e| {
                self.labels
                    .get(&e.label)
                    .copied()
                    .ok_or_else(|| FeasibilityError::UnknownLabel(e.label.clone()))
            })
            .collect()
    }

    /// Useful states ε-reachable from `seeds`, sorted.
    fn closure(&self, seeds: Vec<u32>) -> Vec<u32> {
        let mut seen = std::collections::HashSet::new();
        let mut stack: Vec<u32> = seeds
            .into_iter()
            .filter(|s| self.useful[*s as usize])
            .collect();
        let mut out = Vec::new();
        while let Some(s) = stack.pop() {
            if !seen.insert(s) {
                continue;
            }
            out.push(s);
            for &t in &self.eps[s as usize] {
                if self.useful[t as usize] && !seen.contains(&t) {
                    stack.push(t);
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn step(&self, set: &[u32], label: u32) -> Vec<u32> {
        let targets = set
            .iter()
            .flat_map(|&s| self.moves[s as usize].iter())
            .filter(|(l, _)| *l == label)
            .map(|&(_, t)| t)
            .collect();
        self.closure(targets)
    }

    /// Targets of every useful `label` move, closed: the states reachable
    /// by reading `label` from anywhere in a run.
    fn step_from_anywhere(&self, label: u32) -> Vec<u32> {
        let targets = (0..self.state_count())
            .filter(|&s| self.useful[s])
            .flat_map(|s| self.moves[s].iter())
            .filter(|(l, _)| *l == label)
            .map(|&(_, t)| t)
            .collect();
        self.closure(targets)
    }
}

/// Decides substring acceptance, memoizing the subset construction across
/// queries.
pub struct FeasibilityChecker<'a> {
    automaton: &'a EventAutomaton,
    index: HashMap<Vec<u32>, usize>,
    sets: Vec<Vec<u32>>,
    /// `(set, label) -> set`. Set 0 is "anywhere in a run".
    trans: HashMap<(usize, u32), usize>,
}

const ANYWHERE: usize = 0;

impl<'a> FeasibilityChecker<'a> {
    pub fn new(automaton: &'a EventAutomaton) -> Self {
        FeasibilityChecker {
            automaton,
            index: HashMap::new(),
            sets: vec![Vec::new()],
            trans: HashMap::new(),
        }
    }

    fn intern(&mut self, set: Vec<u32>) -> usize {
        if let Some(&i) = self.index.get(&set) {
            return i;
        }
        self.sets.push(set.clone());
        let i = self.sets.len() - 1;
        self.index.insert(set, i);
        i
    }

    /// True iff `events` occurs contiguously in some word of the language.
    pub fn feasible(&mut self, events: &[Event]) -> Result<bool, FeasibilityError> {
        let ids = self.automaton.label_ids(events)?;
        let mut cur = ANYWHERE;
        for l in ids {
            cur = match self.trans.get(&(cur, l)) {
                Some(&next) => next,
                None => {
                    let next = if cur == ANYWHERE {
                        self.automaton.step_from_anywhere(l)
                    } else {
                        self.automaton.step(&self.sets[cur], l)
                    };
                    let next = self.intern(next);
                    self.trans.insert((cur, l), next);
                    next
                }
            };
            if cur != ANYWHERE && self.sets[cur].is_empty() {
                return Ok(false);
            }
        }
        Ok(cur == ANYWHERE || !self.sets[cur].is_empty())
    }
}

/// One-off form of [`FeasibilityChecker::feasible`].
pub fn cfg_feasible(
    automaton: &EventAutomaton,
    events: &[Event],
) -> Result<bool, FeasibilityError> {
    FeasibilityChecker::new(automaton).feasible(events)
}
