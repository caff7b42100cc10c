//! Satisfiability of literal conjunctions over linear integer arithmetic
//! and boolean symbols.
//!
//! Linear constraints go to a general simplex over the rationals (Bland's
//! rule) wrapped in branch-and-bound for integrality. Disequalities and
//! division atoms introduce disjunctions that are explored depth first with
//! pruning. Products and non-constant divisions are treated as unconstrained
//! integers, so `Unsat` is always exact while `Sat` may be spurious for
//! nonlinear inputs.

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};

use super::linear::{Atom, LinExpr, Literal, Pred, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Sat,
    Unsat,
    /// A resource limit was hit; callers treat this as feasible.
    Unknown,
}

impl Feasibility {
    pub fn possibly_sat(self) -> bool {
        self != Feasibility::Unsat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverLimits {
    /// Branch-and-bound nodes per disjunct combination.
    pub node_budget: usize,
    /// Disjunct combinations explored before giving up.
    pub split_budget: usize,
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            node_budget: 400,
            split_budget: 4096,
        }
    }
}

/// An inclusive integer range assumed for a symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Range {
    pub symbol: Symbol,
    pub lo: BigInt,
    pub hi: BigInt,
}

/// `lo <= sum(coeffs * x) <= hi` over integer variables.
#[derive(Debug, Clone)]
struct Constraint {
    coeffs: Vec<(usize, BigInt)>,
    lo: Option<BigInt>,
    hi: Option<BigInt>,
}

#[derive(Default)]
struct Encoder {
    vars: BTreeMap<Atom, usize>,
    fixed: Vec<Constraint>,
    /// Each entry requires at least one of its alternatives (a conjunction).
    disjunctions: Vec<Vec<Vec<Constraint>>>,
}

impl Encoder {
    fn var(&mut self, atom: &Atom) -> usize {
        if let Some(v) = self.vars.get(atom) {
            return *v;
        }
        let v = self.vars.len();
        self.vars.insert(atom.clone(), v);
        match atom {
            Atom::Sym(_) => {}
            Atom::Div(inner, d) => {
                // q = trunc(e / d)
                let (e, c) = self.linear(inner);
                let dq = vec![(v, d.clone())];
                let nonneg = vec![
                    bound(&e, Some(-&c), None),
                    // d*q <= e + c <= d*q + d - 1
                    bound(&combine(&e, &dq, -1), Some(-&c), Some(d - 1 - &c)),
                ];
                let neg = vec![
                    bound(&e, None, Some(-&c - 1)),
                    // d*q - (d - 1) <= e + c <= d*q
                    bound(
                        &combine(&e, &dq, -1),
                        Some(-(d - BigInt::one()) - &c),
                        Some(-&c),
                    ),
                ];
                self.disjunctions.push(vec![nonneg, neg]);
            }
            Atom::Mul(a, b) | Atom::NlDiv(a, b) => {
                // Register nested atoms so they share variables.
                self.linear(a);
                self.linear(b);
            }
        }
        v
    }

    /// Variable form of `e`, and its constant.
    fn linear(&mut self, e: &LinExpr) -> (Vec<(usize, BigInt)>, BigInt) {
        let coeffs = e
            .terms
            .iter()
            .map(|(a, c)| (self.var(a), c.clone()))
            .collect();
        (coeffs, e.constant.clone())
    }
}

fn bound(coeffs: &[(usize, BigInt)], lo: Option<BigInt>, hi: Option<BigInt>) -> Constraint {
    Constraint {
        coeffs: coeffs.to_vec(),
        lo,
        hi,
    }
}

/// `a + sign * b` as a coefficient list.
fn combine(a: &[(usize, BigInt)], b: &[(usize, BigInt)], sign: i32) -> Vec<(usize, BigInt)> {
    let mut map: BTreeMap<usize, BigInt> = BTreeMap::new();
    for (v, c) in a {
        *map.entry(*v).or_insert_with(BigInt::zero) += c;
    }
    for (v, c) in b {
        *map.entry(*v).or_insert_with(BigInt::zero) += c * BigInt::from(sign);
    }
    map.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

/// Decides a conjunction of literals under the given symbol ranges.
pub fn check(literals: &[Literal], ranges: &[Range], limits: &SolverLimits) -> Feasibility {
    let mut bools: BTreeMap<&Symbol, bool> = BTreeMap::new();
    for l in literals {
        if let Pred::Bool(s) = &l.pred {
            if *bools.entry(s).or_insert(l.positive) != l.positive {
                return Feasibility::Unsat;
            }
        }
    }
    let mut enc = Encoder::default();
    for r in ranges {
        let v = enc.var(&Atom::Sym(r.symbol.clone()));
        enc.fixed.push(bound(
            &[(v, BigInt::one())],
            Some(r.lo.clone()),
            Some(r.hi.clone()),
        ));
    }
    for l in literals {
        let (lhs, k, is_eq) = match &l.pred {
            Pred::Bool(_) => continue,
            Pred::Gt { lhs, k } => (lhs, k, false),
            Pred::Eq { lhs, k } => (lhs, k, true),
        };
        let (coeffs, c) = enc.linear(lhs);
        let k = k - &c;
        match (is_eq, l.positive) {
            (false, true) => enc.fixed.push(bound(&coeffs, Some(&k + 1), None)),
            (false, false) => enc.fixed.push(bound(&coeffs, None, Some(k))),
            (true, true) => enc.fixed.push(bound(&coeffs, Some(k.clone()), Some(k))),
            (true, false) => enc.disjunctions.push(vec![
                vec![bound(&coeffs, None, Some(&k - 1))],
                vec![bound(&coeffs, Some(&k + 1), None)],
            ]),
        }
    }
    let n = enc.vars.len();
    let mut search = Search {
        n,
        disjunctions: &enc.disjunctions,
        limits,
        splits: 0,
    };
    search.run(enc.fixed.clone(), 0)
}

struct Search<'a> {
    n: usize,
    disjunctions: &'a [Vec<Vec<Constraint>>],
    limits: &'a SolverLimits,
    splits: usize,
}

impl Search<'_> {
    fn run(&mut self, active: Vec<Constraint>, next: usize) -> Feasibility {
        if next == self.disjunctions.len() {
            return integer_feasible(self.n, &active, self.limits.node_budget);
        }
        // Prune with the rational relaxation before splitting further.
        if rational_check(self.n, &active, &vec![(None, None); self.n]).is_none() {
            return Feasibility::Unsat;
        }
        let mut unknown = false;
        for alt in &self.disjunctions[next] {
            self.splits += 1;
            if self.splits > self.limits.split_budget {
                return Feasibility::Unknown;
            }
            let mut extended = active.clone();
            extended.extend(alt.iter().cloned());
            match self.run(extended, next + 1) {
                Feasibility::Sat => return Feasibility::Sat,
                Feasibility::Unknown => unknown = true,
                Feasibility::Unsat => {}
            }
        }
        if unknown {
            Feasibility::Unknown
        } else {
            Feasibility::Unsat
        }
    }
}

type Q = BigRational;
type Bounds = Vec<(Option<BigInt>, Option<BigInt>)>;

fn integer_feasible(n: usize, constraints: &[Constraint], budget: usize) -> Feasibility {
    let mut nodes = 0usize;
    branch_and_bound(n, constraints, vec![(None, None); n], &mut nodes, budget)
}

fn branch_and_bound(
    n: usize,
    constraints: &[Constraint],
    bounds: Bounds,
    nodes: &mut usize,
    budget: usize,
) -> Feasibility {
    *nodes += 1;
    if *nodes > budget {
        return Feasibility::Unknown;
    }
    let Some(values) = rational_check(n, constraints, &bounds) else {
        return Feasibility::Unsat;
    };
    let Some((var, value)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_integer())
        .map(|(i, v)| (i, v.clone()))
    else {
        return Feasibility::Sat;
    };
    let mut down = bounds.clone();
    down[var].1 = Some(value.floor().to_integer());
    let first = branch_and_bound(n, constraints, down, nodes, budget);
    if first == Feasibility::Sat {
        return first;
    }
    let mut up = bounds;
    up[var].0 = Some(value.ceil().to_integer());
    match (first, branch_and_bound(n, constraints, up, nodes, budget)) {
        (_, Feasibility::Sat) => Feasibility::Sat,
        (Feasibility::Unsat, Feasibility::Unsat) => Feasibility::Unsat,
        _ => Feasibility::Unknown,
    }
}

/// Rational feasibility; returns values of the `n` original variables.
fn rational_check(n: usize, constraints: &[Constraint], bounds: &Bounds) -> Option<Vec<Q>> {
    let mut s = Simplex::new(n);
    for (v, (lo, hi)) in bounds.iter().enumerate() {
        if let Some(lo) = lo {
            s.tighten_lo(v, Q::from_integer(lo.clone()));
        }
        if let Some(hi) = hi {
            s.tighten_hi(v, Q::from_integer(hi.clone()));
        }
    }
    for c in constraints {
        s.add(c);
    }
    if !s.solve() {
        return None;
    }
    Some(s.val[..n].to_vec())
}

/// Dutertre & de Moura general simplex.
struct Simplex {
    lo: Vec<Option<Q>>,
    hi: Vec<Option<Q>>,
    val: Vec<Q>,
    /// `rows[r] = (basic var, coefficients over non-basic vars)`.
    rows: Vec<(usize, BTreeMap<usize, Q>)>,
    row_of: Vec<Option<usize>>,
    conflict: bool,
}

impl Simplex {
    fn new(n: usize) -> Self {
        Simplex {
            lo: vec![None; n],
            hi: vec![None; n],
            val: vec![Q::zero(); n],
            rows: Vec::new(),
            row_of: vec![None; n],
            conflict: false,
        }
    }

    fn tighten_lo(&mut self, v: usize, b: Q) {
        if self.lo[v].as_ref().is_none_or(|old| b > *old) {
            self.lo[v] = Some(b);
        }
    }

    fn tighten_hi(&mut self, v: usize, b: Q) {
        if self.hi[v].as_ref().is_none_or(|old| b < *old) {
            self.hi[v] = Some(b);
        }
    }

    fn add(&mut self, c: &Constraint) {
        let lo = c.lo.clone().map(Q::from_integer);
        let hi = c.hi.clone().map(Q::from_integer);
        match c.coeffs.as_slice() {
            [] => {
                let zero = Q::zero();
                if lo.is_some_and(|l| l > zero) || hi.is_some_and(|h| h < zero) {
                    self.conflict = true;
                }
            }
            [(v, a)] => {
                // Integer variable: round the scaled bound inward.
                let a = Q::from_integer(a.clone());
                let (lo, hi) = if a.is_positive() {
                    (lo.map(|l| l / &a), hi.map(|h| h / &a))
                } else {
                    (hi.map(|h| h / &a), lo.map(|l| l / &a))
                };
                if let Some(l) = lo {
                    self.tighten_lo(*v, l.ceil());
                }
                if let Some(h) = hi {
                    self.tighten_hi(*v, h.floor());
                }
            }
            coeffs => {
                let s = self.val.len();
                self.lo.push(lo);
                self.hi.push(hi);
                self.val.push(Q::zero());
                self.row_of.push(Some(self.rows.len()));
                let mut row = BTreeMap::new();
                for (v, a) in coeffs {
                    let a = Q::from_integer(a.clone());
                    match self.row_of[*v] {
                        // Substitute basic variables (not expected for fresh
                        // rows, kept for generality).
                        Some(r) => {
                            for (k, c) in self.rows[r].1.clone() {
                                add_to(&mut row, k, &a * c);
                            }
                        }
                        None => add_to(&mut row, *v, a),
                    }
                }
                self.rows.push((s, row));
            }
        }
    }

    fn solve(&mut self) -> bool {
        if self.conflict {
            return false;
        }
        let n = self.val.len();
        for v in 0..n {
            if let (Some(l), Some(h)) = (&self.lo[v], &self.hi[v]) {
                if l > h {
                    return false;
                }
            }
            if self.row_of[v].is_none() {
                self.val[v] = self.clamp(v, Q::zero());
            }
        }
        for r in 0..self.rows.len() {
            let b = self.rows[r].0;
            self.val[b] = self.row_value(r);
        }
        loop {
            // Smallest violating basic variable.
            let violating = (0..n)
                .filter(|v| self.row_of[*v].is_some())
                .find(|v| self.below(*v) || self.above(*v));
            let Some(b) = violating else {
                return true;
            };
            let r = self.row_of[b].unwrap();
            let increase = self.below(b);
            let entering = self.rows[r].1.iter().find_map(|(j, a)| {
                let can_up = self.hi[*j].as_ref().is_none_or(|h| self.val[*j] < *h);
                let can_down = self.lo[*j].as_ref().is_none_or(|l| self.val[*j] > *l);
                let ok = if increase == a.is_positive() {
                    can_up
                } else {
                    can_down
                };
                ok.then_some(*j)
            });
            let Some(j) = entering else {
                return false;
            };
            let target = if increase {
                self.lo[b].clone().unwrap()
            } else {
                self.hi[b].clone().unwrap()
            };
            self.pivot_and_update(b, j, target);
        }
    }

    fn clamp(&self, v: usize, x: Q) -> Q {
        if let Some(l) = &self.lo[v] {
            if x < *l {
                return l.clone();
            }
        }
        if let Some(h) = &self.hi[v] {
            if x > *h {
                return h.clone();
            }
        }
        x
    }

    fn below(&self, v: usize) -> bool {
        self.lo[v].as_ref().is_some_and(|l| self.val[v] < *l)
    }

    fn above(&self, v: usize) -> bool {
        self.hi[v].as_ref().is_some_and(|h| self.val[v] > *h)
    }

    fn row_value(&self, r: usize) -> Q {
        self.rows[r]
            .1
            .iter()
            .fold(Q::zero(), |acc, (v, a)| acc + a * &self.val[*v])
    }

    fn pivot_and_update(&mut self, b: usize, j: usize, target: Q) {
        let r = self.row_of[b].unwrap();
        let a_bj = self.rows[r].1[&j].clone();
        let theta = (&target - &self.val[b]) / &a_bj;
        self.val[b] = target;
        self.val[j] += &theta;
        for (other, (basic, row)) in self.rows.iter().enumerate() {
            if other != r {
                if let Some(a) = row.get(&j) {
                    self.val[*basic] += a * &theta;
                }
            }
        }
        // Solve row r for x_j: x_j = (x_b - sum_{k != j} a_k x_k) / a_j.
        let mut new_row = BTreeMap::new();
        new_row.insert(b, Q::one() / &a_bj);
        for (k, a) in &self.rows[r].1 {
            if *k != j {
                new_row.insert(*k, -(a / &a_bj));
            }
        }
        for (other, (_, row)) in self.rows.iter_mut().enumerate() {
            if other == r {
                continue;
            }
            if let Some(c) = row.remove(&j) {
                for (k, a) in &new_row {
                    add_to(row, *k, &c * a);
                }
            }
        }
        self.rows[r] = (j, new_row);
        self.row_of[j] = Some(r);
        self.row_of[b] = None;
    }
}

fn add_to(row: &mut BTreeMap<usize, Q>, k: usize, c: Q) {
    let entry = row.entry(k).or_insert_with(Q::zero);
    *entry += c;
    if entry.is_zero() {
        row.remove(&k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::BinOp;
    use crate::symexec::linear::{compare, NormLit, Root};

    fn x(name: &str) -> LinExpr {
        LinExpr::symbol(Symbol::root(Root::Param(name.into())))
    }

    fn k(v: i64) -> LinExpr {
        LinExpr::constant(v)
    }

    fn lit(op: BinOp, a: &LinExpr, b: &LinExpr) -> Literal {
        match compare(op, a, b) {
            NormLit::Lit(l) => l,
            NormLit::Const(c) => panic!("constant {c}"),
        }
    }

    fn run(lits: &[Literal]) -> Feasibility {
        check(lits, &[], &SolverLimits::default())
    }

    #[test]
    fn simple_bounds() {
        assert_eq!(
            run(&[
                lit(BinOp::Gt, &x("a"), &k(3)),
                lit(BinOp::Lt, &x("a"), &k(5))
            ]),
            Feasibility::Sat
        );
        assert_eq!(
            run(&[
                lit(BinOp::Gt, &x("a"), &k(3)),
                lit(BinOp::Lt, &x("a"), &k(4))
            ]),
            Feasibility::Unsat
        );
    }

    #[test]
    fn integrality_matters() {
        // 2a + 2b == 1 has rational but no integer solutions; the gcd rule
        // already decides it, so use a coupled system instead:
        // a + b >= 1, a - b == 0, a + b <= 1  ->  2a == 1
        let a = x("a");
        let b = x("b");
        let lits = [
            lit(BinOp::Ge, &a.add(&b), &k(1)),
            lit(BinOp::Eq, &a.sub(&b), &k(0)),
            lit(BinOp::Le, &a.add(&b), &k(1)),
        ];
        assert_eq!(run(&lits), Feasibility::Unsat);
    }

    #[test]
    fn disequality_splits() {
        let a = x("a");
        let lits = [
            lit(BinOp::Ge, &a, &k(2)),
            lit(BinOp::Le, &a, &k(2)),
            lit(BinOp::Ne, &a, &k(2)),
        ];
        assert_eq!(run(&lits), Feasibility::Unsat);
        assert_eq!(run(&lits[1..]), Feasibility::Sat);
    }

    #[test]
    fn truncating_division_atoms() {
        // a / 3 > 0 and a < 3 is unsat (trunc(a/3) >= 1 needs a >= 3)
        let a = x("a");
        let q = a.div_const(&BigInt::from(3));
        assert_eq!(
            run(&[lit(BinOp::Gt, &q, &k(0)), lit(BinOp::Lt, &a, &k(3))]),
            Feasibility::Unsat
        );
        // a / 3 == 0 and a == -2 is sat (truncation toward zero)
        assert_eq!(
            run(&[lit(BinOp::Eq, &q, &k(0)), lit(BinOp::Eq, &a, &k(-2))]),
            Feasibility::Sat
        );
        // a / 3 == -1 and a == -2 is unsat
        assert_eq!(
            run(&[lit(BinOp::Eq, &q, &k(-1)), lit(BinOp::Eq, &a, &k(-2))]),
            Feasibility::Unsat
        );
    }

    #[test]
    fn bool_literals_conflict() {
        let s = Symbol::root(Root::Param("flag".into()));
        let p = Literal {
            pred: Pred::Bool(s),
            positive: true,
        };
        assert_eq!(run(std::slice::from_ref(&p)), Feasibility::Sat);
        assert_eq!(run(&[p.clone(), p.negate()]), Feasibility::Unsat);
    }

    #[test]
    fn ranges_are_respected() {
        let s = Symbol::root(Root::Input(0));
        let r = Range {
            symbol: s.clone(),
            lo: BigInt::from(1),
            hi: BigInt::from(6),
        };
        let l = lit(BinOp::Gt, &LinExpr::symbol(s), &k(6));
        assert_eq!(
            check(&[l], &[r], &SolverLimits::default()),
            Feasibility::Unsat
        );
    }

    #[test]
    fn products_are_relaxed() {
        let a = x("a");
        let sq = a.mul(&a);
        // a*a < 0 is unsat over the integers but the relaxation keeps it.
        assert!(run(&[lit(BinOp::Lt, &sq, &k(0))]).possibly_sat());
    }
}
