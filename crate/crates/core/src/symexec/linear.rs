//! Linear integer forms over symbolic atoms, atomic predicates and their
//! canonical rendering.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, Integer, One, Signed, Zero};

use crate::ir::StatePath;

/// Where a symbolic value comes from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Root {
    /// A class-scoped global, `Owner.name`.
    State {
        owner: String,
        global: String,
    },
    This,
    Param(String),
    /// The `k`-th `input(..)` read of the analyzed method.
    Input(u32),
    /// A value produced by a call that was not inlined.
    Opaque(u32),
}

/// A root followed by a field selection chain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub root: Root,
    pub fields: Vec<String>,
}

impl Symbol {
    pub fn root(root: Root) -> Self {
        Symbol {
            root,
            fields: Vec::new(),
        }
    }

    pub fn child(&self, field: &str) -> Self {
        let mut fields = self.fields.clone();
        fields.push(field.to_string());
        Symbol {
            root: self.root.clone(),
            fields,
        }
    }

    pub fn is_state(&self) -> bool {
        matches!(self.root, Root::State { .. })
    }

    /// The state path this symbol reads, for state-rooted symbols.
    pub fn state_path(&self) -> Option<StatePath> {
        match &self.root {
            Root::State { owner, global } => {
                let mut segments = vec![owner.clone(), global.clone()];
                segments.extend(self.fields.iter().cloned());
                Some(StatePath::new(segments))
            }
            _ => None,
        }
    }

    pub fn from_state_path(path: &StatePath) -> Self {
        Symbol {
            root: Root::State {
                owner: path.segments[0].clone(),
                global: path.segments[1].clone(),
            },
            fields: path.segments[2..].to_vec(),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.root {
            Root::State { owner, global } => write!(f, "{owner}.{global}")?,
            Root::This => f.write_str("this")?,
            Root::Param(name) => write!(f, "param:{name}")?,
            Root::Input(k) => write!(f, "input#{k}")?,
            Root::Opaque(k) => write!(f, "opaque#{k}")?,
        }
        for field in &self.fields {
            write!(f, ".{field}")?;
        }
        Ok(())
    }
}

/// An integer-valued leaf of a [`LinExpr`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Sym(Symbol),
    /// Truncating division by a constant `d > 1`.
    Div(Box<LinExpr>, BigInt),
    /// Product of two non-constant forms (operands ordered).
    Mul(Box<LinExpr>, Box<LinExpr>),
    /// Truncating division by a non-constant form.
    NlDiv(Box<LinExpr>, Box<LinExpr>),
}

impl Atom {
    pub fn is_nonlinear(&self) -> bool {
        match self {
            Atom::Sym(_) => false,
            Atom::Div(inner, _) => inner.is_nonlinear(),
            Atom::Mul(..) | Atom::NlDiv(..) => true,
        }
    }

    fn symbols<'a>(&'a self, out: &mut Vec<&'a Symbol>) {
        match self {
            Atom::Sym(s) => out.push(s),
            Atom::Div(inner, _) => inner.collect_symbols(out),
            Atom::Mul(a, b) | Atom::NlDiv(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    /// Renders the atom so that it re-parses as a single operand of `*`.
    fn render_operand(&self) -> String {
        match self {
            Atom::Sym(s) => s.to_string(),
            _ => format!("({self})"),
        }
    }
}

fn render_inner(e: &LinExpr) -> String {
    match e.single_atom() {
        Some(Atom::Sym(s)) => s.to_string(),
        _ => format!("({e})"),
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Sym(s) => write!(f, "{s}"),
            Atom::Div(inner, d) => write!(f, "{} / {d}", render_inner(inner)),
            Atom::Mul(a, b) => write!(f, "{} * {}", render_inner(a), render_inner(b)),
            Atom::NlDiv(a, b) => write!(f, "{} / {}", render_inner(a), render_inner(b)),
        }
    }
}

/// `sum(coeff * atom) + constant`, with no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LinExpr {
    pub terms: BTreeMap<Atom, BigInt>,
    pub constant: BigInt,
}

impl LinExpr {
    pub fn constant(k: impl Into<BigInt>) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: k.into(),
        }
    }

    pub fn atom(a: Atom) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(a, BigInt::one());
        LinExpr {
            terms,
            constant: BigInt::zero(),
        }
    }

    pub fn symbol(s: Symbol) -> Self {
        Self::atom(Atom::Sym(s))
    }

    pub fn as_constant(&self) -> Option<&BigInt> {
        self.terms.is_empty().then_some(&self.constant)
    }

    /// The atom when the form is exactly `1 * atom`.
    pub fn single_atom(&self) -> Option<&Atom> {
        if self.terms.len() == 1 && self.constant.is_zero() {
            let (a, c) = self.terms.iter().next().unwrap();
            c.is_one().then_some(a)
        } else {
            None
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        self.terms.keys().any(Atom::is_nonlinear)
    }

    pub fn collect_symbols<'a>(&'a self, out: &mut Vec<&'a Symbol>) {
        for a in self.terms.keys() {
            a.symbols(out);
        }
    }

    pub fn symbols(&self) -> Vec<&Symbol> {
        let mut out = Vec::new();
        self.collect_symbols(&mut out);
        out
    }

    fn add_term(&mut self, a: Atom, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(a.clone()).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&a);
        }
    }

    pub fn add(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), c.clone());
        }
        out.constant += &other.constant;
        out
    }

    pub fn neg(&self) -> LinExpr {
        self.scale(&-BigInt::one())
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigInt) -> LinExpr {
        if k.is_zero() {
            return LinExpr::default();
        }
        LinExpr {
            terms: self.terms.iter().map(|(a, c)| (a.clone(), c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    pub fn mul(&self, other: &LinExpr) -> LinExpr {
        if let Some(k) = self.as_constant() {
            return other.scale(k);
        }
        if let Some(k) = other.as_constant() {
            return self.scale(k);
        }
        let (a, b) = if self <= other {
            (self, other)
        } else {
            (other, self)
        };
        LinExpr::atom(Atom::Mul(Box::new(a.clone()), Box::new(b.clone())))
    }

    /// Truncating division by a non-zero constant.
    pub fn div_const(&self, d: &BigInt) -> LinExpr {
        assert!(!d.is_zero(), "division by zero constant");
        if d.is_negative() {
            return self.div_const(&-d).neg();
        }
        if let Some(k) = self.as_constant() {
            return LinExpr::constant(k / d);
        }
        let content = self.content();
        if (&content % d).is_zero() {
            return self.scale_down(d);
        }
        // trunc(-x / d) = -trunc(x / d), so keep the leading coefficient positive.
        let leading_negative = self.terms.values().next().is_some_and(|c| c.is_negative());
        if leading_negative {
            return self.neg().div_const(d).neg();
        }
        // trunc(h*x / h*e) = trunc(x / e)
        let h = content.gcd(d);
        let (inner, d) = if h.is_one() {
            (self.clone(), d.clone())
        } else {
            (self.scale_down(&h), d / &h)
        };
        if d.is_one() {
            return inner;
        }
        LinExpr::atom(Atom::Div(Box::new(inner), d))
    }

    /// Truncating division by a non-constant form.
    pub fn div_nonconst(&self, d: &LinExpr) -> LinExpr {
        LinExpr::atom(Atom::NlDiv(Box::new(self.clone()), Box::new(d.clone())))
    }

    /// gcd of all coefficients and the constant.
    fn content(&self) -> BigInt {
        self.terms
            .values()
            .fold(self.constant.abs(), |g, c| g.gcd(c))
    }

    fn scale_down(&self, d: &BigInt) -> LinExpr {
        LinExpr {
            terms: self.terms.iter().map(|(a, c)| (a.clone(), c / d)).collect(),
            constant: &self.constant / d,
        }
    }

    /// Evaluates under concrete values; `None` when some symbol is unknown or
    /// a non-constant divisor is zero.
    pub fn eval(&self, env: &impl Env) -> Option<BigInt> {
        let mut total = self.constant.clone();
        for (a, c) in &self.terms {
            total += c * eval_atom(a, env)?;
        }
        Some(total)
    }
}

fn eval_atom(a: &Atom, env: &impl Env) -> Option<BigInt> {
    match a {
        Atom::Sym(s) => env.int(s),
        Atom::Div(inner, d) => Some(inner.eval(env)? / d),
        Atom::Mul(x, y) => Some(x.eval(env)? * y.eval(env)?),
        Atom::NlDiv(x, y) => {
            let y = y.eval(env)?;
            if y.is_zero() {
                None
            } else {
                Some(x.eval(env)? / y)
            }
        }
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (a, c) in &self.terms {
            let magnitude = c.abs();
            let body = if magnitude.is_one() {
                a.to_string()
            } else {
                format!("{magnitude} * {}", a.render_operand())
            };
            match (first, c.is_negative()) {
                (true, false) => write!(f, "{body}")?,
                (true, true) => write!(f, "-{}", negatable(a, &magnitude, &body))?,
                (false, false) => write!(f, " + {body}")?,
                (false, true) => write!(f, " - {body}")?,
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)?;
        } else if self.constant.is_positive() {
            write!(f, " + {}", self.constant)?;
        } else if self.constant.is_negative() {
            write!(f, " - {}", self.constant.abs())?;
        }
        Ok(())
    }
}

/// A leading unary minus binds tighter than `*` and `/`, which only matters
/// for a bare division or product.
fn negatable(a: &Atom, magnitude: &BigInt, body: &str) -> String {
    if magnitude.is_one() && !matches!(a, Atom::Sym(_)) {
        format!("({body})")
    } else {
        body.to_string()
    }
}

/// Supplies concrete values for symbols.
pub trait Env {
    fn int(&self, s: &Symbol) -> Option<BigInt>;
    fn boolean(&self, s: &Symbol) -> Option<bool>;
}

/// An atomic predicate. `lhs` never carries a constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pred {
    /// `lhs > k`
    Gt { lhs: LinExpr, k: BigInt },
    /// `lhs == k`
    Eq { lhs: LinExpr, k: BigInt },
    /// A boolean-valued symbol.
    Bool(Symbol),
}

impl Pred {
    pub fn symbols(&self) -> Vec<&Symbol> {
        match self {
            Pred::Gt { lhs, .. } | Pred::Eq { lhs, .. } => lhs.symbols(),
            Pred::Bool(s) => vec![s],
        }
    }

    /// True when every symbol is state-rooted.
    pub fn is_state_only(&self) -> bool {
        self.symbols().iter().all(|s| s.is_state())
    }

    pub fn is_nonlinear(&self) -> bool {
        match self {
            Pred::Gt { lhs, .. } | Pred::Eq { lhs, .. } => lhs.is_nonlinear(),
            Pred::Bool(_) => false,
        }
    }

    pub fn eval(&self, env: &impl Env) -> Option<bool> {
        match self {
            Pred::Gt { lhs, k } => Some(lhs.eval(env)? > *k),
            Pred::Eq { lhs, k } => Some(lhs.eval(env)? == *k),
            Pred::Bool(s) => env.boolean(s),
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::Gt { lhs, k } => write!(f, "{lhs} > {k}"),
            Pred::Eq { lhs, k } => write!(f, "{lhs} == {k}"),
            Pred::Bool(s) => write!(f, "{s}"),
        }
    }
}

/// A predicate with a polarity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub pred: Pred,
    pub positive: bool,
}

impl Literal {
    pub fn negate(&self) -> Literal {
        Literal {
            pred: self.pred.clone(),
            positive: !self.positive,
        }
    }

    pub fn eval(&self, env: &impl Env) -> Option<bool> {
        self.pred.eval(env).map(|v| v == self.positive)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            return write!(f, "{}", self.pred);
        }
        match &self.pred {
            Pred::Gt { lhs, k } => write!(f, "{lhs} <= {k}"),
            Pred::Eq { lhs, k } => write!(f, "{lhs} != {k}"),
            Pred::Bool(s) => write!(f, "not {s}"),
        }
    }
}

/// A normalized comparison: either decided outright or a literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormLit {
    Const(bool),
    Lit(Literal),
}

impl NormLit {
    pub fn negate(self) -> NormLit {
        match self {
            NormLit::Const(b) => NormLit::Const(!b),
            NormLit::Lit(l) => NormLit::Lit(l.negate()),
        }
    }
}

/// Splits `e` into its non-constant part, the gcd of its coefficients and
/// its constant.
fn split(e: &LinExpr) -> (LinExpr, BigInt, BigInt) {
    let g = e.terms.values().fold(BigInt::zero(), |g, c| g.gcd(c));
    let lhs = LinExpr {
        terms: e.terms.iter().map(|(a, c)| (a.clone(), c / &g)).collect(),
        constant: BigInt::zero(),
    };
    (lhs, g, e.constant.clone())
}

fn leading_negative(e: &LinExpr) -> bool {
    e.terms.values().next().is_some_and(|c| c.is_negative())
}

/// Normalizes `e > 0`.
pub fn gt_zero(e: &LinExpr) -> NormLit {
    if let Some(k) = e.as_constant() {
        return NormLit::Const(k.is_positive());
    }
    let (lhs, g, c) = split(e);
    // g*lhs + c > 0  <=>  lhs > floor(-c / g)
    let k = (-c).div_floor(&g);
    if leading_negative(&lhs) {
        // lhs > k  <=>  not (-lhs > -k - 1)
        return NormLit::Lit(Literal {
            pred: Pred::Gt {
                lhs: lhs.neg(),
                k: -k - 1,
            },
            positive: false,
        });
    }
    NormLit::Lit(Literal {
        pred: Pred::Gt { lhs, k },
        positive: true,
    })
}

/// Normalizes `e == 0`.
pub fn eq_zero(e: &LinExpr) -> NormLit {
    if let Some(k) = e.as_constant() {
        return NormLit::Const(k.is_zero());
    }
    let (mut lhs, g, c) = split(e);
    if !(&c % &g).is_zero() {
        return NormLit::Const(false);
    }
    let mut k = -c / &g;
    if leading_negative(&lhs) {
        lhs = lhs.neg();
        k = -k;
    }
    NormLit::Lit(Literal {
        pred: Pred::Eq { lhs, k },
        positive: true,
    })
}

/// `a op b` for an integer comparison operator.
pub fn compare(op: crate::ir::BinOp, a: &LinExpr, b: &LinExpr) -> NormLit {
    use crate::ir::BinOp;
    match op {
        BinOp::Gt => gt_zero(&a.sub(b)),
        BinOp::Lt => gt_zero(&b.sub(a)),
        BinOp::Ge => gt_zero(&b.sub(a)).negate(),
        BinOp::Le => gt_zero(&a.sub(b)).negate(),
        BinOp::Eq => eq_zero(&a.sub(b)),
        BinOp::Ne => eq_zero(&a.sub(b)).negate(),
        other => panic!("`{}` is not a comparison", other.symbol()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::BinOp;
    use std::collections::HashMap;

    fn state(path: &str) -> Symbol {
        Symbol::from_state_path(&path.parse().unwrap())
    }

    fn var(name: &str) -> LinExpr {
        LinExpr::symbol(state(&format!("C.g.{name}")))
    }

    fn k(v: i64) -> LinExpr {
        LinExpr::constant(v)
    }

    struct Vals(HashMap<Symbol, BigInt>);

    impl Env for Vals {
        fn int(&self, s: &Symbol) -> Option<BigInt> {
            self.0.get(s).cloned()
        }
        fn boolean(&self, _: &Symbol) -> Option<bool> {
            None
        }
    }

    #[test]
    fn mean_weight_renders_canonically() {
        let sum = var("truck").add(&var("van")).add(&var("car"));
        let lit = compare(BinOp::Gt, &sum.div_const(&BigInt::from(3)), &k(5000));
        let NormLit::Lit(l) = lit else { panic!() };
        assert!(l.positive);
        assert_eq!(
            l.pred.to_string(),
            "(C.g.car + C.g.truck + C.g.van) / 3 > 5000"
        );
        let NormLit::Lit(neg) = compare(BinOp::Le, &sum.div_const(&BigInt::from(3)), &k(5000))
        else {
            panic!()
        };
        assert_eq!(neg.pred, l.pred);
        assert!(!neg.positive);
    }

    #[test]
    fn negation_flips_orientation() {
        // x < 5  <=>  not (x > 4)
        let NormLit::Lit(l) = compare(BinOp::Lt, &var("x"), &k(5)) else {
            panic!()
        };
        assert_eq!(l.to_string(), "C.g.x <= 4");
        assert_eq!(l.pred.to_string(), "C.g.x > 4");
    }

    #[test]
    fn gcd_normalization() {
        // 2x + 4y > 5  <=>  x + 2y > 2
        let e = var("x")
            .scale(&BigInt::from(2))
            .add(&var("y").scale(&BigInt::from(4)));
        let NormLit::Lit(l) = compare(BinOp::Gt, &e, &k(5)) else {
            panic!()
        };
        assert_eq!(l.to_string(), "C.g.x + 2 * C.g.y > 2");
        // 2x == 3 is unsatisfiable over the integers
        assert_eq!(
            compare(BinOp::Eq, &var("x").scale(&BigInt::from(2)), &k(3)),
            NormLit::Const(false)
        );
        assert_eq!(compare(BinOp::Lt, &k(1), &k(2)), NormLit::Const(true));
    }

    #[test]
    fn division_folding() {
        let x = var("x");
        assert_eq!(
            x.scale(&BigInt::from(6)).div_const(&BigInt::from(3)),
            x.scale(&BigInt::from(2))
        );
        assert_eq!(k(-7).div_const(&BigInt::from(2)), k(-3));
        // -x / 3 == -(x / 3)
        assert_eq!(
            x.neg().div_const(&BigInt::from(3)),
            x.div_const(&BigInt::from(3)).neg()
        );
        // 2x / 4 == x / 2
        assert_eq!(
            x.scale(&BigInt::from(2)).div_const(&BigInt::from(4)),
            x.div_const(&BigInt::from(2))
        );
        assert_eq!(x.div_const(&BigInt::from(-1)), x.neg());
    }

    #[test]
    fn evaluation_truncates() {
        let x = var("x");
        let e = x.add(&k(1)).div_const(&BigInt::from(2));
        let vals = |v: i64| Vals(HashMap::from([(state("C.g.x"), BigInt::from(v))]));
        assert_eq!(e.eval(&vals(4)), Some(BigInt::from(2)));
        assert_eq!(e.eval(&vals(-4)), Some(BigInt::from(-1)));
        let nl = x.div_nonconst(&x);
        assert_eq!(nl.eval(&vals(0)), None);
        assert_eq!(nl.eval(&vals(5)), Some(BigInt::one()));
    }

    #[test]
    fn symbols_render() {
        assert_eq!(
            Symbol::root(Root::Param("n".into())).child("f").to_string(),
            "param:n.f"
        );
        assert_eq!(Symbol::root(Root::Input(2)).to_string(), "input#2");
    }
}
