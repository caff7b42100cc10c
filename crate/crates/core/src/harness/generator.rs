//! Random subject programs for evaluation and property tests.
//!
//! A generated program has three layers. Interface classes hold integer
//! (and sometimes boolean) fields and leaf methods; their calls and
//! allocations are the monitored events. Service classes own globals that
//! point at interface objects and have static methods that branch on those
//! objects' fields, loop with bounded counters and call interface methods.
//! A `Main` class allocates every global and then runs a few randomly chosen
//! service methods. Loops only count up to small constants and services only
//! call services with a higher index, so every run terminates well within
//! the default step budget.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{parse_program, ProgramError, SubjectProgram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub rng_seed: u64,
    /// Interface classes (all of them are monitored).
    pub n_classes: usize,
    pub n_services: usize,
    pub n_methods_per_class: usize,
    pub max_branch_depth: usize,
    pub max_loop_nesting: usize,
    pub min_fields: usize,
    pub max_fields: usize,
    /// Statements per generated block, at most.
    pub max_block_len: usize,
    /// Upper bound of the number of service calls `main` makes.
    pub max_rounds: usize,
    /// Lets service methods null out globals, so runs may fault and
    /// signatures may contain `U` mid-run.
    pub allow_faults: bool,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            rng_seed: 0,
            n_classes: 2,
            n_services: 2,
            n_methods_per_class: 3,
            max_branch_depth: 2,
            max_loop_nesting: 1,
            min_fields: 1,
            max_fields: 3,
            max_block_len: 4,
            max_rounds: 4,
            allow_faults: false,
        }
    }
}

impl GeneratorParams {
    pub fn with_seed(rng_seed: u64) -> Self {
        GeneratorParams {
            rng_seed,
            ..GeneratorParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("min_fields exceeds max_fields")]
    FieldRange,
    /// A generator bug: the emitted source did not check.
    #[error("generated program is invalid: {0}")]
    Invalid(#[from] ProgramError),
}

struct IfaceClass {
    name: String,
    ints: Vec<String>,
    bools: Vec<String>,
    /// Name and body shape; only getters return a value.
    methods: Vec<(String, MethodShape)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MethodShape {
    Getter,
    Update,
    Branchy,
}

struct Service {
    name: String,
    /// Global name and interface class index.
    globals: Vec<(String, usize)>,
    runs: Vec<String>,
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    params: &'a GeneratorParams,
    ifaces: Vec<IfaceClass>,
    services: Vec<Service>,
    out: String,
}

/// Generates a program and returns its canonical source text.
pub fn generate_source(params: &GeneratorParams) -> Result<String, GeneratorError> {
    Ok(generate_subject(params)?.to_source())
}

/// Generates a type-correct, terminating program; deterministic per seed.
pub fn generate_subject(params: &GeneratorParams) -> Result<SubjectProgram, GeneratorError> {
    for (name, v) in [
        ("n_classes", params.n_classes),
        ("n_services", params.n_services),
        ("n_methods_per_class", params.n_methods_per_class),
        ("max_fields", params.max_fields),
        ("max_block_len", params.max_block_len),
        ("max_rounds", params.max_rounds),
    ] {
        if v == 0 {
            return Err(GeneratorError::NonPositive(name));
        }
    }
    if params.min_fields > params.max_fields {
        return Err(GeneratorError::FieldRange);
    }
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
        params,
        ifaces: Vec::new(),
        services: Vec::new(),
        out: String::new(),
    };
    g.plan();
    g.emit();
    Ok(parse_program(&g.out)?)
}

impl Gen<'_> {
    fn plan(&mut self) {
        let p = self.params;
        for c in 0..p.n_classes {
            let n_fields = self.rng.random_range(p.min_fields.max(1)..=p.max_fields);
            let ints = (0..n_fields).map(|i| format!("f{i}")).collect();
            let bools = if self.rng.random_bool(0.3) {
                vec!["b0".to_string()]
            } else {
                Vec::new()
            };
            let methods = (0..p.n_methods_per_class)
                .map(|m| {
                    let shape = match (m, p.max_branch_depth) {
                        (0, _) => MethodShape::Getter,
                        (_, 0) => MethodShape::Update,
                        _ if self.rng.random_bool(0.5) => MethodShape::Branchy,
                        _ => MethodShape::Update,
                    };
                    (format!("m{m}"), shape)
                })
                .collect();
            self.ifaces.push(IfaceClass {
                name: format!("I{c}"),
                ints,
                bools,
                methods,
            });
        }
        for s in 0..p.n_services {
            let n_globals = self.rng.random_range(1..=p.n_classes.min(3));
            let globals = (0..n_globals)
                .map(|i| {
                    // The first service always reaches the first interface.
                    let class = if s == 0 && i == 0 {
                        0
                    } else {
                        self.rng.random_range(0..p.n_classes)
                    };
                    (format!("g{i}"), class)
                })
                .collect();
            let runs = (0..p.n_methods_per_class)
                .map(|m| format!("run{m}"))
                .collect();
            self.services.push(Service {
                name: format!("S{s}"),
                globals,
                runs,
            });
        }
    }

    fn line(&mut self, indent: usize, text: &str) {
        for _ in 0..indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn emit(&mut self) {
        self.out.push_str("# generated\n");
        for i in 0..self.ifaces.len() {
            let name = self.ifaces[i].name.clone();
            let _ = writeln!(self.out, "interface {name}");
        }
        self.out.push_str("entry Main.main\n");
        for i in 0..self.ifaces.len() {
            self.emit_iface(i);
        }
        for s in 0..self.services.len() {
            self.emit_service(s);
        }
        self.emit_main();
    }

    fn constant(&mut self) -> i64 {
        self.rng.random_range(0..=100)
    }

    fn emit_iface(&mut self, i: usize) {
        let c = &self.ifaces[i];
        let (name, ints, bools) = (c.name.clone(), c.ints.clone(), c.bools.clone());
        let methods = c.methods.clone();
        self.out.push('\n');
        self.line(0, &format!("class {name} {{"));
        for f in &ints {
            self.line(1, &format!("field {f}: int"));
        }
        for b in &bools {
            self.line(1, &format!("field {b}: bool"));
        }
        self.line(0, "");
        self.line(1, &format!("method {name}(v: int) {{"));
        for (k, f) in ints.iter().enumerate() {
            let text = if k == 0 {
                format!("{f} = v")
            } else {
                format!("{f} = v / {}", k + 1)
            };
            self.line(2, &text);
        }
        for b in &bools {
            let c = self.constant();
            self.line(2, &format!("{b} = v > {c}"));
        }
        self.line(1, "}");
        for (m, shape) in methods {
            self.line(0, "");
            let f = ints[self.rng.random_range(0..ints.len())].clone();
            match shape {
                MethodShape::Getter => {
                    self.line(1, &format!("method {m}(): int {{"));
                    let k = self.rng.random_range(0..=3);
                    self.line(2, &format!("return {f} + {k}"));
                }
                MethodShape::Update => {
                    self.line(1, &format!("method {m}(d: int) {{"));
                    self.line(2, &format!("{f} = {f} + d"));
                    if let Some(b) = bools.first() {
                        let c = self.constant();
                        self.line(2, &format!("{b} = {f} > {c}"));
                    }
                }
                MethodShape::Branchy => {
                    self.line(1, &format!("method {m}(d: int) {{"));
                    let c = self.constant();
                    let other = ints[self.rng.random_range(0..ints.len())].clone();
                    self.line(2, &format!("if {f} > {c} {{"));
                    self.line(3, &format!("{f} = {f} - d"));
                    self.line(2, "} else {");
                    self.line(3, &format!("{other} = {other} + 1"));
                    self.line(2, "}");
                }
            }
            self.line(1, "}");
        }
        self.line(0, "}");
    }

    fn emit_service(&mut self, s: usize) {
        let name = self.services[s].name.clone();
        let globals = self.services[s].globals.clone();
        let runs = self.services[s].runs.clone();
        self.out.push('\n');
        self.line(0, &format!("class {name} {{"));
        for (g, c) in &globals {
            let cname = self.ifaces[*c].name.clone();
            self.line(1, &format!("global {g}: {cname}"));
        }
        self.line(0, "");
        self.line(1, "static method init() {");
        for (k, (g, c)) in globals.iter().enumerate() {
            let cname = self.ifaces[*c].name.clone();
            self.line(2, &format!("var x{k}: int = input(0, 100)"));
            self.line(2, &format!("{g} = new {cname}(x{k})"));
        }
        self.line(1, "}");
        for (r, run) in runs.iter().enumerate() {
            self.line(0, "");
            self.line(1, &format!("static method {run}() {{"));
            let mut cx = BlockCx {
                service: s,
                locals: 0,
                int_locals: Vec::new(),
                branch_depth: 0,
                loop_depth: 0,
                loop_branch_base: 0,
                called_service: false,
            };
            if s == 0 && r == 0 {
                // Guarantees at least one monitored call and, when branches
                // are allowed, at least one state condition.
                if self.params.max_branch_depth > 0 {
                    let cond = self.state_condition(s);
                    self.line(2, &format!("if {cond} {{"));
                    self.emit_iface_call(&mut cx, 3, 0);
                    self.line(2, "}");
                    cx.int_locals.clear();
                }
                self.emit_iface_call(&mut cx, 2, 0);
            }
            let n = self.rng.random_range(1..=self.params.max_block_len);
            self.emit_block(&mut cx, 2, n);
            self.line(1, "}");
        }
        self.line(0, "}");
    }

    fn emit_main(&mut self) {
        self.out.push('\n');
        self.line(0, "class Main {");
        self.line(1, "static method main() {");
        for s in 0..self.services.len() {
            let name = self.services[s].name.clone();
            self.line(2, &format!("{name}.init()"));
        }
        let targets: Vec<String> = self
            .services
            .iter()
            .flat_map(|s| s.runs.iter().map(move |r| format!("{}.{r}()", s.name)))
            .collect();
        self.line(2, "S0.run0()");
        let max_rounds = self.params.max_rounds as i64 - 1;
        self.line(2, &format!("var rounds: int = input(0, {max_rounds})"));
        self.line(2, "var r: int = 0");
        self.line(2, "while r < rounds {");
        self.line(3, &format!("var k: int = input(0, {})", targets.len() - 1));
        for (i, t) in targets.iter().enumerate() {
            let kw = if i == 0 { "if" } else { "} else if" };
            if i + 1 == targets.len() && i > 0 {
                self.line(3, "} else {");
            } else {
                self.line(3, &format!("{kw} k == {i} {{"));
            }
            self.line(4, t);
        }
        self.line(3, "}");
        self.line(3, "r = r + 1");
        self.line(2, "}");
        self.line(1, "}");
        self.line(0, "}");
    }

    /// `gK.fJ` for a random global of service `s` and one of its int fields.
    fn field_ref(&mut self, s: usize) -> String {
        let globals = &self.services[s].globals;
        let (g, c) = globals[self.rng.random_range(0..globals.len())].clone();
        let ints = &self.ifaces[c].ints;
        let f = ints[self.rng.random_range(0..ints.len())].clone();
        format!("{g}.{f}")
    }

    fn state_condition(&mut self, s: usize) -> String {
        let a = self.field_ref(s);
        let k = self.constant();
        match self.rng.random_range(0..4) {
            0 => {
                let b = self.field_ref(s);
                format!("{a} + {b} > {}", 2 * k)
            }
            1 => format!("{a} < {k}"),
            _ => format!("{a} > {k}"),
        }
    }

    fn condition(&mut self, s: usize, cx: &BlockCx) -> String {
        let bool_field = self.services[s]
            .globals
            .iter()
            .find(|(_, c)| !self.ifaces[*c].bools.is_empty())
            .map(|(g, _)| format!("{g}.b0"));
        match self.rng.random_range(0..6) {
            0 if !cx.int_locals.is_empty() => {
                let t = cx.int_locals[self.rng.random_range(0..cx.int_locals.len())].clone();
                let k = self.constant();
                format!("{t} > {k}")
            }
            1 if bool_field.is_some() => bool_field.unwrap_or_default(),
            _ => self.state_condition(s),
        }
    }

    fn emit_iface_call(&mut self, cx: &mut BlockCx, indent: usize, global: usize) {
        let (g, c) = self.services[cx.service].globals[global].clone();
        let methods = self.ifaces[c].methods.clone();
        let (m, shape) = methods[self.rng.random_range(0..methods.len())].clone();
        if shape == MethodShape::Getter {
            let t = format!("t{}", cx.locals);
            cx.locals += 1;
            self.line(indent, &format!("var {t}: int = {g}.{m}()"));
            cx.int_locals.push(t);
        } else {
            let d = self.rng.random_range(1..=5);
            self.line(indent, &format!("{g}.{m}({d})"));
        }
    }

    fn emit_block(&mut self, cx: &mut BlockCx, indent: usize, n: usize) {
        let scope = cx.int_locals.len();
        for _ in 0..n {
            self.emit_stmt(cx, indent);
        }
        cx.int_locals.truncate(scope);
    }

    fn emit_stmt(&mut self, cx: &mut BlockCx, indent: usize) {
        let s = cx.service;
        let p = self.params;
        let later: Vec<usize> = (s + 1..self.services.len()).collect();
        // Branches inside a loop multiply with every iteration, so loop
        // bodies get at most one level of them.
        let max_branch = if cx.loop_depth > 0 {
            p.max_branch_depth.min(cx.loop_branch_base + 1)
        } else {
            p.max_branch_depth
        };
        let choice = self.rng.random_range(0..100);
        match choice {
            0..=39 => {
                let global = self.rng.random_range(0..self.services[s].globals.len());
                self.emit_iface_call(cx, indent, global);
            }
            40..=59 if cx.branch_depth < max_branch => {
                let cond = self.condition(s, cx);
                cx.branch_depth += 1;
                self.line(indent, &format!("if {cond} {{"));
                let n = self.rng.random_range(1..=p.max_block_len.min(3));
                self.emit_block(cx, indent + 1, n);
                if self.rng.random_bool(0.5) {
                    self.line(indent, "} else {");
                    let n = self.rng.random_range(1..=p.max_block_len.min(3));
                    self.emit_block(cx, indent + 1, n);
                }
                self.line(indent, "}");
                cx.branch_depth -= 1;
            }
            60..=69 if cx.loop_depth < p.max_loop_nesting => {
                let i = format!("i{}", cx.locals);
                cx.locals += 1;
                let bound = self.rng.random_range(1..=3);
                self.line(indent, &format!("var {i}: int = 0"));
                self.line(indent, &format!("while {i} < {bound} {{"));
                cx.loop_depth += 1;
                let base = std::mem::replace(&mut cx.loop_branch_base, cx.branch_depth);
                let n = self.rng.random_range(1..=p.max_block_len.min(3));
                self.emit_block(cx, indent + 1, n);
                cx.loop_depth -= 1;
                cx.loop_branch_base = base;
                self.line(indent + 1, &format!("{i} = {i} + 1"));
                self.line(indent, "}");
            }
            70..=79 if !later.is_empty() && cx.loop_depth == 0 && !cx.called_service => {
                cx.called_service = true;
                let t = later[self.rng.random_range(0..later.len())];
                let svc = &self.services[t];
                let run = svc.runs[self.rng.random_range(0..svc.runs.len())].clone();
                let text = format!("{}.{run}()", svc.name);
                self.line(indent, &text);
            }
            80..=84 if p.allow_faults => {
                let (g, _) = self.services[s].globals
                    [self.rng.random_range(0..self.services[s].globals.len())]
                .clone();
                self.line(indent, &format!("{g} = null"));
            }
            _ => {
                let target = self.field_ref(s);
                let k = self.rng.random_range(1..=20);
                let rhs = match self.rng.random_range(0..3) {
                    0 if !cx.int_locals.is_empty() => {
                        cx.int_locals[self.rng.random_range(0..cx.int_locals.len())].clone()
                    }
                    1 => format!("{target} - {k}"),
                    _ => format!("{target} + {k}"),
                };
                self.line(indent, &format!("{target} = {rhs}"));
            }
        }
    }
}

struct BlockCx {
    service: usize,
    /// Counter for fresh local names.
    locals: usize,
    /// Int locals in scope.
    int_locals: Vec<String>,
    branch_depth: usize,
    loop_depth: usize,
    /// Branch depth at the innermost loop.
    loop_branch_base: usize,
    /// At most one call to another service per method keeps path counts
    /// small.
    called_service: bool,
}

/// A single class `G` with a call-free static method
/// `f(a: int, b: int, c: int): int` built from branches, loops bounded by
/// parameters, and linear arithmetic (including division). Used to compare
/// symbolic paths against concrete runs.
pub fn generate_arith_subject(seed: u64) -> SubjectProgram {
    let mut g = ArithGen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        out: String::new(),
        fresh: 0,
        visible: Vec::new(),
    };
    let n = g.rng.random_range(2..=4);
    g.block(2, 0, n);
    let ret = g.term();
    let src = format!(
        "entry G.main\nclass G {{\n    static method f(a: int, b: int, c: int): int {{\n        var r: int = 0\n{}        return r + {ret}\n    }}\n    static method main() {{\n    }}\n}}\n",
        g.out
    );
    parse_program(&src).expect("arithmetic generator emits valid programs")
}

struct ArithGen {
    rng: ChaCha8Rng,
    out: String,
    /// Locals are unique per method, so names come from one counter.
    fresh: usize,
    visible: Vec<String>,
}

impl ArithGen {
    fn var(&mut self) -> String {
        if !self.visible.is_empty() && self.rng.random_bool(0.3) {
            self.visible[self.rng.random_range(0..self.visible.len())].clone()
        } else {
            ["a", "b", "c", "r"][self.rng.random_range(0..4)].to_string()
        }
    }

    fn literal(&mut self, lo: i64, hi: i64) -> String {
        let k = self.rng.random_range(lo..=hi);
        if k < 0 {
            format!("({k})")
        } else {
            k.to_string()
        }
    }

    fn term(&mut self) -> String {
        let x = self.var();
        let y = self.var();
        match self.rng.random_range(0..7) {
            0 => format!("{x} + {y}"),
            1 => format!("{x} - {}", self.literal(-3, 7)),
            2 => format!("{x} * {}", self.rng.random_range(2..=3)),
            3 => format!("{x} / {}", self.rng.random_range(2..=4)),
            4 => format!("({x} + {y}) / {}", self.rng.random_range(2..=3)),
            5 => format!("{x} / {y}"),
            _ => format!("{x} - {y}"),
        }
    }

    fn fresh_name(&mut self) -> String {
        self.fresh += 1;
        format!("w{}", self.fresh - 1)
    }

    fn block(&mut self, indent: usize, depth: usize, n: usize) {
        let pad = "    ".repeat(indent);
        let scope = self.visible.len();
        for _ in 0..n {
            match self.rng.random_range(0..10) {
                0..=2 => {
                    let t = self.term();
                    let w = self.fresh_name();
                    let _ = writeln!(self.out, "{pad}var {w}: int = {t}");
                    self.visible.push(w);
                }
                3..=4 => {
                    let t = self.term();
                    let _ = writeln!(self.out, "{pad}r = {t}");
                }
                5..=7 if depth < 2 => {
                    let t = self.term();
                    let op = ["<", "<=", ">", ">=", "==", "!="][self.rng.random_range(0..6)];
                    let k = self.literal(-2, 10);
                    let _ = writeln!(self.out, "{pad}if {t} {op} {k} {{");
                    let n = self.rng.random_range(1..=2);
                    self.block(indent + 1, depth + 1, n);
                    if self.rng.random_bool(0.5) {
                        let _ = writeln!(self.out, "{pad}}} else {{");
                        self.block(indent + 1, depth + 1, 1);
                    }
                    let _ = writeln!(self.out, "{pad}}}");
                }
                8 if depth < 2 => {
                    let i = self.fresh_name();
                    let bound = ["a", "b", "c"][self.rng.random_range(0..3)];
                    let _ = writeln!(self.out, "{pad}var {i}: int = 0");
                    let _ = writeln!(self.out, "{pad}while {i} < {bound} {{");
                    self.block(indent + 1, depth + 1, 1);
                    let _ = writeln!(self.out, "{pad}    {i} = {i} + 1");
                    let _ = writeln!(self.out, "{pad}}}");
                    self.visible.push(i);
                }
                _ => {
                    let k = self.rng.random_range(1..=9);
                    let _ = writeln!(self.out, "{pad}r = r + {k}");
                }
            }
        }
        self.visible.truncate(scope);
    }
}
