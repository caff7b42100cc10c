//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use num::BigInt;

use fragmon::harness::{
    evaluate, generate_arith_subject, generate_subject, matching_paths, synthesize_conditions,
    EvalConfig, GeneratorParams,
};
use fragmon::ir::{
    interpret, parse_program, ConcreteState, Event, ExecLimits, GlobalId, Observer, SubjectProgram,
    Termination, Value,
};
use fragmon::monitor::{
    read_fragments, run_monitored, CompiledConditions, Length, Outcome, PolicyKind, RecordingPolicy,
};
use fragmon::reconstruct::{
    build_event_automaton, can_concat, reconstruct, ChainBounds, FeasibilityChecker,
};
use fragmon::symexec::{symbolic_execute, ConditionSet, SymConfig};
use fragmon::VEHICLE_PROGRAM;

const BIN: &str = env!("CARGO_BIN_EXE_fragmon");
const FIXTURE: &str = include_str!("../../core/tests/fixtures/concat_fragments.jsonl");
const FIXTURE_HASH: &str = "4e2f0c1b9a7d6e35";

const MEAN_WEIGHT: &str =
    "(VehicleService.car.weight + VehicleService.truck.weight + VehicleService.van.weight) / 3 > 5000";
const MEAN_VELOCITY: &str =
    "(VehicleService.car.maxVel + VehicleService.truck.maxVel + VehicleService.van.maxVel) / 3 > 110";

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ms(d: Duration) -> String {
    format!("{} ms", d.as_millis())
}

fn vehicle_state(p: &SubjectProgram, weights: [Option<i64>; 3]) -> ConcreteState {
    let mut s = ConcreteState::initial(p);
    let class = p.class_id("Vehicle").unwrap();
    let service = p.class_id("VehicleService").unwrap();
    for (name, w) in ["truck", "van", "car"].into_iter().zip(weights) {
        let Some(w) = w else { continue };
        let id = s.alloc(p, class);
        s.heap[id.0].fields = vec![Value::Int(BigInt::from(w)), Value::Int(BigInt::from(100))];
        let GlobalId(g) = p.find_global(service, name).unwrap();
        s.globals[g] = Value::Ref(id);
    }
    s
}

fn vehicle_synthesis() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("conds.txt");
    let started = Instant::now();
    let status = Command::new(BIN)
        .args([
            "synth",
            "--program",
            "vehicle",
            "--depth",
            "1",
            "--loop-bound",
            "3",
            "--out",
        ])
        .arg(&out)
        .status()
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(status.success(), || format!("synth exited with {status}"))?;
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let (set, _) = ConditionSet::parse_file(&text).map_err(|e| e.to_string())?;
    let forms = set.canonical_forms();
    ensure(forms == [MEAN_VELOCITY, MEAN_WEIGHT], || {
        format!("got {forms:?}")
    })?;
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {}", ms(elapsed))
    })?;

    let p = parse_program(VEHICLE_PROGRAM).map_err(|e| e.to_string())?;
    let c = CompiledConditions::new(&p, set).map_err(|e| e.to_string())?;
    let i = c
        .set()
        .iter()
        .position(|c| c.canonical == MEAN_WEIGHT)
        .unwrap();
    let got: Vec<Outcome> = [
        [Some(6000), Some(5000), Some(7000)],
        [Some(2000), Some(1000), Some(5000)],
        [None, Some(1000), Some(5000)],
    ]
    .into_iter()
    .map(|w| c.evaluate(&vehicle_state(&p, w)).0[i])
    .collect();
    ensure(got == [Outcome::T, Outcome::F, Outcome::U], || {
        format!("signatures {got:?}")
    })?;
    Ok(format!(
        "2 conditions, T/F/U reproduced, synth in {}",
        ms(elapsed)
    ))
}

fn concatenation_fixture() -> Verdict {
    let set =
        read_fragments(&mut FIXTURE.as_bytes(), FIXTURE_HASH, 4).map_err(|e| e.to_string())?;
    let bounds = ChainBounds {
        max_chain_length: 2,
        ..ChainBounds::default()
    };
    let two: Vec<Vec<usize>> = reconstruct(&set, &bounds)
        .into_iter()
        .filter(|t| t.chain.len() == 2)
        .map(|t| t.chain)
        .collect();
    ensure(two == [vec![0, 1]], || format!("2-chains {two:?}"))?;
    let f = &set.fragments;
    ensure(!can_concat(&f[0], &f[2]), || "f1 and f3 concatenate".into())?;
    Ok("one 2-chain f1.f2, f1.f3 rejected".into())
}

/// States before every event and at the end of the run.
#[derive(Default)]
struct Snapshots {
    before: Vec<ConcreteState>,
    last: Option<ConcreteState>,
}

impl Observer for Snapshots {
    fn on_event(&mut self, _: usize, _: &Event, state: &ConcreteState) {
        self.before.push(state.clone());
    }

    fn on_finish(&mut self, state: &ConcreteState, _: Termination) {
        self.last = Some(state.clone());
    }
}

impl Snapshots {
    fn at(&self, boundary: usize) -> &ConcreteState {
        self.before.get(boundary).or(self.last.as_ref()).unwrap()
    }
}

fn policy_for(k: u64) -> RecordingPolicy {
    let kind = match k % 6 {
        0 => PolicyKind::AlwaysOn,
        1 => PolicyKind::Windowed {
            on: Length::Fixed(1 + k % 4),
            off: Length::Fixed(1 + k % 3),
        },
        2 => return RecordingPolicy::default_with_seed(k),
        3 => PolicyKind::Windowed {
            on: Length::Geometric { mean: 4.0 },
            off: Length::Geometric { mean: 6.0 },
        },
        4 => PolicyKind::Bernoulli {
            toggle_probability: 0.3,
        },
        _ => PolicyKind::SplitPoints(vec![(k % 7) as usize, (k % 7 + 5) as usize]),
    };
    RecordingPolicy {
        kind,
        budget: 0.5,
        rng_seed: k,
    }
}

fn gap_freeness() -> Verdict {
    let started = Instant::now();
    let mut triples = 0;
    let mut fragments = 0;
    let mut violations = Vec::new();
    for program_seed in 0..50u64 {
        let p = generate_subject(&GeneratorParams {
            allow_faults: program_seed % 2 == 1,
            ..GeneratorParams::with_seed(program_seed)
        })
        .map_err(|e| e.to_string())?;
        let set = synthesize_conditions(&p, 1, &SymConfig::default()).map_err(|e| e.to_string())?;
        let c = CompiledConditions::new(&p, set).map_err(|e| e.to_string())?;
        for k in 0..20u64 {
            let policy = policy_for(program_seed * 20 + k);
            let input = 1000 + k;
            let mut snaps = Snapshots::default();
            let truth = interpret(&p, input, ExecLimits::default(), &mut snaps);
            let run = run_monitored(&p, &c, &policy, input);
            triples += 1;
            if run.trace.events != truth.events {
                violations.push(format!(
                    "program {program_seed}, input {input}: stream differs"
                ));
            }
            for f in &run.fragments.fragments {
                fragments += 1;
                let (i0, i1) = (f.meta.start_index.unwrap(), f.meta.end_index.unwrap());
                let ok = i1 < truth.events.len()
                    && f.events[..] == truth.events[i0..=i1]
                    && f.start == c.evaluate(snaps.at(i0))
                    && f.end == c.evaluate(snaps.at(i1 + 1));
                if !ok {
                    violations.push(format!(
                        "program {program_seed}, input {input}, [{i0},{i1}]"
                    ));
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(violations.is_empty(), || {
        format!("{} violations, first: {}", violations.len(), violations[0])
    })?;
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {}", ms(elapsed))
    })?;
    Ok(format!(
        "{triples} triples, {fragments} fragments, 0 violations in {}",
        ms(elapsed)
    ))
}

fn symbolic_concrete_agreement() -> Verdict {
    let domain = [-1i64, 0, 1, 5000, 5001];
    let config = SymConfig::default();
    let mut methods = 0;
    let mut checked = 0;
    let mut skipped = 0;
    for seed in 0..120u64 {
        let p = generate_arith_subject(seed);
        let f = p.find_method(p.class_id("G").unwrap(), "f").unwrap();
        let paths = symbolic_execute(&p, f, &config).map_err(|e| e.to_string())?;
        let state = ConcreteState::initial(&p);
        methods += 1;
        for a in domain {
            for b in domain {
                for c in domain {
                    let args: Vec<Value> = [a, b, c].map(|v| Value::Int(BigInt::from(v))).to_vec();
                    match matching_paths(&p, f, &paths, &args, &state, config.loop_bound) {
                        None => skipped += 1,
                        Some(1) => checked += 1,
                        Some(n) => {
                            return Err(format!(
                                "method {seed} on ({a}, {b}, {c}) matches {n} paths"
                            ))
                        }
                    }
                }
            }
        }
    }
    Ok(format!(
        "{methods} methods, {checked} inputs matched exactly one path, {skipped} beyond the loop bound"
    ))
}

/// Every way to cut `0..n` into at most `parts` non-empty consecutive pieces,
/// as cut positions.
fn cut_sets(n: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 1..parts {
        let mut next = Vec::new();
        for cuts in &frontier {
            let from = cuts.last().map_or(1, |c| c + 1);
            for c in from..n {
                let mut longer: Vec<usize> = cuts.clone();
                longer.push(c);
                next.push(longer);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn completeness() -> Verdict {
    let mut traces = 0;
    let mut splits = 0;
    let params = |seed| GeneratorParams {
        n_services: 1,
        max_rounds: 2,
        max_block_len: 2,
        ..GeneratorParams::with_seed(seed)
    };
    'outer: for seed in 0..500u64 {
        let p = generate_subject(&params(seed)).map_err(|e| e.to_string())?;
        let set = synthesize_conditions(&p, 1, &SymConfig::default()).map_err(|e| e.to_string())?;
        let c = CompiledConditions::new(&p, set).map_err(|e| e.to_string())?;
        for input in 0..4u64 {
            let truth = interpret(&p, input, ExecLimits::default(), &mut ());
            if truth.events.len() > 12 || truth.events.is_empty() {
                continue;
            }
            traces += 1;
            for cuts in cut_sets(truth.events.len(), 4) {
                splits += 1;
                let policy = RecordingPolicy {
                    kind: PolicyKind::SplitPoints(cuts.clone()),
                    ..RecordingPolicy::always_on()
                };
                let run = run_monitored(&p, &c, &policy, input);
                if run.fragments.len() != cuts.len() + 1 {
                    return Err(format!(
                        "program {seed}, input {input}: split {cuts:?} gave {} fragments",
                        run.fragments.len()
                    ));
                }
                let bounds = ChainBounds {
                    max_chain_length: 4,
                    ..ChainBounds::default()
                };
                let found = reconstruct(&run.fragments, &bounds)
                    .iter()
                    .any(|t| t.events == truth.events);
                if !found {
                    return Err(format!(
                        "program {seed}, input {input}: split {cuts:?} not recovered"
                    ));
                }
            }
            if traces >= 240 {
                break 'outer;
            }
        }
    }
    ensure(traces >= 200, || {
        format!("only {traces} short traces found")
    })?;
    Ok(format!("{traces} traces, {splits} splits, 100% recovered"))
}

fn feasibility_soundness() -> Verdict {
    let mut traces = 0;
    let mut windows = 0usize;
    for program_seed in 0..50u64 {
        let p = generate_subject(&GeneratorParams {
            allow_faults: program_seed % 3 == 0,
            ..GeneratorParams::with_seed(program_seed)
        })
        .map_err(|e| e.to_string())?;
        let automaton = build_event_automaton(&p);
        let mut checker = FeasibilityChecker::new(&automaton);
        for input in 0..20u64 {
            let t = interpret(&p, input, ExecLimits::default(), &mut ());
            traces += 1;
            for i in 0..t.events.len() {
                for j in i + 1..=(i + 10).min(t.events.len()) {
                    windows += 1;
                    if !checker
                        .feasible(&t.events[i..j])
                        .map_err(|e| e.to_string())?
                    {
                        return Err(format!(
                            "program {program_seed}, input {input}: [{i},{j}) rejected"
                        ));
                    }
                }
            }
        }
    }
    Ok(format!(
        "{traces} traces, {windows} windows, 0 false rejections"
    ))
}

fn degenerate_policies() -> Verdict {
    let mut programs: Vec<(String, SubjectProgram)> = vec![(
        "vehicle".into(),
        parse_program(VEHICLE_PROGRAM).map_err(|e| e.to_string())?,
    )];
    for seed in 0..10 {
        let p = generate_subject(&GeneratorParams::with_seed(seed)).map_err(|e| e.to_string())?;
        programs.push((format!("generated {seed}"), p));
    }
    let config = EvalConfig::default();
    for (name, p) in &programs {
        let on =
            evaluate(p, 20, &RecordingPolicy::always_on(), &config).map_err(|e| e.to_string())?;
        let scores = (on.precision, on.exactness, on.coverage);
        ensure(scores == (1.0, 1.0, 1.0), || {
            format!("{name}: always-on gave {scores:?}")
        })?;
        let off =
            evaluate(p, 20, &RecordingPolicy::always_off(), &config).map_err(|e| e.to_string())?;
        ensure(off.fragments == 0, || {
            format!("{name}: always-off gave {} fragments", off.fragments)
        })?;
    }
    Ok(format!(
        "{} programs, always-on exact, always-off empty",
        programs.len()
    ))
}

fn determinism() -> Verdict {
    let run = || -> Result<Vec<u8>, String> {
        let out = Command::new(BIN)
            .args(["eval", "--seed", "42", "--runs", "100"])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!("eval failed: {}", String::from_utf8_lossy(&out.stderr))
        })?;
        Ok(out.stdout)
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "outputs differ".into())?;
    let text = String::from_utf8(a).map_err(|e| e.to_string())?;
    ensure(text.lines().count() == 1, || {
        "output is not one line".into()
    })?;
    let parsed: BTreeMap<String, serde_json::Value> =
        serde_json::from_str(text.trim_end()).map_err(|e| e.to_string())?;
    ensure(parsed.contains_key("precision"), || {
        "no precision field".into()
    })?;
    Ok(format!("{} identical bytes", text.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("vehicle synthesis and signatures", vehicle_synthesis),
        ("concatenation fixture", concatenation_fixture),
        ("gap-freeness", gap_freeness),
        ("symbolic-concrete agreement", symbolic_concrete_agreement),
        ("reconstruction completeness", completeness),
        ("feasibility soundness", feasibility_soundness),
        ("degenerate policies", degenerate_policies),
        ("eval determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
