use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use proptest::prelude::*;

use fragmon::callgraph::{build_call_graph, relevant_set};
use fragmon::harness::{
    evaluate_report, generate_subject, junctions_hold, synthesize_conditions, EvalConfig,
    GeneratorParams,
};
use fragmon::ir::{
    interpret, ConcreteState, Event, ExecLimits, MethodRef, Observer, SubjectProgram, Termination,
};
use fragmon::monitor::{
    read_fragments, run_monitored, write_fragments, CompiledConditions, Length, PolicyKind,
    RecordingPolicy,
};
use fragmon::reconstruct::{build_event_automaton, cfg_feasible, reconstruct, ChainBounds};
use fragmon::symexec::linear::Literal;
use fragmon::symexec::solver::{check, Feasibility, SolverLimits};
use fragmon::symexec::SymConfig;

struct Subject {
    program: SubjectProgram,
    conditions: CompiledConditions,
}

type Cache = Mutex<HashMap<(u64, bool), Arc<Subject>>>;

/// Synthesis dominates the cost of a case, so each program is built once.
fn subject(seed: u64, faults: bool) -> Arc<Subject> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(s) = cache.lock().unwrap().get(&(seed, faults)) {
        return s.clone();
    }
    let program = generate_subject(&GeneratorParams {
        allow_faults: faults,
        ..GeneratorParams::with_seed(seed)
    })
    .unwrap();
    let set = synthesize_conditions(&program, 1, &SymConfig::default()).unwrap();
    let conditions = CompiledConditions::new(&program, set).unwrap();
    let s = Arc::new(Subject {
        program,
        conditions,
    });
    cache.lock().unwrap().insert((seed, faults), s.clone());
    s
}

fn length() -> impl Strategy<Value = Length> {
    prop_oneof![
        (1u64..6).prop_map(Length::Fixed),
        (1.0f64..12.0).prop_map(|mean| Length::Geometric { mean }),
    ]
}

fn policy() -> impl Strategy<Value = RecordingPolicy> {
    let kind = prop_oneof![
        Just(PolicyKind::AlwaysOn),
        Just(PolicyKind::AlwaysOff),
        (length(), length()).prop_map(|(on, off)| PolicyKind::Windowed { on, off }),
        (0.05f64..=1.0).prop_map(|p| PolicyKind::Bernoulli {
            toggle_probability: p
        }),
        prop::collection::btree_set(0usize..40, 0..5)
            .prop_map(|s| PolicyKind::SplitPoints(s.into_iter().collect())),
    ];
    (kind, 0.05f64..=1.0, any::<u64>()).prop_map(|(kind, budget, rng_seed)| RecordingPolicy {
        kind,
        budget,
        rng_seed,
    })
}

/// The state before every event, plus the final state.
#[derive(Default)]
struct Snapshots {
    before: Vec<ConcreteState>,
    last: Option<ConcreteState>,
    calls: BTreeSet<(MethodRef, MethodRef)>,
}

impl Observer for Snapshots {
    fn on_event(&mut self, _: usize, _: &Event, state: &ConcreteState) {
        self.before.push(state.clone());
    }

    fn on_finish(&mut self, state: &ConcreteState, _: Termination) {
        self.last = Some(state.clone());
    }

    fn on_call(&mut self, caller: MethodRef, callee: MethodRef) {
        self.calls.insert((caller, callee));
    }
}

impl Snapshots {
    fn at(&self, boundary: usize) -> &ConcreteState {
        self.before.get(boundary).or(self.last.as_ref()).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn fragments_are_gap_free_slices_with_boundary_signatures(
        program_seed in 0u64..24,
        faults in any::<bool>(),
        policy in policy(),
        input in 0u64..1000,
    ) {
        let s = subject(program_seed, faults);
        let mut snaps = Snapshots::default();
        let truth = interpret(&s.program, input, ExecLimits::default(), &mut snaps);
        let run = run_monitored(&s.program, &s.conditions, &policy, input);
        prop_assert_eq!(&run.trace, &truth);
        prop_assert_eq!(run.stats.events_total, truth.events.len());

        let mut next_free = 0;
        let mut recorded = 0;
        let mut longest = 0;
        for f in &run.fragments.fragments {
            let (i0, i1) = (f.meta.start_index.unwrap(), f.meta.end_index.unwrap());
            prop_assert!(i0 >= next_free && i0 <= i1);
            prop_assert_eq!(&f.events[..], &truth.events[i0..=i1]);
            prop_assert_eq!(&f.start, &s.conditions.evaluate(snaps.at(i0)));
            prop_assert_eq!(&f.end, &s.conditions.evaluate(snaps.at(i1 + 1)));
            next_free = i1 + 1;
            recorded += f.events.len();
            longest = longest.max(f.events.len());
        }
        prop_assert_eq!(recorded, run.stats.events_recorded);
        match policy.kind {
            PolicyKind::AlwaysOn | PolicyKind::SplitPoints(_) => {
                prop_assert_eq!(recorded, truth.events.len())
            }
            PolicyKind::AlwaysOff => prop_assert!(run.fragments.is_empty()),
            _ => prop_assert!(
                recorded as f64 <= policy.budget * truth.events.len() as f64 + longest as f64
            ),
        }
    }

    #[test]
    fn interpretation_is_deterministic_and_emits_interface_labels(
        program_seed in 0u64..200,
        faults in any::<bool>(),
        input in any::<u64>(),
    ) {
        let program = generate_subject(&GeneratorParams {
            allow_faults: faults,
            ..GeneratorParams::with_seed(program_seed)
        })
        .unwrap();
        let a = interpret(&program, input, ExecLimits::default(), &mut ());
        let b = interpret(&program, input, ExecLimits::default(), &mut ());
        prop_assert_eq!(&a, &b);
        let labels = program.event_labels();
        prop_assert!(a.events.iter().all(|e| labels.contains(&e.label)));
    }

    #[test]
    fn call_graph_relevance_is_monotone_and_exact(program_seed in 0u64..200, input in 0u64..50) {
        let program = generate_subject(&GeneratorParams::with_seed(program_seed)).unwrap();
        let cg = build_call_graph(&program);
        let n = program.methods().count();
        let sets: Vec<_> = (0..=n + 1)
            .map(|d| relevant_set(&program, &cg, &program.interfaces, d).unwrap().methods)
            .collect();
        for w in sets.windows(2) {
            prop_assert!(w[0].is_subset(&w[1]));
        }
        prop_assert!((0..=n).any(|d| sets[d] == sets[d + 1]));

        let edges: BTreeSet<_> = cg.edges.iter().map(|e| (e.caller, e.callee)).collect();
        let mut snaps = Snapshots::default();
        interpret(&program, input, ExecLimits::default(), &mut snaps);
        prop_assert!(snaps.calls.is_subset(&edges));
    }

    #[test]
    fn every_ground_truth_window_is_cfg_feasible(program_seed in 0u64..100, input in 0u64..1000) {
        let program = generate_subject(&GeneratorParams {
            allow_faults: true,
            ..GeneratorParams::with_seed(program_seed)
        })
        .unwrap();
        let automaton = build_event_automaton(&program);
        let t = interpret(&program, input, ExecLimits::default(), &mut ());
        for i in 0..t.events.len() {
            for j in i + 1..=(i + 10).min(t.events.len()) {
                prop_assert!(cfg_feasible(&automaton, &t.events[i..j]).unwrap());
            }
        }
    }

    #[test]
    fn consecutive_fragments_reassemble_into_the_whole_trace(
        program_seed in 0u64..24,
        input in 0u64..1000,
        cuts in prop::collection::btree_set(1usize..30, 0..4),
    ) {
        let s = subject(program_seed, false);
        let policy = RecordingPolicy {
            kind: PolicyKind::SplitPoints(cuts.into_iter().collect()),
            ..RecordingPolicy::always_on()
        };
        let run = run_monitored(&s.program, &s.conditions, &policy, input);
        let bounds = ChainBounds { max_chain_length: run.fragments.len().max(1), max_outputs: 100_000 };
        let traces = reconstruct(&run.fragments, &bounds);
        prop_assert!(traces.iter().any(|t| t.events == run.trace.events));
    }

    #[test]
    fn fragment_files_round_trip(program_seed in 0u64..24, policy in policy(), input in 0u64..100, with_indices in any::<bool>()) {
        let s = subject(program_seed, false);
        let mut run = run_monitored(&s.program, &s.conditions, &policy, input);
        let mut buf = Vec::new();
        write_fragments(&run.fragments, &mut buf, with_indices).unwrap();
        let back = read_fragments(&mut buf.as_slice(), s.conditions.hash(), s.conditions.len()).unwrap();
        if !with_indices {
            for f in &mut run.fragments.fragments {
                f.meta.start_index = None;
                f.meta.end_index = None;
            }
        }
        prop_assert_eq!(back, run.fragments);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthesized_sets_are_stable_state_only_and_negation_free(program_seed in 0u64..300) {
        let program = generate_subject(&GeneratorParams::with_seed(program_seed)).unwrap();
        let a = synthesize_conditions(&program, 1, &SymConfig::default()).unwrap();
        let b = synthesize_conditions(&program, 1, &SymConfig::default()).unwrap();
        prop_assert_eq!(&a, &b);
        let limits = SolverLimits::default();
        let lit = |c: &fragmon::symexec::Condition, positive| Literal { pred: c.pred.clone(), positive };
        for (i, x) in a.iter().enumerate() {
            prop_assert!(x.pred.is_state_only(), "{}", x.canonical);
            for y in a.iter().skip(i + 1) {
                let both = check(&[lit(x, true), lit(y, true)], &[], &limits);
                let neither = check(&[lit(x, false), lit(y, false)], &[], &limits);
                prop_assert!(
                    !(both == Feasibility::Unsat && neither == Feasibility::Unsat),
                    "{} and {} are negations", x.canonical, y.canonical
                );
            }
        }
    }

    #[test]
    fn reconstruction_respects_junctions_and_coverage_only_grows(
        program_seed in 0u64..24,
        policy_seed in any::<u64>(),
        k in 1u64..20,
    ) {
        let s = subject(program_seed, false);
        let policy = RecordingPolicy::default_with_seed(policy_seed);
        let config = EvalConfig { max_chain_length: 4, ..EvalConfig::default() };
        let small = evaluate_report(&s.program, k, &policy, &config).unwrap();
        let large = evaluate_report(&s.program, 2 * k, &policy, &config).unwrap();
        for r in [&small, &large] {
            prop_assert!(r.traces.iter().all(|t| junctions_hold(&r.fragments, t)));
            for t in &r.traces {
                for w in t.chain.windows(2) {
                    prop_assert_eq!(&r.fragments.fragments[w[0]].end, &r.fragments.fragments[w[1]].start);
                }
            }
            let m = &r.metrics;
            for v in [m.precision, m.exactness, m.coverage, m.overhead_proxy] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        prop_assume!(large.traces.len() < config.max_outputs);
        let pairs = |r: &fragmon::harness::EvalReport| -> BTreeSet<(String, String)> {
            r.traces
                .iter()
                .flat_map(|t| t.events.windows(2).map(|w| (w[0].label.clone(), w[1].label.clone())))
                .collect()
        };
        let universe = |r: &fragmon::harness::EvalReport| -> BTreeSet<(String, String)> {
            r.truth
                .iter()
                .flat_map(|t| t.events.windows(2).map(|w| (w[0].label.clone(), w[1].label.clone())))
                .collect()
        };
        prop_assert!(pairs(&small).is_subset(&pairs(&large)));
        if universe(&small) == universe(&large) {
            prop_assert!(large.metrics.coverage >= small.metrics.coverage);
        }
    }
}
