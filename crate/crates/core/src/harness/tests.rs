use num::BigInt;

use super::*;
use crate::ir::{interpret, parse_program, ConcreteState, ExecLimits, Value};
use crate::symexec::symbolic_execute;
use crate::VEHICLE_PROGRAM;

const GOLDEN_42: &str = include_str!("../../tests/golden/gen_seed42.subj");

#[test]
fn seed_42_matches_the_golden_program() {
    assert_eq!(
        generate_source(&GeneratorParams::with_seed(42)).unwrap(),
        GOLDEN_42
    );
}

#[test]
fn generation_is_deterministic() {
    for seed in 0..20 {
        let p = GeneratorParams::with_seed(seed);
        assert_eq!(generate_source(&p).unwrap(), generate_source(&p).unwrap());
    }
}

#[test]
fn minimal_configuration_is_straight_line() {
    let params = GeneratorParams {
        rng_seed: 3,
        n_classes: 1,
        n_services: 1,
        n_methods_per_class: 1,
        max_branch_depth: 0,
        max_loop_nesting: 0,
        min_fields: 1,
        max_fields: 1,
        max_block_len: 1,
        max_rounds: 1,
        allow_faults: false,
    };
    let p = generate_subject(&params).unwrap();
    assert_eq!(p.interfaces.len(), 1);
    let trace = interpret(&p, 0, ExecLimits::default(), &mut ());
    assert_eq!(trace.termination, Termination::Normal);
    assert!(!trace.events.is_empty());
}

#[test]
fn generated_programs_terminate_without_faults() {
    for seed in 0..40 {
        let p = generate_subject(&GeneratorParams::with_seed(seed)).unwrap();
        for input in 0..10 {
            let t = interpret(&p, input, ExecLimits::default(), &mut ());
            assert_eq!(
                t.termination,
                Termination::Normal,
                "program {seed}, input {input}"
            );
            assert!(t.events.len() >= 2);
        }
        let set = synthesize_conditions(&p, 1, &SymConfig::default()).unwrap();
        assert!(!set.is_empty(), "program {seed} has no conditions");
    }
}

#[test]
fn fault_mode_can_fault() {
    let faulted = (0..40).any(|seed| {
        let p = generate_subject(&GeneratorParams {
            allow_faults: true,
            ..GeneratorParams::with_seed(seed)
        })
        .unwrap();
        (0..10).any(|i| {
            interpret(&p, i, ExecLimits::default(), &mut ()).termination != Termination::Normal
        })
    });
    assert!(faulted);
}

#[test]
fn always_on_is_perfect() {
    for seed in [1, 42] {
        let p = generate_subject(&GeneratorParams::with_seed(seed)).unwrap();
        let m = evaluate(
            &p,
            20,
            &RecordingPolicy::always_on(),
            &EvalConfig::default(),
        )
        .unwrap();
        assert_eq!(
            (m.precision, m.exactness, m.coverage),
            (1.0, 1.0, 1.0),
            "{m:?}"
        );
        assert_eq!(m.overhead_proxy, 1.0);
    }
}

#[test]
fn always_off_collects_nothing() {
    let p = parse_program(VEHICLE_PROGRAM).unwrap();
    let m = evaluate(
        &p,
        10,
        &RecordingPolicy::always_off(),
        &EvalConfig::default(),
    )
    .unwrap();
    assert_eq!(m.fragments, 0);
    assert_eq!(m.coverage, 0.0);
    assert_eq!(m.overhead_proxy, 0.0);
}

#[test]
fn vehicle_default_policy_audits_cleanly() {
    let p = parse_program(VEHICLE_PROGRAM).unwrap();
    let r = evaluate_report(
        &p,
        100,
        &RecordingPolicy::default_with_seed(42),
        &EvalConfig::default(),
    )
    .unwrap();
    assert_eq!(r.metrics.junction_audit, 1.0);
    assert_eq!(r.metrics.conditions, 2);
    for v in [r.metrics.precision, r.metrics.exactness, r.metrics.coverage] {
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(r.metrics.overhead_proxy <= 1.0);
}

#[test]
fn zero_runs_is_an_error() {
    let p = parse_program(VEHICLE_PROGRAM).unwrap();
    assert!(matches!(
        evaluate(&p, 0, &RecordingPolicy::always_on(), &EvalConfig::default()),
        Err(HarnessError::NoRuns)
    ));
}

#[test]
fn arithmetic_methods_partition_their_inputs() {
    let values = [-1i64, 0, 1, 5000, 5001];
    for seed in 0..10 {
        let p = generate_arith_subject(seed);
        let f = p.find_method(p.class_id("G").unwrap(), "f").unwrap();
        let config = SymConfig::default();
        let paths = symbolic_execute(&p, f, &config).unwrap();
        let state = ConcreteState::initial(&p);
        for a in values {
            for b in values {
                for c in values {
                    let args: Vec<Value> = [a, b, c]
                        .iter()
                        .map(|v| Value::Int(BigInt::from(*v)))
                        .collect();
                    if let Some(n) = matching_paths(&p, f, &paths, &args, &state, config.loop_bound)
                    {
                        assert_eq!(n, 1, "seed {seed}, args {a} {b} {c}\n{}", p.to_source());
                    }
                }
            }
        }
    }
}
