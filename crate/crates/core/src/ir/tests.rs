use num::BigInt;

use super::*;
use crate::VEHICLE_PROGRAM;

fn vehicle() -> SubjectProgram {
    parse_program(VEHICLE_PROGRAM).expect("vehicle program parses")
}

fn labels(trace: &GroundTruthTrace) -> Vec<&str> {
    trace.events.iter().map(|e| e.label.as_str()).collect()
}

#[test]
fn vehicle_program_shape() {
    let p = vehicle();
    assert_eq!(p.classes.len(), 2);
    let globals: Vec<String> = (0..p.globals.len())
        .map(|g| p.global_name(GlobalId(g)))
        .collect();
    assert_eq!(
        globals,
        [
            "VehicleService.truck",
            "VehicleService.van",
            "VehicleService.car"
        ]
    );
    assert_eq!(p.method_name(p.entry), "VehicleService.main");
    let vehicle = p.class_id("Vehicle").unwrap();
    assert!(p.is_interface(vehicle));
    assert_eq!(p.class(vehicle).constructor, Some(0));
}

#[test]
fn source_round_trips() {
    let p = vehicle();
    let printed = p.to_source();
    let again = parse_program(&printed).unwrap();
    assert_eq!(p, again);
    assert_eq!(printed, again.to_source());
}

#[test]
fn printer_keeps_needed_parentheses() {
    let src = "entry M.main\nclass M {\n static method main() {\n var a: int = 1\n var b: int = (a - (a - 1)) * -(a + 2) / (3 * a)\n var c: bool = not (a < b or b < a) and (true or false)\n }\n}\n";
    let p = parse_program(src).unwrap();
    let printed = p.to_source();
    assert!(printed.contains("a - (a - 1)"), "{printed}");
    assert_eq!(parse_program(&printed).unwrap(), p);
}

#[test]
fn entry_must_resolve() {
    let err = parse_program("entry Main.main\n").unwrap_err();
    assert!(
        matches!(
            err,
            ProgramError::Unresolved {
                kind: "entry method",
                ..
            }
        ),
        "{err}"
    );
    assert!(err.to_string().contains("entry method"));
}

#[test]
fn bool_assigned_to_int_is_a_type_error() {
    let src = "entry M.main\nclass M {\n    static method main() {\n        var b: bool = true\n        var x: int = b\n    }\n}\n";
    match parse_program(src).unwrap_err() {
        ProgramError::Type { line, expr, .. } => {
            assert_eq!(line, 5);
            assert_eq!(expr, "b");
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn duplicate_names_are_rejected() {
    let dup_field =
        "entry M.main\nclass M {\n field a: int\n field a: bool\n static method main() {\n }\n}\n";
    assert!(matches!(
        parse_program(dup_field).unwrap_err(),
        ProgramError::Duplicate { kind: "member", .. }
    ));
    let dup_local = "entry M.main\nclass M {\n static method main() {\n var x: int = 1\n if true {\n var x: int = 2\n }\n }\n}\n";
    assert!(matches!(
        parse_program(dup_local).unwrap_err(),
        ProgramError::Duplicate { kind: "local", .. }
    ));
    let dup_class = "entry M.main\nclass M {\n}\nclass M {\n}\n";
    assert!(matches!(
        parse_program(dup_class).unwrap_err(),
        ProgramError::Duplicate { kind: "class", .. }
    ));
}

#[test]
fn syntax_errors_carry_positions() {
    let err = parse_program(
        "entry M.main\nclass M {\n  static method main() {\n    var x: int = 1 +\n  }\n}\n",
    )
    .unwrap_err();
    match err {
        ProgramError::Syntax { line, .. } => assert_eq!(line, 4),
        other => panic!("unexpected error {other}"),
    }
    let err = parse_program(
        "entry M.main\nclass M {\n static method main() {\n var x: bool = 1 < 2 < 3\n }\n}\n",
    )
    .unwrap_err();
    assert!(err.to_string().contains("do not chain"), "{err}");
}

#[test]
fn calls_are_statement_level_only() {
    let src = "entry M.main\nclass M {\n static method f(): int {\n return 1\n }\n static method main() {\n var x: int = f() + 1\n }\n}\n";
    assert!(matches!(
        parse_program(src).unwrap_err(),
        ProgramError::Syntax { .. }
    ));
}

#[test]
fn vehicle_trace_matches_hand_trace() {
    let p = vehicle();
    let trace = interpret(&p, 0, ExecLimits::default(), &mut ());
    assert_eq!(trace.termination, Termination::Normal);
    assert_eq!(
        labels(&trace),
        [
            "Vehicle()",
            "Vehicle()",
            "Vehicle()",
            "Vehicle.getWeight()",
            "Vehicle.getWeight()",
            "Vehicle.getWeight()",
            "Vehicle.getMaxVel()",
            "Vehicle.getMaxVel()",
            "Vehicle.getMaxVel()",
        ]
    );
}

#[test]
fn interpretation_is_deterministic() {
    let p = vehicle();
    for seed in 0..5 {
        let a = interpret(&p, seed, ExecLimits::default(), &mut ());
        let b = interpret(&p, seed, ExecLimits::default(), &mut ());
        assert_eq!(a, b);
    }
}

#[test]
fn empty_entry_gives_empty_trace() {
    let p = parse_program("entry M.main\nclass M {\n static method main() {\n }\n}\n").unwrap();
    let trace = interpret(&p, 7, ExecLimits::default(), &mut ());
    assert!(trace.events.is_empty());
    assert_eq!(trace.termination, Termination::Normal);
}

#[test]
fn null_dereference_truncates_the_trace() {
    let src = "interface V\nentry M.main\nclass V {\n field w: int\n method get(): int {\n return w\n }\n}\nclass M {\n global a: V\n global b: V\n static method main() {\n a = new V()\n var x: int = a.get()\n x = b.get()\n x = a.get()\n }\n}\n";
    let p = parse_program(src).unwrap();
    let trace = interpret(&p, 0, ExecLimits::default(), &mut ());
    assert_eq!(
        trace.termination,
        Termination::Fault(Fault::NullDereference)
    );
    assert_eq!(labels(&trace), ["V()", "V.get()"]);
}

#[test]
fn step_budget_stops_infinite_loops() {
    let src = "entry M.main\nclass M {\n static method main() {\n while true {\n }\n }\n}\n";
    let p = parse_program(src).unwrap();
    let limits = ExecLimits {
        step_budget: 1000,
        ..ExecLimits::default()
    };
    let trace = interpret(&p, 0, limits, &mut ());
    assert_eq!(
        trace.termination,
        Termination::Fault(Fault::StepBudgetExceeded)
    );
}

#[test]
fn unbounded_recursion_hits_the_depth_limit() {
    let src = "entry M.main\nclass M {\n static method main() {\n main()\n }\n}\n";
    let p = parse_program(src).unwrap();
    let trace = interpret(&p, 0, ExecLimits::default(), &mut ());
    assert_eq!(
        trace.termination,
        Termination::Fault(Fault::CallDepthExceeded)
    );
}

#[test]
fn division_truncates_toward_zero() {
    let src = "entry M.main\nclass M {\n static method f(a: int, b: int): int {\n return a / b\n }\n static method main() {\n }\n}\n";
    let p = parse_program(src).unwrap();
    let f = p.find_method(p.class_id("M").unwrap(), "f").unwrap();
    let mut it = Interpreter::new(&p, 0, ExecLimits::default());
    let int = |v: i64| Value::Int(BigInt::from(v));
    for (a, b, q) in [(7, 2, 3), (-7, 2, -3), (7, -2, -3), (-7, -2, 3)] {
        let run = it.run_method(f, Value::Null, vec![int(a), int(b)]);
        assert_eq!(run.result, Ok(Some(int(q))), "{a} / {b}");
    }
    let run = it.run_method(f, Value::Null, vec![int(1), int(0)]);
    assert_eq!(run.result, Err(Fault::DivisionByZero));
}

#[test]
fn loop_iterations_are_tracked() {
    let src = "entry M.main\nclass M {\n static method f(n: int) {\n var i: int = 0\n while i < n {\n i = i + 1\n }\n }\n static method main() {\n }\n}\n";
    let p = parse_program(src).unwrap();
    let f = p.find_method(p.class_id("M").unwrap(), "f").unwrap();
    let mut it = Interpreter::new(&p, 0, ExecLimits::default());
    let run = it.run_method(f, Value::Null, vec![Value::Int(BigInt::from(4))]);
    assert_eq!(run.max_loop_iterations, 4);
}

struct Snapshots(Vec<ConcreteState>);

impl Observer for Snapshots {
    fn on_event(&mut self, _: usize, _: &Event, state: &ConcreteState) {
        self.0.push(state.clone());
    }
    fn on_finish(&mut self, _: &ConcreteState, _: Termination) {}
}

#[test]
fn state_paths_read_through_globals() {
    let p = vehicle();
    let mut snaps = Snapshots(Vec::new());
    let trace = interpret(&p, 3, ExecLimits::default(), &mut snaps);
    assert_eq!(snaps.0.len(), trace.events.len());
    let truck_weight: StatePath = "VehicleService.truck.weight".parse().unwrap();
    let resolved = truck_weight.resolve(&p).unwrap();
    assert_eq!(resolved.ty, Type::Int);
    // Before the first allocation every global is null.
    assert_eq!(eval_state_path(&snaps.0[0], &resolved), PathValue::Unknown);
    // By the first getWeight() call all three vehicles exist.
    match eval_state_path(&snaps.0[3], &resolved) {
        PathValue::Value(Value::Int(w)) => {
            assert!(w >= BigInt::from(1000) && w <= BigInt::from(9000))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn explicit_state_values_are_read_back() {
    let p = vehicle();
    let mut state = ConcreteState::initial(&p);
    let vehicle = p.class_id("Vehicle").unwrap();
    let obj = state.alloc(&p, vehicle);
    state.heap[obj.0].fields[0] = Value::Int(BigInt::from(6000));
    state.globals[0] = Value::Ref(obj);
    let path = "VehicleService.truck.weight".parse::<StatePath>().unwrap();
    assert_eq!(
        eval_state_path(&state, &path.resolve(&p).unwrap()),
        PathValue::Value(Value::Int(BigInt::from(6000)))
    );
}

#[test]
fn bad_paths_are_configuration_errors() {
    let p = vehicle();
    let missing_field: StatePath = "VehicleService.truck.colour".parse().unwrap();
    assert!(matches!(
        missing_field.resolve(&p),
        Err(PathError::Unresolved { .. })
    ));
    assert!(matches!(
        "truck".parse::<StatePath>(),
        Err(PathError::Malformed(_))
    ));
    assert!(matches!(
        "A..b".parse::<StatePath>(),
        Err(PathError::Malformed(_))
    ));
}

#[test]
fn event_labels_cover_interface_methods() {
    let p = vehicle();
    let labels: Vec<String> = p.event_labels().into_iter().collect();
    assert_eq!(
        labels,
        ["Vehicle()", "Vehicle.getMaxVel()", "Vehicle.getWeight()"]
    );
}
