use super::linear::Root;
use super::*;
use crate::callgraph::{build_call_graph, relevant_set};
use crate::ir::{parse_program, MethodRef};
use crate::VEHICLE_PROGRAM;

const MEAN_WEIGHT: &str =
    "(VehicleService.car.weight + VehicleService.truck.weight + VehicleService.van.weight) / 3 > 5000";
const MEAN_VELOCITY: &str =
    "(VehicleService.car.maxVel + VehicleService.truck.maxVel + VehicleService.van.maxVel) / 3 > 110";

fn method(p: &SubjectProgram, class: &str, name: &str) -> MethodRef {
    p.find_method(p.class_id(class).unwrap(), name).unwrap()
}

fn vehicle_conditions(depth: usize, loop_bound: usize) -> ConditionSet {
    let p = parse_program(VEHICLE_PROGRAM).unwrap();
    let cg = build_call_graph(&p);
    let r = relevant_set(&p, &cg, &p.interfaces, depth).unwrap();
    let config = SymConfig {
        loop_bound,
        ..SymConfig::default()
    };
    synthesize(&p, &r, &config).unwrap()
}

#[test]
fn weight_method_has_two_paths() {
    let p = parse_program(VEHICLE_PROGRAM).unwrap();
    let paths = symbolic_execute(
        &p,
        method(&p, "VehicleService", "weight"),
        &SymConfig::default(),
    )
    .unwrap();
    assert_eq!(paths.len(), 2);
    let rendered: Vec<String> = paths.iter().map(|pc| pc.clauses[0].to_string()).collect();
    assert_eq!(
        rendered,
        [MEAN_WEIGHT.to_string(), MEAN_WEIGHT.replace(" > ", " <= ")]
    );
    assert!(paths.iter().all(|pc| pc.exact && pc.fault.is_none()));
}

#[test]
fn vehicle_synthesis_yields_the_two_means() {
    for bound in [1, 3] {
        let set = vehicle_conditions(1, bound);
        assert_eq!(set.canonical_forms(), [MEAN_VELOCITY, MEAN_WEIGHT]);
    }
}

#[test]
fn synthesis_is_deterministic() {
    assert_eq!(vehicle_conditions(1, 3), vehicle_conditions(1, 3));
}

#[test]
fn empty_relevance_gives_empty_set() {
    let p = parse_program(VEHICLE_PROGRAM).unwrap();
    let r = crate::callgraph::RelevanceSet {
        methods: Default::default(),
        classes: Default::default(),
        depth: 0,
    };
    assert!(synthesize(&p, &r, &SymConfig::default())
        .unwrap()
        .is_empty());
}

const LOOPS: &str = "entry M.main
class M {
    global s: S
    static method count(n: int) {
        var i: int = 0
        while i < n {
            i = i + 1
        }
    }
    static method straight(a: int): int {
        var b: int = a * 2
        return b + 1
    }
    static method mixed(x: int) {
        if x > s.w {
            s.w = x
        }
        if s.w > 10 {
            s.w = 0
        }
        if s.w < 11 {
            s.w = 1
        }
    }
    static method main() {
    }
}
class S {
    field w: int
}
";

#[test]
fn loop_bound_limits_iterations() {
    let p = parse_program(LOOPS).unwrap();
    let m = method(&p, "M", "count");
    let config = SymConfig {
        loop_bound: 2,
        ..SymConfig::default()
    };
    let paths = symbolic_execute(&p, m, &config).unwrap();
    assert_eq!(paths.len(), 3);
    let paths = symbolic_execute(&p, m, &SymConfig::default()).unwrap();
    assert_eq!(paths.len(), 4);
}

#[test]
fn straight_line_method_has_one_empty_path() {
    let p = parse_program(LOOPS).unwrap();
    let paths = symbolic_execute(&p, method(&p, "M", "straight"), &SymConfig::default()).unwrap();
    assert_eq!(paths.len(), 1);
    assert!(paths[0].clauses.is_empty());
}

#[test]
fn parameter_clauses_are_dropped_and_negations_collapse() {
    let p = parse_program(LOOPS).unwrap();
    let paths = symbolic_execute(&p, method(&p, "M", "mixed"), &SymConfig::default()).unwrap();
    assert!(paths.iter().flat_map(|pc| &pc.clauses).any(|l| l
        .pred
        .symbols()
        .iter()
        .any(|s| matches!(s.root, Root::Param(_)))));
    let set = extract_conditions(&paths);
    // `s.w > 10` and `s.w < 11` are negations of each other.
    assert_eq!(set.canonical_forms(), ["M.s.w > 10"]);
}

#[test]
fn nonconstant_division_forks_on_zero() {
    let src = "entry M.main\nclass M {\n static method f(a: int, b: int): int {\n return a / b\n }\n static method main() {\n }\n}\n";
    let p = parse_program(src).unwrap();
    let paths = symbolic_execute(&p, method(&p, "M", "f"), &SymConfig::default()).unwrap();
    assert_eq!(paths.len(), 2);
    assert_eq!(paths[0].fault, Some(crate::ir::Fault::DivisionByZero));
    assert_eq!(paths[1].fault, None);
}

#[test]
fn calls_beyond_inline_depth_are_havocked() {
    let src = "entry M.main
class M {
    global s: S
    static method a() {
        b()
        if s.w > 3 {
            return
        }
    }
    static method b() {
        c()
    }
    static method c() {
        d()
    }
    static method d() {
        s.w = 7
    }
    static method main() {
    }
}
class S {
    field w: int
}
";
    let p = parse_program(src).unwrap();
    let config = SymConfig {
        inline_depth: 2,
        ..SymConfig::default()
    };
    // a -> b -> c are inlined, d is havocked, so s.w is opaque afterwards.
    let paths = symbolic_execute(&p, method(&p, "M", "a"), &config).unwrap();
    assert_eq!(paths.len(), 2);
    assert!(extract_conditions(&paths).is_empty());
    // With enough inlining the write of 7 is known and the branch is forced.
    let config = SymConfig {
        inline_depth: 3,
        ..SymConfig::default()
    };
    let paths = symbolic_execute(&p, method(&p, "M", "a"), &config).unwrap();
    assert_eq!(paths.len(), 1);
}

#[test]
fn path_explosion_is_reported() {
    let p = parse_program(LOOPS).unwrap();
    let config = SymConfig {
        max_paths: 2,
        ..SymConfig::default()
    };
    let err = symbolic_execute(&p, method(&p, "M", "count"), &config).unwrap_err();
    assert!(matches!(err, SymExecError::PathExplosion { limit: 2, .. }));
}

#[test]
fn condition_file_round_trips() {
    let set = vehicle_conditions(1, 3);
    let text = set.to_file_string(Some("abc"));
    let (back, header) = ConditionSet::parse_file(&text).unwrap();
    assert_eq!(back, set);
    assert_eq!(header.count, 2);
    assert_eq!(header.program_hash.as_deref(), Some("abc"));
    assert_eq!(back.hash(), set.hash());
}

#[test]
fn condition_file_rejects_noncanonical_lines() {
    let text = format!("{CONDITIONS_MAGIC}\n# count: 1\nA.b.c < 3\n");
    assert!(matches!(
        ConditionSet::parse_file(&text),
        Err(ConditionFileError::Parse { .. })
    ));
    let text = format!("{CONDITIONS_MAGIC}\n# count: 1\nA.b.c + 0 > 2\n");
    assert!(matches!(
        ConditionSet::parse_file(&text),
        Err(ConditionFileError::NonCanonical { .. })
    ));
    let text = format!("{CONDITIONS_MAGIC}\n# count: 2\nA.b.d > 1\nA.b.c > 1\n");
    assert!(matches!(
        ConditionSet::parse_file(&text),
        Err(ConditionFileError::Unsorted { .. })
    ));
    let text = format!("{CONDITIONS_MAGIC}\n# count: 3\nA.b.c > 1\n");
    assert!(matches!(
        ConditionSet::parse_file(&text),
        Err(ConditionFileError::CountMismatch { .. })
    ));
    assert_eq!(
        ConditionSet::parse_file("hello\n"),
        Err(ConditionFileError::BadMagic)
    );
}
