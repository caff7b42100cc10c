//! Static call graph and depth-bounded relevance around the monitored
//! interface classes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use thiserror::Error;

use crate::ir::{walk_stmts, CallSiteId, ClassId, MethodRef, Rhs, Stmt, SubjectProgram};

/// Default number of caller-or-callee hops explored from interface methods.
pub const DEFAULT_DEPTH: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallEdge {
    pub caller: MethodRef,
    pub callee: MethodRef,
    pub site: CallSiteId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallGraph {
    pub nodes: Vec<MethodRef>,
    /// One edge per call site, ordered by site id.
    pub edges: Vec<CallEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelevanceSet {
    pub methods: BTreeSet<MethodRef>,
    pub classes: BTreeSet<ClassId>,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallGraphError {
    #[error("unknown interface class id {0}")]
    UnknownInterface(usize),
}

/// One edge per call statement; `new C(..)` counts as a call to the
/// constructor when `C` declares one.
pub fn build_call_graph(program: &SubjectProgram) -> CallGraph {
    let mut edges = Vec::new();
    for caller in program.methods() {
        walk_stmts(&program.method(caller).body, &mut |stmt| {
            let call = match stmt {
                Stmt::Invoke(call)
                | Stmt::Assign {
                    value: Rhs::Call(call),
                    ..
                } => Some((call.callee, call.site)),
                Stmt::Assign {
                    value: Rhs::New { site, class, .. },
                    ..
                } => program.class(*class).constructor.map(|index| {
                    (
                        MethodRef {
                            class: *class,
                            index,
                        },
                        *site,
                    )
                }),
                _ => None,
            };
            if let Some((callee, site)) = call {
                edges.push(CallEdge {
                    caller,
                    callee,
                    site,
                });
            }
        });
    }
    edges.sort_by_key(|e| e.site);
    CallGraph {
        nodes: program.methods().collect(),
        edges,
    }
}

/// Methods within `depth` undirected hops of any method of an interface
/// class, and the classes owning them.
pub fn relevant_set(
    program: &SubjectProgram,
    cg: &CallGraph,
    interfaces: &BTreeSet<ClassId>,
    depth: usize,
) -> Result<RelevanceSet, CallGraphError> {
    if let Some(bad) = interfaces.iter().find(|c| c.0 >= program.classes.len()) {
        return Err(CallGraphError::UnknownInterface(bad.0));
    }
    let mut adjacent: BTreeMap<MethodRef, BTreeSet<MethodRef>> = BTreeMap::new();
    for e in &cg.edges {
        adjacent.entry(e.caller).or_default().insert(e.callee);
        adjacent.entry(e.callee).or_default().insert(e.caller);
    }
    let mut dist: BTreeMap<MethodRef, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for m in &cg.nodes {
        if interfaces.contains(&m.class) {
            dist.insert(*m, 0);
            queue.push_back(*m);
        }
    }
    while let Some(m) = queue.pop_front() {
        let d = dist[&m];
        if d == depth {
            continue;
        }
        for n in adjacent.get(&m).into_iter().flatten() {
            if !dist.contains_key(n) {
                dist.insert(*n, d + 1);
                queue.push_back(*n);
            }
        }
    }
    let methods: BTreeSet<MethodRef> = dist.into_keys().collect();
    let classes = methods.iter().map(|m| m.class).collect();
    Ok(RelevanceSet {
        methods,
        classes,
        depth,
    })
}

/// Graphviz rendering; relevant methods are filled.
pub fn to_dot(
    program: &SubjectProgram,
    cg: &CallGraph,
    relevance: Option<&RelevanceSet>,
) -> String {
    let mut out = String::from("digraph calls {\n    node [shape=box];\n");
    for m in &cg.nodes {
        let name = program.method_name(*m);
        let style = match relevance {
            Some(r) if r.methods.contains(m) => " style=filled fillcolor=lightgrey",
            _ => "",
        };
        writeln!(out, "    \"{name}\" [label=\"{name}\"{style}];").unwrap();
    }
    for e in &cg.edges {
        writeln!(
            out,
            "    \"{}\" -> \"{}\" [label=\"s{}\"];",
            program.method_name(e.caller),
            program.method_name(e.callee),
            e.site.0
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::VEHICLE_PROGRAM;

    fn names(p: &SubjectProgram, ms: &BTreeSet<MethodRef>) -> Vec<String> {
        ms.iter().map(|m| p.method_name(*m)).collect()
    }

    #[test]
    fn vehicle_edges() {
        let p = parse_program(VEHICLE_PROGRAM).unwrap();
        let cg = build_call_graph(&p);
        let count = |from: &str, to: &str| {
            cg.edges
                .iter()
                .filter(|e| p.method_name(e.caller) == from && p.method_name(e.callee) == to)
                .count()
        };
        assert_eq!(count("VehicleService.weight", "Vehicle.getWeight"), 3);
        assert_eq!(count("VehicleService.velocity", "Vehicle.getMaxVel"), 3);
        assert_eq!(count("VehicleService.main", "Vehicle.Vehicle"), 3);
        assert_eq!(cg.edges.len(), 3 + 3 + 3 + 2);
    }

    #[test]
    fn vehicle_depth_one_selects_both_classes() {
        let p = parse_program(VEHICLE_PROGRAM).unwrap();
        let cg = build_call_graph(&p);
        let r = relevant_set(&p, &cg, &p.interfaces, 1).unwrap();
        let classes: Vec<&str> = r
            .classes
            .iter()
            .map(|c| p.class(*c).name.as_str())
            .collect();
        assert_eq!(classes, ["Vehicle", "VehicleService"]);
        let r0 = relevant_set(&p, &cg, &p.interfaces, 0).unwrap();
        assert_eq!(
            names(&p, &r0.methods),
            ["Vehicle.Vehicle", "Vehicle.getWeight", "Vehicle.getMaxVel"]
        );
    }

    const CHAIN: &str = "interface V\nentry A.main\nclass V {\n method go() {\n }\n}\nclass B {\n global v: V\n static method b() {\n v.go()\n }\n}\nclass A {\n static method a() {\n B.b()\n }\n static method main() {\n }\n}\n";

    #[test]
    fn chain_depth_two_reaches_a() {
        let p = parse_program(CHAIN).unwrap();
        let cg = build_call_graph(&p);
        let r1 = relevant_set(&p, &cg, &p.interfaces, 1).unwrap();
        assert_eq!(names(&p, &r1.methods), ["V.go", "B.b"]);
        let r2 = relevant_set(&p, &cg, &p.interfaces, 2).unwrap();
        assert_eq!(names(&p, &r2.methods), ["V.go", "B.b", "A.a"]);
    }

    #[test]
    fn recursion_gives_self_edge_and_no_calls_gives_no_edges() {
        let p = parse_program("entry M.main\nclass M {\n static method main() {\n main()\n }\n}\n")
            .unwrap();
        let cg = build_call_graph(&p);
        assert_eq!(cg.edges.len(), 1);
        assert_eq!(cg.edges[0].caller, cg.edges[0].callee);
        let p = parse_program("entry M.main\nclass M {\n static method main() {\n }\n}\n").unwrap();
        let cg = build_call_graph(&p);
        assert_eq!(cg.nodes.len(), 1);
        assert!(cg.edges.is_empty());
    }

    #[test]
    fn unknown_interface_is_an_error() {
        let p = parse_program(VEHICLE_PROGRAM).unwrap();
        let cg = build_call_graph(&p);
        let bad = BTreeSet::from([ClassId(9)]);
        assert_eq!(
            relevant_set(&p, &cg, &bad, 1),
            Err(CallGraphError::UnknownInterface(9))
        );
    }

    #[test]
    fn dot_export_lists_edges() {
        let p = parse_program(VEHICLE_PROGRAM).unwrap();
        let cg = build_call_graph(&p);
        let dot = to_dot(&p, &cg, None);
        assert!(dot.starts_with("digraph calls {"));
        assert!(dot.contains("\"VehicleService.weight\" -> \"Vehicle.getWeight\""));
    }
}
