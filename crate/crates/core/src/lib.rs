//! Fragmented monitoring of subject-language programs.

pub mod callgraph;
pub mod harness;
pub mod ir;
pub mod monitor;
pub mod reconstruct;
pub mod symexec;

/// The vehicle fleet example program shipped with the crate.
pub const VEHICLE_PROGRAM: &str = include_str!("../data/vehicle.subj");
