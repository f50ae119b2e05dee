//! Congestion-aware vertiport slot auction: instance model, auxiliary flow
//! network, exact welfare maximization, VCG-style payments and a brute-force
//! reference implementation.

pub mod gen;
pub mod graph;
pub mod io;
pub mod mechanism;
mod mcf;
pub mod model;
pub mod oracle;
pub mod properties;
pub mod rational;
pub mod solver;

pub use graph::{build_graph, AuxGraph, AuxVertex, BuildOptions, DeltaAssignment, EdgeClass, FlowSolution};
pub use model::*;
pub use rational::{int, parse_rational, ratio, render_rational, Rational};
