//! Distributed robust convex optimization over time-varying directed graphs.
//!
//! Each agent owns a convex objective and a semi-infinite constraint. The
//! agents run coupled lower and upper bounding procedures built on finite
//! scenario sets, agree on each bounding subproblem's solution through
//! flooding, and stop together once a min-consensus counter certifies that
//! the bound gap is small enough.

pub mod algorithm;
pub mod bounds;
pub mod config;
pub mod consensus;
pub mod graph;
pub mod llp;
pub mod problem;
pub mod sim;
pub mod solver;
pub mod termination;

pub use algorithm::{AgentState, UpperBound, UpperPoint};
pub use bounds::{accuracy_sweep, method1_accuracy, method2_accuracy, SweepRow};
pub use config::{ConfigError, RunConfig};
pub use graph::{GraphSchedule, Topology};
pub use llp::{LlpOracle, LlpSettings, LlpSolution, Verdict};
pub use problem::{
    case_study_instance, case_study_optimal_value, DecisionVector, Hyperbox, Interval, LocalObjective,
    ProblemInstance, Scenario, SemiInfiniteConstraint,
};
pub use sim::{run, IterationRecord, RunParams, RunResult, SimError};
pub use solver::{Cut, FiniteSubproblem, SolveReport, SolverSettings};
pub use termination::{Decision, Method};
