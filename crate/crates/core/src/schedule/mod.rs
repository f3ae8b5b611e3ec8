//! Single-crew maintenance scheduling with preemption, release times and
//! task dependencies.
//!
//! A crew visits a set of maintenance sites during one work day. Each task
//! has a processing time, its own fuel and CO₂ cost, a release time and a
//! vehicle type; moving between sites costs travel time, fuel and CO₂.
//! Emergency tasks (those released after the start of the day) may
//! interrupt a running task, which is then resumed later in another segment.
//!
//! The weighted objective is
//!
//! ```text
//! Z = w_t · (C_max − S) + w_f · F_total + w_c · C_total + w_d · D_total
//! ```
//!
//! where `F_total`/`C_total` add travel legs to the per-task costs and
//! `D_total` sums how far emergency tasks finish past their release.
//!
//! * [`Instance`] loads and validates instance files.
//! * [`solve_exact`] is a depth-first branch-and-bound search.
//! * [`solve_baseline`] is the greedy "conventional operator" rule.
//! * [`brute_force`] enumerates task orders for small instances.
//! * [`validate`] checks every constraint of a finished schedule.
//! * [`compare_runs`] averages both solvers over generated instances.

mod compare;
mod exact;
mod greedy;
mod instance;
mod solution;
mod time;

pub use compare::{compare_runs, format_table, ComparisonReport, InstanceGenerator, MetricRow, RandomInstances, RunRecord, TABLE_HEADER};
pub use exact::{solve_exact, SolveOptions};
pub use greedy::{brute_force, solve_baseline, BRUTE_FORCE_MAX_TASKS};
pub use instance::{DependencyFile, Instance, InstanceFile, Task, TaskFile, TravelFile, Vehicle, VehicleFile, Weights, WorkDay};
pub use solution::{metrics, objective, validate, Breakdown, Metrics, Segment, SegmentReport, Solution, SolutionReport, Violation};
pub use time::Ticks;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("cannot read instance: {0}")]
    Io(String),
    #[error("cannot parse instance: {0}")]
    Parse(String),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("dependency cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("task {task} references unknown vehicle `{vehicle}`")]
    UnknownVehicle { task: String, vehicle: String },
    #[error("no travel entry between tasks {0} and {1}")]
    MissingTravel(String, String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("no feasible schedule: {0}")]
    Infeasible(String),
    #[error("time budget exhausted before any feasible schedule was found")]
    BudgetExhausted,
    #[error("instance has {tasks} tasks; enumeration is limited to {max}")]
    TooLarge { tasks: usize, max: usize },
    #[error("solution is incomplete: {0}")]
    Incomplete(String),
    #[error("efficiency is undefined when the makespan is zero")]
    ZeroSpan,
}
