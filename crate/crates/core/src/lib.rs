//! Water-demand forecasting and maintenance scheduling for water
//! distribution networks.
//!
//! The crate has two halves that share nothing but plumbing:
//!
//! * **Forecasting.** [`data`] ingests daily consumption and AEMET-style
//!   meteorological series, [`features`] builds lag / rolling / calendar
//!   predictors, and four model families ([`lstm`], [`additive`], [`gbt`]
//!   and the stacking blend inside [`gbt::stack`]) are compared by
//!   [`eval`].
//! * **Scheduling.** [`schedule`] holds the single-crew preemptive
//!   maintenance scheduling model: instance files, an exact branch-and-bound
//!   solver, a greedy "conventional operator" baseline, a brute-force oracle
//!   and a constraint validator.
//!
//! [`synth`] generates reproducible synthetic datasets and [`pipeline`]
//! wires everything together for the command-line tool.
//!
//! The guide under `book/` walks through each of these with runnable
//! snippets.

pub mod additive;
pub mod data;
pub mod eval;
pub mod features;
pub mod gbt;
pub mod lstm;
mod linalg;
pub mod pipeline;
pub mod schedule;
pub mod synth;
