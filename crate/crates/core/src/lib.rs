//! Bayesian online planning over deterministic decision processes.
//!
//! The search keeps a value posterior on every discovered edge, propagates
//! them to the root by max-backup and selects leaves by Thompson sampling or
//! by optimistic quantiles. Built-in environments (a procedural grid maze and
//! needle trees) come with exact value oracles, so every planner can be
//! evaluated against ground truth.

pub mod env;
pub mod harness;
pub mod oracles;
pub mod planners;
pub mod posterior;
pub mod seeding;
pub mod tree;

pub use env::{DecisionProcess, GroundTruth, Maze, NeedleTree};
pub use oracles::QueryProvider;
pub use planners::{commit, run_search, Algorithm, Commitment, PlannerConfig, SearchOutcome};
pub use posterior::PosteriorDist;
pub use tree::SearchTree;
