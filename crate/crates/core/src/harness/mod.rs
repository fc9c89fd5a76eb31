//! Episodes, regret measurement, experiment sweeps and the regret-bound check.

mod bound;
mod episode;
mod experiment;
mod regret;

use thiserror::Error;

use crate::env::{MazeError, NeedleError};
use crate::oracles::OracleError;
use crate::planners::PlanError;

pub use bound::{bound_check, exploration_regret, BoundReport, BoundRow, BoundSpec, LeafSelector};
pub use episode::{greedy_episode, online_episode, EpisodeResult, StepSummary, DEFAULT_STEP_CAP};
pub use experiment::{
    mean_stderr, read_records, run_experiment, summarize, summary_path, Cell, CellSummary, ExperimentReport,
    ExperimentSection, ExperimentSpec, MazeOracle, OracleKind, OracleSpec, PlannerEntry, ResultRecord, SeedSet,
};
pub use regret::{attach_regret, regret_trace};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Maze(#[from] MazeError),
    #[error(transparent)]
    Needle(#[from] NeedleError),
}
