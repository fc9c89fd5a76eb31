//! Search loops, in-tree selection rules and action commitment.

mod commit;
mod config;
mod dng;
mod search;
mod select;

use thiserror::Error;

use crate::oracles::OracleError;
use crate::tree::TreeError;

pub use commit::{commit, quantile_branch_values};
pub use config::{Algorithm, Commitment, PlannerConfig};
pub use dng::{dng_backup, select_dng, DngNodeStat};
pub use search::{
    halving_schedule, run_search, run_search_sh, select_action, ExploredLeaf, SearchOutcome, TreeStats,
};
pub use select::{
    argmax, bayes_ucb_level, bts_quantile_level, select_bayes_ucb, select_bayes_uct2, select_bts, select_puct,
    select_quantile, select_tsts, softmax, BAYES_UCB_MIN_LEVEL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

impl From<OracleError> for PlanError {
    fn from(e: OracleError) -> Self {
        PlanError::Tree(TreeError::Oracle(e))
    }
}
