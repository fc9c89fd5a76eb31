//! Deterministic decision processes.

mod leaf_tree;
mod maze;
mod needle;

use std::fmt::Debug;
use std::hash::Hash;

pub use leaf_tree::{LeafTree, LeafTreeState};
pub use maze::{Action, Cell, Maze, MazeError, DEFAULT_HORIZON};
pub use needle::{NeedleError, NeedlePrior, NeedleState, NeedleTree};

/// A deterministic finite-action decision process of bounded depth.
///
/// `step` must be a pure function of its inputs and rewards must lie in
/// `[-r_max(), r_max()]`.
pub trait DecisionProcess {
    type State: Clone + Debug + PartialEq + Eq + Hash;

    fn root(&self) -> Self::State;
    fn num_actions(&self) -> usize;
    fn step(&self, state: &Self::State, action: usize) -> (Self::State, f64);
    fn is_terminal(&self, state: &Self::State) -> bool;
    /// Maximum search depth measured from the state a search starts at.
    fn horizon(&self) -> usize;
    fn r_max(&self) -> f64;
}

/// Exact state-action values, available for the built-in environments.
pub trait GroundTruth: DecisionProcess {
    /// `Q(s, a)` for every action, including the reward of `a` itself.
    fn ground_truth_q(&self, state: &Self::State) -> Vec<f64>;
}
