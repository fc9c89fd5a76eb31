use super::DecisionProcess;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LeafTreeState {
    pub depth: usize,
    pub index: usize,
}

/// A full tree with zero rewards whose bottom-level edges carry independent
/// Gaussian value priors. Used to compare forward sampling against exact
/// Thompson sampling. The bottom level sits at the horizon, so its edges are
/// never expanded and keep their priors.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafTree {
    depth: usize,
    branching: usize,
    /// `(mean, std)` per bottom-level edge, left to right.
    leaf_priors: Vec<(f64, f64)>,
}

impl LeafTree {
    pub fn new(depth: usize, branching: usize, leaf_priors: Vec<(f64, f64)>) -> Option<LeafTree> {
        let expected = branching.checked_pow(depth as u32)?;
        (depth >= 1 && branching >= 1 && leaf_priors.len() == expected).then_some(LeafTree {
            depth,
            branching,
            leaf_priors,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn leaf_priors(&self) -> &[(f64, f64)] {
        &self.leaf_priors
    }

    /// Index of the bottom-level edge `(state, action)`; `None` above it.
    pub fn leaf_index(&self, state: &LeafTreeState, action: usize) -> Option<usize> {
        (state.depth + 1 == self.depth).then(|| state.index * self.branching + action)
    }

    /// Leaf edge indices below `(state, action)`.
    pub fn leaves_below(&self, state: &LeafTreeState, action: usize) -> std::ops::Range<usize> {
        let width = self.branching.pow((self.depth - state.depth - 1) as u32);
        let first = (state.index * self.branching + action) * width;
        first..first + width
    }
}

impl DecisionProcess for LeafTree {
    type State = LeafTreeState;

    fn root(&self) -> LeafTreeState {
        LeafTreeState { depth: 0, index: 0 }
    }

    fn num_actions(&self) -> usize {
        self.branching
    }

    fn step(&self, state: &LeafTreeState, action: usize) -> (LeafTreeState, f64) {
        (
            LeafTreeState {
                depth: state.depth + 1,
                index: state.index * self.branching + action,
            },
            0.0,
        )
    }

    fn is_terminal(&self, _state: &LeafTreeState) -> bool {
        false
    }

    fn horizon(&self) -> usize {
        self.depth
    }

    fn r_max(&self) -> f64 {
        0.0
    }
}
