use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{DecisionProcess, GroundTruth};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeedleError {
    #[error("needle tree needs depth >= 1 and at least 2 actions, got depth {0} with {1} actions")]
    BadShape(usize, usize),
    #[error("invalid prior: {0}")]
    BadPrior(String),
}

/// Distribution over which edge carries the unit reward.
#[derive(Debug, Clone, PartialEq)]
pub enum NeedlePrior {
    Uniform,
    /// `mass` on `edge`, the rest spread uniformly over the other edges.
    Concentrated { edge: usize, mass: f64 },
    Explicit(Vec<f64>),
}

impl NeedlePrior {
    pub fn probabilities(&self, num_edges: usize) -> Result<Vec<f64>, NeedleError> {
        match self {
            NeedlePrior::Uniform => Ok(vec![1.0 / num_edges as f64; num_edges]),
            NeedlePrior::Concentrated { edge, mass } => {
                if *edge >= num_edges || !(0.0..=1.0).contains(mass) {
                    return Err(NeedleError::BadPrior(format!(
                        "edge {edge} / mass {mass} invalid for {num_edges} edges"
                    )));
                }
                let rest = (1.0 - mass) / (num_edges - 1) as f64;
                let mut p = vec![rest; num_edges];
                p[*edge] = *mass;
                Ok(p)
            }
            NeedlePrior::Explicit(p) => {
                let total: f64 = p.iter().sum();
                if p.len() != num_edges || p.iter().any(|x| *x < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(NeedleError::BadPrior(format!(
                        "expected {num_edges} nonnegative probabilities summing to 1"
                    )));
                }
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeedleState {
    pub depth: usize,
    /// Position of the node within its level, in left-to-right order.
    pub index: usize,
}

/// A full `branching`-ary tree of depth `depth` in which exactly one edge pays
/// reward 1 and every other edge pays 0.
///
/// Edges carry global ids in breadth-first order: level `d` holds
/// `branching^(d+1)` edges and edge `(node, a)` at that level has id
/// `offset(d) + node * branching + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeedleTree {
    depth: usize,
    branching: usize,
    needle: usize,
    prior: Vec<f64>,
}

impl NeedleTree {
    /// Draws the rewarded edge from `prior` with a seeded generator.
    pub fn sample(
        seed: u64,
        depth: usize,
        branching: usize,
        prior: &NeedlePrior,
    ) -> Result<NeedleTree, NeedleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::sample_with(&mut rng, depth, branching, prior)
    }

    pub fn sample_with<R: rand::Rng + ?Sized>(
        rng: &mut R,
        depth: usize,
        branching: usize,
        prior: &NeedlePrior,
    ) -> Result<NeedleTree, NeedleError> {
        if depth < 1 || branching < 2 {
            return Err(NeedleError::BadShape(depth, branching));
        }
        let n = Self::edge_count(depth, branching);
        let probs = prior.probabilities(n)?;
        let dist = WeightedIndex::new(&probs).map_err(|e| NeedleError::BadPrior(e.to_string()))?;
        let needle = dist.sample(rng);
        Ok(NeedleTree {
            depth,
            branching,
            needle,
            prior: probs,
        })
    }

    pub fn with_needle(
        depth: usize,
        branching: usize,
        needle: usize,
        prior: &NeedlePrior,
    ) -> Result<NeedleTree, NeedleError> {
        if depth < 1 || branching < 2 {
            return Err(NeedleError::BadShape(depth, branching));
        }
        let n = Self::edge_count(depth, branching);
        if needle >= n {
            return Err(NeedleError::BadPrior(format!("needle {needle} out of {n} edges")));
        }
        Ok(NeedleTree {
            depth,
            branching,
            needle,
            prior: prior.probabilities(n)?,
        })
    }

    /// `|Z| = A + A^2 + ... + A^H`.
    pub fn edge_count(depth: usize, branching: usize) -> usize {
        (1..=depth).map(|d| branching.pow(d as u32)).sum()
    }

    pub fn num_edges(&self) -> usize {
        Self::edge_count(self.depth, self.branching)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn needle(&self) -> usize {
        self.needle
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    fn level_offset(&self, depth: usize) -> usize {
        Self::edge_count(depth, self.branching)
    }

    pub fn edge_id(&self, state: NeedleState, action: usize) -> usize {
        self.level_offset(state.depth) + state.index * self.branching + action
    }

    pub fn edge(&self, id: usize) -> (NeedleState, usize) {
        let mut depth = 0;
        while self.level_offset(depth + 1) <= id {
            depth += 1;
        }
        let local = id - self.level_offset(depth);
        (
            NeedleState {
                depth,
                index: local / self.branching,
            },
            local % self.branching,
        )
    }

    /// Root action on the branch through edge `id`.
    pub fn root_action(&self, id: usize) -> usize {
        let (state, action) = self.edge(id);
        if state.depth == 0 {
            action
        } else {
            state.index / self.branching.pow(state.depth as u32 - 1)
        }
    }

    /// Whether edge `id` is `ancestor` itself or lies below it.
    pub fn in_subtree(&self, id: usize, ancestor: usize) -> bool {
        if id == ancestor {
            return true;
        }
        let (s, _) = self.edge(id);
        let (a_state, a_action) = self.edge(ancestor);
        if s.depth <= a_state.depth {
            return false;
        }
        let child = a_state.index * self.branching + a_action;
        let levels_below_child = s.depth - a_state.depth - 1;
        s.index / self.branching.pow(levels_below_child as u32) == child
    }

    /// Root action whose subtree holds the needle.
    pub fn optimal_root_action(&self) -> usize {
        self.root_action(self.needle)
    }
}

impl DecisionProcess for NeedleTree {
    type State = NeedleState;

    fn root(&self) -> NeedleState {
        NeedleState { depth: 0, index: 0 }
    }

    fn num_actions(&self) -> usize {
        self.branching
    }

    fn step(&self, state: &NeedleState, action: usize) -> (NeedleState, f64) {
        let reward = if self.edge_id(*state, action) == self.needle {
            1.0
        } else {
            0.0
        };
        (
            NeedleState {
                depth: state.depth + 1,
                index: state.index * self.branching + action,
            },
            reward,
        )
    }

    fn is_terminal(&self, state: &NeedleState) -> bool {
        state.depth >= self.depth
    }

    fn horizon(&self) -> usize {
        self.depth
    }

    fn r_max(&self) -> f64 {
        1.0
    }
}

impl GroundTruth for NeedleTree {
    fn ground_truth_q(&self, state: &NeedleState) -> Vec<f64> {
        (0..self.branching)
            .map(|a| {
                if self.in_subtree(self.needle, self.edge_id(*state, a)) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}
