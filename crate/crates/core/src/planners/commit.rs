use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;

use super::select::{argmax, softmax};
use super::{Commitment, SearchOutcome};
use crate::posterior::gaussian_quantile;

/// Chooses the action to execute after a search.
pub fn commit<S: Clone, R: Rng + ?Sized>(outcome: &SearchOutcome<S>, strategy: Commitment, rng: &mut R) -> usize {
    match strategy {
        Commitment::Mcts => outcome
            .recommendation
            .unwrap_or_else(|| argmax(outcome.root_backed_values.iter().copied())),
        Commitment::Quantile(alpha) => argmax(quantile_branch_values(outcome, alpha)),
        Commitment::Softmax(temp) => {
            let p = softmax(&outcome.root_backed_values, temp);
            match WeightedIndex::new(&p) {
                Ok(d) => d.sample(rng),
                Err(_) => argmax(outcome.root_backed_values.iter().copied()),
            }
        }
    }
}

/// Per root action, the best discovered branch scored by its rewards plus the
/// `alpha`-quantile of the frontier posterior it ends in.
pub fn quantile_branch_values<S: Clone>(outcome: &SearchOutcome<S>, alpha: f64) -> Vec<f64> {
    outcome.tree.root_branch_values(|e| {
        let (mean, var) = e.query.mean_var();
        gaussian_quantile(mean, var.sqrt(), alpha)
    })
}
