//! Empirical Bayesian regret of leaf-selection rules on needle trees, checked
//! against `H R_max sqrt(|Z| H(z*) T / 2)`.

use std::fmt;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;

use super::experiment::mean_stderr;
use super::HarnessError;
use crate::env::{DecisionProcess, NeedlePrior, NeedleState, NeedleTree};
use crate::oracles::prior_entropy;
use crate::seeding::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafSelector {
    /// Thompson sampling: draw the needle's location from its posterior and
    /// explore the frontier edge above it.
    Thompson,
    /// Prior-agnostic breadth-first order.
    FixedOrder,
    /// Prior-agnostic, uniformly random frontier edge.
    RandomOrder,
    /// Knows the needle and explores wrong root actions first. Only useful as
    /// a negative control.
    Adversarial,
}

impl fmt::Display for LeafSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeafSelector::Thompson => "thompson",
            LeafSelector::FixedOrder => "fixed_order",
            LeafSelector::RandomOrder => "random_order",
            LeafSelector::Adversarial => "adversarial",
        })
    }
}

impl std::str::FromStr for LeafSelector {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "thompson" | "tsts" => Ok(LeafSelector::Thompson),
            "fixed_order" => Ok(LeafSelector::FixedOrder),
            "random_order" => Ok(LeafSelector::RandomOrder),
            "adversarial" => Ok(LeafSelector::Adversarial),
            _ => Err(HarnessError::Spec(format!("unknown selector `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSpec {
    pub depth: usize,
    pub branching: usize,
    pub prior: NeedlePrior,
    pub selector: LeafSelector,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub budget: usize,
    pub mean_regret: f64,
    pub stderr: f64,
    pub bound: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub selector: LeafSelector,
    pub depth: usize,
    pub branching: usize,
    pub num_edges: usize,
    /// Prior entropy of the needle location, in nats.
    pub entropy: f64,
    pub repetitions: usize,
    pub rows: Vec<BoundRow>,
    pub pass: bool,
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "selector={} depth={} branching={} |Z|={} H(z*)={:.4} reps={}",
            self.selector, self.depth, self.branching, self.num_edges, self.entropy, self.repetitions
        )?;
        writeln!(f, "{:>5} {:>10} {:>9} {:>10}  ok", "T", "regret", "stderr", "bound")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>5} {:>10.4} {:>9.4} {:>10.4}  {}",
                r.budget,
                r.mean_regret,
                r.stderr,
                r.bound,
                if r.within { "yes" } else { "NO" }
            )?;
        }
        write!(f, "{}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// Samples `repetitions` needle trees from the prior, runs the selector for
/// `T = 1..=|Z|` iterations and compares the mean cumulative root regret at
/// every `T` with the bound.
pub fn bound_check(spec: &BoundSpec) -> Result<BoundReport, HarnessError> {
    let n = NeedleTree::edge_count(spec.depth, spec.branching);
    let probs = spec.prior.probabilities(n)?;
    let entropy = prior_entropy(&probs)?;
    let mut cumulative = vec![Vec::with_capacity(spec.repetitions); n];
    for rep in 0..spec.repetitions {
        let mut rng = rng_for(&[spec.seed, rep as u64]);
        let tree = NeedleTree::sample_with(&mut rng, spec.depth, spec.branching, &spec.prior)?;
        let trace = exploration_regret(&tree, spec.selector, n, &mut rng);
        let mut total = 0.0;
        for (t, r) in trace.into_iter().enumerate() {
            total += r;
            cumulative[t].push(total);
        }
    }
    let r_max = 1.0;
    let rows: Vec<BoundRow> = cumulative
        .iter()
        .enumerate()
        .map(|(t, xs)| {
            let budget = t + 1;
            let (mean, stderr) = mean_stderr(xs);
            let bound = spec.depth as f64 * r_max * (0.5 * n as f64 * entropy * budget as f64).sqrt();
            BoundRow {
                budget,
                mean_regret: mean,
                stderr,
                bound,
                within: mean <= bound + 1e-12,
            }
        })
        .collect();
    Ok(BoundReport {
        selector: spec.selector,
        depth: spec.depth,
        branching: spec.branching,
        num_edges: n,
        entropy,
        repetitions: spec.repetitions,
        pass: rows.iter().all(|r| r.within),
        rows,
    })
}

/// Instantaneous root regret of the first `budget` explorations of `tree`.
///
/// Exploring an edge reveals its reward and makes the edges below it
/// available. Regret is 1 whenever the explored edge hangs below a
/// suboptimal root action.
pub fn exploration_regret<R: Rng + ?Sized>(
    tree: &NeedleTree,
    selector: LeafSelector,
    budget: usize,
    rng: &mut R,
) -> Vec<f64> {
    let n = tree.num_edges();
    let best_root = tree.optimal_root_action();
    let root = tree.root();
    let mut frontier: Vec<usize> = (0..tree.num_actions()).map(|a| tree.edge_id(root, a)).collect();
    let mut revealed = vec![false; n];
    let mut found = false;
    let mut trace = Vec::with_capacity(budget);
    for _ in 0..budget.min(n) {
        let pos = match selector {
            LeafSelector::FixedOrder => Some(0),
            LeafSelector::RandomOrder => {
                let idx: Vec<usize> = (0..frontier.len()).collect();
                idx.choose(rng).copied()
            }
            LeafSelector::Adversarial => frontier
                .iter()
                .position(|&z| tree.root_action(z) != best_root)
                .or(Some(0)),
            LeafSelector::Thompson => thompson_pick(tree, &frontier, &revealed, found, rng),
        };
        let Some(pos) = pos else {
            // the chosen root action has no unexplored edges left: the
            // iteration revisits an exhausted branch below the best action
            trace.push(0.0);
            continue;
        };
        let z = frontier.remove(pos);
        revealed[z] = true;
        if z == tree.needle() {
            found = true;
        }
        let (state, action) = tree.edge(z);
        let child = NeedleState {
            depth: state.depth + 1,
            index: state.index * tree.branching() + action,
        };
        if child.depth < tree.depth() {
            frontier.extend((0..tree.branching()).map(|a| tree.edge_id(child, a)));
        }
        trace.push(if tree.root_action(z) == best_root { 0.0 } else { 1.0 });
    }
    trace
}

/// Position in `frontier` of the edge on the path to a posterior draw of the
/// needle's location. `None` when the drawn needle lies below a fully
/// explored part of the tree, so that the optimal branch is already complete.
fn thompson_pick<R: Rng + ?Sized>(
    tree: &NeedleTree,
    frontier: &[usize],
    revealed: &[bool],
    found: bool,
    rng: &mut R,
) -> Option<usize> {
    let sampled = if found {
        tree.needle()
    } else {
        // posterior: prior restricted to edges not yet seen to be empty
        let weights: Vec<f64> = tree
            .prior()
            .iter()
            .zip(revealed)
            .map(|(&p, &seen)| if seen { 0.0 } else { p })
            .collect();
        match WeightedIndex::new(&weights) {
            Ok(d) => d.sample(rng),
            // the prior put no mass on the remaining edges; nothing to learn
            Err(_) => return Some(0),
        }
    };
    if let Some(pos) = frontier.iter().position(|&z| tree.in_subtree(sampled, z)) {
        return Some(pos);
    }
    // the needle was found: every branch through it is optimal, so any
    // unexplored edge below the needle's root action will do
    let root_action = tree.root_action(sampled);
    frontier.iter().position(|&z| tree.root_action(z) == root_action)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(prior: NeedlePrior, selector: LeafSelector, reps: usize) -> BoundSpec {
        BoundSpec {
            depth: 3,
            branching: 2,
            prior,
            selector,
            repetitions: reps,
            seed: 1,
        }
    }

    #[test]
    fn exhaustive_search_of_binary_tree_costs_half() {
        for selector in [LeafSelector::FixedOrder, LeafSelector::RandomOrder] {
            let t = NeedleTree::sample(3, 4, 2, &NeedlePrior::Uniform).unwrap();
            let mut rng = rng_for(&[0]);
            let trace = exploration_regret(&t, selector, 30, &mut rng);
            assert_eq!(trace.len(), 30);
            assert_eq!(trace.iter().sum::<f64>(), 15.0, "{selector}");
        }
    }

    #[test]
    fn zero_entropy_prior() {
        let prior = NeedlePrior::Concentrated { edge: 9, mass: 1.0 };
        let r = bound_check(&spec(prior.clone(), LeafSelector::Thompson, 50)).unwrap();
        assert_eq!(r.entropy, 0.0);
        assert!(r.rows.iter().all(|row| row.mean_regret == 0.0 && row.bound == 0.0));
        assert!(r.pass);
        let adversary = bound_check(&spec(prior, LeafSelector::Adversarial, 50)).unwrap();
        assert!(!adversary.pass);
    }

    #[test]
    fn report_renders() {
        let r = bound_check(&spec(NeedlePrior::Uniform, LeafSelector::Thompson, 100)).unwrap();
        assert_eq!(r.rows.len(), 14);
        let text = r.to_string();
        assert!(text.ends_with("PASS"));
    }
}
