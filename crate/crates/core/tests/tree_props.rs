mod common;

use bayes_plan::env::{DecisionProcess, GroundTruth};
use bayes_plan::planners::{commit, run_search, Algorithm, PlannerConfig};
use bayes_plan::posterior::{max_of_independent, PosteriorDist};
use bayes_plan::seeding::rng_for;
use bayes_plan::tree::{NodeId, SearchTree};
use common::{ExactOracle, NoisyOracle, RandomTree};
use proptest::prelude::*;
use rand::Rng;

const BINS: usize = 50;

type Tree = SearchTree<(usize, usize)>;

fn new_tree(env: &RandomTree, oracle: &NoisyOracle) -> Tree {
    SearchTree::new(env, env.root(), oracle, BINS, true).unwrap()
}

/// Frontier edges, in arena order.
fn frontier(tree: &Tree) -> Vec<(NodeId, usize)> {
    tree.nodes()
        .iter()
        .enumerate()
        .flat_map(|(i, n)| n.edges.iter().filter(|e| e.is_frontier()).map(move |e| (NodeId(i), e.action)))
        .collect()
}

/// Expands a random frontier edge `count` times, backing up after each.
fn grow(tree: &mut Tree, env: &RandomTree, oracle: &NoisyOracle, count: usize, seed: u64) -> usize {
    let mut rng = rng_for(&[seed]);
    let mut expanded = 0;
    for _ in 0..count {
        let f = frontier(tree);
        if f.is_empty() {
            break;
        }
        let (node, action) = f[rng.random_range(0..f.len())];
        let child = tree.expand(node, action, env, oracle).unwrap();
        tree.backup_path(child).unwrap();
        expanded += 1;
    }
    expanded
}

/// Batch recomputation of an edge posterior straight from the leaves.
fn fold(tree: &Tree, node: NodeId, action: usize) -> PosteriorDist {
    let edge = &tree.node(node).edges[action];
    match edge.child {
        None => edge.query.clone(),
        Some(child) => {
            let tables: Vec<PosteriorDist> = (0..tree.node(child).edges.len())
                .map(|a| fold(tree, child, a).discretize(BINS).unwrap())
                .collect();
            max_of_independent(&tables, BINS).unwrap().shift(edge.reward)
        }
    }
}

fn state_posteriors(tree: &Tree) -> Vec<((usize, usize), Vec<PosteriorDist>)> {
    let mut out: Vec<_> = tree
        .nodes()
        .iter()
        .map(|n| (n.state, n.edges.iter().map(|e| e.posterior().clone()).collect()))
        .collect();
    out.sort_by_key(|(s, _)| *s);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn incremental_backup_matches_batch_fold(
        depth in 2usize..5, branching in 2usize..4, seed in any::<u64>(), steps in 1usize..40,
    ) {
        let env = RandomTree { depth, branching, seed };
        let oracle = NoisyOracle { seed: seed ^ 1, max_std: 2.0 };
        let mut tree = new_tree(&env, &oracle);
        let expanded = grow(&mut tree, &env, &oracle, steps, seed);
        prop_assert_eq!(tree.len(), expanded + 1);
        for (i, n) in tree.nodes().iter().enumerate() {
            for e in &n.edges {
                let batch = fold(&tree, NodeId(i), e.action);
                prop_assert_eq!(e.posterior(), &batch);
            }
        }
    }

    #[test]
    fn expansion_order_does_not_matter(
        depth in 2usize..4, branching in 2usize..4, seed in any::<u64>(), steps in 1usize..20, other in any::<u64>(),
    ) {
        let env = RandomTree { depth, branching, seed };
        let oracle = NoisyOracle { seed, max_std: 1.0 };
        let mut a = new_tree(&env, &oracle);
        grow(&mut a, &env, &oracle, steps, seed);
        // replay the same set of states in a different (random, parent-first) order
        let mut wanted: Vec<(usize, usize)> = a.nodes().iter().skip(1).map(|n| n.state).collect();
        let mut b = new_tree(&env, &oracle);
        let mut rng = rng_for(&[other]);
        while !wanted.is_empty() {
            let f: Vec<_> = frontier(&b)
                .into_iter()
                .filter(|&(n, act)| wanted.contains(&env.step(&b.node(n).state, act).0))
                .collect();
            let (n, act) = f[rng.random_range(0..f.len())];
            let child = b.expand(n, act, &env, &oracle).unwrap();
            b.backup_path(child).unwrap();
            let s = b.node(child).state;
            wanted.retain(|w| *w != s);
        }
        prop_assert_eq!(state_posteriors(&a), state_posteriors(&b));
    }

    #[test]
    fn visit_counts_are_consistent(
        seed in any::<u64>(), budget in 1usize..60, alg in prop::sample::select(Algorithm::ALL.to_vec()),
    ) {
        let env = RandomTree { depth: 4, branching: 3, seed };
        let oracle = NoisyOracle { seed, max_std: 1.5 };
        let cfg = PlannerConfig::new(alg, budget.max(3));
        let out = run_search(&env, env.root(), &oracle, &cfg, &mut rng_for(&[seed])).unwrap();
        let tree = &out.tree;
        prop_assert_eq!(tree.len(), out.explored_leaves.len() + 1);
        prop_assert_eq!(out.stats.iterations, out.explored_leaves.len() + out.stats.dead_ends);
        let mut per_depth = vec![0u64; env.depth + 1];
        for n in tree.nodes() {
            per_depth[n.depth] += n.visit_count as u64;
            let below: u32 = n.edges.iter().map(|e| e.visit_count).sum();
            prop_assert_eq!(n.visit_count, below);
            for e in &n.edges {
                if let Some(c) = e.child {
                    // the visit that expanded the edge never reached the child
                    prop_assert_eq!(tree.node(c).visit_count + 1, e.visit_count);
                }
            }
        }
        prop_assert!(per_depth.windows(2).all(|w| w[0] >= w[1]), "{per_depth:?}");
        if alg != Algorithm::ShPuct {
            prop_assert_eq!(tree.root().visit_count as usize, budget.max(3));
        }
    }
}

#[test]
fn fully_expanded_tree_recovers_ground_truth() {
    for seed in 0..20 {
        let env = RandomTree { depth: 3, branching: 3, seed };
        let oracle = NoisyOracle { seed, max_std: 3.0 };
        let mut tree = new_tree(&env, &oracle);
        grow(&mut tree, &env, &oracle, usize::MAX, seed);
        assert_eq!(tree.len(), 1 + 3 + 9);
        let gt = env.ground_truth_q(&env.root());
        for (e, q) in tree.root().edges.iter().zip(&gt) {
            assert!((e.value - q).abs() < 1e-12, "{} vs {q}", e.value);
            let (m, v) = e.posterior().mean_var();
            assert!((m - q).abs() < 1e-6 && v < 1e-12, "posterior {m} ± {v} vs {q}");
        }
    }
}

#[test]
fn exact_oracle_commits_optimally_for_every_planner() {
    for seed in 0..10 {
        let env = RandomTree { depth: 4, branching: 3, seed: 100 + seed };
        let gt = env.ground_truth_q(&env.root());
        let best = gt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for alg in Algorithm::ALL {
            let cfg = PlannerConfig::new(alg, 12);
            let mut rng = rng_for(&[seed]);
            let out = run_search(&env, env.root(), &ExactOracle, &cfg, &mut rng).unwrap();
            let a = commit(&out, cfg.commitment, &mut rng);
            assert_eq!(gt[a], best, "{alg} seed {seed}");
        }
    }
}
