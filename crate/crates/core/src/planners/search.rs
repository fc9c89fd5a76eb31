use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::dng::{dng_backup, select_dng, DngNodeStat};
use super::select::{select_bayes_ucb, select_bayes_uct2, select_bts, select_puct, select_tsts};
use super::{Algorithm, PlanError, PlannerConfig};
use crate::env::DecisionProcess;
use crate::oracles::QueryProvider;
use crate::posterior::PosteriorDist;
use crate::tree::{Descent, EdgeKind, NodeId, SearchNode, SearchTree};

/// A frontier edge revealed by one search iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExploredLeaf<S> {
    pub state: S,
    pub action: usize,
    pub root_action: usize,
    /// Depth of `state`; the revealed child sits one level lower.
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub edges: usize,
    pub max_depth: usize,
    pub iterations: usize,
    /// Iterations that ended on a terminal or horizon edge.
    pub dead_ends: usize,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<S> {
    /// Backed-up value posterior per root action. Planners without
    /// distributional backup report point masses at their branch values.
    pub root_posteriors: Vec<PosteriorDist>,
    /// Expected return of the best discovered branch per root action.
    pub root_backed_values: Vec<f64>,
    pub explored_leaves: Vec<ExploredLeaf<S>>,
    pub stats: TreeStats,
    pub regret_trace: Option<Vec<f64>>,
    /// Root action singled out by the search itself (sequential halving).
    pub recommendation: Option<usize>,
    pub tree: SearchTree<S>,
}

impl<S> SearchOutcome<S> {
    /// Root actions of the explored leaves, in exploration order.
    pub fn explored_root_actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.explored_leaves.iter().map(|l| l.root_action)
    }
}

/// Runs `cfg.budget` iterations of descend / expand / backup from `root`.
///
/// In deterministic mode `rng` is ignored and a generator seeded with
/// `cfg.seed` is used instead, so every call with the same root state makes
/// the same decisions.
pub fn run_search<E, P, R>(
    env: &E,
    root: E::State,
    oracle: &P,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<SearchOutcome<E::State>, PlanError>
where
    E: DecisionProcess,
    P: QueryProvider<E> + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if cfg.deterministic_mode {
        let mut local = ChaCha8Rng::seed_from_u64(cfg.seed);
        dispatch(env, root, oracle, cfg, &mut local)
    } else {
        dispatch(env, root, oracle, cfg, rng)
    }
}

fn dispatch<E, P, R>(
    env: &E,
    root: E::State,
    oracle: &P,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<SearchOutcome<E::State>, PlanError>
where
    E: DecisionProcess,
    P: QueryProvider<E> + ?Sized,
    R: Rng + ?Sized,
{
    if cfg.algorithm == Algorithm::ShPuct {
        return sequential_halving(env, root, oracle, cfg, rng);
    }
    let mut search = Search::new(env, root, oracle, cfg)?;
    for _ in 0..cfg.budget {
        search.iterate(None, rng)?;
    }
    Ok(search.finish(None))
}

/// Sequential halving over the root actions with P-UCT below the root.
///
/// `ceil(log2 |A|)` phases share the budget equally (the remainder goes to the
/// last phase); within a phase every surviving action gets the same number of
/// iterations and any leftover is unused. After each phase the better half of
/// the survivors, ranked by backed-up value, moves on.
pub fn run_search_sh<E, P, R>(
    env: &E,
    root: E::State,
    oracle: &P,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<SearchOutcome<E::State>, PlanError>
where
    E: DecisionProcess,
    P: QueryProvider<E> + ?Sized,
    R: Rng + ?Sized,
{
    let cfg = PlannerConfig {
        algorithm: Algorithm::ShPuct,
        ..cfg.clone()
    };
    run_search(env, root, oracle, &cfg, rng)
}

/// Per-phase iteration counts of sequential halving: `(survivors, per_arm)`.
pub fn halving_schedule(num_actions: usize, budget: usize) -> Result<Vec<(usize, usize)>, PlanError> {
    if budget < num_actions {
        return Err(PlanError::InvalidConfig(format!(
            "sequential halving needs a budget of at least {num_actions}, got {budget}"
        )));
    }
    let phases = (num_actions as f64).log2().ceil() as usize;
    let per_phase = budget / phases;
    let mut survivors = num_actions;
    let mut schedule = Vec::with_capacity(phases);
    for p in 0..phases {
        let phase_budget = if p + 1 == phases {
            budget - per_phase * (phases - 1)
        } else {
            per_phase
        };
        schedule.push((survivors, phase_budget / survivors));
        survivors = survivors.div_ceil(2);
    }
    Ok(schedule)
}

fn sequential_halving<E, P, R>(
    env: &E,
    root: E::State,
    oracle: &P,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<SearchOutcome<E::State>, PlanError>
where
    E: DecisionProcess,
    P: QueryProvider<E> + ?Sized,
    R: Rng + ?Sized,
{
    let n = env.num_actions();
    let mut search = Search::new(env, root, oracle, cfg)?;
    if n == 1 {
        for _ in 0..cfg.budget {
            search.iterate(None, rng)?;
        }
        return Ok(search.finish(Some(0)));
    }
    let schedule = halving_schedule(n, cfg.budget)?;
    let mut alive: Vec<usize> = (0..n).collect();
    for (survivors, per_arm) in schedule {
        debug_assert_eq!(survivors, alive.len());
        for &a in &alive {
            for _ in 0..per_arm {
                search.iterate(Some(a), rng)?;
            }
        }
        let values = &search.tree.root().edges;
        // stable sort keeps lower indices first among equal values
        alive.sort_by(|&x, &y| values[y].value.total_cmp(&values[x].value));
        alive.truncate(alive.len().div_ceil(2));
        alive.sort_unstable();
    }
    let best = alive[0];
    Ok(search.finish(Some(best)))
}

struct Search<'a, E: DecisionProcess, P: ?Sized> {
    env: &'a E,
    oracle: &'a P,
    cfg: &'a PlannerConfig,
    tree: SearchTree<E::State>,
    explored: Vec<ExploredLeaf<E::State>>,
    dead_ends: usize,
}

impl<'a, E, P> Search<'a, E, P>
where
    E: DecisionProcess,
    P: QueryProvider<E> + ?Sized,
{
    fn new(env: &'a E, root: E::State, oracle: &'a P, cfg: &'a PlannerConfig) -> Result<Self, PlanError> {
        let tree = SearchTree::new(env, root, oracle, cfg.bins, cfg.algorithm.is_distributional())?;
        Ok(Search {
            env,
            oracle,
            cfg,
            tree,
            explored: Vec::new(),
            dead_ends: 0,
        })
    }

    fn iterate<R: Rng + ?Sized>(&mut self, root_action: Option<usize>, rng: &mut R) -> Result<(), PlanError> {
        let cfg = self.cfg;
        let select = |node: &SearchNode<E::State>, rng: &mut R| select_action(cfg, node, rng);
        let descent = match root_action {
            Some(a) => self.tree.descend_from_root_action(a, rng, select),
            None => self.tree.descend(rng, select),
        };
        match descent {
            Descent::Frontier {
                node,
                action,
                root_action,
            } => {
                let parent = self.tree.node(node);
                self.explored.push(ExploredLeaf {
                    state: parent.state.clone(),
                    action,
                    root_action,
                    depth: parent.depth,
                });
                let child = self.tree.expand(node, action, self.env, self.oracle)?;
                self.tree.backup_path(child)?;
                if cfg.algorithm == Algorithm::Dng {
                    let leaf_value = self.tree.node(child).edges.iter().map(|e| e.query.mean()).fold(f64::NEG_INFINITY, f64::max);
                    let reward = self.tree.node(node).edges[action].reward;
                    self.dng_backup_path(node, action, reward + leaf_value);
                }
            }
            Descent::Dead { node, action, .. } => {
                self.dead_ends += 1;
                if cfg.algorithm == Algorithm::Dng {
                    let edge = &self.tree.node(node).edges[action];
                    let ret = match edge.kind {
                        EdgeKind::Terminal => edge.reward,
                        _ => edge.query.mean(),
                    };
                    self.dng_backup_path(node, action, ret);
                }
            }
        }
        self.tree.iteration += 1;
        Ok(())
    }

    /// Feeds the return `ret` of edge `(node, action)` to every edge on the
    /// path back to the root, adding rewards on the way up.
    fn dng_backup_path(&mut self, node: NodeId, action: usize, mut ret: f64) {
        let cfg = self.cfg;
        let mut edge = Some((node, action));
        while let Some((n, a)) = edge {
            let e = &mut self.tree.node_mut(n).edges[a];
            let stat = if e.dng.updates == 0 {
                DngNodeStat::prior(cfg.dng_lambda, cfg.dng_beta)
            } else {
                e.dng
            };
            e.dng = dng_backup(stat, ret);
            edge = self.tree.node(n).parent;
            if let Some((p, pa)) = edge {
                ret += self.tree.node(p).edges[pa].reward;
            }
        }
    }

    fn finish(self, recommendation: Option<usize>) -> SearchOutcome<E::State> {
        let tree = self.tree;
        let root = tree.root();
        let root_backed_values: Vec<f64> = root.edges.iter().map(|e| e.value).collect();
        let root_posteriors = if tree.is_distributional() {
            root.edges.iter().map(|e| e.posterior().clone()).collect()
        } else {
            root_backed_values.iter().map(|&v| PosteriorDist::point_mass(v)).collect()
        };
        let stats = TreeStats {
            nodes: tree.len(),
            edges: tree.nodes().iter().map(|n| n.edges.len()).sum(),
            max_depth: tree.max_depth(),
            iterations: tree.iteration,
            dead_ends: self.dead_ends,
        };
        SearchOutcome {
            root_posteriors,
            root_backed_values,
            explored_leaves: self.explored,
            stats,
            regret_trace: None,
            recommendation,
            tree,
        }
    }
}

/// The in-tree rule of `cfg.algorithm` at one node.
pub fn select_action<S, R: Rng + ?Sized>(cfg: &PlannerConfig, node: &SearchNode<S>, rng: &mut R) -> usize {
    match cfg.algorithm {
        Algorithm::Tsts => select_tsts(node, cfg.approximation, rng),
        Algorithm::Bts => select_bts(node, cfg.alpha0, cfg.beta(), cfg.approximation),
        Algorithm::BayesUcb => select_bayes_ucb(node, cfg.beta(), cfg.approximation),
        Algorithm::BayesUct2 => select_bayes_uct2(node),
        Algorithm::Puct | Algorithm::ShPuct => select_puct(node, cfg.puct_c, cfg.softmax_temp),
        Algorithm::Dng => select_dng(node, rng),
    }
}
