use serde::Serialize;

use super::regret::attach_regret;
use crate::env::GroundTruth;
use crate::oracles::QueryProvider;
use crate::planners::{argmax, commit, run_search, PlanError, PlannerConfig};
use crate::seeding::rng_for;

/// Default cap on environment steps per episode.
pub const DEFAULT_STEP_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub action: usize,
    pub root_values: Vec<f64>,
    pub explored: usize,
    pub nodes: usize,
    pub max_depth: usize,
    pub mean_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    /// Reached a terminal state within the step cap.
    pub solved: bool,
    pub steps_taken: usize,
    pub total_reward: f64,
    pub committed_actions: Vec<usize>,
    pub step_stats: Vec<StepSummary>,
    /// Mean instantaneous root regret over every explored leaf of the episode.
    pub mean_regret: f64,
    pub seed: u64,
}

/// Plans from the current state, commits, steps the environment, and repeats
/// until a terminal state or `step_cap` steps.
///
/// Step `t` searches with a generator derived from `(seed, t)`; in
/// deterministic mode every search is re-seeded with `cfg.seed` instead.
pub fn online_episode<E, P>(
    env: &E,
    oracle: &P,
    cfg: &PlannerConfig,
    step_cap: usize,
    seed: u64,
) -> Result<EpisodeResult, PlanError>
where
    E: GroundTruth,
    P: QueryProvider<E> + ?Sized,
{
    cfg.validate()?;
    let mut state = env.root();
    let mut result = EpisodeResult {
        solved: env.is_terminal(&state),
        steps_taken: 0,
        total_reward: 0.0,
        committed_actions: Vec::new(),
        step_stats: Vec::new(),
        mean_regret: 0.0,
        seed,
    };
    let mut regret_sum = 0.0;
    let mut regret_count = 0usize;
    while !result.solved && result.steps_taken < step_cap {
        let mut rng = rng_for(&[seed, result.steps_taken as u64]);
        let mut outcome = run_search(env, state.clone(), oracle, cfg, &mut rng)?;
        attach_regret(env, &mut outcome);
        let action = commit(&outcome, cfg.commitment, &mut rng);
        let trace = outcome.regret_trace.as_deref().unwrap_or_default();
        regret_sum += trace.iter().sum::<f64>();
        regret_count += trace.len();
        result.step_stats.push(StepSummary {
            action,
            root_values: outcome.root_backed_values.clone(),
            explored: outcome.explored_leaves.len(),
            nodes: outcome.stats.nodes,
            max_depth: outcome.stats.max_depth,
            mean_regret: mean(trace),
        });
        let (next, reward) = env.step(&state, action);
        state = next;
        result.total_reward += reward;
        result.committed_actions.push(action);
        result.steps_taken += 1;
        result.solved = env.is_terminal(&state);
    }
    if regret_count > 0 {
        result.mean_regret = regret_sum / regret_count as f64;
    }
    Ok(result)
}

/// Baseline without search: always takes the action with the highest oracle
/// mean.
pub fn greedy_episode<E, P>(env: &E, oracle: &P, step_cap: usize) -> Result<EpisodeResult, PlanError>
where
    E: GroundTruth,
    P: QueryProvider<E> + ?Sized,
{
    let mut state = env.root();
    let mut result = EpisodeResult {
        solved: env.is_terminal(&state),
        steps_taken: 0,
        total_reward: 0.0,
        committed_actions: Vec::new(),
        step_stats: Vec::new(),
        mean_regret: 0.0,
        seed: 0,
    };
    while !result.solved && result.steps_taken < step_cap {
        let means: Vec<f64> = oracle.query(env, &state)?.iter().map(|d| d.mean()).collect();
        let action = argmax(means);
        let (next, reward) = env.step(&state, action);
        state = next;
        result.total_reward += reward;
        result.committed_actions.push(action);
        result.steps_taken += 1;
        result.solved = env.is_terminal(&state);
    }
    Ok(result)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Maze;
    use crate::oracles::{CorruptedPredictor, GtSigmaQuery};
    use crate::planners::Algorithm;

    fn oracle(scale: f64) -> GtSigmaQuery {
        GtSigmaQuery {
            predictor: CorruptedPredictor::new(scale, 11).unwrap(),
        }
    }

    #[test]
    fn trivial_maze_is_solved_by_every_planner() {
        let maze = Maze::generate(5, 3, 3).unwrap();
        for algorithm in Algorithm::ALL {
            let cfg = PlannerConfig::new(algorithm, 16);
            let r = online_episode(&maze, &oracle(0.1), &cfg, DEFAULT_STEP_CAP, 1).unwrap();
            assert!(r.solved, "{algorithm} failed on 3x3");
            assert!(r.steps_taken <= DEFAULT_STEP_CAP);
        }
    }

    #[test]
    fn episodes_are_reproducible() {
        let maze = Maze::generate(21, 9, 9).unwrap();
        let cfg = PlannerConfig::new(Algorithm::Tsts, 20);
        let a = online_episode(&maze, &oracle(0.3), &cfg, 60, 99).unwrap();
        let b = online_episode(&maze, &oracle(0.3), &cfg, 60, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unsolved_episode_runs_to_the_cap() {
        // the start is boxed in: every action bumps
        let maze = Maze::from_text("S#.\n##.\n..G\n").unwrap();
        let cfg = PlannerConfig {
            deterministic_mode: true,
            ..PlannerConfig::new(Algorithm::Bts, 8)
        };
        let r = online_episode(&maze, &oracle(0.0), &cfg, 17, 0).unwrap();
        assert!(!r.solved);
        assert_eq!(r.steps_taken, 17);
    }

    #[test]
    fn exact_oracle_greedy_walks_the_shortest_path() {
        let maze = Maze::generate(8, 11, 11).unwrap();
        let r = greedy_episode(&maze, &oracle(0.0), DEFAULT_STEP_CAP).unwrap();
        assert!(r.solved);
        assert_eq!(r.steps_taken as u32, maze.distance_to_goal(maze.start()).unwrap());
    }
}
