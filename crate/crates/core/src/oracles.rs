//! Value-posterior providers and brute-force reference oracles.
//!
//! A [`QueryProvider`] stands in for a learned value network: for a state it
//! returns one value posterior per action. The maze providers are built from a
//! [`CorruptedPredictor`], a ground-truth value function with seeded,
//! state-action-deterministic Gaussian errors.

use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{DecisionProcess, GroundTruth, LeafTree};
use crate::posterior::{PosteriorDist, PosteriorError};
use crate::seeding::stable_hash;

/// Enumeration limit for the brute-force Thompson oracle.
pub const MAX_ENUMERATED_LEAVES: usize = 10_000;

/// Minimum error standard deviation of a [`CorruptedPredictor`].
pub const ERROR_FLOOR: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("tree has more than {0} leaves; refusing to enumerate")]
    TooLarge(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
}

/// Per-action value posteriors for a state.
///
/// Implementations must be deterministic: querying the same state twice
/// returns bit-identical posteriors.
pub trait QueryProvider<E: DecisionProcess> {
    fn query(&self, env: &E, state: &E::State) -> Result<Vec<PosteriorDist>, OracleError>;
}

impl<E: DecisionProcess, P: QueryProvider<E> + ?Sized> QueryProvider<E> for &P {
    fn query(&self, env: &E, state: &E::State) -> Result<Vec<PosteriorDist>, OracleError> {
        (**self).query(env, state)
    }
}

impl<E: DecisionProcess, P: QueryProvider<E> + ?Sized> QueryProvider<E> for Box<P> {
    fn query(&self, env: &E, state: &E::State) -> Result<Vec<PosteriorDist>, OracleError> {
        (**self).query(env, state)
    }
}

/// Ground truth plus Gaussian error with standard deviation
/// `error_scale * |Q_GT| + 0.1`, drawn once per (seed, state, action).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptedPredictor {
    pub error_scale: f64,
    pub seed: u64,
}

impl CorruptedPredictor {
    pub fn new(error_scale: f64, seed: u64) -> Result<Self, OracleError> {
        if !(error_scale >= 0.0) {
            return Err(OracleError::InvalidArgument(format!(
                "error_scale must be >= 0, got {error_scale}"
            )));
        }
        Ok(CorruptedPredictor { error_scale, seed })
    }

    /// Returns `(prediction, ground truth)` per action.
    pub fn predict<E>(&self, env: &E, state: &E::State) -> Vec<(f64, f64)>
    where
        E: GroundTruth,
    {
        env.ground_truth_q(state)
            .into_iter()
            .enumerate()
            .map(|(a, gt)| {
                if self.error_scale == 0.0 {
                    return (gt, gt);
                }
                let sd = self.error_scale * gt.abs() + ERROR_FLOOR;
                let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(self.seed, &(state, a)));
                let z: f64 = rng.sample(StandardNormal);
                (gt + sd * z, gt)
            })
            .collect()
    }
}

/// Gaussian(μ, |μ − Q_GT|): the predictor's mean with its exact absolute error
/// as the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtSigmaQuery {
    pub predictor: CorruptedPredictor,
}

impl<E: GroundTruth> QueryProvider<E> for GtSigmaQuery {
    fn query(&self, env: &E, state: &E::State) -> Result<Vec<PosteriorDist>, OracleError> {
        self.predictor
            .predict(env, state)
            .into_iter()
            .map(|(mu, gt)| Ok(PosteriorDist::gaussian(mu, (mu - gt).abs())?))
            .collect()
    }
}

/// Gaussian(μ, σ₀) for every pair, carrying no information about where the
/// predictor is wrong.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedSigmaQuery {
    pub predictor: CorruptedPredictor,
    pub sigma: f64,
}

impl FixedSigmaQuery {
    pub fn new(predictor: CorruptedPredictor, sigma: f64) -> Result<Self, OracleError> {
        if !(sigma >= 0.0) {
            return Err(OracleError::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(FixedSigmaQuery { predictor, sigma })
    }
}

impl<E: GroundTruth> QueryProvider<E> for FixedSigmaQuery {
    fn query(&self, env: &E, state: &E::State) -> Result<Vec<PosteriorDist>, OracleError> {
        self.predictor
            .predict(env, state)
            .into_iter()
            .map(|(mu, _)| Ok(PosteriorDist::gaussian(mu, self.sigma)?))
            .collect()
    }
}

/// Multiplies each Gaussian standard deviation of the wrapped provider by
/// `1 + U`, `U ~ Uniform(-ρ/100, ρ/100)`, drawn once per (seed, state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedSigma<P> {
    inner: P,
    rho_percent: f64,
    seed: u64,
}

impl<P> PerturbedSigma<P> {
    pub fn new(inner: P, rho_percent: f64, seed: u64) -> Result<Self, OracleError> {
        if !(0.0..=100.0).contains(&rho_percent) {
            return Err(OracleError::InvalidArgument(format!(
                "rho must lie in [0, 100], got {rho_percent}"
            )));
        }
        Ok(PerturbedSigma {
            inner,
            rho_percent,
            seed,
        })
    }

    pub fn factor<S: Hash>(&self, state: &S, action: usize) -> f64 {
        if self.rho_percent == 0.0 {
            return 1.0;
        }
        let half_width = 0.01 * self.rho_percent;
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(self.seed, &(state, action)));
        // open interval (-w, w)
        let u: f64 = loop {
            let u: f64 = rng.random_range(-half_width..half_width);
            if u > -half_width {
                break u;
            }
        };
        1.0 + u
    }
}

impl<E: DecisionProcess, P: QueryProvider<E>> QueryProvider<E> for PerturbedSigma<P> {
    fn query(&self, env: &E, state: &E::State) -> Result<Vec<PosteriorDist>, OracleError> {
        let base = self.inner.query(env, state)?;
        Ok(base
            .into_iter()
            .enumerate()
            .map(|(a, d)| match d {
                PosteriorDist::Gaussian { mean, std } => PosteriorDist::Gaussian {
                    mean,
                    std: std * self.factor(state, a),
                },
                other => other,
            })
            .collect())
    }
}

/// Leaf priors of a [`LeafTree`]. Edges above the bottom level get a
/// Gaussian with the best leaf mean and widest leaf spread below them.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeafPriorOracle;

impl QueryProvider<LeafTree> for LeafPriorOracle {
    fn query(
        &self,
        env: &LeafTree,
        state: &<LeafTree as DecisionProcess>::State,
    ) -> Result<Vec<PosteriorDist>, OracleError> {
        (0..env.branching())
            .map(|a| {
                let (mean, std) = match env.leaf_index(state, a) {
                    Some(i) => env.leaf_priors()[i],
                    None => env.leaf_priors()[env.leaves_below(state, a)]
                        .iter()
                        .fold((f64::NEG_INFINITY, 0.0_f64), |(m, s), &(lm, ls)| {
                            (m.max(lm), s.max(ls))
                        }),
                };
                Ok(PosteriorDist::gaussian(mean, std)?)
            })
            .collect()
    }
}

/// Probability that the branch ending in `path` is optimal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafProbability {
    /// Actions from the root to the leaf edge, inclusive.
    pub path: Vec<usize>,
    pub probability: f64,
}

enum Enumerated {
    Leaf { slot: usize },
    Inner { reward: f64, children: Vec<Enumerated> },
}

struct LeafSlot {
    path: Vec<usize>,
    dist: PosteriorDist,
}

fn enumerate<E, P>(
    env: &E,
    provider: &P,
    state: &E::State,
    depth: usize,
    path: &mut Vec<usize>,
    slots: &mut Vec<LeafSlot>,
) -> Result<Vec<Enumerated>, OracleError>
where
    E: DecisionProcess,
    P: QueryProvider<E>,
{
    let query = provider.query(env, state)?;
    let mut out = Vec::with_capacity(env.num_actions());
    for (a, q) in query.into_iter().enumerate().take(env.num_actions()) {
        let (next, reward) = env.step(state, a);
        path.push(a);
        if env.is_terminal(&next) || depth + 1 >= env.horizon() {
            if slots.len() >= MAX_ENUMERATED_LEAVES {
                return Err(OracleError::TooLarge(MAX_ENUMERATED_LEAVES));
            }
            let dist = if env.is_terminal(&next) {
                PosteriorDist::point_mass(reward)
            } else {
                q
            };
            out.push(Enumerated::Leaf { slot: slots.len() });
            slots.push(LeafSlot {
                path: path.clone(),
                dist,
            });
        } else {
            let children = enumerate(env, provider, &next, depth + 1, path, slots)?;
            out.push(Enumerated::Inner { reward, children });
        }
        path.pop();
    }
    Ok(out)
}

/// Backward induction over sampled leaf values; ties go to the lowest action.
fn solve(edges: &[Enumerated], draws: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for e in edges {
        let candidate = match e {
            Enumerated::Leaf { slot } => (draws[*slot], *slot),
            Enumerated::Inner { reward, children } => {
                let (v, leaf) = solve(children, draws);
                (reward + v, leaf)
            }
        };
        if candidate.0 > best.0 {
            best = candidate;
        }
    }
    best
}

/// Monte-Carlo estimate of the Thompson-sampling leaf distribution
/// `P(z* = z)`: sample every leaf value of the full tree below `root`, solve
/// the sampled tree exactly and count which leaf ends the optimal branch.
///
/// Leaves are edges into terminal states (valued at their reward) or edges
/// reaching the horizon (valued by the provider).
pub fn brute_force_ts_distribution<E, P, R>(
    env: &E,
    root: &E::State,
    provider: &P,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<LeafProbability>, OracleError>
where
    E: DecisionProcess,
    P: QueryProvider<E>,
    R: Rng + ?Sized,
{
    if n_samples == 0 {
        return Err(OracleError::InvalidArgument("n_samples must be positive".into()));
    }
    let mut slots = Vec::new();
    let tree = enumerate(env, provider, root, 0, &mut Vec::new(), &mut slots)?;
    let mut counts = vec![0u64; slots.len()];
    let mut draws = vec![0.0; slots.len()];
    for _ in 0..n_samples {
        for (d, slot) in draws.iter_mut().zip(&slots) {
            *d = slot.dist.sample(rng);
        }
        let (_, leaf) = solve(&tree, &draws);
        counts[leaf] += 1;
    }
    Ok(slots
        .into_iter()
        .zip(counts)
        .map(|(slot, c)| LeafProbability {
            path: slot.path,
            probability: c as f64 / n_samples as f64,
        })
        .collect())
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn prior_entropy(probs: &[f64]) -> Result<f64, OracleError> {
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) || (total - 1.0).abs() > 1e-9 {
        return Err(OracleError::InvalidArgument(format!(
            "probabilities must be nonnegative and sum to 1 (sum = {total})"
        )));
    }
    Ok(probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Cell, Maze};

    fn corridor() -> Maze {
        Maze::from_text("S....\n####.\nG....\n").unwrap()
    }

    #[test]
    fn zero_error_gives_point_masses() {
        let maze = corridor();
        let q = GtSigmaQuery {
            predictor: CorruptedPredictor::new(0.0, 1).unwrap(),
        };
        let post = q.query(&maze, &Cell::new(1, 2)).unwrap();
        assert_eq!(post[2], PosteriorDist::point_mass(-1.0));
        assert!(post.iter().all(PosteriorDist::is_point_mass));
    }

    #[test]
    fn gt_sigma_is_absolute_error() {
        let maze = Maze::generate(3, 11, 11).unwrap();
        let pred = CorruptedPredictor::new(0.3, 8).unwrap();
        let q = GtSigmaQuery { predictor: pred };
        for cell in maze.floor_cells() {
            if maze.is_terminal(&cell) {
                continue;
            }
            let preds = pred.predict(&maze, &cell);
            let post = q.query(&maze, &cell).unwrap();
            for ((mu, gt), d) in preds.iter().zip(&post) {
                let PosteriorDist::Gaussian { mean, std } = d else { panic!() };
                assert_eq!(mean, mu);
                assert_eq!(*std, (mu - gt).abs());
                // truth sits exactly one sigma from the mean
                assert!(((mean - gt).abs() - std).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn paper_table_row_sigma() {
        // a prediction of -1.278 against a true value of -1.0
        let d = PosteriorDist::gaussian(-1.278, (-1.278f64 - -1.0).abs()).unwrap();
        let PosteriorDist::Gaussian { std, .. } = d else { panic!() };
        assert!((std - 0.278).abs() < 1e-12);
    }

    #[test]
    fn queries_are_deterministic() {
        let maze = Maze::generate(4, 9, 9).unwrap();
        let pred = CorruptedPredictor::new(0.5, 2).unwrap();
        let noisy = PerturbedSigma::new(GtSigmaQuery { predictor: pred }, 50.0, 7).unwrap();
        let s = maze.start();
        assert_eq!(noisy.query(&maze, &s).unwrap(), noisy.query(&maze, &s).unwrap());
    }

    #[test]
    fn perturbation_bounds() {
        let maze = Maze::generate(4, 9, 9).unwrap();
        let pred = CorruptedPredictor::new(0.5, 2).unwrap();
        let base = GtSigmaQuery { predictor: pred };
        let same = PerturbedSigma::new(base, 0.0, 1).unwrap();
        assert_eq!(
            same.query(&maze, &maze.start()).unwrap(),
            base.query(&maze, &maze.start()).unwrap()
        );
        let wide = PerturbedSigma::new(base, 100.0, 1).unwrap();
        for cell in maze.floor_cells() {
            for a in 0..4 {
                let f = wide.factor(&cell, a);
                assert!(f > 0.0 && f < 2.0);
            }
        }
        assert!(PerturbedSigma::new(base, 101.0, 1).is_err());
    }

    #[test]
    fn fixed_sigma_rejects_negative() {
        let pred = CorruptedPredictor::new(0.0, 0).unwrap();
        assert!(FixedSigmaQuery::new(pred, -1.0).is_err());
        assert!(CorruptedPredictor::new(-0.1, 0).is_err());
    }

    #[test]
    fn entropy_examples() {
        let n = 30;
        let uniform = vec![1.0 / n as f64; n];
        assert!((prior_entropy(&uniform).unwrap() - (n as f64).ln()).abs() < 1e-12);
        assert_eq!(prior_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((prior_entropy(&[0.5, 0.5]).unwrap() - 0.693_147_180_559_945_3).abs() < 1e-12);
        assert!(prior_entropy(&[0.5, 0.4]).is_err());
        // 0.9 on one edge, the remainder uniform over 9 others
        let mut p = vec![0.1 / 9.0; 10];
        p[0] = 0.9;
        let direct = -0.9 * 0.9f64.ln() - 9.0 * (0.1 / 9.0) * (0.1f64 / 9.0).ln();
        assert!((prior_entropy(&p).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn brute_force_point_masses_pick_optimum() {
        let tree = LeafTree::new(2, 2, vec![(0.0, 0.0), (3.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let probs =
            brute_force_ts_distribution(&tree, &tree.root(), &LeafPriorOracle, 100, &mut rng).unwrap();
        assert_eq!(probs.len(), 4);
        assert_eq!(probs[1].path, vec![0, 1]);
        assert_eq!(probs[1].probability, 1.0);
        assert_eq!(probs.iter().map(|p| p.probability).sum::<f64>(), 1.0);
    }

    #[test]
    fn brute_force_symmetric_pair() {
        let tree = LeafTree::new(1, 2, vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probs =
            brute_force_ts_distribution(&tree, &tree.root(), &LeafPriorOracle, 100_000, &mut rng)
                .unwrap();
        assert!((probs[0].probability - 0.5).abs() < 0.01);
        assert!((probs[1].probability - 0.5).abs() < 0.01);
    }

    #[test]
    fn brute_force_self_consistency() {
        let tree = LeafTree::new(2, 2, vec![(0.0, 1.0), (0.5, 2.0), (1.0, 0.5), (0.2, 1.5)]).unwrap();
        let small = brute_force_ts_distribution(
            &tree,
            &tree.root(),
            &LeafPriorOracle,
            50_000,
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        let large = brute_force_ts_distribution(
            &tree,
            &tree.root(),
            &LeafPriorOracle,
            500_000,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        let tv: f64 = small
            .iter()
            .zip(&large)
            .map(|(a, b)| (a.probability - b.probability).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn brute_force_refuses_large_trees() {
        let tree = LeafTree::new(14, 2, vec![(0.0, 1.0); 1 << 14]).unwrap();
        let err = brute_force_ts_distribution(
            &tree,
            &tree.root(),
            &LeafPriorOracle,
            1,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap_err();
        assert_eq!(err, OracleError::TooLarge(MAX_ENUMERATED_LEAVES));
    }
}
