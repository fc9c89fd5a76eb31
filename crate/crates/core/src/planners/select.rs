//! In-tree action selection rules. Every rule breaks ties towards the lowest
//! action index.

use rand::Rng;

use crate::posterior::{gaussian_draw, std_normal_quantile, Approximation};
use crate::tree::{EdgeStat, SearchNode};

/// Floor on the Bayes-UCB quantile level for small visit counts.
pub const BAYES_UCB_MIN_LEVEL: f64 = 0.001;

/// Index of the first maximum.
pub fn argmax<I: IntoIterator<Item = f64>>(scores: I) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Thompson sampling: one draw per edge posterior, then the argmax.
pub fn select_tsts<S, R: Rng + ?Sized>(node: &SearchNode<S>, approx: Approximation, rng: &mut R) -> usize {
    argmax(node.edges.iter().map(|e| match approx {
        Approximation::MomentMatched => {
            let (mean, var) = e.moments();
            gaussian_draw(mean, var.sqrt(), rng)
        }
        Approximation::Exact => e.posterior().sample_with(rng, approx),
    }))
}

/// `alpha0` at the first visit, approaching 1 as `1 - (1 - alpha0) e^{-(N-1)/beta}`.
pub fn bts_quantile_level(visits: u32, alpha0: f64, beta: f64) -> f64 {
    let n = visits.max(1) as f64;
    1.0 - (1.0 - alpha0) * (-(n - 1.0) / beta).exp()
}

/// `1 - beta / N`, floored at [`BAYES_UCB_MIN_LEVEL`].
pub fn bayes_ucb_level(visits: u32, beta: f64) -> f64 {
    (1.0 - beta / visits.max(1) as f64).max(BAYES_UCB_MIN_LEVEL)
}

fn edge_quantile(e: &EdgeStat, level: f64, z: f64, approx: Approximation) -> f64 {
    match approx {
        Approximation::MomentMatched => {
            let (mean, var) = e.moments();
            if var == 0.0 {
                mean
            } else {
                mean + var.sqrt() * z
            }
        }
        Approximation::Exact => e
            .posterior()
            .quantile_with(level, approx)
            .expect("level checked by caller"),
    }
}

/// Argmax of the per-edge `level`-quantiles.
pub fn select_quantile<S>(node: &SearchNode<S>, level: f64, approx: Approximation) -> usize {
    let level = level.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    let z = std_normal_quantile(level);
    argmax(node.edges.iter().map(|e| edge_quantile(e, level, z, approx)))
}

/// BTS: quantile selection at the node's scheduled level. The node's visit
/// count must already include the current visit.
pub fn select_bts<S>(node: &SearchNode<S>, alpha0: f64, beta: f64, approx: Approximation) -> usize {
    select_quantile(node, bts_quantile_level(node.visit_count, alpha0, beta), approx)
}

pub fn select_bayes_ucb<S>(node: &SearchNode<S>, beta: f64, approx: Approximation) -> usize {
    select_quantile(node, bayes_ucb_level(node.visit_count, beta), approx)
}

/// `mean + sqrt(2 ln N(s) var)`.
pub fn select_bayes_uct2<S>(node: &SearchNode<S>) -> usize {
    let log_n = (node.visit_count.max(1) as f64).ln();
    argmax(node.edges.iter().map(|e| {
        let (mean, var) = e.moments();
        mean + (2.0 * log_n * var).sqrt()
    }))
}

/// Softmax of `values / temp`, computed stably.
pub fn softmax(values: &[f64], temp: f64) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|v| ((v - m) / temp).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// P-UCT: `Q(s,a) + c pi(a|s) sqrt(N(s)) / (1 + N(s,a))` with `pi` the
/// softmax of the oracle means and `Q` the max-backed branch value.
pub fn select_puct<S>(node: &SearchNode<S>, c: f64, temp: f64) -> usize {
    let prior_means: Vec<f64> = node.edges.iter().map(|e| e.query.mean()).collect();
    let prior = softmax(&prior_means, temp);
    let sqrt_n = (node.visit_count as f64).sqrt();
    argmax(
        node.edges
            .iter()
            .zip(&prior)
            .map(|(e, p)| e.value + c * p * sqrt_n / (1.0 + e.visit_count as f64)),
    )
}
