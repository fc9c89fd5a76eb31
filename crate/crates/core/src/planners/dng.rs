//! Dirichlet-NormalGamma style baseline: each edge keeps a NormalGamma
//! belief over the mean of its observed returns and is selected by Thompson
//! sampling from that belief.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use super::select::argmax;
use crate::tree::SearchNode;

/// NormalGamma parameters `<mu0, lambda, alpha, beta>` plus the number of
/// returns absorbed so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DngNodeStat {
    pub mu0: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub updates: u32,
}

impl Default for DngNodeStat {
    fn default() -> Self {
        DngNodeStat::prior(0.001, 100.0)
    }
}

impl DngNodeStat {
    pub fn prior(lambda: f64, beta: f64) -> Self {
        DngNodeStat {
            mu0: 0.0,
            lambda,
            alpha: 1.0,
            beta,
            updates: 0,
        }
    }

    /// Draws `tau ~ Gamma(alpha, rate beta)` and then
    /// `mu ~ N(mu0, 1 / (lambda tau))`; returns `mu`.
    pub fn sample_mean<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let tau = Gamma::new(self.alpha, 1.0 / self.beta)
            .expect("alpha and beta stay positive")
            .sample(rng);
        let std = (1.0 / (self.lambda * tau)).sqrt();
        match Normal::new(self.mu0, std) {
            Ok(n) => n.sample(rng),
            // tau underflowed to zero: the belief is effectively flat
            Err(_) => self.mu0,
        }
    }
}

/// Conjugate update with one observed return `r`. The `beta` and `mu0`
/// updates use the pre-update `lambda` and `mu0`.
pub fn dng_backup(stat: DngNodeStat, r: f64) -> DngNodeStat {
    let DngNodeStat {
        mu0,
        lambda,
        alpha,
        beta,
        updates,
    } = stat;
    DngNodeStat {
        alpha: alpha + 0.5,
        beta: beta + lambda * (r - mu0).powi(2) / (lambda + 1.0) / 2.0,
        mu0: (lambda * mu0 + r) / (lambda + 1.0),
        lambda: lambda + 1.0,
        updates: updates + 1,
    }
}

/// Thompson sampling over the NormalGamma beliefs; edges without any
/// observed return are scored by their oracle mean.
pub fn select_dng<S, R: Rng + ?Sized>(node: &SearchNode<S>, rng: &mut R) -> usize {
    argmax(node.edges.iter().map(|e| {
        if e.dng.updates == 0 {
            e.query.mean()
        } else {
            e.dng.sample_mean(rng)
        }
    }))
}
