use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PlanError;
use crate::posterior::{Approximation, DEFAULT_BINS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Tsts,
    Bts,
    BayesUcb,
    BayesUct2,
    Puct,
    ShPuct,
    Dng,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Tsts,
        Algorithm::Bts,
        Algorithm::BayesUcb,
        Algorithm::BayesUct2,
        Algorithm::Puct,
        Algorithm::ShPuct,
        Algorithm::Dng,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Tsts => "tsts",
            Algorithm::Bts => "bts",
            Algorithm::BayesUcb => "bayes_ucb",
            Algorithm::BayesUct2 => "bayes_uct2",
            Algorithm::Puct => "puct",
            Algorithm::ShPuct => "sh_puct",
            Algorithm::Dng => "dng",
        }
    }

    /// Whether the planner maintains full value posteriors through max-backup.
    pub fn is_distributional(self) -> bool {
        matches!(
            self,
            Algorithm::Tsts | Algorithm::Bts | Algorithm::BayesUcb | Algorithm::BayesUct2
        )
    }

    /// Rate coefficient used when the config leaves `beta` unset.
    pub fn default_beta(self) -> f64 {
        match self {
            Algorithm::BayesUcb => 0.5,
            _ => 3.0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| PlanError::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// How the executed action is chosen once a search finishes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Commitment {
    /// Root action of the branch with the highest expected return.
    #[default]
    Mcts,
    /// Root action of the branch with the highest `alpha`-quantile return.
    Quantile(f64),
    /// Sample from a softmax over the backed-up root values.
    Softmax(f64),
}

impl fmt::Display for Commitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Commitment::Mcts => f.write_str("mcts"),
            Commitment::Quantile(a) => write!(f, "quantile:{a}"),
            Commitment::Softmax(t) => write!(f, "softmax:{t}"),
        }
    }
}

/// Parses `mcts`, `quantile:<alpha>` or `softmax:<temp>`.
impl FromStr for Commitment {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PlanError::InvalidConfig(format!("unknown commitment `{s}`"));
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a.parse::<f64>().map_err(|_| bad())?)),
            None => (s, None),
        };
        match (kind, arg) {
            ("mcts", None) => Ok(Commitment::Mcts),
            ("quantile", Some(a)) => Ok(Commitment::Quantile(a)),
            ("softmax", Some(t)) => Ok(Commitment::Softmax(t)),
            _ => Err(bad()),
        }
    }
}

/// Algorithm choice and hyperparameters. Every field has a default, so a
/// config file only needs the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub algorithm: Algorithm,
    /// Search iterations per call.
    pub budget: usize,
    /// Initial quantile level of the BTS schedule.
    pub alpha0: f64,
    /// Schedule rate: BTS `beta` or Bayes-UCB `beta`. Unset means the
    /// algorithm's own default.
    pub beta: Option<f64>,
    pub puct_c: f64,
    /// Temperature of the P-UCT prior softmax.
    pub softmax_temp: f64,
    pub commitment: Commitment,
    pub seed: u64,
    /// Re-seed the generator with `seed` at every search so that the planner
    /// behaves as a deterministic function of the root state.
    pub deterministic_mode: bool,
    pub bins: usize,
    pub approximation: Approximation,
    pub dng_lambda: f64,
    pub dng_beta: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            algorithm: Algorithm::Bts,
            budget: 50,
            alpha0: 0.5,
            beta: None,
            puct_c: 1.0,
            softmax_temp: 2.0,
            commitment: Commitment::Mcts,
            seed: 0,
            deterministic_mode: false,
            bins: DEFAULT_BINS,
            approximation: Approximation::MomentMatched,
            dng_lambda: 0.001,
            dng_beta: 100.0,
        }
    }
}

impl PlannerConfig {
    pub fn new(algorithm: Algorithm, budget: usize) -> Self {
        PlannerConfig {
            algorithm,
            budget,
            ..Default::default()
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or_else(|| self.algorithm.default_beta())
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let fail = |msg: String| Err(PlanError::InvalidConfig(msg));
        if self.budget < 1 {
            return fail("budget must be at least 1".into());
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return fail(format!("alpha0 must lie in (0, 1), got {}", self.alpha0));
        }
        if !(self.beta() > 0.0) {
            return fail(format!("beta must be positive, got {}", self.beta()));
        }
        if !(self.softmax_temp > 0.0) {
            return fail(format!("softmax_temp must be positive, got {}", self.softmax_temp));
        }
        if !(self.puct_c >= 0.0) {
            return fail(format!("puct_c must be nonnegative, got {}", self.puct_c));
        }
        if self.bins < 2 {
            return fail(format!("bins must be at least 2, got {}", self.bins));
        }
        if !(self.dng_lambda > 0.0 && self.dng_beta > 0.0) {
            return fail("dng_lambda and dng_beta must be positive".into());
        }
        match self.commitment {
            Commitment::Quantile(a) if !(a > 0.0 && a < 1.0) => {
                fail(format!("commitment quantile must lie in (0, 1), got {a}"))
            }
            Commitment::Softmax(t) if !(t > 0.0) => {
                fail(format!("commitment temperature must be positive, got {t}"))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trips() {
        for a in Algorithm::ALL {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("SH-PUCT".parse::<Algorithm>().unwrap(), Algorithm::ShPuct);
        for c in [Commitment::Mcts, Commitment::Quantile(0.25), Commitment::Softmax(2.0)] {
            assert_eq!(c.to_string().parse::<Commitment>().unwrap(), c);
        }
        assert!("quantile".parse::<Commitment>().is_err());
    }

    #[test]
    fn toml_keys_override_defaults() {
        let cfg: PlannerConfig = toml::from_str(
            "algorithm = \"bayes_ucb\"\nbudget = 10\ncommitment = { quantile = 0.25 }\n",
        )
        .unwrap();
        assert_eq!(cfg.algorithm, Algorithm::BayesUcb);
        assert_eq!(cfg.beta(), 0.5);
        assert_eq!(cfg.commitment, Commitment::Quantile(0.25));
        assert_eq!(cfg.bins, 50);
        assert!(toml::from_str::<PlannerConfig>("budgt = 3").is_err());
    }

    #[test]
    fn validation() {
        assert!(PlannerConfig::default().validate().is_ok());
        let mut cfg = PlannerConfig::new(Algorithm::Bts, 0);
        assert!(cfg.validate().is_err());
        cfg.budget = 5;
        cfg.alpha0 = 1.0;
        assert!(cfg.validate().is_err());
        cfg.alpha0 = 0.5;
        cfg.commitment = Commitment::Softmax(0.0);
        assert!(cfg.validate().is_err());
    }
}
