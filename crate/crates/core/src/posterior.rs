//! Value distributions for state-action pairs and the algebra used by
//! max-backup: discretization, the max of independent variables, shifting,
//! moments, quantiles and sampling.
//!
//! Two representations are supported. A [`PosteriorDist::Gaussian`] is what
//! value oracles hand out for freshly expanded leaves. Backing a set of
//! children up through the `max` operator produces a
//! [`PosteriorDist::DiscreteCdf`]: a CDF tabulated on `M` strictly increasing
//! bins and linearly interpolated in between.

use std::borrow::Cow;
use std::f64::consts::SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use thiserror::Error;

/// Default number of bins used when discretizing a distribution.
pub const DEFAULT_BINS: usize = 50;

/// Lower CDF level at which a Gaussian's discretization starts.
pub const LOWER_TAIL: f64 = 0.001;
/// Upper CDF level at which a Gaussian's discretization ends.
pub const UPPER_TAIL: f64 = 0.999;

/// Width of the two-bin step used to represent a point mass.
pub const POINT_MASS_WIDTH: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosteriorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, PosteriorError>;

/// How quantiles and samples are computed for tabulated distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approximation {
    /// Use a Gaussian with the distribution's mean and variance.
    #[default]
    MomentMatched,
    /// Work on the tabulated CDF directly.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PosteriorDist {
    /// `std == 0` is a point mass at `mean`.
    Gaussian { mean: f64, std: f64 },
    DiscreteCdf { bins: Vec<f64>, cdf: Vec<f64> },
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile function.
pub fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

fn linspace(first: f64, last: f64, m: usize) -> Vec<f64> {
    let step = (last - first) / (m - 1) as f64;
    let mut out: Vec<f64> = (0..m).map(|i| first + step * i as f64).collect();
    out[m - 1] = last;
    out
}

/// Piecewise-linear CDF lookup, 0 left of the support and 1 right of it.
fn interpolate_cdf(bins: &[f64], cdf: &[f64], x: f64) -> f64 {
    let m = bins.len();
    if x < bins[0] {
        return 0.0;
    }
    if x > bins[m - 1] {
        return 1.0;
    }
    // first index with bins[i] >= x
    let i = bins.partition_point(|&b| b < x);
    if i == 0 {
        return cdf[0];
    }
    let (x0, x1) = (bins[i - 1], bins[i]);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    let w = (x - x0) / (x1 - x0);
    c0 + w * (c1 - c0)
}

impl PosteriorDist {
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(PosteriorError::InvalidParameter(format!(
                "mean must be finite, got {mean}"
            )));
        }
        if !(std >= 0.0) || !std.is_finite() {
            return Err(PosteriorError::InvalidParameter(format!(
                "std must be finite and >= 0, got {std}"
            )));
        }
        Ok(PosteriorDist::Gaussian { mean, std })
    }

    pub fn point_mass(value: f64) -> Self {
        PosteriorDist::Gaussian {
            mean: value,
            std: 0.0,
        }
    }

    /// Builds a tabulated CDF, checking the representation invariants.
    pub fn discrete(bins: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if bins.len() != cdf.len() || bins.len() < 2 {
            return Err(PosteriorError::InvalidArgument(
                "bins and cdf must share a length >= 2".into(),
            ));
        }
        if bins.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PosteriorError::InvalidArgument(
                "bins must be strictly increasing".into(),
            ));
        }
        if cdf.iter().any(|c| !(0.0..=1.0).contains(c)) || cdf.windows(2).any(|w| w[1] < w[0]) {
            return Err(PosteriorError::InvalidArgument(
                "cdf must be nondecreasing within [0, 1]".into(),
            ));
        }
        Ok(PosteriorDist::DiscreteCdf { bins, cdf })
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, PosteriorDist::Gaussian { std, .. } if *std == 0.0)
    }

    /// Tabulates the distribution on `m` linearly spaced bins running from its
    /// 0.001-quantile to its 0.999-quantile. A point mass becomes a two-bin
    /// step `[mean - 1e-9, mean]`, whatever `m` is.
    pub fn discretize(&self, m: usize) -> Result<PosteriorDist> {
        Ok(self.as_discrete(m)?.into_owned())
    }

    fn as_discrete(&self, m: usize) -> Result<Cow<'_, PosteriorDist>> {
        if m < 2 {
            return Err(PosteriorError::InvalidArgument(format!(
                "need at least 2 bins, got {m}"
            )));
        }
        match self {
            PosteriorDist::Gaussian { mean, std } if *std == 0.0 => {
                Ok(Cow::Owned(PosteriorDist::DiscreteCdf {
                    bins: vec![mean - POINT_MASS_WIDTH, *mean],
                    cdf: vec![0.0, 1.0],
                }))
            }
            PosteriorDist::Gaussian { mean, std } => {
                let lo = mean + std * std_normal_quantile(LOWER_TAIL);
                let hi = mean + std * std_normal_quantile(UPPER_TAIL);
                let bins = linspace(lo, hi, m);
                let cdf = bins
                    .iter()
                    .map(|b| std_normal_cdf((b - mean) / std))
                    .collect();
                Ok(Cow::Owned(PosteriorDist::DiscreteCdf { bins, cdf }))
            }
            PosteriorDist::DiscreteCdf { bins, .. } if bins.len() == m || bins.len() == 2 => {
                Ok(Cow::Borrowed(self))
            }
            PosteriorDist::DiscreteCdf { bins, cdf } => {
                let grid = linspace(bins[0], bins[bins.len() - 1], m);
                let values = grid.iter().map(|&x| interpolate_cdf(bins, cdf, x)).collect();
                Ok(Cow::Owned(PosteriorDist::DiscreteCdf {
                    bins: grid,
                    cdf: values,
                }))
            }
        }
    }

    /// Distribution of `X + r`.
    pub fn shift(&self, r: f64) -> PosteriorDist {
        match self {
            PosteriorDist::Gaussian { mean, std } => PosteriorDist::Gaussian {
                mean: mean + r,
                std: *std,
            },
            PosteriorDist::DiscreteCdf { bins, cdf } => PosteriorDist::DiscreteCdf {
                bins: bins.iter().map(|b| b + r).collect(),
                cdf: cdf.clone(),
            },
        }
    }

    /// Mean and variance. For a tabulated CDF each interval's mass sits at its
    /// midpoint and the residual tails sit on the end bins.
    pub fn mean_var(&self) -> (f64, f64) {
        match self {
            PosteriorDist::Gaussian { mean, std } => (*mean, std * std),
            PosteriorDist::DiscreteCdf { bins, cdf } => {
                let m = bins.len();
                let mut atoms = Vec::with_capacity(m + 1);
                atoms.push((bins[0], cdf[0]));
                for i in 1..m {
                    atoms.push((0.5 * (bins[i - 1] + bins[i]), cdf[i] - cdf[i - 1]));
                }
                atoms.push((bins[m - 1], 1.0 - cdf[m - 1]));
                let total: f64 = atoms.iter().map(|(_, w)| w).sum();
                let mean = atoms.iter().map(|(x, w)| x * w).sum::<f64>() / total;
                let var = atoms
                    .iter()
                    .map(|(x, w)| w * (x - mean) * (x - mean))
                    .sum::<f64>()
                    / total;
                (mean, var.max(0.0))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean_var().0
    }

    /// CDF evaluated at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            PosteriorDist::Gaussian { mean, std } if *std == 0.0 => {
                if x >= *mean {
                    1.0
                } else {
                    0.0
                }
            }
            PosteriorDist::Gaussian { mean, std } => std_normal_cdf((x - mean) / std),
            PosteriorDist::DiscreteCdf { bins, cdf } => interpolate_cdf(bins, cdf, x),
        }
    }

    /// The `alpha`-quantile using the moment-matched Gaussian.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        self.quantile_with(alpha, Approximation::MomentMatched)
    }

    pub fn quantile_with(&self, alpha: f64, approx: Approximation) -> Result<f64> {
        check_level(alpha)?;
        Ok(match (self, approx) {
            (PosteriorDist::Gaussian { mean, std }, _) => gaussian_quantile(*mean, *std, alpha),
            (PosteriorDist::DiscreteCdf { .. }, Approximation::MomentMatched) => {
                let (mean, var) = self.mean_var();
                gaussian_quantile(mean, var.sqrt(), alpha)
            }
            (PosteriorDist::DiscreteCdf { bins, cdf }, Approximation::Exact) => {
                tabulated_quantile(bins, cdf, alpha)
            }
        })
    }

    /// One draw from the moment-matched Gaussian.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (mean, var) = self.mean_var();
        gaussian_draw(mean, var.sqrt(), rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, approx: Approximation) -> f64 {
        match (self, approx) {
            (PosteriorDist::DiscreteCdf { bins, cdf }, Approximation::Exact) => {
                let u: f64 = rng.random();
                // u == 0 would be outside (0, 1); it maps to the lowest bin
                if u <= 0.0 {
                    bins[0]
                } else {
                    tabulated_quantile(bins, cdf, u)
                }
            }
            _ => self.sample(rng),
        }
    }
}

pub(crate) fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(PosteriorError::InvalidArgument(format!(
            "quantile level must lie in (0, 1), got {alpha}"
        )))
    }
}

pub(crate) fn gaussian_quantile(mean: f64, std: f64, alpha: f64) -> f64 {
    if std == 0.0 {
        mean
    } else {
        mean + std * std_normal_quantile(alpha)
    }
}

/// `mean + std * z` with `z` standard normal. A zero `std` still consumes one
/// normal draw so that the stream position does not depend on the variance.
pub(crate) fn gaussian_draw<R: Rng + ?Sized>(mean: f64, std: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + std * z
}

/// Smallest interpolated value whose CDF reaches `alpha`.
fn tabulated_quantile(bins: &[f64], cdf: &[f64], alpha: f64) -> f64 {
    let m = bins.len();
    if alpha <= cdf[0] {
        return bins[0];
    }
    if alpha > cdf[m - 1] {
        return bins[m - 1];
    }
    let i = cdf.partition_point(|&c| c < alpha);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    let (x0, x1) = (bins[i - 1], bins[i]);
    if c1 == c0 {
        x1
    } else {
        x0 + (alpha - c0) / (c1 - c0) * (x1 - x0)
    }
}

/// Distribution of the max of independent variables, tabulated on `m` bins.
///
/// Every input is discretized, the common grid runs from the largest first bin
/// to the largest last bin, each input CDF is interpolated onto that grid
/// (0 left of its support, 1 right of it) and the results are multiplied.
pub fn max_of_independent<'a, I>(dists: I, m: usize) -> Result<PosteriorDist>
where
    I: IntoIterator<Item = &'a PosteriorDist>,
{
    let tables = dists
        .into_iter()
        .map(|d| d.as_discrete(m))
        .collect::<Result<Vec<_>>>()?;
    if tables.is_empty() {
        return Err(PosteriorError::InvalidArgument(
            "max of an empty list of distributions".into(),
        ));
    }
    let mut first = f64::NEG_INFINITY;
    let mut last = f64::NEG_INFINITY;
    for t in &tables {
        if let PosteriorDist::DiscreteCdf { bins, .. } = t.as_ref() {
            first = first.max(bins[0]);
            last = last.max(bins[bins.len() - 1]);
        }
    }
    let grid = linspace(first, last, m);
    // factors are multiplied in sorted order so that the result does not
    // depend on the order of the inputs, bit for bit
    let mut factors = Vec::with_capacity(tables.len());
    let mut product: Vec<f64> = grid
        .iter()
        .map(|&x| {
            factors.clear();
            for t in &tables {
                if let PosteriorDist::DiscreteCdf { bins, cdf } = t.as_ref() {
                    factors.push(interpolate_cdf(bins, cdf, x));
                }
            }
            factors.sort_by(f64::total_cmp);
            factors.iter().product()
        })
        .collect();
    // interpolation can leave a 1-ulp dip; keep the table monotone
    for i in 1..m {
        if product[i] < product[i - 1] {
            product[i] = product[i - 1];
        }
    }
    Ok(PosteriorDist::DiscreteCdf {
        bins: grid,
        cdf: product,
    })
}
