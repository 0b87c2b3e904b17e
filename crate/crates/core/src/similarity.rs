//! Covariate similarity scores for the covariate-dependent partition prior.
//!
//! Each covariate contributes `log g_j` computed over the cluster members that
//! report it. Continuous covariates use the marginal likelihood of a
//! Normal–Inverse-Gamma auxiliary model, binary covariates a beta–binomial
//! marginal, and categorical covariates either the modal relative frequency or
//! a Dirichlet–multinomial marginal. All scores are in log space.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dataset::{CovariateKind, Dataset};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Auxiliary model `x ~ N(mu, s2)`, `mu ~ N(0, c * s2)`, `s2 ~ IG(a, b)` with
/// `E[s2] = b / (a - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianHyper {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for GaussianHyper {
    fn default() -> Self {
        Self {
            a: 2.0,
            b: 1.0,
            c: 1.0,
        }
    }
}

/// Beta pseudocounts for binary covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaHyper {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BetaHyper {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CategoricalSimilarity {
    /// Relative frequency of the modal code. When `weighted`, the log score is
    /// `|v| * ln(freq)`, otherwise `ln(freq)`.
    ModeFrequency { weighted: bool },
    /// Dirichlet–multinomial marginal with symmetric pseudocount `alpha`.
    Dirichlet { alpha: f64 },
}

impl Default for CategoricalSimilarity {
    fn default() -> Self {
        Self::ModeFrequency { weighted: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovariateSimilarity {
    Gaussian(GaussianHyper),
    BetaBinomial(BetaHyper),
    Categorical(CategoricalSimilarity),
}

/// Per-covariate similarity settings, shared by all clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub covariates: Vec<CovariateSimilarity>,
}

impl SimilarityConfig {
    pub fn new(
        kinds: &[CovariateKind],
        gaussian: GaussianHyper,
        beta: BetaHyper,
        categorical: CategoricalSimilarity,
    ) -> Result<Self> {
        let cfg = Self {
            covariates: kinds
                .iter()
                .map(|k| match k {
                    CovariateKind::Continuous => CovariateSimilarity::Gaussian(gaussian),
                    CovariateKind::Binary => CovariateSimilarity::BetaBinomial(beta),
                    CovariateKind::Categorical => CovariateSimilarity::Categorical(categorical),
                })
                .collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn defaults_for(kinds: &[CovariateKind]) -> Self {
        Self::new(
            kinds,
            GaussianHyper::default(),
            BetaHyper::default(),
            CategoricalSimilarity::default(),
        )
        .expect("default hyperparameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "similarity hyperparameter {name} = {v} must be positive"
                )))
            }
        };
        for c in &self.covariates {
            match *c {
                CovariateSimilarity::Gaussian(h) => {
                    pos(h.a, "a")?;
                    pos(h.b, "b")?;
                    pos(h.c, "c")?;
                }
                CovariateSimilarity::BetaBinomial(h) => {
                    pos(h.alpha, "alpha0")?;
                    pos(h.beta, "beta0")?;
                }
                CovariateSimilarity::Categorical(CategoricalSimilarity::Dirichlet { alpha }) => {
                    pos(alpha, "alpha_cat")?
                }
                CovariateSimilarity::Categorical(_) => {}
            }
        }
        Ok(())
    }
}

#[inline]
fn gaussian_from_stats(n: f64, sum: f64, sumsq: f64, h: &GaussianHyper) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let k0 = 1.0 / h.c;
    let kn = k0 + n;
    let an = h.a + 0.5 * n;
    // Guard against tiny negative values from floating cancellation.
    let ss = (sumsq - sum * sum / kn).max(0.0);
    let bn = h.b + 0.5 * ss;
    ln_gamma(an) - ln_gamma(h.a) + h.a * h.b.ln() - an * bn.ln() + 0.5 * (k0 / kn).ln()
        - 0.5 * n * LN_2PI
}

/// Log marginal likelihood of `v` under the Normal–Inverse-Gamma auxiliary model.
pub fn log_marginal_gaussian(v: &[f64], h: &GaussianHyper) -> Result<f64> {
    if let Some(&bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(bad));
    }
    let sum: f64 = v.iter().sum();
    let sumsq: f64 = v.iter().map(|x| x * x).sum();
    Ok(gaussian_from_stats(v.len() as f64, sum, sumsq, h))
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

#[inline]
fn beta_binomial_from_stats(n: f64, ones: f64, h: &BetaHyper) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    ln_beta(h.alpha + ones, h.beta + n - ones) - ln_beta(h.alpha, h.beta)
}

/// Log probability of the binary sequence `v` under a beta–binomial marginal.
pub fn log_marginal_beta_binomial(v: &[f64], h: &BetaHyper) -> Result<f64> {
    if let Some(&bad) = v.iter().find(|&&x| x != 0.0 && x != 1.0) {
        return Err(Error::NotBinary(bad));
    }
    let ones: f64 = v.iter().sum();
    Ok(beta_binomial_from_stats(v.len() as f64, ones, h))
}

/// Relative frequency of the most common code; 1 for an empty list.
pub fn categorical_mode_frequency(v: &[usize]) -> f64 {
    if v.is_empty() {
        return 1.0;
    }
    let mut counts = vec![0usize; v.iter().max().map_or(0, |m| m + 1)];
    for &c in v {
        counts[c] += 1;
    }
    *counts.iter().max().unwrap() as f64 / v.len() as f64
}

fn categorical_from_counts(counts: &[u32], n: u32, levels: usize, cfg: &CategoricalSimilarity) -> f64 {
    if n == 0 {
        return 0.0;
    }
    match *cfg {
        CategoricalSimilarity::ModeFrequency { weighted } => {
            let max = *counts.iter().max().unwrap_or(&0) as f64;
            let lf = (max / n as f64).ln();
            if weighted {
                n as f64 * lf
            } else {
                lf
            }
        }
        CategoricalSimilarity::Dirichlet { alpha } => {
            let l = levels.max(counts.len()) as f64;
            let mut out = ln_gamma(l * alpha) - ln_gamma(l * alpha + n as f64);
            for &c in counts.iter().filter(|&&c| c > 0) {
                out += ln_gamma(alpha + c as f64) - ln_gamma(alpha);
            }
            out
        }
    }
}

/// Sufficient statistics of one covariate over the members of one cluster that
/// report it.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateStat {
    Gaussian { n: f64, sum: f64, sumsq: f64 },
    Binary { n: f64, ones: f64 },
    Categorical { n: u32, counts: Vec<u32>, levels: usize },
}

impl CovariateStat {
    fn empty(sim: &CovariateSimilarity, levels: usize) -> Self {
        match sim {
            CovariateSimilarity::Gaussian(_) => Self::Gaussian {
                n: 0.0,
                sum: 0.0,
                sumsq: 0.0,
            },
            CovariateSimilarity::BetaBinomial(_) => Self::Binary { n: 0.0, ones: 0.0 },
            CovariateSimilarity::Categorical(_) => Self::Categorical {
                n: 0,
                counts: vec![0; levels],
                levels,
            },
        }
    }

    fn add(&mut self, x: f64) {
        match self {
            Self::Gaussian { n, sum, sumsq } => {
                *n += 1.0;
                *sum += x;
                *sumsq += x * x;
            }
            Self::Binary { n, ones } => {
                *n += 1.0;
                *ones += x;
            }
            Self::Categorical { n, counts, .. } => {
                let c = x as usize;
                if c >= counts.len() {
                    counts.resize(c + 1, 0);
                }
                counts[c] += 1;
                *n += 1;
            }
        }
    }

    fn remove(&mut self, x: f64) {
        match self {
            Self::Gaussian { n, sum, sumsq } => {
                *n -= 1.0;
                if *n == 0.0 {
                    *sum = 0.0;
                    *sumsq = 0.0;
                } else {
                    *sum -= x;
                    *sumsq -= x * x;
                }
            }
            Self::Binary { n, ones } => {
                *n -= 1.0;
                *ones -= x;
            }
            Self::Categorical { n, counts, .. } => {
                counts[x as usize] -= 1;
                *n -= 1;
            }
        }
    }

    fn score(&self, sim: &CovariateSimilarity) -> f64 {
        match (self, sim) {
            (Self::Gaussian { n, sum, sumsq }, CovariateSimilarity::Gaussian(h)) => {
                gaussian_from_stats(*n, *sum, *sumsq, h)
            }
            (Self::Binary { n, ones }, CovariateSimilarity::BetaBinomial(h)) => {
                beta_binomial_from_stats(*n, *ones, h)
            }
            (Self::Categorical { n, counts, levels }, CovariateSimilarity::Categorical(c)) => {
                categorical_from_counts(counts, *n, *levels, c)
            }
            _ => unreachable!("statistic kind does not match similarity kind"),
        }
    }

    /// Score after adding `x`, without mutating.
    fn score_with(&self, x: f64, sim: &CovariateSimilarity) -> f64 {
        match (self, sim) {
            (Self::Gaussian { n, sum, sumsq }, CovariateSimilarity::Gaussian(h)) => {
                gaussian_from_stats(n + 1.0, sum + x, sumsq + x * x, h)
            }
            (Self::Binary { n, ones }, CovariateSimilarity::BetaBinomial(h)) => {
                beta_binomial_from_stats(n + 1.0, ones + x, h)
            }
            _ => {
                let mut s = self.clone();
                s.add(x);
                s.score(sim)
            }
        }
    }
}

/// Cached similarity statistics and log scores for one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    stats: Vec<CovariateStat>,
    scores: Vec<f64>,
}

impl ClusterStats {
    pub fn empty(d: &Dataset, cfg: &SimilarityConfig) -> Self {
        let stats: Vec<CovariateStat> = cfg
            .covariates
            .iter()
            .enumerate()
            .map(|(j, s)| CovariateStat::empty(s, d.levels(j)))
            .collect();
        Self {
            scores: vec![0.0; stats.len()],
            stats,
        }
    }

    pub fn from_members(d: &Dataset, members: &[usize], cfg: &SimilarityConfig) -> Self {
        let mut s = Self::empty(d, cfg);
        for j in 0..d.p() {
            for &i in members {
                if let Some(x) = d.value(i, j) {
                    s.stats[j].add(x);
                }
            }
            s.scores[j] = s.stats[j].score(&cfg.covariates[j]);
        }
        s
    }

    pub fn add_unit(&mut self, d: &Dataset, i: usize, cfg: &SimilarityConfig) {
        for j in 0..d.p() {
            if let Some(x) = d.value(i, j) {
                self.stats[j].add(x);
                self.scores[j] = self.stats[j].score(&cfg.covariates[j]);
            }
        }
    }

    pub fn remove_unit(&mut self, d: &Dataset, i: usize, cfg: &SimilarityConfig) {
        for j in 0..d.p() {
            if let Some(x) = d.value(i, j) {
                self.stats[j].remove(x);
                self.scores[j] = self.stats[j].score(&cfg.covariates[j]);
            }
        }
    }

    /// Total `sum_j log g_j` for the cluster.
    pub fn log_score(&self) -> f64 {
        self.scores.iter().sum()
    }

    /// Change in log similarity from adding a unit with covariates `x`.
    pub fn log_ratio(&self, x: &[Option<f64>], cfg: &SimilarityConfig) -> f64 {
        x.iter()
            .enumerate()
            .filter_map(|(j, v)| {
                v.map(|v| self.stats[j].score_with(v, &cfg.covariates[j]) - self.scores[j])
            })
            .sum()
    }

    pub fn log_ratio_unit(&self, d: &Dataset, i: usize, cfg: &SimilarityConfig) -> f64 {
        (0..d.p())
            .filter_map(|j| {
                d.value(i, j)
                    .map(|v| self.stats[j].score_with(v, &cfg.covariates[j]) - self.scores[j])
            })
            .sum()
    }
}

/// Log similarity of a singleton cluster holding covariates `x`.
pub fn log_similarity_singleton(x: &[Option<f64>], cfg: &SimilarityConfig, levels: &[usize]) -> f64 {
    x.iter()
        .enumerate()
        .filter_map(|(j, v)| {
            v.map(|v| {
                let mut s = CovariateStat::empty(&cfg.covariates[j], levels[j]);
                s.add(v);
                s.score(&cfg.covariates[j])
            })
        })
        .sum()
}

/// `sum_j log g_j` over the members of a cluster, skipping unreported values.
pub fn log_similarity_cluster(d: &Dataset, members: &[usize], cfg: &SimilarityConfig) -> f64 {
    ClusterStats::from_members(d, members, cfg).log_score()
}

/// Log similarity gain from adding a unit with partial covariates `x_new`
/// (`None` where unreported) to the cluster `members`.
pub fn log_similarity_ratio(
    d: &Dataset,
    members: &[usize],
    x_new: &[Option<f64>],
    cfg: &SimilarityConfig,
) -> f64 {
    ClusterStats::from_members(d, members, cfg).log_ratio(x_new, cfg)
}

/// Density of `N(x; mean, var)`, used by several tests and by prediction.
pub fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean) * (x - mean) / var)
}
