//! Posterior predictive inference for a new unit observed on any subset of
//! covariates.

use crate::error::{Error, Result};
use crate::outcome::{vdlreg_moments, ClusterParams, ModelKind};
use crate::partition::{CohesionConfig, Partition};
use crate::rng;
use crate::sampler::{ModelConfig, PosteriorDraws, Prepared};
use crate::similarity::{normal_log_density, ClusterStats, SimilarityConfig};
use crate::Dataset;

/// Prior draws used for the opened-cluster slot of the local regression.
pub const NEW_CLUSTER_DRAWS: usize = 100;

/// A new unit on the original covariate scale. `None` marks an unreported
/// covariate. `grid` holds response values at which to evaluate the density.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictiveQuery {
    pub x: Vec<Option<f64>>,
    pub grid: Vec<f64>,
}

impl PredictiveQuery {
    pub fn new(x: Vec<Option<f64>>) -> Self {
        Self { x, grid: Vec::new() }
    }

    /// Builds a query from dense values and a mask; masked-out values are ignored.
    pub fn from_mask(values: &[f64], mask: &[bool]) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::InvalidArgument(format!(
                "query has {} values but {} mask entries",
                values.len(),
                mask.len()
            )));
        }
        Ok(Self::new(
            values.iter().zip(mask).map(|(&v, &m)| m.then_some(v)).collect(),
        ))
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn mask(&self) -> Vec<bool> {
        self.x.iter().map(Option::is_some).collect()
    }
}

/// Allocation probabilities of a new unit with standardized covariates `x`
/// for one partition of the (standardized) training data `d`. Entry `K` is
/// the opened cluster; it is zero when `include_new` is false.
pub fn allocation_probs(
    x: &[Option<f64>],
    partition: &Partition,
    d: &Dataset,
    sim: &SimilarityConfig,
    cohesion: &CohesionConfig,
    include_new: bool,
) -> Vec<f64> {
    let stats: Vec<ClusterStats> = (0..partition.n_clusters())
        .map(|k| ClusterStats::from_members(d, partition.members(k), sim))
        .collect();
    let empty = ClusterStats::empty(d, sim);
    let sizes = partition.sizes();
    allocation_from_stats(x, &stats, &sizes, &empty, sim, cohesion, include_new)
}

fn allocation_from_stats(
    x: &[Option<f64>],
    stats: &[ClusterStats],
    sizes: &[usize],
    empty: &ClusterStats,
    sim: &SimilarityConfig,
    cohesion: &CohesionConfig,
    include_new: bool,
) -> Vec<f64> {
    let mut w: Vec<f64> = stats
        .iter()
        .zip(sizes)
        .map(|(s, &m)| (m as f64).ln() + s.log_ratio(x, sim))
        .collect();
    w.push(if include_new {
        cohesion.mass.ln() + empty.log_ratio(x, sim)
    } else {
        f64::NEG_INFINITY
    });
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in w.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

pub fn mspe(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    Ok(predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / predictions.len() as f64)
}

/// Per-draw similarity statistics, cached once so that many queries can be
/// evaluated against the same fit.
struct DrawCache {
    stats: Vec<ClusterStats>,
    sizes: Vec<usize>,
}

enum NewSlot {
    Conjugate,
    Draws(Vec<ClusterParams>),
}

pub struct Predictor<'a> {
    prep: &'a Prepared,
    model: &'a ModelConfig,
    draws: &'a PosteriorDraws,
    include_new: bool,
    cache: Vec<DrawCache>,
    empty: ClusterStats,
    new_slot: NewSlot,
}

impl<'a> Predictor<'a> {
    pub fn new(
        prep: &'a Prepared,
        model: &'a ModelConfig,
        draws: &'a PosteriorDraws,
        include_new: bool,
        seed: u64,
    ) -> Result<Self> {
        if draws.draws.is_empty() {
            return Err(Error::InvalidArgument("no posterior draws".into()));
        }
        let d = &prep.data;
        for draw in &draws.draws {
            if draw.partition.n() != d.n() || draw.params.len() != draw.partition.n_clusters() {
                return Err(Error::InvalidArgument(
                    "draws do not match the training data".into(),
                ));
            }
        }
        let cache = draws
            .draws
            .iter()
            .map(|draw| DrawCache {
                stats: (0..draw.partition.n_clusters())
                    .map(|k| ClusterStats::from_members(d, draw.partition.members(k), &model.similarity))
                    .collect(),
                sizes: draw.partition.sizes(),
            })
            .collect();
        let new_slot = match draws.model {
            ModelKind::VDReg => NewSlot::Conjugate,
            ModelKind::VDLReg => {
                let mut rng = rng::stream(seed, "predict-new-cluster", 0);
                NewSlot::Draws(
                    (0..NEW_CLUSTER_DRAWS)
                        .map(|_| model.priors.vdlreg.sample(prep.n_reg(), &mut rng).0)
                        .collect(),
                )
            }
        };
        Ok(Self {
            prep,
            model,
            draws,
            include_new,
            cache,
            empty: ClusterStats::empty(d, &model.similarity),
            new_slot,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.cache.len()
    }

    fn standardized(&self, q: &PredictiveQuery) -> Result<Vec<Option<f64>>> {
        let p = self.prep.data.p();
        if q.x.len() != p {
            return Err(Error::InvalidArgument(format!(
                "query has {} covariates, model has {p}",
                q.x.len()
            )));
        }
        if let Some(v) = q.x.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*v));
        }
        Ok(self.prep.standardization.apply_row(&q.x))
    }

    /// Allocation probabilities for draw `t` using a standardized query.
    pub fn allocation_probs_std(&self, t: usize, x: &[Option<f64>]) -> Vec<f64> {
        let c = &self.cache[t];
        allocation_from_stats(
            x,
            &c.stats,
            &c.sizes,
            &self.empty,
            &self.model.similarity,
            &self.model.cohesion,
            self.include_new,
        )
    }

    pub fn allocation_probs(&self, t: usize, q: &PredictiveQuery) -> Result<Vec<f64>> {
        Ok(self.allocation_probs_std(t, &self.standardized(q)?))
    }

    /// Mean and variance of each cluster's outcome for the query.
    fn component_moments(&self, theta: &ClusterParams, z: &[f64], r: &[bool]) -> (f64, f64) {
        match self.draws.model {
            ModelKind::VDReg => (theta.mu, theta.sigma2),
            ModelKind::VDLReg => vdlreg_moments(z, r, theta),
        }
    }

    /// Mean and variance of the opened-cluster prior predictive.
    fn new_slot_moments(&self, z: &[f64], r: &[bool]) -> (f64, f64) {
        match &self.new_slot {
            NewSlot::Conjugate => {
                let p = &self.model.priors.vdreg;
                let var = if p.a0 > 1.0 {
                    p.b0 * (1.0 + p.kappa0) / (p.kappa0 * (p.a0 - 1.0))
                } else {
                    f64::INFINITY
                };
                (p.m0, var)
            }
            NewSlot::Draws(thetas) => {
                let ms: Vec<(f64, f64)> = thetas.iter().map(|t| vdlreg_moments(z, r, t)).collect();
                let n = ms.len() as f64;
                let mean = ms.iter().map(|m| m.0).sum::<f64>() / n;
                let second = ms.iter().map(|m| m.1 + m.0 * m.0).sum::<f64>() / n;
                (mean, second - mean * mean)
            }
        }
    }

    fn new_slot_log_density(&self, y: f64, z: &[f64], r: &[bool]) -> f64 {
        match &self.new_slot {
            NewSlot::Conjugate => self.model.priors.vdreg.log_predictive(y),
            NewSlot::Draws(thetas) => {
                let n = thetas.len() as f64;
                let s: f64 = thetas
                    .iter()
                    .map(|t| {
                        let (m, v) = vdlreg_moments(z, r, t);
                        normal_log_density(y, m, v).exp()
                    })
                    .sum();
                (s / n).ln()
            }
        }
    }

    /// Predictive mean and variance on the standardized response scale.
    pub fn moments_std(&self, q: &PredictiveQuery) -> Result<(f64, f64)> {
        let x = self.standardized(q)?;
        let (z, r) = self.prep.reg_query(&x);
        let mut first = 0.0;
        let mut second = 0.0;
        for (t, draw) in self.draws.draws.iter().enumerate() {
            let w = self.allocation_probs_std(t, &x);
            for (k, theta) in draw.params.iter().enumerate() {
                let (m, v) = self.component_moments(theta, &z, &r);
                first += w[k] * m;
                second += w[k] * (v + m * m);
            }
            let wn = w[draw.params.len()];
            if wn > 0.0 {
                let (m, v) = self.new_slot_moments(&z, &r);
                first += wn * m;
                second += wn * (v + m * m);
            }
        }
        let n = self.n_draws() as f64;
        let mean = first / n;
        Ok((mean, second / n - mean * mean))
    }

    /// Posterior predictive mean on the original response scale.
    pub fn predictive_mean(&self, q: &PredictiveQuery) -> Result<f64> {
        let (m, _) = self.moments_std(q)?;
        Ok(self.prep.standardization.response.inverse(m))
    }

    /// Predictive mean and variance on the original response scale.
    pub fn predictive_moments(&self, q: &PredictiveQuery) -> Result<(f64, f64)> {
        let (m, v) = self.moments_std(q)?;
        let a = self.prep.standardization.response;
        Ok((a.inverse(m), v * a.scale * a.scale))
    }

    /// Rao-Blackwellized predictive density on `q.grid` (original scale).
    pub fn predictive_density(&self, q: &PredictiveQuery) -> Result<Vec<f64>> {
        let x = self.standardized(q)?;
        let (z, r) = self.prep.reg_query(&x);
        let a = self.prep.standardization.response;
        let grid: Vec<f64> = q.grid.iter().map(|&y| a.forward(y)).collect();
        let mut dens = vec![0.0; grid.len()];
        for (t, draw) in self.draws.draws.iter().enumerate() {
            let w = self.allocation_probs_std(t, &x);
            for (k, theta) in draw.params.iter().enumerate() {
                if w[k] == 0.0 {
                    continue;
                }
                let (m, v) = self.component_moments(theta, &z, &r);
                for (d, &y) in dens.iter_mut().zip(&grid) {
                    *d += w[k] * normal_log_density(y, m, v).exp();
                }
            }
            let wn = w[draw.params.len()];
            if wn > 0.0 {
                for (d, &y) in dens.iter_mut().zip(&grid) {
                    *d += wn * self.new_slot_log_density(y, &z, &r).exp();
                }
            }
        }
        let scale = self.n_draws() as f64 * a.scale;
        Ok(dens.into_iter().map(|d| d / scale).collect())
    }
}
