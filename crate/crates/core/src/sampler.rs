//! Posterior simulation over partitions and cluster parameters.
//!
//! Each iteration runs one allocation scan using auxiliary empty clusters
//! (Neal's Algorithm 8), so the same kernel covers the conjugate Gaussian and
//! the nonconjugate local-regression outcome models. The scan is followed by
//! per-cluster parameter updates and, for the local regression, one
//! Dirichlet–Laplace update per cluster.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{standardize, CovariateKind, Dataset, Standardization};
use crate::error::{Error, Result};
use crate::outcome::{
    sample_vdlreg_params, sample_vdreg_params, update_dl_state, vdlreg_loglik, vdreg_loglik,
    Acceptance, ClusterParams, DLState, Member, ModelKind, OutcomePriors, StepSizes,
};
use crate::partition::{CohesionConfig, Partition};
use crate::rng::{self, StreamRng};
use crate::similarity::{ClusterStats, SimilarityConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_aux: usize,
    pub seed: u64,
    pub model: ModelKind,
    /// When false the outcome likelihood is dropped and the chain targets the
    /// partition prior.
    pub use_likelihood: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            thin: 5,
            n_aux: 3,
            seed: 1,
            model: ModelKind::VDReg,
            use_likelihood: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::InvalidArgument(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 || self.n_aux == 0 {
            return Err(Error::InvalidArgument("thin and n_aux must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Everything except the MCMC schedule: similarity, cohesion and outcome priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub similarity: SimilarityConfig,
    pub cohesion: CohesionConfig,
    pub priors: OutcomePriors,
}

impl ModelConfig {
    pub fn defaults_for(kinds: &[CovariateKind]) -> Self {
        Self {
            similarity: SimilarityConfig::defaults_for(kinds),
            cohesion: CohesionConfig::default(),
            priors: OutcomePriors::default(),
        }
    }
}

/// Training data on the internal (standardized) scale, with the regression
/// design extracted.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Dataset,
    pub standardization: Standardization,
    /// Covariates entering the local regression (the continuous ones).
    pub reg_cols: Vec<usize>,
    z: Vec<f64>,
    r: Vec<bool>,
}

impl Prepared {
    pub fn new(raw: &Dataset) -> Result<Self> {
        let s = standardize(raw)?;
        Ok(Self::with_standardization(raw, s))
    }

    pub fn with_standardization(raw: &Dataset, standardization: Standardization) -> Self {
        let data = standardization.apply(raw);
        let reg_cols: Vec<usize> = (0..data.p())
            .filter(|&j| data.kind(j) == CovariateKind::Continuous)
            .collect();
        let q = reg_cols.len();
        let mut z = vec![f64::NAN; data.n() * q];
        let mut r = vec![false; data.n() * q];
        for i in 0..data.n() {
            for (c, &j) in reg_cols.iter().enumerate() {
                if let Some(v) = data.value(i, j) {
                    z[i * q + c] = v;
                    r[i * q + c] = true;
                }
            }
        }
        Self {
            data,
            standardization,
            reg_cols,
            z,
            r,
        }
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn n_reg(&self) -> usize {
        self.reg_cols.len()
    }

    pub fn reg_row(&self, i: usize) -> (&[f64], &[bool]) {
        let q = self.n_reg();
        (&self.z[i * q..(i + 1) * q], &self.r[i * q..(i + 1) * q])
    }

    pub fn member(&self, i: usize) -> Member<'_> {
        let (z, r) = self.reg_row(i);
        Member {
            y: self.data.y()[i],
            z,
            r,
        }
    }

    /// Regression design of a standardized query row.
    pub fn reg_query(&self, x_std: &[Option<f64>]) -> (Vec<f64>, Vec<bool>) {
        self.reg_cols
            .iter()
            .map(|&j| match x_std[j] {
                Some(v) => (v, true),
                None => (f64::NAN, false),
            })
            .unzip()
    }
}

/// One retained state. Clusters are ordered by first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    pub partition: Partition,
    pub params: Vec<ClusterParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub model: ModelKind,
    pub draws: Vec<Draw>,
    pub acceptance: Acceptance,
    pub step_sizes: StepSizes,
    pub elapsed_secs: f64,
}

struct Cluster {
    params: ClusterParams,
    dl: Option<DLState>,
    stats: ClusterStats,
}

pub struct ChainState {
    partition: Partition,
    clusters: Vec<Cluster>,
}

impl ChainState {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn params(&self) -> Vec<ClusterParams> {
        self.clusters.iter().map(|c| c.params.clone()).collect()
    }

    fn canonical(&self, iteration: usize) -> Draw {
        let order = self.partition.canonical_order();
        Draw {
            iteration,
            partition: crate::partition::normalize_labels(&self.partition),
            params: order.iter().map(|&k| self.clusters[k].params.clone()).collect(),
        }
    }
}

/// Shared, read-only context for one chain.
pub struct Sampler<'a> {
    prep: &'a Prepared,
    model: &'a ModelConfig,
    mcmc: &'a McmcConfig,
    empty_stats: ClusterStats,
    pub step: StepSizes,
}

impl<'a> Sampler<'a> {
    pub fn new(prep: &'a Prepared, model: &'a ModelConfig, mcmc: &'a McmcConfig) -> Self {
        Self {
            prep,
            model,
            mcmc,
            empty_stats: ClusterStats::empty(&prep.data, &model.similarity),
            step: StepSizes::new(prep.n_reg()),
        }
    }

    fn prior_draw(&self, rng: &mut StreamRng) -> (ClusterParams, Option<DLState>) {
        match self.mcmc.model {
            ModelKind::VDReg => (self.model.priors.vdreg.sample(rng), None),
            ModelKind::VDLReg => {
                let (t, dl) = self.model.priors.vdlreg.sample(self.prep.n_reg(), rng);
                (t, Some(dl))
            }
        }
    }

    #[inline]
    fn loglik(&self, i: usize, theta: &ClusterParams) -> f64 {
        if !self.mcmc.use_likelihood {
            return 0.0;
        }
        match self.mcmc.model {
            ModelKind::VDReg => vdreg_loglik(self.prep.data.y()[i], theta),
            ModelKind::VDLReg => {
                let (z, r) = self.prep.reg_row(i);
                vdlreg_loglik(self.prep.data.y()[i], z, r, theta)
            }
        }
    }

    /// All units in one cluster with parameters from the prior followed by a
    /// conditional update.
    pub fn initial_state(&mut self, rng: &mut StreamRng) -> ChainState {
        let n = self.prep.n();
        let all: Vec<usize> = (0..n).collect();
        let (params, dl) = self.prior_draw(rng);
        let mut state = ChainState {
            partition: Partition::one_cluster(n),
            clusters: vec![Cluster {
                params,
                dl,
                stats: ClusterStats::from_members(&self.prep.data, &all, &self.model.similarity),
            }],
        };
        self.update_params(&mut state, rng);
        state
    }

    /// One allocation scan over all units.
    pub fn allocation_sweep(&self, state: &mut ChainState, rng: &mut StreamRng) {
        let d = &self.prep.data;
        let sim = &self.model.similarity;
        let mut weights: Vec<f64> = Vec::new();
        for i in 0..self.prep.n() {
            let mut aux = self.detach_unit(state, i, rng);
            let n_clusters = state.clusters.len();
            self.candidate_log_weights(state, i, &aux, &mut weights);

            let choice = sample_log_weights(&weights, rng);
            if choice < n_clusters {
                state.partition.assign(i, choice);
                state.clusters[choice].stats.add_unit(d, i, sim);
            } else {
                let (params, dl) = aux.swap_remove(choice - n_clusters);
                let mut stats = self.empty_stats.clone();
                stats.add_unit(d, i, sim);
                state.partition.assign(i, n_clusters);
                state.clusters.push(Cluster { params, dl, stats });
            }
        }
    }

    /// Log allocation weights for detached unit `i`: existing clusters first,
    /// then one entry per auxiliary empty cluster.
    pub fn candidate_log_weights(
        &self,
        state: &ChainState,
        i: usize,
        aux: &[(ClusterParams, Option<DLState>)],
        weights: &mut Vec<f64>,
    ) {
        let d = &self.prep.data;
        let sim = &self.model.similarity;
        weights.clear();
        for (c, cluster) in state.clusters.iter().enumerate() {
            let size = state.partition.size(c) as f64;
            weights.push(
                size.ln() + cluster.stats.log_ratio_unit(d, i, sim) + self.loglik(i, &cluster.params),
            );
        }
        let log_aux_mass = (self.model.cohesion.mass / aux.len() as f64).ln();
        let singleton = self.empty_stats.log_ratio_unit(d, i, sim);
        for (theta, _) in aux {
            weights.push(log_aux_mass + singleton + self.loglik(i, theta));
        }
    }

    /// Chain state for a given partition with parameters drawn from the prior.
    pub fn state_from_partition(&self, partition: Partition, rng: &mut StreamRng) -> ChainState {
        let clusters = (0..partition.n_clusters())
            .map(|k| {
                let (params, dl) = self.prior_draw(rng);
                Cluster {
                    params,
                    dl,
                    stats: ClusterStats::from_members(&self.prep.data, partition.members(k), &self.model.similarity),
                }
            })
            .collect();
        ChainState { partition, clusters }
    }

    /// Detaches unit `i` and returns the auxiliary candidates the scan would
    /// offer it.
    pub fn detach_unit(
        &self,
        state: &mut ChainState,
        i: usize,
        rng: &mut StreamRng,
    ) -> Vec<(ClusterParams, Option<DLState>)> {
        let k = state.partition.label(i);
        state.clusters[k].stats.remove_unit(&self.prep.data, i, &self.model.similarity);
        let mut aux = Vec::with_capacity(self.mcmc.n_aux);
        if let Some((removed, _)) = state.partition.detach(i) {
            let c = state.clusters.swap_remove(removed);
            aux.push((c.params, c.dl));
        }
        while aux.len() < self.mcmc.n_aux {
            aux.push(self.prior_draw(rng));
        }
        aux
    }

    /// Parameter (and shrinkage) updates for every cluster.
    pub fn update_params(&self, state: &mut ChainState, rng: &mut StreamRng) -> Acceptance {
        let mut acc = Acceptance::new(self.prep.n_reg());
        for (k, cluster) in state.clusters.iter_mut().enumerate() {
            let members = state.partition.members(k);
            match self.mcmc.model {
                ModelKind::VDReg => {
                    let ys: Vec<f64> = if self.mcmc.use_likelihood {
                        members.iter().map(|&i| self.prep.data.y()[i]).collect()
                    } else {
                        Vec::new()
                    };
                    cluster.params = sample_vdreg_params(&ys, &self.model.priors.vdreg, rng);
                }
                ModelKind::VDLReg => {
                    let dl = cluster.dl.as_ref().expect("local regression clusters carry DL state");
                    let ms: Vec<Member> = if self.mcmc.use_likelihood {
                        members.iter().map(|&i| self.prep.member(i)).collect()
                    } else {
                        Vec::new()
                    };
                    let (params, a) = sample_vdlreg_params(
                        &ms,
                        &cluster.params,
                        dl,
                        &self.model.priors.vdlreg,
                        &self.step,
                        rng,
                    );
                    acc.merge(&a);
                    cluster.dl = Some(update_dl_state(&params.beta, dl, rng));
                    cluster.params = params;
                }
            }
        }
        acc
    }
}

/// Draws an index with probability proportional to `exp(w)`.
pub fn sample_log_weights<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = w.iter().map(|x| (x - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, x) in w.iter().enumerate() {
        u -= (x - max).exp();
        if u <= 0.0 {
            return k;
        }
    }
    w.len() - 1
}

/// Runs one chain; deterministic given `mcmc.seed`.
pub fn run_chain(prep: &Prepared, model: &ModelConfig, mcmc: &McmcConfig) -> Result<PosteriorDraws> {
    mcmc.validate()?;
    if prep.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let start = Instant::now();
    let mut rng = rng::stream(mcmc.seed, "chain", 0);
    let mut sampler = Sampler::new(prep, model, mcmc);
    let mut state = sampler.initial_state(&mut rng);
    let mut draws = Vec::with_capacity(mcmc.n_draws());
    let mut acceptance = Acceptance::new(prep.n_reg());
    for t in 1..=mcmc.iterations {
        sampler.allocation_sweep(&mut state, &mut rng);
        let acc = sampler.update_params(&mut state, &mut rng);
        if t <= mcmc.burn_in {
            sampler.step.adapt(&acc, t);
        } else {
            acceptance.merge(&acc);
            if (t - mcmc.burn_in) % mcmc.thin == 0 {
                draws.push(state.canonical(t));
            }
        }
    }
    Ok(PosteriorDraws {
        model: mcmc.model,
        draws,
        acceptance,
        step_sizes: sampler.step,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Standardization;

    fn toy(rows: Vec<Vec<Option<f64>>>, y: Vec<f64>) -> Prepared {
        let p = rows[0].len();
        let d = Dataset::new(
            (0..p).map(|j| format!("x{j}")).collect(),
            "y",
            vec![CovariateKind::Continuous; p],
            &rows,
            y,
        )
        .unwrap();
        Prepared::with_standardization(&d, Standardization::identity(p))
    }

    #[test]
    fn config_validation() {
        let mut c = McmcConfig::default();
        assert_eq!(c.n_draws(), 800);
        c.burn_in = c.iterations;
        assert!(c.validate().is_err());
        let c = McmcConfig { thin: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_preserves_bookkeeping() {
        let rows: Vec<Vec<Option<f64>>> = (0..30)
            .map(|i| vec![if i % 4 == 0 { None } else { Some((i as f64 * 0.37).sin()) }])
            .collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.11).cos()).collect();
        let prep = toy(rows, y);
        for model in [ModelKind::VDReg, ModelKind::VDLReg] {
            let mcmc = McmcConfig { model, ..Default::default() };
            let cfg = ModelConfig::defaults_for(prep.data.kinds());
            let mut s = Sampler::new(&prep, &cfg, &mcmc);
            let mut rng = rng::stream(3, "test", 0);
            let mut state = s.initial_state(&mut rng);
            for _ in 0..50 {
                s.allocation_sweep(&mut state, &mut rng);
                s.update_params(&mut state, &mut rng);
                assert!(state.partition.is_valid());
                assert_eq!(state.partition.sizes().iter().sum::<usize>(), 30);
                assert_eq!(state.clusters.len(), state.partition.n_clusters());
                for (k, c) in state.clusters.iter().enumerate() {
                    let fresh = ClusterStats::from_members(&prep.data, state.partition.members(k), &cfg.similarity);
                    assert!((fresh.log_score() - c.stats.log_score()).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn crp_limit_weights_are_exact() {
        // Every covariate missing and the likelihood off: existing clusters
        // get weight |C_k|, the auxiliary slots share M.
        let n = 6;
        let prep = toy(vec![vec![None]; n], vec![0.0; n]);
        let mut cfg = ModelConfig::defaults_for(prep.data.kinds());
        cfg.cohesion.mass = 1.5;
        let mcmc = McmcConfig { use_likelihood: false, n_aux: 3, ..Default::default() };
        let s = Sampler::new(&prep, &cfg, &mcmc);
        let mut rng = rng::stream(1, "test", 0);
        let mut state = s.state_from_partition(Partition::from_labels(&[0, 0, 1, 1, 1, 2]), &mut rng);
        let aux = s.detach_unit(&mut state, 5, &mut rng);
        let mut w = Vec::new();
        s.candidate_log_weights(&state, 5, &aux, &mut w);
        let total: f64 = w.iter().map(|x| x.exp()).sum();
        let probs: Vec<f64> = w.iter().map(|x| x.exp() / total).collect();
        assert_eq!(probs.len(), 5);
        assert!((probs[0] - 2.0 / 6.5).abs() < 1e-15);
        assert!((probs[1] - 3.0 / 6.5).abs() < 1e-15);
        assert!((probs[2..].iter().sum::<f64>() - 1.5 / 6.5).abs() < 1e-15);
    }

    #[test]
    fn single_move_frequencies_match_conditional() {
        // Frozen two-unit system, likelihood off: unit 1 joins unit 0 with
        // probability  g(x0, x1) / g(x0) / (that + M g(x1)).
        let prep = toy(vec![vec![Some(0.2)], vec![Some(0.5)]], vec![0.0, 0.0]);
        let cfg = ModelConfig::defaults_for(prep.data.kinds());
        let mcmc = McmcConfig { use_likelihood: false, ..Default::default() };
        let s = Sampler::new(&prep, &cfg, &mcmc);
        let h = crate::similarity::GaussianHyper::default();
        let g = |v: &[f64]| crate::similarity::log_marginal_gaussian(v, &h).unwrap().exp();
        let join = g(&[0.2, 0.5]) / g(&[0.2]);
        let p_join = join / (join + g(&[0.5]));
        let mut rng = rng::stream(2, "test", 0);
        let trials = 100_000;
        let mut joined = 0;
        for _ in 0..trials {
            let mut state = s.state_from_partition(Partition::singletons(2), &mut rng);
            let aux = s.detach_unit(&mut state, 1, &mut rng);
            let mut w = Vec::new();
            s.candidate_log_weights(&state, 1, &aux, &mut w);
            if sample_log_weights(&w, &mut rng) == 0 {
                joined += 1;
            }
        }
        let freq = joined as f64 / trials as f64;
        let se = (p_join * (1.0 - p_join) / trials as f64).sqrt();
        assert!((freq - p_join).abs() < 3.0 * se, "{freq} vs {p_join}");
    }

    #[test]
    fn identical_units_tend_to_cocluster() {
        // Two identical units, peaked similarity: exact 2-partition posterior.
        let prep = toy(vec![vec![Some(0.0), Some(0.0)], vec![Some(0.0), Some(0.0)]], vec![0.3, 0.3]);
        let mut cfg = ModelConfig::defaults_for(prep.data.kinds());
        let peaked = crate::similarity::GaussianHyper { a: 2.0, b: 0.01, c: 1.0 };
        cfg.similarity = SimilarityConfig::new(prep.data.kinds(), peaked, Default::default(), Default::default()).unwrap();
        let mcmc = McmcConfig { iterations: 20_000, burn_in: 100, thin: 1, ..Default::default() };
        let draws = run_chain(&prep, &cfg, &mcmc).unwrap();
        let together = draws.draws.iter().filter(|d| d.partition.n_clusters() == 1).count();
        assert!(together as f64 / draws.draws.len() as f64 > 0.5);
    }

    #[test]
    fn same_seed_same_draws() {
        let rows: Vec<Vec<Option<f64>>> = (0..12).map(|i| vec![Some(i as f64 / 4.0), None]).collect();
        let y: Vec<f64> = (0..12).map(|i| (i as f64).sqrt()).collect();
        let prep = toy(rows, y);
        let cfg = ModelConfig::defaults_for(prep.data.kinds());
        let mcmc = McmcConfig { iterations: 300, burn_in: 100, thin: 2, model: ModelKind::VDLReg, seed: 42, ..Default::default() };
        let a = run_chain(&prep, &cfg, &mcmc).unwrap();
        let b = run_chain(&prep, &cfg, &mcmc).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.draws.len(), 100);
        let c = run_chain(&prep, &cfg, &McmcConfig { seed: 43, ..mcmc }).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn log_weight_sampling_frequencies() {
        let w = [0.0, 1.0f64.ln(), 2f64.ln()];
        let mut rng = rng::stream(1, "w", 0);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[sample_log_weights(&w, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip([0.25, 0.25, 0.5]) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 4.0 * se);
        }
    }
}
