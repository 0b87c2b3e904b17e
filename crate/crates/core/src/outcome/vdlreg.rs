//! Markov kernel for the projected local regression parameters of one cluster.
//!
//! When every member reports every regression covariate the full conditionals
//! are conjugate: `(μ, β) | σ²` is Gaussian and `σ² | μ, β` is inverse gamma.
//! Otherwise the projected variance `σ² + Σ_miss β_j²` couples the slopes to
//! the variance, so `μ` keeps its Gaussian conditional while each `β_j` and
//! `log σ²` get a random-walk Metropolis step.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dl::DLState;
use super::ClusterParams;
use crate::similarity::normal_log_density;

/// `μ ~ N(m0, v0)`, `σ² ~ IG(a0, b0)`, slopes Dirichlet–Laplace with
/// concentration `dl_a` (`None` means `1 / p`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdlregPrior {
    pub m0: f64,
    pub v0: f64,
    pub a0: f64,
    pub b0: f64,
    pub dl_a: Option<f64>,
}

impl Default for VdlregPrior {
    fn default() -> Self {
        Self {
            m0: 0.0,
            v0: 1.0,
            a0: 2.0,
            b0: 1.0,
            dl_a: None,
        }
    }
}

impl VdlregPrior {
    pub fn dl_concentration(&self, p: usize) -> f64 {
        self.dl_a.unwrap_or(1.0 / p.max(1) as f64)
    }

    pub fn sample<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> (ClusterParams, DLState) {
        let dl = DLState::sample_prior(p, self.dl_concentration(p), rng);
        let beta = dl
            .slope_variances()
            .iter()
            .map(|v| v.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mu = self.m0 + self.v0.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let sigma2 = sample_inv_gamma(self.a0, self.b0, rng);
        (ClusterParams { mu, beta, sigma2 }, dl)
    }
}

pub(crate) fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    1.0 / Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(rng)
}

fn log_inv_gamma(x: f64, shape: f64, rate: f64) -> f64 {
    -(shape + 1.0) * x.ln() - rate / x
}

/// One unit's response with standardized regression covariates; `z[j]` is
/// only read where `r[j]` is true.
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub y: f64,
    pub z: &'a [f64],
    pub r: &'a [bool],
}

/// Random-walk proposal scales for the slopes and for `log σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub beta: Vec<f64>,
    pub log_sigma2: f64,
}

impl StepSizes {
    pub fn new(p: usize) -> Self {
        Self {
            beta: vec![0.3; p],
            log_sigma2: 0.5,
        }
    }

    /// Robbins–Monro step towards 0.44 acceptance using the acceptances from
    /// one sweep; `t` is the 1-based adaptation round.
    pub fn adapt(&mut self, acc: &Acceptance, t: usize) {
        const TARGET: f64 = 0.44;
        let gain = (t as f64).powf(-0.6);
        for (s, &(a, n)) in self.beta.iter_mut().zip(&acc.beta) {
            if n > 0 {
                let rate = a as f64 / n as f64;
                *s = (s.ln() + gain * (rate - TARGET)).exp().clamp(1e-4, 1e2);
            }
        }
        let (a, n) = acc.sigma2;
        if n > 0 {
            let rate = a as f64 / n as f64;
            self.log_sigma2 = (self.log_sigma2.ln() + gain * (rate - TARGET)).exp().clamp(1e-4, 1e2);
        }
    }
}

/// Accepted/proposed counts per slope and for the variance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub beta: Vec<(u64, u64)>,
    pub sigma2: (u64, u64),
}

impl Acceptance {
    pub fn new(p: usize) -> Self {
        Self {
            beta: vec![(0, 0); p],
            sigma2: (0, 0),
        }
    }

    pub fn merge(&mut self, other: &Acceptance) {
        for (a, b) in self.beta.iter_mut().zip(&other.beta) {
            a.0 += b.0;
            a.1 += b.1;
        }
        self.sigma2.0 += other.sigma2.0;
        self.sigma2.1 += other.sigma2.1;
    }

    pub fn rates(&self) -> (Vec<Option<f64>>, Option<f64>) {
        let rate = |(a, n): (u64, u64)| (n > 0).then(|| a as f64 / n as f64);
        (self.beta.iter().map(|&c| rate(c)).collect(), rate(self.sigma2))
    }
}

/// One sweep of the kernel described in the module docs. `step` is only used
/// when some member has an unreported regression covariate.
pub fn sample_vdlreg_params<R: Rng + ?Sized>(
    members: &[Member<'_>],
    current: &ClusterParams,
    dl: &DLState,
    prior: &VdlregPrior,
    step: &StepSizes,
    rng: &mut R,
) -> (ClusterParams, Acceptance) {
    let p = current.beta.len();
    let slope_var = dl.slope_variances();
    let complete = members.iter().all(|m| m.r.iter().all(|&r| r));
    if complete {
        let mut theta = conjugate_coefficients(members, current.sigma2, &slope_var, prior, rng);
        let rss: f64 = members
            .iter()
            .map(|m| {
                let fit = theta.mu + theta.beta.iter().zip(m.z).map(|(b, z)| b * z).sum::<f64>();
                (m.y - fit).powi(2)
            })
            .sum();
        theta.sigma2 = sample_inv_gamma(
            prior.a0 + 0.5 * members.len() as f64,
            prior.b0 + 0.5 * rss,
            rng,
        );
        return (theta, Acceptance::new(p));
    }

    let mut acc = Acceptance::new(p);
    let mut theta = current.clone();
    // Slope contributions to each member's mean and projected variance.
    let mut mean_part: Vec<f64> = vec![0.0; members.len()];
    let mut var_part: Vec<f64> = vec![0.0; members.len()];
    for (i, m) in members.iter().enumerate() {
        for j in 0..p {
            if m.r[j] {
                mean_part[i] += theta.beta[j] * m.z[j];
            } else {
                var_part[i] += theta.beta[j] * theta.beta[j];
            }
        }
    }

    // μ | β, σ² is Gaussian with per-member precisions 1 / V_i.
    let mut prec = 1.0 / prior.v0;
    let mut lin = prior.m0 / prior.v0;
    for (i, m) in members.iter().enumerate() {
        let v = theta.sigma2 + var_part[i];
        prec += 1.0 / v;
        lin += (m.y - mean_part[i]) / v;
    }
    theta.mu = lin / prec + rng.sample::<f64, _>(StandardNormal) / prec.sqrt();

    let loglik = |mean_part: &[f64], var_part: &[f64], mu: f64, s2: f64| -> f64 {
        members
            .iter()
            .enumerate()
            .map(|(i, m)| normal_log_density(m.y, mu + mean_part[i], s2 + var_part[i]))
            .sum()
    };

    let mut current_ll = loglik(&mean_part, &var_part, theta.mu, theta.sigma2);
    let mut prop_mean = mean_part.clone();
    let mut prop_var = var_part.clone();
    for j in 0..p {
        let old = theta.beta[j];
        let new = old + step.beta[j] * rng.sample::<f64, _>(StandardNormal);
        for (i, m) in members.iter().enumerate() {
            if m.r[j] {
                prop_mean[i] = mean_part[i] + (new - old) * m.z[j];
                prop_var[i] = var_part[i];
            } else {
                prop_mean[i] = mean_part[i];
                prop_var[i] = var_part[i] + new * new - old * old;
            }
        }
        let prop_ll = loglik(&prop_mean, &prop_var, theta.mu, theta.sigma2);
        let log_ratio = prop_ll - current_ll + (old * old - new * new) / (2.0 * slope_var[j]);
        acc.beta[j].1 += 1;
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            theta.beta[j] = new;
            mean_part.copy_from_slice(&prop_mean);
            var_part.copy_from_slice(&prop_var);
            current_ll = prop_ll;
            acc.beta[j].0 += 1;
        }
    }

    // Random walk on log σ²; the Jacobian contributes log σ².
    let old = theta.sigma2;
    let new = old * (step.log_sigma2 * rng.sample::<f64, _>(StandardNormal)).exp();
    let prop_ll = loglik(&mean_part, &var_part, theta.mu, new);
    let log_ratio = prop_ll - current_ll + log_inv_gamma(new, prior.a0, prior.b0)
        - log_inv_gamma(old, prior.a0, prior.b0)
        + new.ln()
        - old.ln();
    acc.sigma2.1 += 1;
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        theta.sigma2 = new;
        acc.sigma2.0 += 1;
    }
    (theta, acc)
}

/// Gaussian draw of `(μ, β)` given `σ²` for fully observed members.
pub(crate) fn conjugate_coefficients<R: Rng + ?Sized>(
    members: &[Member<'_>],
    sigma2: f64,
    slope_var: &[f64],
    prior: &VdlregPrior,
    rng: &mut R,
) -> ClusterParams {
    let (precision, rhs) = conjugate_system(members, sigma2, slope_var, prior);
    let q = rhs.len();
    let chol = precision
        .cholesky()
        .expect("posterior precision is positive definite");
    let mean = chol.solve(&rhs);
    let eps = DVector::from_iterator(q, (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&eps)
        .expect("triangular factor is nonsingular");
    let coef = mean + noise;
    ClusterParams {
        mu: coef[0],
        beta: coef.iter().skip(1).copied().collect(),
        sigma2,
    }
}

/// Posterior precision and `precision * mean` of `(μ, β) | σ²`.
pub(crate) fn conjugate_system(
    members: &[Member<'_>],
    sigma2: f64,
    slope_var: &[f64],
    prior: &VdlregPrior,
) -> (DMatrix<f64>, DVector<f64>) {
    let q = slope_var.len() + 1;
    let mut precision = DMatrix::<f64>::zeros(q, q);
    let mut rhs = DVector::<f64>::zeros(q);
    precision[(0, 0)] = 1.0 / prior.v0;
    rhs[0] = prior.m0 / prior.v0;
    for (j, v) in slope_var.iter().enumerate() {
        precision[(j + 1, j + 1)] = 1.0 / v;
    }
    let mut row = vec![0.0; q];
    for m in members {
        row[0] = 1.0;
        row[1..].copy_from_slice(&m.z[..q - 1]);
        for a in 0..q {
            rhs[a] += row[a] * m.y / sigma2;
            for b in 0..q {
                precision[(a, b)] += row[a] * row[b] / sigma2;
            }
        }
    }
    (precision, rhs)
}
