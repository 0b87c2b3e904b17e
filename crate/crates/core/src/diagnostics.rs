//! Trace summaries and effective sample sizes for retained draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ess {
    Estimate(f64),
    /// Zero-variance trace; no autocorrelation estimate exists.
    Degenerate,
}

fn autocov(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum::<f64>() / n as f64
}

/// Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(trace: &[f64]) -> Ess {
    let n = trace.len();
    if n < 2 {
        return Ess::Degenerate;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let g0 = autocov(trace, mean, 0);
    if !(g0 > 1e-300 * mean.abs().max(1.0)) {
        return Ess::Degenerate;
    }
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocov(trace, mean, 2 * k) + autocov(trace, mean, 2 * k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    Ess::Estimate(n as f64 / tau.max(1.0 / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub ess: Option<f64>,
    pub warning: Option<String>,
}

fn summarize(name: &str, trace: &[f64]) -> TraceSummary {
    let n = trace.len() as f64;
    let mean = trace.iter().sum::<f64>() / n;
    let sd = (trace.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let (ess, warning) = match effective_sample_size(trace) {
        Ess::Estimate(e) => (Some(e), None),
        Ess::Degenerate => (None, Some(format!("trace `{name}` is constant; ESS undefined"))),
    };
    TraceSummary {
        name: name.to_string(),
        mean,
        sd,
        ess,
        warning,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub model: String,
    pub n_draws: usize,
    pub traces: Vec<TraceSummary>,
    pub acceptance_beta: Vec<Option<f64>>,
    pub acceptance_sigma2: Option<f64>,
    pub step_beta: Vec<f64>,
    pub step_log_sigma2: f64,
}

pub fn k_trace(draws: &PosteriorDraws) -> Vec<f64> {
    draws.draws.iter().map(|d| d.partition.n_clusters() as f64).collect()
}

pub fn diagnostics(draws: &PosteriorDraws) -> Result<Diagnostics> {
    if draws.draws.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "diagnostics need at least 10 draws, got {}",
            draws.draws.len()
        )));
    }
    let ks = k_trace(draws);
    let s2: Vec<f64> = draws
        .draws
        .iter()
        .map(|d| d.params.iter().map(|p| p.sigma2).sum::<f64>() / d.params.len() as f64)
        .collect();
    let (acceptance_beta, acceptance_sigma2) = draws.acceptance.rates();
    Ok(Diagnostics {
        model: draws.model.name().to_string(),
        n_draws: draws.draws.len(),
        traces: vec![summarize("n_clusters", &ks), summarize("mean_sigma2", &s2)],
        acceptance_beta,
        acceptance_sigma2,
        step_beta: draws.step_sizes.beta.clone(),
        step_log_sigma2: draws.step_sizes.log_sigma2,
    })
}
