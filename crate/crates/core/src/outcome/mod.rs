//! Cluster-specific outcome models.
//!
//! * VDReg: `y ~ N(μ_k, σ²_k)` with a Normal–Inverse-Gamma prior.
//! * VDLReg: local linear regression on standardized covariates in which
//!   unreported covariates are integrated out under their `N(0, 1)`
//!   auxiliary law, giving `y ~ N(μ_k + Σ_obs β_kj z_j, σ²_k + Σ_miss β²_kj)`.

pub mod dl;
pub mod gig;
mod vdlreg;
mod vdreg;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::similarity::normal_log_density;

pub use dl::{update_dl_state, DLState};
pub use vdlreg::{
    sample_vdlreg_params, Acceptance, Member, StepSizes, VdlregPrior,
};
pub use vdreg::{sample_vdreg_params, NigPrior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    VDReg,
    VDLReg,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vdreg" => Some(Self::VDReg),
            "vdlreg" => Some(Self::VDLReg),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::VDReg => "vdreg",
            Self::VDLReg => "vdlreg",
        }
    }
}

/// Outcome parameters of one cluster. `beta` is empty for VDReg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub mu: f64,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct OutcomePriors {
    pub vdreg: NigPrior,
    pub vdlreg: VdlregPrior,
}

pub fn vdreg_loglik(y: f64, theta: &ClusterParams) -> f64 {
    normal_log_density(y, theta.mu, theta.sigma2)
}

/// Mean and variance of the projected local regression for one unit.
#[inline]
pub fn vdlreg_moments(z: &[f64], r: &[bool], theta: &ClusterParams) -> (f64, f64) {
    let mut m = theta.mu;
    let mut v = theta.sigma2;
    for ((&zj, &rj), &b) in z.iter().zip(r).zip(&theta.beta) {
        if rj {
            m += b * zj;
        } else {
            v += b * b;
        }
    }
    (m, v)
}

/// `log N(y; m, V)`; entries of `z` with `r = false` are never read.
pub fn vdlreg_loglik(y: f64, z: &[f64], r: &[bool], theta: &ClusterParams) -> f64 {
    let (m, v) = vdlreg_moments(z, r, theta);
    normal_log_density(y, m, v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionCheck {
    pub closed_form: f64,
    pub mc_estimate: f64,
    /// Standard error of `mc_estimate`; zero when nothing is integrated.
    pub mc_std_error: f64,
}

/// Closed-form projected likelihood next to a Monte-Carlo average of the full
/// conditional density over standard-normal draws of the missing covariates.
pub fn projection_identity_check(
    theta: &ClusterParams,
    r: &[bool],
    z_obs: &[f64],
    y: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<ProjectionCheck> {
    if mc_samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "projection check needs at least 1000 draws, got {mc_samples}"
        )));
    }
    let closed_form = vdlreg_loglik(y, z_obs, r, theta).exp();
    let observed_mean: f64 = theta.mu
        + z_obs
            .iter()
            .zip(r)
            .zip(&theta.beta)
            .filter(|((_, &rj), _)| rj)
            .map(|((z, _), b)| b * z)
            .sum::<f64>();
    let missing: Vec<f64> = r
        .iter()
        .zip(&theta.beta)
        .filter(|(&rj, _)| !rj)
        .map(|(_, &b)| b)
        .collect();
    if missing.is_empty() {
        let v = normal_log_density(y, observed_mean, theta.sigma2).exp();
        return Ok(ProjectionCheck {
            closed_form,
            mc_estimate: v,
            mc_std_error: 0.0,
        });
    }
    let mut rng = rng::stream(seed, "projection", 0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..mc_samples {
        let mut m = observed_mean;
        for &b in &missing {
            let zt: f64 = rng.sample(StandardNormal);
            m += b * zt;
        }
        let f = normal_log_density(y, m, theta.sigma2).exp();
        s1 += f;
        s2 += f * f;
    }
    let n = mc_samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(ProjectionCheck {
        closed_form,
        mc_estimate: mean,
        mc_std_error: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn theta(mu: f64, beta: Vec<f64>, sigma2: f64) -> ClusterParams {
        ClusterParams { mu, beta, sigma2 }
    }

    #[test]
    fn vdreg_density_values() {
        let t = theta(0.7, vec![], 1.0);
        assert!((vdreg_loglik(0.7, &t) + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        assert!((vdreg_loglik(1.7, &t) + 0.5 * (2.0 * PI).ln() + 0.5).abs() < 1e-15);
        // Direct density evaluation, not through the log form.
        let t = theta(-1.3, vec![], 2.2);
        let y = 0.4f64;
        let direct = (-(y + 1.3).powi(2) / (2.0 * 2.2)).exp() / (2.0 * PI * 2.2).sqrt();
        assert!((vdreg_loglik(y, &t) - direct.ln()).abs() < 1e-12);
    }

    #[test]
    fn vdlreg_mask_extremes() {
        let t = theta(0.5, vec![1.0, -2.0, 0.5], 0.8);
        let z = [0.3, 1.0, -1.0];
        let (m, v) = vdlreg_moments(&z, &[true; 3], &t);
        assert_eq!(v, 0.8);
        assert!((m - (0.5 + 0.3 - 2.0 - 0.5)).abs() < 1e-15);
        let nan = [f64::NAN; 3];
        let (m, v) = vdlreg_moments(&nan, &[false; 3], &t);
        assert_eq!(m, 0.5);
        assert!((v - (0.8 + 1.0 + 4.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn worked_projection_example() {
        let t = theta(0.0, vec![1.0, 2.0], 1.0);
        let got = vdlreg_loglik(0.0, &[0.5, f64::NAN], &[true, false], &t);
        assert!((got - normal_log_density(0.0, 0.5, 5.0)).abs() < 1e-15);
        let chk = projection_identity_check(&t, &[true, false], &[0.5, f64::NAN], 0.0, 1_000_000, 1)
            .unwrap();
        assert!((chk.mc_estimate - chk.closed_form).abs() < 3.0 * chk.mc_std_error);
    }

    #[test]
    fn projection_degenerate_cases() {
        let t = theta(0.2, vec![1.0, 2.0], 1.5);
        let c = projection_identity_check(&t, &[true, true], &[0.1, -0.3], 1.0, 1000, 2).unwrap();
        assert!((c.mc_estimate - c.closed_form).abs() < 1e-14 * c.closed_form);
        let t0 = theta(0.2, vec![0.0, 0.0], 1.5);
        let c = projection_identity_check(&t0, &[false, true], &[f64::NAN, -0.3], 1.0, 5000, 2)
            .unwrap();
        assert!((c.mc_estimate - c.closed_form).abs() < 1e-12 * c.closed_form);
        assert!(c.mc_std_error < 1e-9 * c.closed_form);
        assert!(projection_identity_check(&t, &[true, true], &[0.0, 0.0], 0.0, 999, 0).is_err());
    }

    proptest! {
        #[test]
        fn variance_grows_as_covariates_go_missing(
            beta in prop::collection::vec(-3.0f64..3.0, 1..6),
            mu in -2.0f64..2.0, s2 in 0.01f64..4.0, seed in 0u64..10_000,
        ) {
            let p = beta.len();
            let t = theta(mu, beta, s2);
            let z: Vec<f64> = (0..p).map(|j| ((seed + j as u64) as f64).sin()).collect();
            let mut r = vec![true; p];
            let mut prev = vdlreg_moments(&z, &r, &t).1;
            for j in 0..p {
                r[(j + seed as usize) % p] = false;
                let v = vdlreg_moments(&z, &r, &t).1;
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn zero_slopes_reduce_to_vdreg(
            p in 1usize..6, mu in -2.0f64..2.0, s2 in 0.01f64..4.0,
            y in -5.0f64..5.0, mask in prop::collection::vec(any::<bool>(), 6),
        ) {
            let t = theta(mu, vec![0.0; p], s2);
            let z = vec![0.7; p];
            prop_assert!((vdlreg_loglik(y, &z, &mask[..p], &t) - vdreg_loglik(y, &t)).abs() < 1e-14);
        }
    }
}
