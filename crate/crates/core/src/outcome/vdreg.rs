use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::ClusterParams;

/// `μ | σ² ~ N(m0, σ² / κ0)`, `σ² ~ IG(a0, b0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigPrior {
    pub m0: f64,
    pub kappa0: f64,
    pub a0: f64,
    pub b0: f64,
}

impl Default for NigPrior {
    fn default() -> Self {
        Self {
            m0: 0.0,
            kappa0: 0.1,
            a0: 2.0,
            b0: 1.0,
        }
    }
}

impl NigPrior {
    /// Conjugate update given responses `y`.
    pub fn posterior(&self, y: &[f64]) -> NigPrior {
        let n = y.len() as f64;
        if y.is_empty() {
            return *self;
        }
        let ybar = y.iter().sum::<f64>() / n;
        let ss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
        let kn = self.kappa0 + n;
        NigPrior {
            m0: (self.kappa0 * self.m0 + n * ybar) / kn,
            kappa0: kn,
            a0: self.a0 + 0.5 * n,
            b0: self.b0 + 0.5 * (ss + self.kappa0 * n * (ybar - self.m0).powi(2) / kn),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ClusterParams {
        let prec = Gamma::new(self.a0, 1.0 / self.b0)
            .expect("valid gamma")
            .sample(rng);
        let sigma2 = 1.0 / prec;
        let z: f64 = rng.sample(StandardNormal);
        ClusterParams {
            mu: self.m0 + z * (sigma2 / self.kappa0).sqrt(),
            beta: Vec::new(),
            sigma2,
        }
    }

    /// Log density of the predictive Student-t for one new response.
    pub fn log_predictive(&self, y: f64) -> f64 {
        let nu = 2.0 * self.a0;
        let scale2 = self.b0 * (self.kappa0 + 1.0) / (self.a0 * self.kappa0);
        let t = (y - self.m0).powi(2) / scale2;
        ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI * scale2).ln()
            - 0.5 * (nu + 1.0) * (1.0 + t / nu).ln()
    }
}

/// Exact draw from the Normal–Inverse-Gamma full conditional of `(μ, σ²)`.
pub fn sample_vdreg_params<R: Rng + ?Sized>(y: &[f64], prior: &NigPrior, rng: &mut R) -> ClusterParams {
    prior.posterior(y).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn huge_kappa_pins_mean() {
        let prior = NigPrior {
            m0: 1.25,
            kappa0: 1e12,
            ..Default::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t = sample_vdreg_params(&[10.0, -4.0], &prior, &mut rng);
            assert!((t.mu - 1.25).abs() < 1e-4);
        }
    }

    #[test]
    fn draws_match_posterior_moments() {
        let prior = NigPrior::default();
        let y = [0.4, 1.1, 0.9, 1.6];
        // Independent posterior moments: E[mu] = (k0 m0 + sum y)/(k0 + n),
        // E[s2] = bn/(an-1), Var[mu] = E[s2]/kn.
        let n = y.len() as f64;
        let kn = 0.1 + n;
        let ybar = y.iter().sum::<f64>() / n;
        let mean_mu = n * ybar / kn;
        let ss: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
        let an = 2.0 + n / 2.0;
        let bn = 1.0 + 0.5 * (ss + 0.1 * n * ybar * ybar / kn);
        let mean_s2 = bn / (an - 1.0);
        let var_s2 = bn * bn / ((an - 1.0).powi(2) * (an - 2.0));
        let var_mu = mean_s2 / kn;

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let draws: Vec<ClusterParams> = (0..10_000).map(|_| sample_vdreg_params(&y, &prior, &mut rng)).collect();
        let m = draws.len() as f64;
        let mu_hat = draws.iter().map(|t| t.mu).sum::<f64>() / m;
        let s2_hat = draws.iter().map(|t| t.sigma2).sum::<f64>() / m;
        let mu_var_hat = draws.iter().map(|t| (t.mu - mu_hat).powi(2)).sum::<f64>() / (m - 1.0);
        assert!((mu_hat - mean_mu).abs() < 3.0 * (var_mu / m).sqrt());
        assert!((s2_hat - mean_s2).abs() < 3.0 * (var_s2 / m).sqrt());
        assert!((mu_var_hat - var_mu).abs() < 0.05 * var_mu);
    }

    #[test]
    fn single_member_diffuse_prior_centers_on_observation() {
        let prior = NigPrior {
            kappa0: 1e-6,
            ..Default::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_vdreg_params(&[2.5], &prior, &mut rng).mu).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((mean - 2.5).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn predictive_integrates_to_one() {
        let prior = NigPrior::default().posterior(&[0.3, -0.2]);
        let h = 0.001;
        let total: f64 = (-200_000..200_000)
            .map(|k| prior.log_predictive(k as f64 * h).exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }
}
