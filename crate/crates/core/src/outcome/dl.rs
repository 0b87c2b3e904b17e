//! Dirichlet–Laplace shrinkage for cluster-level regression slopes.
//!
//! `β_j ~ N(0, ψ_j φ_j² τ²)`, `ψ_j ~ Exp(1/2)`, `φ ~ Dir(a, …, a)`,
//! `τ ~ Gamma(p a, 1/2)`. Marginally each `β_j` is Laplace given `φ_j τ`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, InverseGaussian};
use serde::{Deserialize, Serialize};

use super::gig::sample_gig;

const FLOOR: f64 = 1e-12;
const CLAMP_LO: f64 = 1e-200;
const CLAMP_HI: f64 = 1e200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DLState {
    /// Local scales.
    pub psi: Vec<f64>,
    /// Simplex weights.
    pub phi: Vec<f64>,
    /// Global scale.
    pub tau: f64,
    /// Dirichlet concentration.
    pub a: f64,
}

impl DLState {
    pub fn p(&self) -> usize {
        self.phi.len()
    }

    /// Prior variance of each slope given the shrinkage state.
    pub fn slope_variances(&self) -> Vec<f64> {
        self.psi
            .iter()
            .zip(&self.phi)
            .map(|(psi, phi)| (psi * phi * phi * self.tau * self.tau).clamp(CLAMP_LO, CLAMP_HI))
            .collect()
    }

    pub fn sample_prior<R: Rng + ?Sized>(p: usize, a: f64, rng: &mut R) -> Self {
        let exp = Exp::new(0.5).expect("valid rate");
        let psi = (0..p).map(|_| Distribution::<f64>::sample(&exp, rng).max(CLAMP_LO)).collect();
        let phi = sample_dirichlet(p, a, rng);
        let tau = Gamma::new(p as f64 * a, 2.0)
            .expect("valid gamma")
            .sample(rng)
            .max(CLAMP_LO);
        Self { psi, phi, tau, a }
    }
}

fn sample_dirichlet<R: Rng + ?Sized>(p: usize, a: f64, rng: &mut R) -> Vec<f64> {
    if p == 1 {
        return vec![1.0];
    }
    let g = Gamma::new(a, 1.0).expect("valid gamma");
    let mut w: Vec<f64> = (0..p).map(|_| g.sample(rng).max(CLAMP_LO)).collect();
    normalize(&mut w);
    w
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= s;
    }
    // Renormalize after clamping so the simplex constraint holds to rounding.
    for v in w.iter_mut() {
        *v = v.max(CLAMP_LO);
    }
    let s: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= s;
    }
}

/// One blocked Gibbs update of the shrinkage state given slopes `beta`:
/// `φ | β`, then `τ | φ, β`, then `ψ | φ, τ, β`.
pub fn update_dl_state<R: Rng + ?Sized>(beta: &[f64], dl: &DLState, rng: &mut R) -> DLState {
    let p = beta.len();
    debug_assert_eq!(p, dl.p());
    let abs: Vec<f64> = beta.iter().map(|b| b.abs().max(FLOOR)).collect();
    let a = dl.a;

    let phi = if p == 1 {
        vec![1.0]
    } else {
        let mut t: Vec<f64> = abs
            .iter()
            .map(|&b| sample_gig(a - 1.0, 2.0 * b, 1.0, rng).clamp(CLAMP_LO, CLAMP_HI))
            .collect();
        normalize(&mut t);
        t
    };

    let chi: f64 = 2.0 * abs.iter().zip(&phi).map(|(b, f)| b / f).sum::<f64>();
    let tau = sample_gig(p as f64 * a - p as f64, chi.min(CLAMP_HI), 1.0, rng).clamp(CLAMP_LO, CLAMP_HI);

    let psi = abs
        .iter()
        .zip(&phi)
        .map(|(&b, &f)| {
            let mean = (f * tau / b).clamp(CLAMP_LO, CLAMP_HI);
            let inv = InverseGaussian::new(mean, 1.0).expect("valid inverse Gaussian").sample(rng);
            (1.0 / inv).clamp(CLAMP_LO, CLAMP_HI)
        })
        .collect();

    DLState { psi, phi, tau, a }
}
