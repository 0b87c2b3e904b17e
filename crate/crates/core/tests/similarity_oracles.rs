use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vdreg::similarity::{log_marginal_beta_binomial, log_marginal_gaussian, BetaHyper, GaussianHyper};
use vdreg_testkit::{integrate, integrate_panels, nig_log_marginal_quadrature, nig_log_marginal_sequential};

#[test]
fn single_zero_matches_quadrature_tightly() {
    let h = GaussianHyper { a: 2.0, b: 1.0, c: 1.0 };
    let closed = log_marginal_gaussian(&[0.0], &h).unwrap();
    let quad = nig_log_marginal_quadrature(&[0.0], 2.0, 1.0, 1.0);
    assert!(((closed - quad).exp() - 1.0).abs() < 1e-8, "{closed} vs {quad}");
}

#[test]
fn random_cases_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let m = rng.random_range(1..=5);
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (a, b, c) = (rng.random_range(0.5..5.0), rng.random_range(0.2..4.0), rng.random_range(0.2..4.0));
        let closed = log_marginal_gaussian(&v, &GaussianHyper { a, b, c }).unwrap();
        let quad = nig_log_marginal_quadrature(&v, a, b, c);
        assert!(((closed - quad).exp() - 1.0).abs() < 1e-6, "{v:?} ({a},{b},{c}): {closed} vs {quad}");
        let seq = nig_log_marginal_sequential(&v, 0.0, 1.0 / c, a, b);
        assert!((closed - seq).abs() < 1e-10);
    }
}

#[test]
fn beta_binomial_matches_integral_over_success_probability() {
    for (bits, alpha, beta) in [(vec![1.0], 1.0, 1.0), (vec![1.0, 0.0, 1.0, 1.0], 0.7, 2.5), (vec![0.0; 6], 3.0, 0.4)] {
        let s = bits.iter().sum::<f64>();
        let m = bits.len() as f64;
        // Beta(alpha, beta) prior; normalizer by the same quadrature.
        let kernel = |p: f64, extra_s: f64, extra_f: f64| p.powf(alpha - 1.0 + extra_s) * (1.0 - p).powf(beta - 1.0 + extra_f);
        let num = integrate(&|p| kernel(p, s, m - s), 0.0, 1.0, 1e-14);
        let den = integrate(&|p| kernel(p, 0.0, 0.0), 0.0, 1.0, 1e-14);
        let closed = log_marginal_beta_binomial(&bits, &BetaHyper { alpha, beta }).unwrap();
        assert!((closed - (num / den).ln()).abs() < 1e-6, "{bits:?}");
    }
}

#[test]
fn gaussian_similarity_is_sample_size_consistent() {
    // Integrating the next value out of g(v ∪ {w}) returns g(v).
    let h = GaussianHyper::default();
    for v in [vec![], vec![0.3], vec![-1.0, 0.5], vec![2.0, 2.2, -0.4]] {
        let base = log_marginal_gaussian(&v, &h).unwrap();
        let f = |w: f64| {
            let mut u = v.clone();
            u.push(w);
            (log_marginal_gaussian(&u, &h).unwrap() - base).exp()
        };
        let total = integrate_panels(&f, -400.0, 400.0, 80, 1e-11);
        assert!((total - 1.0).abs() < 1e-6, "{v:?}: {total}");
    }
}
