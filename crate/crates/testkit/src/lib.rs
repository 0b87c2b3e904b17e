//! Reference computations for tests. Nothing here shares code with the
//! library under test: marginals are built from sequential predictives or
//! numerical integration, partitions are generated recursively.

use std::collections::HashMap;
use std::f64::consts::PI;

/// Adaptive integration over `[a, b]` to relative accuracy `rel`. An
/// interval is accepted when the double-exponential rule's own error
/// estimate is small enough; otherwise it is bisected.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64) -> f64 {
    fn go<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Option<f64>, rel: f64, depth: u32) -> f64 {
        let out = quadrature::double_exponential::integrate(f, a, b, tol.unwrap_or(0.0));
        let tol = tol.unwrap_or(rel * out.integral.abs());
        if depth == 0 || out.error_estimate <= tol {
            return out.integral;
        }
        let m = 0.5 * (a + b);
        go(f, a, m, Some(0.5 * tol), rel, depth - 1) + go(f, m, b, Some(0.5 * tol), rel, depth - 1)
    }
    go(f, a, b, None, rel, 12)
}

/// As [`integrate`], with the tolerance fixed up front from a guess of the
/// integral's magnitude so the first rule can stop early.
pub fn integrate_with_scale<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, scale: f64, rel: f64) -> f64 {
    fn go<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let out = quadrature::double_exponential::integrate(f, a, b, tol);
        if depth == 0 || out.error_estimate <= tol {
            return out.integral;
        }
        let m = 0.5 * (a + b);
        go(f, a, m, 0.5 * tol, depth - 1) + go(f, m, b, 0.5 * tol, depth - 1)
    }
    go(f, a, b, rel * scale.abs(), 12)
}

/// Integral over `[a, b]` split into `pieces` equal panels, each adaptive.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, rel: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| integrate(f, a + i as f64 * h, a + (i + 1) as f64 * h, rel))
        .sum()
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation (g = 7, n = 9).
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut s = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// Log density of a location-scale Student t.
pub fn student_t_log_pdf(x: f64, nu: f64, loc: f64, scale2: f64) -> f64 {
    let t = (x - loc) * (x - loc) / scale2;
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI * scale2).ln()
        - 0.5 * (nu + 1.0) * (t / nu).ln_1p()
}

/// Log marginal of `v` under `v_i ~ N(mu, s2)`, `mu ~ N(m0, s2 / kappa0)`,
/// `s2 ~ IG(a0, b0)`, via the product of one-step-ahead predictives.
pub fn nig_log_marginal_sequential(v: &[f64], m0: f64, kappa0: f64, a0: f64, b0: f64) -> f64 {
    let (mut m, mut k, mut a, mut b) = (m0, kappa0, a0, b0);
    let mut out = 0.0;
    for &x in v {
        out += student_t_log_pdf(x, 2.0 * a, m, b * (k + 1.0) / (a * k));
        b += 0.5 * k * (x - m) * (x - m) / (k + 1.0);
        m = (k * m + x) / (k + 1.0);
        k += 1.0;
        a += 0.5;
    }
    out
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean) * (x - mean) / var)
}

fn log_inv_gamma(s2: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) - (a + 1.0) * s2.ln() - b / s2
}

/// Log of `∫∫ ∏ N(v_i; mu, s2) N(mu; 0, c s2) IG(s2; a, b) dmu ds2` by
/// nested adaptive quadrature, with `s2` integrated on the log scale.
pub fn nig_log_marginal_quadrature(v: &[f64], a: f64, b: f64, c: f64) -> f64 {
    let n = v.len() as f64;
    let lg_a = ln_gamma(a);
    // Terms of the log joint that depend on s2 only.
    let s2_part = |s2: f64| {
        -0.5 * (n + 1.0) * (2.0 * PI * s2).ln() - 0.5 * c.ln() + a * b.ln() - lg_a - (a + 1.0) * s2.ln() - b / s2
    };
    let mu_part = |mu: f64, s2: f64| {
        -0.5 * (v.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() + mu * mu / c) / s2
    };
    let log_joint = |mu: f64, s2: f64| mu_part(mu, s2) + s2_part(s2);
    debug_assert!({
        let (mu, s2) = (0.3, 0.7);
        let direct = v.iter().map(|&x| log_normal(x, mu, s2)).sum::<f64>()
            + log_normal(mu, 0.0, c * s2)
            + log_inv_gamma(s2, a, b);
        (direct - log_joint(mu, s2)).abs() < 1e-9
    });
    let centre = v.iter().sum::<f64>() / (n + 1.0 / c);
    // Pilot scale so that the integrand is O(1) near its bulk.
    let s2_pilot = (b + 0.5 * v.iter().map(|x| (x - centre).powi(2)).sum::<f64>()) / (a + 0.5 * n);
    let shift = log_joint(centre, s2_pilot);
    let inner = |t: f64| {
        let s2 = t.exp();
        let sd = (s2 * c / (1.0 + n * c)).sqrt();
        // Given s2, mu is Gaussian around `centre` with sd `sd`.
        let half = 40.0 * sd;
        let k = s2_part(s2) - shift;
        let f = |mu: f64| (mu_part(mu, s2) + k).exp();
        let peak = f(centre) * sd * (2.0 * PI).sqrt();
        s2 * integrate_with_scale(&f, centre - half, centre + half, peak, 1e-12)
    };
    let lo = s2_pilot.ln() - 30.0;
    let hi = s2_pilot.ln() + 30.0;
    integrate_panels(&inner, lo, hi, 12, 1e-11).ln() + shift
}

/// All set partitions of `0..n` as dense label vectors in first-appearance
/// order, generated by placing units one at a time.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn place(i: usize, n: usize, cur: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for c in 0..=k {
            cur.push(c);
            place(i + 1, n, cur, k.max(c + 1), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    place(0, n, &mut Vec::new(), 0, &mut out);
    out
}

/// Exact posterior of a Gaussian-response partition model.
///
/// Cohesion `M (|C| - 1)!`; each continuous covariate contributes the NIG
/// marginal with hyperparameters `(a, b, c)` over observed values; the
/// response contributes the NIG marginal with `(m0, kappa0, a0, b0)`.
pub struct ExactPosterior {
    pub partitions: Vec<Vec<usize>>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleModel {
    pub mass: f64,
    pub sim: (f64, f64, f64),
    pub outcome: (f64, f64, f64, f64),
    pub use_likelihood: bool,
}

impl ExactPosterior {
    pub fn compute(x: &[Vec<Option<f64>>], y: &[f64], model: &OracleModel) -> Self {
        let n = y.len();
        let partitions = set_partitions(n);
        let (a, b, c) = model.sim;
        let (m0, k0, a0, b0) = model.outcome;
        let logw: Vec<f64> = partitions
            .iter()
            .map(|labels| {
                let k = labels.iter().max().map_or(0, |m| m + 1);
                (0..k)
                    .map(|cl| {
                        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == cl).collect();
                        let size = members.len();
                        let mut s = model.mass.ln() + (1..size).map(|j| (j as f64).ln()).sum::<f64>();
                        for j in 0..x.first().map_or(0, Vec::len) {
                            let vals: Vec<f64> = members.iter().filter_map(|&i| x[i][j]).collect();
                            s += nig_log_marginal_sequential(&vals, 0.0, 1.0 / c, a, b);
                        }
                        if model.use_likelihood {
                            let ys: Vec<f64> = members.iter().map(|&i| y[i]).collect();
                            s += nig_log_marginal_sequential(&ys, m0, k0, a0, b0);
                        }
                        s
                    })
                    .sum()
            })
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logw.iter().map(|w| (w - max).exp()).sum();
        let probs = logw.iter().map(|w| (w - max).exp() / z).collect();
        Self { partitions, probs }
    }

    pub fn lookup(&self) -> HashMap<Vec<usize>, f64> {
        self.partitions.iter().cloned().zip(self.probs.iter().copied()).collect()
    }

    /// `P(i and j share a cluster)`.
    pub fn co_clustering(&self) -> Vec<Vec<f64>> {
        let n = self.partitions.first().map_or(0, Vec::len);
        let mut m = vec![vec![0.0; n]; n];
        for (labels, p) in self.partitions.iter().zip(&self.probs) {
            for i in 0..n {
                for j in 0..n {
                    if labels[i] == labels[j] {
                        m[i][j] += p;
                    }
                }
            }
        }
        m
    }
}

/// Total-variation distance between two distributions over labelled keys.
pub fn total_variation(p: &HashMap<Vec<usize>, f64>, q: &HashMap<Vec<usize>, f64>) -> f64 {
    let mut keys: Vec<&Vec<usize>> = p.keys().chain(q.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Tabulated CDF from an unnormalized log density on a uniform grid, with
/// linear interpolation between nodes.
pub struct GridCdf {
    lo: f64,
    h: f64,
    cum: Vec<f64>,
}

impl GridCdf {
    pub fn new<F: Fn(f64) -> f64>(log_density: F, lo: f64, hi: f64, nodes: usize) -> Self {
        let h = (hi - lo) / (nodes - 1) as f64;
        let ld: Vec<f64> = (0..nodes).map(|i| log_density(lo + i as f64 * h)).collect();
        let max = ld.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d: Vec<f64> = ld.iter().map(|v| (v - max).exp()).collect();
        let mut cum = vec![0.0; nodes];
        for i in 1..nodes {
            cum[i] = cum[i - 1] + 0.5 * h * (d[i - 1] + d[i]);
        }
        let total = cum[nodes - 1];
        for c in cum.iter_mut() {
            *c /= total;
        }
        Self { lo, h, cum }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        let i = t.floor() as usize;
        if i + 1 >= self.cum.len() {
            return 1.0;
        }
        let w = t - i as f64;
        self.cum[i] * (1.0 - w) + self.cum[i + 1] * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=7).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, [1, 2, 5, 15, 52, 203, 877]);
    }

    #[test]
    fn ln_gamma_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn integrate_known() {
        let g = |x: f64| (-x * x / 2.0).exp();
        assert!((integrate(&g, -30.0, 30.0, 1e-14) - (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((integrate(&|x: f64| x.sin(), 0.0, PI, 1e-14) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn sequential_and_quadrature_marginals_agree() {
        for v in [vec![], vec![0.0], vec![1.0, -0.5, 2.0]] {
            let a = nig_log_marginal_sequential(&v, 0.0, 1.0, 2.0, 1.0);
            let b = if v.is_empty() { 0.0 } else { nig_log_marginal_quadrature(&v, 2.0, 1.0, 1.0) };
            assert!((a - b).abs() < 1e-9, "{v:?}: {a} {b}");
        }
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!(ks_distance(&s, |x| x.clamp(0.0, 1.0)) <= 0.5 / n as f64 + 1e-12);
        let g = GridCdf::new(|_| 0.0, 0.0, 1.0, 101);
        assert!((g.cdf(0.37) - 0.37).abs() < 1e-12);
    }
}
