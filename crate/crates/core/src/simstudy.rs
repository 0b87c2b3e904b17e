//! Synthetic benchmark with eight covariate-missingness patterns and an MSPE
//! comparison between the two outcome models and a complete-case
//! least-squares baseline.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{split_train_test, CovariateKind, Dataset};
use crate::error::{Error, Result};
use crate::outcome::ModelKind;
use crate::predict::{mspe, PredictiveQuery, Predictor};
use crate::rng;
use crate::sampler::{run_chain, McmcConfig, ModelConfig, Prepared};

/// Observation masks; the first block of rows is fully observed.
pub const PATTERNS: [[bool; 4]; 8] = [
    [true, true, true, true],
    [false, true, true, true],
    [true, false, true, true],
    [true, true, false, true],
    [true, true, true, false],
    [false, false, true, true],
    [false, true, false, true],
    [true, false, true, false],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum X2Mode {
    /// `x2 = x1 + N(x1, 1)`.
    Literal,
    /// `x2 ~ N(x1, 1)`.
    Centered,
}

impl X2Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "literal" => Some(Self::Literal),
            "centered" => Some(Self::Centered),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Literal => "literal",
            Self::Centered => "centered",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    Patterns,
    /// Every covariate observed in every row.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    VDReg,
    VDLReg,
    CompleteCaseLs,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::VDReg, Method::VDLReg, Method::CompleteCaseLs];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vdreg" => Some(Self::VDReg),
            "vdlreg" => Some(Self::VDLReg),
            "ls" | "cc-ls" | "complete-case-ls" => Some(Self::CompleteCaseLs),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::VDReg => "vdreg",
            Self::VDLReg => "vdlreg",
            Self::CompleteCaseLs => "cc-ls",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub per_pattern: usize,
    /// Intercept followed by the four slopes.
    pub beta: [f64; 5],
    pub sigma: f64,
    pub replicates: usize,
    pub test_fraction: f64,
    pub base_seed: u64,
    pub x2_mode: X2Mode,
    pub mask_mode: MaskMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            per_pattern: 20,
            beta: [2.0, 1.4, 1.0, 0.1, 2.0],
            sigma: 1.0,
            replicates: 100,
            test_fraction: 0.10,
            base_seed: 1,
            x2_mode: X2Mode::Literal,
            mask_mode: MaskMode::Patterns,
        }
    }
}

impl SimConfig {
    pub fn n(&self) -> usize {
        PATTERNS.len() * self.per_pattern
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_pattern == 0 {
            return Err(Error::InvalidArgument("per-pattern count must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("at least one replicate is required".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("residual sd {} must be >= 0", self.sigma)));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "test fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Complete covariates for one unit.
pub fn draw_covariates<R: Rng + ?Sized>(mode: X2Mode, rng: &mut R) -> [f64; 4] {
    let b41 = Beta::new(4.0, 1.0).expect("valid beta");
    let b33 = Beta::new(0.3, 0.3).expect("valid beta");
    let x1 = 0.5 * b41.sample(rng);
    let e: f64 = rng.sample(StandardNormal);
    let x2 = match mode {
        X2Mode::Literal => x1 + x1 + e,
        X2Mode::Centered => x1 + e,
    };
    let centre = if rng.random::<f64>() < 0.3 { -3.0 } else { 3.0 };
    let x3 = centre + rng.sample::<f64, _>(StandardNormal);
    let x4 = 5.0 * b33.sample(rng);
    [x1, x2, x3, x4]
}

pub fn generate_dataset(cfg: &SimConfig, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, "simulate", 0);
    let n = cfg.n();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let x = draw_covariates(cfg.x2_mode, &mut rng);
        let mean = cfg.beta[0] + (0..4).map(|j| cfg.beta[j + 1] * x[j]).sum::<f64>();
        y.push(mean + cfg.sigma * rng.sample::<f64, _>(StandardNormal));
        let mask = match cfg.mask_mode {
            MaskMode::Patterns => PATTERNS[i / cfg.per_pattern],
            MaskMode::Complete => PATTERNS[0],
        };
        rows.push(x.iter().zip(mask).map(|(&v, m)| m.then_some(v)).collect());
    }
    Dataset::new(
        (1..=4).map(|j| format!("x{j}")).collect(),
        "y",
        vec![CovariateKind::Continuous; 4],
        &rows,
        y,
    )
    .expect("generated data is well formed")
}

/// Ordinary least squares on the fully observed rows. At prediction time
/// unreported covariates are replaced by their observed training means.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub fill: Vec<f64>,
}

impl LeastSquares {
    pub fn fit(d: &Dataset) -> Result<Self> {
        let p = d.p();
        let complete: Vec<usize> = (0..d.n()).filter(|&i| d.mask_row(i).iter().all(|&m| m)).collect();
        if complete.len() <= p {
            return Err(Error::InvalidArgument(format!(
                "{} complete rows cannot identify {} coefficients",
                complete.len(),
                p + 1
            )));
        }
        let x = DMatrix::from_fn(complete.len(), p + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                d.value(complete[r], c - 1).expect("complete row")
            }
        });
        let y = DVector::from_iterator(complete.len(), complete.iter().map(|&i| d.y()[i]));
        let svd = x.svd(true, true);
        let coef = svd
            .solve(&y, 1e-12)
            .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
        let fill = (0..p)
            .map(|j| {
                let obs: Vec<f64> = (0..d.n()).filter_map(|i| d.value(i, j)).collect();
                if obs.is_empty() {
                    0.0
                } else {
                    obs.iter().sum::<f64>() / obs.len() as f64
                }
            })
            .collect();
        Ok(Self {
            coefficients: coef.iter().copied().collect(),
            fill,
        })
    }

    pub fn predict(&self, x: &[Option<f64>]) -> f64 {
        self.coefficients[0]
            + x.iter()
                .zip(&self.fill)
                .zip(&self.coefficients[1..])
                .map(|((v, f), b)| b * v.unwrap_or(*f))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    /// MSPE on the held-out rows, or the reason the fit failed.
    pub mspe: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    pub n_test: usize,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub sd: f64,
    pub succeeded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub replicates: Vec<ReplicateResult>,
    pub summary: Vec<MethodSummary>,
}

/// Everything a study needs besides the data generator.
#[derive(Debug, Clone)]
pub struct StudySettings {
    pub methods: Vec<Method>,
    pub model: ModelConfig,
    pub mcmc: McmcConfig,
    pub include_new_cluster: bool,
}

impl StudySettings {
    pub fn new(methods: Vec<Method>, mcmc: McmcConfig) -> Self {
        Self {
            methods,
            model: ModelConfig::defaults_for(&[CovariateKind::Continuous; 4]),
            mcmc,
            include_new_cluster: true,
        }
    }
}

fn fit_bayes(train: &Dataset, test: &Dataset, s: &StudySettings, model: ModelKind, seed: u64) -> Result<f64> {
    let prep = Prepared::new(train)?;
    let mcmc = McmcConfig {
        model,
        seed: rng::derive_seed(seed, "mcmc", model as u64),
        ..s.mcmc.clone()
    };
    let draws = run_chain(&prep, &s.model, &mcmc)?;
    let pred = Predictor::new(&prep, &s.model, &draws, s.include_new_cluster, rng::derive_seed(seed, "predict", 0))?;
    let preds = (0..test.n())
        .map(|i| pred.predictive_mean(&PredictiveQuery::new(test.row(i))))
        .collect::<Result<Vec<f64>>>()?;
    mspe(&preds, test.y())
}

fn fit_ls(train: &Dataset, test: &Dataset) -> Result<f64> {
    let ls = LeastSquares::fit(train)?;
    let preds: Vec<f64> = (0..test.n()).map(|i| ls.predict(&test.row(i))).collect();
    mspe(&preds, test.y())
}

pub fn replicate_seed(cfg: &SimConfig, replicate: usize) -> u64 {
    rng::derive_seed(cfg.base_seed, "replicate", replicate as u64)
}

pub fn run_replicate(cfg: &SimConfig, s: &StudySettings, replicate: usize) -> ReplicateResult {
    let seed = replicate_seed(cfg, replicate);
    let data = generate_dataset(cfg, seed);
    let split = split_train_test(&data, cfg.test_fraction, rng::derive_seed(seed, "split", 0));
    let outcomes = s
        .methods
        .iter()
        .map(|&method| {
            let mspe = match &split {
                Err(e) => Err(e.to_string()),
                Ok((train, test)) => match method {
                    Method::VDReg => fit_bayes(train, test, s, ModelKind::VDReg, seed),
                    Method::VDLReg => fit_bayes(train, test, s, ModelKind::VDLReg, seed),
                    Method::CompleteCaseLs => fit_ls(train, test),
                }
                .map_err(|e| e.to_string()),
            };
            MethodOutcome { method, mspe }
        })
        .collect();
    ReplicateResult {
        replicate,
        seed,
        n_test: split.as_ref().map_or(0, |(_, t)| t.n()),
        outcomes,
    }
}

/// Runs every replicate on a pool of at most `jobs` threads. Results do not
/// depend on `jobs`.
pub fn run_study(cfg: &SimConfig, s: &StudySettings, jobs: usize) -> Result<StudyTable> {
    cfg.validate()?;
    s.mcmc.validate()?;
    if s.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods selected".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let replicates: Vec<ReplicateResult> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(cfg, s, r))
            .collect()
    });
    let summary = s
        .methods
        .iter()
        .map(|&method| {
            let ok: Vec<f64> = replicates
                .iter()
                .flat_map(|r| r.outcomes.iter())
                .filter(|o| o.method == method)
                .filter_map(|o| o.mspe.as_ref().ok().copied())
                .collect();
            let n = ok.len() as f64;
            let mean = if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / n };
            let sd = if ok.len() < 2 {
                f64::NAN
            } else {
                (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            MethodSummary {
                method,
                mean,
                sd,
                succeeded: ok.len(),
                failed: replicates.len() - ok.len(),
            }
        })
        .collect();
    Ok(StudyTable { replicates, summary })
}

impl StudyTable {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// One row per replicate and method.
    pub fn replicate_csv(&self) -> String {
        let mut out = String::from("replicate,seed,method,mspe,error\n");
        for r in &self.replicates {
            for o in &r.outcomes {
                let (v, e) = match &o.mspe {
                    Ok(v) => (format!("{v:?}"), String::new()),
                    Err(e) => (String::from("NA"), e.replace([',', '\n'], " ")),
                };
                let _ = writeln!(out, "{},{},{},{},{}", r.replicate, r.seed, o.method.name(), v, e);
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,mean_mspe,sd_mspe,succeeded,failed\n");
        for s in &self.summary {
            let _ = writeln!(out, "{},{:?},{:?},{},{}", s.method.name(), s.mean, s.sd, s.succeeded, s.failed);
        }
        out
    }

    /// Methods as columns, statistics as rows.
    pub fn render(&self) -> String {
        let mut out = format!("{:<10}", "");
        for s in &self.summary {
            let _ = write!(out, "{:>12}", s.method.name());
        }
        out.push('\n');
        let rows: [(&str, fn(&MethodSummary) -> String); 4] = [
            ("MSPE", |s| format!("{:.3}", s.mean)),
            ("sd", |s| format!("{:.3}", s.sd)),
            ("ok", |s| s.succeeded.to_string()),
            ("failed", |s| s.failed.to_string()),
        ];
        for (label, f) in rows {
            let _ = write!(out, "{label:<10}");
            for s in &self.summary {
                let _ = write!(out, "{:>12}", f(s));
            }
            out.push('\n');
        }
        out
    }
}
