//! Command implementations behind the `vdreg` binary.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use vdreg::diagnostics::diagnostics;
use vdreg::records::{read_draws, write_draws, write_partitions};
use vdreg::simstudy::{generate_dataset, replicate_seed, MaskMode, Method, SimConfig, StudySettings, X2Mode};
use vdreg::{
    load_csv, load_queries, run_chain, CovariateKind, Error, PredictiveQuery, Predictor, Prepared, Schema,
    Standardization,
};

use config::{file_sha256, parse_kinds, RunConfig, FIT_KEYS, MODEL_KEYS, PREDICT_KEYS, SIMULATE_KEYS};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Runtime(_) => 1,
        }
    }

    fn from_data(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Self::Runtime(m),
            other => Self::Data(other.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "vdreg", version, about = "Regression for covariate vectors of varying dimension")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file and write posterior draws.
    Fit(FitArgs),
    /// Predict responses for query rows from a previous fit.
    Predict(PredictArgs),
    /// Run the synthetic missing-covariate benchmark.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// vdreg or vdlreg.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub iters: Option<String>,
    #[arg(long)]
    pub burn: Option<String>,
    #[arg(long)]
    pub thin: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Auxiliary empty clusters per allocation step.
    #[arg(long = "n-aux")]
    pub n_aux: Option<String>,
    /// Cohesion mass M.
    #[arg(long)]
    pub mass: Option<String>,
    #[arg(long = "sim-a")]
    pub sim_a: Option<String>,
    #[arg(long = "sim-b")]
    pub sim_b: Option<String>,
    #[arg(long = "sim-c")]
    pub sim_c: Option<String>,
    #[arg(long = "beta-alpha")]
    pub beta_alpha: Option<String>,
    #[arg(long = "beta-beta")]
    pub beta_beta: Option<String>,
    /// mode, mode-unweighted or dirichlet.
    #[arg(long)]
    pub categorical: Option<String>,
    #[arg(long = "dirichlet-alpha")]
    pub dirichlet_alpha: Option<String>,
    #[arg(long = "vdreg-m0")]
    pub vdreg_m0: Option<String>,
    #[arg(long = "vdreg-kappa0")]
    pub vdreg_kappa0: Option<String>,
    #[arg(long = "vdreg-a0")]
    pub vdreg_a0: Option<String>,
    #[arg(long = "vdreg-b0")]
    pub vdreg_b0: Option<String>,
    #[arg(long = "vdlreg-m0")]
    pub vdlreg_m0: Option<String>,
    #[arg(long = "vdlreg-v0")]
    pub vdlreg_v0: Option<String>,
    #[arg(long = "vdlreg-a0")]
    pub vdlreg_a0: Option<String>,
    #[arg(long = "vdlreg-b0")]
    pub vdlreg_b0: Option<String>,
    #[arg(long = "dl-a")]
    pub dl_a: Option<String>,
    /// Include the opened-cluster term in predictions (on|off).
    #[arg(long = "include-new-cluster")]
    pub include_new_cluster: Option<String>,
}

impl ModelArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("model", self.model.clone()),
            ("iters", self.iters.clone()),
            ("burn", self.burn.clone()),
            ("thin", self.thin.clone()),
            ("seed", self.seed.clone()),
            ("n-aux", self.n_aux.clone()),
            ("mass", self.mass.clone()),
            ("sim-a", self.sim_a.clone()),
            ("sim-b", self.sim_b.clone()),
            ("sim-c", self.sim_c.clone()),
            ("beta-alpha", self.beta_alpha.clone()),
            ("beta-beta", self.beta_beta.clone()),
            ("categorical", self.categorical.clone()),
            ("dirichlet-alpha", self.dirichlet_alpha.clone()),
            ("vdreg-m0", self.vdreg_m0.clone()),
            ("vdreg-kappa0", self.vdreg_kappa0.clone()),
            ("vdreg-a0", self.vdreg_a0.clone()),
            ("vdreg-b0", self.vdreg_b0.clone()),
            ("vdlreg-m0", self.vdlreg_m0.clone()),
            ("vdlreg-v0", self.vdlreg_v0.clone()),
            ("vdlreg-a0", self.vdlreg_a0.clone()),
            ("vdlreg-b0", self.vdlreg_b0.clone()),
            ("dl-a", self.dl_a.clone()),
            ("include-new-cluster", self.include_new_cluster.clone()),
        ]
    }
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    /// Training CSV.
    #[arg(long)]
    pub data: Option<String>,
    /// Response column name.
    #[arg(long)]
    pub response: Option<String>,
    /// Comma-separated covariate kinds in header order: c, b or k.
    #[arg(long)]
    pub kinds: Option<String>,
    #[arg(long = "na-token")]
    pub na_token: Option<String>,
    /// Flat key = value config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Default)]
pub struct PredictArgs {
    /// Output directory of a previous `fit`.
    #[arg(long)]
    pub fit: Option<String>,
    /// CSV of query rows with the training covariate columns.
    #[arg(long)]
    pub queries: Option<String>,
    /// Response grid `lo:hi:n` for predictive densities.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// For two-covariate fits: grid size per axis of the surface, curves and point output.
    #[arg(long)]
    pub surface: Option<String>,
    /// Write per-draw allocation weights (on|off).
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long = "include-new-cluster")]
    pub include_new_cluster: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long = "na-token")]
    pub na_token: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub replicates: Option<String>,
    /// Comma-separated subset of vdreg, vdlreg, cc-ls.
    #[arg(long)]
    pub methods: Option<String>,
    /// literal or centered.
    #[arg(long = "x2-mode")]
    pub x2_mode: Option<String>,
    /// Residual sd of the generator.
    #[arg(long = "sigma-sim")]
    pub sigma_sim: Option<String>,
    /// Worker threads for replicates.
    #[arg(long)]
    pub jobs: Option<String>,
    #[arg(long = "per-pattern")]
    pub per_pattern: Option<String>,
    #[arg(long = "test-fraction")]
    pub test_fraction: Option<String>,
    /// patterns or complete.
    #[arg(long = "mask-mode")]
    pub mask_mode: Option<String>,
    /// Also write each generated dataset (on|off).
    #[arg(long = "save-data")]
    pub save_data: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Runs a parsed command line and returns the process exit code, printing a
/// one-line diagnostic on failure.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Simulate(a) => cmd_simulate(&a).map(|table| print!("{table}")),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let out = out
        .clone()
        .ok_or_else(|| CliError::Config("`--out` is required".into()))?;
    fs::create_dir_all(&out)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", out.display())))?;
    Ok(out)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_manifest(out: &Path, cfg: &RunConfig, inputs: serde_json::Value, outputs: &[&str]) -> Result<(), CliError> {
    write(&out.join("run.ini"), &cfg.to_ini())?;
    let manifest = json!({
        "command": cfg.command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.raw("seed"),
        "config_sha256": cfg.sha256(),
        "config_file": "run.ini",
        "inputs": inputs,
        "outputs": outputs,
    });
    write(&out.join("manifest.json"), &format!("{}\n", serde_json::to_string_pretty(&manifest).map_err(runtime)?))
}

fn fit_config(a: &FitArgs) -> Result<RunConfig, CliError> {
    let mut flags = vec![
        ("data", a.data.clone()),
        ("response", a.response.clone()),
        ("kinds", a.kinds.clone()),
        ("na-token", a.na_token.clone()),
    ];
    flags.extend(a.model.pairs());
    RunConfig::resolve("fit", &[FIT_KEYS, MODEL_KEYS], a.config.as_deref(), flags, a.out.clone())
}

/// Schema from a fit config; kinds default to all continuous.
fn fit_schema(cfg: &RunConfig, data: &Path) -> Result<Schema, CliError> {
    let response = cfg.require("response")?.to_string();
    let kinds = match cfg.raw("kinds") {
        Some(k) => parse_kinds(k)?,
        None => {
            let text = fs::read_to_string(data)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", data.display())))?;
            let cols = text.lines().next().map_or(0, |h| h.split(',').count());
            vec![CovariateKind::Continuous; cols.saturating_sub(1)]
        }
    };
    let mut schema = Schema::new(response, kinds);
    if let Some(t) = cfg.raw("na-token") {
        schema.na_token = t.to_string();
    }
    Ok(schema)
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let cfg = fit_config(a)?;
    let data_path = PathBuf::from(cfg.require("data")?);
    let mcmc = cfg.mcmc()?;
    cfg.switch("include-new-cluster", true)?;
    let schema = fit_schema(&cfg, &data_path)?;
    let model = cfg.model_config(&schema.kinds)?;
    let out = out_dir(&cfg.out)?;
    let data = load_csv(&data_path, &schema).map_err(CliError::from_data)?;
    let prep = Prepared::new(&data).map_err(CliError::from_data)?;
    let draws = run_chain(&prep, &model, &mcmc).map_err(runtime)?;
    write_draws(&out.join("draws.ndjson"), &draws).map_err(runtime)?;
    write_partitions(&out.join("partitions.txt"), &draws).map_err(runtime)?;
    let diag = diagnostics(&draws).map_err(runtime)?;
    for w in diag.traces.iter().filter_map(|t| t.warning.as_ref()) {
        eprintln!("warning: {w}");
    }
    write(&out.join("diagnostics.json"), &format!("{}\n", serde_json::to_string_pretty(&diag).map_err(runtime)?))?;
    write(
        &out.join("standardization.json"),
        &format!("{}\n", serde_json::to_string_pretty(&prep.standardization).map_err(runtime)?),
    )?;
    let sha = file_sha256(&data_path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", data_path.display())))?;
    write_manifest(
        &out,
        &cfg,
        json!({ "data": { "path": data_path.display().to_string(), "sha256": sha, "rows": data.n() } }),
        &["draws.ndjson", "partitions.txt", "diagnostics.json", "standardization.json"],
    )?;
    eprintln!(
        "fit: {} draws of {} in {:.1} s",
        draws.draws.len(),
        draws.model.name(),
        draws.elapsed_secs
    );
    Ok(())
}

/// `lo:hi:n` with `n >= 2`.
fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("grid `{s}` must be lo:hi:n with lo < hi and n >= 2"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo < hi) || n < 2 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:?}"))
}

pub fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(
        "predict",
        &[PREDICT_KEYS],
        a.config.as_deref(),
        vec![
            ("fit", a.fit.clone()),
            ("queries", a.queries.clone()),
            ("grid", a.grid.clone()),
            ("surface", a.surface.clone()),
            ("weights", a.weights.clone()),
            ("include-new-cluster", a.include_new_cluster.clone()),
            ("seed", a.seed.clone()),
            ("na-token", a.na_token.clone()),
        ],
        a.out.clone(),
    )?;
    let fit_dir = PathBuf::from(cfg.require("fit")?);
    let query_path = PathBuf::from(cfg.require("queries")?);
    let grid = cfg.raw("grid").map(parse_grid).transpose()?;
    let surface: Option<usize> = cfg.raw("surface").map(|_| cfg.parse_required("surface")).transpose()?;
    let with_weights = cfg.switch("weights", false)?;

    let ini_path = fit_dir.join("run.ini");
    let fit_text = fs::read_to_string(&ini_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", ini_path.display())))?;
    let fit_cfg = RunConfig::from_ini(&fit_text, &ini_path.display().to_string())?;
    if fit_cfg.command != "fit" {
        return Err(CliError::Config(format!("{} is not a fit configuration", ini_path.display())));
    }
    let include_new = match cfg.raw("include-new-cluster") {
        Some(_) => cfg.switch("include-new-cluster", true)?,
        None => fit_cfg.switch("include-new-cluster", true)?,
    };
    let seed: u64 = match cfg.raw("seed") {
        Some(_) => cfg.seed()?,
        None => fit_cfg.seed()?,
    };
    let data_path = PathBuf::from(fit_cfg.require("data")?);
    let schema = fit_schema(&fit_cfg, &data_path)?;
    let model = fit_cfg.model_config(&schema.kinds)?;
    let data = load_csv(&data_path, &schema).map_err(CliError::from_data)?;
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(fit_dir.join("manifest.json")).map_err(|e| CliError::Config(format!("fit manifest: {e}")))?,
    )
    .map_err(|e| CliError::Config(format!("fit manifest: {e}")))?;
    let sha = file_sha256(&data_path).map_err(|e| CliError::Data(e.to_string()))?;
    if manifest["inputs"]["data"]["sha256"].as_str() != Some(sha.as_str()) {
        return Err(CliError::Data(format!("{} changed since the fit", data_path.display())));
    }
    let std_text = fs::read_to_string(fit_dir.join("standardization.json"))
        .map_err(|e| CliError::Config(format!("cannot read standardization: {e}")))?;
    let standardization: Standardization =
        serde_json::from_str(&std_text).map_err(|e| CliError::Config(format!("standardization: {e}")))?;
    let prep = Prepared::with_standardization(&data, standardization);
    let draws = read_draws(&fit_dir.join("draws.ndjson")).map_err(CliError::from_data)?;
    let predictor = Predictor::new(&prep, &model, &draws, include_new, seed).map_err(runtime)?;

    let na = cfg.raw("na-token").unwrap_or(&schema.na_token).to_string();
    let (queries, _) = load_queries(&query_path, &data, &na).map_err(|e| match e {
        Error::Io { .. } => CliError::Data(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    let out = out_dir(&cfg.out)?;
    let names = data.names();
    let mut outputs = vec!["predictions.csv"];

    let mut csv = format!("query,{},mean,sd\n", names.join(","));
    for (i, x) in queries.iter().enumerate() {
        let q = PredictiveQuery::new(x.clone());
        let (m, v) = predictor.predictive_moments(&q).map_err(runtime)?;
        let cells: Vec<String> = x.iter().map(|v| cell(*v)).collect();
        let _ = writeln!(csv, "{},{},{:?},{:?}", i + 1, cells.join(","), m, v.max(0.0).sqrt());
    }
    write(&out.join("predictions.csv"), &csv)?;

    if let Some(grid) = &grid {
        let mut dens = String::from("query,y,density\n");
        for (i, x) in queries.iter().enumerate() {
            let q = PredictiveQuery::new(x.clone()).with_grid(grid.clone());
            for (y, f) in grid.iter().zip(predictor.predictive_density(&q).map_err(runtime)?) {
                let _ = writeln!(dens, "{},{y:?},{f:?}", i + 1);
            }
        }
        write(&out.join("density.csv"), &dens)?;
        outputs.push("density.csv");
    }

    if with_weights {
        let mut w = String::from("query,draw,cluster,size,weight\n");
        for (i, x) in queries.iter().enumerate() {
            let q = PredictiveQuery::new(x.clone());
            for (t, draw) in draws.draws.iter().enumerate() {
                let probs = predictor.allocation_probs(t, &q).map_err(runtime)?;
                for (k, p) in probs.iter().enumerate() {
                    let (label, size) = if k < draw.params.len() {
                        ((k + 1).to_string(), draw.partition.size(k))
                    } else {
                        ("new".to_string(), 0)
                    };
                    let _ = writeln!(w, "{},{},{label},{size},{p:?}", i + 1, t + 1);
                }
            }
        }
        write(&out.join("weights.csv"), &w)?;
        outputs.push("weights.csv");
    }

    if let Some(n) = surface {
        if data.p() != 2 {
            return Err(CliError::Config(format!("--surface needs a two-covariate fit, this one has {}", data.p())));
        }
        if n < 2 {
            return Err(CliError::Config("--surface needs at least 2 points per axis".into()));
        }
        let axis = |j: usize| -> Vec<f64> {
            let obs: Vec<f64> = (0..data.n()).filter_map(|i| data.value(i, j)).collect();
            let lo = obs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = obs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        let (g1, g2) = (axis(0), axis(1));
        let mut fig = format!("regime,{},{},mean\n", names[0], names[1]);
        let mut emit = |regime: &str, x: Vec<Option<f64>>| -> Result<(), CliError> {
            let m = predictor.predictive_mean(&PredictiveQuery::new(x.clone())).map_err(runtime)?;
            let _ = writeln!(fig, "{regime},{},{},{m:?}", cell(x[0]), cell(x[1]));
            Ok(())
        };
        for &u in &g1 {
            for &v in &g2 {
                emit("both", vec![Some(u), Some(v)])?;
            }
        }
        for &u in &g1 {
            emit(&format!("{}_only", names[0]), vec![Some(u), None])?;
        }
        for &v in &g2 {
            emit(&format!("{}_only", names[1]), vec![None, Some(v)])?;
        }
        emit("none", vec![None, None])?;
        write(&out.join("surface.csv"), &fig)?;
        outputs.push("surface.csv");
    }

    let qsha = file_sha256(&query_path).map_err(|e| CliError::Data(e.to_string()))?;
    write_manifest(
        &out,
        &cfg,
        json!({
            "fit_config_sha256": fit_cfg.sha256(),
            "queries": { "path": query_path.display().to_string(), "sha256": qsha, "rows": queries.len() },
        }),
        &outputs,
    )
}

fn parse_methods(s: &str) -> Result<Vec<Method>, CliError> {
    let mut out = Vec::new();
    for t in s.split(',') {
        let m = Method::parse(t.trim())
            .ok_or_else(|| CliError::Config(format!("unknown method `{}` (use vdreg, vdlreg, cc-ls)", t.trim())))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Returns the rendered summary table.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let mut flags = vec![
        ("replicates", a.replicates.clone()),
        ("methods", a.methods.clone()),
        ("x2-mode", a.x2_mode.clone()),
        ("sigma-sim", a.sigma_sim.clone()),
        ("jobs", a.jobs.clone()),
        ("per-pattern", a.per_pattern.clone()),
        ("test-fraction", a.test_fraction.clone()),
        ("mask-mode", a.mask_mode.clone()),
        ("save-data", a.save_data.clone()),
    ];
    flags.extend(a.model.pairs());
    let cfg = RunConfig::resolve("simulate", &[SIMULATE_KEYS, MODEL_KEYS], a.config.as_deref(), flags, a.out.clone())?;
    let d = SimConfig::default();
    let x2_mode = match cfg.raw("x2-mode") {
        None => d.x2_mode,
        Some(s) => X2Mode::parse(s).ok_or_else(|| CliError::Config(format!("unknown x2 mode `{s}`")))?,
    };
    let mask_mode = match cfg.raw("mask-mode") {
        None | Some("patterns") => MaskMode::Patterns,
        Some("complete") => MaskMode::Complete,
        Some(s) => return Err(CliError::Config(format!("unknown mask mode `{s}`"))),
    };
    let sim = SimConfig {
        per_pattern: cfg.parse_or("per-pattern", d.per_pattern)?,
        sigma: cfg.parse_or("sigma-sim", d.sigma)?,
        replicates: cfg.parse_or("replicates", d.replicates)?,
        test_fraction: cfg.parse_or("test-fraction", d.test_fraction)?,
        base_seed: cfg.seed()?,
        x2_mode,
        mask_mode,
        ..d
    };
    sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let methods = parse_methods(cfg.raw("methods").unwrap_or("vdreg,vdlreg,cc-ls"))?;
    let jobs: usize = cfg.parse_or("jobs", 1)?;
    if jobs == 0 {
        return Err(CliError::Config("`jobs` must be at least 1".into()));
    }
    let save_data = cfg.switch("save-data", false)?;
    let mut settings = StudySettings::new(methods, cfg.mcmc()?);
    settings.model = cfg.model_config(&[CovariateKind::Continuous; 4])?;
    settings.include_new_cluster = cfg.switch("include-new-cluster", true)?;
    let out = out_dir(&cfg.out)?;

    let table = vdreg::simstudy::run_study(&sim, &settings, jobs).map_err(runtime)?;
    write(&out.join("replicates.csv"), &table.replicate_csv())?;
    write(&out.join("summary.csv"), &table.summary_csv())?;
    let rendered = table.render();
    write(&out.join("summary.txt"), &rendered)?;
    let mut outputs = vec!["replicates.csv", "summary.csv", "summary.txt"];
    if save_data {
        let dir = out.join("data");
        fs::create_dir_all(&dir).map_err(runtime)?;
        for r in 0..sim.replicates {
            let data = generate_dataset(&sim, replicate_seed(&sim, r));
            data.write_csv(&dir.join(format!("replicate_{:03}.csv", r + 1)), "NA").map_err(runtime)?;
        }
        outputs.push("data/");
    }
    for r in &table.replicates {
        for o in &r.outcomes {
            if let Err(e) = &o.mspe {
                eprintln!("warning: replicate {} {}: {e}", r.replicate + 1, o.method.name());
            }
        }
    }
    write_manifest(&out, &cfg, json!({}), &outputs)?;
    Ok(rendered)
}
