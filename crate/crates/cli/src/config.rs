//! Flat `key = value` run configuration. Command-line flags override values
//! read from a file; the merged set is written back as `run.ini`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use vdreg::outcome::{NigPrior, VdlregPrior};
use vdreg::similarity::{BetaHyper, CategoricalSimilarity, GaussianHyper};
use vdreg::{CohesionConfig, CovariateKind, McmcConfig, ModelConfig, ModelKind, OutcomePriors, SimilarityConfig};

use crate::CliError;

/// Keys shared by every command that builds a model.
pub const MODEL_KEYS: &[&str] = &[
    "model",
    "iters",
    "burn",
    "thin",
    "n-aux",
    "mass",
    "sim-a",
    "sim-b",
    "sim-c",
    "beta-alpha",
    "beta-beta",
    "categorical",
    "dirichlet-alpha",
    "vdreg-m0",
    "vdreg-kappa0",
    "vdreg-a0",
    "vdreg-b0",
    "vdlreg-m0",
    "vdlreg-v0",
    "vdlreg-a0",
    "vdlreg-b0",
    "dl-a",
    "include-new-cluster",
    "seed",
];

pub const FIT_KEYS: &[&str] = &["data", "response", "kinds", "na-token"];
pub const PREDICT_KEYS: &[&str] = &["fit", "queries", "grid", "surface", "weights", "include-new-cluster", "seed", "na-token"];
pub const SIMULATE_KEYS: &[&str] = &[
    "replicates",
    "methods",
    "x2-mode",
    "sigma-sim",
    "jobs",
    "per-pattern",
    "test-fraction",
    "mask-mode",
    "save-data",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
    pub out: Option<PathBuf>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses `key = value` lines. Blank lines and lines starting with `#` or `;`
/// are skipped.
pub fn parse_ini(text: &str, origin: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_error(format!("{origin}:{}: expected `key = value`", i + 1)))?;
        let k = k.trim().to_string();
        if k.is_empty() {
            return Err(config_error(format!("{origin}:{}: empty key", i + 1)));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(config_error(format!("{origin}:{}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Merges an optional config file with flag values (flags win) and
    /// rejects keys the command does not know.
    pub fn resolve(
        command: &str,
        allowed: &[&[&str]],
        file: Option<&Path>,
        flags: Vec<(&str, Option<String>)>,
        out: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let mut values = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_error(format!("cannot read config {}: {e}", p.display())))?;
                parse_ini(&text, &p.display().to_string())?
            }
            None => BTreeMap::new(),
        };
        match values.remove("command") {
            Some(c) if c != command => {
                return Err(config_error(format!("config is for `{c}`, not `{command}`")));
            }
            _ => {}
        }
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        for k in values.keys() {
            if !allowed.iter().any(|set| set.contains(&k.as_str())) {
                return Err(config_error(format!("unknown key `{k}` for `{command}`")));
            }
        }
        Ok(Self {
            command: command.to_string(),
            values,
            out,
        })
    }

    pub fn from_ini(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = parse_ini(text, origin)?;
        let command = values
            .remove("command")
            .ok_or_else(|| config_error(format!("{origin}: no `command` key")))?;
        Ok(Self {
            command,
            values,
            out: None,
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| config_error(format!("`{key}` is required (flag --{key} or config key)")))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| config_error(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| config_error(format!("invalid value `{v}` for `{key}`")))
    }

    pub fn switch(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some("on" | "true" | "yes" | "1") => Ok(true),
            Some("off" | "false" | "no" | "0") => Ok(false),
            Some(v) => Err(config_error(format!("`{key}` must be on or off, got `{v}`"))),
        }
    }

    /// Seeds are never taken from the clock.
    pub fn seed(&self) -> Result<u64, CliError> {
        self.parse_required("seed")
    }

    /// Canonical text: `command` first, then keys in sorted order.
    pub fn to_ini(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(self.to_ini().as_bytes()))
    }

    pub fn mcmc(&self) -> Result<McmcConfig, CliError> {
        let d = McmcConfig::default();
        let model = match self.raw("model") {
            None => d.model,
            Some(m) => ModelKind::parse(m).ok_or_else(|| config_error(format!("unknown model `{m}`")))?,
        };
        let c = McmcConfig {
            iterations: self.parse_or("iters", d.iterations)?,
            burn_in: self.parse_or("burn", d.burn_in)?,
            thin: self.parse_or("thin", d.thin)?,
            n_aux: self.parse_or("n-aux", d.n_aux)?,
            seed: self.seed()?,
            model,
            use_likelihood: true,
        };
        c.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(c)
    }

    pub fn model_config(&self, kinds: &[CovariateKind]) -> Result<ModelConfig, CliError> {
        let gd = GaussianHyper::default();
        let g = GaussianHyper {
            a: self.parse_or("sim-a", gd.a)?,
            b: self.parse_or("sim-b", gd.b)?,
            c: self.parse_or("sim-c", gd.c)?,
        };
        let bd = BetaHyper::default();
        let b = BetaHyper {
            alpha: self.parse_or("beta-alpha", bd.alpha)?,
            beta: self.parse_or("beta-beta", bd.beta)?,
        };
        let cat = match self.raw("categorical").unwrap_or("mode") {
            "mode" => CategoricalSimilarity::ModeFrequency { weighted: true },
            "mode-unweighted" => CategoricalSimilarity::ModeFrequency { weighted: false },
            "dirichlet" => CategoricalSimilarity::Dirichlet {
                alpha: self.parse_or("dirichlet-alpha", 1.0)?,
            },
            other => return Err(config_error(format!("unknown categorical similarity `{other}`"))),
        };
        let similarity = SimilarityConfig::new(kinds, g, b, cat).map_err(|e| config_error(e.to_string()))?;
        let cohesion = CohesionConfig::new(self.parse_or("mass", 1.0)?).map_err(|e| config_error(e.to_string()))?;
        let nd = NigPrior::default();
        let vdreg = NigPrior {
            m0: self.parse_or("vdreg-m0", nd.m0)?,
            kappa0: self.parse_or("vdreg-kappa0", nd.kappa0)?,
            a0: self.parse_or("vdreg-a0", nd.a0)?,
            b0: self.parse_or("vdreg-b0", nd.b0)?,
        };
        let ld = VdlregPrior::default();
        let dl_a = match self.raw("dl-a") {
            None => None,
            Some(_) => Some(self.parse_required::<f64>("dl-a")?),
        };
        let vdlreg = VdlregPrior {
            m0: self.parse_or("vdlreg-m0", ld.m0)?,
            v0: self.parse_or("vdlreg-v0", ld.v0)?,
            a0: self.parse_or("vdlreg-a0", ld.a0)?,
            b0: self.parse_or("vdlreg-b0", ld.b0)?,
            dl_a,
        };
        let positive = [
            ("vdreg-kappa0", vdreg.kappa0),
            ("vdreg-a0", vdreg.a0),
            ("vdreg-b0", vdreg.b0),
            ("vdlreg-v0", vdlreg.v0),
            ("vdlreg-a0", vdlreg.a0),
            ("vdlreg-b0", vdlreg.b0),
            ("dl-a", dl_a.unwrap_or(1.0)),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(config_error(format!("`{k}` must be positive, got {v}")));
        }
        Ok(ModelConfig {
            similarity,
            cohesion,
            priors: OutcomePriors { vdreg, vdlreg },
        })
    }
}

pub fn parse_kinds(s: &str) -> Result<Vec<CovariateKind>, CliError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            CovariateKind::parse(t)
                .ok_or_else(|| config_error(format!("unknown covariate kind `{t}` (use c, b or k)")))
        })
        .collect()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    Ok(hex(&Sha256::digest(std::fs::read(path)?)))
}
