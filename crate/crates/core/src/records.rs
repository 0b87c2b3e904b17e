//! File formats for retained draws: one JSON object per line, plus a plain
//! partition file with space-separated 1-based labels.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::{Acceptance, ClusterParams, ModelKind, StepSizes};
use crate::partition::Partition;
use crate::sampler::{Draw, PosteriorDraws};

#[derive(Debug, Serialize, Deserialize)]
struct ClusterRecord {
    label: usize,
    size: usize,
    mu: f64,
    beta: Vec<f64>,
    sigma2: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DrawRecord {
    iteration: usize,
    model: ModelKind,
    labels: Vec<usize>,
    clusters: Vec<ClusterRecord>,
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let err = io_error(path);
    let mut out = BufWriter::new(File::create(path).map_err(&err)?);
    for d in &draws.draws {
        let rec = DrawRecord {
            iteration: d.iteration,
            model: draws.model,
            labels: d.partition.labels().iter().map(|l| l + 1).collect(),
            clusters: d
                .params
                .iter()
                .enumerate()
                .map(|(k, p)| ClusterRecord {
                    label: k + 1,
                    size: d.partition.size(k),
                    mu: p.mu,
                    beta: p.beta.clone(),
                    sigma2: p.sigma2,
                })
                .collect(),
        };
        let line = serde_json::to_string(&rec).expect("draw records serialize");
        writeln!(out, "{line}").map_err(&err)?;
    }
    out.flush().map_err(&err)
}

pub fn write_partitions(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let err = io_error(path);
    let mut out = BufWriter::new(File::create(path).map_err(&err)?);
    for d in &draws.draws {
        writeln!(out, "{}", d.partition.to_line()).map_err(&err)?;
    }
    out.flush().map_err(&err)
}

pub fn read_draws(path: &Path) -> Result<PosteriorDraws> {
    let err = io_error(path);
    let reader = BufReader::new(File::open(path).map_err(&err)?);
    let mut draws = Vec::new();
    let mut model = None;
    let mut p = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(&err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DrawRecord = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidArgument(format!("{}: line {}: {e}", path.display(), lineno + 1))
        })?;
        let bad = |what: &str| {
            Error::InvalidArgument(format!("{}: line {}: {what}", path.display(), lineno + 1))
        };
        if rec.labels.iter().any(|&l| l == 0) {
            return Err(bad("labels are 1-based"));
        }
        // Any labelling is accepted; clusters are stored in first-appearance order.
        let partition = Partition::from_labels(&rec.labels);
        if partition.n_clusters() != rec.clusters.len() {
            return Err(bad("labels and cluster records disagree"));
        }
        let mut params: Vec<Option<ClusterParams>> = vec![None; rec.clusters.len()];
        for c in rec.clusters {
            let unit = rec
                .labels
                .iter()
                .position(|&l| l == c.label)
                .ok_or_else(|| bad("cluster record without members"))?;
            params[partition.label(unit)] = Some(ClusterParams {
                mu: c.mu,
                beta: c.beta,
                sigma2: c.sigma2,
            });
        }
        let params: Vec<ClusterParams> = params
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| bad("duplicate cluster records"))?;
        model = Some(rec.model);
        p = params.first().map_or(0, |c| c.beta.len());
        draws.push(Draw {
            iteration: rec.iteration,
            partition,
            params,
        });
    }
    let model = model.ok_or_else(|| Error::InvalidArgument(format!("{}: no draws", path.display())))?;
    Ok(PosteriorDraws {
        model,
        draws,
        acceptance: Acceptance::new(p),
        step_sizes: StepSizes::new(p),
        elapsed_secs: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_roundtrip() {
        let draws = PosteriorDraws {
            model: ModelKind::VDLReg,
            draws: vec![Draw {
                iteration: 7,
                partition: Partition::from_labels(&[0, 1, 0]),
                params: vec![
                    ClusterParams { mu: 0.1, beta: vec![1.0 / 3.0, -2e-17], sigma2: 0.7 },
                    ClusterParams { mu: -1.5, beta: vec![0.0, 4.0], sigma2: 1e-3 },
                ],
            }],
            acceptance: Acceptance::new(2),
            step_sizes: StepSizes::new(2),
            elapsed_secs: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("draws.ndjson");
        write_draws(&path, &draws).unwrap();
        let back = read_draws(&path).unwrap();
        assert_eq!(back.draws, draws.draws);
        assert_eq!(back.model, ModelKind::VDLReg);
        let parts = dir.path().join("partitions.txt");
        write_partitions(&parts, &draws).unwrap();
        assert_eq!(std::fs::read_to_string(parts).unwrap(), "1 2 1\n");
    }

    #[test]
    fn any_labelling_reads_back_canonically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ndjson");
        let line = r#"{"iteration":3,"model":"vdreg","labels":[2,2,1],"clusters":[{"label":1,"size":1,"mu":5.0,"beta":[],"sigma2":1.0},{"label":2,"size":2,"mu":-1.0,"beta":[],"sigma2":2.0}]}"#;
        std::fs::write(&path, format!("{line}\n")).unwrap();
        let d = read_draws(&path).unwrap();
        assert_eq!(d.draws[0].partition.labels(), &[0, 0, 1]);
        assert_eq!(d.draws[0].params[0].mu, -1.0);
        assert_eq!(d.draws[0].params[1].mu, 5.0);
        std::fs::write(&path, line.replace("\"label\":1", "\"label\":7")).unwrap();
        assert!(read_draws(&path).is_err());
    }
}
