//! Variable-dimension covariate tables with explicit observation masks.
//!
//! Missing cells hold `NaN` in addition to a cleared mask bit. Every reader
//! goes through [`Dataset::value`], which consults the mask first, so a mask
//! violation anywhere downstream shows up as a `NaN` in results.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Continuous,
    Binary,
    Categorical,
}

impl CovariateKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" | "continuous" => Some(Self::Continuous),
            "b" | "binary" => Some(Self::Binary),
            "k" | "cat" | "categorical" => Some(Self::Categorical),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Self::Continuous => "c",
            Self::Binary => "b",
            Self::Categorical => "k",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    response_name: String,
    kinds: Vec<CovariateKind>,
    /// Number of categorical levels per covariate (0 for other kinds).
    levels: Vec<usize>,
    x: Vec<f64>,
    mask: Vec<bool>,
    y: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from rows of optional covariate values.
    pub fn new(
        names: Vec<String>,
        response_name: impl Into<String>,
        kinds: Vec<CovariateKind>,
        rows: &[Vec<Option<f64>>],
        y: Vec<f64>,
    ) -> Result<Self> {
        let p = kinds.len();
        if names.len() != p {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} covariates",
                names.len(),
                p
            )));
        }
        if rows.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} covariate rows for {} responses",
                rows.len(),
                y.len()
            )));
        }
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut x = Vec::with_capacity(rows.len() * p);
        let mut mask = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidArgument(format!(
                    "row {} has {} values, expected {}",
                    i,
                    row.len(),
                    p
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                match *cell {
                    Some(v) => {
                        check_kind(kinds[j], v, i + 1, &names[j])?;
                        x.push(v);
                        mask.push(true);
                    }
                    None => {
                        x.push(f64::NAN);
                        mask.push(false);
                    }
                }
            }
        }
        if let Some(&bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        let mut levels = vec![0; p];
        for j in 0..p {
            if kinds[j] == CovariateKind::Categorical {
                levels[j] = (0..y.len())
                    .filter(|&i| mask[i * p + j])
                    .map(|i| x[i * p + j] as usize + 1)
                    .max()
                    .unwrap_or(0);
            }
        }
        Ok(Self {
            names,
            response_name: response_name.into(),
            kinds,
            levels,
            x,
            mask,
            y,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.kinds.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn kinds(&self) -> &[CovariateKind] {
        &self.kinds
    }

    pub fn kind(&self, j: usize) -> CovariateKind {
        self.kinds[j]
    }

    pub fn levels(&self, j: usize) -> usize {
        self.levels[j]
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.p() + j]
    }

    /// The value of covariate `j` for unit `i`, or `None` where unreported.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        let k = i * self.p() + j;
        if self.mask[k] {
            Some(self.x[k])
        } else {
            None
        }
    }

    pub fn row(&self, i: usize) -> Vec<Option<f64>> {
        (0..self.p()).map(|j| self.value(i, j)).collect()
    }

    pub fn mask_row(&self, i: usize) -> &[bool] {
        let p = self.p();
        &self.mask[i * p..(i + 1) * p]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Rows `idx` in the given order. Categorical level counts are inherited.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let p = self.p();
        let mut x = Vec::with_capacity(idx.len() * p);
        let mut mask = Vec::with_capacity(idx.len() * p);
        for &i in idx {
            x.extend_from_slice(&self.x[i * p..(i + 1) * p]);
            mask.extend_from_slice(&self.mask[i * p..(i + 1) * p]);
        }
        Self {
            names: self.names.clone(),
            response_name: self.response_name.clone(),
            kinds: self.kinds.clone(),
            levels: self.levels.clone(),
            x,
            mask,
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    fn map_values(&self, f: impl Fn(usize, f64) -> f64, g: impl Fn(f64) -> f64) -> Self {
        let p = self.p();
        let mut out = self.clone();
        for (k, v) in out.x.iter_mut().enumerate() {
            if self.mask[k] {
                *v = f(k % p, *v);
            }
        }
        for v in out.y.iter_mut() {
            *v = g(*v);
        }
        out
    }

    /// Writes a CSV with covariates first and the response last.
    pub fn write_csv(&self, path: &Path, na_token: &str) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push(&self.response_name);
        writeln!(out, "{}", header.join(",")).map_err(io_err)?;
        for i in 0..self.n() {
            let mut cells: Vec<String> = (0..self.p())
                .map(|j| match self.value(i, j) {
                    Some(v) => format_value(self.kinds[j], v),
                    None => na_token.to_string(),
                })
                .collect();
            cells.push(format!("{:?}", self.y[i]));
            writeln!(out, "{}", cells.join(",")).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

fn format_value(kind: CovariateKind, v: f64) -> String {
    match kind {
        CovariateKind::Continuous => format!("{v:?}"),
        _ => format!("{}", v as i64),
    }
}

fn check_kind(kind: CovariateKind, v: f64, line: usize, column: &str) -> Result<()> {
    let bad = |value: String| match kind {
        CovariateKind::Binary => Error::InvalidBinary {
            line,
            column: column.to_string(),
            value,
        },
        CovariateKind::Categorical => Error::InvalidCategorical {
            line,
            column: column.to_string(),
            value,
        },
        CovariateKind::Continuous => Error::NonNumeric {
            line,
            column: column.to_string(),
            value,
        },
    };
    match kind {
        CovariateKind::Continuous if !v.is_finite() => Err(bad(v.to_string())),
        CovariateKind::Binary if v != 0.0 && v != 1.0 => Err(bad(v.to_string())),
        CovariateKind::Categorical if v < 0.0 || v.fract() != 0.0 || v > 1e6 => {
            Err(bad(v.to_string()))
        }
        _ => Ok(()),
    }
}

/// How to interpret a CSV file: which column is the response, the kind of
/// each remaining column (in header order), and the missing-value token.
#[derive(Debug, Clone)]
pub struct Schema {
    pub response: String,
    pub kinds: Vec<CovariateKind>,
    pub na_token: String,
}

impl Schema {
    pub fn new(response: impl Into<String>, kinds: Vec<CovariateKind>) -> Self {
        Self {
            response: response.into(),
            kinds,
            na_token: "NA".to_string(),
        }
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(io_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let response_col = header
        .iter()
        .position(|h| *h == schema.response)
        .ok_or_else(|| Error::MissingResponse {
            path: path.to_path_buf(),
            response: schema.response.clone(),
        })?;
    let covariate_cols: Vec<usize> = (0..header.len()).filter(|&c| c != response_col).collect();
    if covariate_cols.len() != schema.kinds.len() {
        return Err(Error::SchemaMismatch {
            path: path.to_path_buf(),
            expected: schema.kinds.len(),
            found: covariate_cols.len(),
        });
    }
    let names: Vec<String> = covariate_cols.iter().map(|&c| header[c].clone()).collect();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(io_err)?;
        if record.len() != header.len() {
            return Err(Error::ColumnCount {
                path: path.to_path_buf(),
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let resp = &record[response_col];
        if resp == schema.na_token {
            return Err(Error::MissingResponseValue { line });
        }
        y.push(parse_number(resp, line, &schema.response)?);
        let mut row = Vec::with_capacity(covariate_cols.len());
        for (j, &c) in covariate_cols.iter().enumerate() {
            row.push(parse_cell(&record[c], schema.kinds[j], &schema.na_token, line, &names[j])?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(
        names,
        schema.response.clone(),
        schema.kinds.clone(),
        &rows,
        y,
    )
}

fn parse_cell(cell: &str, kind: CovariateKind, na_token: &str, line: usize, column: &str) -> Result<Option<f64>> {
    if cell == na_token {
        return Ok(None);
    }
    let v = cell.parse::<f64>().map_err(|_| {
        let column = column.to_string();
        let value = cell.to_string();
        match kind {
            CovariateKind::Binary => Error::InvalidBinary { line, column, value },
            CovariateKind::Categorical => Error::InvalidCategorical { line, column, value },
            CovariateKind::Continuous => Error::NonNumeric { line, column, value },
        }
    })?;
    check_kind(kind, v, line, column)?;
    Ok(Some(v))
}

/// Reads query rows for a fitted model. The header must name every training
/// covariate; the response column may be present and is returned when it is.
pub fn load_queries(path: &Path, d: &Dataset, na_token: &str) -> Result<(Vec<Vec<Option<f64>>>, Option<Vec<f64>>)> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
    };
    let header: Vec<String> = reader.headers().map_err(io_err)?.iter().map(str::to_string).collect();
    let column_err = |column: &str, problem| Error::QueryColumn {
        path: path.to_path_buf(),
        column: column.to_string(),
        problem,
    };
    for h in &header {
        if *h != d.response_name && !d.names.contains(h) {
            return Err(column_err(h, "is not a training covariate"));
        }
    }
    let cols = d
        .names
        .iter()
        .map(|n| header.iter().position(|h| h == n).ok_or_else(|| column_err(n, "is missing")))
        .collect::<Result<Vec<usize>>>()?;
    let response_col = header.iter().position(|h| *h == d.response_name);
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(io_err)?;
        if record.len() != header.len() {
            return Err(Error::ColumnCount {
                path: path.to_path_buf(),
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let row = cols
            .iter()
            .enumerate()
            .map(|(j, &c)| parse_cell(&record[c], d.kinds[j], na_token, line, &d.names[j]))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
        if let Some(c) = response_col {
            let cell = &record[c];
            truth.push(if cell == na_token { f64::NAN } else { parse_number(cell, line, &d.response_name)? });
        }
    }
    Ok((rows, response_col.map(|_| truth)))
}

fn parse_number(cell: &str, line: usize, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            line,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

/// Location/scale pair: `z = (x - location) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub location: f64,
    pub scale: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        location: 0.0,
        scale: 1.0,
    };

    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        (x - self.location) / self.scale
    }

    #[inline]
    pub fn inverse(&self, z: f64) -> f64 {
        self.location + self.scale * z
    }
}

/// Plug-in centering and scaling for continuous covariates and the response,
/// estimated from observed entries only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    /// `None` for binary and categorical covariates, which are left untouched.
    pub covariates: Vec<Option<Affine>>,
    pub response: Affine,
}

fn mean_sd(values: &[f64]) -> Option<Affine> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    // Spread is judged relative to magnitude so that constant columns with
    // rounding noise are still caught.
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return None;
    }
    Some(Affine {
        location: mean,
        scale: sd,
    })
}

pub fn standardize(d: &Dataset) -> Result<Standardization> {
    let mut covariates = Vec::with_capacity(d.p());
    for j in 0..d.p() {
        if d.kind(j) != CovariateKind::Continuous {
            covariates.push(None);
            continue;
        }
        let obs: Vec<f64> = (0..d.n()).filter_map(|i| d.value(i, j)).collect();
        let affine = mean_sd(&obs).ok_or_else(|| Error::DegenerateCovariate(d.names[j].clone()))?;
        covariates.push(Some(affine));
    }
    let response = mean_sd(d.y()).ok_or(Error::DegenerateResponse)?;
    Ok(Standardization {
        covariates,
        response,
    })
}

impl Standardization {
    /// No-op transform for `p` covariates.
    pub fn identity(p: usize) -> Self {
        Self {
            covariates: vec![Some(Affine::IDENTITY); p],
            response: Affine::IDENTITY,
        }
    }

    /// Standardizes continuous covariates and the response of `d`.
    pub fn apply(&self, d: &Dataset) -> Dataset {
        d.map_values(
            |j, v| match self.covariates[j] {
                Some(a) => a.forward(v),
                None => v,
            },
            |y| self.response.forward(y),
        )
    }

    /// Standardizes a partial covariate vector.
    pub fn apply_row(&self, row: &[Option<f64>]) -> Vec<Option<f64>> {
        row.iter()
            .zip(&self.covariates)
            .map(|(v, a)| match (v, a) {
                (Some(v), Some(a)) => Some(a.forward(*v)),
                (v, _) => *v,
            })
            .collect()
    }
}

/// Splits `d` into (train, test) with `floor(fraction * n)` test rows chosen
/// uniformly at random. Rows keep their original relative order.
pub fn split_train_test(d: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {fraction} outside (0, 1)"
        )));
    }
    let n = d.n();
    let n_test = (fraction * n as f64 + 1e-9).floor() as usize;
    if n_test < 1 || n_test >= n {
        return Err(Error::InvalidArgument(format!(
            "test fraction {fraction} gives {n_test} of {n} rows"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, "split", 0));
    let mut test: Vec<usize> = idx[..n_test].to_vec();
    let mut train: Vec<usize> = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((d.subset(&train), d.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn cont(p: usize) -> Vec<CovariateKind> {
        vec![CovariateKind::Continuous; p]
    }

    #[test]
    fn mask_mirrors_na_cells() {
        let f = write("a,b,y\n1,2,0.5\n3,NA,1.5\n5,6,2.5\n");
        let d = load_csv(f.path(), &Schema::new("y", cont(2))).unwrap();
        assert_eq!(d.n(), 3);
        let zeros = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .filter(|&(i, j)| !d.is_observed(i, j))
            .collect::<Vec<_>>();
        assert_eq!(zeros, vec![(1, 1)]);
        assert_eq!(d.value(1, 1), None);
        assert_eq!(d.y(), &[0.5, 1.5, 2.5]);
    }

    #[test]
    fn query_columns_follow_training_names() {
        let f = write("a,b,y\n1,2,0.5\n3,NA,1.5\n");
        let d = load_csv(f.path(), &Schema::new("y", cont(2))).unwrap();
        let q = write("b,a\nNA,NA\n4,1.5\n");
        let (rows, truth) = load_queries(q.path(), &d, "NA").unwrap();
        assert_eq!(rows, vec![vec![None, None], vec![Some(1.5), Some(4.0)]]);
        assert!(truth.is_none());
        let q = write("a,b,y\n1,2,NA\n");
        let (_, truth) = load_queries(q.path(), &d, "NA").unwrap();
        assert!(truth.unwrap()[0].is_nan());
        let q = write("a\n1\n");
        assert!(matches!(load_queries(q.path(), &d, "NA"), Err(Error::QueryColumn { .. })));
        let q = write("a,b,c\n1,2,3\n");
        assert!(matches!(load_queries(q.path(), &d, "NA"), Err(Error::QueryColumn { .. })));
    }

    #[test]
    fn custom_na_token() {
        let f = write("a,y\n.,1\n2,3\n");
        let mut schema = Schema::new("y", cont(1));
        schema.na_token = ".".into();
        let d = load_csv(f.path(), &schema).unwrap();
        assert!(!d.is_observed(0, 0));
    }

    #[test]
    fn rejects_bad_binary() {
        let f = write("a,b,y\n1,0,1\n2,2,1\n");
        let kinds = vec![CovariateKind::Continuous, CovariateKind::Binary];
        let err = load_csv(f.path(), &Schema::new("y", kinds)).unwrap_err();
        assert!(err.to_string().contains("invalid binary value"), "{err}");
    }

    #[test]
    fn rejects_malformed_and_non_numeric_rows() {
        let f = write("a,y\n1,2\n3\n");
        let err = load_csv(f.path(), &Schema::new("y", cont(1))).unwrap_err();
        assert!(matches!(err, Error::ColumnCount { line: 3, .. }), "{err}");

        let f = write("a,y\nfoo,2\n");
        let err = load_csv(f.path(), &Schema::new("y", cont(1))).unwrap_err();
        assert!(matches!(err, Error::NonNumeric { .. }), "{err}");

        let f = write("a,y\n");
        let err = load_csv(f.path(), &Schema::new("y", cont(1))).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));

        let f = write("a,b,y\n1,2,3\n");
        let err = load_csv(f.path(), &Schema::new("y", cont(1))).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }));
    }

    #[test]
    fn categorical_codes() {
        let f = write("g,y\n0,1\n2,1\nNA,3\n");
        let d = load_csv(f.path(), &Schema::new("y", vec![CovariateKind::Categorical])).unwrap();
        assert_eq!(d.levels(0), 3);
        let f = write("g,y\n1.5,1\n");
        assert!(load_csv(f.path(), &Schema::new("y", vec![CovariateKind::Categorical])).is_err());
    }

    fn one_col(values: &[Option<f64>]) -> Dataset {
        let rows: Vec<Vec<Option<f64>>> = values.iter().map(|v| vec![*v]).collect();
        let y = (0..values.len()).map(|i| i as f64).collect();
        Dataset::new(vec!["a".into()], "y", cont(1), &rows, y).unwrap()
    }

    #[test]
    fn two_point_standardization() {
        let d = one_col(&[Some(1.0), None, Some(3.0)]);
        let s = standardize(&d).unwrap();
        let a = s.covariates[0].unwrap();
        assert_eq!(a.location, 2.0);
        assert!((a.scale - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn standardized_column_is_identity() {
        let v = [-1.5f64, -0.5, 0.5, 1.5];
        let sd = (v.iter().map(|x| x * x).sum::<f64>() / 3.0).sqrt();
        let vals: Vec<Option<f64>> = v.iter().map(|x| Some(x / sd)).collect();
        let d = one_col(&vals);
        let a = standardize(&d).unwrap().covariates[0].unwrap();
        assert!(a.location.abs() < 1e-12);
        assert!((a.scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_spread_names_covariate() {
        let d = one_col(&[Some(4.0), Some(4.0), None]);
        let err = standardize(&d).unwrap_err();
        assert!(err.to_string().contains("`a`"));
        let d = one_col(&[Some(4.0), None]);
        assert!(standardize(&d).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let vals: Vec<Option<f64>> = (0..160).map(|i| Some(i as f64)).collect();
        let d = one_col(&vals);
        let (train, test) = split_train_test(&d, 0.10, 9).unwrap();
        assert_eq!(test.n(), 16);
        assert_eq!(train.n(), 144);
        let (train2, test2) = split_train_test(&d, 0.10, 9).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        let mut all: Vec<f64> = train.y().iter().chain(test.y()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..160).map(|i| i as f64).collect::<Vec<_>>());

        let d2 = one_col(&[Some(1.0), Some(2.0)]);
        let (a, b) = split_train_test(&d2, 0.5, 1).unwrap();
        assert_eq!((a.n(), b.n()), (1, 1));
        assert!(split_train_test(&d2, 1.0, 1).is_err());
        assert!(split_train_test(&d2, 0.0, 1).is_err());
        assert!(split_train_test(&d2, 0.2, 1).is_err());
    }
}
