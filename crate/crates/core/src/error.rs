use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: header has {found} covariate columns but the schema lists {expected} kinds")]
    SchemaMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{path}: column `{column}` {problem}")]
    QueryColumn {
        path: PathBuf,
        column: String,
        problem: &'static str,
    },
    #[error("{path}: response column `{response}` not found in header")]
    MissingResponse { path: PathBuf, response: String },
    #[error("line {line}, column `{column}`: non-numeric value `{value}`")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },
    #[error("line {line}, column `{column}`: invalid binary value `{value}`")]
    InvalidBinary {
        line: usize,
        column: String,
        value: String,
    },
    #[error("line {line}, column `{column}`: invalid categorical code `{value}`")]
    InvalidCategorical {
        line: usize,
        column: String,
        value: String,
    },
    #[error("line {line}: missing response value")]
    MissingResponseValue { line: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("covariate `{0}` has fewer than two observed values or zero spread")]
    DegenerateCovariate(String),
    #[error("response has zero spread")]
    DegenerateResponse,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite input value {0}")]
    NonFinite(f64),
    #[error("value {0} is not binary")]
    NotBinary(f64),
}
