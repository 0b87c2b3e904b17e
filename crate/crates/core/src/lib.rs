//! Bayesian nonparametric regression for covariate vectors of varying
//! dimension.
//!
//! Units are clustered with a product partition prior whose similarity
//! factors only look at the covariates each unit reports. Outcomes follow a
//! cluster-specific model: a plain Gaussian ([`ModelKind::VDReg`]) or a local
//! linear regression with unreported covariates integrated out
//! ([`ModelKind::VDLReg`]). Prediction for a new unit works with whatever
//! subset of covariates it has.

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod outcome;
pub mod partition;
pub mod predict;
pub mod records;
pub mod rng;
pub mod sampler;
pub mod similarity;
pub mod simstudy;

pub use dataset::{
    load_csv, load_queries, split_train_test, standardize, CovariateKind, Dataset, Schema, Standardization,
};
pub use error::{Error, Result};
pub use outcome::{ClusterParams, ModelKind, OutcomePriors};
pub use partition::{enumerate_partitions, CohesionConfig, Partition};
pub use predict::{mspe, PredictiveQuery, Predictor};
pub use sampler::{run_chain, McmcConfig, ModelConfig, PosteriorDraws, Prepared};
pub use similarity::SimilarityConfig;
