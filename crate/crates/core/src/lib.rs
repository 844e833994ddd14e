//! Turning randomized trials into confounded observational benchmarks.
//!
//! An RCT draw ([`dgp`] or external data in a [`TabularDataset`]) is
//! subsampled by [`sampler::rct_rejection_sample`] so that treatment depends
//! on covariates through a chosen [`ConfoundingFunction`], while the ATE stays
//! identified by backdoor adjustment. [`estimators`] are then scored against
//! the RCT's own difference in means, with [`diagnostics`] for intervals,
//! coverage and pre-sampling checks.

pub mod data;
pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod rng;
pub mod sampler;
pub mod terms;

pub use data::{CovariateRow, SparseBinaryMatrix, TabularDataset};
pub use dgp::{DgpSetting, DiscreteRct, SettingId};
pub use error::{Error, Result};
pub use estimators::{EstimateRecord, Estimator, EstimatorKind};
pub use rng::SeededRng;
pub use sampler::{ConfoundingFunction, SamplerKind};
pub use terms::Monomial;
