//! Average treatment effect estimators.
//!
//! Unadjusted and oracle-adjusted estimators ([`DiffInMeans`],
//! [`ExactBackdoor`], [`ParametricBackdoor`]) work on the covariates
//! directly. The learned estimators (`q`, `iptw`, `aiptw`, `dml`) are plug-in
//! stages over cross-fitted nuisance predictions, see [`crossfit_nuisances`]
//! and [`PluginEstimator`].

mod backdoor;
mod crossfit;
pub mod learners;
mod ols;
mod plugin;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use backdoor::{diff_in_means, exact_backdoor_binary, parametric_backdoor};
pub use backdoor::{DiffInMeans, ExactBackdoor, ParametricBackdoor};
pub use crossfit::{
    crossfit_nuisances, crossfit_nuisances_clipped, NuisanceEstimates, DEFAULT_CLIP_EPSILON, DEFAULT_K_FOLDS,
};
pub use plugin::{tau_aiptw, tau_dml, tau_iptw, tau_q, PluginEstimator, PluginKind};

use crate::data::TabularDataset;
use crate::error::Result;
use learners::BaseLearnerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub estimator: String,
    pub point_estimate: f64,
    /// Percentile interval, when one was computed. `lo <= hi`, but the
    /// interval need not contain the point estimate.
    pub bootstrap_ci: Option<(f64, f64)>,
    pub n_used: usize,
    pub provenance: Option<NuisanceProvenance>,
}

impl EstimateRecord {
    pub fn new(estimator: impl Into<String>, point_estimate: f64, n_used: usize) -> Self {
        Self {
            estimator: estimator.into(),
            point_estimate,
            bootstrap_ci: None,
            n_used,
            provenance: None,
        }
    }
}

/// How the nuisance predictions behind an estimate were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceProvenance {
    /// `None` for externally supplied (oracle) nuisances.
    pub learner: Option<BaseLearnerSpec>,
    pub k_folds: usize,
    pub clip_epsilon: f64,
    pub warnings: Vec<String>,
}

/// An ATE estimator over a whole dataset.
pub trait Estimator: Sync {
    fn name(&self) -> &str;

    fn estimate(&self, d: &TabularDataset) -> Result<EstimateRecord>;

    /// Precompute whatever lets the estimate be re-evaluated on row
    /// resamples of `d` cheaply. Used by the bootstrap.
    fn prepare<'a>(&'a self, d: &'a TabularDataset) -> Result<Box<dyn Resample + 'a>>;
}

/// An estimator bound to one dataset, evaluable on any multiset of its rows.
pub trait Resample: Sync {
    fn n_rows(&self) -> usize;

    /// Point estimate on the rows `rows` (indices into the prepared dataset,
    /// repeats allowed).
    fn estimate_rows(&self, rows: &[u32]) -> Result<f64>;
}

/// Resampling by materializing each resample; correct for any estimator.
pub struct MaterializingResample<'a> {
    estimator: &'a dyn Estimator,
    data: &'a TabularDataset,
}

impl<'a> MaterializingResample<'a> {
    pub fn new(estimator: &'a dyn Estimator, data: &'a TabularDataset) -> Self {
        Self { estimator, data }
    }
}

impl Resample for MaterializingResample<'_> {
    fn n_rows(&self) -> usize {
        self.data.n_rows()
    }

    fn estimate_rows(&self, rows: &[u32]) -> Result<f64> {
        let rows: Vec<usize> = rows.iter().map(|&r| r as usize).collect();
        let sub = self.data.take_rows(&rows);
        Ok(self.estimator.estimate(&sub)?.point_estimate)
    }
}

/// Estimator names accepted in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "dim")]
    DiffInMeans,
    #[serde(rename = "backdoor_exact")]
    BackdoorExact,
    #[serde(rename = "backdoor_param")]
    BackdoorParam,
    #[serde(rename = "q")]
    Q,
    #[serde(rename = "iptw")]
    Iptw,
    #[serde(rename = "aiptw")]
    Aiptw,
    #[serde(rename = "dml")]
    Dml,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        Self::DiffInMeans,
        Self::BackdoorExact,
        Self::BackdoorParam,
        Self::Q,
        Self::Iptw,
        Self::Aiptw,
        Self::Dml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DiffInMeans => "dim",
            Self::BackdoorExact => "backdoor_exact",
            Self::BackdoorParam => "backdoor_param",
            Self::Q => "q",
            Self::Iptw => "iptw",
            Self::Aiptw => "aiptw",
            Self::Dml => "dml",
        }
    }

    /// The plug-in stage, for estimators built on learned nuisances.
    pub fn plugin(self) -> Option<PluginKind> {
        match self {
            Self::Q => Some(PluginKind::Q),
            Self::Iptw => Some(PluginKind::Iptw),
            Self::Aiptw => Some(PluginKind::Aiptw),
            Self::Dml => Some(PluginKind::Dml),
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::Error::InvalidArgument(format!("unknown estimator `{s}`")))
    }
}
