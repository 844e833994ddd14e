//! Binary classifiers used as nuisance models.

mod elastic_net;
mod gbdt;

pub use elastic_net::{ElasticNetModel, ElasticNetSpec};
pub use gbdt::{GbdtModel, GbdtSpec};

use serde::{Deserialize, Serialize};

use crate::data::{SparseBinaryMatrix, TabularDataset};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaseLearnerSpec {
    LogisticElasticNet(ElasticNetSpec),
    GradientBoostedTrees(GbdtSpec),
}

impl Default for BaseLearnerSpec {
    fn default() -> Self {
        Self::LogisticElasticNet(ElasticNetSpec::default())
    }
}

impl BaseLearnerSpec {
    pub fn check(&self) -> Result<()> {
        match self {
            Self::LogisticElasticNet(s) => s.check(),
            Self::GradientBoostedTrees(s) => s.check(),
        }
    }
}

/// Column-oriented feature matrix holding only the nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    columns: Vec<SparseColumn>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseColumn {
    pub rows: Vec<u32>,
    pub values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_dense_columns(n_rows: usize, columns: &[Vec<f64>]) -> Self {
        let columns = columns
            .iter()
            .map(|col| {
                assert_eq!(col.len(), n_rows, "ragged feature column");
                let mut c = SparseColumn::default();
                for (i, &v) in col.iter().enumerate() {
                    if v != 0.0 {
                        c.rows.push(i as u32);
                        c.values.push(v);
                    }
                }
                c
            })
            .collect();
        Self { n_rows, columns }
    }

    pub fn from_sparse_binary(m: &SparseBinaryMatrix) -> Self {
        let columns = m
            .columns()
            .into_iter()
            .map(|rows| SparseColumn {
                values: vec![1.0; rows.len()],
                rows,
            })
            .collect();
        Self {
            n_rows: m.n_rows(),
            columns,
        }
    }

    /// The proxies `X` when present, otherwise the covariates.
    pub fn from_dataset(d: &TabularDataset) -> Self {
        match d.proxies() {
            Some(p) => Self::from_sparse_binary(p),
            None => Self::from_dense_columns(d.n_rows(), d.covariates()),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &SparseColumn {
        &self.columns[j]
    }

    pub fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        let c = &self.columns[j];
        for (&i, &v) in c.rows.iter().zip(&c.values) {
            out[i as usize] = v;
        }
        out
    }

    /// Submatrix of the given distinct rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut position = vec![u32::MAX; self.n_rows];
        for (new, &old) in rows.iter().enumerate() {
            position[old] = new as u32;
        }
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let mut entries: Vec<(u32, f64)> = c
                    .rows
                    .iter()
                    .zip(&c.values)
                    .filter(|(&i, _)| position[i as usize] != u32::MAX)
                    .map(|(&i, &v)| (position[i as usize], v))
                    .collect();
                entries.sort_unstable_by_key(|e| e.0);
                SparseColumn {
                    rows: entries.iter().map(|e| e.0).collect(),
                    values: entries.iter().map(|e| e.1).collect(),
                }
            })
            .collect();
        Self {
            n_rows: rows.len(),
            columns,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    ElasticNet(ElasticNetModel),
    Gbdt(GbdtModel),
    /// Fitted on single-class labels.
    Constant(f64),
}

impl TrainedModel {
    /// `P(label = 1 | x)` for every row of `x`.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Vec<f64> {
        match self {
            Self::ElasticNet(m) => m.predict_proba(x),
            Self::Gbdt(m) => m.predict_proba(x),
            Self::Constant(p) => vec![*p; x.n_rows()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct FittedLearner {
    pub model: TrainedModel,
    /// Inverse regularization strength picked by inner cross-validation.
    pub selected_c: Option<f64>,
    pub warnings: Vec<String>,
}

/// Fit a binary classifier to `labels` (each 0.0 or 1.0).
pub fn fit_base_learner(
    spec: &BaseLearnerSpec,
    features: &FeatureMatrix,
    labels: &[f64],
    rng: &mut SeededRng,
) -> Result<FittedLearner> {
    spec.check()?;
    if labels.len() != features.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.n_rows()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("cannot fit on zero rows".into()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(Error::InvalidArgument(format!(
            "base learners need binary labels, found {bad}"
        )));
    }
    let positives = labels.iter().filter(|&&l| l == 1.0).count();
    if positives == 0 || positives == labels.len() {
        let p = positives as f64 / labels.len() as f64;
        return Ok(FittedLearner {
            model: TrainedModel::Constant(p),
            selected_c: None,
            warnings: vec![format!("single-class labels; constant prediction {p}")],
        });
    }
    match spec {
        BaseLearnerSpec::LogisticElasticNet(s) => elastic_net::fit_cv(s, features, labels, rng),
        BaseLearnerSpec::GradientBoostedTrees(s) => Ok(FittedLearner {
            model: TrainedModel::Gbdt(gbdt::fit(s, features, labels)),
            selected_c: None,
            warnings: Vec::new(),
        }),
    }
}
