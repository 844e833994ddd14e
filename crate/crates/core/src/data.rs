//! Dataset representation, validation and summary statistics.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Binary matrix stored as compressed sparse rows of the positions of ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
}

impl SparseBinaryMatrix {
    /// Build from the column positions of the ones in each row. Positions are
    /// sorted and deduplicated.
    pub fn from_rows<R>(n_cols: usize, rows: R) -> Result<Self>
    where
        R: IntoIterator,
        R::Item: IntoIterator<Item = u32>,
    {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        for row in rows {
            let mut row: Vec<u32> = row.into_iter().collect();
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last as usize >= n_cols {
                    return Err(Error::InvalidArgument(format!(
                        "column index {last} out of range for {n_cols} columns"
                    )));
                }
            }
            indices.extend(row);
            indptr.push(indices.len());
        }
        Ok(Self {
            n_cols,
            indptr,
            indices,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Columns holding a one in row `i`, ascending.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&(j as u32)).is_ok()
    }

    pub fn take_rows(&self, rows: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        for &i in rows {
            indices.extend_from_slice(self.row(i));
            indptr.push(indices.len());
        }
        Self {
            n_cols: self.n_cols,
            indptr,
            indices,
        }
    }

    /// Row indices of the ones in each column.
    pub fn columns(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.n_cols];
        for i in 0..self.n_rows() {
            for &j in self.row(i) {
                cols[j as usize].push(i as u32);
            }
        }
        cols
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.n_rows() {
            let row = self.row(i);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                out.push(format!("row {i} has unsorted or repeated column positions"));
            }
            if row.iter().any(|&j| j as usize >= self.n_cols) {
                out.push(format!("row {i} references a column past {}", self.n_cols));
            }
        }
        out
    }
}

/// Rows of covariates `C`, optional high-dimensional proxies `X`, a binary
/// treatment `T` and a real outcome `Y`. Immutable once built.
///
/// Construction does not validate; call [`TabularDataset::validate`] or use
/// [`TabularDataset::try_new`]. Estimators check the invariants they need.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    column_names: Vec<String>,
    covariates: Vec<Vec<f64>>,
    proxies: Option<SparseBinaryMatrix>,
    treatment: Vec<u8>,
    outcome: Vec<f64>,
}

impl TabularDataset {
    pub fn new(column_names: Vec<String>, covariates: Vec<Vec<f64>>, treatment: Vec<u8>, outcome: Vec<f64>) -> Self {
        Self {
            column_names,
            covariates,
            proxies: None,
            treatment,
            outcome,
        }
    }

    /// Like [`TabularDataset::new`], but fails with the validation report.
    pub fn try_new(
        column_names: Vec<String>,
        covariates: Vec<Vec<f64>>,
        treatment: Vec<u8>,
        outcome: Vec<f64>,
    ) -> Result<Self> {
        let d = Self::new(column_names, covariates, treatment, outcome);
        d.validate().into_result()?;
        Ok(d)
    }

    pub fn with_proxies(mut self, proxies: SparseBinaryMatrix) -> Self {
        self.proxies = Some(proxies);
        self
    }

    pub fn n_rows(&self) -> usize {
        self.outcome.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingCovariate(name.to_string()))
    }

    pub fn covariate(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.covariates[self.covariate_index(name)?])
    }

    pub fn proxies(&self) -> Option<&SparseBinaryMatrix> {
        self.proxies.as_ref()
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn row(&self, i: usize) -> RowView<'_> {
        RowView { data: self, row: i }
    }

    /// Number of rows with `T = 0` and `T = 1`.
    pub fn arm_counts(&self) -> [usize; 2] {
        let treated = self.treatment.iter().filter(|&&t| t == 1).count();
        [self.treatment.len() - treated, treated]
    }

    pub fn require_both_arms(&self) -> Result<()> {
        match self.arm_counts() {
            [0, _] => Err(Error::EmptyArm(0)),
            [_, 0] => Err(Error::EmptyArm(1)),
            _ => Ok(()),
        }
    }

    pub fn take_rows(&self, rows: &[usize]) -> Self {
        Self {
            column_names: self.column_names.clone(),
            covariates: self
                .covariates
                .iter()
                .map(|col| rows.iter().map(|&i| col[i]).collect())
                .collect(),
            proxies: self.proxies.as_ref().map(|p| p.take_rows(rows)),
            treatment: rows.iter().map(|&i| self.treatment[i]).collect(),
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// One row's covariates, looked up by name.
#[derive(Clone, Copy)]
pub struct RowView<'a> {
    data: &'a TabularDataset,
    row: usize,
}

impl RowView<'_> {
    pub fn treatment(&self) -> u8 {
        self.data.treatment[self.row]
    }
}

/// Anything that can supply covariate values by name.
pub trait CovariateRow {
    fn value(&self, name: &str) -> Option<f64>;
}

impl CovariateRow for RowView<'_> {
    fn value(&self, name: &str) -> Option<f64> {
        let j = self.data.column_names.iter().position(|c| c == name)?;
        Some(self.data.covariates[j][self.row])
    }
}

impl CovariateRow for [(&str, f64)] {
    fn value(&self, name: &str) -> Option<f64> {
        self.iter().find(|(k, _)| *k == name).map(|&(_, v)| v)
    }
}

impl<const N: usize> CovariateRow for [(&str, f64); N] {
    fn value(&self, name: &str) -> Option<f64> {
        self.as_slice().value(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub column: String,
    pub row: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(r) => write!(f, "column `{}`, row {}: {}", self.column, r, self.message),
            None => write!(f, "column `{}`: {}", self.column, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let shown: Vec<String> = self.violations.iter().take(5).map(|v| v.to_string()).collect();
        let more = self.violations.len().saturating_sub(shown.len());
        let mut msg = shown.join("; ");
        if more > 0 {
            msg.push_str(&format!("; and {more} more"));
        }
        Err(Error::InvalidDataset(msg))
    }
}

/// Check every dataset invariant. Never fails; violations are returned as data.
pub fn validate(d: &TabularDataset) -> ValidationReport {
    let n = d.n_rows();
    let mut violations = Vec::new();
    let mut push = |column: &str, row: Option<usize>, message: String| {
        violations.push(Violation {
            column: column.to_string(),
            row,
            message,
        })
    };

    if d.column_names.len() != d.covariates.len() {
        push(
            "<schema>",
            None,
            format!(
                "{} column names for {} covariate columns",
                d.column_names.len(),
                d.covariates.len()
            ),
        );
    }
    for (i, name) in d.column_names.iter().enumerate() {
        if d.column_names[..i].contains(name) {
            push(name, None, "duplicate column name".into());
        }
    }
    if d.treatment.len() != n {
        push("T", None, format!("{} entries, expected {n}", d.treatment.len()));
    }
    for (i, &t) in d.treatment.iter().enumerate() {
        if t > 1 {
            push("T", Some(i), format!("treatment value {t} is not 0 or 1"));
        }
    }
    for (i, y) in d.outcome.iter().enumerate() {
        if !y.is_finite() {
            push("Y", Some(i), format!("missing or non-finite outcome ({y})"));
        }
    }
    for (name, col) in d.column_names.iter().zip(&d.covariates) {
        if col.len() != n {
            push(name, None, format!("{} entries, expected {n}", col.len()));
        }
        for (i, x) in col.iter().enumerate() {
            if !x.is_finite() {
                push(name, Some(i), format!("missing or non-finite value ({x})"));
            }
        }
    }
    if let Some(p) = &d.proxies {
        if p.n_rows() != n {
            push("X", None, format!("{} proxy rows, expected {n}", p.n_rows()));
        }
        for msg in p.violations() {
            push("X", None, msg);
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n_rows: usize,
    /// `#(T=1) / n_rows`.
    pub treated_fraction: f64,
    /// Mean outcome for `T = 0` and `T = 1`; `None` when the arm is empty.
    pub mean_outcome_by_arm: [Option<f64>; 2],
    pub covariate_means: Vec<(String, f64)>,
}

pub fn summary(d: &TabularDataset) -> SummaryStats {
    let n = d.n_rows();
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (&t, &y) in d.treatment.iter().zip(&d.outcome) {
        let arm = usize::from(t == 1);
        sums[arm] += y;
        counts[arm] += 1;
    }
    let arm_mean = |a: usize| (counts[a] > 0).then(|| sums[a] / counts[a] as f64);
    SummaryStats {
        n_rows: n,
        treated_fraction: counts[1] as f64 / n as f64,
        mean_outcome_by_arm: [arm_mean(0), arm_mean(1)],
        covariate_means: d
            .column_names
            .iter()
            .zip(&d.covariates)
            .map(|(name, col)| (name.clone(), col.iter().sum::<f64>() / n as f64))
            .collect(),
    }
}

pub(crate) fn is_binary(values: &[f64]) -> bool {
    values.iter().all(|&v| v == 0.0 || v == 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_rows() -> TabularDataset {
        TabularDataset::new(
            vec!["C".into()],
            vec![vec![0.0, 1.0, 0.0, 1.0]],
            vec![0, 0, 1, 1],
            vec![0.0, 1.0, 0.0, 1.0],
        )
    }

    #[test]
    fn well_formed_dataset_has_empty_report() {
        assert!(four_rows().validate().is_valid());
    }

    #[test]
    fn treatment_value_two_is_named() {
        let d = TabularDataset::new(vec![], vec![], vec![0, 2, 1], vec![0.0; 3]);
        let report = d.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].column, "T");
        assert_eq!(report.violations[0].row, Some(1));
    }

    #[test]
    fn nan_outcome_is_reported() {
        let d = TabularDataset::new(vec![], vec![], vec![0, 1], vec![0.0, f64::NAN]);
        let report = d.validate();
        assert!(!report.is_valid());
        assert_eq!(report.violations[0].row, Some(1));
        assert!(TabularDataset::try_new(vec![], vec![], vec![0, 1], vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn ragged_columns_are_reported() {
        let d = TabularDataset::new(vec!["C".into()], vec![vec![1.0]], vec![0, 1], vec![0.0, 1.0]);
        assert_eq!(d.validate().violations[0].column, "C");
    }

    #[test]
    fn summary_arm_means() {
        let s = summary(&four_rows());
        assert_eq!(s.mean_outcome_by_arm, [Some(0.5), Some(0.5)]);
        assert_eq!(s.treated_fraction, 0.5);
        assert_eq!(s.covariate_means, vec![("C".to_string(), 0.5)]);
    }

    #[test]
    fn all_treated_summary() {
        let d = TabularDataset::new(vec![], vec![], vec![1, 1, 1], vec![1.0, 2.0, 3.0]);
        let s = summary(&d);
        assert_eq!(s.treated_fraction, 1.0);
        assert_eq!(s.mean_outcome_by_arm, [None, Some(2.0)]);
    }

    #[test]
    fn sparse_rows_are_normalized() {
        let m = SparseBinaryMatrix::from_rows(4, vec![vec![3, 1, 1], vec![], vec![0]]).unwrap();
        assert_eq!(m.row(0), &[1, 3]);
        assert!(m.row(1).is_empty());
        assert!(m.get(2, 0) && !m.get(2, 1));
        assert_eq!(m.columns()[1], vec![0]);
        assert!(SparseBinaryMatrix::from_rows(2, vec![vec![2]]).is_err());
    }

    #[test]
    fn take_rows_keeps_alignment() {
        let d = four_rows();
        let sub = d.take_rows(&[3, 0, 3]);
        assert_eq!(sub.treatment(), &[1, 0, 1]);
        assert_eq!(sub.covariate("C").unwrap(), &[1.0, 0.0, 1.0]);
    }
}
