use serde::Serialize;

use crate::data::{is_binary, TabularDataset};
use crate::error::{Error, Result};

/// Odds ratio of two binary variables from their 2x2 table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OddsRatio {
    pub value: f64,
    /// Counts `[n00, n01, n10, n11]`, `n_ab` = rows with first = a, second = b.
    pub counts: [u64; 4],
    /// A cell was empty and 0.5 was added to every cell.
    pub corrected: bool,
}

impl OddsRatio {
    /// Large-sample standard error of `ln(value)`.
    pub fn log_standard_error(&self) -> f64 {
        let pad = if self.corrected { 0.5 } else { 0.0 };
        self.counts.iter().map(|&c| 1.0 / (c as f64 + pad)).sum::<f64>().sqrt()
    }
}

/// `(n11 n00) / (n10 n01)`, with the Haldane-Anscombe correction when any
/// cell is empty.
pub fn odds_ratio(a: &[f64], b: &[f64]) -> Result<OddsRatio> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "odds ratio of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !is_binary(a) || !is_binary(b) {
        return Err(Error::InvalidArgument("odds ratio needs binary vectors".into()));
    }
    let mut counts = [0u64; 4];
    for (&x, &y) in a.iter().zip(b) {
        counts[2 * (x as usize) + y as usize] += 1;
    }
    let corrected = counts.contains(&0);
    let pad = if corrected { 0.5 } else { 0.0 };
    let c = |k: usize| counts[k] as f64 + pad;
    Ok(OddsRatio {
        value: (c(3) * c(0)) / (c(2) * c(1)),
        counts,
        corrected,
    })
}

/// Pearson correlation; 0 when either vector is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Minimum `|ln OR|` for a binary covariate to count as outcome-associated.
pub const MIN_LOG_ODDS_RATIO: f64 = 0.182_321_556_793_954_6; // ln 1.2
/// Minimum `|r|` for a non-binary covariate or outcome.
pub const MIN_CORRELATION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Association {
    OddsRatio(OddsRatio),
    Correlation { r: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateAssociation {
    pub covariate: String,
    pub association: Association,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreconditionReport {
    pub covariates: Vec<CovariateAssociation>,
    /// At least one covariate is associated with the outcome.
    pub pass: bool,
}

/// Association of each covariate with the outcome.
pub fn check_precondition(d: &TabularDataset) -> PreconditionReport {
    let y = d.outcome();
    let y_binary = is_binary(y);
    let covariates: Vec<CovariateAssociation> = d
        .column_names()
        .iter()
        .zip(d.covariates())
        .map(|(name, col)| {
            let (association, pass) = match (y_binary && is_binary(col)).then(|| odds_ratio(col, y).ok()).flatten() {
                Some(or) => (Association::OddsRatio(or), or.value.ln().abs() >= MIN_LOG_ODDS_RATIO),
                None => {
                    let r = correlation(col, y);
                    (Association::Correlation { r }, r.abs() >= MIN_CORRELATION)
                }
            };
            CovariateAssociation {
                covariate: name.clone(),
                association,
                pass,
            }
        })
        .collect();
    let pass = covariates.iter().any(|c| c.pass);
    PreconditionReport { covariates, pass }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelOverlap {
    pub level: f64,
    pub n: usize,
    pub treated_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub covariate: String,
    /// Ascending by level.
    pub levels: Vec<LevelOverlap>,
    /// Levels whose treated fraction is 0 or 1.
    pub failing_levels: Vec<f64>,
    pub pass: bool,
}

/// Empirical `P(T = 1 | C = c)` for each observed level of a discrete covariate.
pub fn check_overlap(d: &TabularDataset, covariate: &str) -> Result<OverlapReport> {
    let col = d.covariate(covariate)?;
    let mut levels: Vec<(f64, usize, usize)> = Vec::new();
    for (&c, &t) in col.iter().zip(d.treatment()) {
        match levels.iter_mut().find(|l| l.0 == c) {
            Some(l) => {
                l.1 += 1;
                l.2 += t as usize;
            }
            None => levels.push((c, 1, t as usize)),
        }
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let levels: Vec<LevelOverlap> = levels
        .into_iter()
        .map(|(level, n, treated)| LevelOverlap {
            level,
            n,
            treated_fraction: treated as f64 / n as f64,
        })
        .collect();
    let failing_levels: Vec<f64> = levels
        .iter()
        .filter(|l| !(l.treated_fraction > 0.0 && l.treated_fraction < 1.0))
        .map(|l| l.level)
        .collect();
    Ok(OverlapReport {
        covariate: covariate.to_string(),
        pass: failing_levels.is_empty(),
        levels,
        failing_levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n11: usize, n10: usize, n01: usize, n00: usize) -> (Vec<f64>, Vec<f64>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (x, y, k) in [(1.0, 1.0, n11), (1.0, 0.0, n10), (0.0, 1.0, n01), (0.0, 0.0, n00)] {
            a.extend(std::iter::repeat(x).take(k));
            b.extend(std::iter::repeat(y).take(k));
        }
        (a, b)
    }

    #[test]
    fn hand_table_odds_ratio() {
        let (a, b) = table(30, 10, 10, 30);
        let or = odds_ratio(&a, &b).unwrap();
        assert_eq!(or.value, 9.0);
        assert!(!or.corrected);
    }

    #[test]
    fn empty_cell_is_corrected_and_flagged() {
        let (a, b) = table(5, 0, 3, 4);
        let or = odds_ratio(&a, &b).unwrap();
        assert!(or.corrected);
        assert!((or.value - (5.5 * 4.5) / (0.5 * 3.5)).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(odds_ratio(&[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn overlap_names_fully_treated_level() {
        let d = TabularDataset::try_new(
            vec!["C".into()],
            vec![vec![0.0, 0.0, 1.0, 1.0]],
            vec![0, 1, 1, 1],
            vec![0.0; 4],
        )
        .unwrap();
        let r = check_overlap(&d, "C").unwrap();
        assert!(!r.pass);
        assert_eq!(r.failing_levels, vec![1.0]);
    }

    #[test]
    fn single_level_with_mixed_arms_passes() {
        let d = TabularDataset::try_new(vec!["C".into()], vec![vec![1.0; 3]], vec![0, 1, 0], vec![0.0; 3]).unwrap();
        assert!(check_overlap(&d, "C").unwrap().pass);
    }

    #[test]
    fn noise_outcome_fails_precondition() {
        let n = 1000;
        let c: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i / 2) % 2) as f64).collect();
        let d = TabularDataset::try_new(vec!["C".into()], vec![c], vec![0; n], y).unwrap();
        let r = check_precondition(&d);
        assert!(!r.pass);
        match r.covariates[0].association {
            Association::OddsRatio(or) => assert_eq!(or.value, 1.0),
            _ => panic!("binary pair should use the odds ratio"),
        }
    }
}
