use std::collections::HashMap;

use crate::data::{is_binary, TabularDataset};
use crate::error::{Error, Result};
use crate::terms::Monomial;

use super::ols::NormalEquations;
use super::{EstimateRecord, Estimator, Resample};

/// `mean(Y | T=1) - mean(Y | T=0)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiffInMeans;

pub fn diff_in_means(d: &TabularDataset) -> Result<EstimateRecord> {
    DiffInMeans.estimate(d)
}

struct DimResample<'a> {
    t: &'a [u8],
    y: &'a [f64],
}

impl Resample for DimResample<'_> {
    fn n_rows(&self) -> usize {
        self.y.len()
    }

    fn estimate_rows(&self, rows: &[u32]) -> Result<f64> {
        let mut sums = [0.0; 2];
        let mut counts = [0usize; 2];
        for &r in rows {
            let arm = usize::from(self.t[r as usize] == 1);
            sums[arm] += self.y[r as usize];
            counts[arm] += 1;
        }
        for arm in 0..2 {
            if counts[arm] == 0 {
                return Err(Error::EmptyArm(arm as u8));
            }
        }
        Ok(sums[1] / counts[1] as f64 - sums[0] / counts[0] as f64)
    }
}

impl Estimator for DiffInMeans {
    fn name(&self) -> &str {
        "dim"
    }

    fn estimate(&self, d: &TabularDataset) -> Result<EstimateRecord> {
        let r = self.prepare(d)?;
        let all: Vec<u32> = (0..d.n_rows() as u32).collect();
        Ok(EstimateRecord::new("dim", r.estimate_rows(&all)?, d.n_rows()))
    }

    fn prepare<'a>(&'a self, d: &'a TabularDataset) -> Result<Box<dyn Resample + 'a>> {
        Ok(Box::new(DimResample {
            t: d.treatment(),
            y: d.outcome(),
        }))
    }
}

/// Backdoor adjustment over one binary covariate from contingency cells:
/// `sum_c P̂(c) (Ê[Y|T=1,c] - Ê[Y|T=0,c])`.
#[derive(Debug, Clone)]
pub struct ExactBackdoor {
    pub covariate: String,
}

impl ExactBackdoor {
    pub fn new(covariate: impl Into<String>) -> Self {
        Self {
            covariate: covariate.into(),
        }
    }
}

pub fn exact_backdoor_binary(d: &TabularDataset, covariate: &str) -> Result<EstimateRecord> {
    ExactBackdoor::new(covariate).estimate(d)
}

struct CellResample<'a> {
    covariate: &'a str,
    /// `2 t + c` per row.
    cell: Vec<u8>,
    y: &'a [f64],
}

impl Resample for CellResample<'_> {
    fn n_rows(&self) -> usize {
        self.y.len()
    }

    fn estimate_rows(&self, rows: &[u32]) -> Result<f64> {
        let mut sums = [0.0; 4];
        let mut counts = [0usize; 4];
        for &r in rows {
            let cell = self.cell[r as usize] as usize;
            sums[cell] += self.y[r as usize];
            counts[cell] += 1;
        }
        let n = rows.len() as f64;
        let mut ate = 0.0;
        for c in 0..2 {
            for t in 0..2 {
                if counts[2 * t + c] == 0 {
                    return Err(Error::EmptyCell {
                        treatment: t as u8,
                        covariate: self.covariate.to_string(),
                        level: c as u8,
                    });
                }
            }
            let p_c = (counts[c] + counts[2 + c]) as f64 / n;
            let treated = sums[2 + c] / counts[2 + c] as f64;
            let control = sums[c] / counts[c] as f64;
            ate += p_c * (treated - control);
        }
        Ok(ate)
    }
}

impl Estimator for ExactBackdoor {
    fn name(&self) -> &str {
        "backdoor_exact"
    }

    fn estimate(&self, d: &TabularDataset) -> Result<EstimateRecord> {
        let r = self.prepare(d)?;
        let all: Vec<u32> = (0..d.n_rows() as u32).collect();
        Ok(EstimateRecord::new(self.name(), r.estimate_rows(&all)?, d.n_rows()))
    }

    fn prepare<'a>(&'a self, d: &'a TabularDataset) -> Result<Box<dyn Resample + 'a>> {
        let c = d.covariate(&self.covariate)?;
        if !is_binary(c) {
            return Err(Error::InvalidArgument(format!(
                "exact backdoor needs a binary covariate, `{}` is not",
                self.covariate
            )));
        }
        if d.treatment().iter().any(|&t| t > 1) {
            return Err(Error::InvalidArgument("treatment must be binary".into()));
        }
        let cell = d.treatment().iter().zip(c).map(|(&t, &c)| 2 * t + c as u8).collect();
        Ok(Box::new(CellResample {
            covariate: &self.covariate,
            cell,
            y: d.outcome(),
        }))
    }
}

/// Least-squares outcome model `Y ~ 1 + T + terms`, contrasted by averaging
/// predictions under `do(T=1)` and `do(T=0)` over the sample's covariates.
#[derive(Debug, Clone)]
pub struct ParametricBackdoor {
    pub terms: Vec<Monomial>,
}

impl ParametricBackdoor {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }
}

pub fn parametric_backdoor(d: &TabularDataset, terms: &[Monomial]) -> Result<EstimateRecord> {
    ParametricBackdoor::new(terms.to_vec()).estimate(d)
}

/// Designs with at most this many distinct rows are resampled by counting
/// rows per pattern instead of accumulating each draw's outer product.
const MAX_PATTERNS: usize = 64;

struct OlsResample {
    k: usize,
    y: Vec<f64>,
    layout: DesignLayout,
}

enum DesignLayout {
    /// Columns of the design and of its `do(T=1) - do(T=0)` contrast.
    Dense {
        x_cols: Vec<Vec<f64>>,
        c_cols: Vec<Vec<f64>>,
    },
    /// Distinct `[x | contrast]` patterns and each row's pattern index.
    Grouped {
        patterns: Vec<Vec<f64>>,
        row_pattern: Vec<u8>,
    },
}

impl OlsResample {
    fn finish(&self, ne: &NormalEquations, contrast: &[f64], n: usize) -> Result<f64> {
        let beta = ne
            .solve()
            .ok_or_else(|| Error::RankDeficient("outcome regression design".into()))?;
        Ok(beta.iter().zip(contrast).map(|(b, c)| b * c).sum::<f64>() / n as f64)
    }
}

impl Resample for OlsResample {
    fn n_rows(&self) -> usize {
        self.y.len()
    }

    fn estimate_rows(&self, rows: &[u32]) -> Result<f64> {
        let k = self.k;
        let mut ne = NormalEquations::new(k);
        let mut contrast = vec![0.0; k];
        match &self.layout {
            DesignLayout::Dense { x_cols, c_cols } => {
                // Draw counts as weights, then column dot products: these
                // vectorize, where per-row outer products do not.
                let mut w = vec![0.0; self.y.len()];
                for &r in rows {
                    w[r as usize] += 1.0;
                }
                let wy: Vec<f64> = w.iter().zip(&self.y).map(|(a, b)| a * b).collect();
                let mut xtx = Vec::with_capacity(k * (k + 1) / 2);
                let mut xty = Vec::with_capacity(k);
                for a in 0..k {
                    let wx: Vec<f64> = w.iter().zip(&x_cols[a]).map(|(p, q)| p * q).collect();
                    for col in &x_cols[a..] {
                        xtx.push(dot(&wx, col));
                    }
                    xty.push(dot(&wy, &x_cols[a]));
                    contrast[a] = dot(&w, &c_cols[a]);
                }
                ne = NormalEquations::from_parts(k, xtx, xty);
            }
            DesignLayout::Grouped { patterns, row_pattern } => {
                let mut counts = vec![0u32; patterns.len()];
                let mut ysum = vec![0.0; patterns.len()];
                for &r in rows {
                    let g = row_pattern[r as usize] as usize;
                    counts[g] += 1;
                    ysum[g] += self.y[r as usize];
                }
                for (g, p) in patterns.iter().enumerate() {
                    if counts[g] == 0 {
                        continue;
                    }
                    let w = f64::from(counts[g]);
                    // sum over the group's rows of x x' and x y
                    ne.add(&p[..k], ysum[g] / w, w);
                    for (acc, v) in contrast.iter_mut().zip(&p[k..]) {
                        *acc += w * v;
                    }
                }
            }
        }
        self.finish(&ne, &contrast, rows.len())
    }
}

impl Estimator for ParametricBackdoor {
    fn name(&self) -> &str {
        "backdoor_param"
    }

    fn estimate(&self, d: &TabularDataset) -> Result<EstimateRecord> {
        let r = self.prepare(d)?;
        let all: Vec<u32> = (0..d.n_rows() as u32).collect();
        Ok(EstimateRecord::new(self.name(), r.estimate_rows(&all)?, d.n_rows()))
    }

    fn prepare<'a>(&'a self, d: &'a TabularDataset) -> Result<Box<dyn Resample + 'a>> {
        let n = d.n_rows();
        let k = 2 + self.terms.len();
        let t: Vec<f64> = d.treatment().iter().map(|&t| f64::from(t)).collect();
        // columns of the observed design and of its do(T=1) - do(T=0) contrast
        let mut x_cols = vec![vec![1.0; n], t];
        let mut c_cols = vec![vec![0.0; n], vec![1.0; n]];
        for term in &self.terms {
            if term.involves_treatment() {
                let treated = term.evaluate_column(d, Some(1.0))?;
                x_cols.push(term.evaluate_column(d, None)?);
                c_cols.push(treated);
            } else {
                x_cols.push(term.evaluate_column(d, None)?);
                c_cols.push(vec![0.0; n]);
            }
        }
        let mut packed = Vec::with_capacity(n * 2 * k);
        for i in 0..n {
            packed.extend(x_cols.iter().map(|c| c[i]));
            packed.extend(c_cols.iter().map(|c| c[i]));
        }
        let layout = group_rows(&packed, 2 * k).unwrap_or(DesignLayout::Dense { x_cols, c_cols });
        Ok(Box::new(OlsResample {
            k,
            y: d.outcome().to_vec(),
            layout,
        }))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators so the loop is not one serial dependency chain
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn group_rows(packed: &[f64], width: usize) -> Option<DesignLayout> {
    let mut index: HashMap<Vec<u64>, u8> = HashMap::new();
    let mut patterns = Vec::new();
    let mut row_pattern = Vec::with_capacity(packed.len() / width.max(1));
    for row in packed.chunks_exact(width) {
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        let next = index.len();
        let g = *index.entry(key).or_insert_with(|| {
            patterns.push(row.to_vec());
            next as u8
        });
        if patterns.len() > MAX_PATTERNS {
            return None;
        }
        row_pattern.push(g);
    }
    Some(DesignLayout::Grouped { patterns, row_pattern })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{DgpSetting, SettingId};
    use crate::rng::SeededRng;

    #[test]
    fn dim_hand_cases() {
        let d = TabularDataset::new(vec![], vec![], vec![1, 0], vec![1.0, 0.0]);
        assert_eq!(diff_in_means(&d).unwrap().point_estimate, 1.0);
        let flat = TabularDataset::new(vec![], vec![], vec![1, 0, 1, 0], vec![3.0; 4]);
        assert_eq!(diff_in_means(&flat).unwrap().point_estimate, 0.0);
        let one_arm = TabularDataset::new(vec![], vec![], vec![1, 1], vec![3.0; 2]);
        assert_eq!(diff_in_means(&one_arm), Err(Error::EmptyArm(0)));
    }

    #[test]
    fn exact_backdoor_hand_table() {
        // c=0: treated mean 1, control mean 0; c=1: treated 1, control 1
        let d = TabularDataset::new(
            vec!["C".into()],
            vec![vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]],
            vec![1, 0, 0, 1, 0, 1],
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        );
        // P(c=0) = P(c=1) = 1/2, effects 1 and 0
        let est = exact_backdoor_binary(&d, "C").unwrap().point_estimate;
        assert!((est - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_backdoor_names_empty_cell() {
        let d = TabularDataset::new(
            vec!["C".into()],
            vec![vec![0.0, 0.0, 1.0]],
            vec![1, 0, 1],
            vec![1.0, 0.0, 1.0],
        );
        assert_eq!(
            exact_backdoor_binary(&d, "C"),
            Err(Error::EmptyCell {
                treatment: 0,
                covariate: "C".into(),
                level: 1
            })
        );
    }

    #[test]
    fn parametric_matches_closed_form_setting1() {
        let s = DgpSetting::new(SettingId::Setting1, 2000);
        let d = s.generate(&mut SeededRng::new(5)).unwrap();
        let est = parametric_backdoor(&d, &s.oracle_adjustment_terms())
            .unwrap()
            .point_estimate;
        // Saturated in (T, C): equals the exact cell estimator.
        let exact = exact_backdoor_binary(&d, "C").unwrap().point_estimate;
        assert!((est - exact).abs() < 1e-9, "{est} vs {exact}");
    }

    #[test]
    fn grouped_and_dense_paths_agree() {
        let s = DgpSetting::new(SettingId::Setting1, 500);
        let d = s.generate(&mut SeededRng::new(8)).unwrap();
        let est = ParametricBackdoor::new(s.oracle_adjustment_terms());
        let grouped = est.prepare(&d).unwrap();
        let rows: Vec<u32> = (0..500).map(|i| (i * 7 % 500) as u32).collect();
        let a = grouped.estimate_rows(&rows).unwrap();
        let dense = super::super::MaterializingResample::new(&est, &d);
        let b = dense.estimate_rows(&rows).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn rank_deficiency_faults() {
        let d = TabularDataset::new(
            vec!["C".into()],
            vec![vec![1.0; 4]],
            vec![0, 1, 0, 1],
            vec![0.0, 1.0, 0.0, 1.0],
        );
        let terms = vec!["C".parse().unwrap()];
        assert!(matches!(parametric_backdoor(&d, &terms), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn null_effect_is_near_zero() {
        let mut rng = SeededRng::new(1);
        let base = DgpSetting::new(SettingId::Setting1, 20_000).generate(&mut rng).unwrap();
        let c = base.covariate("C").unwrap().to_vec();
        // Y depends on C only.
        let y: Vec<f64> = base
            .outcome()
            .iter()
            .zip(base.treatment())
            .zip(&c)
            .map(|((&y, &t), &c)| y - 1.5 * f64::from(t) - 2.0 * f64::from(t) * c)
            .collect();
        let d = TabularDataset::new(vec!["C".into()], vec![c], base.treatment().to_vec(), y);
        let terms = vec!["C".parse().unwrap(), "T*C".parse().unwrap()];
        let est = parametric_backdoor(&d, &terms).unwrap().point_estimate;
        assert!(est.abs() < 0.05, "{est}");
    }
}
