use serde::{Deserialize, Serialize};

use super::{EstimateRecord, Estimator, NuisanceEstimates, Resample};
use crate::data::TabularDataset;
use crate::error::{Error, Result};

/// Plug-in stage applied to cross-fitted nuisances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PluginKind {
    /// Outcome regression: `mean(q1 - q0)`.
    Q,
    /// Inverse propensity weighting.
    Iptw,
    /// Augmented inverse propensity weighting (doubly robust).
    Aiptw,
    /// Residual-on-residual least squares without intercept.
    Dml,
}

impl PluginKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Q => "q",
            Self::Iptw => "iptw",
            Self::Aiptw => "aiptw",
            Self::Dml => "dml",
        }
    }
}

fn check_shapes(d: &TabularDataset, nuis: &NuisanceEstimates) -> Result<()> {
    if d.n_rows() != nuis.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} rows but nuisances cover {}",
            d.n_rows(),
            nuis.n_rows()
        )));
    }
    if d.n_rows() == 0 {
        return Err(Error::InvalidDataset("no rows".into()));
    }
    Ok(())
}

fn check_propensity(nuis: &NuisanceEstimates) -> Result<()> {
    match nuis.g.iter().position(|&g| !(g > 0.0 && g < 1.0)) {
        Some(row) => Err(Error::UnclippedPropensity {
            row,
            value: nuis.g[row],
        }),
        None => Ok(()),
    }
}

/// Per-row `(numerator, denominator)` terms; the estimate is the ratio of
/// their sums over the rows in use.
fn contributions(kind: PluginKind, d: &TabularDataset, nuis: &NuisanceEstimates) -> Result<Vec<(f64, f64)>> {
    check_shapes(d, nuis)?;
    if kind != PluginKind::Q {
        check_propensity(nuis)?;
    }
    let t = d.treatment();
    let y = d.outcome();
    Ok((0..d.n_rows())
        .map(|i| {
            let ti = t[i] as f64;
            let (q0, q1, g, qx) = (nuis.q0[i], nuis.q1[i], nuis.g[i], nuis.qx[i]);
            match kind {
                PluginKind::Q => (q1 - q0, 1.0),
                PluginKind::Iptw => (y[i] * ti / g - y[i] * (1.0 - ti) / (1.0 - g), 1.0),
                PluginKind::Aiptw => (
                    q1 - q0 + ti * (y[i] - q1) / g - (1.0 - ti) * (y[i] - q0) / (1.0 - g),
                    1.0,
                ),
                PluginKind::Dml => {
                    let r = ti - g;
                    (r * (y[i] - qx), r * r)
                }
            }
        })
        .collect())
}

fn ratio(kind: PluginKind, num: f64, den: f64) -> Result<f64> {
    if kind == PluginKind::Dml && !(den > 0.0) {
        return Err(Error::DegenerateResiduals);
    }
    Ok(num / den)
}

fn plugin_estimate(kind: PluginKind, d: &TabularDataset, nuis: &NuisanceEstimates) -> Result<EstimateRecord> {
    let terms = contributions(kind, d, nuis)?;
    let (num, den) = terms.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let mut rec = EstimateRecord::new(kind.name(), ratio(kind, num, den)?, d.n_rows());
    rec.provenance = Some(nuis.provenance.clone());
    Ok(rec)
}

pub fn tau_q(d: &TabularDataset, nuis: &NuisanceEstimates) -> Result<EstimateRecord> {
    plugin_estimate(PluginKind::Q, d, nuis)
}

pub fn tau_iptw(d: &TabularDataset, nuis: &NuisanceEstimates) -> Result<EstimateRecord> {
    plugin_estimate(PluginKind::Iptw, d, nuis)
}

pub fn tau_aiptw(d: &TabularDataset, nuis: &NuisanceEstimates) -> Result<EstimateRecord> {
    plugin_estimate(PluginKind::Aiptw, d, nuis)
}

/// `sum (t - g)(y - qx) / sum (t - g)^2`.
pub fn tau_dml(d: &TabularDataset, nuis: &NuisanceEstimates) -> Result<EstimateRecord> {
    plugin_estimate(PluginKind::Dml, d, nuis)
}

/// A plug-in estimator bound to nuisances computed on one dataset.
///
/// Bootstrap resamples reuse the nuisance predictions of the resampled rows
/// rather than refitting the learners.
pub struct PluginEstimator<'n> {
    pub kind: PluginKind,
    pub nuisances: &'n NuisanceEstimates,
}

impl<'n> PluginEstimator<'n> {
    pub fn new(kind: PluginKind, nuisances: &'n NuisanceEstimates) -> Self {
        Self { kind, nuisances }
    }
}

struct PluginResample {
    kind: PluginKind,
    terms: Vec<(f64, f64)>,
}

impl Resample for PluginResample {
    fn n_rows(&self) -> usize {
        self.terms.len()
    }

    fn estimate_rows(&self, rows: &[u32]) -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for &r in rows {
            let (a, b) = self.terms[r as usize];
            num += a;
            den += b;
        }
        ratio(self.kind, num, den)
    }
}

impl Estimator for PluginEstimator<'_> {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn estimate(&self, d: &TabularDataset) -> Result<EstimateRecord> {
        plugin_estimate(self.kind, d, self.nuisances)
    }

    fn prepare<'a>(&'a self, d: &'a TabularDataset) -> Result<Box<dyn Resample + 'a>> {
        Ok(Box::new(PluginResample {
            kind: self.kind,
            terms: contributions(self.kind, d, self.nuisances)?,
        }))
    }
}
