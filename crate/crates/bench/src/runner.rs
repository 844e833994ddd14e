//! The seed loop: draw or load an RCT, subsample it, estimate, bootstrap,
//! aggregate.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rctsub::diagnostics::bootstrap_ci;
use rctsub::estimators::learners::BaseLearnerSpec;
use rctsub::estimators::{
    crossfit_nuisances_clipped, diff_in_means, DiffInMeans, ExactBackdoor, NuisanceEstimates, ParametricBackdoor,
    PluginEstimator,
};
use rctsub::{ConfoundingFunction, DgpSetting, Estimator, EstimatorKind, Monomial, SeededRng, TabularDataset};

use crate::config::{BenchmarkConfig, DataSpec, SamplerChoice, SourceConfig};
use crate::error::{BenchError, Result};
use crate::ingest::{ingest_csv, subpopulation_filter, RawTable, SUBPOPULATION_COVARIATE};
use crate::synthetic::generate_corpus;
use crate::text::{build_vocabulary, featurize, Vocabulary};

/// Largest tolerated fraction of failed seeds per source.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

/// A source resolved to the pieces the seed loop needs.
#[derive(Debug, Clone)]
pub struct PreparedSource {
    pub name: String,
    /// Set for DGP sources, which draw a fresh RCT per seed.
    pub setting: Option<DgpSetting>,
    /// Set for CSV and synthetic-text sources, which reuse one RCT.
    pub fixed: Option<TabularDataset>,
    pub vocabulary: Option<Vocabulary>,
    pub confounding: Option<ConfoundingFunction>,
    pub adjustment_terms: Option<Vec<Monomial>>,
    pub exact_covariate: String,
}

impl PreparedSource {
    /// The RCT for seed index `seed`.
    pub fn rct(&self, rng: &mut SeededRng) -> Result<Cow<'_, TabularDataset>> {
        match (&self.fixed, &self.setting) {
            (Some(d), _) => Ok(Cow::Borrowed(d)),
            (None, Some(s)) => Ok(Cow::Owned(s.generate(rng)?)),
            (None, None) => unreachable!("a prepared source holds data or a setting"),
        }
    }
}

fn attach_text(
    table: RawTable,
    vocab_params: &crate::text::VocabularyParams,
) -> Result<(TabularDataset, Option<Vocabulary>)> {
    match table.texts {
        Some(texts) => {
            let vocab = build_vocabulary(&texts, vocab_params)?;
            let x = featurize(&texts, &vocab);
            Ok((table.dataset.with_proxies(x), Some(vocab)))
        }
        None => Ok((table.dataset, None)),
    }
}

pub fn prepare_source(src: &SourceConfig) -> Result<PreparedSource> {
    let name = src.display_name();
    let (setting, fixed, vocabulary, default_f) = match &src.data {
        DataSpec::Dgp { setting, n } => {
            let s = DgpSetting::new(*setting, *n);
            (Some(s), None, None, Some(s.confounding_function()))
        }
        DataSpec::Csv {
            path,
            schema,
            subpopulation,
            vocabulary,
        } => {
            let mut table = ingest_csv(path, schema)?;
            if let Some((a, b)) = subpopulation {
                table = subpopulation_filter(&table, (a, b))?.0;
            }
            table.dataset.validate().into_result()?;
            let (d, v) = attach_text(table, &vocabulary.clone().unwrap_or_default())?;
            (None, Some(d), v, None)
        }
        DataSpec::SyntheticText { spec, vocabulary } => {
            let table = generate_corpus(spec)?;
            let (d, v) = attach_text(table, vocabulary)?;
            let f = ConfoundingFunction::piecewise(SUBPOPULATION_COVARIATE, 0.85, 0.15);
            (None, Some(d), v, Some(f))
        }
    };
    let adjustment_terms = src.adjustment_terms.clone().or_else(|| match (&setting, &fixed) {
        (Some(s), _) => Some(s.oracle_adjustment_terms()),
        (None, Some(d)) if d.covariate_index(SUBPOPULATION_COVARIATE).is_ok() => Some(vec![
            SUBPOPULATION_COVARIATE.parse().expect("static term"),
            format!("T*{SUBPOPULATION_COVARIATE}").parse().expect("static term"),
        ]),
        _ => None,
    });
    Ok(PreparedSource {
        name,
        setting,
        fixed,
        vocabulary,
        confounding: src.confounding.clone().or(default_f),
        adjustment_terms,
        exact_covariate: src
            .exact_covariate
            .clone()
            .unwrap_or_else(|| SUBPOPULATION_COVARIATE.to_string()),
    })
}

/// One estimate on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSeedRecord {
    pub source: String,
    pub sampler: String,
    pub estimator: String,
    pub seed: u64,
    /// Difference in means on the seed's RCT.
    pub gold_ate: f64,
    pub estimate: f64,
    pub abs_bias: f64,
    pub rel_abs_bias: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub covered: Option<bool>,
    pub n_rct: usize,
    pub n_obs: usize,
    pub n_boot_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub source: String,
    pub seed: u64,
    pub error: String,
}

/// Aggregate over the seeds of one (source, sampler, estimator) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub source: String,
    pub sampler: String,
    pub estimator: String,
    pub n_seeds: usize,
    pub mean_estimate: f64,
    pub mean_gold_ate: f64,
    pub abs_bias_mean: f64,
    pub abs_bias_std: f64,
    pub rel_abs_bias_mean: f64,
    pub rel_abs_bias_std: f64,
    /// Fraction of intervals covering the seed's gold ATE.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub config: BenchmarkConfig,
    /// Ordered by source, seed, sampler, estimator.
    pub records: Vec<PerSeedRecord>,
    pub failures: Vec<SeedFailure>,
    pub summary: Vec<CellSummary>,
}

impl BenchmarkResult {
    pub fn cell(&self, source: &str, sampler: &str, estimator: &str) -> Option<&CellSummary> {
        self.summary
            .iter()
            .find(|c| c.source == source && c.sampler == sampler && c.estimator == estimator)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation (divisor `n`).
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn build_estimator<'a>(
    kind: EstimatorKind,
    src: &PreparedSource,
    nuisances: Option<&'a NuisanceEstimates>,
) -> Result<Box<dyn Estimator + 'a>> {
    Ok(match kind {
        EstimatorKind::DiffInMeans => Box::new(DiffInMeans),
        EstimatorKind::BackdoorExact => Box::new(ExactBackdoor::new(src.exact_covariate.clone())),
        EstimatorKind::BackdoorParam => {
            let terms = src
                .adjustment_terms
                .clone()
                .ok_or_else(|| BenchError::Config(format!("{}: backdoor_param needs adjustment_terms", src.name)))?;
            Box::new(ParametricBackdoor::new(terms))
        }
        other => {
            let plugin = other.plugin().expect("remaining kinds are plug-ins");
            Box::new(PluginEstimator::new(
                plugin,
                nuisances.expect("nuisances fitted for plug-ins"),
            ))
        }
    })
}

/// Every configured (sampler, estimator) estimate on seed `seed` of `src`.
/// Stream layout under `derive(master, [source, seed, ..])`: `0` the RCT
/// draw, `[1, s]` sampler `s`, `[2, s]` cross-fitting, `[3, s, e]` bootstrap.
pub fn run_seed(cfg: &BenchmarkConfig, src_idx: usize, src: &PreparedSource, seed: u64) -> Result<Vec<PerSeedRecord>> {
    let stream = |tail: &[u64]| {
        let mut path = vec![src_idx as u64, seed];
        path.extend_from_slice(tail);
        SeededRng::derive(cfg.master_seed, &path)
    };
    let rct = src.rct(&mut stream(&[0]))?;
    let gold = diff_in_means(&rct)?.point_estimate;
    let needs_nuisances = cfg.estimators.iter().any(|e| e.plugin().is_some());
    let mut out = Vec::new();
    for (si, sampler) in cfg.samplers.iter().enumerate() {
        let si = si as u64;
        let obs: Cow<'_, TabularDataset> = match sampler.kind() {
            None => Cow::Borrowed(rct.as_ref()),
            Some(kind) => {
                let f = src.confounding.as_ref().ok_or_else(|| {
                    BenchError::Config(format!("{}: no confounding function to subsample with", src.name))
                })?;
                Cow::Owned(kind.sample(&rct, f, &mut stream(&[1, si]))?.output)
            }
        };
        let nuisances = if needs_nuisances {
            Some(fit_nuisances(
                &obs,
                &cfg.learner,
                cfg.k_folds,
                cfg.clip_epsilon,
                &mut stream(&[2, si]),
            )?)
        } else {
            None
        };
        for (ei, &kind) in cfg.estimators.iter().enumerate() {
            let est = build_estimator(kind, src, nuisances.as_ref())?;
            let point = est.estimate(&obs)?.point_estimate;
            let ci = if cfg.n_boot > 0 {
                Some(bootstrap_ci(
                    &obs,
                    est.as_ref(),
                    cfg.n_boot,
                    cfg.ci_level,
                    &mut stream(&[3, si, ei as u64]),
                )?)
            } else {
                None
            };
            let abs_bias = (point - gold).abs();
            out.push(PerSeedRecord {
                source: src.name.clone(),
                sampler: sampler.name().into(),
                estimator: kind.name().into(),
                seed,
                gold_ate: gold,
                estimate: point,
                abs_bias,
                rel_abs_bias: abs_bias / gold.abs(),
                ci_lo: ci.map(|c| c.lo),
                ci_hi: ci.map(|c| c.hi),
                covered: ci.map(|c| c.lo <= gold && gold <= c.hi),
                n_rct: rct.n_rows(),
                n_obs: obs.n_rows(),
                n_boot_failed: ci.map_or(0, |c| c.n_failed),
            });
        }
    }
    Ok(out)
}

fn fit_nuisances(
    d: &TabularDataset,
    learner: &BaseLearnerSpec,
    k_folds: usize,
    clip: f64,
    rng: &mut SeededRng,
) -> Result<NuisanceEstimates> {
    Ok(crossfit_nuisances_clipped(d, learner, k_folds, clip, rng)?)
}

/// Aggregate per-seed records into one summary per cell, in first-seen order.
pub fn summarize(records: &[PerSeedRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(&str, &str, &str)> = Vec::new();
    for r in records {
        let k = (r.source.as_str(), r.sampler.as_str(), r.estimator.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(source, sampler, estimator)| {
            let cell: Vec<&PerSeedRecord> = records
                .iter()
                .filter(|r| r.source == source && r.sampler == sampler && r.estimator == estimator)
                .collect();
            let col = |f: fn(&PerSeedRecord) -> f64| cell.iter().map(|r| f(r)).collect::<Vec<_>>();
            let abs = col(|r| r.abs_bias);
            let rel = col(|r| r.rel_abs_bias);
            let covered: Vec<bool> = cell.iter().filter_map(|r| r.covered).collect();
            CellSummary {
                source: source.into(),
                sampler: sampler.into(),
                estimator: estimator.into(),
                n_seeds: cell.len(),
                mean_estimate: mean(&col(|r| r.estimate)),
                mean_gold_ate: mean(&col(|r| r.gold_ate)),
                abs_bias_mean: mean(&abs),
                abs_bias_std: std_dev(&abs),
                rel_abs_bias_mean: mean(&rel),
                rel_abs_bias_std: std_dev(&rel),
                coverage: (covered.len() == cell.len())
                    .then(|| covered.iter().filter(|&&c| c).count() as f64 / cell.len() as f64),
            }
        })
        .collect()
}

/// Run every configured source over `cfg.n_seeds` seeds. Seeds run in
/// parallel; a seed whose pipeline fails anywhere is excluded as a whole.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    cfg.validate()?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (src_idx, src_cfg) in cfg.sources().iter().enumerate() {
        let src = prepare_source(src_cfg)?;
        check_source(cfg, &src)?;
        let outcomes: Vec<(u64, Result<Vec<PerSeedRecord>>)> = (0..cfg.n_seeds as u64)
            .into_par_iter()
            .map(|seed| (seed, run_seed(cfg, src_idx, &src, seed)))
            .collect();
        let mut src_failures = Vec::new();
        for (seed, outcome) in outcomes {
            match outcome {
                Ok(r) => records.extend(r),
                Err(e @ BenchError::Config(_)) => return Err(e),
                Err(e) => src_failures.push(SeedFailure {
                    source: src.name.clone(),
                    seed,
                    error: e.to_string(),
                }),
            }
        }
        if src_failures.len() as f64 > MAX_FAILURE_FRACTION * cfg.n_seeds as f64 {
            return Err(BenchError::TooManyFailures {
                failed: src_failures.len(),
                total: cfg.n_seeds,
                first: src_failures[0].error.clone(),
            });
        }
        failures.extend(src_failures);
    }
    let summary = summarize(&records);
    Ok(BenchmarkResult {
        config: cfg.clone(),
        records,
        failures,
        summary,
    })
}

/// Configuration problems only visible once the source is loaded.
fn check_source(cfg: &BenchmarkConfig, src: &PreparedSource) -> Result<()> {
    if cfg.estimators.contains(&EstimatorKind::BackdoorParam) && src.adjustment_terms.is_none() {
        return Err(BenchError::Config(format!(
            "{}: backdoor_param needs adjustment_terms",
            src.name
        )));
    }
    let has_sampler = cfg.samplers.iter().any(|s| *s != SamplerChoice::None);
    if has_sampler && src.confounding.is_none() {
        return Err(BenchError::Config(format!("{}: no confounding function", src.name)));
    }
    if let (Some(d), Some(f)) = (&src.fixed, &src.confounding) {
        f.evaluate_column(d)
            .map_err(|e| BenchError::Config(format!("{}: {e}", src.name)))?;
    }
    Ok(())
}
