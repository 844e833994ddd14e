//! Benchmark configuration and its locked, fully resolved form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rctsub::estimators::learners::BaseLearnerSpec;
use rctsub::estimators::{DEFAULT_CLIP_EPSILON, DEFAULT_K_FOLDS};
use rctsub::sampler::SamplerKind;
use rctsub::{ConfoundingFunction, EstimatorKind, Monomial, SettingId};

use crate::error::{BenchError, Result};
use crate::ingest::SchemaHints;
use crate::synthetic::SyntheticTextSpec;
use crate::text::VocabularyParams;

/// Which subsampler, if any, turns the RCT into observational data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerChoice {
    Rejection,
    /// Keep a row when a Bernoulli(f(c)) draw equals its treatment. The
    /// config name is fixed by the CLI interface.
    #[serde(rename = "gentzel")]
    Selection,
    /// Estimate on the RCT itself.
    None,
}

impl SamplerChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rejection => "rejection",
            Self::Selection => "gentzel",
            Self::None => "none",
        }
    }

    pub fn kind(self) -> Option<SamplerKind> {
        match self {
            Self::Rejection => Some(SamplerKind::Rejection),
            Self::Selection => Some(SamplerKind::Selection),
            Self::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// A fresh synthetic RCT draw per seed.
    Dgp { setting: SettingId, n: usize },
    /// A fixed RCT loaded from disk.
    Csv {
        path: PathBuf,
        schema: SchemaHints,
        /// Restrict to two categories of `schema.category`, recoded as binary `C`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subpopulation: Option<(String, String)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vocabulary: Option<VocabularyParams>,
    },
    /// A fixed synthetic RCT with bag-of-words proxies of `C`.
    SyntheticText {
        #[serde(default)]
        spec: SyntheticTextSpec,
        #[serde(default)]
        vocabulary: VocabularyParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub data: DataSpec,
    /// Defaults to the setting's own function for DGP sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confounding: Option<ConfoundingFunction>,
    /// Regression terms of `backdoor_param` besides the intercept and `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjustment_terms: Option<Vec<Monomial>>,
    /// Binary covariate of `backdoor_exact`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_covariate: Option<String>,
}

impl SourceConfig {
    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.data {
            DataSpec::Dgp { setting, .. } => setting.name().to_string(),
            DataSpec::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
            DataSpec::SyntheticText { .. } => "synthetic_text".into(),
        }
    }
}

/// Sources accept a single object or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(t) => vec![t.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// Confounding functions for the naive-versus-oracle gap sweep.
    #[serde(default)]
    pub f_grid: Vec<ConfoundingFunction>,
    #[serde(default = "default_diag_seeds")]
    pub n_seeds: usize,
    /// Strengths `x` of `expit(-1 + x C)` for the strength sweep (DGP sources only).
    #[serde(default)]
    pub strengths: Vec<f64>,
}

fn default_diag_seeds() -> usize {
    100
}

fn default_samplers() -> Vec<SamplerChoice> {
    vec![SamplerChoice::Rejection]
}
fn default_k_folds() -> usize {
    DEFAULT_K_FOLDS
}
fn default_clip() -> f64 {
    DEFAULT_CLIP_EPSILON
}
fn default_n_boot() -> usize {
    rctsub::diagnostics::DEFAULT_N_BOOT
}
fn default_level() -> f64 {
    rctsub::diagnostics::DEFAULT_CI_LEVEL
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub sources: OneOrMany<SourceConfig>,
    #[serde(default = "default_samplers")]
    pub samplers: Vec<SamplerChoice>,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub learner: BaseLearnerSpec,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default = "default_clip")]
    pub clip_epsilon: f64,
    pub n_seeds: usize,
    /// Bootstrap replicates per estimate; 0 skips intervals.
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    #[serde(default = "default_level")]
    pub ci_level: f64,
    pub master_seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnose: Option<DiagnoseConfig>,
}

/// A config with every default written out, plus what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockFile {
    pub config: BenchmarkConfig,
    pub rng_algorithm: String,
    pub package_version: String,
}

impl BenchmarkConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        if let Ok(lock) = serde_json::from_str::<LockFile>(text) {
            if lock.rng_algorithm != rctsub::rng::ALGORITHM_ID {
                return Err(BenchError::Config(format!(
                    "lock file was written with RNG `{}`, this build uses `{}`",
                    lock.rng_algorithm,
                    rctsub::rng::ALGORITHM_ID
                )));
            }
            return Ok(lock.config);
        }
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Read a config or a lock file. Relative paths inside resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let mut sources = self.sources.to_vec();
        for s in &mut sources {
            if let DataSpec::Csv { path, .. } = &mut s.data {
                fix(path);
            }
        }
        self.sources = OneOrMany::Many(sources);
        fix(&mut self.out_dir);
    }

    pub fn sources(&self) -> Vec<SourceConfig> {
        self.sources.to_vec()
    }

    pub fn lock(&self) -> LockFile {
        LockFile {
            config: BenchmarkConfig {
                sources: OneOrMany::Many(self.sources()),
                ..self.clone()
            },
            rng_algorithm: rctsub::rng::ALGORITHM_ID.to_string(),
            package_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        let sources = self.sources();
        if sources.is_empty() {
            return bad("no data sources".into());
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be at least 1".into());
        }
        if self.samplers.is_empty() || self.estimators.is_empty() {
            return bad("samplers and estimators must be nonempty".into());
        }
        if self.k_folds < 2 {
            return bad("k_folds must be at least 2".into());
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 0.5) {
            return bad(format!("clip_epsilon {} outside (0, 0.5)", self.clip_epsilon));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad(format!("ci_level {} outside (0, 1)", self.ci_level));
        }
        self.learner.check().map_err(|e| BenchError::Config(e.to_string()))?;
        let needs_learner = self.estimators.iter().any(|e| e.plugin().is_some());
        for s in &sources {
            let name = s.display_name();
            if let Some(f) = &s.confounding {
                f.check().map_err(|e| BenchError::Config(format!("{name}: {e}")))?;
            }
            match &s.data {
                DataSpec::Dgp { setting, n } => {
                    if *n == 0 {
                        return bad(format!("{name}: n must be positive"));
                    }
                    if needs_learner {
                        return bad(format!(
                            "{name}: learned estimators need a binary outcome; DGP outcomes are real-valued"
                        ));
                    }
                    if self.estimators.contains(&EstimatorKind::BackdoorExact)
                        && *setting == SettingId::Setting3
                        && s.exact_covariate.is_none()
                    {
                        return bad(format!("{name}: backdoor_exact needs a binary adjustment covariate"));
                    }
                }
                DataSpec::Csv { path, schema, .. } => {
                    if !path.exists() {
                        return bad(format!("{name}: {} does not exist", path.display()));
                    }
                    schema.check().map_err(|e| BenchError::Config(format!("{name}: {e}")))?;
                    if s.confounding.is_none() && self.samplers.iter().any(|s| s.kind().is_some()) {
                        return bad(format!("{name}: a confounding function is required to subsample"));
                    }
                }
                DataSpec::SyntheticText { spec, .. } => {
                    spec.check().map_err(|e| BenchError::Config(format!("{name}: {e}")))?;
                }
            }
        }
        if let Some(d) = &self.diagnose {
            if d.n_seeds == 0 {
                return bad("diagnose.n_seeds must be at least 1".into());
            }
            for f in &d.f_grid {
                f.check().map_err(|e| BenchError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "sources": {"data": {"kind": "dgp", "setting": "setting1", "n": 1000}},
        "estimators": ["backdoor_param"],
        "n_seeds": 3,
        "master_seed": 7
    }"#;

    #[test]
    fn defaults_are_filled() {
        let cfg = BenchmarkConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.samplers, vec![SamplerChoice::Rejection]);
        assert_eq!(cfg.k_folds, 5);
        assert_eq!(cfg.n_boot, 1000);
        assert_eq!(cfg.clip_epsilon, 0.01);
        cfg.validate().unwrap();
    }

    #[test]
    fn lock_round_trips() {
        let cfg = BenchmarkConfig::from_json(MINIMAL).unwrap();
        let text = serde_json::to_string_pretty(&cfg.lock()).unwrap();
        let back = BenchmarkConfig::from_json(&text).unwrap();
        assert_eq!(back.sources(), cfg.sources());
        assert_eq!(back.n_boot, cfg.n_boot);
        assert_eq!(back.master_seed, 7);
    }

    #[test]
    fn unknown_fields_and_zero_seeds_rejected() {
        assert!(BenchmarkConfig::from_json(&MINIMAL.replace("\"n_seeds\"", "\"n_seedz\"")).is_err());
        let cfg = BenchmarkConfig::from_json(&MINIMAL.replace("\"n_seeds\": 3", "\"n_seeds\": 0")).unwrap();
        assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
    }

    #[test]
    fn learned_estimators_on_real_outcomes_rejected() {
        let cfg = BenchmarkConfig::from_json(&MINIMAL.replace("[\"backdoor_param\"]", "[\"aiptw\"]")).unwrap();
        assert!(cfg.validate().is_err());
    }
}
