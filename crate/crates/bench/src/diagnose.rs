//! The `diagnose` command: pre-sampling checks, the naive-versus-oracle gap
//! sweep and the confounding-strength sweep.

use std::path::{Path, PathBuf};

use serde::Serialize;

use rctsub::diagnostics::{
    check_overlap, check_precondition, confounding_strength_sweep, diagnostic_sweep, scatter_svg, OverlapReport,
    PreconditionReport,
};
use rctsub::estimators::{ExactBackdoor, ParametricBackdoor};
use rctsub::{ConfoundingFunction, Estimator, SamplerKind, SeededRng, SettingId};

use crate::config::BenchmarkConfig;
use crate::error::{BenchError, Result};
use crate::report::{csv_bytes, write_atomic};
use crate::runner::prepare_source;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub confounding: ConfoundingFunction,
    pub n_points: usize,
    pub n_failures: usize,
    pub fraction_below_line: f64,
    pub csv: String,
    pub svg: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrengthSummaryRow {
    pub strength: f64,
    pub n_seeds: usize,
    pub failures: usize,
    pub mean_estimate: f64,
    pub mean_gold: f64,
    pub mean_abs_bias: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceDiagnostics {
    pub source: String,
    pub precondition: PreconditionReport,
    /// Overlap of the exact-adjustment covariate in one rejection sample.
    pub overlap: Option<OverlapReport>,
    pub sweeps: Vec<SweepSummary>,
    pub strengths: Vec<StrengthSummaryRow>,
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Run the diagnostics configured under `cfg.diagnose` (or the pre-sampling
/// checks alone) and write them into `outdir`.
pub fn run_diagnostics(cfg: &BenchmarkConfig, outdir: &Path) -> Result<(Vec<SourceDiagnostics>, Vec<PathBuf>)> {
    cfg.validate()?;
    let diag = cfg.diagnose.clone().unwrap_or(crate::config::DiagnoseConfig {
        f_grid: Vec::new(),
        n_seeds: 100,
        strengths: Vec::new(),
    });
    let mut written = Vec::new();
    let mut all = Vec::new();
    for (src_idx, src_cfg) in cfg.sources().iter().enumerate() {
        let src = prepare_source(src_cfg)?;
        let stem = slug(&src.name);
        let stream = |tail: &[u64]| {
            let mut path = vec![src_idx as u64, u64::MAX];
            path.extend_from_slice(tail);
            SeededRng::derive(cfg.master_seed, &path)
        };
        let rct = src.rct(&mut stream(&[0]))?;
        let precondition = check_precondition(&rct);
        let overlap = match &src.confounding {
            Some(f) if rct.covariate_index(&src.exact_covariate).is_ok() => {
                let sample = SamplerKind::Rejection.sample(&rct, f, &mut stream(&[1]))?;
                Some(check_overlap(&sample.output, &src.exact_covariate)?)
            }
            _ => None,
        };

        let oracle: Box<dyn Estimator> = match &src.adjustment_terms {
            Some(t) => Box::new(ParametricBackdoor::new(t.clone())),
            None => Box::new(ExactBackdoor::new(src.exact_covariate.clone())),
        };
        let mut sweeps = Vec::new();
        if !diag.f_grid.is_empty() {
            let results = diagnostic_sweep(&rct, &diag.f_grid, diag.n_seeds, oracle.as_ref(), &mut stream(&[2]))?;
            for (i, r) in results.iter().enumerate() {
                let csv_path = outdir.join(format!("{stem}_sweep_{i}.csv"));
                let svg_path = outdir.join(format!("{stem}_sweep_{i}.svg"));
                write_atomic(&csv_path, &csv_bytes(&r.points)?)?;
                let title = format!("{}: confounding function {i}", src.name);
                write_atomic(&svg_path, scatter_svg(&r.points, &title).as_bytes())?;
                sweeps.push(SweepSummary {
                    confounding: r.confounding.clone(),
                    n_points: r.points.len(),
                    n_failures: r.failures.len(),
                    fraction_below_line: r.fraction_below_line,
                    csv: file_name(&csv_path),
                    svg: file_name(&svg_path),
                });
                written.extend([csv_path, svg_path]);
            }
        }

        let mut strengths = Vec::new();
        if let Some(setting) = src.setting.filter(|s| s.id != SettingId::Setting3) {
            if !diag.strengths.is_empty() {
                let rows = confounding_strength_sweep(&setting, &diag.strengths, diag.n_seeds, &mut stream(&[3]))?;
                strengths = rows
                    .iter()
                    .map(|r| StrengthSummaryRow {
                        strength: r.strength,
                        n_seeds: r.estimates.len(),
                        failures: r.failures,
                        mean_estimate: r.mean_estimate(),
                        mean_gold: r.mean_gold(),
                        mean_abs_bias: r.mean_abs_bias(),
                    })
                    .collect();
                let path = outdir.join(format!("{stem}_strength.csv"));
                write_atomic(&path, &csv_bytes(&strengths)?)?;
                written.push(path);
            }
        }
        all.push(SourceDiagnostics {
            source: src.name.clone(),
            precondition,
            overlap,
            sweeps,
            strengths,
        });
    }
    let path = outdir.join(DIAGNOSTICS_FILE);
    let mut json = serde_json::to_string_pretty(&all).map_err(|e| BenchError::Input(e.to_string()))?;
    json.push('\n');
    write_atomic(&path, json.as_bytes())?;
    written.push(path);
    Ok((all, written))
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
