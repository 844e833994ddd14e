use std::fmt::Write as _;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::TabularDataset;
use crate::dgp::{DgpSetting, SettingId};
use crate::error::{Error, Result};
use crate::estimators::{diff_in_means, parametric_backdoor, Estimator};
use crate::rng::SeededRng;
use crate::sampler::{expit, rct_rejection_sample, ConfoundingFunction, LogisticTerm};

/// One seed of the confounding-versus-error diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticPoint {
    pub seed: u64,
    /// `|gold - diff_in_means(sample)|`
    pub naive_gap: f64,
    /// `|gold - oracle(sample)|`
    pub oracle_gap: f64,
    pub below_line: bool,
}

impl DiagnosticPoint {
    pub fn new(seed: u64, naive_gap: f64, oracle_gap: f64) -> Self {
        Self {
            seed,
            naive_gap,
            oracle_gap,
            below_line: oracle_gap < naive_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub confounding: ConfoundingFunction,
    pub points: Vec<DiagnosticPoint>,
    /// Seeds whose sample or estimate failed, with the reason.
    pub failures: Vec<(u64, String)>,
    pub fraction_below_line: f64,
}

/// For each confounding function and seed: rejection-sample `rct`, then
/// compare the naive and oracle-adjusted estimates against the RCT's own
/// difference in means.
pub fn diagnostic_sweep(
    rct: &TabularDataset,
    f_grid: &[ConfoundingFunction],
    n_seeds: usize,
    oracle: &dyn Estimator,
    rng: &mut SeededRng,
) -> Result<Vec<SweepResult>> {
    let gold = diff_in_means(rct)?.point_estimate;
    for f in f_grid {
        f.check()?;
        f.evaluate_column(rct)?;
    }
    let base = rng.next_u64();
    Ok(f_grid
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let outcomes: Vec<(u64, Result<DiagnosticPoint>)> = (0..n_seeds as u64)
                .into_par_iter()
                .map(|seed| {
                    let mut r = SeededRng::derive(base, &[fi as u64, seed]);
                    let point = rct_rejection_sample(rct, f, &mut r).and_then(|s| {
                        let naive = diff_in_means(&s.output)?.point_estimate;
                        let adjusted = oracle.estimate(&s.output)?.point_estimate;
                        Ok(DiagnosticPoint::new(
                            seed,
                            (gold - naive).abs(),
                            (gold - adjusted).abs(),
                        ))
                    });
                    (seed, point)
                })
                .collect();
            let mut points = Vec::new();
            let mut failures = Vec::new();
            for (seed, out) in outcomes {
                match out {
                    Ok(p) => points.push(p),
                    Err(e) => failures.push((seed, e.to_string())),
                }
            }
            let below = points.iter().filter(|p| p.below_line).count();
            SweepResult {
                confounding: f.clone(),
                fraction_below_line: below as f64 / points.len().max(1) as f64,
                points,
                failures,
            }
        })
        .collect())
}

/// Lower and upper bound on `P*(T=1|C)` required by the strength sweep.
pub const STRENGTH_BAND: (f64, f64) = (0.05, 0.95);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrengthRow {
    pub strength: f64,
    /// Oracle-adjusted estimate on each seed's sample.
    pub estimates: Vec<f64>,
    /// Difference in means on each seed's RCT draw.
    pub gold: Vec<f64>,
    pub failures: usize,
}

impl StrengthRow {
    pub fn mean_estimate(&self) -> f64 {
        mean(&self.estimates)
    }

    pub fn mean_gold(&self) -> f64 {
        mean(&self.gold)
    }

    pub fn mean_abs_bias(&self) -> f64 {
        mean(
            &self
                .estimates
                .iter()
                .zip(&self.gold)
                .map(|(e, g)| (e - g).abs())
                .collect::<Vec<_>>(),
        )
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `expit(-1 + x C)`, the family swept over `x`.
pub fn strength_function(x: f64) -> ConfoundingFunction {
    ConfoundingFunction::logistic(-1.0, vec![LogisticTerm::new(&["C"], x)])
}

/// Rejection sampling plus oracle adjustment across confounding strengths
/// `x` in `expit(-1 + x C)`, for the binary-covariate settings.
pub fn confounding_strength_sweep(
    setting: &DgpSetting,
    strengths: &[f64],
    n_seeds: usize,
    rng: &mut SeededRng,
) -> Result<Vec<StrengthRow>> {
    if setting.id == SettingId::Setting3 {
        return Err(Error::InvalidArgument(
            "the strength sweep needs the single binary covariate of settings 1 and 2".into(),
        ));
    }
    for &x in strengths {
        for c in [0.0, 1.0] {
            let p = expit(-1.0 + x * c);
            if !(p > STRENGTH_BAND.0 && p < STRENGTH_BAND.1) {
                return Err(Error::InvalidArgument(format!(
                    "strength {x} gives P*(T=1|C={c}) = {p:.4}, outside ({}, {})",
                    STRENGTH_BAND.0, STRENGTH_BAND.1
                )));
            }
        }
    }
    let terms = setting.oracle_adjustment_terms();
    let base = rng.next_u64();
    Ok(strengths
        .iter()
        .enumerate()
        .map(|(xi, &x)| {
            let f = strength_function(x);
            let results: Vec<Result<(f64, f64)>> = (0..n_seeds as u64)
                .into_par_iter()
                .map(|seed| {
                    // The RCT draw depends on the seed only, so every strength
                    // sees the same RCTs.
                    let rct = setting.generate(&mut SeededRng::derive(base, &[0, seed]))?;
                    let gold = diff_in_means(&rct)?.point_estimate;
                    let sample = rct_rejection_sample(&rct, &f, &mut SeededRng::derive(base, &[1, xi as u64, seed]))?;
                    let est = parametric_backdoor(&sample.output, &terms)?.point_estimate;
                    Ok((est, gold))
                })
                .collect();
            let mut row = StrengthRow {
                strength: x,
                estimates: Vec::new(),
                gold: Vec::new(),
                failures: 0,
            };
            for r in results {
                match r {
                    Ok((e, g)) => {
                        row.estimates.push(e);
                        row.gold.push(g);
                    }
                    Err(_) => row.failures += 1,
                }
            }
            row
        })
        .collect())
}

/// Area under the precision-recall curve as the step-wise sum
/// `sum_k (R_k - R_{k-1}) P_k` over descending score thresholds.
pub fn average_precision(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::InvalidArgument(
            "scores and labels must be nonempty and aligned".into(),
        ));
    }
    let positives = labels.iter().filter(|&&l| l == 1.0).count();
    if positives == 0 {
        return Err(Error::InvalidArgument(
            "average precision needs a positive label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut k = 0;
    while k < order.len() {
        // tied scores form one threshold
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            tp += usize::from(labels[order[k]] == 1.0);
            seen += 1;
            k += 1;
        }
        let recall = tp as f64 / positives as f64;
        ap += (recall - prev_recall) * tp as f64 / seen as f64;
        prev_recall = recall;
    }
    Ok(ap)
}

/// Scatter of oracle gap against naive gap with the `y = x` reference line.
pub fn scatter_svg(points: &[DiagnosticPoint], title: &str) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    let max = points
        .iter()
        .flat_map(|p| [p.naive_gap, p.oracle_gap])
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.05;
    let scale = |v: f64| PAD + v / max * (SIZE - 2.0 * PAD);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    let lo = PAD;
    let hi = SIZE - PAD;
    let _ = writeln!(
        svg,
        r#"<rect x="{lo}" y="{lo}" width="{0}" height="{0}" fill="none" stroke="black"/>"#,
        hi - lo
    );
    let _ = writeln!(svg, r#"<line x1="{lo}" y1="{hi}" x2="{hi}" y2="{lo}" stroke="red"/>"#);
    for p in points {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue" fill-opacity="0.6"/>"#,
            scale(p.naive_gap),
            SIZE - scale(p.oracle_gap)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">|gold - naive|</text>"#,
        SIZE / 2.0,
        SIZE - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="12" y="{0}" transform="rotate(-90 12 {0})" text-anchor="middle" font-size="11">|gold - oracle|</text>"#,
        SIZE / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn below_line_matches_gaps() {
        assert!(DiagnosticPoint::new(0, 0.3, 0.1).below_line);
        assert!(!DiagnosticPoint::new(0, 0.1, 0.1).below_line);
    }

    #[test]
    fn average_precision_hand_cases() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.1], &[1.0, 1.0, 0.0]).unwrap(), 1.0);
        // ranking: pos, neg, pos -> (1/2)(1) + (1/2)(2/3)
        let ap = average_precision(&[0.9, 0.5, 0.1], &[1.0, 0.0, 1.0]).unwrap();
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
        // all tied: precision is the base rate
        let ap = average_precision(&[0.5; 4], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((ap - 0.25).abs() < 1e-12);
    }

    #[test]
    fn strength_outside_band_rejected() {
        let s = DgpSetting::new(SettingId::Setting1, 10);
        assert!(confounding_strength_sweep(&s, &[5.0], 1, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn svg_has_reference_line_and_points() {
        let pts = [DiagnosticPoint::new(0, 0.2, 0.1), DiagnosticPoint::new(1, 0.1, 0.3)];
        let svg = scatter_svg(&pts, "f <1>");
        assert!(svg.contains("stroke=\"red\""));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("f &lt;1&gt;"));
    }
}
