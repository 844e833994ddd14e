use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::estimators::{Estimator, Resample};
use crate::rng::SeededRng;

pub const DEFAULT_N_BOOT: usize = 1000;
pub const DEFAULT_CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub n_boot: usize,
    /// Resamples on which the estimator failed and that were redrawn.
    pub n_failed: usize,
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Percentile bootstrap interval for `estimator` on `d`, resampling whole rows.
pub fn bootstrap_ci(
    d: &TabularDataset,
    estimator: &dyn Estimator,
    n_boot: usize,
    level: f64,
    rng: &mut SeededRng,
) -> Result<BootstrapCi> {
    let prepared = estimator.prepare(d)?;
    bootstrap_resample(prepared.as_ref(), n_boot, level, rng)
}

/// Percentile bootstrap over a prepared estimator. Replicate `b` draws its
/// rows from a generator derived from one seed taken from `rng` and `b`, so
/// results do not depend on evaluation order. A failing resample is redrawn;
/// at most `10 * n_boot` resamples are attempted in total.
pub fn bootstrap_resample(
    prepared: &dyn Resample,
    n_boot: usize,
    level: f64,
    rng: &mut SeededRng,
) -> Result<BootstrapCi> {
    if n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be positive".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    let n = prepared.n_rows();
    if n == 0 {
        return Err(Error::InvalidDataset("cannot bootstrap zero rows".into()));
    }
    let base = rng.next_u64();
    let cap = 10 * n_boot;
    let mut attempts = 0usize;
    let mut failed = 0usize;
    let mut rows = vec![0u32; n];
    let mut estimates = Vec::with_capacity(n_boot);
    for b in 0..n_boot as u64 {
        let mut redraw = 0u64;
        loop {
            if attempts == cap {
                return Err(Error::BootstrapExhausted { attempts, failed });
            }
            attempts += 1;
            let mut sub = SeededRng::derive(base, &[b, redraw]);
            for r in rows.iter_mut() {
                *r = sub.random_range(0..n as u32);
            }
            match prepared.estimate_rows(&rows) {
                Ok(v) if v.is_finite() => {
                    estimates.push(v);
                    break;
                }
                _ => {
                    failed += 1;
                    redraw += 1;
                }
            }
        }
    }
    estimates.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok(BootstrapCi {
        lo: quantile_sorted(&estimates, alpha / 2.0),
        hi: quantile_sorted(&estimates, 1.0 - alpha / 2.0),
        level,
        n_boot,
        n_failed: failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n_seeds: usize,
    pub n_covered: usize,
    pub coverage: f64,
    pub ci_level: f64,
}

/// Fraction of intervals `(lo, hi)` with `lo <= truth <= hi`.
pub fn coverage(intervals: &[(f64, f64)], truth: f64) -> Result<CoverageReport> {
    coverage_per_seed(intervals, &vec![truth; intervals.len()], DEFAULT_CI_LEVEL)
}

/// Coverage where each interval has its own target value.
pub fn coverage_per_seed(intervals: &[(f64, f64)], truths: &[f64], ci_level: f64) -> Result<CoverageReport> {
    if intervals.is_empty() {
        return Err(Error::InvalidArgument("coverage of zero intervals".into()));
    }
    if intervals.len() != truths.len() {
        return Err(Error::InvalidArgument("one truth per interval required".into()));
    }
    let n_covered = intervals
        .iter()
        .zip(truths)
        .filter(|((lo, hi), t)| lo <= t && *t <= hi)
        .count();
    Ok(CoverageReport {
        n_seeds: intervals.len(),
        n_covered,
        coverage: n_covered as f64 / intervals.len() as f64,
        ci_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::DiffInMeans;

    #[test]
    fn quantiles_interpolate_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile_sorted(&v, 0.025) - 1.075).abs() < 1e-12);
    }

    #[test]
    fn constant_outcome_gives_zero_width_interval() {
        let d = TabularDataset::try_new(vec![], vec![], vec![0, 1, 0, 1, 1, 0], vec![2.0; 6]).unwrap();
        let ci = bootstrap_ci(&d, &DiffInMeans, 200, 0.95, &mut SeededRng::new(3)).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.0, 0.0));
        // tiny data: some resamples lose an arm and are redrawn
        assert!(ci.n_failed > 0);
    }

    #[test]
    fn hand_coverage() {
        let ivs = [(0.0, 1.0), (0.2, 0.8), (0.6, 0.9), (-1.0, 2.0)];
        let r = coverage(&ivs, 0.5).unwrap();
        assert_eq!(r.n_covered, 3);
        assert_eq!(r.coverage, 0.75);
    }

    #[test]
    fn always_failing_estimator_exhausts() {
        struct Broken;
        impl Resample for Broken {
            fn n_rows(&self) -> usize {
                3
            }
            fn estimate_rows(&self, _: &[u32]) -> Result<f64> {
                Err(Error::DegenerateResiduals)
            }
        }
        let err = bootstrap_resample(&Broken, 5, 0.95, &mut SeededRng::new(0)).unwrap_err();
        assert_eq!(
            err,
            Error::BootstrapExhausted {
                attempts: 50,
                failed: 50
            }
        );
    }
}
