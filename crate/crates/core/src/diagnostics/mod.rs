//! Pre-sampling checks, bootstrap intervals, coverage and sweeps.

mod association;
mod bootstrap;
mod sweep;

pub use association::{
    check_overlap, check_precondition, correlation, odds_ratio, Association, CovariateAssociation, LevelOverlap,
    OddsRatio, OverlapReport, PreconditionReport, MIN_CORRELATION, MIN_LOG_ODDS_RATIO,
};
pub use bootstrap::{
    bootstrap_ci, bootstrap_resample, coverage, coverage_per_seed, quantile_sorted, BootstrapCi, CoverageReport,
    DEFAULT_CI_LEVEL, DEFAULT_N_BOOT,
};
pub use sweep::{
    average_precision, confounding_strength_sweep, diagnostic_sweep, scatter_svg, strength_function, DiagnosticPoint,
    StrengthRow, SweepResult, STRENGTH_BAND,
};
