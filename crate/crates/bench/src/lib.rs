//! Config-driven benchmark runner for RCT-subsampled causal estimation:
//! CSV ingestion, bag-of-words proxies, the seed loop and report files.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod ingest;
pub mod report;
pub mod runner;
pub mod stopwords;
pub mod synthetic;
pub mod text;

pub use config::{BenchmarkConfig, DataSpec, LockFile, SamplerChoice, SourceConfig};
pub use error::{BenchError, Result};
pub use report::emit_reports;
pub use runner::{run_benchmark, BenchmarkResult, CellSummary, PerSeedRecord};
