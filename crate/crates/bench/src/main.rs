use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rctsub::estimators::diff_in_means;
use rctsub_bench::diagnose::run_diagnostics;
use rctsub_bench::ingest::{ingest_csv, SchemaHints};
use rctsub_bench::{emit_reports, run_benchmark, BenchError, BenchmarkConfig, Result};

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Benchmark causal estimators on RCT-subsampled data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured benchmark and write the report files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the number of seeds.
        #[arg(long)]
        seeds: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pre-sampling checks and the configured diagnostic sweeps.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load and validate a CSV, printing a summary.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        /// JSON file with the column mapping.
        #[arg(long)]
        schema: PathBuf,
    },
}

fn load(config: &Path, out: Option<PathBuf>) -> Result<BenchmarkConfig> {
    let mut cfg = BenchmarkConfig::load(config)?;
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seeds, out } => {
            let mut cfg = load(&config, out)?;
            if let Some(s) = seeds {
                cfg.n_seeds = s;
            }
            let result = run_benchmark(&cfg)?;
            let files = emit_reports(&result, &cfg.out_dir)?;
            for c in &result.summary {
                println!(
                    "{:<16} {:<10} {:<15} abs_bias {:.4} (std {:.4})  rel {:.4}  coverage {}",
                    c.source,
                    c.sampler,
                    c.estimator,
                    c.abs_bias_mean,
                    c.abs_bias_std,
                    c.rel_abs_bias_mean,
                    c.coverage.map_or("-".into(), |v| format!("{v:.3}"))
                );
            }
            if !result.failures.is_empty() {
                eprintln!("{} seed(s) failed and were excluded", result.failures.len());
            }
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Diagnose { config, out } => {
            let cfg = load(&config, out)?;
            let (diags, files) = run_diagnostics(&cfg, &cfg.out_dir)?;
            for d in &diags {
                println!(
                    "{}: precondition {}, overlap {}",
                    d.source,
                    if d.precondition.pass { "pass" } else { "FAIL" },
                    d.overlap
                        .as_ref()
                        .map_or("n/a", |o| if o.pass { "pass" } else { "FAIL" })
                );
            }
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Ingest { csv, schema } => {
            let text = std::fs::read_to_string(&schema).map_err(|e| BenchError::io(&schema, e))?;
            let hints: SchemaHints = serde_json::from_str(&text).map_err(|e| BenchError::Config(e.to_string()))?;
            let table = ingest_csv(&csv, &hints)?;
            table.dataset.validate().into_result()?;
            let d = &table.dataset;
            let summary = serde_json::json!({
                "n_rows": d.n_rows(),
                "arm_counts": d.arm_counts(),
                "covariates": d.column_names(),
                "has_text": table.texts.is_some(),
                "diff_in_means": diff_in_means(d).ok().map(|r| r.point_estimate),
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("plain JSON"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
