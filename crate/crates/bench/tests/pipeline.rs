use std::collections::HashMap;
use std::fs;
use std::process::Command;

use proptest::prelude::*;

use rctsub_bench::report::{PER_SEED_FILE, TABLE_FILE};
use rctsub_bench::text::{build_vocabulary, featurize, tokenize, VocabularyParams};
use rctsub_bench::{emit_reports, run_benchmark, BenchmarkConfig};

fn no_filter() -> VocabularyParams {
    VocabularyParams {
        min_df: 1,
        max_df: 1.0,
        max_terms: 2000,
    }
}

#[test]
fn ten_document_corpus_matches_hand_table() {
    let corpus: Vec<String> = [
        "apple banana",
        "banana cherry",
        "apple apple",
        "cherry date",
        "the apple and 42",
        "Banana!",
        "date elder",
        "",
        "elder fig apple",
        "fig",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let vocab = build_vocabulary(&corpus, &no_filter()).unwrap();
    assert_eq!(vocab.terms, ["apple", "banana", "cherry", "date", "elder", "fig"]);
    assert_eq!(vocab.document_frequency, [4, 3, 2, 2, 2, 2]);
    let x = featurize(&corpus, &vocab);
    let expected: [&[u32]; 10] = [
        &[0, 1],
        &[1, 2],
        &[0],
        &[2, 3],
        &[0],
        &[1],
        &[3, 4],
        &[],
        &[0, 4, 5],
        &[5],
    ];
    for (i, row) in expected.iter().enumerate() {
        assert_eq!(x.row(i), *row, "document {i}");
    }
}

fn run_small(dir: &std::path::Path) -> BenchmarkConfig {
    let mut cfg = BenchmarkConfig::from_json(
        r#"{
            "sources": [
                {"data": {"kind": "dgp", "setting": "setting1", "n": 3000}},
                {"data": {"kind": "dgp", "setting": "setting2", "n": 3000}}
            ],
            "samplers": ["rejection", "gentzel"],
            "estimators": ["dim", "backdoor_param"],
            "n_seeds": 6, "n_boot": 50, "master_seed": 5
        }"#,
    )
    .unwrap();
    cfg.out_dir = dir.to_path_buf();
    let result = run_benchmark(&cfg).unwrap();
    emit_reports(&result, dir).unwrap();
    cfg
}

fn read_rows(path: &std::path::Path) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers
                .iter()
                .map(String::from)
                .zip(rec.iter().map(String::from))
                .collect()
        })
        .collect()
}

#[test]
fn table_recomputes_from_per_seed_records() {
    let dir = tempfile::tempdir().unwrap();
    run_small(dir.path());
    let per_seed = read_rows(&dir.path().join(PER_SEED_FILE));
    let table = read_rows(&dir.path().join(TABLE_FILE));
    assert_eq!(table.len(), 2 * 2 * 2);
    let num = |r: &HashMap<String, String>, k: &str| r[k].parse::<f64>().unwrap();
    for row in &per_seed {
        let rel = num(row, "abs_bias") / num(row, "gold_ate").abs();
        assert!((rel - num(row, "rel_abs_bias")).abs() <= 1e-12);
    }
    for cell in &table {
        let group: Vec<&HashMap<String, String>> = per_seed
            .iter()
            .filter(|r| ["source", "sampler", "estimator"].iter().all(|k| r[*k] == cell[*k]))
            .collect();
        assert_eq!(group.len(), cell["n_seeds"].parse::<usize>().unwrap());
        let n = group.len() as f64;
        for (col, mean_key, std_key) in [
            ("abs_bias", "abs_bias_mean", "abs_bias_std"),
            ("rel_abs_bias", "rel_abs_bias_mean", "rel_abs_bias_std"),
        ] {
            let v: Vec<f64> = group.iter().map(|r| num(r, col)).collect();
            let m = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
            assert!((m - num(cell, mean_key)).abs() <= 1e-12);
            assert!((sd - num(cell, std_key)).abs() <= 1e-12);
        }
        let covered = group.iter().filter(|r| r["covered"] == "true").count() as f64 / n;
        assert!((covered - num(cell, "coverage")).abs() <= 1e-12);
    }
}

#[test]
fn rerun_from_lock_is_byte_identical() {
    let first = tempfile::tempdir().unwrap();
    run_small(first.path());
    let lock = BenchmarkConfig::load(&first.path().join("config.lock.json")).unwrap();
    let second = tempfile::tempdir().unwrap();
    let result = run_benchmark(&lock).unwrap();
    emit_reports(&result, second.path()).unwrap();
    for f in [PER_SEED_FILE, TABLE_FILE] {
        assert_eq!(
            fs::read(first.path().join(f)).unwrap(),
            fs::read(second.path().join(f)).unwrap()
        );
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"sources": [], "estimators": ["dim"], "n_seeds": 1, "master_seed": 0}"#,
    )
    .unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["run", "--config"])
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let good = dir.path().join("good.json");
    fs::write(
        &good,
        r#"{"sources": {"data": {"kind": "dgp", "setting": "setting2", "n": 2000}},
            "samplers": ["none"], "estimators": ["dim"], "n_seeds": 2, "n_boot": 0, "master_seed": 0}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["run", "--seeds", "3", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(read_rows(&out.join(PER_SEED_FILE)).len(), 3);
}

#[test]
fn cli_ingest_reports_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let schema = dir.path().join("s.json");
    fs::write(&schema, r#"{"treatment": "t", "outcome": "y"}"#).unwrap();
    fs::write(&csv, "t,y\n1,1\n0,0\n").unwrap();
    let ok = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["ingest", "--csv"])
        .arg(&csv)
        .arg("--schema")
        .arg(&schema)
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("\"n_rows\": 2"));
    fs::write(&csv, "t,y\n1,1\n0,oops\n").unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["ingest", "--csv"])
        .arg(&csv)
        .arg("--schema")
        .arg(&schema)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("row 1"));
}

proptest! {
    #[test]
    fn tokens_are_normalized(doc in "[a-zA-Zéü0-9 ,.!]{0,80}") {
        for t in tokenize(&doc) {
            prop_assert!(t.chars().count() >= 2);
            prop_assert!(!t.chars().all(|c| c.is_numeric()));
            prop_assert_eq!(t.to_lowercase(), t.clone());
            prop_assert!(!t.contains('é') && !t.contains('ü'));
            prop_assert!(!rctsub_bench::stopwords::is_stopword(&t));
        }
    }

    #[test]
    fn featurizer_is_deterministic_and_respects_min_df(
        docs in prop::collection::vec("(alpha|beta|gamma|delta|omega| ){0,12}", 1..40),
        min_df in 1usize..4,
    ) {
        let params = VocabularyParams { min_df, max_df: 1.0, max_terms: 3 };
        if let Ok(vocab) = build_vocabulary(&docs, &params) {
            prop_assert!(vocab.len() <= 3);
            prop_assert!(vocab.document_frequency.iter().all(|&d| d >= min_df));
            prop_assert!(vocab.document_frequency.windows(2).all(|w| w[0] >= w[1]));
            let a = featurize(&docs, &vocab);
            let b = featurize(&docs, &build_vocabulary(&docs, &params).unwrap());
            prop_assert_eq!(&a, &b);
            for j in 0..vocab.len() {
                let count = (0..docs.len()).filter(|&i| a.get(i, j)).count();
                prop_assert_eq!(count, vocab.document_frequency[j]);
            }
        }
    }
}
