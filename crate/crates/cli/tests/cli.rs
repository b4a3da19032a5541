//! End-to-end command behavior: artifacts, exit codes, determinism.

mod common;

use std::fs;
use std::path::Path;

use common::{run_clvkit, scratch_dir, write_fixture, FixtureOptions};

fn fresh_dir(tag: &str) -> std::path::PathBuf {
    let dir = scratch_dir(tag);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn ingest_writes_cleaned_csv_and_accounting_report() {
    let dir = fresh_dir("ingest");
    let input = write_fixture(&dir, "raw.csv", &FixtureOptions::default());
    let (code, _, _) = run_clvkit(
        &["ingest", input.to_str().unwrap(), "--out-dir", dir.join("out").to_str().unwrap()],
        &dir,
    );
    assert_eq!(code, 0);
    let cleaned = fs::read_to_string(dir.join("out/cleaned.csv")).unwrap();
    assert!(cleaned.starts_with("Invoice,StockCode,Description,Quantity,InvoiceDate,Price,Customer ID,Country,Revenue"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/clean_report.json")).unwrap())
            .unwrap();
    let removed = report["cancellations"].as_u64().unwrap()
        + report["nonpositive_quantity"].as_u64().unwrap()
        + report["nonpositive_price"].as_u64().unwrap()
        + report["missing_customer"].as_u64().unwrap()
        + report["unparseable"].as_u64().unwrap();
    assert_eq!(
        report["retained"].as_u64().unwrap() + removed,
        report["input_rows"].as_u64().unwrap()
    );
    assert!(report["unparseable"].as_u64().unwrap() >= 1, "the malformed row must be counted");
    assert!(dir.join("out/dataset_stats.json").exists());
}

#[test]
fn ingest_missing_file_exits_2() {
    let dir = fresh_dir("ingest-missing");
    let (code, _, err) = run_clvkit(&["ingest", "no-such-file.csv"], &dir);
    assert_eq!(code, 2, "stderr: {err}");
}

#[test]
fn ingest_header_without_invoice_exits_2() {
    let dir = fresh_dir("ingest-badheader");
    let path = dir.join("bad.csv");
    fs::write(
        &path,
        "StockCode,Description,Quantity,InvoiceDate,Price,Customer ID,Country\nA,,1,01-12-2009 07:45,1.0,1,UK\n",
    )
    .unwrap();
    let (code, _, err) = run_clvkit(&["ingest", path.to_str().unwrap()], &dir);
    assert_eq!(code, 2);
    assert!(err.contains("Invoice"), "stderr: {err}");
}

fn make_features(dir: &Path) -> std::path::PathBuf {
    let input = write_fixture(dir, "raw.csv", &FixtureOptions::default());
    let features = dir.join("features.csv");
    let (code, _, err) = run_clvkit(
        &["featurize", input.to_str().unwrap(), "--out", features.to_str().unwrap()],
        dir,
    );
    assert_eq!(code, 0, "stderr: {err}");
    features
}

#[test]
fn featurize_applies_default_cutoff_and_is_deterministic() {
    let dir = fresh_dir("featurize");
    let features = make_features(&dir);
    let first = fs::read(&features).unwrap();
    assert!(String::from_utf8_lossy(&first)
        .starts_with("customer_id,latetime,earlytime,freq,freq_3m,target"));
    // Second run, same inputs: identical bytes.
    let again = dir.join("features2.csv");
    let input = dir.join("raw.csv");
    let (code, _, _) = run_clvkit(
        &["featurize", input.to_str().unwrap(), "--out", again.to_str().unwrap()],
        &dir,
    );
    assert_eq!(code, 0);
    assert_eq!(first, fs::read(&again).unwrap());
}

#[test]
fn featurize_cutoff_outside_range_exits_2() {
    let dir = fresh_dir("featurize-cutoff");
    let input = write_fixture(&dir, "raw.csv", &FixtureOptions::default());
    let (code, _, err) = run_clvkit(
        &["featurize", input.to_str().unwrap(), "--cutoff", "1999-01-01"],
        &dir,
    );
    assert_eq!(code, 2, "stderr: {err}");
}

#[test]
fn clv_prints_all_breakdown_fields() {
    let dir = fresh_dir("clv");
    let input = write_fixture(&dir, "raw.csv", &FixtureOptions::default());
    let (code, out, err) =
        run_clvkit(&["clv", input.to_str().unwrap(), "--profit-margin", "0.05"], &dir);
    assert_eq!(code, 0, "stderr: {err}");
    let value: serde_json::Value = serde_json::from_str(&out).unwrap();
    for field in ["average_sales", "purchase_frequency", "retention_rate", "churn", "clv"] {
        assert!(value[field].is_number(), "missing {field} in {out}");
    }
    assert!((value["churn"].as_f64().unwrap() + value["retention_rate"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn clv_requires_profit_margin_flag() {
    let dir = fresh_dir("clv-margin");
    let input = write_fixture(&dir, "raw.csv", &FixtureOptions::default());
    let (code, _, _) = run_clvkit(&["clv", input.to_str().unwrap()], &dir);
    assert_eq!(code, 2);
}

#[test]
fn train_single_learner_and_stack_are_deterministic() {
    let dir = fresh_dir("train");
    let features = make_features(&dir);
    let single = dir.join("single.json");
    fs::write(
        &single,
        r#"{"seed": 7, "learner": {"name": "gb", "type": "boost", "params": {"n_estimators": 5, "max_depth": 2}}}"#,
    )
    .unwrap();
    for out in ["m1", "m2"] {
        let (code, _, err) = run_clvkit(
            &[
                "train",
                features.to_str().unwrap(),
                "--config",
                single.to_str().unwrap(),
                "--out-dir",
                dir.join(out).to_str().unwrap(),
            ],
            &dir,
        );
        assert_eq!(code, 0, "stderr: {err}");
    }
    assert_eq!(
        fs::read(dir.join("m1/model.json")).unwrap(),
        fs::read(dir.join("m2/model.json")).unwrap(),
        "same seed must give identical model bytes"
    );

    let stack = dir.join("stack.json");
    fs::write(
        &stack,
        r#"{"seed": 7, "stack": {"base_specs": [
            {"name": "gb", "type": "boost", "params": {"n_estimators": 4, "max_depth": 2}},
            {"name": "lin", "type": "elastic_net", "params": {}}
        ], "k_folds": 3}}"#,
    )
    .unwrap();
    let (code, _, err) = run_clvkit(
        &[
            "train",
            features.to_str().unwrap(),
            "--config",
            stack.to_str().unwrap(),
            "--out-dir",
            dir.join("stack-out").to_str().unwrap(),
        ],
        &dir,
    );
    assert_eq!(code, 0, "stderr: {err}");
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("stack-out/model.json")).unwrap())
            .unwrap();
    assert_eq!(model["kind"], "stack");
    assert!(dir.join("stack-out/training_log.json").exists());
}

#[test]
fn evaluate_perfect_model_reports_zero_rmse() {
    let dir = fresh_dir("evaluate");
    // Target is an exact linear function of the features, so an unpenalized
    // linear fit memorizes it perfectly.
    let mut csv = String::from("customer_id,latetime,earlytime,freq,freq_3m,target\n");
    for i in 1..=30u32 {
        let (lt, et, fq, f3) = (i % 7, i % 7 + 10, i % 5 + 1, i % 3);
        csv.push_str(&format!("{i},{lt},{et},{fq},{f3},{}\n", fq * 2));
    }
    let features = dir.join("features.csv");
    fs::write(&features, csv).unwrap();
    let config = dir.join("cfg.json");
    fs::write(
        &config,
        r#"{"learner": {"name": "lin", "type": "elastic_net", "params": {"penalty_strength": 0.0}}}"#,
    )
    .unwrap();
    let (code, _, err) = run_clvkit(
        &[
            "train",
            features.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            dir.join("out").to_str().unwrap(),
        ],
        &dir,
    );
    assert_eq!(code, 0, "stderr: {err}");
    let eval_path = dir.join("eval.json");
    let (code, _, err) = run_clvkit(
        &[
            "evaluate",
            dir.join("out/model.json").to_str().unwrap(),
            "--data",
            features.to_str().unwrap(),
            "--out",
            eval_path.to_str().unwrap(),
        ],
        &dir,
    );
    assert_eq!(code, 0, "stderr: {err}");
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval_path).unwrap()).unwrap();
    assert!(eval["rmse"].as_f64().unwrap() < 1e-6);
}

#[test]
fn evaluate_feature_width_mismatch_exits_2() {
    let dir = fresh_dir("evaluate-width");
    let features = make_features(&dir);
    // A two-feature model cannot score the four-feature table.
    let x = clvkit_core::Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]])
        .unwrap();
    let y = [1.0, 2.0, 3.0];
    let model = clvkit_core::linear::fit_elastic_net(
        &x,
        &y,
        &clvkit_core::linear::ElasticNetParams::default(),
    )
    .unwrap();
    let file = clvkit_core::persist::ModelFile::new(
        clvkit_core::persist::ModelKind::ElasticNet(model),
    );
    let model_path = dir.join("narrow.json");
    file.save(&model_path).unwrap();
    let (code, _, err) = run_clvkit(
        &[
            "evaluate",
            model_path.to_str().unwrap(),
            "--data",
            features.to_str().unwrap(),
            "--out",
            dir.join("eval.json").to_str().unwrap(),
        ],
        &dir,
    );
    assert_eq!(code, 2, "stderr: {err}");
    assert!(err.contains("features"), "stderr: {err}");
}

#[test]
fn importance_works_for_trees_and_rejects_linear_models() {
    let dir = fresh_dir("importance");
    let features = make_features(&dir);
    let config = dir.join("cfg.json");
    fs::write(
        &config,
        r#"{"learner": {"name": "rf", "type": "random_forest", "params": {"n_estimators": 5}}}"#,
    )
    .unwrap();
    let (code, _, err) = run_clvkit(
        &[
            "train",
            features.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            dir.join("rf").to_str().unwrap(),
        ],
        &dir,
    );
    assert_eq!(code, 0, "stderr: {err}");
    let out_csv = dir.join("importance.csv");
    let (code, _, err) = run_clvkit(
        &[
            "importance",
            dir.join("rf/model.json").to_str().unwrap(),
            "--out",
            out_csv.to_str().unwrap(),
        ],
        &dir,
    );
    assert_eq!(code, 0, "stderr: {err}");
    let text = fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with("feature,weight,gain,cover,total_gain,total_cover"));
    assert!(text.contains("latetime"));

    let lin_cfg = dir.join("lin.json");
    fs::write(&lin_cfg, r#"{"learner": {"name": "lin", "type": "elastic_net", "params": {}}}"#)
        .unwrap();
    run_clvkit(
        &[
            "train",
            features.to_str().unwrap(),
            "--config",
            lin_cfg.to_str().unwrap(),
            "--out-dir",
            dir.join("lin").to_str().unwrap(),
        ],
        &dir,
    );
    let (code, _, _) = run_clvkit(
        &["importance", dir.join("lin/model.json").to_str().unwrap()],
        &dir,
    );
    assert_eq!(code, 2);
}

#[test]
fn experiment_on_fixture_completes_with_all_rows_ok() {
    let dir = fresh_dir("experiment");
    let input = write_fixture(&dir, "raw.csv", &FixtureOptions::default());
    let started = std::time::Instant::now();
    let (code, out, err) = run_clvkit(
        &[
            "experiment",
            input.to_str().unwrap(),
            "--out-dir",
            dir.join("exp").to_str().unwrap(),
            "--seed",
            "42",
        ],
        &dir,
    );
    assert_eq!(code, 0, "stdout: {out}\nstderr: {err}");
    assert!(started.elapsed().as_secs() < 10, "fixture experiment too slow");
    let table = fs::read_to_string(dir.join("exp/table5.csv")).unwrap();
    let mut rows = 0;
    for line in table.lines().skip(1) {
        assert!(line.ends_with(",OK"), "row not OK: {line}");
        rows += 1;
    }
    assert_eq!(rows, 6);
    for name in [
        "importance_random_forest.csv",
        "importance_xgboost_config.csv",
        "importance_lightgbm_config.csv",
        "experiment_meta.json",
        "features.csv",
        "models/stacked.json",
    ] {
        assert!(dir.join("exp").join(name).exists(), "missing {name}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("exp/experiment_meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["protocol"]["seed"], 42);
    assert!(meta["protocol"]["split"].as_str().unwrap().contains("80/20"));
}
