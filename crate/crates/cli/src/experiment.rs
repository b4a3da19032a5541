//! The end-to-end reproduction experiment.
//!
//! Cleans the raw export, featurizes with the default cutoff (dataset end
//! minus the target horizon), splits rows 80/20 by seeded shuffle, trains
//! the four single models plus the stacked regressor (and a no-passthrough
//! variant for comparison), and writes the results table, importance
//! tables, fitted models, and a protocol metadata file. Per-model failures
//! land in the results table's status column instead of aborting the run.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use clvkit_core::ensemble::{fit_boost, fit_forest, BoostParams, ForestParams};
use clvkit_core::features::{featurize, split_windows, write_feature_csv};
use clvkit_core::ingest::{build_ledger, dataset_stats};
use clvkit_core::linear::{fit_elastic_net, ElasticNetParams};
use clvkit_core::matrix::Matrix;
use clvkit_core::persist::{ModelFile, ModelKind};
use clvkit_core::report::{
    compute_importance, evaluate, rank_features, write_importance_csv, ImportanceIndicator,
};
use clvkit_core::stack::{derive_seed, fit_stack, LearnerSpec, StackParams};

use crate::commands::{build_window_spec, load_and_clean};
use crate::errors::{create_dir, write_output, CliError, CliResult};

const TEST_FRACTION: f64 = 0.2;
const K_FOLDS: usize = 5;

pub struct ExperimentArgs<'a> {
    pub input: &'a Path,
    pub out_dir: &'a Path,
    pub seed: u64,
    pub cutoff: Option<&'a str>,
    pub horizon_days: u32,
    pub recent_window_days: u32,
}

struct TableRow {
    model: &'static str,
    rmse: Option<f64>,
    mae: Option<f64>,
    status: String,
}

impl TableRow {
    fn ok(model: &'static str, rmse: f64, mae: f64) -> TableRow {
        TableRow { model, rmse: Some(rmse), mae: Some(mae), status: "OK".into() }
    }

    fn failed(model: &'static str, err: &CliError) -> TableRow {
        TableRow { model, rmse: None, mae: None, status: format!("error: {err}") }
    }
}

/// Seeded 80/20 row split; every row is one customer, so this is a customer
/// split.
fn train_test_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "train-test-split", 0));
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_test = ((n as f64 * TEST_FRACTION).round() as usize).clamp(1, n - 1);
    let test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    train.sort_unstable();
    let mut test = test;
    test.sort_unstable();
    (train, test)
}

fn eval_on(
    model: &ModelKind,
    x: &Matrix,
    y: &[f64],
) -> CliResult<(f64, f64)> {
    let predictions: Vec<f64> = x
        .rows()
        .map(|row| model.predict(row))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::internal(e.to_string()))?;
    let report = evaluate(&predictions, y, false).map_err(|e| CliError::internal(e.to_string()))?;
    Ok((report.rmse, report.mae))
}

fn base_specs(seed: u64) -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::random_forest("random_forest", ForestParams { seed, ..ForestParams::default() }),
        LearnerSpec::boost("xgboost_config", BoostParams::xgboost_config(seed)),
        LearnerSpec::elastic_net("elastic_net", ElasticNetParams::default()),
    ]
}

pub fn cmd_experiment(args: &ExperimentArgs) -> CliResult<()> {
    let (transactions, clean_report) = load_and_clean(args.input)?;
    if transactions.is_empty() {
        return Err(CliError::usage("no transactions survive cleaning".to_string()));
    }
    let ledger = build_ledger(&transactions);
    let stats = dataset_stats(&ledger, &transactions)?;
    let spec = build_window_spec(&ledger, args.cutoff, args.horizon_days, args.recent_window_days)?;
    let (observation, target) = split_windows(&ledger, &spec)?;
    let rows = featurize(&observation, &target, &spec);
    if rows.is_empty() {
        return Err(CliError::usage("empty observation window: no customers before the cutoff".to_string()));
    }
    let dm = clvkit_core::features::to_matrix(&rows)?;

    create_dir(args.out_dir)?;
    let models_dir = args.out_dir.join("models");
    create_dir(&models_dir)?;
    let mut buf = Vec::new();
    write_feature_csv(&rows, &mut buf).map_err(|e| CliError::internal(e.to_string()))?;
    std::fs::write(args.out_dir.join("features.csv"), buf)
        .map_err(|e| CliError::internal(e.to_string()))?;

    let n = dm.features.n_rows();
    if n < K_FOLDS * 2 {
        return Err(CliError::usage(format!(
            "only {n} feature rows; the experiment needs at least {}",
            K_FOLDS * 2
        )));
    }
    let (train_rows, test_rows) = train_test_split(n, args.seed);
    let x_train = dm.features.select_rows(&train_rows)?;
    let y_train: Vec<f64> = train_rows.iter().map(|&i| dm.targets[i]).collect();
    let x_test = dm.features.select_rows(&test_rows)?;
    let y_test: Vec<f64> = test_rows.iter().map(|&i| dm.targets[i]).collect();

    let mut table: Vec<TableRow> = Vec::new();
    let mut fitted: Vec<(&'static str, ModelKind)> = Vec::new();

    let internal = |e: clvkit_core::Error| CliError::internal(e.to_string());
    let singles: Vec<(&'static str, CliResult<ModelKind>)> = vec![
        (
            "random_forest",
            fit_forest(&x_train, &y_train, &ForestParams { seed: args.seed, ..ForestParams::default() })
                .map(ModelKind::RandomForest)
                .map_err(internal),
        ),
        (
            "xgboost_config",
            fit_boost(&x_train, &y_train, &BoostParams::xgboost_config(args.seed))
                .map(ModelKind::Boost)
                .map_err(internal),
        ),
        (
            "lightgbm_config",
            fit_boost(&x_train, &y_train, &BoostParams::lightgbm_config(args.seed))
                .map(ModelKind::Boost)
                .map_err(internal),
        ),
        (
            "elastic_net",
            fit_elastic_net(&x_train, &y_train, &ElasticNetParams::default())
                .map(ModelKind::ElasticNet)
                .map_err(internal),
        ),
    ];

    for (name, result) in singles {
        match result {
            Ok(model) => match eval_on(&model, &x_test, &y_test) {
                Ok((rmse, mae)) => {
                    table.push(TableRow::ok(name, rmse, mae));
                    fitted.push((name, model));
                }
                Err(e) => table.push(TableRow::failed(name, &e)),
            },
            Err(e) => table.push(TableRow::failed(name, &e)),
        }
    }

    for (name, passthrough) in [("stacked", true), ("stacked_no_passthrough", false)] {
        let params = StackParams {
            base_specs: base_specs(args.seed),
            meta_params: ElasticNetParams::default(),
            k_folds: K_FOLDS,
            use_features_in_secondary: passthrough,
            global_seed: args.seed,
        };
        let result = fit_stack(&x_train, &y_train, &dm.feature_names, &params)
            .map(ModelKind::Stack)
            .map_err(|e| CliError::internal(e.to_string()));
        match result {
            Ok(model) => match eval_on(&model, &x_test, &y_test) {
                Ok((rmse, mae)) => {
                    table.push(TableRow::ok(name, rmse, mae));
                    fitted.push((name, model));
                }
                Err(e) => table.push(TableRow::failed(name, &e)),
            },
            Err(e) => table.push(TableRow::failed(name, &e)),
        }
    }

    // Results table.
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["model", "rmse", "mae", "status"])
        .map_err(|e| CliError::internal(e.to_string()))?;
    for row in &table {
        w.write_record([
            row.model.to_string(),
            row.rmse.map(|v| format!("{v:.6}")).unwrap_or_default(),
            row.mae.map(|v| format!("{v:.6}")).unwrap_or_default(),
            row.status.clone(),
        ])
        .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let table_bytes = w.into_inner().map_err(|e| CliError::internal(e.to_string()))?;
    std::fs::write(args.out_dir.join("table5.csv"), table_bytes)
        .map_err(|e| CliError::internal(e.to_string()))?;

    // Persisted models.
    for (name, model) in &fitted {
        ModelFile::new(model.clone())
            .save(&models_dir.join(format!("{name}.json")))
            .map_err(|e| CliError::internal(e.to_string()))?;
    }

    // Importance tables for the tree models, plus the gain-vs-weight
    // direction of the boosted model.
    let mut direction = json!(null);
    for (name, model) in &fitted {
        let report = match model {
            ModelKind::RandomForest(m) => compute_importance(m, &dm.feature_names)
                .map_err(|e| CliError::internal(e.to_string()))?,
            ModelKind::Boost(m) => compute_importance(m, &dm.feature_names)
                .map_err(|e| CliError::internal(e.to_string()))?,
            _ => continue,
        };
        let mut buf = Vec::new();
        write_importance_csv(&report, &mut buf).map_err(|e| CliError::internal(e.to_string()))?;
        std::fs::write(args.out_dir.join(format!("importance_{name}.csv")), buf)
            .map_err(|e| CliError::internal(e.to_string()))?;
        if *name == "xgboost_config" {
            let by_gain = rank_features(&report, ImportanceIndicator::Gain);
            let by_weight = rank_features(&report, ImportanceIndicator::Weight);
            direction = json!({
                "model": name,
                "top_by_gain": by_gain.first(),
                "top_by_weight": by_weight.first(),
                "differs": by_gain.first() != by_weight.first(),
            });
        }
    }

    let meta = json!({
        "protocol": {
            "split": "random 80/20 customer split of the feature table, seeded shuffle",
            "test_fraction": TEST_FRACTION,
            "seed": args.seed,
            "cutoff": spec.cutoff.to_string(),
            "target_horizon_days": spec.target_horizon_days,
            "recent_window_days": spec.recent_window_days,
            "k_folds": K_FOLDS,
            "stack_bases": ["random_forest", "xgboost_config", "elastic_net"],
        },
        "dataset": {
            "clean_report": clean_report,
            "n_customers": stats.n_customers,
            "n_transactions": stats.n_transactions,
            "date_min": stats.date_min.to_string(),
            "date_max": stats.date_max.to_string(),
            "mean_customer_revenue": stats.mean_customer_revenue,
            "median_customer_revenue": stats.median_customer_revenue,
            "n_feature_rows": n,
            "n_train": train_rows.len(),
            "n_test": test_rows.len(),
        },
        "importance_direction": direction,
    });
    write_output(
        &args.out_dir.join("experiment_meta.json"),
        &serde_json::to_string_pretty(&meta).map_err(|e| CliError::internal(e.to_string()))?,
    )?;

    for row in &table {
        match (row.rmse, row.mae) {
            (Some(r), Some(m)) => println!("{:<24} rmse={r:.6} mae={m:.6} {}", row.model, row.status),
            _ => println!("{:<24} {}", row.model, row.status),
        }
    }
    Ok(())
}
