//! Handlers for the single-step subcommands.

use std::io;
use std::path::Path;

use chrono::NaiveDateTime;
use serde_json::json;

use clvkit_core::clv::clv_from_ledger;
use clvkit_core::features::{
    default_cutoff, featurize, read_feature_csv, split_windows, to_matrix, write_feature_csv,
    DesignMatrix, WindowSpec, FEATURE_NAMES,
};
use clvkit_core::ingest::{
    build_ledger, dataset_stats, parse_datetime, parse_transactions, write_cleaned_csv,
    ColumnMap, CustomerLedger, Transaction,
};
use clvkit_core::persist::{ModelFile, ModelKind};
use clvkit_core::report::{
    compute_importance, evaluate, write_importance_csv, ImportanceReport, TreeEnsemble,
};
use clvkit_core::stack::{fit_stack, Learner};

use crate::config::{TrainConfig, TrainMode};
use crate::errors::{create_dir, open_input, write_output, CliError, CliResult};

/// Parses raw transactions, folding per-row parse errors into the clean
/// report, and returns the surviving transactions.
pub fn load_and_clean(
    input: &Path,
) -> CliResult<(Vec<Transaction>, clvkit_core::ingest::CleanReport)> {
    let file = open_input(input)?;
    let (records, row_errors) =
        parse_transactions(io::BufReader::new(file), &ColumnMap::default())?;
    let (transactions, mut report) = clvkit_core::ingest::clean(&records);
    report.absorb_parse_errors(row_errors.len());
    Ok((transactions, report))
}

pub fn cmd_ingest(input: &Path, out_dir: &Path) -> CliResult<()> {
    let (transactions, report) = load_and_clean(input)?;
    create_dir(out_dir)?;

    let mut cleaned = Vec::new();
    write_cleaned_csv(&transactions, &mut cleaned)
        .map_err(|e| CliError::internal(e.to_string()))?;
    std::fs::write(out_dir.join("cleaned.csv"), cleaned)
        .map_err(|e| CliError::internal(e.to_string()))?;

    let report_json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::internal(e.to_string()))?;
    write_output(&out_dir.join("clean_report.json"), &report_json)?;

    if !transactions.is_empty() {
        let ledger = build_ledger(&transactions);
        let stats = dataset_stats(&ledger, &transactions)?;
        let stats_json = serde_json::to_string_pretty(&stats)
            .map_err(|e| CliError::internal(e.to_string()))?;
        write_output(&out_dir.join("dataset_stats.json"), &stats_json)?;
    }

    println!(
        "cleaned {} of {} rows ({} removed) -> {}",
        report.retained,
        report.input_rows,
        report.removed(),
        out_dir.display()
    );
    Ok(())
}

/// Accepts timestamps in any ingest format, or a bare date at midnight.
pub fn parse_cutoff(text: &str) -> CliResult<NaiveDateTime> {
    if let Some(dt) = parse_datetime(text) {
        return Ok(dt);
    }
    for fmt in ["%Y-%m-%d", "%d-%m-%Y"] {
        if let Ok(d) = chrono::NaiveDate::parse_from_str(text.trim(), fmt) {
            return Ok(d.and_hms_opt(0, 0, 0).expect("midnight exists"));
        }
    }
    Err(CliError::usage(format!("unrecognized cutoff timestamp {text:?}")))
}

pub fn build_window_spec(
    ledger: &CustomerLedger,
    cutoff: Option<&str>,
    horizon_days: u32,
    recent_window_days: u32,
) -> CliResult<WindowSpec> {
    let cutoff = match cutoff {
        Some(text) => parse_cutoff(text)?,
        None => default_cutoff(ledger)?,
    };
    Ok(WindowSpec { cutoff, target_horizon_days: horizon_days, recent_window_days })
}

pub fn cmd_featurize(
    cleaned: &Path,
    cutoff: Option<&str>,
    horizon_days: u32,
    recent_window_days: u32,
    out: &Path,
) -> CliResult<()> {
    let (transactions, _) = load_and_clean(cleaned)?;
    if transactions.is_empty() {
        return Err(CliError::usage("no transactions survive cleaning".to_string()));
    }
    let ledger = build_ledger(&transactions);
    let spec = build_window_spec(&ledger, cutoff, horizon_days, recent_window_days)?;
    let (observation, target) = split_windows(&ledger, &spec)?;
    let rows = featurize(&observation, &target, &spec);
    if rows.is_empty() {
        return Err(CliError::usage("empty observation window: no customers before the cutoff".to_string()));
    }
    let mut buf = Vec::new();
    write_feature_csv(&rows, &mut buf).map_err(|e| CliError::internal(e.to_string()))?;
    std::fs::write(out, buf).map_err(|e| CliError::internal(e.to_string()))?;
    println!("featurized {} customers (cutoff {}) -> {}", rows.len(), spec.cutoff, out.display());
    Ok(())
}

pub fn cmd_clv(input: &Path, profit_margin: f64, out: Option<&Path>) -> CliResult<()> {
    let (transactions, _) = load_and_clean(input)?;
    let ledger = build_ledger(&transactions);
    let breakdown = clv_from_ledger(&ledger, profit_margin)?;
    let text = serde_json::to_string_pretty(&breakdown)
        .map_err(|e| CliError::internal(e.to_string()))?;
    println!("{text}");
    if let Some(path) = out {
        write_output(path, &text)?;
    }
    Ok(())
}

pub fn load_design_matrix(features: &Path) -> CliResult<DesignMatrix> {
    let file = open_input(features)?;
    let rows = read_feature_csv(file)?;
    Ok(to_matrix(&rows)?)
}

pub fn cmd_train(features: &Path, config_path: &Path, out_dir: &Path) -> CliResult<()> {
    let config_text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", config_path.display())))?;
    let config: TrainConfig = serde_json::from_str(&config_text)
        .map_err(|e| CliError::usage(format!("bad config {}: {e}", config_path.display())))?;
    let dm = load_design_matrix(features)?;

    let model = match config.mode.clone() {
        TrainMode::Learner(spec) => {
            let fitted = spec
                .fit(&dm.features, &dm.targets, config.seed)
                .map_err(|e| CliError::internal(e.to_string()))?;
            match fitted {
                clvkit_core::stack::FittedBase::Forest(m) => ModelKind::RandomForest(m),
                clvkit_core::stack::FittedBase::Boost(m) => ModelKind::Boost(m),
                clvkit_core::stack::FittedBase::ElasticNet(m) => ModelKind::ElasticNet(m),
            }
        }
        TrainMode::Stack(stack) => {
            let params = stack.into_params(config.seed);
            let fitted = fit_stack(&dm.features, &dm.targets, &dm.feature_names, &params)
                .map_err(|e| CliError::internal(e.to_string()))?;
            ModelKind::Stack(fitted)
        }
    };

    let predictions: Vec<f64> = dm
        .features
        .rows()
        .map(|row| model.predict(row))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::internal(e.to_string()))?;
    let train_eval = evaluate(&predictions, &dm.targets, false)
        .map_err(|e| CliError::internal(e.to_string()))?;

    create_dir(out_dir)?;
    let model_file = ModelFile::new(model);
    model_file
        .save(&out_dir.join("model.json"))
        .map_err(|e| CliError::internal(e.to_string()))?;

    let log = json!({
        "config": config,
        "n_rows": dm.features.n_rows(),
        "n_features": dm.features.n_cols(),
        "feature_names": dm.feature_names,
        "model_kind": model_file.model.kind_name(),
        "train_rmse": train_eval.rmse,
        "train_mae": train_eval.mae,
    });
    let log_text =
        serde_json::to_string_pretty(&log).map_err(|e| CliError::internal(e.to_string()))?;
    write_output(&out_dir.join("training_log.json"), &log_text)?;
    println!(
        "trained {} on {} rows (train rmse {:.6}, mae {:.6}) -> {}",
        model_file.model.kind_name(),
        dm.features.n_rows(),
        train_eval.rmse,
        train_eval.mae,
        out_dir.display()
    );
    Ok(())
}

fn model_width(model: &ModelKind) -> Option<usize> {
    match model {
        ModelKind::RandomForest(m) => Some(m.n_features()),
        ModelKind::Boost(m) => m.trees().first().map(|t| t.n_features()),
        ModelKind::ElasticNet(m) => Some(m.n_features()),
        ModelKind::Stack(m) => Some(m.n_features()),
    }
}

pub fn cmd_evaluate(models: &[std::path::PathBuf], features: &Path, out: &Path) -> CliResult<()> {
    if models.is_empty() {
        return Err(CliError::usage("no model files given".to_string()));
    }
    let dm = load_design_matrix(features)?;
    let mut entries = Vec::new();
    for path in models {
        let file = ModelFile::load(path)
            .map_err(|e| CliError::usage(format!("cannot load {}: {e}", path.display())))?;
        if let Some(width) = model_width(&file.model) {
            if width != dm.features.n_cols() {
                return Err(CliError::usage(format!(
                    "{}: model expects {width} features, data has {}",
                    path.display(),
                    dm.features.n_cols()
                )));
            }
        }
        let predictions: Vec<f64> = dm
            .features
            .rows()
            .map(|row| file.model.predict(row))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::internal(e.to_string()))?;
        let eval = evaluate(&predictions, &dm.targets, false)
            .map_err(|e| CliError::internal(e.to_string()))?;
        println!(
            "{:<40} kind={:<13} rmse={:.6} mae={:.6} n={}",
            path.display(),
            file.model.kind_name(),
            eval.rmse,
            eval.mae,
            eval.n
        );
        entries.push(json!({
            "model": path.display().to_string(),
            "kind": file.model.kind_name(),
            "rmse": eval.rmse,
            "mae": eval.mae,
            "n": eval.n,
        }));
    }
    let doc = if entries.len() == 1 {
        entries.pop().expect("one entry")
    } else {
        json!({ "models": entries })
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::internal(e.to_string()))?;
    write_output(out, &text)?;
    Ok(())
}

/// Feature names for a model of the given width: the canonical predictor
/// names when it matches the standard table, positional names otherwise.
pub fn names_for_width(width: usize) -> Vec<String> {
    if width == FEATURE_NAMES.len() {
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..width).map(|j| format!("x{j}")).collect()
    }
}

fn importance_of(model: &ModelKind) -> CliResult<ImportanceReport> {
    match model {
        ModelKind::RandomForest(m) => {
            Ok(compute_importance(m, &names_for_width(m.n_features()))?)
        }
        ModelKind::Boost(m) => {
            let width = TreeEnsemble::n_features(m);
            Ok(compute_importance(m, &names_for_width(width))?)
        }
        ModelKind::ElasticNet(_) | ModelKind::Stack(_) => Err(CliError::usage(
            "importance indicators are defined for tree ensembles; linear and stacked models report coefficients instead".to_string(),
        )),
    }
}

pub fn cmd_importance(model_path: &Path, out: &Path, json_out: Option<&Path>) -> CliResult<()> {
    let file = ModelFile::load(model_path)
        .map_err(|e| CliError::usage(format!("cannot load {}: {e}", model_path.display())))?;
    let report = importance_of(&file.model)?;
    let mut buf = Vec::new();
    write_importance_csv(&report, &mut buf).map_err(|e| CliError::internal(e.to_string()))?;
    std::fs::write(out, buf).map_err(|e| CliError::internal(e.to_string()))?;
    if let Some(path) = json_out {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::internal(e.to_string()))?;
        write_output(path, &text)?;
    }
    println!("importance for {} -> {}", model_path.display(), out.display());
    Ok(())
}
