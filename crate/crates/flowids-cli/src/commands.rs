//! The five pipeline commands. Each writes its artifacts plus the resolved
//! configuration into one output directory and prints a short summary line.
//!
//! Determinism: given the same inputs, configuration, and seed, every file a
//! command emits is byte-identical across runs, except `latency.json`, which
//! records wall-clock measurements and lives apart from the metric reports
//! for exactly that reason.

use std::fs;
use std::path::Path;

use flowids::datapipe::{
    build_dataset, load_csv, load_dataset, load_schema, preprocess, save_dataset, Dataset,
};
use flowids::error::{Error, Result};
use flowids::evalkit::{
    class_report, confusion_matrix, latency_benchmark, roc_curve, EvalReport, RocCurve,
};
use flowids::model::{argmax_row, build_model, forward, load_model, save_model, Model, Variant};
use flowids::rng::{self, streams};
use flowids::tensor::Matrix2;
use flowids::trainer::{evaluate, gather_batch, train};

use crate::config::RunConfig;

fn require<'a>(field: Option<&'a std::path::PathBuf>, what: &str) -> Result<&'a Path> {
    field.map(|p| p.as_path()).ok_or_else(|| {
        Error::Config(format!(
            "{what} is required (set it in the config file or pass the flag)"
        ))
    })
}

pub fn cmd_preprocess(cfg: &RunConfig, out: &Path) -> Result<()> {
    let schema_path = require(cfg.schema.as_ref(), "schema path")?;
    let data_path = require(cfg.data.as_ref(), "data path")?;
    let schema = load_schema(schema_path)?;
    let raw = load_csv(data_path, &schema)?;
    let ds = build_dataset(&raw, &schema)?;

    let (train_ds, val_ds, mut summary) = preprocess(
        &ds,
        &cfg.pipeline_config(),
        &mut rng::seeded_stream(cfg.seed, streams::BALANCE),
        &mut rng::seeded_stream(cfg.seed, streams::SPLIT),
    )?;
    summary.rows_dropped = raw.dropped_rows;

    fs::create_dir_all(out)?;
    save_dataset(&train_ds, out, "train")?;
    save_dataset(&val_ds, out, "val")?;

    let mut text = String::new();
    text.push_str(&format!("rows kept: {}\n", summary.rows_kept));
    text.push_str(&format!(
        "rows dropped (bad numeric cells): {}\n",
        summary.rows_dropped
    ));
    text.push_str(&format!("features: {}\n", train_ds.n_features()));
    text.push_str("class counts (before -> after balancing):\n");
    for (c, name) in summary.class_names.iter().enumerate() {
        text.push_str(&format!(
            "  {name}: {} -> {}\n",
            summary.counts_before_balancing[c], summary.counts_after_balancing[c]
        ));
    }
    text.push_str(&format!(
        "split: {} train / {} val\n",
        summary.train_size, summary.val_size
    ));
    fs::write(out.join("preprocess_summary.txt"), &text)?;
    cfg.write_into(out)?;
    println!(
        "preprocess: {} train / {} val rows, {} features -> {}",
        summary.train_size,
        summary.val_size,
        train_ds.n_features(),
        out.display()
    );
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, prep: &Path, out: &Path) -> Result<()> {
    let train_ds = load_dataset(prep, "train")?;
    let val_ds = load_dataset(prep, "val")?;
    let spec = cfg.model_spec(train_ds.n_features(), train_ds.n_classes())?;
    let mut model = build_model(
        &spec,
        &mut rng::seeded_stream(cfg.seed, streams::MODEL_INIT),
    )?;

    let history = train(&mut model, &train_ds, &val_ds, &cfg.train_config())?;

    fs::create_dir_all(out)?;
    save_model(&model, &out.join("weights.bin"))?;
    history.write_csv(&out.join("history.csv"))?;
    cfg.write_into(out)?;

    let last = history.epochs.last().expect("at least one epoch");
    println!(
        "train: variant {} ({}), {} params, final val acc {:.4}, val loss {:.4} -> {}",
        spec.variant.index(),
        spec.variant.label(),
        model.count_params(),
        last.val_accuracy,
        last.val_loss,
        out.display()
    );
    Ok(())
}

/// Batched predictions plus the full probability matrix.
fn predict_probs(model: &Model, ds: &Dataset, batch: usize) -> Result<(Vec<usize>, Matrix2)> {
    let mut probs = Matrix2::zeros(ds.len(), ds.n_classes());
    let mut preds = Vec::with_capacity(ds.len());
    let rows: Vec<usize> = (0..ds.len()).collect();
    for chunk in rows.chunks(batch.max(1)) {
        let (x, _) = gather_batch(ds, chunk);
        let (p, _) = forward(model, &x)?;
        for (i, &row) in chunk.iter().enumerate() {
            probs.row_mut(row).copy_from_slice(p.row(i));
            preds.push(argmax_row(p.row(i)));
        }
    }
    Ok((preds, probs))
}

fn check_model_matches(model: &Model, ds: &Dataset) -> Result<()> {
    if model.spec.steps != ds.n_features() || model.spec.n_classes != ds.n_classes() {
        return Err(Error::shape(
            "evaluate",
            format!(
                "weights expect {} steps / {} classes, dataset has {} / {}",
                model.spec.steps,
                model.spec.n_classes,
                ds.n_features(),
                ds.n_classes()
            ),
        ));
    }
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, prep: &Path, weights: &Path, out: &Path) -> Result<()> {
    let val_ds = load_dataset(prep, "val")?;
    let model = load_model(weights)?;
    check_model_matches(&model, &val_ds)?;

    let k = val_ds.n_classes();
    let (preds, probs) = predict_probs(&model, &val_ds, cfg.batch_size)?;
    let cm = confusion_matrix(&val_ds.labels, &preds, k)?;
    let report = class_report(&cm)?;

    // The printed accuracy must be recomputable from the emitted matrix.
    let recomputed = cm.trace() as f64 / cm.total() as f64;
    if report.accuracy != recomputed {
        return Err(Error::Numeric(format!(
            "internal cross-check failed: report accuracy {} vs confusion-matrix accuracy {recomputed}",
            report.accuracy
        )));
    }

    let mut curves: Vec<Option<RocCurve>> = Vec::with_capacity(k);
    for c in 0..k {
        let scores: Vec<f64> = (0..val_ds.len()).map(|r| probs.get(r, c)).collect();
        match roc_curve(&scores, &val_ds.labels, c) {
            Ok(curve) => curves.push(Some(curve)),
            Err(Error::Data(_)) => curves.push(None),
            Err(e) => return Err(e),
        }
    }

    fs::create_dir_all(out)?;
    let eval = EvalReport {
        class_names: val_ds.class_names.clone(),
        auc: curves.iter().map(|c| c.as_ref().map(|c| c.auc)).collect(),
        confusion: cm.rows(),
        report,
        latency: None,
    };
    eval.write_files(out)?;
    for (c, curve) in curves.iter().enumerate() {
        if let Some(curve) = curve {
            fs::write(out.join(format!("roc_class_{c}.csv")), curve.to_csv())?;
        }
    }

    // Wall-clock measurement goes in its own file; everything above is
    // deterministic for a fixed (weights, dataset).
    let latency = latency_benchmark(&model, &val_ds.to_sequences(), cfg.warmup, cfg.reps)?;
    fs::write(
        out.join("latency.json"),
        serde_json::to_string_pretty(&latency).expect("plain struct") + "\n",
    )?;
    cfg.write_into(out)?;

    println!(
        "evaluate: accuracy {:.4}, macro F1 {:.4}, macro FPR {:.6}, {:.2e} s/instance -> {}",
        eval.report.accuracy,
        eval.report.macro_f1,
        eval.report.macro_fpr,
        latency.mean_seconds_per_instance,
        out.display()
    );
    Ok(())
}

pub fn cmd_ablate(cfg: &RunConfig, prep: &Path, out: &Path) -> Result<()> {
    let train_ds = load_dataset(prep, "train")?;
    let val_ds = load_dataset(prep, "val")?;

    struct Row {
        index: usize,
        label: &'static str,
        accuracy: f64,
        val_loss: f64,
        macro_fpr: f64,
    }

    let mut rows = Vec::new();
    for variant in Variant::ALL {
        // Each row uses the variant's defining hidden width and the same
        // seed and data as the others.
        let mut row_cfg = cfg.clone();
        row_cfg.variant = variant.index();
        row_cfg.hidden = 0;
        let spec = row_cfg.model_spec(train_ds.n_features(), train_ds.n_classes())?;
        let mut model = build_model(
            &spec,
            &mut rng::seeded_stream(cfg.seed, streams::MODEL_INIT),
        )?;
        train(&mut model, &train_ds, &val_ds, &row_cfg.train_config())?;

        let (val_loss, accuracy) = evaluate(&model, &val_ds, cfg.batch_size)?;
        let (preds, _) = predict_probs(&model, &val_ds, cfg.batch_size)?;
        let cm = confusion_matrix(&val_ds.labels, &preds, val_ds.n_classes())?;
        let report = class_report(&cm)?;
        rows.push(Row {
            index: variant.index(),
            label: variant.label(),
            accuracy,
            val_loss,
            macro_fpr: report.macro_fpr,
        });
        println!(
            "ablate: #{} {} -> acc {:.4}, loss {:.4}, fpr {:.6}",
            variant.index(),
            variant.label(),
            accuracy,
            val_loss,
            report.macro_fpr
        );
    }

    fs::create_dir_all(out)?;
    let mut csv = String::from("variant,model,accuracy,val_loss,macro_fpr\n");
    let mut text = format!(
        "{:<8} {:<15} {:>9} {:>9} {:>10}\n",
        "variant", "model", "accuracy", "loss", "fpr"
    );
    for r in &rows {
        csv.push_str(&format!(
            "#{},{},{},{},{}\n",
            r.index, r.label, r.accuracy, r.val_loss, r.macro_fpr
        ));
        text.push_str(&format!(
            "{:<8} {:<15} {:>9.4} {:>9.4} {:>10.6}\n",
            format!("#{}", r.index),
            r.label,
            r.accuracy,
            r.val_loss,
            r.macro_fpr
        ));
    }
    fs::write(out.join("ablation.csv"), csv)?;
    fs::write(out.join("ablation.txt"), text)?;
    cfg.write_into(out)?;
    println!(
        "ablate: table with {} rows -> {}",
        rows.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_benchmark(cfg: &RunConfig, prep: &Path, weights: &Path, out: &Path) -> Result<()> {
    let val_ds = load_dataset(prep, "val")?;
    let model = load_model(weights)?;
    check_model_matches(&model, &val_ds)?;
    let latency = latency_benchmark(&model, &val_ds.to_sequences(), cfg.warmup, cfg.reps)?;

    fs::create_dir_all(out)?;
    fs::write(
        out.join("latency.json"),
        serde_json::to_string_pretty(&latency).expect("plain struct") + "\n",
    )?;
    cfg.write_into(out)?;
    println!(
        "benchmark: {:.3e} s/instance over {} instances ({} warmup) -> {}",
        latency.mean_seconds_per_instance,
        latency.instances,
        latency.warmup,
        out.display()
    );
    Ok(())
}
