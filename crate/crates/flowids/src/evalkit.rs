//! Evaluation metrics: confusion matrix, per-class classification report
//! with macro/weighted/micro averages and macro false-positive rate,
//! one-vs-rest ROC curves with trapezoidal AUC, and a single-instance
//! inference-latency benchmark.
//!
//! Conventions (documented because reporting tools differ): 0/0 metric
//! ratios are 0; the reported FPR is the unweighted mean over classes of the
//! one-vs-rest FP/(FP+TN); ROC scores are raw softmax probabilities.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{forward, Model};
use crate::tensor::Matrix3;

/// k x k counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, true_class: usize) -> u64 {
        (0..self.k).map(|p| self.get(true_class, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, predicted)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.k)
            .map(|t| (0..self.k).map(|p| self.get(t, p)).collect())
            .collect()
    }

    /// Plain CSV: one row per true class.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for t in 0..self.k {
            let row: Vec<String> = (0..self.k).map(|p| self.get(t, p).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Count (true, predicted) pairs into a `k x k` matrix.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(
            "confusion_matrix",
            format!(
                "{} true labels vs {} predictions",
                y_true.len(),
                y_pred.len()
            ),
        ));
    }
    let mut counts = vec![0u64; k * k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::Data(format!(
                "confusion_matrix: label pair ({t}, {p}) out of range for {k} classes"
            )));
        }
        counts[t * k + p] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

/// Per-class precision/recall/F1/support plus the aggregate averages.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<u64>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    /// Unweighted mean over classes of one-vs-rest FP/(FP+TN).
    pub macro_fpr: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Derive every report metric from a confusion matrix. Pure: the same matrix
/// always yields the same report.
pub fn class_report(cm: &ConfusionMatrix) -> Result<ClassReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data(
            "class_report: empty confusion matrix".to_string(),
        ));
    }
    let k = cm.n_classes();
    let mut precision = Vec::with_capacity(k);
    let mut recall = Vec::with_capacity(k);
    let mut f1 = Vec::with_capacity(k);
    let mut support = Vec::with_capacity(k);
    let mut fpr_sum = 0.0;
    let mut tp_sum = 0u64;
    let mut fp_sum = 0u64;
    let mut fn_sum = 0u64;

    for c in 0..k {
        let tp = cm.get(c, c);
        let fp = cm.col_sum(c) - tp;
        let fn_ = cm.row_sum(c) - tp;
        let tn = total - tp - fp - fn_;
        let p = ratio(tp as f64, (tp + fp) as f64);
        let r = ratio(tp as f64, (tp + fn_) as f64);
        precision.push(p);
        recall.push(r);
        f1.push(ratio(2.0 * p * r, p + r));
        support.push(cm.row_sum(c));
        fpr_sum += ratio(fp as f64, (fp + tn) as f64);
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn_;
    }

    let accuracy = cm.trace() as f64 / total as f64;
    let kf = k as f64;
    let weighted = |values: &[f64]| -> f64 {
        values
            .iter()
            .zip(&support)
            .map(|(v, &s)| v * s as f64)
            .sum::<f64>()
            / total as f64
    };
    let micro_precision = ratio(tp_sum as f64, (tp_sum + fp_sum) as f64);
    let micro_recall = ratio(tp_sum as f64, (tp_sum + fn_sum) as f64);
    // Integer form of the harmonic mean, so the single-label identity
    // micro precision = recall = F1 = accuracy holds exactly.
    let micro_f1 = ratio(2.0 * tp_sum as f64, (2 * tp_sum + fp_sum + fn_sum) as f64);
    Ok(ClassReport {
        macro_precision: precision.iter().sum::<f64>() / kf,
        macro_recall: recall.iter().sum::<f64>() / kf,
        macro_f1: f1.iter().sum::<f64>() / kf,
        weighted_precision: weighted(&precision),
        weighted_recall: weighted(&recall),
        weighted_f1: weighted(&f1),
        micro_f1,
        micro_precision,
        micro_recall,
        macro_fpr: fpr_sum / kf,
        precision,
        recall,
        f1,
        support,
        accuracy,
    })
}

/// One-vs-rest ROC points (fpr, tpr) and the trapezoidal AUC.
#[derive(Debug, Clone, Serialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (fpr, tpr) in &self.points {
            out.push_str(&format!("{fpr},{tpr}\n"));
        }
        out
    }
}

/// Sweep thresholds over the descending unique scores of class `c` (treated
/// one-vs-rest). Tied scores step together, so the AUC equals the pairwise
/// comparison statistic with ties counted one half.
pub fn roc_curve(scores: &[f64], y_true: &[usize], class: usize) -> Result<RocCurve> {
    if scores.len() != y_true.len() {
        return Err(Error::shape(
            "roc_curve",
            format!("{} scores vs {} labels", scores.len(), y_true.len()),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("roc_curve: non-finite score".to_string()));
    }
    let positives = y_true.iter().filter(|&&y| y == class).count();
    let negatives = y_true.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data(format!(
            "roc_curve: class {class} needs both positives and negatives (got {positives} / {negatives})"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if y_true[order[i]] == class {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Mean single-instance forward time.
#[derive(Debug, Clone, Serialize)]
pub struct LatencyReport {
    pub mean_seconds_per_instance: f64,
    pub instances: usize,
    pub warmup: usize,
}

/// Run `warmup` untimed single-instance forwards, then time `reps` of them
/// with a monotonic clock (instances cycle through `x`). Batch size stays at
/// 1 to match per-instance reporting.
pub fn latency_benchmark(
    model: &Model,
    x: &Matrix3,
    warmup: usize,
    reps: usize,
) -> Result<LatencyReport> {
    if reps == 0 {
        return Err(Error::Config(
            "latency_benchmark: reps must be >= 1".to_string(),
        ));
    }
    if x.batch() == 0 {
        return Err(Error::Data("latency_benchmark: empty input".to_string()));
    }
    let instance = |i: usize| -> Matrix3 {
        let b = i % x.batch();
        let mut data = Vec::with_capacity(x.steps() * x.channels());
        for t in 0..x.steps() {
            data.extend_from_slice(x.token(b, t));
        }
        Matrix3::from_vec(1, x.steps(), x.channels(), data).expect("shape by construction")
    };

    for i in 0..warmup {
        let one = instance(i);
        forward(model, &one)?;
    }
    let inputs: Vec<Matrix3> = (0..reps).map(instance).collect();
    let start = Instant::now();
    for one in &inputs {
        forward(model, one)?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(LatencyReport {
        mean_seconds_per_instance: elapsed / reps as f64,
        instances: reps,
        warmup,
    })
}

/// Everything the evaluation emits, serializable as JSON. The latency slot
/// stays `None` in deterministic report files; wall-clock measurements are
/// written separately.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub report: ClassReport,
    /// One-vs-rest AUC per class; `None` when the evaluation split lacks
    /// positives or negatives for that class.
    pub auc: Vec<Option<f64>>,
    pub confusion: Vec<Vec<u64>>,
    pub latency: Option<LatencyReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data");
        s.push('\n');
        s
    }

    /// Aligned plain-text table in the usual classification-report layout.
    pub fn to_text(&self) -> String {
        let name_width = self
            .class_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(5)
            .max("weighted avg".len());
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_width$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>7}\n",
            "class", "precision", "recall", "f1", "support", "auc"
        ));
        let r = &self.report;
        for (c, name) in self.class_names.iter().enumerate() {
            let auc = self.auc[c].map_or("n/a".to_string(), |a| format!("{a:.4}"));
            out.push_str(&format!(
                "{:<name_width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}  {:>7}\n",
                name, r.precision[c], r.recall[c], r.f1[c], r.support[c], auc
            ));
        }
        out.push('\n');
        let total: u64 = r.support.iter().sum();
        out.push_str(&format!(
            "{:<name_width$}  {:>9}  {:>9}  {:>9.4}  {:>9}\n",
            "accuracy", "", "", r.accuracy, total
        ));
        out.push_str(&format!(
            "{:<name_width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}\n",
            "macro avg", r.macro_precision, r.macro_recall, r.macro_f1, total
        ));
        out.push_str(&format!(
            "{:<name_width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}\n",
            "weighted avg", r.weighted_precision, r.weighted_recall, r.weighted_f1, total
        ));
        out.push_str(&format!("\nmacro one-vs-rest FPR: {:.6}\n", r.macro_fpr));
        out
    }

    pub fn write_files(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json())?;
        fs::write(dir.join("report.txt"), self.to_text())?;
        let cm_csv: String = {
            let mut s = String::new();
            for row in &self.confusion {
                let cells: Vec<String> = row.iter().map(u64::to_string).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        };
        fs::write(dir.join("confusion_matrix.csv"), cm_csv)?;
        Ok(())
    }
}
