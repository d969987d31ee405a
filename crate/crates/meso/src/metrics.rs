//! Evaluation mathematics: confusion matrix, precision/recall/F1 report
//! with macro and weighted averages, ROC curve and AUC.

use serde::Serialize;

use crate::error::{Error, Result};

/// C×C count matrix; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    /// Count (true, predicted) pairs. Labels must lie in
    /// `[0, class_names.len())`.
    pub fn from_labels(
        truths: &[usize],
        predictions: &[usize],
        class_names: &[String],
    ) -> Result<Self> {
        if truths.len() != predictions.len() {
            return Err(Error::Data(format!(
                "label lists differ in length: {} vs {}",
                truths.len(),
                predictions.len()
            )));
        }
        let c = class_names.len();
        let mut counts = vec![vec![0u64; c]; c];
        for (&t, &p) in truths.iter().zip(predictions) {
            if t >= c || p >= c {
                return Err(Error::Data(format!(
                    "label out of range: ({t}, {p}) with {c} classes"
                )));
            }
            counts[t][p] += 1;
        }
        Ok(Self {
            counts,
            class_names: class_names.to_vec(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, r: usize) -> u64 {
        self.counts[r].iter().sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    /// Aligned plain-text rendering with class names on both axes.
    pub fn to_text(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(|n| n.len())
            .chain(self.counts.iter().flatten().map(|v| v.to_string().len()))
            .max()
            .unwrap_or(4)
            .max(4);
        let mut out = String::new();
        out.push_str(&format!("{:>w$} ", "", w = width + 7));
        for name in &self.class_names {
            out.push_str(&format!("{name:>w$} ", w = width));
        }
        out.push('\n');
        for (r, row) in self.counts.iter().enumerate() {
            out.push_str(&format!("true {:>w$}  ", self.class_names[r], w = width));
            for v in row {
                out.push_str(&format!("{v:>w$} ", w = width));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-class metrics row of a [`ClassificationReport`].
#[derive(Debug, Clone, Serialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when a zero denominator forced precision or recall to 0.
    pub degenerate: bool,
}

/// Averages row (macro or weighted).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The paper-style classification report.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total_support: u64,
}

/// Derive the report from a confusion matrix.
///
/// precision_c = diag/colsum, recall_c = diag/rowsum, f1 the harmonic mean;
/// zero denominators yield 0 and set the degenerate flag. Weighted-average
/// recall is evaluated as trace/total — algebraically identical to
/// Σ support·recall / total, and exact in floating point.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("classification report of an empty matrix".into()));
    }
    let c = cm.num_classes();
    let mut classes = Vec::with_capacity(c);
    for i in 0..c {
        let diag = cm.counts[i][i] as f64;
        let col = cm.col_sum(i);
        let row = cm.row_sum(i);
        let degenerate = col == 0 || row == 0;
        let precision = if col == 0 { 0.0 } else { diag / col as f64 };
        let recall = if row == 0 { 0.0 } else { diag / row as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        classes.push(ClassMetrics {
            name: cm.class_names[i].clone(),
            precision,
            recall,
            f1,
            support: row,
            degenerate,
        });
    }

    let cf = c as f64;
    let macro_avg = Averages {
        precision: classes.iter().map(|m| m.precision).sum::<f64>() / cf,
        recall: classes.iter().map(|m| m.recall).sum::<f64>() / cf,
        f1: classes.iter().map(|m| m.f1).sum::<f64>() / cf,
    };
    let totalf = total as f64;
    let weighted_avg = Averages {
        precision: classes
            .iter()
            .map(|m| m.support as f64 * m.precision)
            .sum::<f64>()
            / totalf,
        recall: cm.trace() as f64 / totalf,
        f1: classes.iter().map(|m| m.support as f64 * m.f1).sum::<f64>() / totalf,
    };

    Ok(ClassificationReport {
        classes,
        accuracy: cm.trace() as f64 / totalf,
        macro_avg,
        weighted_avg,
        total_support: total,
    })
}

impl ClassificationReport {
    /// Aligned text layout mirroring the paper's tables: one row per class
    /// with Precision/Recall/F1/Support columns, then Accuracy, Macro
    /// average and Weighted average rows.
    pub fn to_text(&self) -> String {
        let name_w = self
            .classes
            .iter()
            .map(|m| m.name.len())
            .max()
            .unwrap_or(5)
            .max("Weighted average".len());
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_w$}  {:>9}  {:>9}  {:>9}  {:>8}\n",
            "Class", "Precision", "Recall", "F1 Score", "Support"
        ));
        for m in &self.classes {
            out.push_str(&format!(
                "{:<name_w$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>8}{}\n",
                m.name,
                m.precision,
                m.recall,
                m.f1,
                m.support,
                if m.degenerate { "  (zero denominator)" } else { "" },
            ));
        }
        out.push_str(&format!(
            "{:<name_w$}  {:>9}  {:>9}  {:>9.2}  {:>8}\n",
            "Accuracy", "", "", self.accuracy, self.total_support
        ));
        out.push_str(&format!(
            "{:<name_w$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>8}\n",
            "Macro average",
            self.macro_avg.precision,
            self.macro_avg.recall,
            self.macro_avg.f1,
            self.total_support
        ));
        out.push_str(&format!(
            "{:<name_w$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>8}\n",
            "Weighted average",
            self.weighted_avg.precision,
            self.weighted_avg.recall,
            self.weighted_avg.f1,
            self.total_support
        ));
        out
    }
}

/// One ROC operating point. The first point's threshold is +∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve from (0,0) to (1,1), one point per distinct score threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// Sweep thresholds over the scores (higher score = more likely positive).
/// Tied scores move as one group, so the curve is invariant under any
/// strictly increasing transform of the scores.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!(
            "scores and labels differ in length: {} vs {}",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedCurve(
            "ROC needs at least one positive and one negative label".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("ROC scores contain NaN".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        // consume the whole tied group at this score
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(RocCurve { points })
}

impl RocCurve {
    /// Trapezoidal area under the curve over fpr.
    pub fn auc(&self) -> f64 {
        let mut area = 0.0;
        for pair in self.points.windows(2) {
            let [a, b] = [pair[0], pair[1]];
            area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
        }
        area
    }

    /// `threshold,fpr,tpr` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        out
    }

    /// Minimal self-contained SVG plot: unit axes, dashed chance diagonal,
    /// and the curve polyline.
    pub fn to_svg(&self, title: &str) -> String {
        let (size, margin) = (480.0, 50.0);
        let span = size - 2.0 * margin;
        let x = |fpr: f64| margin + fpr * span;
        let y = |tpr: f64| size - margin - tpr * span;
        let pts: Vec<String> = self
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.fpr), y(p.tpr)))
            .collect();
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
        ));
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&format!(
            "<rect x=\"{margin}\" y=\"{margin}\" width=\"{span}\" height=\"{span}\" fill=\"none\" stroke=\"#444\"/>\n"
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999\" stroke-dasharray=\"6,4\"/>\n",
            x(0.0), y(0.0), x(1.0), y(1.0)
        ));
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1565c0\" stroke-width=\"2\"/>\n",
            pts.join(" ")
        ));
        for (v, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{label}</text>\n",
                x(v), size - margin + 18.0
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{label}</text>\n",
                margin - 8.0, y(v) + 4.0
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">FPR</text>\n",
            size / 2.0, size - 12.0
        ));
        svg.push_str(&format!(
            "<text x=\"14\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">TPR</text>\n",
            size / 2.0, size / 2.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
            size / 2.0, margin - 16.0
        ));
        svg.push_str("</svg>\n");
        svg
    }
}
