use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EvalError, Metrics, RocCurve};

/// Files an evaluation directory may contain.
pub const REPORT_FILES: [&str; 5] = ["report.json", "metrics.csv", "roc.csv", "roc.svg", "confusion.svg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub metrics: Metrics,
    pub auc: Option<f64>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub metrics: Metrics,
    pub roc: Option<RocCurve>,
    pub folds: Vec<FoldSummary>,
    /// Arithmetic mean of the fold accuracies; absent without folds or when
    /// a fold accuracy is undefined.
    pub mean_fold_accuracy: Option<f64>,
    /// SHA-256 of the JSON configuration that produced the numbers.
    pub config_fingerprint: String,
}

impl EvalReport {
    pub fn new(name: impl Into<String>, metrics: Metrics, roc: Option<RocCurve>, folds: Vec<FoldSummary>, config_fingerprint: String) -> Self {
        let accs: Option<Vec<f64>> = folds.iter().map(|f| f.metrics.accuracy.value()).collect();
        let mean_fold_accuracy = accs.filter(|a| !a.is_empty()).map(|a| a.iter().sum::<f64>() / a.len() as f64);
        Self { name: name.into(), metrics, roc, folds, mean_fold_accuracy, config_fingerprint }
    }

    /// Hex SHA-256 of the serialized configuration.
    pub fn fingerprint<C: Serialize>(config: &C) -> String {
        let json = serde_json::to_vec(config).expect("configuration serializes");
        Sha256::digest(&json).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Every rate equals the one recomputed from its confusion counts.
    pub fn is_consistent(&self) -> bool {
        self.metrics == self.metrics.confusion.metrics() && self.folds.iter().all(|f| f.metrics == f.metrics.confusion.metrics())
    }
}

fn metric_rows(out: &mut String, scope: &str, m: &Metrics) {
    let c = m.confusion;
    for (name, v) in [("tp", c.tp), ("fp", c.fp), ("tn", c.tn), ("fn", c.fn_)] {
        let _ = writeln!(out, "{scope},{name},{v}");
    }
    for (name, v) in [("accuracy", m.accuracy), ("precision", m.precision), ("recall", m.recall), ("tpr", m.tpr), ("fpr", m.fpr)] {
        let _ = writeln!(out, "{scope},{name},{v}");
    }
}

fn metrics_csv(r: &EvalReport) -> String {
    let mut out = String::from("scope,metric,value\n");
    metric_rows(&mut out, "overall", &r.metrics);
    if let Some(roc) = &r.roc {
        let _ = writeln!(out, "overall,auc,{}", roc.auc);
    }
    for f in &r.folds {
        metric_rows(&mut out, &format!("fold_{}", f.fold), &f.metrics);
        if let Some(auc) = f.auc {
            let _ = writeln!(out, "fold_{},auc,{auc}", f.fold);
        }
    }
    if let Some(mean) = r.mean_fold_accuracy {
        let _ = writeln!(out, "folds,mean_accuracy,{mean}");
    }
    out
}

fn roc_csv(roc: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &roc.points {
        match p.threshold {
            Some(t) => {
                let _ = writeln!(out, "{t},{},{}", p.fpr, p.tpr);
            }
            None => {
                let _ = writeln!(out, "inf,{},{}", p.fpr, p.tpr);
            }
        }
    }
    out
}

const SIDE: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn roc_svg(name: &str, roc: &RocCurve) -> String {
    let plot = SIDE - 2.0 * MARGIN;
    let xy = |fpr: f64, tpr: f64| (MARGIN + fpr * plot, SIDE - MARGIN - tpr * plot);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIDE}" height="{SIDE}" viewBox="0 0 {SIDE} {SIDE}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot}" height="{plot}" fill="white" stroke="black"/>"#);
    let (x0, y0) = xy(0.0, 0.0);
    let (x1, y1) = xy(1.0, 1.0);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="gray" stroke-dasharray="4 4"/>"#);
    let pts: Vec<String> = roc
        .points
        .iter()
        .map(|p| {
            let (x, y) = xy(p.fpr, p.tpr);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, pts.join(" "));
    let _ = writeln!(s, r#"<text x="{}" y="{}">AUC = {:.3}</text>"#, MARGIN + plot * 0.55, SIDE - MARGIN - 12.0, roc.auc);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#, SIDE / 2.0, SIDE - 15.0);
    let _ = writeln!(s, r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">True positive rate</text>"#, SIDE / 2.0, SIDE / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle">{}</text>"#, SIDE / 2.0, xml_escape(name));
    s.push_str("</svg>\n");
    s
}

fn confusion_svg(name: &str, m: &Metrics) -> String {
    let c = m.confusion;
    // rows: actual whistle, actual noise; columns: predicted whistle, predicted noise
    let cells = [[c.tp, c.fn_], [c.fp, c.tn]];
    let max = cells.iter().flatten().copied().max().unwrap_or(0).max(1);
    let cell = (SIDE - 2.0 * MARGIN) / 2.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIDE}" height="{SIDE}" viewBox="0 0 {SIDE} {SIDE}" font-family="sans-serif" font-size="12">"#);
    for (r, row) in cells.iter().enumerate() {
        for (col, &count) in row.iter().enumerate() {
            let shade = 255 - (count * 200 / max) as u32;
            let (x, y) = (MARGIN + col as f64 * cell, MARGIN + r as f64 * cell);
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="black"/>"#);
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="20">{count}</text>"#, x + cell / 2.0, y + cell / 2.0 + 7.0);
        }
    }
    for (i, label) in ["whistle", "noise"].iter().enumerate() {
        let mid = MARGIN + (i as f64 + 0.5) * cell;
        let _ = writeln!(s, r#"<text x="{mid}" y="{}" text-anchor="middle">predicted {label}</text>"#, SIDE - MARGIN + 20.0);
        let _ = writeln!(s, r#"<text x="20" y="{mid}" text-anchor="middle" transform="rotate(-90 20 {mid})">actual {label}</text>"#);
    }
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle">{}</text>"#, SIDE / 2.0, xml_escape(name));
    s.push_str("</svg>\n");
    s
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn write(dir: &Path, file: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), EvalError> {
    let path = dir.join(file);
    fs::write(&path, contents).map_err(|source| EvalError::Write { path: path.display().to_string(), source })?;
    written.push(path);
    Ok(())
}

/// Writes the requested formats into `dir`. ROC files are skipped when the
/// report has no curve. Output bytes depend only on the report.
pub fn emit_report(report: &EvalReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(dir).map_err(|source| EvalError::Write { path: dir.display().to_string(), source })?;
    let mut written = Vec::new();
    if formats.contains(&ReportFormat::Json) {
        let mut json = serde_json::to_string_pretty(report).expect("report serializes");
        json.push('\n');
        write(dir, "report.json", &json, &mut written)?;
    }
    if formats.contains(&ReportFormat::Csv) {
        write(dir, "metrics.csv", &metrics_csv(report), &mut written)?;
        if let Some(roc) = &report.roc {
            write(dir, "roc.csv", &roc_csv(roc), &mut written)?;
        }
    }
    if formats.contains(&ReportFormat::Svg) {
        if let Some(roc) = &report.roc {
            write(dir, "roc.svg", &roc_svg(&report.name, roc), &mut written)?;
        }
        write(dir, "confusion.svg", &confusion_svg(&report.name, &report.metrics), &mut written)?;
    }
    Ok(written)
}
