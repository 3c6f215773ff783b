use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::MetricReport;

/// Scores of one model on one test set, before and after calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub test_set: String,
    pub model: String,
    pub with_asr: bool,
    pub uncalibrated: MetricReport,
    pub calibrated: MetricReport,
}

fn cell(uncal: f64, cal: f64) -> String {
    let star = if uncal > cal { "*" } else { "" };
    format!("{uncal:.2} [{cal:.2}]{star}")
}

fn find<'a>(rows: &'a [ResultRow], test_set: &str, model: &str, with_asr: bool) -> Option<&'a ResultRow> {
    rows.iter()
        .find(|r| r.test_set == test_set && r.model == model && r.with_asr == with_asr)
}

fn ordered_unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// One row per (test set, model); each metric gets a column for training
/// without and with ASR data. Cells read `uncalibrated [calibrated]`, starred
/// when the uncalibrated value is higher.
pub fn render_metric_table(title: &str, rows: &[ResultRow]) -> String {
    type Getter = fn(&MetricReport) -> f64;
    let metrics: [(&str, Getter); 4] = [
        ("Acc", |m| m.accuracy),
        ("F1", |m| m.macro_f1),
        ("AUROC", |m| m.auroc),
        ("AUPRC", |m| m.auprc),
    ];
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let mut header = vec!["Test".to_string(), "Model".to_string()];
    for (name, _) in &metrics {
        header.push(format!("{name} w/o ASR"));
        header.push(format!("{name} w/ ASR"));
    }
    let mut table = vec![header];
    for test_set in ordered_unique(rows.iter().map(|r| r.test_set.as_str())) {
        for model in ordered_unique(rows.iter().filter(|r| r.test_set == test_set).map(|r| r.model.as_str())) {
            let mut line = vec![test_set.to_string(), model.to_string()];
            for (_, get) in &metrics {
                for with_asr in [false, true] {
                    line.push(match find(rows, test_set, model, with_asr) {
                        Some(r) => cell(get(&r.uncalibrated), get(&r.calibrated)),
                        None => "-".into(),
                    });
                }
            }
            table.push(line);
        }
    }
    out.push_str(&align_columns(&table));
    out
}

/// Per-class F1: one row per (class, test set, training data), one column per model.
pub fn render_per_class_table(title: &str, class_names: &[&str], rows: &[ResultRow]) -> String {
    let models = ordered_unique(rows.iter().map(|r| r.model.as_str()));
    let tests = ordered_unique(rows.iter().map(|r| r.test_set.as_str()));
    let mut header = vec!["Class".to_string(), "Test".to_string(), "Training".to_string()];
    header.extend(models.iter().map(|m| m.to_string()));
    let mut table = vec![header];
    for (c, name) in class_names.iter().enumerate() {
        for test_set in &tests {
            for with_asr in [false, true] {
                if !models.iter().any(|m| find(rows, test_set, m, with_asr).is_some()) {
                    continue;
                }
                let mut line = vec![
                    name.to_string(),
                    test_set.to_string(),
                    if with_asr { "w/ ASR" } else { "w/o ASR" }.to_string(),
                ];
                for m in &models {
                    line.push(match find(rows, test_set, m, with_asr) {
                        Some(r) => format!("{:.2} [{:.2}]", r.uncalibrated.per_class_f1[c], r.calibrated.per_class_f1[c]),
                        None => "-".into(),
                    });
                }
                table.push(line);
            }
        }
    }
    format!("{title}\n{}", align_columns(&table))
}

fn align_columns(table: &[Vec<String>]) -> String {
    let n_cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..n_cols)
        .map(|c| table.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = widths[c])).collect();
        let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("-+-"));
        }
    }
    out
}
