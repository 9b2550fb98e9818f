//! Metrics CSV, aggregate table and paired comparisons between models.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SsfError};
use crate::stats::{paired_t_test, PairedTTest};

pub const METRICS_HEADER: &str = "model,window_s,subject,accuracy";
pub const PAIRED_HEADER: &str = "window_s,model_a,model_b,n,mean_diff,t,df,p";

/// Accuracy of one model for one subject at one window size.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub model: String,
    pub window_s: f64,
    pub subject: String,
    pub accuracy: f64,
}

/// Window sizes print as the shortest decimal that round-trips (`0.1`, `1`, `10`).
pub fn fmt_window(w: f64) -> String {
    format!("{w}")
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6}",
            r.model,
            fmt_window(r.window_s),
            r.subject,
            r.accuracy
        );
    }
    out
}

pub fn parse_metrics_csv(path: &Path, text: &str) -> Result<Vec<MetricRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_HEADER => {}
        _ => {
            return Err(SsfError::format(
                path,
                format!("expected header `{METRICS_HEADER}`"),
            ))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| SsfError::format(path, format!("line {}: {m}", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let window_s = f[1].parse().map_err(|_| bad("window_s is not a number"))?;
        let accuracy = f[3].parse().map_err(|_| bad("accuracy is not a number"))?;
        rows.push(MetricRow {
            model: f[0].to_owned(),
            window_s,
            subject: f[2].to_owned(),
            accuracy,
        });
    }
    Ok(rows)
}

/// Models in order of first appearance, window sizes ascending.
fn axes(rows: &[MetricRow]) -> (Vec<String>, Vec<f64>) {
    let mut models: Vec<String> = Vec::new();
    let mut windows: Vec<f64> = Vec::new();
    for r in rows {
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
        if !windows.contains(&r.window_s) {
            windows.push(r.window_s);
        }
    }
    windows.sort_by(f64::total_cmp);
    (models, windows)
}

/// Per-subject accuracies of one (model, window) cell keyed by subject.
fn cell<'a>(rows: &'a [MetricRow], model: &str, w: f64) -> BTreeMap<&'a str, f64> {
    rows.iter()
        .filter(|r| r.model == model && r.window_s == w)
        .map(|r| (r.subject.as_str(), r.accuracy))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation across subjects.
    pub sd: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(Summary {
        mean,
        sd: var.sqrt(),
        n: values.len(),
    })
}

pub fn summary_of(rows: &[MetricRow], model: &str, w: f64) -> Option<Summary> {
    summarize(&cell(rows, model, w).into_values().collect::<Vec<_>>())
}

/// Markdown table: one row per model, one column per window size, cells
/// `mean (SD)` in percent across subjects.
pub fn aggregate_markdown(rows: &[MetricRow]) -> String {
    let (models, windows) = axes(rows);
    let mut out = String::from("# Detection accuracy\n\nMean over subjects in %, population SD in parentheses.\n\n| Model |");
    for w in &windows {
        let _ = write!(out, " {} s |", fmt_window(*w));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(windows.len()));
    out.push('\n');
    for m in &models {
        let _ = write!(out, "| {m} |");
        for &w in &windows {
            match summary_of(rows, m, w) {
                Some(s) => {
                    let _ = write!(out, " {:.1} ({:.2}) |", 100.0 * s.mean, 100.0 * s.sd);
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedRow {
    pub window_s: f64,
    pub model_a: String,
    pub model_b: String,
    pub test: PairedTTest,
}

/// Paired t-tests for every model pair at every window size, over the
/// subjects both models report. Cells with fewer than two shared subjects are
/// skipped.
pub fn paired_tests(rows: &[MetricRow]) -> Result<Vec<PairedRow>> {
    let (models, windows) = axes(rows);
    let mut out = Vec::new();
    for &w in &windows {
        for (i, a) in models.iter().enumerate() {
            for b in &models[i + 1..] {
                let ca = cell(rows, a, w);
                let cb = cell(rows, b, w);
                let (xa, xb): (Vec<f64>, Vec<f64>) = ca
                    .iter()
                    .filter_map(|(s, va)| cb.get(s).map(|vb| (*va, *vb)))
                    .unzip();
                if xa.len() < 2 {
                    continue;
                }
                out.push(PairedRow {
                    window_s: w,
                    model_a: a.clone(),
                    model_b: b.clone(),
                    test: paired_t_test(&xa, &xb)?,
                });
            }
        }
    }
    Ok(out)
}

pub fn paired_tests_csv(rows: &[PairedRow]) -> String {
    let mut out = String::from(PAIRED_HEADER);
    out.push('\n');
    for r in rows {
        let t = &r.test;
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{},{:.6}",
            fmt_window(r.window_s),
            r.model_a,
            r.model_b,
            t.n,
            t.mean_diff,
            t.t,
            t.df,
            t.p
        );
    }
    out
}
