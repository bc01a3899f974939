//! Plain-text tables and metrics files.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::autoencoders::Architecture;
use crate::pipeline::Metrics;
use crate::sim::{Label, SubsetKind};
use crate::{Error, Result};

/// Left-aligned columns separated by two spaces.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

pub fn acc(v: f64) -> String {
    format!("{v:.4}")
}

/// Test losses by architecture and code size.
pub fn loss_table(cells: &[(Architecture, usize, f64)]) -> String {
    let rows: Vec<Vec<String>> = cells
        .iter()
        .enumerate()
        .map(|(i, (a, c, l))| {
            let first = i == 0 || cells[i - 1].0 != *a;
            vec![if first { a.name().to_uppercase() } else { String::new() }, c.to_string(), sci(*l)]
        })
        .collect();
    render_table(&["Architecture", "Code size", "Test loss"], &rows)
}

/// Modular accuracies: one row per code size and subset, one column per
/// extractor architecture. Missing cells print as `-`.
pub fn accuracy_table(archs: &[Architecture], cells: &[(Architecture, usize, SubsetKind, f64)]) -> String {
    let mut codes: Vec<usize> = cells.iter().map(|c| c.1).collect();
    codes.dedup();
    let mut header = vec!["Vector length", "Training data"];
    let names: Vec<String> = archs.iter().map(|a| a.name().to_uppercase()).collect();
    header.extend(names.iter().map(String::as_str));
    let mut rows = vec![];
    for &code in &codes {
        for (k, subset) in SubsetKind::ALL.into_iter().enumerate() {
            if !cells.iter().any(|c| c.1 == code && c.2 == subset) {
                continue;
            }
            let mut row = vec![if k == 0 { code.to_string() } else { String::new() }, subset.table_name().to_string()];
            for &a in archs {
                let v = cells.iter().find(|c| c.0 == a && c.1 == code && c.2 == subset);
                row.push(v.map_or("-".into(), |c| acc(c.3)));
            }
            rows.push(row);
        }
    }
    render_table(&header, &rows)
}

pub fn baseline_table(cells: &[(usize, SubsetKind, f64)]) -> String {
    let rows: Vec<Vec<String>> = cells
        .iter()
        .enumerate()
        .map(|(i, (l, s, a))| {
            let first = i == 0 || cells[i - 1].0 != *l;
            vec![if first { l.to_string() } else { String::new() }, s.table_name().into(), acc(*a)]
        })
        .collect();
    render_table(&["Layers", "Training data", "Accuracy"], &rows)
}

/// Confusion matrix with truth in rows, followed by the accuracy.
pub fn confusion_table(m: &Metrics) -> String {
    let rows: Vec<Vec<String>> = Label::CLASSES
        .iter()
        .zip(&m.confusion)
        .map(|(l, r)| std::iter::once(l.name().to_string()).chain(r.iter().map(usize::to_string)).collect())
        .collect();
    let mut out = render_table(&["truth \\ predicted", "normal", "anomalous", "defect"], &rows);
    out += &format!("accuracy {} over {} samples\n", acc(m.accuracy), m.total);
    out
}

/// Writes `<dir>/<name>.json` (deterministic) and `<dir>/<name>.timing.json`
/// (wall clock, varies between runs). Returns the metrics path.
pub fn write_metrics<T: Serialize>(dir: &Path, name: &str, metrics: &T, elapsed: Duration) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::path(dir, e))?;
    let path = dir.join(format!("{name}.json"));
    write_json(&path, metrics)?;
    write_json(
        &dir.join(format!("{name}.timing.json")),
        &serde_json::json!({ "wall_clock_secs": elapsed.as_secs_f64() }),
    )?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::path(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::path(path, e))
}
