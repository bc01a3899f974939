//! CSV ingestion and export: `event_id,product_id,timestamp,label,v0..v{L-1}`,
//! one averaged event per row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Label, LabeledSample};
use crate::{Error, Result};

const FIXED_COLUMNS: [&str; 4] = ["event_id", "product_id", "timestamp", "label"];

pub fn header(length: usize) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..length).map(|i| format!("v{i}")))
        .collect()
}

/// Writes samples with shortest round-trip float formatting, so reading the
/// file back reproduces every value exactly.
pub fn write_csv(path: &Path, samples: &[LabeledSample]) -> Result<()> {
    let length = samples.first().map_or(0, |s| s.series.len());
    if samples.iter().any(|s| s.series.len() != length) {
        return Err(Error::shape("all samples in one CSV must share a series length"));
    }
    crate::error::ensure_parent(path)?;
    let file = File::create(path).map_err(|e| Error::path(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", header(length).join(","))?;
    let mut line = String::new();
    for s in samples {
        if s.product_id.contains([',', '"', '\n', '\r']) {
            return Err(Error::invalid(format!("product id {:?} cannot be written to CSV", s.product_id)));
        }
        line.clear();
        use std::fmt::Write as _;
        let _ = write!(line, "{},{},{},{}", s.event_id, s.product_id, s.timestamp, s.label);
        for v in &s.series {
            let _ = write!(line, ",{v}");
        }
        writeln!(w, "{line}")?;
    }
    w.flush().map_err(|e| Error::path(path, e))
}

pub fn load_csv(path: &Path) -> Result<Vec<LabeledSample>> {
    let file = File::open(path).map_err(|e| Error::path(path, e))?;
    read_csv(file, path)
}

/// Parses CSV from any reader; `path` only labels diagnostics.
pub fn read_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<LabeledSample>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let head = rdr.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?.clone();
    if head.is_empty() || (head.len() == 1 && head[0].is_empty()) {
        return Ok(vec![]);
    }
    if head.len() < FIXED_COLUMNS.len() + 1 || FIXED_COLUMNS.iter().zip(head.iter()).any(|(a, b)| *a != b) {
        return Err(Error::parse(path, 1, format!("header must start with {} and have values v0..", FIXED_COLUMNS.join(","))));
    }
    let length = head.len() - FIXED_COLUMNS.len();
    for (i, name) in head.iter().skip(FIXED_COLUMNS.len()).enumerate() {
        if name != format!("v{i}") {
            return Err(Error::parse(path, 1, format!("column {} should be v{i}, found {name:?}", i + 4)));
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |msg: String| Error::parse(path, line, msg);
        if rec.len() != head.len() {
            return Err(err(format!("expected {} values, found {}", length, rec.len().saturating_sub(4))));
        }
        let event_id = rec[0].parse().map_err(|_| err(format!("bad event_id {:?}", &rec[0])))?;
        let timestamp = rec[2].parse().map_err(|_| err(format!("bad timestamp {:?}", &rec[2])))?;
        let label: Label = rec[3].parse().map_err(|e: Error| err(e.to_string()))?;
        let series = rec
            .iter()
            .skip(4)
            .enumerate()
            .map(|(i, v)| match v.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(err(format!("v{i}: not a finite number: {v:?}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(LabeledSample {
            event_id,
            product_id: rec[1].to_string(),
            timestamp,
            label,
            series,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<LabeledSample>> {
        read_csv(text.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse("event_id,product_id,timestamp,label,v0,v1\n").unwrap().is_empty());
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn full_row() {
        let vals: Vec<String> = (0..300).map(|i| format!("{}", i as f64 / 3.0)).collect();
        let text = format!("{}\n7,P01,1600,normal,{}\n", header(300).join(","), vals.join(","));
        let s = parse(&text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label, Label::Normal);
        assert_eq!(s[0].series.len(), 300);
        assert_eq!(s[0].series[299], 299.0 / 3.0);
    }

    #[test]
    fn wrong_count_names_line() {
        let text = "event_id,product_id,timestamp,label,v0,v1\n1,P,0,normal,1,2\n2,P,0,unknown,1\n";
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_label_and_value() {
        assert!(matches!(parse("event_id,product_id,timestamp,label,v0\n1,P,0,weird,1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("event_id,product_id,timestamp,label,v0\n1,P,0,normal,x\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn unknown_label_accepted() {
        let s = parse("event_id,product_id,timestamp,label,v0\n1,P,0,unknown,0.5\n").unwrap();
        assert_eq!(s[0].label, Label::Unknown);
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let samples = vec![
            LabeledSample { event_id: 1, product_id: "P00".into(), timestamp: -5, label: Label::Defect, series: vec![0.1 + 0.2, 1e-300, -3.5] },
            LabeledSample { event_id: 2, product_id: "P01".into(), timestamp: 9, label: Label::Anomalous, series: vec![1.0 / 3.0, 0.0, 7.0] },
        ];
        write_csv(&path, &samples).unwrap();
        assert_eq!(load_csv(&path).unwrap(), samples);
        assert!(matches!(load_csv(&dir.path().join("missing.csv")), Err(Error::Path { .. })));
    }
}
