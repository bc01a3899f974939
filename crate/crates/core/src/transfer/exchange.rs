//! Line-oriented exchange of database records between learning units.
//!
//! ```text
//! {"format_version":1,"code_size":16}
//! {"task_id":"P03","label":"normal","sensor":"pressure","timestamp":1700000000,"vector":[0.25,...]}
//! ```
//!
//! Every line, the last included, ends with `\n`. Floats use the shortest
//! representation that parses back to the same bits.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::db::{RepresentationDb, RepresentationRecord};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeHeader {
    pub format_version: u32,
    /// 0 for an empty database.
    pub code_size: usize,
}

/// Serialises the whole database. All tasks must share one code size.
pub fn export_string(db: &RepresentationDb) -> Result<String> {
    let mut sizes = db.tasks().map(|(_, t)| t.code_size);
    let code_size = sizes.next().unwrap_or(0);
    if let Some(other) = sizes.find(|&s| s != code_size) {
        return Err(Error::invalid(format!(
            "exchange files carry one code size; database mixes {code_size} and {other}"
        )));
    }
    let mut out = serde_json::to_string(&ExchangeHeader {
        format_version: FORMAT_VERSION,
        code_size,
    })?;
    out.push('\n');
    for r in db.records() {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn export_db(db: &RepresentationDb, path: &Path) -> Result<()> {
    let text = export_string(db)?;
    crate::error::ensure_parent(path)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::path(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::path(path, e))
}

/// Parses an exchange file; `origin` only labels error messages.
pub fn import_str(text: &str, origin: &Path) -> Result<RepresentationDb> {
    let err = |line: usize, msg: String| Error::parse(origin, line, msg);
    if text.is_empty() {
        return Err(err(1, "missing header line".into()));
    }
    let Some(body) = text.strip_suffix('\n') else {
        return Err(err(text.split('\n').count(), "truncated final line (no trailing newline)".into()));
    };
    let mut lines = body.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let (_, head) = lines.next().expect("split yields at least one item");
    let header: ExchangeHeader = serde_json::from_str(head).map_err(|e| err(1, format!("malformed header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(err(
            1,
            format!("format_version {} is not supported (expected {FORMAT_VERSION})", header.format_version),
        ));
    }
    let mut db = RepresentationDb::new();
    for (n, line) in lines {
        let record: RepresentationRecord = serde_json::from_str(line).map_err(|e| err(n, format!("malformed record: {e}")))?;
        if record.code_size() != header.code_size {
            return Err(err(
                n,
                format!("vector has {} values, header declares code_size {}", record.code_size(), header.code_size),
            ));
        }
        db.insert(record).map_err(|e| err(n, e.to_string()))?;
    }
    Ok(db)
}

pub fn import_db(path: &Path) -> Result<RepresentationDb> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::path(path, e))?;
    import_str(&text, path)
}
