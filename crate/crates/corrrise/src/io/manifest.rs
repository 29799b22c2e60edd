//! Pair-manifest ingestion: a CSV with header `path_a,path_b,label`, labels
//! restricted to `match`/`nonmatch`, relative paths resolved against the
//! manifest's own directory.

use crate::error::{Error, Result};
use std::collections::HashSet;
use std::path::{Path, PathBuf};

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub path_a: PathBuf,
    pub path_b: PathBuf,
    pub matching: bool,
    /// 1-based line number in the source file, for error reporting.
    pub line: u64,
}

/// An ordered, validated list of pairs.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub records: Vec<PairRecord>,
    pub base_dir: PathBuf,
}

impl Manifest {
    /// Absolute (or cwd-relative) path of one side of a record.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let data_err = |msg: String| Error::Data(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| data_err(e.to_string()))?;

    let headers = reader.headers().map_err(|e| data_err(e.to_string()))?.clone();
    let expected = ["path_a", "path_b", "label"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(data_err(format!(
            "header must be `path_a,path_b,label`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut records = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| data_err(e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 3 {
            return Err(data_err(format!("line {line}: expected 3 fields, got {}", row.len())));
        }
        let (a, b, label) = (&row[0], &row[1], &row[2]);
        if a.is_empty() || b.is_empty() {
            return Err(data_err(format!("line {line}: empty image path")));
        }
        let matching = match label {
            "match" => true,
            "nonmatch" => false,
            other => {
                return Err(data_err(format!(
                    "line {line}: label must be `match` or `nonmatch`, got `{other}`"
                )))
            }
        };
        if !seen.insert((a.to_string(), b.to_string())) {
            return Err(data_err(format!("line {line}: duplicate pair ({a}, {b})")));
        }
        records.push(PairRecord {
            path_a: PathBuf::from(a),
            path_b: PathBuf::from(b),
            matching,
            line,
        });
    }

    let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    Ok(Manifest { records, base_dir })
}
