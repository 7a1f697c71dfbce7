//! CSV and JSON emission with `# key: value` header comments, full
//! precision numbers and a SHA-256 of every CSV in its JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::{GridSpec, SurvivalMap};
use crate::melnikov::ThresholdCurve;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing header entry `{0}`")]
    MissingHeader(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Locale-independent, 17 significant digits: enough to round-trip any f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A numeric table with header comments and optional column names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn with_header(mut self, key: &str, value: impl ToString) -> Self {
        self.header.push((key.to_string(), value.to_string()));
        self
    }

    pub fn header_value(&self, key: &str) -> Result<&str, OutputError> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| OutputError::MissingHeader(key.to_string()))
    }

    fn header_number<T: std::str::FromStr>(&self, key: &str) -> Result<T, OutputError> {
        let raw = self.header_value(key)?;
        raw.trim().parse().map_err(|_| OutputError::Parse {
            line: 0,
            message: format!("header `{key}` is not a number: {raw}"),
        })
    }

    fn header_pair(&self, key: &str) -> Result<[f64; 2], OutputError> {
        let raw = self.header_value(key)?;
        let bad = || OutputError::Parse {
            line: 0,
            message: format!("header `{key}` is not a [lo, hi] pair: {raw}"),
        };
        let inner = raw
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(bad)?;
        let parts: Vec<f64> = inner
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        match parts[..] {
            [lo, hi] => Ok([lo, hi]),
            _ => Err(bad()),
        }
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k}: {v}");
        }
        if !self.columns.is_empty() {
            let _ = writeln!(out, "{}", self.columns.join(","));
        }
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// Parses text produced by [`CsvTable::render`]. A first non-comment
    /// line that does not parse as numbers is taken as column names.
    pub fn parse(text: &str) -> Result<Self, OutputError> {
        let mut table = Self::default();
        let mut width: Option<usize> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once(':') {
                    table.header.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            match parsed {
                Ok(row) => {
                    if let Some(w) = width {
                        if row.len() != w {
                            return Err(OutputError::Parse {
                                line: line_no,
                                message: format!("expected {w} fields, found {}", row.len()),
                            });
                        }
                    }
                    width = Some(row.len());
                    table.rows.push(row);
                }
                Err(_) if table.columns.is_empty() && table.rows.is_empty() => {
                    table.columns = line.split(',').map(|c| c.trim().to_string()).collect();
                    width = Some(table.columns.len());
                }
                Err(e) => {
                    return Err(OutputError::Parse {
                        line: line_no,
                        message: e.to_string(),
                    })
                }
            }
        }
        Ok(table)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| OutputError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| OutputError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the table and returns the SHA-256 of the written bytes.
pub fn emit_csv(path: &Path, table: &CsvTable) -> Result<String, OutputError> {
    let text = table.render();
    write_file(path, text.as_bytes())?;
    Ok(sha256_hex(text.as_bytes()))
}

pub fn emit_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`. The sidecar is `meta`
/// (which must serialize to a JSON object) plus the CSV file name and hash.
pub fn emit_artifact<T: Serialize + ?Sized>(
    dir: &Path,
    stem: &str,
    table: &CsvTable,
    meta: &T,
) -> Result<(PathBuf, PathBuf), OutputError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let hash = emit_csv(&csv_path, table)?;
    let mut value = serde_json::to_value(meta)?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("csv_file".into(), format!("{stem}.csv").into());
        map.insert("csv_sha256".into(), hash.into());
    }
    emit_json(&json_path, &value)?;
    Ok((csv_path, json_path))
}

pub fn read_csv(path: &Path) -> Result<CsvTable, OutputError> {
    let text = fs::read_to_string(path).map_err(|source| OutputError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    CsvTable::parse(&text)
}

fn pair(r: [f64; 2]) -> String {
    format!("[{}, {}]", format_f64(r[0]), format_f64(r[1]))
}

/// One row per velocity sample, one column per position sample.
pub fn survival_map_table(map: &SurvivalMap) -> CsvTable {
    CsvTable {
        header: vec![
            ("rows".into(), "v (units of L0*omega0), ascending".into()),
            ("columns".into(), "x (units of L0), ascending".into()),
            ("x_range".into(), pair(map.grid.x_range)),
            ("v_range".into(), pair(map.grid.v_range)),
            ("nx".into(), map.grid.nx.to_string()),
            ("nv".into(), map.grid.nv.to_string()),
            ("max_periods".into(), format_f64(map.max_periods)),
            ("failed_cells".into(), map.warnings.to_string()),
        ],
        columns: Vec::new(),
        rows: map.rows().map(|r| r.to_vec()).collect(),
    }
}

pub fn survival_map_from_table(table: &CsvTable) -> Result<SurvivalMap, OutputError> {
    let grid = GridSpec {
        x_range: table.header_pair("x_range")?,
        v_range: table.header_pair("v_range")?,
        nx: table.header_number("nx")?,
        nv: table.header_number("nv")?,
    };
    if table.rows.len() != grid.nv || table.rows.iter().any(|r| r.len() != grid.nx) {
        return Err(OutputError::Parse {
            line: 0,
            message: format!("matrix is not {} x {}", grid.nv, grid.nx),
        });
    }
    Ok(SurvivalMap {
        grid,
        max_periods: table.header_number("max_periods")?,
        values: table.rows.concat(),
        warnings: table.header_number("failed_cells")?,
    })
}

pub fn threshold_table(curve: &ThresholdCurve) -> CsvTable {
    let mut t = CsvTable::new(&["omega_over_omega0", "alpha_threshold"]);
    t.rows = curve
        .omegas
        .iter()
        .zip(&curve.alpha_threshold)
        .map(|(w, a)| vec![*w, *a])
        .collect();
    t
}

pub fn threshold_from_table(table: &CsvTable) -> ThresholdCurve {
    ThresholdCurve {
        omegas: table.column(0),
        alpha_threshold: table.column(1),
    }
}
