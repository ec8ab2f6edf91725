//! Deterministic text artifacts: CSV tables, JSON summaries, and the run
//! manifest.
//!
//! Every float is serialized as `{:.16e}` (17 significant digits), which
//! round-trips f64 exactly and is locale-independent. JSON objects are
//! backed by sorted maps and CSV rows are emitted in computation order, so
//! identical inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Canonical float rendering used across all artifacts.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number that refuses NaN/infinity instead of silently turning null.
pub fn json_num(x: f64) -> Result<Value> {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| Error::InvalidParameter(format!("non-finite value {x} in JSON output")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("write to String");
    }
    out
}

/// In-memory CSV with fixed arity. Cells must not contain separators; the
/// writer has no quoting on purpose (schemas are all numeric plus plain
/// identifiers).
#[derive(Clone, Debug)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: Vec<S>) -> Csv {
        Csv { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push_row(&mut self, cells: Vec<String>) -> Result<()> {
        if cells.len() != self.header.len() {
            return Err(Error::InvalidParameter(format!(
                "CSV row has {} cells, header has {}",
                cells.len(),
                self.header.len()
            )));
        }
        for cell in &cells {
            if cell.contains(',') || cell.contains('\n') || cell.contains('\r') {
                return Err(Error::InvalidParameter(format!(
                    "CSV cell {cell:?} contains a separator"
                )));
            }
        }
        self.rows.push(cells);
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Parsed CSV for stages that consume earlier artifacts.
#[derive(Clone, Debug)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            Error::MissingArtifact(format!("CSV column '{name}' not found in {:?}", self.header))
        })
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column(name)?;
        self.rows
            .iter()
            .map(|row| {
                row[idx].parse::<f64>().map_err(|_| {
                    Error::MissingArtifact(format!("bad float {:?} in column '{name}'", row[idx]))
                })
            })
            .collect()
    }

    pub fn usize_column(&self, name: &str) -> Result<Vec<usize>> {
        let idx = self.column(name)?;
        self.rows
            .iter()
            .map(|row| {
                row[idx].parse::<usize>().map_err(|_| {
                    Error::MissingArtifact(format!("bad integer {:?} in column '{name}'", row[idx]))
                })
            })
            .collect()
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::MissingArtifact(format!("cannot read {}: {e}", path.display()))
    })?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::MissingArtifact(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        if cells.len() != header.len() {
            return Err(Error::MissingArtifact(format!(
                "ragged row in {}: {} cells vs {} columns",
                path.display(),
                cells.len(),
                header.len()
            )));
        }
        rows.push(cells);
    }
    Ok(CsvTable { header, rows })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}

pub fn write_csv(path: &Path, csv: &Csv) -> Result<()> {
    write_text(path, &csv.render())
}

/// Serializer whose floats use the canonical `{:.16e}` rendering.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn render_json(value: &Value) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    serde::Serialize::serialize(value, &mut ser)
        .map_err(|e| Error::InvalidParameter(format!("JSON serialization failed: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf)
        .map_err(|e| Error::InvalidParameter(format!("JSON serialization produced non-UTF8: {e}")))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_text(path, &render_json(value)?)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::MissingArtifact(format!("cannot read {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Error::MissingArtifact(format!("cannot parse {}: {e}", path.display()))
    })
}

/// Provenance record for a run: hash of the raw config, the applied
/// overrides, every seed in play, and the package version. Deliberately no
/// timestamps or host data so reruns stay byte-identical.
pub fn manifest_value(
    config_bytes: &[u8],
    overrides: &[String],
    seeds: &BTreeMap<String, u64>,
    version: &str,
) -> Value {
    let mut seed_map = serde_json::Map::new();
    for (name, seed) in seeds {
        seed_map.insert(name.clone(), Value::from(*seed));
    }
    let mut map = serde_json::Map::new();
    map.insert("config_sha256".into(), Value::from(sha256_hex(config_bytes)));
    map.insert(
        "overrides".into(),
        Value::Array(overrides.iter().map(|s| Value::from(s.as_str())).collect()),
    );
    map.insert("seeds".into(), Value::Object(seed_map));
    map.insert("tool".into(), Value::from("speclab"));
    map.insert("version".into(), Value::from(version));
    Value::Object(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_exactly() {
        for &x in &[
            5.783185962946785,
            std::f64::consts::PI * 1e-9,
            -1.0 / 3.0,
            2000.0,
            4.9e-324,
        ] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn csv_rejects_ragged_rows_and_separators() {
        let mut csv = Csv::new(vec!["a", "b"]);
        assert!(csv.push_row(vec!["1".into()]).is_err());
        assert!(csv.push_row(vec!["1".into(), "x,y".into()]).is_err());
        csv.push_row(vec!["1".into(), "2".into()]).unwrap();
        assert_eq!(csv.render(), "a,b\n1,2\n");
    }

    #[test]
    fn csv_round_trips_through_the_reader() {
        let dir = std::env::temp_dir().join("speclab-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        let mut csv = Csv::new(vec!["k", "lambda"]);
        csv.push_row(vec!["1".into(), fmt_float(5.783185962946785)]).unwrap();
        csv.push_row(vec!["2".into(), fmt_float(14.681970642123893)]).unwrap();
        write_csv(&path, &csv).unwrap();
        let table = read_csv(&path).unwrap();
        assert_eq!(table.usize_column("k").unwrap(), vec![1, 2]);
        assert_eq!(table.f64_column("lambda").unwrap()[0], 5.783185962946785);
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn json_floats_use_the_canonical_rendering() {
        let v = serde_json::json!({
            "slope": -1.0000000000000002,
            "n": 20,
        });
        let text = render_json(&v).unwrap();
        assert_eq!(text, "{\"n\":20,\"slope\":-1.0000000000000002e0}\n");
    }

    #[test]
    fn json_num_refuses_non_finite() {
        assert!(json_num(f64::NAN).is_err());
        assert!(json_num(f64::INFINITY).is_err());
        assert!(json_num(0.5).is_ok());
    }

    #[test]
    fn manifest_is_deterministic_and_time_free() {
        let mut seeds = BTreeMap::new();
        seeds.insert("solver".to_string(), 7u64);
        let a = manifest_value(b"config", &["a.b=1".into()], &seeds, "0.1.0");
        let b = manifest_value(b"config", &["a.b=1".into()], &seeds, "0.1.0");
        assert_eq!(render_json(&a).unwrap(), render_json(&b).unwrap());
        let text = render_json(&a).unwrap();
        assert!(text.contains("config_sha256"));
        assert!(!text.to_lowercase().contains("time"));
    }
}
