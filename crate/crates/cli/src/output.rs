use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

/// One table cell. Non-finite numbers render as an empty CSV field or JSON
/// `null` and are listed in the document's `errors`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => format!("{x:e}"),
            Cell::Num(_) | Cell::Empty => String::new(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) | Cell::Empty => Value::Null,
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<u32> for Cell {
    fn from(i: u32) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Result of one command: a table plus the parameters that produced it.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub params: Vec<(&'static str, Cell)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub seed: Option<u64>,
}

impl Report {
    pub fn new(command: &'static str, columns: &[&'static str]) -> Self {
        Self {
            command,
            params: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            seed: None,
        }
    }

    pub fn param(&mut self, name: &'static str, value: impl Into<Cell>) {
        self.params.push((name, value.into()));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn non_finite(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for (col, cell) in self.columns.iter().zip(row) {
                if let Cell::Num(x) = cell {
                    if !x.is_finite() {
                        errs.push(format!("row {i}, column {col}: {x}"));
                    }
                }
            }
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// CSV with the data columns first, then provenance columns (parameters,
/// command, seed, version) repeated on every row.
pub fn render_csv(report: &Report) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<&str> = report.columns.clone();
    header.extend(report.params.iter().map(|(k, _)| *k));
    header.extend(["command", "seed", "version"]);
    w.write_record(&header)?;
    let seed = report.seed.map(|s| s.to_string()).unwrap_or_default();
    for row in &report.rows {
        let mut rec: Vec<String> = row.iter().map(Cell::csv_field).collect();
        rec.extend(report.params.iter().map(|(_, v)| v.csv_field()));
        rec.extend([report.command.to_string(), seed.clone(), VERSION.to_string()]);
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn render_json(report: &Report, wall_time_s: Option<f64>) -> Vec<u8> {
    let mut params = Map::new();
    for (k, v) in &report.params {
        params.insert(k.to_string(), v.json());
    }
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|row| {
            let mut m = Map::new();
            for (col, cell) in report.columns.iter().zip(row) {
                m.insert(col.to_string(), cell.json());
            }
            Value::Object(m)
        })
        .collect();
    let mut meta = Map::new();
    meta.insert("seed".into(), report.seed.map_or(Value::Null, |s| json!(s)));
    meta.insert("version".into(), json!(VERSION));
    if let Some(t) = wall_time_s {
        meta.insert("wall_time_s".into(), json!(t));
    }
    let doc = json!({
        "command": report.command,
        "params": params,
        "rows": rows,
        "meta": meta,
        "errors": report.non_finite(),
    });
    let mut out = serde_json::to_vec_pretty(&doc).expect("JSON values are finite");
    out.push(b'\n');
    out
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("demo", &["lambda", "value"]);
        r.param("d", 2u32);
        r.seed = Some(7);
        r.push(vec![0.1.into(), 0.58270949.into()]);
        r.push(vec![0.01.into(), f64::NAN.into()]);
        r
    }

    #[test]
    fn csv_layout() {
        let s = String::from_utf8(render_csv(&sample()).unwrap()).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "lambda,value,d,command,seed,version");
        assert_eq!(lines[1], format!("1e-1,5.8270949e-1,2,demo,7,{VERSION}"));
        assert!(lines[2].starts_with("1e-2,,2,"));
        assert!(!s.contains('\r'));
    }

    #[test]
    fn json_nulls_and_errors() {
        let v: Value = serde_json::from_slice(&render_json(&sample(), None)).unwrap();
        assert_eq!(v["rows"][1]["value"], Value::Null);
        assert_eq!(v["errors"].as_array().unwrap().len(), 1);
        assert_eq!(v["meta"]["seed"], json!(7));
        assert!(v["meta"].get("wall_time_s").is_none());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"a\n").unwrap();
        write_atomic(&p, b"b\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"b\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
