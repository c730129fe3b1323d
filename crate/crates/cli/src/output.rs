//! CSV tables with `#` metadata headers, JSON reports, and where they are written.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest decimal that round-trips to the same `f64`; scientific outside `[1e-3, 1e6)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-3..1e6).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(config: &RunConfig, scenario: &str, columns: &[&str]) -> Self {
        Self {
            meta: vec![
                ("generator".into(), format!("soc-metrology {VERSION}")),
                ("scenario".into(), scenario.into()),
                ("config_sha256".into(), config.hash()),
                ("seed".into(), config.numerics.seed.to_string()),
            ],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `{"config": ..., "results": ..., "diagnostics": ...}`, pretty-printed.
pub fn json_report(config: &RunConfig, results: Value, diagnostics: Value) -> String {
    let doc = json!({
        "config": config.provenance(),
        "config_sha256": config.hash(),
        "version": VERSION,
        "results": results,
        "diagnostics": diagnostics,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

/// One output file. `suffix` is appended to the output stem; `None` is the main file.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub suffix: Option<String>,
    pub extension: &'static str,
    pub content: String,
}

impl Artifact {
    pub fn main(extension: &'static str, content: String) -> Self {
        Self { suffix: None, extension, content }
    }

    pub fn extra(suffix: impl Into<String>, extension: &'static str, content: String) -> Self {
        Self { suffix: Some(suffix.into()), extension, content }
    }

    fn path_for(&self, out: &Path) -> PathBuf {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        let name = match &self.suffix {
            None => format!("{stem}.{}", self.extension),
            Some(s) => format!("{stem}{s}.{}", self.extension),
        };
        out.with_file_name(name)
    }
}

/// Writes artifacts next to `out`, or streams them to stdout when `out` is absent.
/// The first artifact keeps the exact `out` path.
pub fn write_artifacts(out: Option<&str>, artifacts: &[Artifact]) -> CliResult<Vec<PathBuf>> {
    let Some(out) = out else {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        for a in artifacts {
            lock.write_all(a.content.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
        }
        return Ok(Vec::new());
    };
    let out = Path::new(out);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut written = Vec::new();
    for (i, a) in artifacts.iter().enumerate() {
        let path = if i == 0 { out.to_path_buf() } else { a.path_for(out) };
        std::fs::write(&path, &a.content).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_formatting() {
        for v in [0.1, 1.0 / 3.0, 5.555_555_555_555_556e-4, 1e-300, 0.0, -2.5e7, 123.456] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(5.5e-9), "5.5e-9");
        assert_eq!(fmt_f64(0.25), "0.25");
    }

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(&RunConfig::default(), "demo", &["a", "b"]);
        t.meta("cutoff", 40);
        t.push(vec!["1".into(), "0.5".into()]);
        let text = t.render();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[..5].iter().all(|l| l.starts_with("# ")));
        assert!(lines[2].starts_with("# config_sha256: "));
        assert_eq!(lines[5], "a,b");
        assert_eq!(lines[6], "1,0.5");
    }

    #[test]
    fn report_keys() {
        let r: Value = serde_json::from_str(&json_report(&RunConfig::default(), json!({"x": 1}), json!([]))).unwrap();
        for key in ["config", "results", "diagnostics"] {
            assert!(r.get(key).is_some());
        }
    }

    #[test]
    fn artifact_paths() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sub/run.csv");
        let written = write_artifacts(
            Some(out.to_str().unwrap()),
            &[Artifact::main("csv", "x\n".into()), Artifact::extra("", "json", "{}\n".into()), Artifact::extra("_d1", "csv", "y\n".into())],
        )
        .unwrap();
        assert_eq!(written[0], out);
        assert_eq!(written[1], dir.path().join("sub/run.json"));
        assert_eq!(written[2], dir.path().join("sub/run_d1.csv"));
        assert_eq!(std::fs::read_to_string(&written[2]).unwrap(), "y\n");
    }
}
