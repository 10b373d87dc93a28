//! Write-once run directories. Every artifact carries the run manifest.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const ARTIFACT: &str = "schurloc";

/// Round-trip float text: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn fmt_bool(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: &'a RunConfig,
}

impl<'a> Manifest<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Self { artifact: ARTIFACT, version: env!("CARGO_PKG_VERSION"), command: config.command.name(), seed: config.seed, config }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, manifest: &Value) -> String {
        let mut s = format!("# manifest: {manifest}\n");
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(|c| c.replace([',', '\n'], ";")).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

pub struct RunDir {
    dir: PathBuf,
    manifest: Value,
    written: Vec<PathBuf>,
}

impl RunDir {
    pub fn create(dir: &Path, manifest: Value) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), manifest, written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::Io(format!("{} already exists; outputs are write-once", path.display()))
            } else {
                CliError::Io(format!("{}: {e}", path.display()))
            }
        })?;
        f.write_all(contents.as_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// Refuse early if any of `names` is already present.
    pub fn ensure_fresh(&self, names: &[&str]) -> Result<(), CliError> {
        for n in names {
            let p = self.dir.join(n);
            if p.exists() {
                return Err(CliError::Io(format!("{} already exists; outputs are write-once", p.display())));
            }
        }
        Ok(())
    }

    pub fn write_manifest(&mut self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.manifest).expect("json") + "\n";
        self.write("manifest.json", &text)
    }

    pub fn write_csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let text = table.render(&self.manifest);
        self.write(name, &text)
    }

    /// JSON document `{ "manifest": ..., key: data }`.
    pub fn write_json<T: Serialize>(&mut self, name: &str, key: &str, data: &T) -> Result<(), CliError> {
        let doc = json!({ "manifest": self.manifest, key: data });
        self.write(name, &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))
    }

    /// JSON lines, the first holding the manifest.
    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<(), CliError> {
        let mut s = json!({ "manifest": self.manifest }).to_string();
        s.push('\n');
        for r in records {
            s.push_str(&serde_json::to_string(r).expect("json"));
            s.push('\n');
        }
        self.write(name, &s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e10] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }
}
