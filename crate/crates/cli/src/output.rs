use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

pub const RESULT: &str = "result.csv";
pub const MANIFEST: &str = "manifest.txt";

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One CSV row: coordinates, value, and the reference when there is one.
pub struct Row {
    pub coords: Vec<f64>,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    /// Relative error denominator; defaults to `|reference|`.
    pub scale: Option<f64>,
}

impl Row {
    pub fn new(coords: Vec<f64>, value: f64, reference: Option<f64>) -> Self {
        Self {
            coords,
            value: Some(value),
            reference,
            scale: None,
        }
    }

    pub fn errors(&self) -> (Option<f64>, Option<f64>) {
        match (self.value, self.reference) {
            (Some(v), Some(r)) => {
                let abs = (v - r).abs();
                let den = self.scale.unwrap_or(r.abs());
                (Some(abs), Some(if den > 0.0 { abs / den } else { abs }))
            }
            _ => (None, None),
        }
    }
}

pub fn write_csv(dir: &Path, coord_names: &[String], extra: &[&str], rows: &[(Row, Vec<f64>)]) -> anyhow::Result<PathBuf> {
    let path = dir.join(RESULT);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut header: Vec<&str> = coord_names.iter().map(String::as_str).collect();
    header.extend_from_slice(extra);
    header.extend_from_slice(&["value", "reference", "abs_err", "rel_err"]);
    w.write_record(&header)?;
    for (row, more) in rows {
        let (abs, rel) = row.errors();
        let mut rec: Vec<String> = row.coords.iter().copied().map(num).collect();
        rec.extend(more.iter().copied().map(num));
        rec.extend([opt(row.value), opt(row.reference), opt(abs), opt(rel)]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(path)
}

/// Readable as a config file: rerunning with `--config manifest.txt`
/// repeats the run.
pub struct Manifest {
    text: String,
}

impl Manifest {
    pub fn new(command: &str, resolved: &[(String, String)]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# sonar {} run manifest", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "# rerun: sonar --config {MANIFEST} {command}");
        let _ = writeln!(text, "# worker threads: {}", rayon::current_num_threads());
        let _ = writeln!(text, "[{command}]");
        for (k, v) in resolved {
            let _ = writeln!(text, "{k} = {v}");
        }
        Self { text }
    }

    pub fn note(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.text, "# {}", line.as_ref());
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(MANIFEST);
        fs::write(&path, &self.text).with_context(|| format!("cannot write {}", path.display()))
    }
}
