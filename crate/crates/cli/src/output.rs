//! CSV and JSON artifact writers.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::CliError;

/// `v` rounded to 10 significant digits, printed without exponent noise.
pub fn sig(v: f64) -> String {
    if !v.is_finite() || v == 0.0 {
        return format!("{}", if v == 0.0 { 0.0 } else { v });
    }
    let rounded: f64 = format!("{v:.9e}").parse().unwrap_or(v);
    format!("{rounded}")
}

/// Empty cell for a missing value.
pub fn opt(v: Option<f64>) -> String {
    v.map(sig).unwrap_or_default()
}

/// Joins list values for file names: `3-5-7`.
pub fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("-")
}

pub struct Writer {
    dir: PathBuf,
    stem: String,
    pub files: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, stem: String) -> Result<Writer, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Writer { dir: dir.to_path_buf(), stem, files: Vec::new() })
    }

    pub fn csv(&mut self, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.dir.join(format!("{}.csv", self.stem));
        let io = |e: csv::Error| CliError::io(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    /// Writes the summary, adding the file list and a generation timestamp.
    pub fn summary(&mut self, mut summary: Value) -> Result<PathBuf, CliError> {
        let path = self.dir.join(format!("{}.json", self.stem));
        let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
        if let Value::Object(m) = &mut summary {
            m.insert("generatedAtUnix".into(), secs.into());
            let files: Vec<Value> = self.files.iter().map(|f| f.display().to_string().into()).collect();
            m.insert("files".into(), files.into());
        }
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(path.clone());
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(-0.0), "0");
        assert_eq!(sig(0.1 + 0.2), "0.3");
        assert_eq!(sig(1.0 / 3.0), "0.3333333333");
        assert_eq!(sig(123456789012.0), "123456789000");
        assert_eq!(sig(2.5e-7), "0.00000025");
        assert_eq!(sig(f64::INFINITY), "inf");
        assert_eq!(opt(None), "");
    }
}
