//! CSV emission. Floats are written with 17 significant digits so that a
//! snapshot round-trips bit-exactly through text.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `{run_id}_t{step}.csv` inside `dir`.
pub fn snapshot_path(dir: &Path, run_id: &str, step: usize) -> PathBuf {
    dir.join(format!("{run_id}_t{step}.csv"))
}

/// Builds CSV text row by row.
#[derive(Debug, Default)]
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn push_row(&mut self, values: &[f64]) {
        let mut first = true;
        for v in values {
            if !first {
                self.text.push(',');
            }
            first = false;
            let _ = write!(self.text, "{}", fmt_f64(*v));
        }
        self.text.push('\n');
    }

    /// Row whose first cells are preformatted text (labels, integers).
    pub fn push_mixed(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.text.as_bytes())
    }
}
