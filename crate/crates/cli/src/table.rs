//! CSV output. Numbers are written in fixed notation with 17 significant
//! digits so identical runs give byte-identical files.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const SIGNIFICANT_DIGITS: i32 = 17;

/// `v` in fixed notation with 17 significant digits. Zero prints as
/// `0.0000000000000000`; non-finite values as `nan`, `inf`, `-inf`.
pub fn fixed(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return format!("{:.*}", (SIGNIFICANT_DIGITS - 1) as usize, 0.0);
    }
    // Exponent after rounding, so 9.99...e-1 that rounds up is handled.
    let sci = format!("{:.*e}", (SIGNIFICANT_DIGITS - 1) as usize, v);
    let exponent: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (SIGNIFICANT_DIGITS - 1 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

pub struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvFile {
    pub fn create<S: AsRef<str>>(path: &Path, header: &[S]) -> Result<CsvFile, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = CsvFile {
            path: path.to_path_buf(),
            writer: csv::Writer::from_writer(BufWriter::new(file)),
        };
        out.record(header.iter().map(|h| h.as_ref().to_string()))?;
        Ok(out)
    }

    pub fn record(&mut self, fields: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.writer.write_record(&fields).map_err(|e| self.csv_error(e))
    }

    /// A row of numbers.
    pub fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        self.record(values.iter().map(|&v| fixed(v)))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }

    fn csv_error(&self, e: csv::Error) -> CliError {
        let source = match e.into_kind() {
            csv::ErrorKind::Io(io) => io,
            other => std::io::Error::other(format!("{other:?}")),
        };
        CliError::io(&self.path, source)
    }
}
