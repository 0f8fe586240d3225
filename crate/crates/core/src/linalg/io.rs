//! CSV serialization of matrices: one line per row, every value written with
//! 17 significant digits so that parsing recovers the exact bits.

use std::io::{Read, Write};
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

/// Formats a value with 17 significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(w: &Matrix, out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..w.rows() {
        writer.write_record(w.row(i).iter().map(|&v| format_value(v)))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad matrix entry {field:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

pub fn write_matrix_csv(w: &Matrix, path: &Path) -> Result<()> {
    write_csv(w, std::fs::File::create(path)?)
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    read_csv(std::fs::File::open(path)?)
}
