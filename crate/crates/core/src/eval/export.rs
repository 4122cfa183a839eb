//! Plain-text exports: embedding TSV and labeled square-matrix CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Formats `v` with 6 significant digits; fixed notation for exponents in
/// `[-5, 15)`, scientific otherwise.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..15).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, v)
    } else {
        sci
    }
}

/// Writes `x\ty\tdomain` rows for a 2-D embedding.
pub fn write_embedding_tsv(path: impl AsRef<Path>, coords: &Matrix, domains: &[&str]) -> Result<()> {
    let path = path.as_ref();
    if coords.cols() != 2 || coords.rows() != domains.len() {
        return Err(Error::shape("write_embedding_tsv", coords.shape(), (domains.len(), 2)));
    }
    let mut out = String::from("x\ty\tdomain\n");
    for (r, d) in domains.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{}\t{d}",
            format_sig6(coords.get(r, 0)),
            format_sig6(coords.get(r, 1))
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A matrix with row and column labels, as stored in CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCsv {
    pub corner: String,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    pub values: Matrix,
}

impl MatrixCsv {
    pub fn to_csv(&self) -> String {
        let mut out = self.corner.clone();
        for c in &self.col_names {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (r, name) in self.row_names.iter().enumerate() {
            out.push_str(name);
            for c in 0..self.values.cols() {
                out.push(',');
                out.push_str(&format_sig6(self.values.get(r, c)));
            }
            out.push('\n');
        }
        out
    }
}

/// p-value matrix CSV with method names as header row and first column.
pub fn pvalue_matrix_csv(methods: &[&str], pvalues: &Matrix) -> Result<String> {
    if pvalues.shape() != (methods.len(), methods.len()) {
        return Err(Error::shape(
            "pvalue_matrix_csv",
            pvalues.shape(),
            (methods.len(), methods.len()),
        ));
    }
    Ok(MatrixCsv {
        corner: "method".into(),
        row_names: methods.iter().map(|s| s.to_string()).collect(),
        col_names: methods.iter().map(|s| s.to_string()).collect(),
        values: pvalues.clone(),
    }
    .to_csv())
}

/// Parses a CSV produced by [`MatrixCsv::to_csv`].
pub fn parse_matrix_csv(text: &str) -> Result<MatrixCsv> {
    let bad = |line: usize, message: String| Error::Parse {
        path: "<matrix csv>".into(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty input".into()))?;
    let mut cols = header.split(',');
    let corner = cols.next().unwrap_or_default().to_string();
    let col_names: Vec<String> = cols.map(str::to_string).collect();
    let mut row_names = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut cells = line.split(',');
        row_names.push(cells.next().unwrap_or_default().to_string());
        let vals: Vec<&str> = cells.collect();
        if vals.len() != col_names.len() {
            return Err(bad(
                i + 2,
                format!("expected {} values, got {}", col_names.len(), vals.len()),
            ));
        }
        for v in vals {
            data.push(v.parse::<f64>().map_err(|_| bad(i + 2, format!("bad number `{v}`")))?);
        }
    }
    Ok(MatrixCsv {
        corner,
        values: Matrix::from_vec(row_names.len(), col_names.len(), data)?,
        row_names,
        col_names,
    })
}
