//! Sparse text lines: `label idx:val idx:val ...`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SparseOptions {
    /// Divide each row by its sum (term-frequency normalization).
    pub tf_normalize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseText {
    pub x: Matrix,
    /// Raw integer labels, one per line, in file order.
    pub labels: Vec<i64>,
}

impl SparseText {
    /// Maps the distinct raw labels, in ascending order, to `0..k`.
    pub fn class_indices(&self) -> (Vec<usize>, Vec<i64>) {
        let mut distinct = self.labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let idx = self
            .labels
            .iter()
            .map(|l| distinct.binary_search(l).expect("present"))
            .collect();
        (idx, distinct)
    }
}

/// Parses sparse text held in memory. Blank lines are skipped.
pub fn parse_sparse_text(text: &str, dim: usize, opts: SparseOptions, path: &Path) -> Result<SparseText> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        let label: i64 = label
            .parse()
            .map_err(|_| err(lineno, format!("unparsable label `{label}`")))?;
        let mut row = vec![0.0; dim];
        let mut prev: Option<usize> = None;
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected idx:val, got `{tok}`")))?;
            let i: usize = i
                .parse()
                .map_err(|_| err(lineno, format!("unparsable index in `{tok}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| err(lineno, format!("unparsable value in `{tok}`")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite value in `{tok}`")));
            }
            if i >= dim {
                return Err(err(lineno, format!("index {i} out of range for dimension {dim}")));
            }
            if prev.is_some_and(|p| i <= p) {
                return Err(err(lineno, format!("indices not strictly increasing at `{tok}`")));
            }
            prev = Some(i);
            row[i] = v;
        }
        if opts.tf_normalize {
            let total: f64 = row.iter().sum();
            if total != 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
        data.extend(row);
        labels.push(label);
    }
    Ok(SparseText {
        x: Matrix::from_vec(labels.len(), dim, data)?,
        labels,
    })
}

pub fn load_sparse_text(path: impl AsRef<Path>, dim: usize, opts: SparseOptions) -> Result<SparseText> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sparse_text(&text, dim, opts, path)
}
