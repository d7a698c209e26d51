//! libsvm text format: `<label> <idx>:<val> ...`, 1-based strictly
//! increasing indices, one example per line.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use blitz_core::{SparseColumnMatrix, SparseVec};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub data: SparseColumnMatrix,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.data.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.n_cols()
    }

    /// Examples as sparse rows (the SVM view).
    pub fn rows(&self) -> Vec<SparseVec> {
        self.data.transpose().into_columns()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse { line, message: message.into() }
}

/// Blank lines and `#` comments are skipped. `n_features` pads the column
/// count beyond the largest index seen.
pub fn parse_libsvm<R: Read>(reader: R, n_features: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    let mut max_col = 0usize;
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok.parse().map_err(|_| parse_err(lineno, format!("label {label_tok:?} is not a number")))?;
        if !label.is_finite() {
            return Err(parse_err(lineno, "label is not finite"));
        }
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| parse_err(lineno, format!("{tok:?} is not idx:val")))?;
            let i: usize = i.parse().map_err(|_| parse_err(lineno, format!("index {i:?} is not a positive integer")))?;
            if i == 0 {
                return Err(parse_err(lineno, "indices are 1-based"));
            }
            let v: f64 = v.parse().map_err(|_| parse_err(lineno, format!("value {v:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("value at index {i} is not finite")));
            }
            if let Some(&last) = idx.last() {
                if i - 1 == last {
                    return Err(parse_err(lineno, format!("duplicate index {i}")));
                }
                if i - 1 < last {
                    return Err(parse_err(lineno, format!("index {i} after {}: indices must increase", last + 1)));
                }
            }
            max_col = max_col.max(i);
            idx.push(i - 1);
            val.push(v);
        }
        labels.push(label);
        rows.push((idx, val));
    }
    if labels.is_empty() {
        return Err(parse_err(0, "empty file"));
    }
    let n_cols = match n_features {
        Some(n) if n < max_col => return Err(parse_err(0, format!("index {max_col} exceeds {n} features"))),
        Some(n) => n,
        None => max_col,
    };
    let rows: Vec<SparseVec> = rows
        .into_iter()
        .map(|(i, v)| SparseVec::new(i, v))
        .collect::<blitz_core::Result<_>>()?;
    let data = SparseColumnMatrix::from_rows(n_cols, &rows)?;
    Ok(Dataset { data, labels })
}

pub fn read_libsvm(path: &Path) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_libsvm(f, None)
}

/// Shortest round-trip formatting, so reading back is bit-exact.
pub fn format_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for (label, row) in ds.labels.iter().zip(ds.rows()) {
        write!(out, "{label}").unwrap();
        for (j, v) in row.iter() {
            write!(out, " {}:{v}", j + 1).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(path: &Path, ds: &Dataset) -> Result<()> {
    std::fs::write(path, format_libsvm(ds)).map_err(|e| HarnessError::io(path, e))
}

/// One group per line, 1-based feature indices separated by spaces.
pub fn parse_groups(text: &str) -> Result<Vec<Vec<usize>>> {
    let mut groups = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let g = line
            .split_whitespace()
            .map(|t| match t.parse::<usize>() {
                Ok(i) if i > 0 => Ok(i - 1),
                _ => Err(parse_err(k + 1, format!("group member {t:?} is not a 1-based index"))),
            })
            .collect::<Result<Vec<_>>>()?;
        groups.push(g);
    }
    Ok(groups)
}

pub fn format_groups(groups: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for g in groups {
        let line: Vec<String> = g.iter().map(|j| (j + 1).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
