//! Column pruning and scaling to unit variance.

use blitz_core::{SparseColumnMatrix, SparseVec};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    /// Columns with fewer nonzeros are dropped.
    pub min_nnz: usize,
    pub standardize: bool,
    /// Appends a column of ones after scaling.
    pub bias_column: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self { min_nnz: 10, standardize: true, bias_column: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    TooFewNonzeros,
    ZeroVariance,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub data: SparseColumnMatrix,
    /// `kept[k]` is the original index of column `k`.
    pub kept: Vec<usize>,
    /// Multiplier applied to each kept column.
    pub scales: Vec<f64>,
    pub dropped: Vec<(usize, DropReason)>,
    pub n_original: usize,
    pub bias_column: bool,
}

impl Preprocessed {
    /// Coefficients on the scaled columns to coefficients on the original
    /// ones; dropped columns get 0 and the bias column is ignored.
    pub fn back_translate(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_original];
        for (k, &j) in self.kept.iter().enumerate() {
            out[j] = w[k] * self.scales[k];
        }
        out
    }

    /// Old-to-new column index, `None` for dropped columns.
    pub fn index_map(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.n_original];
        for (k, &j) in self.kept.iter().enumerate() {
            map[j] = Some(k);
        }
        map
    }

    /// Groups over the kept columns; groups that lose every member vanish.
    pub fn remap_groups(&self, groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let map = self.index_map();
        groups
            .iter()
            .map(|g| g.iter().filter_map(|&j| map.get(j).copied().flatten()).collect::<Vec<_>>())
            .filter(|g: &Vec<usize>| !g.is_empty())
            .collect()
    }
}

/// Population variance, two-pass.
pub fn variance(c: &SparseVec, n: usize) -> f64 {
    let nf = n as f64;
    let mean = c.values().iter().sum::<f64>() / nf;
    let nz: f64 = c.values().iter().map(|v| (v - mean).powi(2)).sum();
    (nz + (n - c.nnz()) as f64 * mean * mean) / nf
}

pub fn preprocess(data: &SparseColumnMatrix, opts: &PreprocessOptions) -> Result<Preprocessed> {
    let n = data.n_rows();
    let mut cols = Vec::new();
    let mut kept = Vec::new();
    let mut scales = Vec::new();
    let mut dropped = Vec::new();
    for (j, c) in data.columns().iter().enumerate() {
        if c.nnz() < opts.min_nnz {
            dropped.push((j, DropReason::TooFewNonzeros));
            continue;
        }
        let var = variance(c, n);
        let mean_sq = c.norm_sq() / n as f64;
        if !(var > 1e-12 * mean_sq) {
            log::warn!("column {} has zero variance; dropped", j + 1);
            dropped.push((j, DropReason::ZeroVariance));
            continue;
        }
        let s = if opts.standardize { 1.0 / var.sqrt() } else { 1.0 };
        cols.push(if s == 1.0 { c.clone() } else { c.scaled(s) });
        kept.push(j);
        scales.push(s);
    }
    let n_few = dropped.iter().filter(|d| d.1 == DropReason::TooFewNonzeros).count();
    if n_few > 0 {
        log::info!("dropped {n_few} columns with fewer than {} nonzeros", opts.min_nnz);
    }
    if opts.bias_column {
        cols.push(SparseVec::new((0..n).collect(), vec![1.0; n])?);
    }
    Ok(Preprocessed {
        data: SparseColumnMatrix::new(n, cols)?,
        kept,
        scales,
        dropped,
        n_original: data.n_cols(),
        bias_column: opts.bias_column,
    })
}
