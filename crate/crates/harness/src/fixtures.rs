//! Seeded synthetic datasets written as libsvm files plus a JSON manifest.

use std::path::{Path, PathBuf};

use blitz_core::{SparseColumnMatrix, SparseVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, HarnessError, Result};
use crate::libsvm::{format_groups, format_libsvm, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FixtureKind {
    Lasso,
    Group,
    Svm,
    Logreg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    pub seed: u64,
    pub rows: usize,
    /// Features; for `group` the number of trees times `leaves`.
    pub cols: usize,
    /// Fraction of nonzero design entries (ignored by `group`).
    pub density: f64,
    /// Fraction of planted nonzero coefficients (of groups for `group`).
    pub support: f64,
    pub noise: f64,
    /// Leaves per tree for `group`.
    pub leaves: usize,
    /// Minimum |⟨w, a⟩| / ‖w‖ for `svm`.
    pub margin: f64,
}

impl FixtureSpec {
    pub fn new(kind: FixtureKind, seed: u64, rows: usize, cols: usize) -> Self {
        Self { kind, seed, rows, cols, density: 0.1, support: 0.1, noise: 0.1, leaves: 4, margin: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub spec: FixtureSpec,
    pub dataset: Dataset,
    pub groups: Option<Vec<Vec<usize>>>,
    /// Planted coefficients.
    pub truth: Vec<f64>,
}

impl Fixture {
    pub fn support(&self) -> Vec<usize> {
        (0..self.truth.len()).filter(|&j| self.truth[j] != 0.0).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: FixtureSpec,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub support: Vec<usize>,
    pub data_file: String,
    pub groups_file: Option<String>,
    pub sha256: String,
}

fn gauss(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

fn sparse_design(r: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Result<SparseColumnMatrix> {
    let columns = (0..cols)
        .map(|_| {
            let mut idx = Vec::new();
            let mut val = Vec::new();
            for i in 0..rows {
                if r.random::<f64>() < density {
                    idx.push(i);
                    val.push(gauss(r));
                }
            }
            SparseVec::new(idx, val)
        })
        .collect::<blitz_core::Result<Vec<_>>>()?;
    Ok(SparseColumnMatrix::new(rows, columns)?)
}

fn planted(r: &mut ChaCha8Rng, cols: usize, frac: f64) -> Vec<f64> {
    let k = ((frac * cols as f64).round() as usize).clamp(1, cols);
    let mut idx: Vec<usize> = (0..cols).collect();
    // partial Fisher-Yates
    for a in 0..k {
        let b = r.random_range(a..cols);
        idx.swap(a, b);
    }
    let mut w = vec![0.0; cols];
    for &j in &idx[..k] {
        let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
        w[j] = sign * (0.5 + r.random::<f64>());
    }
    w
}

pub fn make_fixture(spec: &FixtureSpec) -> Result<Fixture> {
    if spec.rows == 0 || spec.cols == 0 {
        return config("fixture needs at least one row and one column");
    }
    let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        FixtureKind::Lasso => {
            let data = sparse_design(&mut r, spec.rows, spec.cols, spec.density)?;
            let w = planted(&mut r, spec.cols, spec.support);
            let labels = data.mul_vec(&w).into_iter().map(|v| v + spec.noise * gauss(&mut r)).collect();
            Ok(Fixture { spec: spec.clone(), dataset: Dataset { data, labels }, groups: None, truth: w })
        }
        FixtureKind::Logreg => {
            let data = sparse_design(&mut r, spec.rows, spec.cols, spec.density)?;
            let w = planted(&mut r, spec.cols, spec.support);
            let labels = data
                .mul_vec(&w)
                .into_iter()
                .map(|v| if r.random::<f64>() < 1.0 / (1.0 + (-v).exp()) { 1.0 } else { -1.0 })
                .collect();
            Ok(Fixture { spec: spec.clone(), dataset: Dataset { data, labels }, groups: None, truth: w })
        }
        FixtureKind::Svm => {
            let w = {
                let g: Vec<f64> = (0..spec.cols).map(|_| gauss(&mut r)).collect();
                let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                g.into_iter().map(|v| v / n).collect::<Vec<_>>()
            };
            let mut rows = Vec::with_capacity(spec.rows);
            let mut labels = Vec::with_capacity(spec.rows);
            while rows.len() < spec.rows {
                let a: Vec<f64> = (0..spec.cols)
                    .map(|_| if r.random::<f64>() < spec.density { gauss(&mut r) } else { 0.0 })
                    .collect();
                let s: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
                if s.abs() >= spec.margin {
                    labels.push(s.signum());
                    rows.push(SparseVec::from_dense(&a));
                }
            }
            let data = SparseColumnMatrix::from_rows(spec.cols, &rows)?;
            Ok(Fixture { spec: spec.clone(), dataset: Dataset { data, labels }, groups: None, truth: w })
        }
        FixtureKind::Group => {
            // each tree sends every row to one leaf, so columns within a group
            // have disjoint supports
            if spec.leaves == 0 || spec.cols % spec.leaves != 0 {
                return config("group fixture needs cols divisible by leaves");
            }
            let trees = spec.cols / spec.leaves;
            let mut columns = Vec::with_capacity(spec.cols);
            let mut groups = Vec::with_capacity(trees);
            for t in 0..trees {
                let mut members: Vec<Vec<usize>> = vec![Vec::new(); spec.leaves];
                for i in 0..spec.rows {
                    members[r.random_range(0..spec.leaves)].push(i);
                }
                for m in members {
                    let n = m.len();
                    columns.push(SparseVec::new(m, vec![1.0; n])?);
                }
                groups.push((t * spec.leaves..(t + 1) * spec.leaves).collect::<Vec<_>>());
            }
            let data = SparseColumnMatrix::new(spec.rows, columns)?;
            let active = planted(&mut r, trees, spec.support);
            let mut w = vec![0.0; spec.cols];
            for (t, g) in groups.iter().enumerate() {
                if active[t] != 0.0 {
                    for &j in g {
                        w[j] = gauss(&mut r);
                    }
                }
            }
            let labels = data.mul_vec(&w).into_iter().map(|v| v + spec.noise * gauss(&mut r)).collect();
            Ok(Fixture { spec: spec.clone(), dataset: Dataset { data, labels }, groups: Some(groups), truth: w })
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes).as_slice())
}

fn kind_name(kind: FixtureKind) -> &'static str {
    match kind {
        FixtureKind::Lasso => "lasso",
        FixtureKind::Group => "group",
        FixtureKind::Svm => "svm",
        FixtureKind::Logreg => "logreg",
    }
}

/// Writes `<name>.libsvm`, `<name>.groups` (group fixtures) and
/// `<name>.manifest.json` into `dir`; returns the written paths.
pub fn write_fixture(dir: &Path, name: Option<&str>, fx: &Fixture) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let name = name.map(str::to_owned).unwrap_or_else(|| format!("{}_s{}", kind_name(fx.spec.kind), fx.spec.seed));
    let text = format_libsvm(&fx.dataset);
    let data_file = format!("{name}.libsvm");
    let mut written = vec![dir.join(&data_file)];
    std::fs::write(&written[0], &text).map_err(|e| HarnessError::io(&written[0], e))?;
    let groups_file = match &fx.groups {
        Some(g) => {
            let f = format!("{name}.groups");
            let p = dir.join(&f);
            std::fs::write(&p, format_groups(g)).map_err(|e| HarnessError::io(&p, e))?;
            written.push(p);
            Some(f)
        }
        None => None,
    };
    let manifest = Manifest {
        spec: fx.spec.clone(),
        rows: fx.dataset.n_rows(),
        cols: fx.dataset.n_cols(),
        nnz: fx.dataset.data.nnz(),
        support: fx.support(),
        data_file,
        groups_file,
        sha256: sha256_hex(text.as_bytes()),
    };
    let p = dir.join(format!("{name}.manifest.json"));
    std::fs::write(&p, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| HarnessError::io(&p, e))?;
    written.push(p);
    Ok(written)
}
