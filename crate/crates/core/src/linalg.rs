//! Dense and sparse vector primitives.

use crate::error::{BlitzError, Result};

/// A point in the variable space. Length is fixed per problem instance.
pub type DenseVector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> DenseVector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + t (b - a)`
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> DenseVector {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Sparse vector with strictly increasing indices and a cached norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    indices: Vec<usize>,
    values: Vec<f64>,
    norm: f64,
}

impl SparseVec {
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(BlitzError::Usage(format!(
                "sparse vector has {} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BlitzError::Usage(
                "sparse vector indices must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BlitzError::Usage("sparse vector has non-finite value".into()));
        }
        let norm = norm(&values);
        Ok(Self { indices, values, norm })
    }

    /// Keeps the nonzero entries of a dense slice.
    pub fn from_dense(x: &[f64]) -> Self {
        let (indices, values): (Vec<_>, Vec<_>) = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        let norm = norm(&values);
        Self { indices, values, norm }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm * self.norm
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * x[i]).sum()
    }

    pub fn sparse_dot(&self, other: &SparseVec) -> f64 {
        let (mut p, mut q, mut acc) = (0, 0, 0.0);
        while p < self.nnz() && q < other.nnz() {
            match self.indices[p].cmp(&other.indices[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[p] * other.values[q];
                    p += 1;
                    q += 1;
                }
            }
        }
        acc
    }

    /// `y += alpha * self`
    pub fn axpy_into(&self, alpha: f64, y: &mut [f64]) {
        for (i, v) in self.iter() {
            y[i] += alpha * v;
        }
    }

    pub fn to_dense(&self, n: usize) -> DenseVector {
        let mut out = vec![0.0; n];
        self.axpy_into(1.0, &mut out);
        out
    }

    pub fn scaled(&self, s: f64) -> SparseVec {
        SparseVec {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            norm: self.norm * s.abs(),
        }
    }

    /// Recomputes the norm from the entries (used to validate the cache).
    pub fn recomputed_norm(&self) -> f64 {
        norm(&self.values)
    }
}

/// Column-major sparse matrix; one column per component.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumnMatrix {
    n_rows: usize,
    columns: Vec<SparseVec>,
}

impl SparseColumnMatrix {
    pub fn new(n_rows: usize, columns: Vec<SparseVec>) -> Result<Self> {
        for (j, c) in columns.iter().enumerate() {
            if let Some(i) = c.max_index() {
                if i >= n_rows {
                    return Err(BlitzError::Usage(format!(
                        "column {j} has row index {i} >= n_rows {n_rows}"
                    )));
                }
            }
        }
        Ok(Self { n_rows, columns })
    }

    /// Builds the matrix whose rows are `rows` (so columns index the row entries).
    pub fn from_rows(n_cols: usize, rows: &[SparseVec]) -> Result<Self> {
        let mut idx: Vec<Vec<usize>> = vec![Vec::new(); n_cols];
        let mut val: Vec<Vec<f64>> = vec![Vec::new(); n_cols];
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter() {
                if c >= n_cols {
                    return Err(BlitzError::Usage(format!(
                        "row {r} has column index {c} >= n_cols {n_cols}"
                    )));
                }
                idx[c].push(r);
                val[c].push(v);
            }
        }
        let columns = idx
            .into_iter()
            .zip(val)
            .map(|(i, v)| SparseVec::new(i, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows.len(), columns)
    }

    pub fn from_dense_columns(n_rows: usize, cols: &[Vec<f64>]) -> Result<Self> {
        for c in cols {
            if c.len() != n_rows {
                return Err(BlitzError::Usage("dense column has wrong length".into()));
            }
        }
        Self::new(n_rows, cols.iter().map(|c| SparseVec::from_dense(c)).collect())
    }

    pub fn transpose(&self) -> SparseColumnMatrix {
        Self::from_rows(self.n_rows, &self.columns).expect("transpose of a valid matrix")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &SparseVec {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[SparseVec] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<SparseVec> {
        self.columns
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|c| c.nnz()).sum()
    }

    /// `A w`
    pub fn mul_vec(&self, w: &[f64]) -> DenseVector {
        let mut out = vec![0.0; self.n_rows];
        for (c, wj) in self.columns.iter().zip(w) {
            if *wj != 0.0 {
                c.axpy_into(*wj, &mut out);
            }
        }
        out
    }

    /// `Aᵀ x`
    pub fn tmul_vec(&self, x: &[f64]) -> DenseVector {
        self.columns.iter().map(|c| c.dot(x)).collect()
    }

    pub fn select_columns(&self, keep: &[usize]) -> SparseColumnMatrix {
        SparseColumnMatrix {
            n_rows: self.n_rows,
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_indices() {
        assert!(SparseVec::new(vec![2, 1], vec![1.0, 2.0]).is_err());
        assert!(SparseVec::new(vec![1, 1], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let a = SparseColumnMatrix::from_dense_columns(
            3,
            &[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]],
        )
        .unwrap();
        let t = a.transpose();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.n_cols(), 3);
        assert_eq!(t.transpose(), a);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![1.0, 3.0, 2.0]);
        assert_eq!(a.tmul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
    }

    #[test]
    fn cached_norm_matches() {
        let v = SparseVec::new(vec![0, 4, 9], vec![3.0, -4.0, 12.0]).unwrap();
        assert!((v.norm() - 13.0).abs() < 1e-15);
        assert!((v.norm() - v.recomputed_norm()).abs() <= 1e-12 * v.norm());
        let w = SparseVec::new(vec![4, 5], vec![2.0, 1.0]).unwrap();
        assert_eq!(v.sparse_dot(&w), -8.0);
    }
}
