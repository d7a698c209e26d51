//! Problem adapters: min-norm, L1-regularized losses through their duals,
//! group lasso through its dual, and the hinge-loss SVM primal.
//!
//! Data matrices are column-major with one column per feature and one row
//! per example.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{usage, Result};
use crate::linalg::{norm, DenseVector, SparseColumnMatrix, SparseVec};
use crate::losses::{LossKind, LossSpec};
use crate::piecewise::{PiecewiseProblem, PiecewiseTerm, Support, TermKind};
use crate::psi::{Psi, PsiKind};

/// Regularization presets relative to `λ_max`.
pub const LAMBDA_RATIOS: [f64; 3] = [0.2, 0.02, 0.002];

/// `min ½‖x‖²` subject to `⟨a_i, x⟩ ≤ b_i`.
pub fn build_pmn(n: usize, constraints: Vec<(SparseVec, f64)>) -> Result<PiecewiseProblem> {
    let terms = constraints
        .into_iter()
        .map(|(a, b)| PiecewiseTerm::half_space(a, b))
        .collect::<Result<Vec<_>>>()?;
    PiecewiseProblem::new(Psi::half_norm_sq(n), terms)
}

fn make_losses(labels: &[f64], kind: LossKind) -> Result<Vec<LossSpec>> {
    labels.iter().map(|&b| LossSpec::new(kind, b)).collect()
}

/// ψ = Σ L_j*; the squared loss gets the explicit quadratic form so the
/// quadratic solvers apply.
fn dual_psi(losses: Vec<LossSpec>, labels: &[f64], kind: LossKind) -> Psi {
    if kind == LossKind::Squared {
        let center = labels.iter().map(|b| -b).collect();
        let constant = -0.5 * labels.iter().map(|b| b * b).sum::<f64>();
        Psi::new(PsiKind::Quadratic { center, constant }, 1.0).expect("finite labels")
    } else {
        Psi::conjugate_sum(losses)
    }
}

fn ones(n: usize) -> SparseVec {
    SparseVec::new((0..n).collect(), vec![1.0; n]).expect("valid ones vector")
}

fn check_data(data: &SparseColumnMatrix, labels: &[f64]) -> Result<()> {
    if data.n_rows() != labels.len() {
        return usage(format!("{} labels for {} examples", labels.len(), data.n_rows()));
    }
    if let Some(j) = data.columns().iter().position(|c| c.norm() == 0.0) {
        return usage(format!("feature {j} is identically zero"));
    }
    Ok(())
}

/// Optimal intercept of the loss with all weights zero (1-D Newton).
fn intercept_only(losses: &[LossSpec]) -> f64 {
    let mut beta = 0.0;
    for _ in 0..100 {
        let g: f64 = losses.iter().map(|l| l.derivative(beta)).sum();
        let h: f64 = losses.iter().map(|l| l.second_derivative(beta)).sum::<f64>().max(1e-12);
        let step = g / h;
        beta -= step;
        if step.abs() <= 1e-15 * (1.0 + beta.abs()) {
            break;
        }
    }
    beta
}

/// `x₀ = L′(β₀ 1)`: the dual point at ω = 0 (β₀ the best intercept, or 0).
fn dual_at_zero(losses: &[LossSpec], bias: bool) -> DenseVector {
    let beta = if bias { intercept_only(losses) } else { 0.0 };
    losses.iter().map(|l| l.derivative(beta)).collect()
}

/// `max_i |⟨A_i, x₀⟩|`: the smallest λ with ω⋆ = 0.
pub fn compute_lambda_max(data: &SparseColumnMatrix, labels: &[f64], kind: LossKind, bias: bool) -> Result<f64> {
    let losses = make_losses(labels, kind)?;
    let x0 = dual_at_zero(&losses, bias);
    Ok(data.columns().iter().map(|c| c.dot(&x0).abs()).fold(0.0, f64::max))
}

/// `min_ω Σ_j L_j((Aω)_j + β) + λ‖ω‖₁` through its dual
/// `min_x Σ_j L_j*(x_j)` s.t. `|⟨A_i, x⟩| ≤ λ` (and `⟨1, x⟩ = 0` with a bias).
#[derive(Debug, Clone)]
pub struct L1Dual {
    pub problem: PiecewiseProblem,
    pub data: SparseColumnMatrix,
    pub losses: Vec<LossSpec>,
    pub lambda: f64,
    pub bias: bool,
}

pub fn build_l1_dual(
    data: &SparseColumnMatrix,
    labels: &[f64],
    kind: LossKind,
    lambda: f64,
    bias: bool,
) -> Result<L1Dual> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return usage("lambda must be positive");
    }
    check_data(data, labels)?;
    let losses = make_losses(labels, kind)?;
    if bias && matches!(kind, LossKind::Logistic | LossKind::SquaredHinge) {
        let pos = labels.iter().filter(|b| **b > 0.0).count();
        if pos == 0 || pos == labels.len() {
            return usage("a bias with a classification loss needs both classes");
        }
    }
    let mut terms = data
        .columns()
        .iter()
        .map(|c| PiecewiseTerm::new(TermKind::Slab { bound: lambda }, Support::Vector(c.clone())))
        .collect::<Result<Vec<_>>>()?;
    if bias {
        terms.push(PiecewiseTerm::new(TermKind::Hyperplane { b: 0.0 }, Support::Vector(ones(data.n_rows())))?);
    }
    let problem = PiecewiseProblem::new(dual_psi(losses.clone(), labels, kind), terms)?;
    Ok(L1Dual { problem, data: data.clone(), losses, lambda, bias })
}

impl L1Dual {
    pub fn n_features(&self) -> usize {
        self.data.n_cols()
    }

    /// `(ω, β)` from minorant slopes (ω_i = −slope_i).
    pub fn primal_from_slopes(&self, slopes: &[f64]) -> (Vec<f64>, f64) {
        let m = self.n_features();
        let omega = slopes[..m].iter().map(|s| -s).collect();
        let beta = if self.bias { -slopes[m] } else { 0.0 };
        (omega, beta)
    }

    /// `x = L′(Aω + β)`
    pub fn dual_from_primal(&self, omega: &[f64], beta: f64) -> DenseVector {
        let v = self.data.mul_vec(omega);
        self.losses.iter().zip(&v).map(|(l, vj)| l.derivative(vj + beta)).collect()
    }

    pub fn primal_objective(&self, omega: &[f64], beta: f64) -> f64 {
        let v = self.data.mul_vec(omega);
        let loss: f64 = self.losses.iter().zip(&v).map(|(l, vj)| l.value(vj + beta)).sum();
        loss + self.lambda * omega.iter().map(|w| w.abs()).sum::<f64>()
    }

    /// A feasible dual point: with a bias, the dominant sign group is shrunk
    /// until `⟨1, x⟩ = 0`; then `x` is scaled by `min(1, λ / max_i |⟨A_i, x⟩|)`.
    pub fn feasible_dual(&self, x: &[f64]) -> Result<DenseVector> {
        let mut x = x.to_vec();
        if self.bias {
            crate::solvers::recenter(&ones(x.len()), &mut x)?;
        }
        let worst = |x: &[f64]| self.data.columns().iter().map(|c| c.dot(x).abs()).fold(0.0, f64::max);
        let w = worst(&x);
        if w > self.lambda {
            let mut s = self.lambda / w;
            // rounding can leave |⟨A_i, s x⟩| a hair above λ
            let base = x.clone();
            loop {
                x.iter_mut().zip(&base).for_each(|(v, b)| *v = s * b);
                if worst(&x) <= self.lambda {
                    break;
                }
                s *= 1.0 - 4.0 * f64::EPSILON;
            }
        }
        Ok(x)
    }
}

/// Largest singular value of a column block.
pub fn spectral_norm(cols: &[SparseVec]) -> f64 {
    let k = cols.len();
    let gram = DMatrix::from_fn(k, k, |a, b| cols[a].sparse_dot(&cols[b]));
    let eig = SymmetricEigen::new(gram).eigenvalues;
    eig.iter().cloned().fold(0.0, f64::max).sqrt()
}

/// Population variance of a sparse column with `n` rows.
pub fn column_variance(c: &SparseVec, n: usize) -> f64 {
    let mean = c.values().iter().sum::<f64>() / n as f64;
    c.norm_sq() / n as f64 - mean * mean
}

/// Group lasso `min_w ½‖Aw + β − b‖² + λ Σ_G ‖w_G‖` through its dual
/// `min_x ½‖x + b‖² − ½‖b‖²` s.t. `‖A_Gᵀ x‖ ≤ λ`.
#[derive(Debug, Clone)]
pub struct GroupDual {
    pub problem: PiecewiseProblem,
    pub data: SparseColumnMatrix,
    pub labels: Vec<f64>,
    pub groups: Vec<Vec<usize>>,
    /// Per-group column scale applied by standardization.
    pub scales: Vec<f64>,
    pub lambda: f64,
    pub bias: bool,
}

/// Scales each group so its column variances sum to 1.
pub fn standardize_groups(data: &SparseColumnMatrix, groups: &[Vec<usize>]) -> (SparseColumnMatrix, Vec<f64>) {
    let mut cols: Vec<SparseVec> = data.columns().to_vec();
    let mut scales = Vec::with_capacity(groups.len());
    for g in groups {
        let total: f64 = g.iter().map(|&j| column_variance(&cols[j], data.n_rows())).sum();
        let s = if total > 0.0 { 1.0 / total.sqrt() } else { 1.0 };
        for &j in g {
            cols[j] = cols[j].scaled(s);
        }
        scales.push(s);
    }
    (SparseColumnMatrix::new(data.n_rows(), cols).expect("same shape"), scales)
}

fn check_groups(m: usize, groups: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; m];
    for (gi, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return usage(format!("group {gi} is empty"));
        }
        for &j in g {
            if j >= m || seen[j] {
                return usage(format!("group {gi}: feature {j} is out of range or repeated"));
            }
            seen[j] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return usage("groups must cover every feature");
    }
    Ok(())
}

/// `max_G ‖A_Gᵀ x₀‖` on already standardized data.
pub fn group_lambda_max(data: &SparseColumnMatrix, labels: &[f64], groups: &[Vec<usize>], bias: bool) -> f64 {
    let mean = if bias { labels.iter().sum::<f64>() / labels.len() as f64 } else { 0.0 };
    let x0: Vec<f64> = labels.iter().map(|b| mean - b).collect();
    groups
        .iter()
        .map(|g| norm(&g.iter().map(|&j| data.column(j).dot(&x0)).collect::<Vec<_>>()))
        .fold(0.0, f64::max)
}

/// `data` is used as given; call [`standardize_groups`] first for the
/// standard preprocessing.
pub fn build_group_dual(
    data: &SparseColumnMatrix,
    labels: &[f64],
    groups: Vec<Vec<usize>>,
    lambda: f64,
    bias: bool,
) -> Result<GroupDual> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return usage("lambda must be positive");
    }
    check_data(data, labels)?;
    check_groups(data.n_cols(), &groups)?;
    let mut terms = Vec::with_capacity(groups.len() + 1);
    for g in &groups {
        let cols: Vec<SparseVec> = g.iter().map(|&j| data.column(j).clone()).collect();
        let lipschitz = spectral_norm(&cols);
        terms.push(PiecewiseTerm::new(TermKind::GroupBall { bound: lambda, lipschitz }, Support::Group(cols))?);
    }
    if bias {
        terms.push(PiecewiseTerm::new(TermKind::Hyperplane { b: 0.0 }, Support::Vector(ones(data.n_rows())))?);
    }
    let losses = make_losses(labels, LossKind::Squared)?;
    let problem = PiecewiseProblem::new(dual_psi(losses, labels, LossKind::Squared), terms)?;
    let scales = vec![1.0; groups.len()];
    Ok(GroupDual { problem, data: data.clone(), labels: labels.to_vec(), groups, scales, lambda, bias })
}

impl GroupDual {
    /// `(w, β)` from minorant slopes, in the order of the data's columns.
    pub fn primal_from_slopes(&self, slopes: &[f64]) -> (Vec<f64>, f64) {
        let mut w = vec![0.0; self.data.n_cols()];
        for (gi, g) in self.groups.iter().enumerate() {
            let r = self.problem.proj_range(gi);
            for (k, &j) in g.iter().enumerate() {
                w[j] = -slopes[r.start + k];
            }
        }
        let beta = if self.bias { -slopes[self.problem.proj_range(self.groups.len()).start] } else { 0.0 };
        (w, beta)
    }

    pub fn primal_objective(&self, w: &[f64], beta: f64) -> f64 {
        let v = self.data.mul_vec(w);
        let loss: f64 = v.iter().zip(&self.labels).map(|(vj, b)| 0.5 * (vj + beta - b).powi(2)).sum();
        let reg: f64 = self.groups.iter().map(|g| norm(&g.iter().map(|&j| w[j]).collect::<Vec<_>>())).sum();
        loss + self.lambda * reg
    }

    /// Fraction of groups with a nonzero block.
    pub fn active_groups(&self, w: &[f64]) -> usize {
        self.groups.iter().filter(|g| g.iter().any(|&j| w[j] != 0.0)).count()
    }
}

/// `min_x ½‖x‖² + C Σ_i max(0, 1 − b_i⟨a_i, x⟩)` (or the squared hinge).
#[derive(Debug, Clone)]
pub struct SvmPrimal {
    pub problem: PiecewiseProblem,
    pub c: f64,
}

/// `rows` are the examples `a_i` over `n_features` coordinates.
pub fn build_svm_primal(rows: &[SparseVec], labels: &[f64], n_features: usize, c: f64, squared: bool) -> Result<SvmPrimal> {
    if !(c > 0.0 && c.is_finite()) {
        return usage("C must be positive");
    }
    if rows.len() != labels.len() {
        return usage(format!("{} labels for {} examples", labels.len(), rows.len()));
    }
    if let Some(i) = labels.iter().position(|b| b.abs() != 1.0) {
        return usage(format!("label {i} is not in {{-1, +1}}"));
    }
    let terms = rows
        .iter()
        .zip(labels)
        .map(|(a, &label)| {
            let kind = if squared {
                TermKind::SquaredHinge { label, weight: c }
            } else {
                TermKind::Hinge { label, weight: c }
            };
            PiecewiseTerm::new(kind, Support::Vector(a.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmPrimal { problem: PiecewiseProblem::new(Psi::half_norm_sq(n_features), terms)?, c })
}

impl SvmPrimal {
    /// Dual objective `D(α) = Σ α_i − ½‖Σ α_i b_i a_i‖²` (hinge).
    pub fn dual_objective(&self, alpha: &[f64]) -> f64 {
        let mut x = vec![0.0; self.problem.dim()];
        for (t, a) in self.problem.terms().iter().zip(alpha) {
            if let TermKind::Hinge { label, .. } | TermKind::SquaredHinge { label, .. } = *t.kind() {
                t.direction().unwrap().axpy_into(a * label, &mut x);
            }
        }
        let mut d = alpha.iter().sum::<f64>() - 0.5 * crate::linalg::norm_sq(&x);
        for (t, a) in self.problem.terms().iter().zip(alpha) {
            if let TermKind::SquaredHinge { weight, .. } = *t.kind() {
                d -= a * a / (2.0 * weight);
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_loss_psi_is_quadratic() {
        let data = SparseColumnMatrix::from_dense_columns(2, &[vec![1.0, 0.0]]).unwrap();
        let l1 = build_l1_dual(&data, &[1.0, 2.0], LossKind::Squared, 0.5, false).unwrap();
        let x = [0.3, -0.2];
        let direct: f64 = [1.0, 2.0].iter().zip(&x).map(|(b, v)| 0.5 * (v + b) * (v + b) - 0.5 * b * b).sum();
        assert!((l1.problem.psi().value(&x) - direct).abs() < 1e-15);
        assert!(build_l1_dual(&data, &[1.0, 2.0], LossKind::Squared, 0.0, false).is_err());
    }

    #[test]
    fn spectral_norm_of_orthogonal_block() {
        let a = SparseVec::new(vec![0], vec![3.0]).unwrap();
        let b = SparseVec::new(vec![1], vec![4.0]).unwrap();
        assert!((spectral_norm(&[a, b]) - 4.0).abs() < 1e-12);
    }
}
