//! Quadratic lower-bound certificates `f^LB`.
//!
//! `f^LB(x) = ψ(z) + ⟨g_ψ, x − z⟩ + ½‖x − z‖² + Σ_i ℓ_i(x)` where each `ℓ_i` is
//! an affine minorant of `φ_{i,t}`, stored in projection coordinates:
//! `ℓ_i(x) = ⟨slope_i, proj_i(x)⟩ + intercept_i`. Its gradient is
//! `g_i = Σ_k slope_ik a_ik` and its value at the anchor is `ℓ_i(z) ≤ φ_{i,t}(z)`,
//! with equality for tangent minorants.

use crate::linalg::{dot, norm_sq, DenseVector, SparseVec};
use crate::piecewise::{PieceShape, PiecewiseProblem};

/// Affine minorants of all terms in the problem's flat projection layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TermMinorants {
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
}

impl TermMinorants {
    pub fn zeros(problem: &PiecewiseProblem) -> Self {
        Self { slopes: vec![0.0; problem.proj_len()], intercepts: vec![0.0; problem.n_terms()] }
    }

    pub fn slope<'a>(&'a self, problem: &PiecewiseProblem, i: usize) -> &'a [f64] {
        &self.slopes[problem.proj_range(i)]
    }

    /// Sets term `i` to a piece's own affine form (the piece is tangent to itself).
    pub fn set_piece(&mut self, problem: &PiecewiseProblem, i: usize, shape: PieceShape) {
        let r = problem.proj_range(i);
        match shape {
            PieceShape::Linear { slope, intercept } => {
                self.slopes[r.start] = slope;
                self.intercepts[i] = intercept;
            }
            _ => {
                self.slopes[r].iter_mut().for_each(|s| *s = 0.0);
                self.intercepts[i] = 0.0;
            }
        }
    }

    /// C3: is `ℓ_i ≤ piece` everywhere? Affine functions of the same
    /// projection compare coefficient-wise.
    pub fn dominated_by(&self, problem: &PiecewiseProblem, i: usize, shape: PieceShape) -> bool {
        let s = self.slope(problem, i);
        let c = self.intercepts[i];
        match shape {
            PieceShape::Zero => s.iter().all(|v| *v == 0.0) && c <= 0.0,
            PieceShape::Linear { slope, intercept } => s.len() == 1 && s[0] == slope && intercept >= c,
            PieceShape::Nonlinear | PieceShape::Infinite => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundModel {
    pub anchor: DenseVector,
    pub psi_value: f64,
    pub g_psi: DenseVector,
    pub minorants: TermMinorants,
    g_terms: DenseVector,
    terms_at_anchor: f64,
}

impl LowerBoundModel {
    /// Builds the model with `g_ψ = ∇ψ(z)`.
    pub fn new(problem: &PiecewiseProblem, anchor: DenseVector, minorants: TermMinorants) -> Self {
        let psi_value = problem.psi().value(&anchor);
        let g_psi = problem.psi().gradient(&anchor);
        Self::with_psi(problem, anchor, psi_value, g_psi, minorants)
    }

    pub fn with_psi(
        problem: &PiecewiseProblem,
        anchor: DenseVector,
        psi_value: f64,
        g_psi: DenseVector,
        minorants: TermMinorants,
    ) -> Self {
        let mut g_terms = vec![0.0; anchor.len()];
        let mut terms_at_anchor: f64 = minorants.intercepts.iter().sum();
        for (i, t) in problem.terms().iter().enumerate() {
            let s = minorants.slope(problem, i);
            if s.iter().any(|v| *v != 0.0) {
                t.add_scaled_support(s, &mut g_terms);
                terms_at_anchor += dot(s, &t.project(&anchor));
            }
        }
        Self { anchor, psi_value, g_psi, minorants, g_terms, terms_at_anchor }
    }

    /// `g_ψ + Σ g_i`
    pub fn total_gradient(&self) -> DenseVector {
        self.g_psi.iter().zip(&self.g_terms).map(|(a, b)| a + b).collect()
    }

    /// `Σ g_i`
    pub fn terms_gradient(&self) -> &[f64] {
        &self.g_terms
    }

    /// `g_i` as a sparse vector.
    pub fn term_gradient(&self, problem: &PiecewiseProblem, i: usize) -> SparseVec {
        let mut g = vec![0.0; self.anchor.len()];
        problem.term(i).add_scaled_support(self.minorants.slope(problem, i), &mut g);
        SparseVec::from_dense(&g)
    }

    /// `Σ ℓ_i(z)`
    pub fn terms_at_anchor(&self) -> f64 {
        self.terms_at_anchor
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for j in 0..x.len() {
            let dx = x[j] - self.anchor[j];
            lin += (self.g_psi[j] + self.g_terms[j]) * dx;
            quad += dx * dx;
        }
        self.psi_value + self.terms_at_anchor + lin + 0.5 * quad
    }

    pub fn minimizer(&self) -> DenseVector {
        minimize_lower_bound(self)
    }

    /// `f^LB(z) − ½‖g_ψ + Σ g_i‖²`
    pub fn min_value(&self) -> f64 {
        self.psi_value + self.terms_at_anchor - 0.5 * norm_sq(&self.total_gradient())
    }
}

/// `z − (g_ψ + Σ g_i)`
pub fn minimize_lower_bound(lb: &LowerBoundModel) -> DenseVector {
    lb.anchor
        .iter()
        .zip(lb.g_psi.iter().zip(&lb.g_terms))
        .map(|(z, (a, b))| z - a - b)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi::Psi;

    #[test]
    fn quadratic_minimizer() {
        let p = PiecewiseProblem::new(Psi::half_norm_sq(2), vec![]).unwrap();
        let lb = LowerBoundModel::with_psi(&p, vec![0.0, 0.0], 0.0, vec![1.0, 0.0], TermMinorants::zeros(&p));
        assert_eq!(lb.minimizer(), vec![-1.0, 0.0]);
        assert_eq!(lb.min_value(), -0.5);
        assert_eq!(lb.value(&lb.minimizer()), lb.min_value());
        let exact = LowerBoundModel::new(&p, vec![0.0, 0.0], TermMinorants::zeros(&p));
        assert_eq!(exact.minimizer(), vec![0.0, 0.0]);
    }
}
