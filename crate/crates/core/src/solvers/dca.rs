//! Dual coordinate ascent for hinge and squared-hinge terms with a quadratic ψ.
//!
//! Each loss term `w·max(0, 1 − b u)` has dual variable α ∈ [0, w]; the primal
//! point is `x = c − a⋆ + Σ α_i b_i a_i`.

use super::{finish_certificate, Certificate, SubproblemSolver};
use crate::error::{usage, BlitzError, Result};
use crate::linalg::DenseVector;
use crate::minorant::{LowerBoundModel, TermMinorants};
use crate::piecewise::{PieceShape, PiecewiseProblem, RelaxedObjective, Slot, TermKind};
use crate::psi::PsiKind;

#[derive(Debug, Clone)]
pub struct Dca {
    alpha: Vec<f64>,
    slopes: Vec<f64>,
    x: DenseVector,
    a_star: DenseVector,
    working: Vec<usize>,
    in_w: Vec<bool>,
}

fn label_weight(kind: &TermKind) -> (f64, f64) {
    match *kind {
        TermKind::Hinge { label, weight } | TermKind::SquaredHinge { label, weight } => (label, weight),
        _ => (0.0, 0.0),
    }
}

impl Dca {
    pub fn new(problem: &PiecewiseProblem) -> Result<Self> {
        let PsiKind::Quadratic { center, .. } = problem.psi().kind() else {
            return usage("dual coordinate ascent needs a quadratic ψ");
        };
        if let Some(i) = problem
            .terms()
            .iter()
            .position(|t| !matches!(t.kind(), TermKind::Hinge { .. } | TermKind::SquaredHinge { .. }))
        {
            return usage(format!("term {i} is not a hinge term"));
        }
        Ok(Self {
            alpha: vec![0.0; problem.n_terms()],
            slopes: vec![0.0; problem.n_terms()],
            x: center.clone(),
            a_star: vec![0.0; problem.dim()],
            working: Vec::new(),
            in_w: vec![false; problem.n_terms()],
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn primal(&self) -> &[f64] {
        &self.x
    }

    fn set_alpha(&mut self, problem: &PiecewiseProblem, i: usize, new: f64) {
        let old = self.alpha[i];
        if new != old {
            let (label, _) = label_weight(problem.term(i).kind());
            problem.term(i).direction().unwrap().axpy_into((new - old) * label, &mut self.x);
            self.alpha[i] = new;
            self.slopes[i] = -new * label;
        }
    }
}

impl SubproblemSolver for Dca {
    fn name(&self) -> &'static str {
        "dca"
    }

    fn set_working_set(&mut self, problem: &PiecewiseProblem, relaxed: &RelaxedObjective) -> Result<()> {
        if !relaxed.other.is_empty() {
            return usage("nonlinear pieces outside the working set are not supported");
        }
        // invariant: x = c − a⋆ + Σ_{i∈W} α_i b_i a_i; pinned α live in a⋆
        for (i, slot) in relaxed.assignment.iter().enumerate() {
            let t = problem.term(i);
            let (label, weight) = label_weight(t.kind());
            let now_in = *slot == Slot::Full;
            if self.in_w[i] && !now_in && self.alpha[i] != 0.0 {
                t.direction().unwrap().axpy_into(-self.alpha[i] * label, &mut self.x);
            }
            if !self.in_w[i] && now_in && self.alpha[i] != 0.0 {
                t.direction().unwrap().axpy_into(self.alpha[i] * label, &mut self.x);
            }
            if let Slot::Piece(k) = *slot {
                // the loss piece pins α at the box top, the flat piece at 0
                self.alpha[i] = if t.piece_shape(k) == PieceShape::Zero { 0.0 } else { weight };
                self.slopes[i] = -self.alpha[i] * label;
            }
            self.in_w[i] = now_in;
        }
        for j in 0..self.x.len() {
            self.x[j] += self.a_star[j] - relaxed.a_star[j];
        }
        self.a_star.clone_from(&relaxed.a_star);
        self.working.clone_from(&relaxed.working);
        Ok(())
    }

    fn pass(&mut self, problem: &PiecewiseProblem) -> Result<u64> {
        let mut work = 0;
        for idx in 0..self.working.len() {
            let i = self.working[idx];
            let t = problem.term(i);
            let a = t.direction().unwrap();
            let q = a.norm_sq();
            let u = a.dot(&self.x);
            let old = self.alpha[i];
            let new = match *t.kind() {
                TermKind::Hinge { label, weight } => {
                    (old + (1.0 - label * u) / (label * label * q)).clamp(0.0, weight)
                }
                TermKind::SquaredHinge { label, weight } => {
                    (old + (1.0 - label * u - old / weight) / (label * label * q + 1.0 / weight)).max(0.0)
                }
                _ => old,
            };
            self.set_alpha(problem, i, new);
            work += a.nnz() as u64;
        }
        Ok(work)
    }

    fn certificate(&self, problem: &PiecewiseProblem, relaxed: &RelaxedObjective, _anchor: &[f64]) -> Result<Certificate> {
        let mut m = TermMinorants::zeros(problem);
        for &i in &relaxed.working {
            let a = self.alpha[i];
            m.slopes[i] = self.slopes[i];
            m.intercepts[i] = match *problem.term(i).kind() {
                TermKind::SquaredHinge { weight, .. } => a - a * a / (2.0 * weight),
                _ => a,
            };
        }
        for (i, slot) in relaxed.assignment.iter().enumerate() {
            if let Slot::Piece(k) = *slot {
                m.set_piece(problem, i, problem.term(i).piece_shape(k));
            }
        }
        let z = self.x.clone();
        let fz = relaxed.evaluate(problem, &z)?;
        let lb = LowerBoundModel::new(problem, z.clone(), m);
        finish_certificate(z, fz, lb)
            .ok_or_else(|| BlitzError::Solver { iteration: 0, message: "invalid certificate".into() })
    }

    fn slopes(&self) -> &[f64] {
        &self.slopes
    }
}
