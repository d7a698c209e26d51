//! The strongly convex component ψ.

use crate::error::{usage, Result};
use crate::linalg::{dot, DenseVector};
use crate::losses::LossSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum PsiKind {
    /// `½‖x − center‖² + constant`
    Quadratic { center: DenseVector, constant: f64 },
    /// `Σ_j L_j*(x_j)`
    Conjugate { losses: Vec<LossSpec> },
}

/// `ψ(x) = scale · base(x)` where `base` is 1-strongly convex, so `scale` is
/// the strong-convexity constant γ. Problems normalize `scale` to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Psi {
    kind: PsiKind,
    scale: f64,
}

impl Psi {
    pub fn new(kind: PsiKind, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return usage("strong convexity constant must be positive");
        }
        if let PsiKind::Quadratic { center, constant } = &kind {
            if center.iter().any(|v| !v.is_finite()) || !constant.is_finite() {
                return usage("quadratic center must be finite");
            }
        }
        Ok(Self { kind, scale: gamma })
    }

    /// `½‖x‖²`
    pub fn half_norm_sq(n: usize) -> Self {
        Self { kind: PsiKind::Quadratic { center: vec![0.0; n], constant: 0.0 }, scale: 1.0 }
    }

    pub fn conjugate_sum(losses: Vec<LossSpec>) -> Self {
        Self { kind: PsiKind::Conjugate { losses }, scale: 1.0 }
    }

    pub fn kind(&self) -> &PsiKind {
        &self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.scale
    }

    pub(crate) fn normalized(mut self) -> Self {
        self.scale = 1.0;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            PsiKind::Quadratic { center, .. } => center.len(),
            PsiKind::Conjugate { losses } => losses.len(),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, PsiKind::Quadratic { .. })
    }

    /// Closed domain of coordinate `j`.
    pub fn coord_domain(&self, j: usize) -> (f64, f64) {
        match &self.kind {
            PsiKind::Quadratic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            PsiKind::Conjugate { losses } => losses[j].conjugate_domain(),
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        match &self.kind {
            PsiKind::Quadratic { .. } => true,
            PsiKind::Conjugate { losses } => {
                losses.iter().zip(x).all(|(l, v)| l.in_conjugate_domain(*v))
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let base = match &self.kind {
            PsiKind::Quadratic { center, constant } => {
                0.5 * x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() + constant
            }
            PsiKind::Conjugate { losses } => {
                losses.iter().zip(x).map(|(l, v)| l.conjugate(*v)).sum()
            }
        };
        self.scale * base
    }

    pub fn gradient(&self, x: &[f64]) -> DenseVector {
        match &self.kind {
            PsiKind::Quadratic { center, .. } => {
                x.iter().zip(center).map(|(a, c)| self.scale * (a - c)).collect()
            }
            PsiKind::Conjugate { losses } => losses
                .iter()
                .zip(x)
                .map(|(l, v)| self.scale * l.conjugate_derivative(*v))
                .collect(),
        }
    }

    /// Unconstrained minimizer of ψ.
    pub fn minimizer(&self) -> DenseVector {
        match &self.kind {
            PsiKind::Quadratic { center, .. } => center.clone(),
            PsiKind::Conjugate { losses } => losses.iter().map(|l| l.derivative(0.0)).collect(),
        }
    }

    /// Value of `ψ(y + s d)` as a quadratic `a2 s² + a1 s + a0` (quadratic ψ only).
    pub fn segment_quadratic(&self, y: &[f64], d: &[f64]) -> Option<(f64, f64, f64)> {
        match &self.kind {
            PsiKind::Quadratic { center, constant } => {
                let r: Vec<f64> = y.iter().zip(center).map(|(a, c)| a - c).collect();
                Some((
                    0.5 * self.scale * dot(d, d),
                    self.scale * dot(&r, d),
                    self.scale * (0.5 * dot(&r, &r) + constant),
                ))
            }
            PsiKind::Conjugate { .. } => None,
        }
    }

    /// Right derivative of `s ↦ ψ(y + s d)`.
    pub fn segment_derivative(&self, y: &[f64], d: &[f64], s: f64) -> f64 {
        match &self.kind {
            PsiKind::Quadratic { center, .. } => {
                self.scale
                    * y.iter()
                        .zip(d)
                        .zip(center)
                        .map(|((a, di), c)| di * (a + s * di - c))
                        .sum::<f64>()
            }
            PsiKind::Conjugate { losses } => {
                self.scale
                    * losses
                        .iter()
                        .zip(y.iter().zip(d))
                        .filter(|(_, (_, di))| **di != 0.0)
                        .map(|(l, (a, di))| di * l.conjugate_derivative(a + s * di))
                        .sum::<f64>()
            }
        }
    }

    /// Largest `s ∈ [0, 1]` with `y + s d` inside the closed domain (y inside).
    pub fn segment_domain_limit(&self, y: &[f64], d: &[f64]) -> f64 {
        let mut s_max: f64 = 1.0;
        if let PsiKind::Conjugate { losses } = &self.kind {
            for (l, (a, di)) in losses.iter().zip(y.iter().zip(d)) {
                let (lo, hi) = l.conjugate_domain();
                if *di > 0.0 && hi.is_finite() {
                    s_max = s_max.min(((hi - a) / di).max(0.0));
                } else if *di < 0.0 && lo.is_finite() {
                    s_max = s_max.min(((lo - a) / di).max(0.0));
                }
            }
        }
        s_max
    }
}
