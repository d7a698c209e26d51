//! Safe screening: fix a term to one of its pieces when a region known to
//! contain the minimizer lies inside that piece's subdomain.
//!
//! Two regions are provided. The Blitz ball comes from a 1-strongly convex
//! lower bound `f₀ ≤ f` with minimizer `x₀` and a point `y₀` with `f(y₀)`
//! finite: center `½(x₀+y₀)`, radius `√(Δ₀ − ¼‖x₀−y₀‖²)` where
//! `Δ₀ = f(y₀) − f₀(x₀)`. The gap-safe ball is centered at `y₀` with radius
//! `√(2Δ₀)` and always contains the Blitz ball.

use crate::error::{usage, Result};
use crate::linalg::{dist, lerp, DenseVector};
use crate::losses::LossKind;
use crate::minorant::{LowerBoundModel, TermMinorants};
use crate::parallel::map_indexed;
use crate::piecewise::{Assignment, PieceShape, PiecewiseProblem, PiecewiseTerm, Slot};
use crate::problems::L1Dual;
use crate::psi::{Psi, PsiKind};

/// Relative rounding allowance added to computed gaps.
pub const GAP_ROUNDING: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Blitz,
    GapSafe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeRegion {
    pub center: DenseVector,
    pub radius: f64,
    pub kind: RegionKind,
}

impl SafeRegion {
    /// Ball from `(x₀, y₀, Δ₀)`. Rounding can push `Δ₀ − ¼d²` slightly below
    /// zero; that is clamped, anything larger is a usage error.
    pub fn blitz(x0: &[f64], y0: &[f64], gap: f64) -> Result<Self> {
        if x0.len() != y0.len() {
            return usage("x0 and y0 differ in dimension");
        }
        if !(gap >= 0.0) {
            return usage("the gap must be nonnegative");
        }
        let d = dist(x0, y0);
        let r2 = gap - 0.25 * d * d;
        if r2 < -1e-9 * (1.0 + gap) {
            return usage("the gap is smaller than ¼‖x0 − y0‖²; f0 is not a valid bound");
        }
        Ok(Self { center: lerp(x0, y0, 0.5), radius: r2.max(0.0).sqrt(), kind: RegionKind::Blitz })
    }

    /// Region from a certificate `(x, f^LB(x))` of the current objective and a
    /// point `y` with `f(y)` finite. `x` minimizes a valid 1-strongly convex
    /// bound, so `Δ ≥ ¼‖x−y‖²` up to rounding, which is clamped. The gap is
    /// widened by the rounding error of `f(y) − f^LB(x)`: near the optimum it
    /// can round to zero while terms sit on their boundaries.
    pub fn from_certificate(x: &[f64], lb_value: f64, y: &[f64], f_y: f64, kind: RegionKind) -> Result<Self> {
        let gap = (f_y - lb_value).max(0.0) + GAP_ROUNDING * (f_y.abs() + lb_value.abs());
        match kind {
            RegionKind::Blitz => {
                let d = dist(x, y);
                let r2 = (gap - 0.25 * d * d).max(0.0);
                Ok(Self { center: lerp(x, y, 0.5), radius: r2.sqrt(), kind })
            }
            RegionKind::GapSafe => Self::gap_safe(y, gap),
        }
    }

    pub fn gap_safe(y0: &[f64], gap: f64) -> Result<Self> {
        if !(gap >= 0.0) {
            return usage("the gap must be nonnegative");
        }
        Ok(Self { center: y0.to_vec(), radius: (2.0 * gap).sqrt(), kind: RegionKind::GapSafe })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        dist(p, &self.center) <= self.radius
    }
}

/// `f₀(x) = f(y₀) + ⟨g₀, x−y₀⟩ + ½‖x−y₀‖²` and its minimizer `x₀ = y₀ − g₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientBound {
    pub y0: DenseVector,
    pub f_y0: f64,
    pub g0: DenseVector,
    pub x0: DenseVector,
}

impl SubgradientBound {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for j in 0..x.len() {
            let d = x[j] - self.y0[j];
            lin += self.g0[j] * d;
            quad += d * d;
        }
        self.f_y0 + lin + 0.5 * quad
    }

    /// `f(y₀) − f₀(x₀) = ½‖g₀‖²`
    pub fn gap(&self) -> f64 {
        0.5 * crate::linalg::norm_sq(&self.g0)
    }

    pub fn region(&self, kind: RegionKind) -> Result<SafeRegion> {
        match kind {
            RegionKind::Blitz => SafeRegion::blitz(&self.x0, &self.y0, self.gap()),
            RegionKind::GapSafe => SafeRegion::gap_safe(&self.y0, self.gap()),
        }
    }
}

pub fn build_lower_bound(problem: &PiecewiseProblem, y0: &[f64], g0: &[f64]) -> Result<SubgradientBound> {
    problem.check_dim(y0)?;
    problem.check_dim(g0)?;
    let f_y0 = problem.evaluate_full(y0)?;
    if !f_y0.is_finite() {
        return usage("f is not finite at y0");
    }
    let x0 = y0.iter().zip(g0).map(|(y, g)| y - g).collect();
    Ok(SubgradientBound { y0: y0.to_vec(), f_y0, g0: g0.to_vec(), x0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScreenDecision {
    Retain,
    FixPiece(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenOutcome {
    pub decisions: Vec<ScreenDecision>,
    pub screened: usize,
}

impl ScreenOutcome {
    fn from_decisions(decisions: Vec<ScreenDecision>) -> Self {
        let screened = decisions.iter().filter(|d| matches!(d, ScreenDecision::FixPiece(_))).count();
        Self { decisions, screened }
    }

    pub fn screened_terms(&self) -> Vec<usize> {
        self.decisions
            .iter()
            .enumerate()
            .filter(|(_, d)| matches!(d, ScreenDecision::FixPiece(_)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_screened(&self, i: usize) -> bool {
        matches!(self.decisions[i], ScreenDecision::FixPiece(_))
    }

    /// The screened objective as an assignment.
    pub fn assignment(&self) -> Assignment {
        self.decisions
            .iter()
            .map(|d| match *d {
                ScreenDecision::Retain => Slot::Full,
                ScreenDecision::FixPiece(k) => Slot::Piece(k),
            })
            .collect()
    }

    /// Moves newly screened terms with a zero or linear piece out of
    /// `assignment`; returns how many changed. Terms fixed to a nonlinear
    /// piece stay in full, which is also safe.
    pub fn apply_linear(&self, problem: &PiecewiseProblem, assignment: &mut Assignment) -> usize {
        let mut changed = 0;
        for (i, d) in self.decisions.iter().enumerate() {
            if let (ScreenDecision::FixPiece(k), Slot::Full) = (*d, assignment[i]) {
                if matches!(problem.term(i).piece_shape(k), PieceShape::Zero | PieceShape::Linear { .. }) {
                    assignment[i] = Slot::Piece(k);
                    changed += 1;
                }
            }
        }
        changed
    }
}

/// For each term, `k = π_i(center)`; fix piece `k` when the region lies
/// strictly inside its subdomain. Permanent terms and infinite pieces are
/// always retained.
pub fn blitz_screen(problem: &PiecewiseProblem, region: &SafeRegion) -> Result<ScreenOutcome> {
    problem.check_dim(&region.center)?;
    let decisions = map_indexed(problem.exec(), problem.n_terms(), |i| {
        let t = problem.term(i);
        if t.is_permanent() {
            return ScreenDecision::Retain;
        }
        let uc = t.project(&region.center);
        let k = t.partition_from_proj(&uc);
        if matches!(t.piece_shape(k), PieceShape::Infinite) {
            return ScreenDecision::Retain;
        }
        if t.piece_contains_ball(k, &uc, region.radius) {
            ScreenDecision::FixPiece(k)
        } else {
            ScreenDecision::Retain
        }
    });
    Ok(ScreenOutcome::from_decisions(decisions))
}

/// Safe region for an L1-regularized loss from a primal point `(ω₀, β₀)`:
/// `x₀ = L′(Aω₀ + β₀)`, `y₀ = min(1, λ / max_i |⟨A_i, x₀⟩|) · x₀` (recentered
/// first when a bias is present), `Δ₀ = P(ω₀, β₀) + f(y₀)`.
pub fn l1_safe_region(l1: &L1Dual, omega0: &[f64], beta0: f64, kind: RegionKind) -> Result<SafeRegion> {
    if omega0.len() != l1.n_features() {
        return usage("omega0 length differs from the feature count");
    }
    let x0 = l1.dual_from_primal(omega0, beta0);
    let y0 = l1.feasible_dual(&x0)?;
    let f_y0 = l1.problem.evaluate_full(&y0)?;
    if !f_y0.is_finite() {
        return usage("scaled dual point is infeasible");
    }
    // the bound built from (ω₀, β₀) has minimizer x₀ and value −P(ω₀, β₀)
    SafeRegion::from_certificate(&x0, -l1.primal_objective(omega0, beta0), &y0, f_y0, kind)
}

/// Features with `ω⋆_i = 0` certified from `(ω₀, β₀)`:
/// screened when `λ − |⟨A_i, c⟩| > ‖A_i‖ r`.
pub fn screen_l1(l1: &L1Dual, omega0: &[f64], beta0: f64) -> Result<ScreenOutcome> {
    let region = l1_safe_region(l1, omega0, beta0, RegionKind::Blitz)?;
    blitz_screen(&l1.problem, &region)
}

/// The primal lower bound used by [`l1_safe_region`] as a model in the dual,
/// anchored at `x₀`. Only valid when `x₀` lies in the interior of ψ's domain.
pub fn l1_lower_bound(l1: &L1Dual, omega0: &[f64], beta0: f64) -> Result<LowerBoundModel> {
    let x0 = l1.dual_from_primal(omega0, beta0);
    if l1.losses.iter().any(|l| l.kind == LossKind::Logistic) && !l1.problem.psi().in_domain(&x0) {
        return usage("x0 is outside the conjugate domain");
    }
    let mut m = TermMinorants::zeros(&l1.problem);
    for (i, w) in omega0.iter().enumerate() {
        m.slopes[i] = -w;
        m.intercepts[i] = -l1.lambda * w.abs();
    }
    if l1.bias {
        m.slopes[l1.n_features()] = -beta0;
    }
    Ok(LowerBoundModel::new(&l1.problem, x0, m))
}

/// The screened objective as a problem of its own: terms fixed to a zero
/// piece are dropped, linear pieces are folded into a quadratic ψ, and terms
/// fixed to any other piece are kept in full. Returns the problem and the
/// original index of each kept term.
pub fn screened_problem(problem: &PiecewiseProblem, assignment: &[Slot]) -> Result<(PiecewiseProblem, Vec<usize>)> {
    if assignment.len() != problem.n_terms() {
        return usage("assignment length differs from the number of terms");
    }
    let mut shift = vec![0.0; problem.dim()];
    let mut offset = 0.0;
    let mut terms: Vec<PiecewiseTerm> = Vec::new();
    let mut kept = Vec::new();
    for (i, slot) in assignment.iter().enumerate() {
        let t = problem.term(i);
        match *slot {
            Slot::Piece(k) if !t.is_permanent() => match t.piece_shape(k) {
                PieceShape::Zero => {}
                PieceShape::Linear { slope, intercept } => {
                    t.add_scaled_support(&[slope], &mut shift);
                    offset += intercept;
                }
                _ => {
                    terms.push(t.clone());
                    kept.push(i);
                }
            },
            _ => {
                terms.push(t.clone());
                kept.push(i);
            }
        }
    }
    let psi = if shift.iter().all(|v| *v == 0.0) && offset == 0.0 {
        problem.psi().clone()
    } else {
        let PsiKind::Quadratic { center, constant } = problem.psi().kind() else {
            return usage("linear pieces can only be folded into a quadratic ψ");
        };
        // ½‖x − c‖² + ⟨s, x⟩ = ½‖x − (c − s)‖² + ⟨s, c⟩ − ½‖s‖²
        let new_center: Vec<f64> = center.iter().zip(&shift).map(|(c, s)| c - s).collect();
        let constant = constant + offset + crate::linalg::dot(&shift, center) - 0.5 * crate::linalg::norm_sq(&shift);
        Psi::new(PsiKind::Quadratic { center: new_center, constant }, 1.0)?
    };
    Ok((PiecewiseProblem::new(psi, terms)?.with_exec(problem.exec()), kept))
}
