//! `y_t ← argmin_{[y_{t-1}, z_t]} f` and the extreme-feasible-point helper.

use crate::error::{usage, Result};
use crate::linalg::{lerp, DenseVector};
use crate::piecewise::{PiecewiseProblem, TermKind};
use crate::solvers::feasible_fraction;

const SEGMENT_TOL: f64 = 1e-10;

/// `y + α (z − y)` with `α = min over violated i of (b_i − ⟨a_i,y⟩)/(⟨a_i,z⟩ − ⟨a_i,y⟩)`,
/// `α = 1` when `z` satisfies every indicator.
pub fn extreme_feasible_point(problem: &PiecewiseProblem, y: &[f64], z: &[f64]) -> Result<DenseVector> {
    problem.check_dim(y)?;
    problem.check_dim(z)?;
    let (py, pz) = (problem.project_all(y), problem.project_all(z));
    let alpha = feasible_fraction(problem, &indicator_terms(problem), &py, &pz);
    Ok(lerp(y, z, alpha))
}

fn indicator_terms(problem: &PiecewiseProblem) -> Vec<usize> {
    (0..problem.n_terms()).filter(|&i| problem.term(i).is_indicator()).collect()
}

/// 1-D minimizer of f on the segment from `y_prev` (s = 0) to `z` (s = 1).
pub fn line_search_y(problem: &PiecewiseProblem, y_prev: &[f64], z: &[f64]) -> Result<DenseVector> {
    problem.check_dim(y_prev)?;
    problem.check_dim(z)?;
    let py = problem.project_all(y_prev);
    Ok(line_search_with_proj(problem, y_prev, &py, z)?.point)
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub point: DenseVector,
    pub proj: Vec<f64>,
    pub value: f64,
    pub step: f64,
}

/// Right derivative of `s ↦ Σ φ_i(y + s d)` over the non-indicator terms.
fn terms_derivative(problem: &PiecewiseProblem, py: &[f64], pd: &[f64], s: f64) -> f64 {
    let mut total = 0.0;
    for (i, t) in problem.terms().iter().enumerate() {
        let r = problem.proj_range(i).start;
        let (u, du) = (py[r] + s * pd[r], pd[r]);
        total += match *t.kind() {
            TermKind::Hinge { label, weight } => {
                let m = 1.0 - label * u;
                if m > 0.0 || (m == 0.0 && label * du < 0.0) {
                    -weight * label * du
                } else {
                    0.0
                }
            }
            TermKind::SquaredHinge { label, weight } => -weight * label * du * (1.0 - label * u).max(0.0),
            TermKind::Quantile { target, tau, weight } => {
                if u < target || (u == target && du < 0.0) {
                    -weight * (1.0 - tau) * du
                } else {
                    weight * tau * du
                }
            }
            _ => 0.0,
        };
    }
    total
}

/// Line search given the projections of `y_prev`; also returns the new
/// point's projections and objective value.
pub fn line_search_with_proj(
    problem: &PiecewiseProblem,
    y_prev: &[f64],
    proj_y: &[f64],
    z: &[f64],
) -> Result<LineSearchOutcome> {
    let f_prev = problem.evaluate_with_proj(y_prev, proj_y);
    if !f_prev.is_finite() {
        return usage("f is not finite at the previous iterate");
    }
    let pz = problem.project_all(z);
    let d: Vec<f64> = z.iter().zip(y_prev).map(|(a, b)| a - b).collect();
    let pd: Vec<f64> = pz.iter().zip(proj_y).map(|(a, b)| a - b).collect();
    let s_max = feasible_fraction(problem, &indicator_terms(problem), proj_y, &pz)
        .min(problem.psi().segment_domain_limit(y_prev, &d));
    let smooth_free = problem.terms().iter().all(|t| t.is_indicator());
    let mut s = match problem.psi().segment_quadratic(y_prev, &d) {
        Some((a2, a1, _)) if smooth_free => {
            if a2 > 0.0 {
                (-a1 / (2.0 * a2)).clamp(0.0, s_max)
            } else if a1 < 0.0 {
                s_max
            } else {
                0.0
            }
        }
        _ => {
            let deriv = |s: f64| problem.psi().segment_derivative(y_prev, &d, s) + terms_derivative(problem, proj_y, &pd, s);
            if !(deriv(0.0) < 0.0) {
                0.0
            } else if deriv(s_max) <= 0.0 {
                s_max
            } else {
                let (mut lo, mut hi) = (0.0, s_max);
                while hi - lo > SEGMENT_TOL {
                    let mid = 0.5 * (lo + hi);
                    if deriv(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    };
    for k in 0..60 {
        if s <= 0.0 {
            break;
        }
        let point = lerp(y_prev, z, s);
        let proj = problem.project_all(&point);
        let value = problem.evaluate_with_proj(&point, &proj);
        if value.is_finite() {
            if value <= f_prev {
                return Ok(LineSearchOutcome { point, proj, value, step: s });
            }
            break;
        }
        s *= if k < 20 { 1.0 - 1e-12 * 4f64.powi(k) } else { 0.5 };
    }
    Ok(LineSearchOutcome { point: y_prev.to_vec(), proj: proj_y.to_vec(), value: f_prev, step: 0.0 })
}
