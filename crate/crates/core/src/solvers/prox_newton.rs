//! Proximal Newton on the primal of an L1-regularized smooth loss, driven
//! through its dual `ψ = Σ L_j*` with slab terms `|⟨A_i, x⟩| ≤ λ_i` and an
//! optional bias hyperplane `⟨h, x⟩ = 0`.
//!
//! Primal: `P(ω, β) = Σ_j L_j(v_j) + Σ λ_i |ω_i|` with `v = Σ ω_i A_i + β h − a⋆`.
//! Each step minimizes a quadratic model by coordinate descent and then
//! backtracks. Dual point: `x̂ = L′(v)`.

use super::{better, feasible_point_on_segment, finish_certificate, soft_threshold, Certificate, SubproblemSolver};
use crate::error::{usage, BlitzError, Result};
use crate::linalg::{DenseVector, SparseVec};
use crate::losses::{LossKind, LossSpec};
use crate::minorant::{LowerBoundModel, TermMinorants};
use crate::piecewise::{PiecewiseProblem, RelaxedObjective, Slot, TermKind};
use crate::psi::PsiKind;

const INNER_MAX_PASSES: usize = 20;
const ARMIJO: f64 = 0.01;
const CURVATURE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ProxNewton {
    losses: Vec<LossSpec>,
    omega: Vec<f64>,
    bias: f64,
    bias_term: Option<usize>,
    v: DenseVector,
    slopes: Vec<f64>,
    a_star: DenseVector,
    working: Vec<usize>,
    eps: f64,
}

impl ProxNewton {
    pub fn new(problem: &PiecewiseProblem) -> Result<Self> {
        let PsiKind::Conjugate { losses } = problem.psi().kind() else {
            return usage("proximal Newton needs a conjugate-sum ψ");
        };
        let mut bias_term = None;
        for (i, t) in problem.terms().iter().enumerate() {
            match *t.kind() {
                TermKind::Slab { .. } => {}
                TermKind::Hyperplane { b } if b == 0.0 && bias_term.is_none() => bias_term = Some(i),
                _ => return usage(format!("term {i}: only slabs and one homogeneous hyperplane are supported")),
            }
        }
        let v = vec![0.0; problem.dim()];
        Ok(Self {
            losses: losses.clone(),
            omega: vec![0.0; problem.n_terms()],
            bias: 0.0,
            bias_term,
            v,
            slopes: vec![0.0; problem.n_terms()],
            a_star: vec![0.0; problem.dim()],
            working: Vec::new(),
            eps: 0.1,
        })
    }

    /// Primal weights, one per term (the bias entry is the bias).
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn lambda(problem: &PiecewiseProblem, i: usize) -> f64 {
        match *problem.term(i).kind() {
            TermKind::Slab { bound } => bound,
            _ => 0.0,
        }
    }

    fn primal_value(&self, problem: &PiecewiseProblem, v: &[f64], omega_of: impl Fn(usize) -> f64) -> f64 {
        let loss: f64 = self.losses.iter().zip(v).map(|(l, vj)| l.value(*vj)).sum();
        let reg: f64 = self.working.iter().map(|&i| Self::lambda(problem, i) * omega_of(i).abs()).sum();
        loss + reg
    }

    /// Current primal objective over the working set.
    pub fn primal_objective(&self, problem: &PiecewiseProblem) -> f64 {
        self.primal_value(problem, &self.v, |i| self.omega[i])
    }

    fn direction(problem: &PiecewiseProblem, i: usize) -> &SparseVec {
        problem.term(i).direction().unwrap()
    }

    fn set_coef(&mut self, problem: &PiecewiseProblem, i: usize, new: f64) {
        let old = self.omega[i];
        if new != old {
            Self::direction(problem, i).axpy_into(new - old, &mut self.v);
            self.omega[i] = new;
        }
        self.slopes[i] = -new;
        if Some(i) == self.bias_term {
            self.bias = new;
        }
    }
}

impl SubproblemSolver for ProxNewton {
    fn name(&self) -> &'static str {
        "prox-newton"
    }

    fn set_working_set(&mut self, problem: &PiecewiseProblem, relaxed: &RelaxedObjective) -> Result<()> {
        if !relaxed.other.is_empty() {
            return usage("nonlinear pieces outside the working set are not supported");
        }
        for (i, slot) in relaxed.assignment.iter().enumerate() {
            if matches!(slot, Slot::Piece(_)) {
                self.set_coef(problem, i, 0.0);
            }
        }
        for j in 0..self.v.len() {
            self.v[j] += self.a_star[j] - relaxed.a_star[j];
        }
        self.a_star.clone_from(&relaxed.a_star);
        self.working.clone_from(&relaxed.working);
        Ok(())
    }

    fn set_tolerance(&mut self, eps: f64) {
        self.eps = eps;
    }

    fn pass(&mut self, problem: &PiecewiseProblem) -> Result<u64> {
        let g: Vec<f64> = self.losses.iter().zip(&self.v).map(|(l, v)| l.derivative(*v)).collect();
        let h: Vec<f64> = self
            .losses
            .iter()
            .zip(&self.v)
            .map(|(l, v)| l.second_derivative(*v).max(CURVATURE_FLOOR))
            .collect();
        let mut dv = vec![0.0; self.v.len()];
        let mut d = vec![0.0; problem.n_terms()];
        let mut work = 0;
        let mut total_dec = 0.0;
        for _ in 0..INNER_MAX_PASSES {
            let mut pass_dec = 0.0;
            for &i in &self.working {
                let a = Self::direction(problem, i);
                let (mut grad, mut hii) = (0.0, 0.0);
                for (j, aj) in a.iter() {
                    grad += aj * (g[j] + h[j] * dv[j]);
                    hii += aj * aj * h[j];
                }
                let lam = Self::lambda(problem, i);
                let cur = self.omega[i] + d[i];
                let new = if Some(i) == self.bias_term {
                    cur - grad / hii
                } else {
                    soft_threshold(cur - grad / hii, lam / hii)
                };
                let delta = new - cur;
                work += a.nnz() as u64;
                if delta != 0.0 {
                    a.axpy_into(delta, &mut dv);
                    d[i] += delta;
                    pass_dec -= grad * delta + 0.5 * hii * delta * delta + lam * (new.abs() - cur.abs());
                }
            }
            total_dec += pass_dec;
            if pass_dec <= 0.1 * self.eps * total_dec {
                break;
            }
        }
        let reg_change: f64 = self
            .working
            .iter()
            .map(|&i| Self::lambda(problem, i) * ((self.omega[i] + d[i]).abs() - self.omega[i].abs()))
            .sum();
        let slope: f64 = g.iter().zip(&dv).map(|(a, b)| a * b).sum::<f64>() + reg_change;
        if !(slope < 0.0) {
            return Ok(work);
        }
        let p0 = self.primal_objective(problem);
        let mut t = 1.0;
        for _ in 0..50 {
            let vt: Vec<f64> = self.v.iter().zip(&dv).map(|(v, dv)| v + t * dv).collect();
            let pt = self.primal_value(problem, &vt, |i| self.omega[i] + t * d[i]);
            // a full step whose change is below rounding is accepted; near the
            // optimum P stops resolving progress long before the dual point is feasible
            let flat = t == 1.0 && pt <= p0 + 16.0 * f64::EPSILON * (1.0 + p0.abs());
            if pt <= p0 + ARMIJO * t * slope || flat {
                let targets: Vec<(usize, f64)> =
                    self.working.iter().map(|&i| (i, self.omega[i] + t * d[i])).collect();
                for (i, w) in targets {
                    // exact zeros from the inner solve stay exact when t = 1
                    let w = if t == 1.0 { self.omega[i] + d[i] } else { w };
                    self.set_coef(problem, i, w);
                }
                break;
            }
            t *= 0.5;
        }
        Ok(work)
    }

    fn certificate(&self, problem: &PiecewiseProblem, relaxed: &RelaxedObjective, anchor: &[f64]) -> Result<Certificate> {
        let mut xhat: Vec<f64> = self
            .losses
            .iter()
            .zip(&self.v)
            .map(|(l, v)| interior(l, l.derivative(*v)))
            .collect();
        if let Some(bt) = self.bias_term.filter(|b| relaxed.working.contains(b)) {
            recenter(Self::direction(problem, bt), &mut xhat)?;
        }
        let mut m = TermMinorants::zeros(problem);
        for &i in &relaxed.working {
            m.slopes[i] = self.slopes[i];
            m.intercepts[i] = -Self::lambda(problem, i) * self.omega[i].abs();
        }
        for (i, slot) in relaxed.assignment.iter().enumerate() {
            if let Slot::Piece(k) = *slot {
                m.set_piece(problem, i, problem.term(i).piece_shape(k));
            }
        }
        let build = |p: &[f64]| -> Result<Option<Certificate>> {
            let (z, fz) = feasible_point_on_segment(problem, relaxed, p, &xhat)?;
            let lb = LowerBoundModel::new(problem, z.clone(), m.clone());
            Ok(finish_certificate(z, fz, lb))
        };
        let zero = vec![0.0; problem.dim()];
        let best = better(build(&zero)?, build(anchor)?);
        best.ok_or_else(|| BlitzError::Solver { iteration: 0, message: "invalid certificate".into() })
    }

    fn slopes(&self) -> &[f64] {
        &self.slopes
    }
}

/// Keeps logistic dual coordinates off the domain boundary, where ∇ψ is infinite.
fn interior(l: &LossSpec, x: f64) -> f64 {
    if l.kind != LossKind::Logistic {
        return x;
    }
    let (lo, hi) = l.conjugate_domain();
    let m = 1e-14 * (hi - lo);
    x.clamp(lo + m, hi - m)
}

/// Makes `⟨h, x⟩ = 0` by shrinking whichever sign group dominates.
pub(crate) fn recenter(h: &SparseVec, x: &mut [f64]) -> Result<()> {
    let (mut pos, mut neg) = (0.0, 0.0);
    for (j, hj) in h.iter() {
        let c = hj * x[j];
        if c > 0.0 {
            pos += c;
        } else {
            neg += c;
        }
    }
    if pos + neg == 0.0 {
        return Ok(());
    }
    if pos == 0.0 || neg == 0.0 {
        return Err(BlitzError::Usage("bias constraint needs both label signs".into()));
    }
    let (shrink_pos, factor) = if pos + neg > 0.0 { (true, -neg / pos) } else { (false, -pos / neg) };
    for (j, hj) in h.iter() {
        let c = hj * x[j];
        if (shrink_pos && c > 0.0) || (!shrink_pos && c < 0.0) {
            x[j] *= factor;
        }
    }
    Ok(())
}
