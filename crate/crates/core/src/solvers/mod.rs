//! Subproblem solvers. Each minimizes a relaxed objective `f_t` and emits a
//! triple `(z, f^LB, x)`: a point with `f_t(z)` finite, a quadratic lower
//! bound of `f_t`, and that bound's minimizer.

mod dca;
mod dual_cd;
mod plain;
mod prox_newton;

pub use dca::Dca;
pub use dual_cd::{group_block_update, DualCd};
pub use plain::{PlainConfig, PlainRunner, PlainStatus, ScreenRule};
pub use prox_newton::ProxNewton;
pub(crate) use prox_newton::recenter;

use std::time::{Duration, Instant};

use crate::error::{BlitzError, Result};
use crate::linalg::{dist, lerp, norm, DenseVector};
use crate::minorant::LowerBoundModel;
use crate::piecewise::{PiecewiseProblem, RelaxedObjective, TermKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverBudget {
    pub eps_target: f64,
    pub wall_limit: Option<Duration>,
    pub max_passes: usize,
}

impl SolverBudget {
    pub fn passes(eps_target: f64, max_passes: usize) -> Self {
        Self { eps_target, wall_limit: None, max_passes }
    }
}

/// What the previous outer iteration left behind.
#[derive(Debug, Clone, Copy)]
pub struct WarmStart<'a> {
    /// `x_{t-1}`
    pub x_prev: &'a [f64],
    /// `f^LB_{t-1}(x_{t-1})`
    pub lb_prev: f64,
    /// `Δ_{t-1}`
    pub gap_prev: f64,
    /// A point where `f` (hence `f_t`) is finite, usually `y_{t-1}`.
    pub anchor: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    TimeLimit,
    PassLimit,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub z: DenseVector,
    /// `f_t(z)`
    pub f_t_z: f64,
    pub lb: LowerBoundModel,
    pub x: DenseVector,
    /// `f^LB(x)`
    pub lb_value: f64,
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub cert: Certificate,
    /// Achieved tolerance: the smallest ε for which both stopping tests hold.
    pub eps_achieved: f64,
    pub passes: usize,
    /// Σ NNZ over coordinate updates.
    pub work: u64,
    pub status: SolveStatus,
}

pub trait SubproblemSolver {
    fn name(&self) -> &'static str;
    /// Installs `f_t`; terms leaving the working set get the multiplier of
    /// their assigned piece.
    fn set_working_set(&mut self, problem: &PiecewiseProblem, relaxed: &RelaxedObjective) -> Result<()>;
    fn set_tolerance(&mut self, _eps: f64) {}
    /// One cycle over the working set; returns the work done.
    fn pass(&mut self, problem: &PiecewiseProblem) -> Result<u64>;
    fn certificate(
        &self,
        problem: &PiecewiseProblem,
        relaxed: &RelaxedObjective,
        anchor: &[f64],
    ) -> Result<Certificate>;
    /// Multipliers as minorant slopes in the flat projection layout.
    fn slopes(&self) -> &[f64];
}

/// Rounding level of lower-bound values near `a` and `b`.
fn lb_noise(a: f64, b: f64) -> f64 {
    16.0 * f64::EPSILON * (1.0 + a.abs() + b.abs())
}

/// The smallest ε passing both stopping tests. Differences at rounding level
/// count as zero in the progress test and as a full gap in the gap test.
pub fn achieved_eps(cert: &Certificate, warm: &WarmStart<'_>) -> f64 {
    let gap_ratio =
        ((cert.f_t_z - cert.lb_value + lb_noise(cert.f_t_z, cert.lb_value)) / warm.gap_prev).max(0.0);
    let half_d2 = 0.5 * dist(&cert.z, warm.x_prev).powi(2);
    let progress = cert.lb_value - warm.lb_prev;
    let noise = lb_noise(cert.lb_value, warm.lb_prev);
    let prog_ratio = if half_d2 > noise {
        (1.0 - progress / half_d2).max(0.0)
    } else if progress >= -noise {
        0.0
    } else {
        f64::INFINITY
    };
    gap_ratio.max(prog_ratio)
}

/// Runs passes until the gap test `f_t(z) − f^LB(x) ≤ ε Δ_{t-1}` and the
/// progress test `f^LB_t(x_t) − f^LB_{t-1}(x_{t-1}) ≥ (1−ε) ½‖z − x_{t-1}‖²`
/// both hold, or the budget runs out. Budget stops wait for nonnegative
/// progress, up to a hard cap of 100× the pass budget. A pass that leaves
/// the certificate bitwise unchanged ends the solve: the iteration has
/// reached a fixed point.
pub fn solve_subproblem(
    solver: &mut dyn SubproblemSolver,
    problem: &PiecewiseProblem,
    relaxed: &RelaxedObjective,
    warm: &WarmStart<'_>,
    budget: &SolverBudget,
) -> Result<SubproblemResult> {
    if !relaxed.evaluate(problem, warm.anchor)?.is_finite() {
        return Err(BlitzError::Usage("f_t is not finite at the warm start".into()));
    }
    solver.set_working_set(problem, relaxed)?;
    solver.set_tolerance(budget.eps_target);
    let start = Instant::now();
    let max_passes = budget.max_passes.max(1);
    let hard_cap = max_passes.saturating_mul(100);
    let mut passes = 0;
    let mut work = 0;
    let mut last: Option<(f64, f64)> = None;
    loop {
        work += solver.pass(problem)?;
        passes += 1;
        let cert = solver.certificate(problem, relaxed, warm.anchor)?;
        let eps = achieved_eps(&cert, warm);
        let progress_ok = cert.lb_value >= warm.lb_prev - lb_noise(cert.lb_value, warm.lb_prev);
        let fixed_point = last == Some((cert.f_t_z, cert.lb_value));
        last = Some((cert.f_t_z, cert.lb_value));
        let status = if eps <= budget.eps_target {
            Some(SolveStatus::Converged)
        } else if budget.wall_limit.is_some_and(|l| start.elapsed() >= l) && progress_ok {
            Some(SolveStatus::TimeLimit)
        } else if (passes >= max_passes && progress_ok) || passes >= hard_cap || fixed_point {
            Some(SolveStatus::PassLimit)
        } else {
            None
        };
        if let Some(status) = status {
            return Ok(SubproblemResult { cert, eps_achieved: eps, passes, work, status });
        }
    }
}

/// Largest `s ∈ [0, 1]` keeping `p + s(q − p)` inside every working indicator,
/// given flat projections of `p` and `q`. `p` is assumed feasible.
/// Hyperplanes are assumed to hold at both ends.
pub fn feasible_fraction(problem: &PiecewiseProblem, terms: &[usize], proj_p: &[f64], proj_q: &[f64]) -> f64 {
    let mut s: f64 = 1.0;
    for &i in terms {
        let r = problem.proj_range(i);
        let (up, uq) = (&proj_p[r.clone()], &proj_q[r]);
        let ray = |lim: f64, a: f64, b: f64| if b > lim { (lim - a) / (b - a) } else { 1.0 };
        match *problem.term(i).kind() {
            TermKind::HalfSpace { b } => s = s.min(ray(b, up[0], uq[0])),
            TermKind::Slab { bound } => {
                s = s.min(ray(bound, up[0], uq[0])).min(ray(bound, -up[0], -uq[0]));
            }
            TermKind::GroupBall { bound, .. } => {
                if norm(uq) > bound {
                    let d: Vec<f64> = uq.iter().zip(up).map(|(b, a)| b - a).collect();
                    let a2 = crate::linalg::norm_sq(&d);
                    let a1 = 2.0 * crate::linalg::dot(up, &d);
                    let a0 = crate::linalg::norm_sq(up) - bound * bound;
                    let disc = (a1 * a1 - 4.0 * a2 * a0).max(0.0);
                    let root = if a1 >= 0.0 {
                        -2.0 * a0 / (a1 + disc.sqrt())
                    } else {
                        (-a1 + disc.sqrt()) / (2.0 * a2)
                    };
                    s = s.min(root);
                }
            }
            _ => {}
        }
    }
    s.clamp(0.0, 1.0)
}

/// Extreme `f_t`-feasible point on `[p, q]` with exact feasibility enforced by
/// backing off. Returns `(z, f_t(z))`.
pub fn feasible_point_on_segment(
    problem: &PiecewiseProblem,
    relaxed: &RelaxedObjective,
    p: &[f64],
    q: &[f64],
) -> Result<(DenseVector, f64)> {
    let mut pp = vec![0.0; problem.proj_len()];
    let mut pq = vec![0.0; problem.proj_len()];
    for &i in &relaxed.working {
        let r = problem.proj_range(i);
        problem.term(i).project_into(p, &mut pp[r.clone()]);
        problem.term(i).project_into(q, &mut pq[r]);
    }
    let mut s = feasible_fraction(problem, &relaxed.working, &pp, &pq).min(problem.psi().segment_domain_limit(
        p,
        &q.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>(),
    ));
    for k in 0..40 {
        let z = if s == 1.0 { q.to_vec() } else { lerp(p, q, s) };
        let v = relaxed.evaluate(problem, &z)?;
        if v.is_finite() {
            return Ok((z, v));
        }
        s *= 1.0 - 1e-12 * 4f64.powi(k);
        if k >= 20 {
            s *= 0.5;
        }
    }
    let v = relaxed.evaluate(problem, p)?;
    if v.is_finite() {
        Ok((p.to_vec(), v))
    } else {
        Err(BlitzError::Solver { iteration: 0, message: "no finite point on the segment".into() })
    }
}

/// Does the origin satisfy every working indicator?
pub(crate) fn origin_feasible(problem: &PiecewiseProblem, terms: &[usize]) -> bool {
    terms.iter().all(|&i| {
        let t = problem.term(i);
        !t.is_indicator() || t.value_from_proj(&vec![0.0; t.proj_len()]) == 0.0
    })
}

pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// The lower of two candidate certificates by `f_t(z)`, skipping invalid ones.
pub(crate) fn better(a: Option<Certificate>, b: Option<Certificate>) -> Option<Certificate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.f_t_z < a.f_t_z { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

pub(crate) fn finish_certificate(z: DenseVector, f_t_z: f64, lb: LowerBoundModel) -> Option<Certificate> {
    let x = lb.minimizer();
    let lb_value = lb.min_value();
    if lb_value.is_finite() && f_t_z.is_finite() && x.iter().all(|v| v.is_finite()) {
        Some(Certificate { z, f_t_z, lb, x, lb_value })
    } else {
        None
    }
}
