//! The working-set outer loop.
//!
//! Each iteration builds a capsule around `[y_{t-1}, x_{t-1}]`, keeps in the
//! working set every term that the capsule does not certify (C1), whose
//! candidate piece is not a global minorant (C2), or whose candidate piece
//! does not dominate the previous certificate's minorant (C3), solves the
//! relaxed objective approximately, and line-searches `y`.

mod line_search;
mod tuner;
mod working_set;

pub use line_search::{extreme_feasible_point, line_search_with_proj, line_search_y, LineSearchOutcome};
pub use tuner::{
    eps_grid, estimate_progress, estimate_setup, estimate_solve, median, xi_grid, TuningModel, EPS_MAX, EPS_MIN,
    N_EPS, N_XI, XI_MIN,
};
pub use working_set::{problem_size_sweep, select_from_axis, select_working_set, AxisProjections};

use std::time::{Duration, Instant};

use crate::capsule::{compute_capsule, IterSnapshot};
use crate::error::{usage, BlitzError, Result};
use crate::linalg::DenseVector;
use crate::minorant::LowerBoundModel;
use crate::piecewise::{full_assignment, Assignment, CollapseCache, PiecewiseProblem, Slot};
use crate::solvers::{solve_subproblem, SolveStatus, SolverBudget, SubproblemSolver, WarmStart};

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// Tuned from the time and progress models.
    Adaptive,
    /// The same (ξ, ε) from iteration 2 on.
    Fixed { xi: f64, eps: f64 },
    /// `(ξ, ε)` for iterations 2, 3, ...; the last pair repeats.
    Sequence(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub schedule: Schedule,
    /// Stop subproblem solves at `C^solve · ProblemSize / ε` seconds.
    pub time_limits: bool,
    pub max_passes: usize,
    pub init_passes: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iterations: 1000,
            schedule: Schedule::Adaptive,
            time_limits: true,
            max_passes: 10_000,
            init_passes: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineState {
    pub t: usize,
    pub x: DenseVector,
    pub y: DenseVector,
    pub z: DenseVector,
    /// `Δ_t = f(y_t) − f^LB_t(x_t)`
    pub gap: f64,
    pub f_y: f64,
    pub lb: LowerBoundModel,
    /// `f^LB_t(x_t)`
    pub lb_value: f64,
    pub assignment: Assignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub t: usize,
    pub xi: f64,
    pub eps_target: f64,
    /// `max(ε_target, achieved)`, the ε for which the iteration's bound holds.
    pub eps: f64,
    pub gap_prev: f64,
    pub gap: f64,
    pub f_y: f64,
    pub lb_value: f64,
    pub ws_size: usize,
    pub problem_size: usize,
    pub t_setup: f64,
    pub t_solve: f64,
    pub passes: usize,
    pub work: u64,
    pub status: SolveStatus,
}

/// `f(y) − f^LB(argmin f^LB)`
pub fn compute_gap(problem: &PiecewiseProblem, y: &[f64], lb: &LowerBoundModel) -> Result<f64> {
    let fy = problem.evaluate_full(y)?;
    if !fy.is_finite() {
        return usage("f is not finite at y");
    }
    Ok(fy - lb.min_value())
}

/// Initial relaxation: permanent terms kept, every other term replaced by a
/// piece that lower-bounds it (the one active at `y0` when possible).
pub fn initial_assignment(problem: &PiecewiseProblem, y0: &[f64]) -> Assignment {
    problem
        .terms()
        .iter()
        .map(|t| {
            if t.is_permanent() {
                return Slot::Full;
            }
            let k = t.partition_index(y0);
            if t.piece_lower_bounds_term(k) {
                Slot::Piece(k)
            } else {
                (0..t.n_pieces()).find(|&k| t.piece_lower_bounds_term(k)).map_or(Slot::Full, Slot::Piece)
            }
        })
        .collect()
}

pub struct Engine<'p, S: SubproblemSolver> {
    problem: &'p PiecewiseProblem,
    solver: S,
    config: EngineConfig,
    tuner: TuningModel,
    state: EngineState,
    proj_y: Vec<f64>,
    cache: CollapseCache,
    logs: Vec<IterationLog>,
    work: u64,
    converged: bool,
}

impl<'p, S: SubproblemSolver> Engine<'p, S> {
    pub fn new(problem: &'p PiecewiseProblem, mut solver: S, y0: DenseVector, config: EngineConfig) -> Result<Self> {
        problem.check_dim(&y0)?;
        let proj_y = problem.project_all(&y0);
        let f_y = problem.evaluate_with_proj(&y0, &proj_y);
        if !f_y.is_finite() {
            return usage("f is not finite at the starting point");
        }
        let assignment = initial_assignment(problem, &y0);
        let mut cache = CollapseCache::default();
        let relaxed = cache.get(problem, &assignment)?;
        solver.set_working_set(problem, relaxed)?;
        let mut work = 0;
        let mut cert = None;
        for _ in 0..config.init_passes.max(1) {
            work += solver.pass(problem)?;
            let c = solver.certificate(problem, relaxed, &y0)?;
            let done = c.f_t_z - c.lb_value <= 1e-12 * (1.0 + c.lb_value.abs());
            cert = Some(c);
            if done {
                break;
            }
        }
        let cert = cert.unwrap();
        let gap = f_y - cert.lb_value;
        let state = EngineState {
            t: 0,
            x: cert.x,
            y: y0,
            z: cert.z,
            gap,
            f_y,
            lb: cert.lb,
            lb_value: cert.lb_value,
            assignment,
        };
        let converged = gap <= config.rel_tol * (1.0 + f_y.abs());
        Ok(Self {
            problem,
            solver,
            config,
            tuner: TuningModel::new(),
            state,
            proj_y,
            cache,
            logs: Vec::new(),
            work,
            converged,
        })
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn solver(&self) -> &S {
        &self.solver
    }

    pub fn tuner(&self) -> &TuningModel {
        &self.tuner
    }

    pub fn logs(&self) -> &[IterationLog] {
        &self.logs
    }

    /// Σ NNZ over all coordinate updates so far.
    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// One outer iteration; `None` once converged.
    pub fn step(&mut self) -> Result<Option<IterationLog>> {
        if self.converged {
            return Ok(None);
        }
        let t = self.state.t + 1;
        let problem = self.problem;
        let setup_start = Instant::now();
        let gap_prev = self.state.gap;
        let snap = IterSnapshot::new(self.state.x.clone(), self.state.y.clone(), gap_prev);
        let axis = AxisProjections::new(problem, &snap, std::mem::take(&mut self.proj_y));
        let prev = &self.state.lb.minorants;
        let sweep = problem_size_sweep(problem, prev, &axis, gap_prev, self.tuner.xis());
        let (sizes, all_in) = match sweep {
            Ok(s) => s,
            Err(BlitzError::Converged) => {
                self.proj_y = axis.proj_y;
                self.converged = true;
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let first = t == 1;
        let (xi, eps_target) = if first {
            let k = all_in.iter().position(|a| *a);
            (k.map_or(1.0, |k| self.tuner.xis()[k]), 0.0)
        } else {
            match &self.config.schedule {
                Schedule::Adaptive => self.tuner.choose(&sizes, gap_prev),
                Schedule::Fixed { xi, eps } => (*xi, *eps),
                Schedule::Sequence(seq) if !seq.is_empty() => seq[(t - 2).min(seq.len() - 1)],
                Schedule::Sequence(_) => return usage("empty schedule"),
            }
        };
        let assignment = if first {
            full_assignment(problem)
        } else {
            let capsule = compute_capsule(&snap, xi)?;
            select_from_axis(problem, prev, &axis, &capsule)
        };
        let proj_y = axis.proj_y;
        let relaxed = self.cache.get(problem, &assignment)?;
        let problem_size = relaxed.working_nnz(problem);
        let t_select = setup_start.elapsed().as_secs_f64();

        let wall_limit = (self.config.time_limits && !first && self.tuner.c_solve > 0.0)
            .then(|| Duration::from_secs_f64(self.tuner.c_solve * problem_size.max(1) as f64 / eps_target));
        let budget = SolverBudget {
            eps_target,
            wall_limit,
            max_passes: if first { 1 } else { self.config.max_passes },
        };
        let warm = WarmStart {
            x_prev: &self.state.x,
            lb_prev: self.state.lb_value,
            gap_prev,
            anchor: &self.state.y,
        };
        let solve_start = Instant::now();
        let res = solve_subproblem(&mut self.solver, problem, relaxed, &warm, &budget).map_err(|e| match e {
            BlitzError::Usage(m) | BlitzError::Solver { message: m, .. } => BlitzError::Solver { iteration: t, message: m },
            other => other,
        })?;
        let t_solve = solve_start.elapsed().as_secs_f64();

        let ls_start = Instant::now();
        let ls = line_search_with_proj(problem, &self.state.y, &proj_y, &res.cert.z)?;
        let t_setup = t_select + ls_start.elapsed().as_secs_f64();
        let gap = ls.value - res.cert.lb_value;
        let eps = res.eps_achieved.max(eps_target);
        let model_eps = if first { eps.clamp(EPS_MIN, EPS_MAX) } else { eps_target };
        self.tuner.record(t_setup, t_solve, model_eps, problem_size as f64, xi, gap_prev, gap);
        self.work += res.work;

        let ws_size = relaxed.working.len();
        self.proj_y = ls.proj;
        self.state = EngineState {
            t,
            x: res.cert.x,
            y: ls.point,
            z: res.cert.z,
            gap,
            f_y: ls.value,
            lb: res.cert.lb,
            lb_value: res.cert.lb_value,
            assignment,
        };
        self.converged = gap <= self.config.rel_tol * (1.0 + ls.value.abs());
        let log = IterationLog {
            t,
            xi,
            eps_target,
            eps,
            gap_prev,
            gap,
            f_y: ls.value,
            lb_value: self.state.lb_value,
            ws_size,
            problem_size,
            t_setup,
            t_solve,
            passes: res.passes,
            work: res.work,
            status: res.status,
        };
        self.logs.push(log.clone());
        Ok(Some(log))
    }

    /// Iterates until convergence or the iteration cap.
    pub fn run(&mut self) -> Result<&EngineState> {
        while self.state.t < self.config.max_iterations && self.step()?.is_some() {}
        Ok(&self.state)
    }
}
