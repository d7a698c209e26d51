//! A subproblem solver run directly on the full objective, with optional
//! safe screening every few passes. Screened terms are fixed permanently.

use super::{Certificate, SubproblemSolver};
use crate::error::{usage, Result};
use crate::linalg::DenseVector;
use crate::piecewise::{full_assignment, Assignment, PiecewiseProblem, RelaxedObjective};
use crate::screening::{blitz_screen, RegionKind, SafeRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScreenRule {
    Off,
    Blitz,
    GapSafe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainConfig {
    pub rel_tol: f64,
    pub max_passes: usize,
    pub screen: ScreenRule,
    pub screen_every: usize,
}

impl Default for PlainConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-8, max_passes: 100_000, screen: ScreenRule::Off, screen_every: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainStatus {
    pub passes: usize,
    /// `f_S(y) − max LB`, an upper bound on `f(y) − f⋆` along the run.
    pub gap: f64,
    pub f_y: f64,
    pub lb_value: f64,
    pub work: u64,
    /// Terms fixed so far.
    pub screened: usize,
}

pub struct PlainRunner<'p, S: SubproblemSolver> {
    problem: &'p PiecewiseProblem,
    solver: S,
    config: PlainConfig,
    assignment: Assignment,
    relaxed: RelaxedObjective,
    y: DenseVector,
    f_y: f64,
    lb_best: f64,
    last: Option<Certificate>,
    passes: usize,
    work: u64,
    screened: usize,
}

impl<'p, S: SubproblemSolver> PlainRunner<'p, S> {
    pub fn new(problem: &'p PiecewiseProblem, mut solver: S, y0: DenseVector, config: PlainConfig) -> Result<Self> {
        problem.check_dim(&y0)?;
        let f_y = problem.evaluate_full(&y0)?;
        if !f_y.is_finite() {
            return usage("f is not finite at the starting point");
        }
        let assignment = full_assignment(problem);
        let relaxed = RelaxedObjective::new(problem, &assignment)?;
        solver.set_working_set(problem, &relaxed)?;
        Ok(Self {
            problem,
            solver,
            config,
            assignment,
            relaxed,
            y: y0,
            f_y,
            lb_best: f64::NEG_INFINITY,
            last: None,
            passes: 0,
            work: 0,
            screened: 0,
        })
    }

    pub fn solver(&self) -> &S {
        &self.solver
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn last_certificate(&self) -> Option<&Certificate> {
        self.last.as_ref()
    }

    pub fn status(&self) -> PlainStatus {
        PlainStatus {
            passes: self.passes,
            gap: self.f_y - self.lb_best,
            f_y: self.f_y,
            lb_value: self.lb_best,
            work: self.work,
            screened: self.screened,
        }
    }

    pub fn converged(&self) -> bool {
        self.f_y - self.lb_best <= self.config.rel_tol * (1.0 + self.f_y.abs())
    }

    /// One pass, a certificate and possibly a screening round.
    pub fn step(&mut self) -> Result<PlainStatus> {
        self.work += self.solver.pass(self.problem)?;
        self.passes += 1;
        let cert = self.solver.certificate(self.problem, &self.relaxed, &self.y)?;
        if cert.f_t_z < self.f_y {
            self.y.clone_from(&cert.z);
            self.f_y = cert.f_t_z;
        }
        self.lb_best = self.lb_best.max(cert.lb_value);
        let every = self.config.screen_every.max(1);
        if self.config.screen != ScreenRule::Off && self.passes % every == 0 {
            // the latest bound is a bound on the current screened objective
            let kind = match self.config.screen {
                ScreenRule::Blitz => RegionKind::Blitz,
                _ => RegionKind::GapSafe,
            };
            let region = SafeRegion::from_certificate(&cert.x, cert.lb_value, &self.y, self.f_y, kind)?;
            let outcome = blitz_screen(self.problem, &region)?;
            let changed = outcome.apply_linear(self.problem, &mut self.assignment);
            if changed > 0 {
                self.screened += changed;
                self.relaxed = RelaxedObjective::new(self.problem, &self.assignment)?;
                self.solver.set_working_set(self.problem, &self.relaxed)?;
                // f_S ≤ f_S_old, so y stays feasible
                self.f_y = self.relaxed.evaluate(self.problem, &self.y)?;
            }
        }
        self.last = Some(cert);
        Ok(self.status())
    }

    /// Runs until the gap test holds or the pass budget is spent.
    pub fn run(&mut self) -> Result<PlainStatus> {
        while self.passes < self.config.max_passes {
            self.step()?;
            if self.converged() {
                break;
            }
        }
        Ok(self.status())
    }
}
