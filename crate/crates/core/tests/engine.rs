//! Per-iteration invariants of the working-set loop.

mod common;

use blitz_core::capsule::{compute_capsule, IterSnapshot};
use blitz_core::engine::{Engine, EngineConfig, Schedule};
use blitz_core::losses::LossKind;
use blitz_core::piecewise::{evaluate_relaxed, full_assignment, RelaxedObjective};
use blitz_core::problems::{build_l1_dual, compute_lambda_max};
use blitz_core::solvers::{achieved_eps, solve_subproblem, DualCd, ProxNewton, SolverBudget, SubproblemSolver, WarmStart};
use blitz_core::{PiecewiseProblem, SparseVec};
use common::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn capsule_point(r: &mut ChaCha8Rng, c1: &[f64], c2: &[f64], radius: f64) -> Vec<f64> {
    let t: f64 = r.random();
    let g: Vec<f64> = (0..c1.len()).map(|_| StandardNormal.sample(r)).collect();
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s: f64 = r.random::<f64>() * radius;
    (0..c1.len()).map(|j| c1[j] + t * (c2[j] - c1[j]) + s * g[j] / gn).collect()
}

/// Runs the engine step by step, checking every iteration.
fn check_run(r: &mut ChaCha8Rng, p: &PiecewiseProblem, y0: Vec<f64>, schedule: Schedule) -> usize {
    let config = EngineConfig { rel_tol: 1e-10, time_limits: false, schedule, ..Default::default() };
    let mut e = Engine::new(p, DualCd::new(p).unwrap(), y0, config).unwrap();
    let mut prev_f = e.state().f_y;
    let mut prev_lb = e.state().lb_value;
    loop {
        let s = e.state();
        let snap = IterSnapshot::new(s.x.clone(), s.y.clone(), s.gap);
        let Some(log) = e.step().unwrap() else { break };
        let s = e.state();
        // Δ is a difference of two O(|f|) numbers; below ~ε|f| it is rounding
        let floor = 32.0 * f64::EPSILON * (1.0 + log.f_y.abs());
        let bound = (1.0 - (1.0 - log.eps) * log.xi) * log.gap_prev * (1.0 + 1e-9) + floor;
        assert!(log.gap <= bound, "t {} gap {:e} > {:e} (xi {} eps {})", log.t, log.gap, bound, log.xi, log.eps);
        assert!(s.gap >= 0.0);
        assert!(s.f_y <= prev_f + 1e-12 * (1.0 + prev_f.abs()), "f(y) increased at {}", log.t);
        assert!(s.lb_value >= prev_lb - 1e-12 * (1.0 + prev_lb.abs()), "LB decreased at {}", log.t);
        prev_f = s.f_y;
        prev_lb = s.lb_value;

        // f_t = f on the capsule
        let cap = compute_capsule(&snap, log.xi).unwrap();
        for _ in 0..50 {
            let q = capsule_point(r, &cap.c1, &cap.c2, cap.radius);
            let ft = evaluate_relaxed(p, &s.assignment, &q).unwrap();
            let f = p.evaluate_full(&q).unwrap();
            assert!(
                (ft.is_infinite() && f.is_infinite()) || (ft - f).abs() <= 1e-10 * (1.0 + f.abs()),
                "t {}: f_t {ft} f {f}",
                log.t
            );
        }
        // f^LB ≤ f_t ≤ f
        for k in 0..100 {
            let base = if k % 2 == 0 { &s.x } else { &s.y };
            let q: Vec<f64> = base.iter().map(|v| v + 0.1 * r.random_range(-1.0..1.0)).collect();
            let ft = evaluate_relaxed(p, &s.assignment, &q).unwrap();
            let f = p.evaluate_full(&q).unwrap();
            assert!(s.lb.value(&q) <= ft + 1e-10 * (1.0 + ft.abs()));
            assert!(ft <= f + 1e-10 * (1.0 + f.abs()));
        }
    }
    assert!(e.converged());
    e.state().t
}

#[test]
fn pmn_iterations_contract() {
    let mut r = rng(51);
    for k in 0..20 {
        let n = r.random_range(5..40);
        let m = r.random_range(10..150);
        let inst = random_pmn(&mut r, n, m);
        let sched = if k % 2 == 0 { Schedule::Adaptive } else { Schedule::Fixed { xi: 0.2, eps: 0.3 } };
        check_run(&mut r, &inst.problem, inst.start.clone(), sched);
    }
}

#[test]
fn lasso_iterations_contract() {
    let mut r = rng(52);
    for k in 0..10 {
        let data = random_design(&mut r, 30, 120, 0.2);
        let labels = planted_labels(&mut r, &data, 10, 0.1);
        let lmax = compute_lambda_max(&data, &labels, LossKind::Squared, false).unwrap();
        let l1 = build_l1_dual(&data, &labels, LossKind::Squared, [0.5, 0.1][k % 2] * lmax, false).unwrap();
        let y0 = vec![0.0; l1.problem.dim()];
        let sched = if k < 5 { Schedule::Adaptive } else { Schedule::Fixed { xi: 0.5, eps: 0.1 } };
        check_run(&mut r, &l1.problem, y0, sched);
    }
}

#[test]
fn exact_solves_pass_both_stopping_tests() {
    // an exact solve of f_t against the previous certificate gives ε = 0
    let mut r = rng(53);
    for _ in 0..10 {
        let inst = random_pmn(&mut r, 8, 25);
        let p = &inst.problem;
        let mut e = Engine::new(
            p,
            DualCd::new(p).unwrap(),
            inst.start.clone(),
            EngineConfig { rel_tol: 1e-10, time_limits: false, ..Default::default() },
        )
        .unwrap();
        e.step().unwrap();
        let s = e.state().clone();
        if e.converged() {
            continue;
        }
        let relaxed = RelaxedObjective::new(p, &full_assignment(p)).unwrap();
        let mut solver = DualCd::new(p).unwrap();
        solver.set_working_set(p, &relaxed).unwrap();
        // any point with f finite may anchor; the strictly feasible start keeps z off the boundary
        let warm = WarmStart { x_prev: &s.x, lb_prev: s.lb_value, gap_prev: s.gap, anchor: &inst.start };
        let res = solve_subproblem(&mut solver, p, &relaxed, &warm, &SolverBudget::passes(0.0, 100_000)).unwrap();
        let eps = achieved_eps(&res.cert, &warm);
        assert!(eps <= 1e-6, "eps {eps} after {} passes", res.passes);
    }
}

#[test]
fn single_constraint_is_one_iteration_of_work() {
    // min ½‖x‖² s.t. ⟨a, x⟩ ≤ −1: x⋆ = −a/‖a‖²
    let a = SparseVec::new(vec![0, 2], vec![1.0, 2.0]).unwrap();
    let p = blitz_core::problems::build_pmn(3, vec![(a, -1.0)]).unwrap();
    let mut e = Engine::new(&p, DualCd::new(&p).unwrap(), vec![-1.0, 0.0, -1.0], EngineConfig::default()).unwrap();
    e.run().unwrap();
    assert!(e.converged());
    let y = &e.state().y;
    assert!(max_abs_diff(y, &[-0.2, 0.0, -0.4]) < 1e-8);
}

fn random_schedule(r: &mut ChaCha8Rng) -> Schedule {
    let xis = [1.0, 1.0, 0.99, 0.9, 0.7, 0.5, 0.3, 0.1, 0.02];
    let epss = [0.9, 0.5, 0.3, 0.1, 0.03, 0.01, 0.001];
    Schedule::Sequence(
        (0..400).map(|_| (xis[r.random_range(0..xis.len())], epss[r.random_range(0..epss.len())])).collect(),
    )
}

#[test]
fn any_schedule_contracts_and_converges() {
    let mut r = rng(54);
    for _ in 0..6 {
        let inst = random_pmn(&mut r, 15, 60);
        let sched = random_schedule(&mut r);
        check_run(&mut r, &inst.problem, inst.start.clone(), sched);
    }
    for k in 0..6 {
        let data = random_design(&mut r, 30, 60, 0.3);
        let labels = planted_labels(&mut r, &data, 6, 0.1);
        let lmax = compute_lambda_max(&data, &labels, LossKind::Squared, k % 2 == 1).unwrap();
        let l1 = build_l1_dual(&data, &labels, LossKind::Squared, 0.2 * lmax, k % 2 == 1).unwrap();
        let sched = random_schedule(&mut r);
        check_run(&mut r, &l1.problem, vec![0.0; 30], sched);
    }
    // the proximal Newton solver near its rounding floor
    for _ in 0..6 {
        let data = random_design(&mut r, 40, 60, 0.3);
        let labels = signs(&planted_labels(&mut r, &data, 6, 0.3));
        let lmax = compute_lambda_max(&data, &labels, LossKind::Logistic, true).unwrap();
        let l1 = build_l1_dual(&data, &labels, LossKind::Logistic, 0.2 * lmax, true).unwrap();
        let config = EngineConfig { rel_tol: 1e-12, time_limits: false, schedule: random_schedule(&mut r), ..Default::default() };
        let mut e = Engine::new(&l1.problem, ProxNewton::new(&l1.problem).unwrap(), vec![0.0; 40], config).unwrap();
        e.run().unwrap();
        assert!(e.converged(), "stalled at gap {:e}", e.state().gap);
        for log in e.logs() {
            let floor = 32.0 * f64::EPSILON * (1.0 + log.f_y.abs());
            assert!(log.gap <= (1.0 - (1.0 - log.eps) * log.xi) * log.gap_prev * (1.0 + 1e-9) + floor);
        }
    }
}
