//! Safe regions and screening decisions.

mod common;

use blitz_core::engine::{Engine, EngineConfig};
use blitz_core::linalg::{dist, norm};
use blitz_core::losses::LossKind;
use blitz_core::piecewise::{full_assignment, Support, TermKind};
use blitz_core::problems::{
    build_group_dual, build_l1_dual, build_svm_primal, compute_lambda_max, group_lambda_max, standardize_groups,
};
use blitz_core::psi::Psi;
use blitz_core::screening::{
    blitz_screen, build_lower_bound, l1_safe_region, screen_l1, screened_problem, RegionKind, SafeRegion,
    ScreenOutcome,
};
use blitz_core::solvers::{Dca, DualCd, PlainConfig, PlainRunner, ProxNewton, SubproblemSolver};
use blitz_core::{PiecewiseProblem, PiecewiseTerm, SparseColumnMatrix, SparseVec};
use common::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn solve<S: SubproblemSolver>(p: &PiecewiseProblem, solver: S, y0: Vec<f64>) -> Vec<f64> {
    let config = EngineConfig { rel_tol: 1e-12, time_limits: false, ..Default::default() };
    let mut e = Engine::new(p, solver, y0, config).unwrap();
    e.run().unwrap();
    assert!(e.converged());
    e.state().y.clone()
}

#[test]
fn quadratic_bound_example() {
    let p = PiecewiseProblem::new(Psi::half_norm_sq(2), vec![]).unwrap();
    let b = build_lower_bound(&p, &[2.0, 0.0], &[2.0, 0.0]).unwrap();
    assert_eq!(b.x0, vec![0.0, 0.0]);
    assert_eq!(b.gap(), 2.0);
    let s1 = b.region(RegionKind::Blitz).unwrap();
    assert_eq!(s1.center, vec![1.0, 0.0]);
    assert!((s1.radius - 1.0).abs() < 1e-15);
    // at the optimum the region is the point itself
    let b = build_lower_bound(&p, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
    assert_eq!(b.gap(), 0.0);
    assert_eq!(b.region(RegionKind::Blitz).unwrap().radius, 0.0);
}

#[test]
fn subgradient_bound_lies_below_f() {
    let mut r = rng(61);
    for _ in 0..5 {
        let n = 4;
        let terms = (0..12)
            .map(|_| {
                let a = SparseVec::from_dense(&dense(&mut r, n));
                let label = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                let kind = match r.random_range(0..3) {
                    0 => TermKind::Hinge { label, weight: 0.7 },
                    1 => TermKind::SquaredHinge { label, weight: 1.3 },
                    _ => TermKind::Quantile { target: 0.2, tau: 0.3, weight: 1.0 },
                };
                PiecewiseTerm::new(kind, Support::Vector(a)).unwrap()
            })
            .collect();
        let p = PiecewiseProblem::new(Psi::half_norm_sq(n), terms).unwrap();
        let y0 = dense(&mut r, n);
        let g0 = p.subgradient(&y0).unwrap();
        let b = build_lower_bound(&p, &y0, &g0).unwrap();
        for _ in 0..10_000 {
            let q: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
            let f = p.evaluate_full(&q).unwrap();
            assert!(b.value(&q) <= f + 1e-10 * (1.0 + f.abs()));
        }
    }
}

#[test]
fn single_feature_inequality() {
    // λ = 1, ⟨A_i, c⟩ = 0, ‖A_i‖ = 1, r = 0.5: 1 ≥ 0.5, screened
    let a = SparseVec::new(vec![0], vec![1.0]).unwrap();
    let term = PiecewiseTerm::new(TermKind::Slab { bound: 1.0 }, Support::Vector(a)).unwrap();
    let p = PiecewiseProblem::new(Psi::half_norm_sq(2), vec![term]).unwrap();
    let region = SafeRegion { center: vec![0.0, 3.0], radius: 0.5, kind: RegionKind::Blitz };
    assert!(blitz_screen(&p, &region).unwrap().is_screened(0));
    let region = SafeRegion { center: vec![0.6, 3.0], radius: 0.5, kind: RegionKind::Blitz };
    assert!(!blitz_screen(&p, &region).unwrap().is_screened(0));
}

#[test]
fn zero_gap_screens_every_interior_term() {
    let mut r = rng(62);
    let inst = random_pmn(&mut r, 6, 30);
    let region = SafeRegion::blitz(&inst.start, &inst.start, 0.0).unwrap();
    let out = blitz_screen(&inst.problem, &region).unwrap();
    // the start is strictly feasible for every constraint
    assert_eq!(out.screened, 30);
}

fn screened_dominates(p: &PiecewiseProblem, x: &[f64], lb: f64, y: &[f64], f_y: f64) -> (ScreenOutcome, SafeRegion) {
    let s1 = SafeRegion::from_certificate(x, lb, y, f_y, RegionKind::Blitz).unwrap();
    let sg = SafeRegion::from_certificate(x, lb, y, f_y, RegionKind::GapSafe).unwrap();
    if s1.radius > 0.0 {
        assert!(sg.radius / s1.radius >= 2f64.sqrt() * (1.0 - 1e-12), "{} / {}", sg.radius, s1.radius);
    }
    // S₁ ⊆ S_Gap
    assert!(dist(&s1.center, &sg.center) + s1.radius <= sg.radius * (1.0 + 1e-12) + 1e-15);
    let o1 = blitz_screen(p, &s1).unwrap();
    let og = blitz_screen(p, &sg).unwrap();
    for i in og.screened_terms() {
        assert!(o1.is_screened(i), "term {i} screened by the gap ball only");
    }
    (o1, s1)
}

/// Screens from a rough point, then checks the screened objective keeps the minimizer.
fn check_safety<S, F>(r: &mut ChaCha8Rng, p: &PiecewiseProblem, make: F, y0: Vec<f64>) -> usize
where
    S: SubproblemSolver,
    F: Fn(&PiecewiseProblem) -> S,
{
    let passes = r.random_range(2..15);
    let cfg = PlainConfig { max_passes: passes, rel_tol: 0.0, ..Default::default() };
    let mut run = PlainRunner::new(p, make(p), y0.clone(), cfg).unwrap();
    run.run().unwrap();
    let cert = run.last_certificate().unwrap().clone();
    let st = run.status();
    let (outcome, _) = screened_dominates(p, &cert.x, cert.lb_value, run.y(), st.f_y);
    let mut asg = full_assignment(p);
    outcome.apply_linear(p, &mut asg);
    let (ps, _) = screened_problem(p, &asg).unwrap();
    let full = solve(p, make(p), y0.clone());
    let screened = solve(&ps, make(&ps), y0);
    assert!(max_abs_diff(&full, &screened) < 1e-6, "screened {} terms", outcome.screened);
    outcome.screened
}

#[test]
fn screening_is_safe_for_every_adapter() {
    let mut r = rng(63);
    let mut total = 0;
    for k in 0..4 {
        let data = random_design(&mut r, 30, 60, 0.3);
        let labels = planted_labels(&mut r, &data, 6, 0.1);
        let ratio = [0.5, 0.2][k % 2];
        let bias = k >= 2;

        let lmax = compute_lambda_max(&data, &labels, LossKind::Squared, bias).unwrap();
        let l1 = build_l1_dual(&data, &labels, LossKind::Squared, ratio * lmax, bias).unwrap();
        total += check_safety(&mut r, &l1.problem, |p| DualCd::new(p).unwrap(), vec![0.0; 30]);

        let cls = signs(&labels);
        let lmax = compute_lambda_max(&data, &cls, LossKind::Logistic, bias).unwrap();
        let lg = build_l1_dual(&data, &cls, LossKind::Logistic, ratio * lmax, bias).unwrap();
        let y0 = lg.feasible_dual(&lg.dual_from_primal(&vec![0.0; 60], 0.0)).unwrap();
        total += check_safety(&mut r, &lg.problem, |p| ProxNewton::new(p).unwrap(), y0);

        let groups: Vec<Vec<usize>> = (0..20).map(|g| (3 * g..3 * g + 3).collect()).collect();
        let (gdata, _) = standardize_groups(&data, &groups);
        let lm = group_lambda_max(&gdata, &labels, &groups, bias);
        let gd = build_group_dual(&gdata, &labels, groups, ratio * lm, bias).unwrap();
        total += check_safety(&mut r, &gd.problem, |p| DualCd::new(p).unwrap(), vec![0.0; 30]);

        let rows = data.transpose().into_columns();
        let svm = build_svm_primal(&rows, &cls, 60, [0.05, 1.0][k % 2], false).unwrap();
        total += check_safety(&mut r, &svm.problem, |p| Dca::new(p).unwrap(), vec![0.0; 60]);
    }
    assert!(total > 0, "nothing was screened");
}

/// A few epochs of primal coordinate descent for the lasso.
fn lasso_cd(data: &SparseColumnMatrix, labels: &[f64], lambda: f64, epochs: usize) -> Vec<f64> {
    let mut w = vec![0.0; data.n_cols()];
    let mut resid: Vec<f64> = labels.iter().map(|b| -b).collect();
    for _ in 0..epochs {
        for j in 0..data.n_cols() {
            let c = data.column(j);
            let q = c.norm_sq();
            let v = w[j] - c.dot(&resid) / q;
            let new = v.signum() * (v.abs() - lambda / q).max(0.0);
            c.axpy_into(new - w[j], &mut resid);
            w[j] = new;
        }
    }
    w
}

#[test]
fn l1_screen_matches_an_exhaustive_check() {
    let mut r = rng(64);
    for _ in 0..5 {
        let data = random_design(&mut r, 20, 50, 0.4);
        let labels = planted_labels(&mut r, &data, 7, 0.1);
        let lmax = compute_lambda_max(&data, &labels, LossKind::Squared, false).unwrap();
        let lambda = 0.5 * lmax;
        let l1 = build_l1_dual(&data, &labels, LossKind::Squared, lambda, false).unwrap();
        let w0 = lasso_cd(&data, &labels, lambda, 10);
        let out = screen_l1(&l1, &w0, 0.0).unwrap();
        let region = l1_safe_region(&l1, &w0, 0.0, RegionKind::Blitz).unwrap();
        let (w_ref, _) = l1_primal_oracle(&data, &l1.losses, lambda, false);
        for i in 0..50 {
            let c = data.column(i);
            let expect = lambda - c.dot(&region.center).abs() > c.norm() * region.radius;
            assert_eq!(out.is_screened(i), expect, "feature {i}");
            if expect {
                assert_eq!(w_ref[i], 0.0, "feature {i} is in the support");
            }
        }
    }
}

#[test]
fn l1_screen_at_the_optimum() {
    let mut r = rng(65);
    let data = random_design(&mut r, 20, 50, 0.4);
    let labels = planted_labels(&mut r, &data, 7, 0.1);
    let lmax = compute_lambda_max(&data, &labels, LossKind::Squared, false).unwrap();
    let lambda = 0.3 * lmax;
    let l1 = build_l1_dual(&data, &labels, LossKind::Squared, lambda, false).unwrap();
    let (w, _) = l1_primal_oracle(&data, &l1.losses, lambda, false);
    let out = screen_l1(&l1, &w, 0.0).unwrap();
    let x = l1.dual_from_primal(&w, 0.0);
    for i in 0..50 {
        let slack = lambda - data.column(i).dot(&x).abs();
        if slack > 1e-5 {
            assert!(out.is_screened(i), "feature {i}");
        }
        if out.is_screened(i) {
            assert!(slack > 0.0);
        }
    }
    assert!(out.screened > 0);
}

#[test]
fn l1_regions_are_nested() {
    let mut r = rng(66);
    for _ in 0..10 {
        let data = random_design(&mut r, 15, 30, 0.4);
        let labels = planted_labels(&mut r, &data, 5, 0.2);
        let lmax = compute_lambda_max(&data, &labels, LossKind::Squared, false).unwrap();
        let l1 = build_l1_dual(&data, &labels, LossKind::Squared, 0.4 * lmax, false).unwrap();
        let w0 = lasso_cd(&data, &labels, 0.4 * lmax, r.random_range(1..5));
        let s1 = l1_safe_region(&l1, &w0, 0.0, RegionKind::Blitz).unwrap();
        let sg = l1_safe_region(&l1, &w0, 0.0, RegionKind::GapSafe).unwrap();
        assert!(dist(&s1.center, &sg.center) + s1.radius <= sg.radius * (1.0 + 1e-12));
        let o1 = blitz_screen(&l1.problem, &s1).unwrap();
        let og = blitz_screen(&l1.problem, &sg).unwrap();
        assert!(og.screened_terms().iter().all(|&i| o1.is_screened(i)));
        let _ = norm(&s1.center);
    }
}

#[test]
fn plain_screening_count_never_drops() {
    let mut r = rng(67);
    let data = random_design(&mut r, 40, 200, 0.2);
    let labels = planted_labels(&mut r, &data, 20, 0.1);
    let lmax = compute_lambda_max(&data, &labels, LossKind::Squared, false).unwrap();
    let l1 = build_l1_dual(&data, &labels, LossKind::Squared, 0.3 * lmax, false).unwrap();
    let cfg = PlainConfig { rel_tol: 1e-10, screen: blitz_core::solvers::ScreenRule::Blitz, ..Default::default() };
    let mut run = PlainRunner::new(&l1.problem, DualCd::new(&l1.problem).unwrap(), vec![0.0; 40], cfg).unwrap();
    let mut last = 0;
    while !run.converged() {
        let s = run.step().unwrap();
        assert!(s.screened >= last);
        last = s.screened;
    }
    assert!(last > 100, "only {last} screened");
    let full = solve(&l1.problem, DualCd::new(&l1.problem).unwrap(), vec![0.0; 40]);
    assert!(max_abs_diff(&full, run.y()) < 1e-4);
}
