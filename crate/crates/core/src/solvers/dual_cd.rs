//! Cyclic coordinate ascent on the dual of a quadratic-ψ problem with
//! indicator terms (min-norm, lasso dual, group-lasso dual).
//!
//! With ψ(x) = ½‖x − c‖² and multipliers μ_i, the dual point is
//! `x̂ = c − a⋆ − Σ_i μ_i a_i`. Each coordinate step is an exact maximization.

use std::cell::OnceCell;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{
    better, feasible_point_on_segment, finish_certificate, origin_feasible, soft_threshold, Certificate,
    SubproblemSolver,
};
use crate::error::{usage, Result};
use crate::linalg::{norm, DenseVector};
use crate::minorant::{LowerBoundModel, TermMinorants};
use crate::piecewise::{PiecewiseProblem, RelaxedObjective, Slot, TermKind};
use crate::psi::PsiKind;

#[derive(Debug, Clone)]
struct GroupCache {
    gram: DMatrix<f64>,
    /// None when the Gram matrix is diagonal.
    basis: Option<DMatrix<f64>>,
    eig: Vec<f64>,
}

impl GroupCache {
    fn new(cols: &[crate::linalg::SparseVec]) -> Self {
        let k = cols.len();
        let gram = DMatrix::from_fn(k, k, |a, b| cols[a].sparse_dot(&cols[b]));
        let diagonal = (0..k).all(|a| (0..k).all(|b| a == b || gram[(a, b)] == 0.0));
        if diagonal {
            let eig = (0..k).map(|a| gram[(a, a)]).collect();
            Self { gram, basis: None, eig }
        } else {
            let se = SymmetricEigen::new(gram.clone());
            let eig = se.eigenvalues.iter().map(|v| v.max(0.0)).collect();
            Self { gram, basis: Some(se.eigenvectors), eig }
        }
    }
}

/// Maximizes `⟨w, M⟩ − ½ MᵀHM − λ‖M‖` given the eigenvalues of H and `w` in
/// its eigenbasis; returns M in the eigenbasis. The norm of the solution
/// solves `Σ w̃_k² / (Λ_k ρ + λ)² = 1`, found by bisection.
pub fn group_block_update(eig: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    let wn = norm(w);
    if wn <= lambda {
        return vec![0.0; w.len()];
    }
    if lambda == 0.0 {
        return w.iter().zip(eig).map(|(wk, l)| if *l > 0.0 { wk / l } else { 0.0 }).collect();
    }
    let f = |rho: f64| -> f64 {
        w.iter().zip(eig).map(|(wk, l)| (wk / (l * rho + lambda)).powi(2)).sum::<f64>() - 1.0
    };
    let lmin = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = if lmin > 0.0 { wn / lmin } else { 1.0 };
    let mut guard = 0;
    while f(hi) > 0.0 && guard < 2000 {
        hi *= 2.0;
        guard += 1;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let rho = 0.5 * (lo + hi);
    w.iter().zip(eig).map(|(wk, l)| wk * rho / (l * rho + lambda)).collect()
}

#[derive(Debug, Clone)]
pub struct DualCd {
    a_star: DenseVector,
    xhat: DenseVector,
    slopes: Vec<f64>,
    working: Vec<usize>,
    groups: Vec<Option<GroupCache>>,
    offsets: Vec<usize>,
    /// First anchor seen; usually the strictly feasible start, which keeps
    /// the segment to x̂ long when later anchors sit on active constraints.
    first_anchor: OnceCell<DenseVector>,
}

impl DualCd {
    pub fn new(problem: &PiecewiseProblem) -> Result<Self> {
        let PsiKind::Quadratic { center, .. } = problem.psi().kind() else {
            return usage("dual coordinate descent needs a quadratic ψ");
        };
        if let Some(i) = problem.terms().iter().position(|t| !t.is_indicator()) {
            return usage(format!("term {i} is not an indicator"));
        }
        let offsets = (0..=problem.n_terms())
            .map(|i| if i == problem.n_terms() { problem.proj_len() } else { problem.proj_range(i).start })
            .collect();
        Ok(Self {
            a_star: vec![0.0; problem.dim()],
            xhat: center.clone(),
            slopes: vec![0.0; problem.proj_len()],
            working: Vec::new(),
            groups: vec![None; problem.n_terms()],
            offsets,
            first_anchor: OnceCell::new(),
        })
    }

    /// `x̂ = c − a⋆ − Σ μ_i a_i`
    pub fn dual_point(&self) -> &[f64] {
        &self.xhat
    }

    fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    fn update_scalar(&mut self, problem: &PiecewiseProblem, i: usize) -> u64 {
        let t = problem.term(i);
        let a = t.direction().unwrap();
        let q = a.norm_sq();
        let r = self.offsets[i];
        let old = self.slopes[r];
        let v = old + a.dot(&self.xhat) / q;
        let new = match *t.kind() {
            TermKind::HalfSpace { b } => (v - b / q).max(0.0),
            TermKind::Slab { bound } => soft_threshold(v, bound / q),
            TermKind::Hyperplane { b } => v - b / q,
            _ => old,
        };
        if new != old {
            a.axpy_into(old - new, &mut self.xhat);
            self.slopes[r] = new;
        }
        a.nnz() as u64
    }

    fn update_group(&mut self, problem: &PiecewiseProblem, i: usize) -> u64 {
        let t = problem.term(i);
        let cols = t.group_columns().unwrap();
        let TermKind::GroupBall { bound, .. } = *t.kind() else { return 0 };
        if self.groups[i].is_none() {
            self.groups[i] = Some(GroupCache::new(cols));
        }
        let cache = self.groups[i].as_ref().unwrap();
        let r = self.range(i);
        let old = DVector::from_column_slice(&self.slopes[r.clone()]);
        let proj = DVector::from_iterator(cols.len(), cols.iter().map(|c| c.dot(&self.xhat)));
        let w = &cache.gram * &old + proj;
        let new = match &cache.basis {
            None => DVector::from_vec(group_block_update(&cache.eig, w.as_slice(), bound)),
            Some(q) => {
                let wt = q.transpose() * &w;
                q * DVector::from_vec(group_block_update(&cache.eig, wt.as_slice(), bound))
            }
        };
        for (k, col) in cols.iter().enumerate() {
            let d = new[k] - old[k];
            if d != 0.0 {
                col.axpy_into(-d, &mut self.xhat);
            }
            self.slopes[r.start + k] = new[k];
        }
        t.nnz() as u64
    }

    fn minorants(&self, problem: &PiecewiseProblem, relaxed: &RelaxedObjective, assignment: &[Slot]) -> TermMinorants {
        let mut m = TermMinorants { slopes: self.slopes.clone(), intercepts: vec![0.0; problem.n_terms()] };
        for &i in &relaxed.working {
            let s = &self.slopes[self.range(i)];
            m.intercepts[i] = match *problem.term(i).kind() {
                TermKind::HalfSpace { b } | TermKind::Hyperplane { b } => -s[0] * b,
                TermKind::Slab { bound } => -bound * s[0].abs(),
                TermKind::GroupBall { bound, .. } => -bound * norm(s),
                _ => 0.0,
            };
        }
        for (i, slot) in assignment.iter().enumerate() {
            if let Slot::Piece(k) = slot {
                m.set_piece(problem, i, problem.term(i).piece_shape(*k));
            }
        }
        m
    }
}

impl SubproblemSolver for DualCd {
    fn name(&self) -> &'static str {
        "dual-cd"
    }

    fn set_working_set(&mut self, problem: &PiecewiseProblem, relaxed: &RelaxedObjective) -> Result<()> {
        if !relaxed.other.is_empty() {
            return usage("nonlinear pieces outside the working set are not supported");
        }
        let mut in_w = vec![false; problem.n_terms()];
        for &i in &relaxed.working {
            in_w[i] = true;
        }
        for i in 0..problem.n_terms() {
            let r = self.range(i);
            if !in_w[i] && self.slopes[r.clone()].iter().any(|s| *s != 0.0) {
                let old: Vec<f64> = self.slopes[r.clone()].to_vec();
                problem.term(i).add_scaled_support(&old, &mut self.xhat);
                self.slopes[r].iter_mut().for_each(|s| *s = 0.0);
            }
        }
        for j in 0..self.xhat.len() {
            self.xhat[j] += self.a_star[j] - relaxed.a_star[j];
        }
        self.a_star.clone_from(&relaxed.a_star);
        self.working.clone_from(&relaxed.working);
        Ok(())
    }

    fn pass(&mut self, problem: &PiecewiseProblem) -> Result<u64> {
        let mut work = 0;
        for idx in 0..self.working.len() {
            let i = self.working[idx];
            work += match problem.term(i).kind() {
                TermKind::GroupBall { .. } => self.update_group(problem, i),
                _ => self.update_scalar(problem, i),
            };
        }
        Ok(work)
    }

    fn certificate(&self, problem: &PiecewiseProblem, relaxed: &RelaxedObjective, anchor: &[f64]) -> Result<Certificate> {
        let minorants = self.minorants(problem, relaxed, &relaxed.assignment);
        let mut target = self.xhat.clone();
        for &i in &relaxed.working {
            if let TermKind::Hyperplane { b } = *problem.term(i).kind() {
                let a = problem.term(i).direction().unwrap();
                a.axpy_into(-(a.dot(&target) - b) / a.norm_sq(), &mut target);
            }
        }
        let build = |p: &[f64]| -> Result<Option<Certificate>> {
            let (z, fz) = feasible_point_on_segment(problem, relaxed, p, &target)?;
            let lb = LowerBoundModel::new(problem, z.clone(), minorants.clone());
            Ok(finish_certificate(z, fz, lb))
        };
        let mut best = build(anchor)?;
        let first = self.first_anchor.get_or_init(|| anchor.to_vec());
        if first.as_slice() != anchor && relaxed.evaluate(problem, first)?.is_finite() {
            best = better(best, build(first)?);
        }
        if origin_feasible(problem, &relaxed.working) {
            let zero = vec![0.0; problem.dim()];
            if relaxed.evaluate(problem, &zero)?.is_finite() {
                best = better(best, build(&zero)?);
            }
        }
        best.ok_or_else(|| crate::BlitzError::Solver { iteration: 0, message: "invalid certificate".into() })
    }

    fn slopes(&self) -> &[f64] {
        &self.slopes
    }
}
