//! Instance generators and independent reference solvers for the tests.
#![allow(dead_code)]

use blitz_core::losses::{LossKind, LossSpec};
use blitz_core::problems::{build_pmn, GroupDual};
use blitz_core::{PiecewiseProblem, SparseColumnMatrix, SparseVec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub struct Pmn {
    pub problem: PiecewiseProblem,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    /// A strictly feasible point.
    pub start: Vec<f64>,
}

/// Random `min ½‖x‖²` s.t. `⟨a_i,x⟩ ≤ b_i` with a planted feasible point.
pub fn random_pmn(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Pmn {
    let start = dense(rng, n);
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for _ in 0..m {
        let ai = dense(rng, n);
        b.push(dot(&ai, &start) + rng.random_range(0.01..0.5));
        a.push(ai);
    }
    let cons = a.iter().zip(&b).map(|(ai, bi)| (SparseVec::from_dense(ai), *bi)).collect();
    Pmn { problem: build_pmn(n, cons).unwrap(), a, b, start }
}

/// Column-major sparse design with the given density; every column nonzero.
pub fn random_design(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> SparseColumnMatrix {
    let columns = (0..cols)
        .map(|_| {
            let mut idx = Vec::new();
            let mut val = Vec::new();
            for r in 0..rows {
                if rng.random_bool(density) {
                    idx.push(r);
                    val.push(rng.random_range(-1.0..1.0));
                }
            }
            if idx.is_empty() {
                idx.push(rng.random_range(0..rows));
                val.push(1.0);
            }
            SparseVec::new(idx, val).unwrap()
        })
        .collect();
    SparseColumnMatrix::new(rows, columns).unwrap()
}

pub fn planted_labels(rng: &mut ChaCha8Rng, data: &SparseColumnMatrix, support_every: usize, noise: f64) -> Vec<f64> {
    let truth: Vec<f64> = (0..data.n_cols())
        .map(|j| if j % support_every == 0 { rng.random_range(-2.0..2.0) } else { 0.0 })
        .collect();
    data.mul_vec(&truth).iter().map(|v| v + noise * rng.random_range(-1.0..1.0)).collect()
}

pub fn signs(v: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = v.iter().map(|x| if *x > 0.0 { 1.0 } else { -1.0 }).collect();
    // both classes present
    s[0] = 1.0;
    s[1] = -1.0;
    s
}

/// Exact 1-D minimizer of a convex function given its right derivative, by
/// bisection after bracketing.
fn argmin_1d(deriv: impl Fn(f64) -> f64, start: f64) -> f64 {
    let mut step = 1.0;
    let (mut lo, mut hi);
    if deriv(start) < 0.0 {
        lo = start;
        hi = start + step;
        while deriv(hi) < 0.0 {
            lo = hi;
            step *= 2.0;
            hi = start + step;
        }
    } else {
        hi = start;
        lo = start - step;
        while deriv(lo) >= 0.0 {
            hi = lo;
            step *= 2.0;
            lo = start - step;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Primal coordinate minimization for `Σ_j L_j((Aω)_j + β) + λ‖ω‖₁`, each
/// coordinate minimized exactly. Returns `(ω, β)`.
pub fn l1_primal_oracle(data: &SparseColumnMatrix, losses: &[LossSpec], lambda: f64, bias: bool) -> (Vec<f64>, f64) {
    let m = data.n_cols();
    let mut w = vec![0.0; m];
    let mut beta = 0.0;
    let mut v = vec![0.0; data.n_rows()];
    for _sweep in 0..20_000 {
        let mut change: f64 = 0.0;
        for i in 0..m {
            let col = data.column(i);
            let old = w[i];
            let d = |t: f64| {
                let mut g = 0.0;
                for (j, a) in col.iter() {
                    g += a * losses[j].derivative(v[j] + beta + (t - old) * a);
                }
                // right derivative of λ|t|
                g + if t >= 0.0 { lambda } else { -lambda }
            };
            let left = |t: f64| d(t) - if t == 0.0 { 2.0 * lambda } else { 0.0 };
            let new = if left(0.0) <= 0.0 && d(0.0) >= 0.0 { 0.0 } else { argmin_1d(d, old) };
            if new != old {
                col.axpy_into(new - old, &mut v);
                w[i] = new;
                change = change.max((new - old).abs());
            }
        }
        if bias {
            let d = |t: f64| v.iter().zip(losses).map(|(vj, l)| l.derivative(vj + t)).sum::<f64>();
            let nb = argmin_1d(d, beta);
            change = change.max((nb - beta).abs());
            beta = nb;
        }
        if change < 1e-14 {
            break;
        }
    }
    (w, beta)
}

pub fn l1_primal_value(data: &SparseColumnMatrix, losses: &[LossSpec], lambda: f64, w: &[f64], beta: f64) -> f64 {
    let v = data.mul_vec(w);
    v.iter().zip(losses).map(|(vj, l)| l.value(vj + beta)).sum::<f64>() + lambda * w.iter().map(|x| x.abs()).sum::<f64>()
}

pub fn losses(labels: &[f64], kind: LossKind) -> Vec<LossSpec> {
    labels.iter().map(|b| LossSpec::new(kind, *b).unwrap()).collect()
}

/// Accelerated proximal gradient for the group lasso primal with restarts.
pub fn group_primal_oracle(g: &GroupDual) -> (Vec<f64>, f64) {
    let m = g.data.n_cols();
    let n = g.data.n_rows();
    let a = DMatrix::from_fn(n, m, |r, c| {
        g.data.column(c).iter().find(|(j, _)| *j == r).map_or(0.0, |(_, v)| v)
    });
    let mut aug = a.clone();
    if g.bias {
        aug = aug.insert_column(m, 1.0);
    }
    let lip = aug.clone().svd(false, false).singular_values.max().powi(2);
    let b = DVector::from_column_slice(&g.labels);
    let k = aug.ncols();
    let prox = |z: &DVector<f64>, step: f64| {
        let mut out = z.clone();
        for grp in &g.groups {
            let nrm = grp.iter().map(|&j| z[j] * z[j]).sum::<f64>().sqrt();
            let s = if nrm > step * g.lambda { 1.0 - step * g.lambda / nrm } else { 0.0 };
            for &j in grp {
                out[j] = z[j] * s;
            }
        }
        out
    };
    let obj = |w: &DVector<f64>| {
        let r = &aug * w - &b;
        let reg: f64 = g.groups.iter().map(|grp| grp.iter().map(|&j| w[j] * w[j]).sum::<f64>().sqrt()).sum();
        0.5 * r.norm_squared() + g.lambda * reg
    };
    let mut w = DVector::zeros(k);
    let mut yv = w.clone();
    let mut t: f64 = 1.0;
    let mut f_prev = obj(&w);
    let step = 1.0 / lip;
    for _ in 0..200_000 {
        let grad = aug.transpose() * (&aug * &yv - &b);
        let w_new = prox(&(&yv - step * grad), step);
        let f_new = obj(&w_new);
        if f_new > f_prev {
            // restart
            t = 1.0;
            yv = w.clone();
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        yv = &w_new + ((t - 1.0) / t_new) * (&w_new - &w);
        let done = (&w_new - &w).amax() < 1e-15;
        w = w_new;
        t = t_new;
        f_prev = f_new;
        if done {
            break;
        }
    }
    let beta = if g.bias { w[m] } else { 0.0 };
    (w.as_slice()[..m].to_vec(), beta)
}

/// Solves `min ½‖x‖² + x·c` subject to `G x ≤ h` exactly once the active set is
/// known: projected-gradient warm start on the dual, then an exact KKT solve
/// on the near-active rows. Returns `(x, multipliers)` and whether KKT holds.
pub fn qp_oracle(g: &[Vec<f64>], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, bool) {
    let m = g.len();
    let n = c.len();
    if m == 0 {
        return (c.iter().map(|v| -v).collect(), Vec::new(), true);
    }
    let gm = DMatrix::from_fn(m, n, |i, j| g[i][j]);
    let cv = DVector::from_column_slice(c);
    let hv = DVector::from_column_slice(h);
    // dual: min_μ≥0 ½‖Gᵀμ + c‖² − ... ; x = −(c + Gᵀμ)
    let q = &gm * gm.transpose();
    let lip = q.clone().symmetric_eigen().eigenvalues.max().max(1e-12);
    let lin = &hv + &gm * &cv;
    let mut mu = DVector::zeros(m);
    let mut yv = mu.clone();
    let mut t: f64 = 1.0;
    for _ in 0..50_000 {
        let grad = &q * &yv + &lin;
        let mu_new = (&yv - grad / lip).map(|v| v.max(0.0));
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        yv = &mu_new + ((t - 1.0) / t_new) * (&mu_new - &mu);
        let done = (&mu_new - &mu).amax() < 1e-14;
        mu = mu_new;
        t = t_new;
        if done {
            break;
        }
    }
    let x0 = -(&cv + gm.transpose() * &mu);
    let slack = &hv - &gm * &x0;
    let scale = 1.0 + x0.amax();
    let active: Vec<usize> = (0..m).filter(|&i| mu[i] > 1e-9 || slack[i].abs() < 1e-7 * scale).collect();
    if active.is_empty() {
        let ok = (&gm * &x0 - &hv).max() <= 0.0;
        return (x0.as_slice().to_vec(), vec![0.0; m], ok);
    }
    // exact solve on the active rows: G_S(−c − G_Sᵀμ_S) = h_S
    let gs = DMatrix::from_fn(active.len(), n, |r, j| g[active[r]][j]);
    let hs = DVector::from_fn(active.len(), |r, _| h[active[r]]);
    let lhs = &gs * gs.transpose();
    let rhs = -(&hs + &gs * &cv);
    let sol = lhs.clone().svd(true, true).solve(&rhs, 1e-12).unwrap();
    let mut mu_full = vec![0.0; m];
    for (r, &i) in active.iter().enumerate() {
        mu_full[i] = sol[r];
    }
    let mu_v = DVector::from_column_slice(&mu_full);
    let x = -(&cv + gm.transpose() * &mu_v);
    let viol = (&gm * &x - &hv).max().max(0.0);
    let kkt = viol <= 1e-10 * scale && mu_full.iter().all(|v| *v >= -1e-10);
    let (x, mu_out) = if kkt { (x, mu_full) } else { (x0, mu.as_slice().to_vec()) };
    (x.as_slice().to_vec(), mu_out, kkt)
}

/// Hinge SVM primal solution via the box-constrained dual and an exact solve
/// on the free set. Rows are examples.
pub fn svm_oracle(rows: &[Vec<f64>], labels: &[f64], c: f64) -> Vec<f64> {
    let m = rows.len();
    let n = rows[0].len();
    let z = DMatrix::from_fn(m, n, |i, j| labels[i] * rows[i][j]);
    let q = &z * z.transpose();
    let lip = q.clone().symmetric_eigen().eigenvalues.max().max(1e-12);
    let mut al = DVector::zeros(m);
    let mut yv = al.clone();
    let mut t: f64 = 1.0;
    let ones = DVector::from_element(m, 1.0);
    for _ in 0..100_000 {
        let grad = &q * &yv - &ones;
        let a_new = (&yv - grad / lip).map(|v| v.clamp(0.0, c));
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        yv = &a_new + ((t - 1.0) / t_new) * (&a_new - &al);
        let done = (&a_new - &al).amax() < 1e-15;
        al = a_new;
        t = t_new;
        if done {
            break;
        }
    }
    // polish: free set F satisfies y_i⟨a_i, x⟩ = 1
    let free: Vec<usize> = (0..m).filter(|&i| al[i] > 1e-9 * c && al[i] < c * (1.0 - 1e-9)).collect();
    let at_c: Vec<usize> = (0..m).filter(|&i| al[i] >= c * (1.0 - 1e-9)).collect();
    let base = at_c.iter().fold(DVector::zeros(n), |acc, &i| acc + c * z.row(i).transpose());
    let x_apg = z.transpose() * &al;
    if free.is_empty() {
        return base.as_slice().to_vec();
    }
    let zf = DMatrix::from_fn(free.len(), n, |r, j| z[(free[r], j)]);
    let rhs = DVector::from_element(free.len(), 1.0) - &zf * &base;
    let sol = (&zf * zf.transpose()).svd(true, true).solve(&rhs, 1e-12).unwrap();
    let x = &base + zf.transpose() * &sol;
    let ok = sol.iter().all(|v| *v >= -1e-9 && *v <= c * (1.0 + 1e-9));
    if ok { x.as_slice().to_vec() } else { x_apg.as_slice().to_vec() }
}
