//! Adaptive choice of (ξ_t, ε_t) from a time model and a progress model.
//!
//! Time: `T̂ = C^setup + C^solve · ProblemSize(ξ) / ε`.
//! Progress: `Δ̂ = max{(1 − (1−ε) ξ C^progress) Δ, ε Δ}`.
//! The score `−log(Δ̂/Δ) / T̂` is maximized over a fixed grid.

use std::collections::VecDeque;

pub const N_XI: usize = 125;
pub const N_EPS: usize = 10;
pub const XI_MIN: f64 = 1e-6;
pub const EPS_MIN: f64 = 0.01;
pub const EPS_MAX: f64 = 0.7;
const SETUP_WINDOW: usize = 5;
const PROGRESS_WINDOW: usize = 2;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| if k + 1 == n { hi } else { (a + (b - a) * k as f64 / (n - 1) as f64).exp() })
        .collect()
}

/// 125 log-spaced values in `[1e-6, 1]`, increasing.
pub fn xi_grid() -> Vec<f64> {
    log_grid(XI_MIN, 1.0, N_XI)
}

/// 10 log-spaced values in `[0.01, 0.7]`, increasing.
pub fn eps_grid() -> Vec<f64> {
    log_grid(EPS_MIN, EPS_MAX, N_EPS)
}

/// Median; the mean of the middle two for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn estimate_setup(t_setup: f64) -> f64 {
    t_setup
}

/// `Ĉ^solve = T^solve · ε / ProblemSize`
pub fn estimate_solve(t_solve: f64, eps: f64, problem_size: f64) -> f64 {
    t_solve * eps / problem_size.max(1.0)
}

/// Solves the progress model for `C^progress`:
/// `Δ_t = (1 − (1−ε) ξ C) Δ_{t-1}`.
pub fn estimate_progress(gap_prev: f64, gap: f64, xi: f64, eps: f64) -> Option<f64> {
    let denom = (1.0 - eps) * xi;
    (denom > 0.0 && gap_prev > 0.0).then(|| (1.0 - gap / gap_prev) / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningModel {
    pub setup_history: VecDeque<f64>,
    pub solve_history: VecDeque<f64>,
    pub progress_history: VecDeque<f64>,
    pub c_setup: f64,
    pub c_solve: f64,
    pub c_progress: f64,
    xis: Vec<f64>,
    epss: Vec<f64>,
}

impl Default for TuningModel {
    fn default() -> Self {
        Self::new()
    }
}

fn push(h: &mut VecDeque<f64>, v: f64, cap: usize) {
    h.push_back(v);
    while h.len() > cap {
        h.pop_front();
    }
}

impl TuningModel {
    pub fn new() -> Self {
        Self {
            setup_history: VecDeque::new(),
            solve_history: VecDeque::new(),
            progress_history: VecDeque::new(),
            c_setup: 0.0,
            c_solve: 0.0,
            c_progress: 1.0,
            xis: xi_grid(),
            epss: eps_grid(),
        }
    }

    pub fn xis(&self) -> &[f64] {
        &self.xis
    }

    pub fn epss(&self) -> &[f64] {
        &self.epss
    }

    /// Feeds one iteration's measurements and refreshes the medians.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        t_setup: f64,
        t_solve: f64,
        eps: f64,
        problem_size: f64,
        xi: f64,
        gap_prev: f64,
        gap: f64,
    ) {
        push(&mut self.setup_history, estimate_setup(t_setup), SETUP_WINDOW);
        push(&mut self.solve_history, estimate_solve(t_solve, eps, problem_size), SETUP_WINDOW);
        if let Some(p) = estimate_progress(gap_prev, gap, xi, eps) {
            push(&mut self.progress_history, p, PROGRESS_WINDOW);
        }
        self.refresh();
    }

    fn refresh(&mut self) {
        let v = |h: &VecDeque<f64>| h.iter().copied().collect::<Vec<_>>();
        if let Some(m) = median(&v(&self.setup_history)) {
            self.c_setup = m;
        }
        if let Some(m) = median(&v(&self.solve_history)) {
            self.c_solve = m;
        }
        self.c_progress = median(&v(&self.progress_history)).unwrap_or(1.0).max(1.0);
    }

    pub fn predicted_time(&self, problem_size: f64, eps: f64) -> f64 {
        self.c_setup + self.c_solve * problem_size / eps
    }

    pub fn predicted_gap(&self, gap: f64, xi: f64, eps: f64) -> f64 {
        ((1.0 - (1.0 - eps) * xi * self.c_progress) * gap).max(eps * gap)
    }

    /// Grid argmax of `−log(Δ̂/Δ) / T̂`; `problem_sizes[k]` belongs to `xis()[k]`.
    pub fn choose(&self, problem_sizes: &[f64], gap: f64) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 1.0, 0.5);
        for (k, &xi) in self.xis.iter().enumerate() {
            for &eps in &self.epss {
                let t = self.predicted_time(problem_sizes[k], eps).max(1e-12);
                let score = -(self.predicted_gap(gap, xi, eps) / gap).ln() / t;
                if score > best.0 {
                    best = (score, xi, eps);
                }
            }
        }
        (best.1, best.2)
    }
}
