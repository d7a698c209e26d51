//! Working-set selection (C1–C3) and the ProblemSize sweep over ξ.

use crate::capsule::{capsule_shape, CapsuleParams, IterSnapshot};
use crate::error::Result;
use crate::minorant::TermMinorants;
use crate::parallel::map_indexed;
use crate::piecewise::{Assignment, PiecewiseProblem, Slot};

/// Projections of a snapshot along the capsule axis: `y_{t-1}` and the unit
/// direction toward `x_{t-1}`. Every capsule point on the axis projects to
/// `proj_y + s · proj_dir`.
#[derive(Debug, Clone)]
pub struct AxisProjections {
    pub proj_y: Vec<f64>,
    pub proj_dir: Vec<f64>,
    pub dist: f64,
}

impl AxisProjections {
    pub fn new(problem: &PiecewiseProblem, snap: &IterSnapshot, proj_y: Vec<f64>) -> Self {
        let dir = crate::capsule::unit_direction(snap);
        Self { proj_y, proj_dir: problem.project_all(&dir), dist: snap.dist }
    }

    fn at(&self, problem: &PiecewiseProblem, i: usize, s: f64) -> Vec<f64> {
        let r = problem.proj_range(i);
        self.proj_y[r.clone()].iter().zip(&self.proj_dir[r]).map(|(y, d)| y + s * d).collect()
    }
}

/// Decision for term `i` given the projections of the two capsule centers
/// and of `x_{t-1}`.
#[allow(clippy::too_many_arguments)]
fn decide(
    problem: &PiecewiseProblem,
    prev: &TermMinorants,
    i: usize,
    uc1: &[f64],
    uc2: &[f64],
    ux: &[f64],
    radius: f64,
) -> Slot {
    let t = problem.term(i);
    if t.is_permanent() || (t.is_indicator() && t.active_at(ux)) {
        return Slot::Full;
    }
    let k = t.partition_from_proj(uc1);
    let c1 = t.piece_contains_ball(k, uc1, radius) && t.piece_contains_ball(k, uc2, radius);
    let c2 = t.piece_lower_bounds_term(k);
    let c3 = prev.dominated_by(problem, i, t.piece_shape(k));
    if c1 && c2 && c3 {
        Slot::Piece(k)
    } else {
        Slot::Full
    }
}

/// C1–C3 selection for a capsule. `prev` are the term minorants of the
/// previous lower bound, `x_prev` the point `x_{t-1}` used for activity.
pub fn select_working_set(
    problem: &PiecewiseProblem,
    prev: &TermMinorants,
    x_prev: &[f64],
    capsule: &CapsuleParams,
) -> Assignment {
    map_indexed(problem.exec(), problem.n_terms(), |i| {
        let t = problem.term(i);
        decide(problem, prev, i, &t.project(&capsule.c1), &t.project(&capsule.c2), &t.project(x_prev), capsule.radius)
    })
}

/// Same as [`select_working_set`] but from axis projections and a capsule
/// shape; avoids touching the data twice.
pub fn select_from_axis(
    problem: &PiecewiseProblem,
    prev: &TermMinorants,
    axis: &AxisProjections,
    capsule: &CapsuleParams,
) -> Assignment {
    let (s1, s2) = (capsule.d_min + capsule.radius, capsule.d_max - capsule.radius);
    map_indexed(problem.exec(), problem.n_terms(), |i| {
        decide(
            problem,
            prev,
            i,
            &axis.at(problem, i, s1),
            &axis.at(problem, i, s2),
            &axis.at(problem, i, axis.dist),
            capsule.radius,
        )
    })
}

/// For each ξ candidate (increasing), `Σ NNZ` over the terms that would be
/// in the working set. Returns `(problem_sizes, all_in)` where `all_in[k]`
/// says whether every term is selected at `xis[k]`.
pub fn problem_size_sweep(
    problem: &PiecewiseProblem,
    prev: &TermMinorants,
    axis: &AxisProjections,
    gap: f64,
    xis: &[f64],
) -> Result<(Vec<f64>, Vec<bool>)> {
    let shapes = xis
        .iter()
        .map(|&xi| capsule_shape(gap, axis.dist, xi))
        .collect::<Result<Vec<_>>>()?;
    // entry[i] = smallest candidate index at which term i is selected,
    // scanning downward from ξ = max and stopping at the first exit
    let entry = map_indexed(problem.exec(), problem.n_terms(), |i| {
        let mut first_in = xis.len();
        for k in (0..xis.len()).rev() {
            let sh = &shapes[k];
            let slot = decide(
                problem,
                prev,
                i,
                &axis.at(problem, i, sh.s1()),
                &axis.at(problem, i, sh.s2()),
                &axis.at(problem, i, axis.dist),
                sh.radius,
            );
            if slot == Slot::Full {
                first_in = k;
            } else {
                break;
            }
        }
        first_in
    });
    let mut sizes = vec![0.0; xis.len()];
    let mut all_in = vec![true; xis.len()];
    for (i, &e) in entry.iter().enumerate() {
        let nnz = problem.term(i).nnz() as f64;
        for s in sizes.iter_mut().skip(e) {
            *s += nnz;
        }
        for a in all_in.iter_mut().take(e) {
            *a = false;
        }
    }
    Ok((sizes, all_in))
}
