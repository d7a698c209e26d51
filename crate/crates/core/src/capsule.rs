//! Equivalence-region geometry: τ_ξ(β), the capsule relaxation of the
//! teardrop region, and subset tests.

use crate::error::{usage, BlitzError, Result};
use crate::linalg::{dist, dot, norm, DenseVector, SparseVec};
use crate::piecewise::Subdomain;

pub const BISECTION_TOL: f64 = 1e-12;
pub const BISECTION_MAX_ITER: usize = 200;

/// `(x_{t-1}, y_{t-1}, Δ_{t-1})` with `‖x_{t-1} − y_{t-1}‖` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct IterSnapshot {
    pub x_prev: DenseVector,
    pub y_prev: DenseVector,
    pub gap_prev: f64,
    pub dist: f64,
}

impl IterSnapshot {
    pub fn new(x_prev: DenseVector, y_prev: DenseVector, gap_prev: f64) -> Self {
        let dist = dist(&x_prev, &y_prev);
        Self { x_prev, y_prev, gap_prev, dist }
    }
}

/// Scalar part of a capsule: radius and the axial extent along `x − y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapsuleShape {
    pub radius: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl CapsuleShape {
    /// Offset of `c1` from `y` along the unit direction.
    pub fn s1(&self) -> f64 {
        self.d_min + self.radius
    }

    /// Offset of `c2` from `y` along the unit direction.
    pub fn s2(&self) -> f64 {
        self.d_max - self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapsuleParams {
    pub c1: DenseVector,
    pub c2: DenseVector,
    pub radius: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl CapsuleParams {
    pub fn shape(&self) -> CapsuleShape {
        CapsuleShape { radius: self.radius, d_min: self.d_min, d_max: self.d_max }
    }

    /// Distance from `p` to the segment `[c1, c2]`.
    pub fn distance_to_axis(&self, p: &[f64]) -> f64 {
        let seg: Vec<f64> = self.c2.iter().zip(&self.c1).map(|(a, b)| a - b).collect();
        let len2 = dot(&seg, &seg);
        let rel: Vec<f64> = p.iter().zip(&self.c1).map(|(a, b)| a - b).collect();
        let t = if len2 > 0.0 { (dot(&rel, &seg) / len2).clamp(0.0, 1.0) } else { 0.0 };
        rel.iter().zip(&seg).map(|(r, s)| (r - t * s).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.distance_to_axis(p) <= self.radius + tol
    }
}

fn bracket(beta: f64, xi: f64, kappa: f64) -> f64 {
    let tail = if xi == 1.0 { 0.0 } else { (1.0 - xi) / (1.0 - 2.0 * beta) };
    1.0 + beta / (1.0 - beta) * kappa - tail
}

fn tau_raw(beta: f64, xi: f64, gap: f64, d: f64) -> f64 {
    let kappa = 1.0 - d * d / (2.0 * gap);
    beta * (2.0 * gap).sqrt() * bracket(beta, xi, kappa).max(0.0).sqrt()
}

/// `τ_ξ(β) = β√(2Δ)·[1 + (β/(1−β))(1 − d²/(2Δ)) − (1−ξ)/(1−2β)]₊^{1/2}`
pub fn tau_xi(beta: f64, xi: f64, snap: &IterSnapshot) -> Result<f64> {
    if !(beta > 0.0 && beta < 0.5) {
        return usage(format!("beta must lie in (0, 1/2), got {beta}"));
    }
    if !(xi > 0.0 && xi <= 1.0) {
        return usage(format!("xi must lie in (0, 1], got {xi}"));
    }
    if !(snap.gap_prev > 0.0) {
        return Err(BlitzError::Converged);
    }
    Ok(tau_raw(beta, xi, snap.gap_prev, snap.dist))
}

/// Largest β with a positive bracket. The bracket times (1−β)(1−2β) is the
/// convex quadratic `2(1−κ)β² − (2+ξ−κ)β + ξ`, positive at 0 and nonpositive
/// at ½, so the bound is its smaller root.
fn beta_max(xi: f64, kappa: f64) -> f64 {
    if xi >= 1.0 {
        return 0.5 - 1e-12;
    }
    let b = 2.0 + xi - kappa;
    let disc = (b * b - 8.0 * (1.0 - kappa) * xi).max(0.0);
    (2.0 * xi / (b + disc.sqrt())).min(0.5 - 1e-12)
}

struct Tau {
    xi: f64,
    kappa: f64,
    root2gap: f64,
    d: f64,
}

impl Tau {
    fn h(&self, th: f64) -> f64 {
        let tail = if self.xi == 1.0 { 0.0 } else { (1.0 - self.xi) * (1.0 + th) / (1.0 - th) };
        1.0 + self.kappa * th - tail
    }

    fn q(&self, s: f64, th: f64) -> f64 {
        let beta = th / (1.0 + th);
        s * self.d * beta + self.root2gap * beta * self.h(th).max(0.0).sqrt()
    }

    fn dq(&self, s: f64, th: f64) -> f64 {
        let h = self.h(th);
        if h <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let dh = self.kappa
            - if self.xi == 1.0 { 0.0 } else { 2.0 * (1.0 - self.xi) / ((1.0 - th) * (1.0 - th)) };
        let sq = h.sqrt();
        let w = 1.0 / ((1.0 + th) * (1.0 + th));
        s * self.d * w + self.root2gap * (sq * w + th / (1.0 + th) * dh / (2.0 * sq))
    }

    /// sup of the quasiconcave `q_s` over `(lo, hi)` in θ, by bisection on
    /// the sign of its derivative.
    fn sup(&self, s: f64, mut lo: f64, mut hi: f64) -> f64 {
        let (a, b) = (lo, hi);
        let mut it = 0;
        while hi - lo > BISECTION_TOL && it < BISECTION_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if self.dq(s, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            it += 1;
        }
        let mut best = self.q(s, lo).max(self.q(s, hi));
        // endpoints are open; their limits bound the sup from below
        for e in [a, b] {
            let v = self.q(s, e);
            if v.is_finite() {
                best = best.max(v);
            }
        }
        best
    }
}

fn theta(beta: f64) -> f64 {
    beta / (1.0 - beta)
}

/// Radius and axial extent of the capsule for a gap and `d = ‖x − y‖`.
pub fn capsule_shape(gap: f64, d: f64, xi: f64) -> Result<CapsuleShape> {
    if !(gap > 0.0) {
        return Err(BlitzError::Converged);
    }
    if !(xi > 0.0 && xi <= 1.0) {
        return usage(format!("xi must lie in (0, 1], got {xi}"));
    }
    let kappa = 1.0 - d * d / (2.0 * gap);
    let tau = Tau { xi, kappa, root2gap: (2.0 * gap).sqrt(), d };
    let bmax = beta_max(xi, kappa);
    let th_hi = theta(bmax);
    let radius = tau.sup(0.0, 0.0, th_hi);
    let d_max = tau.sup(1.0, 0.0, th_hi);
    // q_{-1} > 0 exactly where (ξ+κ−1) + β(1−ξ−2κ) > 0: an interval
    let (c0, c1) = (xi + kappa - 1.0, 1.0 - xi - 2.0 * kappa);
    let (mut blo, mut bhi) = (0.0, bmax);
    if c1 > 0.0 {
        blo = (-c0 / c1).max(0.0);
    } else if c1 < 0.0 {
        bhi = bhi.min(-c0 / c1);
    } else if c0 <= 0.0 {
        bhi = 0.0;
    }
    let neg_sup = if bhi > blo { tau.sup(-1.0, theta(blo), theta(bhi)).max(0.0) } else { 0.0 };
    Ok(CapsuleShape { radius, d_min: -neg_sup, d_max })
}

pub fn compute_capsule(snap: &IterSnapshot, xi: f64) -> Result<CapsuleParams> {
    let shape = capsule_shape(snap.gap_prev, snap.dist, xi)?;
    let (c1, c2) = capsule_centers(snap, &shape);
    Ok(CapsuleParams { c1, c2, radius: shape.radius, d_min: shape.d_min, d_max: shape.d_max })
}

/// Unit vector along `x − y` (zero when the points coincide).
pub fn unit_direction(snap: &IterSnapshot) -> DenseVector {
    if snap.dist > 0.0 {
        snap.x_prev.iter().zip(&snap.y_prev).map(|(x, y)| (x - y) / snap.dist).collect()
    } else {
        vec![0.0; snap.x_prev.len()]
    }
}

pub fn capsule_centers(snap: &IterSnapshot, shape: &CapsuleShape) -> (DenseVector, DenseVector) {
    let u = unit_direction(snap);
    let at = |s: f64| snap.y_prev.iter().zip(&u).map(|(y, d)| y + s * d).collect::<Vec<_>>();
    (at(shape.s1()), at(shape.s2()))
}

/// Does the capsule meet `{x : ⟨a,x⟩ ≥ b}`?
pub fn capsule_intersects_halfspace_complement(cap: &CapsuleParams, a: &SparseVec, b: f64) -> bool {
    b - a.dot(&cap.c1).max(a.dot(&cap.c2)) < a.norm() * cap.radius
}

pub fn ball_inside_halfspace(center: &[f64], radius: f64, a: &SparseVec, b: f64) -> bool {
    a.dot(center) - b < -a.norm() * radius
}

pub fn ball_inside_ball(center: &[f64], radius: f64, a_center: &[f64], b_radius: f64) -> bool {
    dist(a_center, center) + radius < b_radius
}

fn ball_inside_subdomain(center: &[f64], radius: f64, dom: &Subdomain<'_>) -> Result<bool> {
    Ok(match dom {
        Subdomain::HalfSpace { a, scale, b } => {
            scale * a.dot(center) - b < -(scale.abs() * a.norm() * radius)
        }
        Subdomain::Slab { a, lo, hi } => {
            let u = a.dot(center);
            let m = a.norm() * radius;
            u - hi < -m && lo - u < -m
        }
        Subdomain::BallRegion { center: bc, radius: br } => ball_inside_ball(center, radius, bc, *br),
        Subdomain::GroupNormCap { columns, bound, lipschitz } => {
            let proj: Vec<f64> = columns.iter().map(|c| c.dot(center)).collect();
            norm(&proj) + lipschitz * radius <= *bound
        }
        Subdomain::Complement(_) => return usage("containment in a complement region is not supported"),
    })
}

/// A capsule lies in a convex set iff both end balls do.
pub fn capsule_inside_subdomain(cap: &CapsuleParams, dom: &Subdomain<'_>) -> Result<bool> {
    Ok(ball_inside_subdomain(&cap.c1, cap.radius, dom)?
        && ball_inside_subdomain(&cap.c2, cap.radius, dom)?)
}

/// Ball containment on a subdomain (used by screening).
pub fn ball_inside(center: &[f64], radius: f64, dom: &Subdomain<'_>) -> Result<bool> {
    ball_inside_subdomain(center, radius, dom)
}
