//! Problem formulation: ψ plus piecewise terms φ_i.
//!
//! Every term in the catalog depends on `x` through a linear map: a scalar
//! projection `u = ⟨a_i, x⟩` or, for group terms, `U = A_Gᵀ x`. Most hot paths
//! work on these projections; [`PiecewiseTerm::pieces`] exposes the explicit
//! (subfunction, subdomain) view.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{usage, BlitzError, Result};
use crate::linalg::{dot, norm, DenseVector, SparseVec};
use crate::parallel::{map_indexed, Exec};
use crate::psi::Psi;

/// Relative tolerance used when evaluating equality constraints.
pub const EQUALITY_TOL: f64 = 1e-9;
/// Relative tolerance of the "active at x_{t-1}" rule.
pub const ACTIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    /// Indicator of `u ≤ b`.
    HalfSpace { b: f64 },
    /// Indicator of `|u| ≤ bound`.
    Slab { bound: f64 },
    /// Indicator of `u = b`. Always kept in the working set.
    Hyperplane { b: f64 },
    /// Indicator of `‖U‖ ≤ bound`; `lipschitz` bounds `‖A_Gᵀ v‖ / ‖v‖`.
    GroupBall { bound: f64, lipschitz: f64 },
    /// `weight · max(0, 1 − label·u)`
    Hinge { label: f64, weight: f64 },
    /// `weight · ½ max(0, 1 − label·u)²`
    SquaredHinge { label: f64, weight: f64 },
    /// `weight · ((1−tau)(target−u) if u ≤ target else tau(u−target))`
    Quantile { target: f64, tau: f64, weight: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Vector(SparseVec),
    Group(Vec<SparseVec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTerm {
    kind: TermKind,
    support: Support,
}

/// Region of the variable space.
#[derive(Debug, Clone, PartialEq)]
pub enum Subdomain<'a> {
    /// `{x : scale·⟨a,x⟩ ≤ b}`
    HalfSpace { a: &'a SparseVec, scale: f64, b: f64 },
    /// `{x : lo ≤ ⟨a,x⟩ ≤ hi}`
    Slab { a: &'a SparseVec, lo: f64, hi: f64 },
    BallRegion { center: &'a [f64], radius: f64 },
    /// Inner relaxation of `{x : ‖A_Gᵀx‖ ≤ bound}` used for containment tests.
    GroupNormCap { columns: &'a [SparseVec], bound: f64, lipschitz: f64 },
    /// Closure of the complement of a subdomain.
    Complement(Box<Subdomain<'a>>),
}

/// `weight · ½ max(0, 1 − label⟨a,x⟩)²` restricted to its active side.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothPiece<'a> {
    pub a: &'a SparseVec,
    pub label: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Subfunction<'a> {
    /// `slope·⟨a,x⟩ + intercept`: gradient `slope·a`, offset `intercept`.
    Linear { a: &'a SparseVec, slope: f64, intercept: f64 },
    Zero,
    /// 0 on the subdomain, `+∞` elsewhere.
    Indicator(Subdomain<'a>),
    Smooth(SmoothPiece<'a>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece<'a> {
    pub function: Subfunction<'a>,
    pub domain: Subdomain<'a>,
}

/// A piece seen through the term's projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceShape {
    Zero,
    /// `slope·u + intercept`
    Linear { slope: f64, intercept: f64 },
    Nonlinear,
    Infinite,
}

impl<'a> Subdomain<'a> {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Subdomain::HalfSpace { a, scale, b } => scale * a.dot(x) <= *b,
            Subdomain::Slab { a, lo, hi } => {
                let u = a.dot(x);
                u >= *lo && u <= *hi
            }
            Subdomain::BallRegion { center, radius } => crate::linalg::dist(x, center) <= *radius,
            Subdomain::GroupNormCap { columns, bound, .. } => {
                norm(&columns.iter().map(|c| c.dot(x)).collect::<Vec<_>>()) <= *bound
            }
            Subdomain::Complement(inner) => !inner.contains(x) || inner.on_boundary(x),
        }
    }

    fn on_boundary(&self, x: &[f64]) -> bool {
        match self {
            Subdomain::HalfSpace { a, scale, b } => scale * a.dot(x) == *b,
            Subdomain::Slab { a, lo, hi } => {
                let u = a.dot(x);
                u == *lo || u == *hi
            }
            Subdomain::BallRegion { center, radius } => crate::linalg::dist(x, center) == *radius,
            Subdomain::GroupNormCap { columns, bound, .. } => {
                norm(&columns.iter().map(|c| c.dot(x)).collect::<Vec<_>>()) == *bound
            }
            Subdomain::Complement(inner) => inner.on_boundary(x),
        }
    }
}

impl<'a> Subfunction<'a> {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Subfunction::Linear { a, slope, intercept } => slope * a.dot(x) + intercept,
            Subfunction::Zero => 0.0,
            Subfunction::Indicator(d) => {
                if d.contains(x) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Subfunction::Smooth(p) => {
                let m = 1.0 - p.label * p.a.dot(x);
                p.weight * 0.5 * m * m
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Subfunction::Linear { .. } | Subfunction::Zero)
    }
}

impl PiecewiseTerm {
    pub fn new(kind: TermKind, support: Support) -> Result<Self> {
        let scalar = matches!(support, Support::Vector(_));
        match (&kind, &support) {
            (TermKind::GroupBall { .. }, Support::Vector(_)) => {
                return usage("group terms need a group support")
            }
            (TermKind::GroupBall { bound, lipschitz }, Support::Group(cols)) => {
                if cols.is_empty() {
                    return usage("empty group");
                }
                if !(*bound >= 0.0) || !(*lipschitz >= 0.0) {
                    return usage("group bound and lipschitz must be nonnegative");
                }
            }
            (_, Support::Group(_)) => return usage("scalar terms need a vector support"),
            _ => {}
        }
        if scalar {
            if let Support::Vector(a) = &support {
                if a.norm() == 0.0 {
                    return usage("term direction must be nonzero");
                }
            }
        }
        match kind {
            TermKind::Slab { bound } if !(bound >= 0.0) => return usage("slab bound must be >= 0"),
            TermKind::Hinge { label, weight } | TermKind::SquaredHinge { label, weight }
                if !(weight > 0.0) || label == 0.0 || !label.is_finite() =>
            {
                return usage("hinge terms need weight > 0 and a nonzero label")
            }
            TermKind::Quantile { tau, weight, .. } if !(tau > 0.0 && tau < 1.0 && weight > 0.0) => {
                return usage("quantile needs tau in (0,1) and weight > 0")
            }
            _ => {}
        }
        Ok(Self { kind, support })
    }

    pub fn half_space(a: SparseVec, b: f64) -> Result<Self> {
        Self::new(TermKind::HalfSpace { b }, Support::Vector(a))
    }

    pub fn kind(&self) -> &TermKind {
        &self.kind
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    /// Direction vector of a scalar term.
    pub fn direction(&self) -> Option<&SparseVec> {
        match &self.support {
            Support::Vector(a) => Some(a),
            Support::Group(_) => None,
        }
    }

    pub fn group_columns(&self) -> Option<&[SparseVec]> {
        match &self.support {
            Support::Group(c) => Some(c),
            Support::Vector(_) => None,
        }
    }

    /// Length of the projection (1 for scalar terms, |G| for groups).
    pub fn proj_len(&self) -> usize {
        match &self.support {
            Support::Vector(_) => 1,
            Support::Group(c) => c.len(),
        }
    }

    pub fn nnz(&self) -> usize {
        match &self.support {
            Support::Vector(a) => a.nnz(),
            Support::Group(c) => c.iter().map(|v| v.nnz()).sum(),
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        match &self.support {
            Support::Vector(a) => a.max_index(),
            Support::Group(c) => c.iter().filter_map(|v| v.max_index()).max(),
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self.kind,
            TermKind::HalfSpace { .. }
                | TermKind::Slab { .. }
                | TermKind::Hyperplane { .. }
                | TermKind::GroupBall { .. }
        )
    }

    /// Terms that never leave the working set.
    pub fn is_permanent(&self) -> bool {
        matches!(self.kind, TermKind::Hyperplane { .. })
    }

    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.support {
            Support::Vector(a) => out[0] = a.dot(x),
            Support::Group(c) => {
                for (o, col) in out.iter_mut().zip(c) {
                    *o = col.dot(x);
                }
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.proj_len()];
        self.project_into(x, &mut out);
        out
    }

    /// `y += Σ_k coef_k a_k` over the support.
    pub fn add_scaled_support(&self, coef: &[f64], y: &mut [f64]) {
        match &self.support {
            Support::Vector(a) => a.axpy_into(coef[0], y),
            Support::Group(c) => {
                for (col, ck) in c.iter().zip(coef) {
                    if *ck != 0.0 {
                        col.axpy_into(*ck, y);
                    }
                }
            }
        }
    }

    /// Term value from its projection.
    pub fn value_from_proj(&self, u: &[f64]) -> f64 {
        match self.kind {
            TermKind::HalfSpace { b } => indicator(u[0] <= b),
            TermKind::Slab { bound } => indicator(u[0].abs() <= bound),
            TermKind::Hyperplane { b } => {
                indicator((u[0] - b).abs() <= EQUALITY_TOL * (1.0 + b.abs() + u[0].abs()))
            }
            TermKind::GroupBall { bound, .. } => indicator(norm(u) <= bound),
            TermKind::Hinge { label, weight } => weight * (1.0 - label * u[0]).max(0.0),
            TermKind::SquaredHinge { label, weight } => {
                let m = (1.0 - label * u[0]).max(0.0);
                weight * 0.5 * m * m
            }
            TermKind::Quantile { target, tau, weight } => {
                if u[0] <= target {
                    weight * (1.0 - tau) * (target - u[0])
                } else {
                    weight * tau * (u[0] - target)
                }
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.value_from_proj(&self.project(x))
    }

    pub fn n_pieces(&self) -> usize {
        match self.kind {
            TermKind::Slab { .. } | TermKind::Hyperplane { .. } => 3,
            _ => 2,
        }
    }

    /// π_i on the projection; boundary ties go to the lowest index.
    pub fn partition_from_proj(&self, u: &[f64]) -> usize {
        match self.kind {
            TermKind::HalfSpace { b } => usize::from(u[0] > b),
            TermKind::Slab { bound } => {
                if u[0].abs() <= bound {
                    0
                } else if u[0] > 0.0 {
                    1
                } else {
                    2
                }
            }
            TermKind::Hyperplane { b } => {
                if (u[0] - b).abs() <= EQUALITY_TOL * (1.0 + b.abs() + u[0].abs()) {
                    0
                } else if u[0] > b {
                    1
                } else {
                    2
                }
            }
            TermKind::GroupBall { bound, .. } => usize::from(norm(u) > bound),
            TermKind::Hinge { label, .. } | TermKind::SquaredHinge { label, .. } => {
                usize::from(label * u[0] > 1.0)
            }
            TermKind::Quantile { target, .. } => usize::from(u[0] > target),
        }
    }

    pub fn partition_index(&self, x: &[f64]) -> usize {
        self.partition_from_proj(&self.project(x))
    }

    /// Piece `k` seen through the projection.
    pub fn piece_shape(&self, k: usize) -> PieceShape {
        match (&self.kind, k) {
            (TermKind::HalfSpace { .. }, 0)
            | (TermKind::Slab { .. }, 0)
            | (TermKind::Hyperplane { .. }, 0)
            | (TermKind::GroupBall { .. }, 0) => PieceShape::Zero,
            (TermKind::Hinge { label, weight }, 0) => {
                PieceShape::Linear { slope: -weight * label, intercept: *weight }
            }
            (TermKind::Hinge { .. }, 1) | (TermKind::SquaredHinge { .. }, 1) => PieceShape::Zero,
            (TermKind::SquaredHinge { .. }, 0) => PieceShape::Nonlinear,
            (TermKind::Quantile { target, tau, weight }, 0) => PieceShape::Linear {
                slope: -weight * (1.0 - tau),
                intercept: weight * (1.0 - tau) * target,
            },
            (TermKind::Quantile { target, tau, weight }, 1) => {
                PieceShape::Linear { slope: weight * tau, intercept: -weight * tau * target }
            }
            _ => PieceShape::Infinite,
        }
    }

    /// Value of piece `k` from the projection.
    pub fn piece_value_from_proj(&self, k: usize, u: &[f64]) -> f64 {
        match self.piece_shape(k) {
            PieceShape::Zero => 0.0,
            PieceShape::Linear { slope, intercept } => slope * u[0] + intercept,
            PieceShape::Nonlinear => self.value_from_proj(u),
            PieceShape::Infinite => {
                // the infeasible piece of an indicator is the indicator itself
                self.value_from_proj(u)
            }
        }
    }

    /// C2: does piece `k` lower-bound the whole term? For the catalog every
    /// finite linear piece is a global minorant (terms are maxima of their
    /// affine pieces, or nonnegative with a zero piece).
    pub fn piece_lower_bounds_term(&self, k: usize) -> bool {
        matches!(self.piece_shape(k), PieceShape::Zero | PieceShape::Linear { .. })
    }

    /// Strict containment of `ball(c, r)` in piece `k`'s subdomain, from the
    /// projection `uc` of the center.
    pub fn piece_contains_ball(&self, k: usize, uc: &[f64], r: f64) -> bool {
        let anorm = match &self.support {
            Support::Vector(a) => a.norm(),
            Support::Group(_) => 0.0,
        };
        // {scale·u ≤ b} contains the ball iff scale·uc − b < −|scale|·‖a‖·r
        let hs = |scale: f64, b: f64| scale * uc[0] - b < -(scale.abs() * anorm * r);
        match (&self.kind, k) {
            (TermKind::HalfSpace { b }, 0) => hs(1.0, *b),
            (TermKind::Slab { bound }, 0) => hs(1.0, *bound) && hs(-1.0, *bound),
            (TermKind::GroupBall { bound, lipschitz }, 0) => norm(uc) + lipschitz * r <= *bound,
            (TermKind::Hinge { label, .. } | TermKind::SquaredHinge { label, .. }, 0) => {
                hs(*label, 1.0)
            }
            (TermKind::Hinge { label, .. } | TermKind::SquaredHinge { label, .. }, 1) => {
                hs(-*label, -1.0)
            }
            (TermKind::Quantile { target, .. }, 0) => hs(1.0, *target),
            (TermKind::Quantile { target, .. }, 1) => hs(-1.0, -*target),
            _ => false,
        }
    }

    /// Is this indicator's constraint active at the point with projection `u`?
    pub fn active_at(&self, u: &[f64]) -> bool {
        match self.kind {
            TermKind::HalfSpace { b } | TermKind::Hyperplane { b } => {
                (u[0] - b).abs() <= ACTIVITY_TOL * (1.0 + b.abs())
            }
            TermKind::Slab { bound } => (u[0].abs() - bound).abs() <= ACTIVITY_TOL * (1.0 + bound),
            TermKind::GroupBall { bound, .. } => {
                (norm(u) - bound).abs() <= ACTIVITY_TOL * (1.0 + bound)
            }
            _ => false,
        }
    }

    /// Explicit (subfunction, subdomain) list.
    pub fn pieces(&self) -> Vec<Piece<'_>> {
        match (&self.kind, &self.support) {
            (TermKind::HalfSpace { b }, Support::Vector(a)) => {
                let feasible = Subdomain::HalfSpace { a, scale: 1.0, b: *b };
                vec![
                    Piece { function: Subfunction::Zero, domain: feasible.clone() },
                    Piece {
                        function: Subfunction::Indicator(feasible.clone()),
                        domain: Subdomain::HalfSpace { a, scale: -1.0, b: -b },
                    },
                ]
            }
            (TermKind::Slab { bound }, Support::Vector(a)) => {
                slab_pieces(a, -*bound, *bound)
            }
            (TermKind::Hyperplane { b }, Support::Vector(a)) => slab_pieces(a, *b, *b),
            (TermKind::GroupBall { bound, lipschitz }, Support::Group(c)) => {
                let cap = Subdomain::GroupNormCap { columns: c, bound: *bound, lipschitz: *lipschitz };
                vec![
                    Piece { function: Subfunction::Zero, domain: cap.clone() },
                    Piece {
                        function: Subfunction::Indicator(cap.clone()),
                        domain: Subdomain::Complement(Box::new(cap)),
                    },
                ]
            }
            (TermKind::Hinge { label, weight }, Support::Vector(a)) => vec![
                Piece {
                    function: Subfunction::Linear { a, slope: -weight * label, intercept: *weight },
                    domain: Subdomain::HalfSpace { a, scale: *label, b: 1.0 },
                },
                Piece {
                    function: Subfunction::Zero,
                    domain: Subdomain::HalfSpace { a, scale: -label, b: -1.0 },
                },
            ],
            (TermKind::SquaredHinge { label, weight }, Support::Vector(a)) => vec![
                Piece {
                    function: Subfunction::Smooth(SmoothPiece { a, label: *label, weight: *weight }),
                    domain: Subdomain::HalfSpace { a, scale: *label, b: 1.0 },
                },
                Piece {
                    function: Subfunction::Zero,
                    domain: Subdomain::HalfSpace { a, scale: -label, b: -1.0 },
                },
            ],
            (TermKind::Quantile { target, tau, weight }, Support::Vector(a)) => vec![
                Piece {
                    function: Subfunction::Linear {
                        a,
                        slope: -weight * (1.0 - tau),
                        intercept: weight * (1.0 - tau) * target,
                    },
                    domain: Subdomain::HalfSpace { a, scale: 1.0, b: *target },
                },
                Piece {
                    function: Subfunction::Linear {
                        a,
                        slope: weight * tau,
                        intercept: -weight * tau * target,
                    },
                    domain: Subdomain::HalfSpace { a, scale: -1.0, b: -target },
                },
            ],
            _ => unreachable!("constructor validates kind/support pairs"),
        }
    }
}

fn slab_pieces(a: &SparseVec, lo: f64, hi: f64) -> Vec<Piece<'_>> {
    let band = Subdomain::Slab { a, lo, hi };
    vec![
        Piece { function: Subfunction::Zero, domain: band.clone() },
        Piece {
            function: Subfunction::Indicator(band.clone()),
            domain: Subdomain::HalfSpace { a, scale: -1.0, b: -hi },
        },
        Piece {
            function: Subfunction::Indicator(band),
            domain: Subdomain::HalfSpace { a, scale: 1.0, b: lo },
        },
    ]
}

fn indicator(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Problem (P): `f(x) = ψ(x) + Σ φ_i(x)` with ψ normalized to be 1-strongly convex.
#[derive(Debug, Clone)]
pub struct PiecewiseProblem {
    psi: Psi,
    terms: Vec<PiecewiseTerm>,
    gamma: f64,
    offsets: Vec<usize>,
    exec: Exec,
}

impl PiecewiseProblem {
    /// Scales f by 1/γ so that the stored ψ is 1-strongly convex.
    pub fn new(psi: Psi, terms: Vec<PiecewiseTerm>) -> Result<Self> {
        let n = psi.dim();
        let gamma = psi.gamma();
        for (i, t) in terms.iter().enumerate() {
            if let Some(j) = t.max_index() {
                if j >= n {
                    return usage(format!("term {i} touches coordinate {j} >= dimension {n}"));
                }
            }
        }
        let terms = terms
            .into_iter()
            .map(|mut t| {
                t.kind = match t.kind {
                    TermKind::Hinge { label, weight } => TermKind::Hinge { label, weight: weight / gamma },
                    TermKind::SquaredHinge { label, weight } => {
                        TermKind::SquaredHinge { label, weight: weight / gamma }
                    }
                    TermKind::Quantile { target, tau, weight } => {
                        TermKind::Quantile { target, tau, weight: weight / gamma }
                    }
                    k => k,
                };
                t
            })
            .collect::<Vec<_>>();
        let mut offsets = Vec::with_capacity(terms.len() + 1);
        offsets.push(0);
        for t in &terms {
            offsets.push(offsets.last().unwrap() + t.proj_len());
        }
        Ok(Self { psi: psi.normalized(), terms, gamma, offsets, exec: Exec::default() })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn set_exec(&mut self, exec: Exec) {
        self.exec = exec;
    }

    pub fn dim(&self) -> usize {
        self.psi.dim()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn psi(&self) -> &Psi {
        &self.psi
    }

    pub fn terms(&self) -> &[PiecewiseTerm] {
        &self.terms
    }

    pub fn term(&self, i: usize) -> &PiecewiseTerm {
        &self.terms[i]
    }

    /// The γ that f was divided by at construction.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Range of term `i` inside a flat projection vector.
    pub fn proj_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn proj_len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return usage(format!("point has length {} but problem dimension is {}", x.len(), self.dim()));
        }
        Ok(())
    }

    /// All term projections, flattened.
    pub fn project_all(&self, x: &[f64]) -> Vec<f64> {
        let blocks = map_indexed(self.exec, self.terms.len(), |i| self.terms[i].project(x));
        blocks.concat()
    }

    /// `f(x)`; `+∞` when an indicator is violated or x leaves dom ψ.
    pub fn evaluate_full(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let proj = self.project_all(x);
        Ok(self.evaluate_with_proj(x, &proj))
    }

    pub fn evaluate_with_proj(&self, x: &[f64], proj: &[f64]) -> f64 {
        if !self.psi.in_domain(x) {
            return f64::INFINITY;
        }
        let mut total = self.psi.value(x);
        for (i, t) in self.terms.iter().enumerate() {
            total += t.value_from_proj(&proj[self.proj_range(i)]);
        }
        total
    }

    /// `γ·f(x)`: the objective before normalization.
    pub fn original_objective(&self, x: &[f64]) -> Result<f64> {
        Ok(self.gamma * self.evaluate_full(x)?)
    }

    /// An element of ∂f(y) when y is in the domain: ∇ψ(y) plus the gradient of
    /// the piece selected by π_i (0 for indicators, whose normal cone contains 0).
    pub fn subgradient(&self, y: &[f64]) -> Result<DenseVector> {
        self.check_dim(y)?;
        let mut g = self.psi.gradient(y);
        for t in &self.terms {
            let u = t.project(y);
            let k = t.partition_from_proj(&u);
            match (t.piece_shape(k), &t.kind) {
                (PieceShape::Linear { slope, .. }, _) => t.add_scaled_support(&[slope], &mut g),
                (PieceShape::Nonlinear, TermKind::SquaredHinge { label, weight }) => {
                    let m = 1.0 - label * u[0];
                    t.add_scaled_support(&[-weight * label * m], &mut g);
                }
                _ => {}
            }
        }
        Ok(g)
    }
}

/// Per-term choice in a relaxed objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Full,
    Piece(usize),
}

pub type Assignment = Vec<Slot>;

pub fn full_assignment(problem: &PiecewiseProblem) -> Assignment {
    vec![Slot::Full; problem.n_terms()]
}

pub fn assignment_hash(a: &[Slot]) -> u64 {
    let mut h = DefaultHasher::new();
    a.hash(&mut h);
    h.finish()
}

/// `f_t` for an assignment, with linear pieces collapsed into `⟨a⋆,x⟩ + offset`.
#[derive(Debug, Clone)]
pub struct RelaxedObjective {
    pub hash: u64,
    pub a_star: DenseVector,
    pub offset: f64,
    /// Terms kept in full.
    pub working: Vec<usize>,
    /// Terms assigned a nonlinear piece (not produced by the engine).
    pub other: Vec<(usize, usize)>,
    pub assignment: Assignment,
}

impl RelaxedObjective {
    pub fn new(problem: &PiecewiseProblem, assignment: &[Slot]) -> Result<Self> {
        if assignment.len() != problem.n_terms() {
            return usage("assignment length differs from the number of terms");
        }
        let mut a_star = vec![0.0; problem.dim()];
        let mut offset = 0.0;
        let mut working = Vec::new();
        let mut other = Vec::new();
        for (i, s) in assignment.iter().enumerate() {
            let t = problem.term(i);
            match *s {
                Slot::Full => working.push(i),
                Slot::Piece(k) => {
                    if k >= t.n_pieces() {
                        return usage(format!("term {i} has no piece {k}"));
                    }
                    match t.piece_shape(k) {
                        PieceShape::Zero => {}
                        PieceShape::Linear { slope, intercept } => {
                            t.add_scaled_support(&[slope], &mut a_star);
                            offset += intercept;
                        }
                        _ => other.push((i, k)),
                    }
                }
            }
        }
        Ok(Self { hash: assignment_hash(assignment), a_star, offset, working, other, assignment: assignment.to_vec() })
    }

    pub fn evaluate(&self, problem: &PiecewiseProblem, x: &[f64]) -> Result<f64> {
        problem.check_dim(x)?;
        if !problem.psi().in_domain(x) {
            return Ok(f64::INFINITY);
        }
        let mut total = problem.psi().value(x) + dot(&self.a_star, x) + self.offset;
        for &i in &self.working {
            total += problem.term(i).value(x);
        }
        for &(i, k) in &self.other {
            let t = problem.term(i);
            total += t.piece_value_from_proj(k, &t.project(x));
        }
        Ok(total)
    }

    pub fn working_nnz(&self, problem: &PiecewiseProblem) -> usize {
        self.working.iter().map(|&i| problem.term(i).nnz()).sum()
    }
}

/// Caches the collapsed linear term across iterations, keyed by assignment hash.
#[derive(Debug, Default)]
pub struct CollapseCache {
    cached: Option<RelaxedObjective>,
}

impl CollapseCache {
    pub fn get(&mut self, problem: &PiecewiseProblem, assignment: &[Slot]) -> Result<&RelaxedObjective> {
        let h = assignment_hash(assignment);
        if self.cached.as_ref().map(|r| r.hash) != Some(h) {
            self.cached = Some(RelaxedObjective::new(problem, assignment)?);
        }
        Ok(self.cached.as_ref().unwrap())
    }
}

/// `f_t(x)` for an assignment.
pub fn evaluate_relaxed(problem: &PiecewiseProblem, assignment: &[Slot], x: &[f64]) -> Result<f64> {
    RelaxedObjective::new(problem, assignment)?.evaluate(problem, x)
}

/// Replaces every term whose solution is off its subdomain boundary by the
/// piece active at `x_star`. The reduced objective is the problem relaxed by
/// the returned assignment.
pub fn reduce_at_solution(
    problem: &PiecewiseProblem,
    x_star: &[f64],
    boundary_flags: &[bool],
) -> Result<Assignment> {
    problem.check_dim(x_star)?;
    if boundary_flags.len() != problem.n_terms() {
        return Err(BlitzError::Usage("boundary flag count differs from term count".into()));
    }
    Ok(problem
        .terms()
        .iter()
        .zip(boundary_flags)
        .map(|(t, &on_boundary)| {
            if on_boundary || t.is_permanent() {
                Slot::Full
            } else {
                Slot::Piece(t.partition_index(x_star))
            }
        })
        .collect())
}
