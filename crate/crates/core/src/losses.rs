//! Smooth losses and their convex conjugates.
//!
//! Every loss is 1-smooth as parameterized here, so every conjugate is
//! 1-strongly convex on its domain.

use crate::error::{usage, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// `4 log(1 + exp(-b z))`
    Logistic,
    /// `½ max(0, 1 - b z)²`
    SquaredHinge,
    /// `½ (z - b)²`
    Squared,
    /// Huber with threshold `s` around the label.
    Huber { s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub label: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `p log p` with the convention `0 log 0 = 0`.
fn xlogx(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

impl LossSpec {
    pub fn new(kind: LossKind, label: f64) -> Result<Self> {
        if !label.is_finite() {
            return usage("label must be finite");
        }
        match kind {
            LossKind::Logistic | LossKind::SquaredHinge if label.abs() != 1.0 => {
                usage("logistic and squared-hinge losses need labels in {-1, +1}")
            }
            LossKind::Huber { s } if !(s > 0.0) => usage("Huber threshold must be positive"),
            _ => Ok(Self { kind, label }),
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        let b = self.label;
        match self.kind {
            LossKind::Logistic => 4.0 * softplus(-b * z),
            LossKind::SquaredHinge => {
                let m = (1.0 - b * z).max(0.0);
                0.5 * m * m
            }
            LossKind::Squared => 0.5 * (z - b) * (z - b),
            LossKind::Huber { s } => {
                let r = (z - b).abs();
                if r <= s {
                    0.5 * r * r
                } else {
                    s * r - 0.5 * s * s
                }
            }
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let b = self.label;
        match self.kind {
            LossKind::Logistic => -4.0 * b * sigmoid(-b * z),
            LossKind::SquaredHinge => -b * (1.0 - b * z).max(0.0),
            LossKind::Squared => z - b,
            LossKind::Huber { s } => (z - b).clamp(-s, s),
        }
    }

    /// Second derivative (right-continuous where the loss has a kink in L').
    pub fn second_derivative(&self, z: f64) -> f64 {
        let b = self.label;
        match self.kind {
            LossKind::Logistic => 4.0 * b * b * sigmoid(b * z) * sigmoid(-b * z),
            LossKind::SquaredHinge => {
                if b * z < 1.0 {
                    b * b
                } else {
                    0.0
                }
            }
            LossKind::Squared => 1.0,
            LossKind::Huber { s } => {
                if (z - b).abs() < s {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed domain `[lo, hi]` of the conjugate.
    pub fn conjugate_domain(&self) -> (f64, f64) {
        let b = self.label;
        match self.kind {
            LossKind::Logistic => {
                if b > 0.0 {
                    (-4.0 * b, 0.0)
                } else {
                    (0.0, -4.0 * b)
                }
            }
            LossKind::SquaredHinge => {
                if b > 0.0 {
                    (f64::NEG_INFINITY, 0.0)
                } else {
                    (0.0, f64::INFINITY)
                }
            }
            LossKind::Squared => (f64::NEG_INFINITY, f64::INFINITY),
            LossKind::Huber { s } => (-s, s),
        }
    }

    pub fn in_conjugate_domain(&self, x: f64) -> bool {
        let (lo, hi) = self.conjugate_domain();
        x >= lo && x <= hi
    }

    /// `L*(x) = sup_z x z - L(z)`; `+∞` outside the domain.
    pub fn conjugate(&self, x: f64) -> f64 {
        if !self.in_conjugate_domain(x) {
            return f64::INFINITY;
        }
        let b = self.label;
        match self.kind {
            LossKind::Logistic => {
                // 4 ℓ*(x / (4b)) with ℓ*(v) = (-v) log(-v) + (1+v) log(1+v)
                let v = x / (4.0 * b);
                4.0 * (xlogx(-v) + xlogx(1.0 + v))
            }
            LossKind::SquaredHinge => {
                let t = x / b + 1.0;
                0.5 * t * t - 0.5
            }
            LossKind::Squared | LossKind::Huber { .. } => 0.5 * (x + b) * (x + b) - 0.5 * b * b,
        }
    }

    /// Derivative of the conjugate. At a closed domain boundary returns the
    /// one-sided derivative, which may be infinite.
    pub fn conjugate_derivative(&self, x: f64) -> f64 {
        let b = self.label;
        match self.kind {
            LossKind::Logistic => {
                let v = x / (4.0 * b);
                ((1.0 + v).ln() - (-v).ln()) / b
            }
            LossKind::SquaredHinge => (x / b + 1.0) / b,
            LossKind::Squared | LossKind::Huber { .. } => x + b,
        }
    }

    /// Fenchel–Young equality check at a few points; guards the conjugate formula.
    pub fn self_test(&self) -> Result<()> {
        for z in [-3.0, -0.7, 0.0, 0.4, 2.5] {
            let x = self.derivative(z);
            let lhs = self.value(z) + self.conjugate(x);
            let rhs = x * z;
            if !((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs())) {
                return usage(format!(
                    "conjugate self-test failed for {:?} at z={z}: {lhs} vs {rhs}",
                    self.kind
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let sq = LossSpec::new(LossKind::Squared, 1.0).unwrap();
        assert_eq!(sq.conjugate(1.0), 1.5);
        let sh = LossSpec::new(LossKind::SquaredHinge, 1.0).unwrap();
        assert_eq!(sh.conjugate(0.3), f64::INFINITY);
        let hu = LossSpec::new(LossKind::Huber { s: 1.0 }, 0.0).unwrap();
        assert_eq!(hu.conjugate(2.0), f64::INFINITY);
    }

    #[test]
    fn self_tests_pass() {
        for kind in [
            LossKind::Logistic,
            LossKind::SquaredHinge,
            LossKind::Squared,
            LossKind::Huber { s: 0.8 },
        ] {
            for b in [-1.0, 1.0] {
                LossSpec::new(kind, b).unwrap().self_test().unwrap();
            }
        }
    }

    #[test]
    fn logistic_conjugate_gradient_inverts_derivative() {
        let l = LossSpec::new(LossKind::Logistic, -1.0).unwrap();
        for z in [-2.0, 0.1, 3.0] {
            let x = l.derivative(z);
            assert!((l.conjugate_derivative(x) - z).abs() < 1e-10);
        }
    }

    #[test]
    fn logistic_is_one_smooth() {
        let l = LossSpec::new(LossKind::Logistic, 1.0).unwrap();
        assert!((l.second_derivative(0.0) - 1.0).abs() < 1e-15);
        assert!(l.second_derivative(1.3) < 1.0);
    }
}
