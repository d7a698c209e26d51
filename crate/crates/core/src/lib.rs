//! Working-set convex optimization over piecewise objectives.
//!
//! Problems have the form `f(x) = ψ(x) + Σ_i φ_i(x)` with ψ 1-strongly convex
//! and each φ_i piecewise (linear pieces, indicators of simple convex sets, or
//! smooth pieces). The engine ([`engine::Engine`]) repeatedly solves a relaxed
//! objective in which terms outside a capsule-shaped equivalence region are
//! replaced by one of their linear pieces, and certifies progress with a
//! quadratic lower bound. [`screening`] removes pieces safely ahead of time.

pub mod capsule;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod minorant;
pub mod parallel;
pub mod piecewise;
pub mod problems;
pub mod psi;
pub mod screening;
pub mod solvers;

pub use error::{BlitzError, Result};
pub use linalg::{DenseVector, SparseColumnMatrix, SparseVec};
pub use parallel::Exec;
pub use piecewise::{Assignment, PiecewiseProblem, PiecewiseTerm, Slot};
