//! Solvers for difference-of-convex (DC) programs
//!
//! ```text
//! minimize f(x) = phi(x) + g(x) - h(x)
//! ```
//!
//! with `phi` smooth and `g`, `h` convex. The crate provides
//!
//! * the boosted proximal point method (proximal step followed by an Armijo
//!   linesearch along `d = y - x`) and the plain proximal point baseline,
//! * the inertial proximal method and its smooth-`h` specialization,
//! * a proximal-operator catalog with a numeric fallback,
//! * convergence diagnostics: Lojasiewicz exponent estimation, empirical rate
//!   classification and the sequence-rate lemma used to bound them.
//!
//! Every solver verifies its descent inequalities live and refuses to continue
//! when one is violated, so a returned [`Trace`] is also a certificate that the
//! monitored inequalities held along the run.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod bppa;
mod error;
pub mod inertial;
pub mod linalg;
pub mod num;
pub mod oracle;
pub mod problems;
pub mod prox;
pub mod trace;

pub use error::{DcError, Violation};
pub use oracle::{ConvexOracle, DcProblem, SmoothOracle};
pub use prox::{ProxResult, ProxSpec};
pub use trace::{CheckSettings, IterateRecord, SolverConfig, SolverKind, Termination, Trace};

pub type Result<T, E = DcError> = core::result::Result<T, E>;
