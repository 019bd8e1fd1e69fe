//! Explicit invariant-preserving integration by homogeneous projection.
//!
//! A base one-step method takes a step, then a cheap post-step map pushes the
//! candidate back onto the level set of one or more invariants. When an
//! invariant `H` is homogeneous with respect to a flow `ψ_t`, i.e.
//! `H(ψ_t(x)) = e^{kt} H(x)`, the correcting parameter is available in closed
//! form, `s = ln(H(x) / H(Φ_h(x))) / k`, and no nonlinear solve is needed.
//!
//! The crate is organised as
//!
//! - [`system`]: states, invariants, ODE systems, trajectories and cost counters,
//! - [`action`]: symmetry actions (isotropic, weighted, closed-form, conjugate),
//! - [`linalg`]: the small dense and circulant linear algebra the rest needs,
//! - [`integrators`]: explicit/embedded Runge–Kutta, Gauss collocation,
//!   splitting, reversible step-density adaptivity and the [`integrators::solve`] driver,
//! - [`projection`]: homogeneous, simultaneous, alternating, dissipative,
//!   pseudo (generator-based) and Newton projections, all usable as post-step hooks,
//! - [`problems`]: double pendulums, Kepler, the four-dimensional nonlinear
//!   oscillator, and semidiscrete KdV and Camassa–Holm.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::result_large_err)]

pub mod action;
pub mod error;
pub mod integrators;
pub mod linalg;
pub mod problems;
pub mod projection;
pub mod system;

pub use action::{ActionKind, Diffeomorphism, SymmetryAction};
pub use error::{Error, Result};
pub use system::{Cost, Invariant, OdeSystem, State, Trajectory};
