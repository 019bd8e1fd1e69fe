//! One-step methods and the solve driver.

mod explicit;
mod gauss;
mod reversible;
mod solve;
mod splitting;
mod tableau;

pub use explicit::{
    rk_embedded_step, rk_embedded_step_alloc, rk_fixed_step, rk_step_into, EmbeddedStep, RkWorkspace, StepController,
};
pub use gauss::{gauss_coefficients, gauss_collocation_step, DEFAULT_GAUSS_MAX_ITERS, DEFAULT_GAUSS_TOL};
pub use reversible::{ReparamState, ReversibleStepper, StepDensity};
pub use solve::{solve, Method, SolveFailure, SolveOptions};
pub use splitting::{splitting_step, splitting_step_in_place, Composition, SplittingWorkspace};
pub use tableau::ButcherTableau;
