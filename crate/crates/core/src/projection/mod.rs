//! Post-step projections that push an accepted candidate back onto the level
//! sets of one or more invariants.
//!
//! Every scheme is available twice: as a free function operating on a single
//! state, and as a [`PostStep`] hook that [`crate::integrators::solve`] calls
//! after each accepted step.

mod alternating;
mod homogeneous;
mod newton;
mod pseudo;
mod simultaneous;

pub use alternating::AlternatingProjection;
pub use homogeneous::{
    conjugate_project, dissipative_project, homogeneous_project, DissipativeProjection, HomogeneousProjection, Schedule,
};
pub use newton::{newton_project, NewtonOutcome, NewtonProjection, DEFAULT_NEWTON_MAX_ITERS, DEFAULT_NEWTON_TOL};
pub use pseudo::{
    build_pseudo_generator, pseudo_project, DirectionChoice, PseudoGeneratorSpec, PseudoOutcome, PseudoProjection,
};
pub use simultaneous::{simultaneous_project, DegreeSystem, SimultaneousProjection};

use crate::error::{Error, Result};
use crate::system::Cost;

/// Absolute part of the "effectively zero" test for invariant values.
pub const DEGENERATE_FLOOR: f64 = 1e-13;

/// `|H| ≤ DEGENERATE_FLOOR · (1 + |H_ref|)` counts as zero.
#[inline]
pub fn degenerate_floor(reference: f64) -> f64 {
    DEGENERATE_FLOOR * (1.0 + reference.abs())
}

/// `ln(h_old / h_new)`.
///
/// Fails with [`Error::DegenerateInvariant`] when either value is effectively
/// zero and with [`Error::SignMismatch`] when they have opposite signs.
pub fn log_ratio(h_old: f64, h_new: f64) -> Result<f64> {
    checked_ratio(h_old, h_new).map(f64::ln)
}

/// `h_old / h_new` after the same checks as [`log_ratio`].
pub fn checked_ratio(h_old: f64, h_new: f64) -> Result<f64> {
    if !h_old.is_finite() || !h_new.is_finite() {
        return Err(Error::NonFinite("invariant value"));
    }
    if h_old.abs() <= DEGENERATE_FLOOR {
        return Err(Error::DegenerateInvariant { value: h_old, floor: DEGENERATE_FLOOR });
    }
    let floor = degenerate_floor(h_old);
    if h_new.abs() <= floor {
        return Err(Error::DegenerateInvariant { value: h_new, floor });
    }
    if (h_old > 0.0) != (h_new > 0.0) {
        return Err(Error::SignMismatch { reference: h_old, candidate: h_new });
    }
    Ok(h_old / h_new)
}

/// Errors that mean "leave this candidate alone for this step" rather than
/// "abort the solve".
#[inline]
pub(crate) fn is_skippable(err: &Error) -> bool {
    matches!(err, Error::SignMismatch { .. } | Error::DegenerateInvariant { .. })
}

/// What the driver knows about the step that produced the candidate.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    /// Number of steps accepted before this one.
    pub step_index: u64,
    /// Time at the end of the step.
    pub t: f64,
    pub h: f64,
    /// State at the start of the step.
    pub previous: &'a [f64],
}

/// Correction applied to every accepted step.
///
/// Implementations modify `candidate` in place and account for their work in
/// `cost`. Returning an error aborts the solve; conditions that only make the
/// projection inapplicable for one step should leave `candidate` untouched
/// and bump `cost.projections_skipped` instead.
pub trait PostStep: Send {
    fn apply(&mut self, ctx: &StepContext<'_>, candidate: &mut [f64], cost: &mut Cost) -> Result<()>;

    /// Short identifier used in run records.
    fn name(&self) -> &str;
}

/// The identity hook.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoProjection;

impl PostStep for NoProjection {
    fn apply(&mut self, _: &StepContext<'_>, _: &mut [f64], _: &mut Cost) -> Result<()> {
        Ok(())
    }

    fn name(&self) -> &str {
        "none"
    }
}

impl<P: PostStep + ?Sized> PostStep for Box<P> {
    fn apply(&mut self, ctx: &StepContext<'_>, candidate: &mut [f64], cost: &mut Cost) -> Result<()> {
        (**self).apply(ctx, candidate, cost)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}
