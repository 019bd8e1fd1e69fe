//! Single-invariant projections along a symmetry action.

use std::sync::Arc;

use super::{checked_ratio, is_skippable, PostStep, PseudoProjection, StepContext};
use crate::action::{ActionKind, SymmetryAction};
use crate::error::{Error, Result};
use crate::system::{Cost, Invariant, State};

fn check_degree(k: f64) -> Result<()> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidDegree(k));
    }
    Ok(())
}

/// `ψ_s(x)` with `s = ln(target / H(x)) / k`, which puts `H` back on `target`
/// when `H` has degree `k` under `action`.
pub fn homogeneous_project(action: &SymmetryAction, k: f64, target: f64, x: &[f64], inv: &Invariant) -> Result<State> {
    check_degree(k)?;
    let ratio = checked_ratio(target, inv.value(x))?;
    let mut out = vec![0.0; x.len()];
    action.apply_ratio_into(ratio, k, x, &mut out)?;
    Ok(out)
}

/// Like [`homogeneous_project`] but steers `H` onto a prescribed value
/// `alpha` instead of a conserved target, e.g. `α = e^{-γh} H(x₀)` for a
/// linearly damped invariant.
pub fn dissipative_project(action: &SymmetryAction, k: f64, alpha: f64, x: &[f64], inv: &Invariant) -> Result<State> {
    homogeneous_project(action, k, alpha, x, inv)
}

/// Homogeneous projection through a conjugate action `φ⁻¹ ∘ e^{tA} ∘ φ`.
///
/// Fails with [`Error::IllConditionedMap`] or [`Error::OutOfRange`] when the
/// change of variables cannot be trusted at `x`.
pub fn conjugate_project(action: &SymmetryAction, k: f64, target: f64, x: &[f64], inv: &Invariant) -> Result<State> {
    if !matches!(action.kind(), ActionKind::ConjugateAction { .. }) {
        return Err(Error::InvalidArgument("conjugate_project needs a conjugate action".into()));
    }
    homogeneous_project(action, k, target, x, inv)
}

/// Hook form of [`homogeneous_project`] with a fixed target.
///
/// With a fallback attached, candidates the action cannot handle
/// (ill-conditioned or out-of-range conjugate maps) go through the pseudo
/// projection instead and are counted in `projection_fallbacks`.
pub struct HomogeneousProjection {
    name: String,
    invariant: Invariant,
    index: usize,
    action: SymmetryAction,
    degree: f64,
    target: f64,
    fallback: Option<PseudoProjection>,
    out: State,
}

impl HomogeneousProjection {
    /// Projects `invariant` (with index `index` in the action's degree list)
    /// onto `target`.
    pub fn new(invariant: Invariant, index: usize, action: SymmetryAction, target: f64) -> Result<Self> {
        let degree = action.degree(index).ok_or_else(|| {
            Error::InvalidArgument(format!("invariant {} is not homogeneous under the given action", invariant.label()))
        })?;
        check_degree(degree)?;
        Ok(Self {
            name: format!("homogeneous[{}]", invariant.label()),
            invariant,
            index,
            action,
            degree,
            target,
            fallback: None,
            out: Vec::new(),
        })
    }

    pub fn with_fallback(mut self, fallback: PseudoProjection) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn degree(&self) -> f64 {
        self.degree
    }

    fn try_project(&mut self, candidate: &mut [f64]) -> Result<()> {
        self.out.resize(candidate.len(), 0.0);
        self.action.project_onto(self.index, &self.invariant, self.degree, self.target, candidate, &mut self.out)?;
        candidate.copy_from_slice(&self.out);
        Ok(())
    }
}

impl PostStep for HomogeneousProjection {
    fn apply(&mut self, ctx: &StepContext<'_>, candidate: &mut [f64], cost: &mut Cost) -> Result<()> {
        cost.projection_evals += 1;
        match self.try_project(candidate) {
            Ok(()) => Ok(()),
            Err(e) if is_skippable(&e) => {
                cost.projections_skipped += 1;
                Ok(())
            }
            Err(e @ (Error::IllConditionedMap(_) | Error::OutOfRange(_))) => match &mut self.fallback {
                Some(fallback) => {
                    cost.projection_fallbacks += 1;
                    // the fallback does its own accounting
                    cost.projection_evals -= 1;
                    fallback.apply(ctx, candidate, cost)
                }
                None => Err(e),
            },
            Err(e) => Err(e),
        }
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Target value `α(x, h)` for a dissipative projection, evaluated at the
/// state `x` at the start of the step.
pub type Schedule = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Hook form of [`dissipative_project`].
pub struct DissipativeProjection {
    invariant: Invariant,
    action: SymmetryAction,
    degree: f64,
    schedule: Schedule,
    out: State,
}

impl DissipativeProjection {
    pub fn new(invariant: Invariant, index: usize, action: SymmetryAction, schedule: Schedule) -> Result<Self> {
        let degree = action.degree(index).ok_or_else(|| {
            Error::InvalidArgument(format!("invariant {} is not homogeneous under the given action", invariant.label()))
        })?;
        check_degree(degree)?;
        Ok(Self { invariant, action, degree, schedule, out: Vec::new() })
    }

    /// The schedule `α(x, h) = e^{-γh} H(x)` of a linearly damped invariant.
    pub fn exponential(invariant: Invariant, index: usize, action: SymmetryAction, rate: f64) -> Result<Self> {
        let h = invariant.clone();
        Self::new(invariant, index, action, Arc::new(move |x, step| (-rate * step).exp() * h.value(x)))
    }
}

impl PostStep for DissipativeProjection {
    fn apply(&mut self, ctx: &StepContext<'_>, candidate: &mut [f64], cost: &mut Cost) -> Result<()> {
        cost.projection_evals += 1;
        let alpha = (self.schedule)(ctx.previous, ctx.h);
        let ratio = match checked_ratio(alpha, self.invariant.value(candidate)) {
            Ok(r) => r,
            Err(e) if is_skippable(&e) => {
                cost.projections_skipped += 1;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        self.out.resize(candidate.len(), 0.0);
        self.action.apply_ratio_into(ratio, self.degree, candidate, &mut self.out)?;
        candidate.copy_from_slice(&self.out);
        Ok(())
    }

    fn name(&self) -> &str {
        "dissipative"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::IdentityMap;

    fn energy() -> Invariant {
        Invariant::new(
            "H",
            |x| 0.5 * (x[0] * x[0] + x[1] * x[1]),
            |x, g| {
                g[0] = x[0];
                g[1] = x[1];
            },
        )
    }

    #[test]
    fn harmonic_oscillator_after_euler_step() {
        // Euler from (1, 0) with h = 0.1 lands on (1, -0.1)
        let cand = [1.0, -0.1];
        let inv = energy();
        assert!((inv.value(&cand) - 0.505).abs() < 1e-15);
        let action = SymmetryAction::isotropic(vec![Some(2.0)]);
        let out = homogeneous_project(&action, 2.0, 0.5, &cand, &inv).unwrap();
        let lambda: f64 = 0.5 / 0.505;
        assert!((out[0] - lambda.sqrt()).abs() < 1e-15);
        assert!((out[1] + 0.1 * lambda.sqrt()).abs() < 1e-15);
        assert!((out[0] - 0.995037190209989).abs() < 1e-14);
        assert!((inv.value(&out) - 0.5).abs() <= 4.0 * f64::EPSILON * 0.5);
    }

    #[test]
    fn candidate_on_manifold_is_unchanged() {
        let action = SymmetryAction::isotropic(vec![Some(2.0)]);
        let x = [0.6, -0.8];
        let out = homogeneous_project(&action, 2.0, 0.5, &x, &energy()).unwrap();
        assert_eq!(out, x.to_vec());
    }

    #[test]
    fn zero_degree_is_rejected() {
        let action = SymmetryAction::isotropic(vec![Some(0.0)]);
        assert!(matches!(homogeneous_project(&action, 0.0, 0.5, &[1.0, 0.0], &energy()), Err(Error::InvalidDegree(_))));
        assert!(HomogeneousProjection::new(energy(), 0, action, 0.5).is_err());
    }

    #[test]
    fn conjugate_with_identity_reduces_to_plain_projection() {
        let inv = energy();
        let cand = [1.2, -0.4];
        let plain = SymmetryAction::diagonal(vec![1.0, 1.0], vec![Some(2.0)]);
        let conj = SymmetryAction::conjugate(Arc::new(IdentityMap), vec![1.0, 1.0], vec![Some(2.0)]);
        let a = homogeneous_project(&plain, 2.0, 0.5, &cand, &inv).unwrap();
        let b = conjugate_project(&conj, 2.0, 0.5, &cand, &inv).unwrap();
        assert_eq!(a, b);
        assert!(conjugate_project(&plain, 2.0, 0.5, &cand, &inv).is_err());
    }

    #[test]
    fn dissipative_examples() {
        let inv = energy();
        let action = SymmetryAction::isotropic(vec![Some(2.0)]);
        let cand = [1.0, -0.1];
        let same = dissipative_project(&action, 2.0, 0.5, &cand, &inv).unwrap();
        assert_eq!(same, homogeneous_project(&action, 2.0, 0.5, &cand, &inv).unwrap());
        assert!(matches!(dissipative_project(&action, 2.0, 0.0, &cand, &inv), Err(Error::DegenerateInvariant { .. })));
    }

    #[test]
    fn exponential_schedule_on_damped_scalar() {
        // x' = -x/2, H = x², so H' = -H
        let inv = Invariant::new("H", |x| x[0] * x[0], |x, g| g[0] = 2.0 * x[0]);
        let action = SymmetryAction::isotropic(vec![Some(2.0)]);
        let mut hook = DissipativeProjection::exponential(inv.clone(), 0, action, 1.0).unwrap();
        let x0 = [1.3];
        let h = 0.1;
        let mut cand = [x0[0] + h * (-0.5 * x0[0])];
        let ctx = StepContext { step_index: 0, t: h, h, previous: &x0 };
        let mut cost = Cost::default();
        hook.apply(&ctx, &mut cand, &mut cost).unwrap();
        let expected = (-h).exp() * inv.value(&x0);
        assert!((inv.value(&cand) - expected).abs() <= 1e-12 * expected);
        assert_eq!(cost.projection_evals, 1);
    }

    #[test]
    fn sign_mismatch_skips_and_counts() {
        let inv = Invariant::new("x", |x| x[0], |_, g| g[0] = 1.0);
        let action = SymmetryAction::isotropic(vec![Some(1.0)]);
        let mut hook = HomogeneousProjection::new(inv, 0, action, 1.0).unwrap();
        let prev = [1.0];
        let ctx = StepContext { step_index: 0, t: 0.1, h: 0.1, previous: &prev };
        let mut cand = [-0.25];
        let mut cost = Cost::default();
        hook.apply(&ctx, &mut cand, &mut cost).unwrap();
        assert_eq!(cand, [-0.25]);
        assert_eq!(cost.projections_skipped, 1);
        assert_eq!(cost.projection_evals, 1);
    }
}
