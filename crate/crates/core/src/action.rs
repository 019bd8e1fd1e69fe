//! One-parameter symmetry actions `ψ_t` and the degree law
//! `H(ψ_t(x)) = e^{kt} H(x)` they satisfy for homogeneous invariants.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::projection::checked_ratio;
use crate::system::{Invariant, State};

/// A closed-form flow together with its infinitesimal generator.
pub trait Flow: Send + Sync {
    /// Writes `ψ_t(x)` into `out`.
    fn flow(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// Writes `g(x) = d/dt ψ_t(x)|_{t=0}` into `out`.
    fn generator(&self, x: &[f64], out: &mut [f64]);
}

/// An invertible change of variables `y = φ(x)` with an explicit inverse.
pub trait Diffeomorphism: Send + Sync {
    fn forward(&self, x: &[f64], y: &mut [f64]);

    /// Writes `φ⁻¹(y)` into `x`. Multivalued inverses pick the branch closest
    /// to `reference`.
    fn inverse(&self, y: &[f64], reference: &[f64], x: &mut [f64]) -> Result<()>;

    /// Rejects points where the map or its inverse amplifies errors.
    fn check_conditioning(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Invariant `index` of the system evaluated at `y = φ(x)`, for maps built
    /// around that invariant. Lets a projection read `H` off the transformed
    /// state instead of evaluating it separately.
    fn transformed_value(&self, _index: usize, _y: &[f64]) -> Option<f64> {
        None
    }

    /// [`Diffeomorphism::check_conditioning`] followed by
    /// [`Diffeomorphism::forward`]; maps can override it to share work.
    fn forward_checked(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_conditioning(x)?;
        self.forward(x, y);
        Ok(())
    }
}

/// `φ = id`; mostly useful in tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl Diffeomorphism for IdentityMap {
    fn forward(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }

    fn inverse(&self, y: &[f64], _reference: &[f64], x: &mut [f64]) -> Result<()> {
        x.copy_from_slice(y);
        Ok(())
    }
}

#[derive(Clone)]
pub enum ActionKind {
    /// `ψ_t(x) = e^t x`.
    Isotropic,
    /// `ψ_t(x) = diag(e^{w_i t}) x`.
    DiagonalWeights(Vec<f64>),
    ClosedFormFlow(Arc<dyn Flow>),
    /// `ψ_t = φ⁻¹ ∘ diag(e^{w_i t}) ∘ φ`.
    ConjugateAction {
        map: Arc<dyn Diffeomorphism>,
        weights: Vec<f64>,
    },
}

impl fmt::Debug for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::Isotropic => write!(f, "Isotropic"),
            ActionKind::DiagonalWeights(w) => f.debug_tuple("DiagonalWeights").field(w).finish(),
            ActionKind::ClosedFormFlow(_) => write!(f, "ClosedFormFlow(..)"),
            ActionKind::ConjugateAction { weights, .. } => {
                f.debug_struct("ConjugateAction").field("weights", weights).finish()
            }
        }
    }
}

/// A symmetry action together with the degree of each system invariant under
/// it. `None` means the invariant is not homogeneous for this action; a degree
/// of zero means it is left unchanged.
#[derive(Debug, Clone)]
pub struct SymmetryAction {
    kind: ActionKind,
    degrees: Vec<Option<f64>>,
}

impl SymmetryAction {
    pub fn new(kind: ActionKind, degrees: Vec<Option<f64>>) -> Self {
        Self { kind, degrees }
    }

    pub fn isotropic(degrees: Vec<Option<f64>>) -> Self {
        Self::new(ActionKind::Isotropic, degrees)
    }

    pub fn diagonal(weights: Vec<f64>, degrees: Vec<Option<f64>>) -> Self {
        Self::new(ActionKind::DiagonalWeights(weights), degrees)
    }

    pub fn conjugate(map: Arc<dyn Diffeomorphism>, weights: Vec<f64>, degrees: Vec<Option<f64>>) -> Self {
        Self::new(ActionKind::ConjugateAction { map, weights }, degrees)
    }

    pub fn kind(&self) -> &ActionKind {
        &self.kind
    }

    pub fn degrees(&self) -> &[Option<f64>] {
        &self.degrees
    }

    /// Degree of invariant `index`, if it is homogeneous under this action.
    pub fn degree(&self, index: usize) -> Option<f64> {
        self.degrees.get(index).copied().flatten()
    }

    /// Per-coordinate weights when the generator is diagonal.
    pub fn diagonal_weights(&self, dim: usize) -> Option<Vec<f64>> {
        match &self.kind {
            ActionKind::Isotropic => Some(vec![1.0; dim]),
            ActionKind::DiagonalWeights(w) => Some(w.clone()),
            _ => None,
        }
    }

    /// Writes `ψ_t(x)` into `out`.
    pub fn apply_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            ActionKind::ClosedFormFlow(flow) => {
                flow.flow(t, x, out);
                Ok(())
            }
            _ => self.scale_by(|w| (w * t).exp(), x, out),
        }
    }

    /// Writes `ψ_s(x)` into `out` for `s = ln(ratio)/k`, so that an invariant of
    /// degree `k` gets multiplied by `ratio`.
    ///
    /// Diagonal factors `e^{w s} = ratio^{w/k}` are formed directly from the
    /// ratio, which is exact for the common exponents ±1, ½ and 2.
    pub fn apply_ratio_into(&self, ratio: f64, k: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            ActionKind::ClosedFormFlow(flow) => {
                flow.flow(ratio.ln() / k, x, out);
                Ok(())
            }
            _ => self.scale_by(|w| ratio_power(ratio, w / k), x, out),
        }
    }

    /// Writes `ψ_s(x)` into `out` with `s` chosen so that invariant `index`
    /// (`inv`, of degree `k`) lands on `target`. Conjugate actions whose map
    /// knows the invariant in its own variables evaluate it there, sharing
    /// one forward map between the value and the scaling.
    pub fn project_onto(
        &self,
        index: usize,
        inv: &Invariant,
        k: f64,
        target: f64,
        x: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let ActionKind::ConjugateAction { map, weights } = &self.kind else {
            let ratio = checked_ratio(target, inv.value(x))?;
            return self.apply_ratio_into(ratio, k, x, out);
        };
        let n = x.len();
        let mut stack = [0.0; 16];
        let mut heap = Vec::new();
        let buf: &mut [f64] = if 2 * n <= stack.len() {
            &mut stack[..2 * n]
        } else {
            heap.resize(2 * n, 0.0);
            &mut heap
        };
        let (y, scaled) = buf.split_at_mut(n);
        map.forward_checked(x, y)?;
        let h = match map.transformed_value(index, y) {
            Some(h) => h,
            None => inv.value(x),
        };
        let ratio = checked_ratio(target, h)?;
        scale_diagonal(weights, |w| ratio_power(ratio, w / k), y, scaled);
        map.inverse(scaled, x, out)?;
        if !crate::system::all_finite(out) {
            return Err(Error::NonFinite("symmetry action"));
        }
        Ok(())
    }

    fn scale_by(&self, factor: impl Fn(f64) -> f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            ActionKind::Isotropic => {
                let c = factor(1.0);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = c * v;
                }
            }
            ActionKind::DiagonalWeights(w) => scale_diagonal(w, &factor, x, out),
            ActionKind::ClosedFormFlow(_) => unreachable!("closed-form flows are not diagonal"),
            ActionKind::ConjugateAction { map, weights } => {
                let n = x.len();
                let mut stack = [0.0; 16];
                let mut heap = Vec::new();
                let buf: &mut [f64] = if 2 * n <= stack.len() {
                    &mut stack[..2 * n]
                } else {
                    heap.resize(2 * n, 0.0);
                    &mut heap
                };
                let (y, scaled) = buf.split_at_mut(n);
                map.forward_checked(x, y)?;
                scale_diagonal(weights, &factor, y, scaled);
                map.inverse(scaled, x, out)?;
            }
        }
        if !crate::system::all_finite(out) {
            return Err(Error::NonFinite("symmetry action"));
        }
        Ok(())
    }

    pub fn apply(&self, t: f64, x: &[f64]) -> Result<State> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(t, x, &mut out)?;
        Ok(out)
    }

    /// The infinitesimal generator at `x`. Conjugate actions use a centred
    /// difference of the flow in `t`.
    pub fn generator(&self, x: &[f64]) -> Result<State> {
        let mut out = vec![0.0; x.len()];
        match &self.kind {
            ActionKind::Isotropic => out.copy_from_slice(x),
            ActionKind::DiagonalWeights(w) => {
                for ((o, wi), xi) in out.iter_mut().zip(w).zip(x) {
                    *o = wi * xi;
                }
            }
            ActionKind::ClosedFormFlow(flow) => flow.generator(x, &mut out),
            ActionKind::ConjugateAction { .. } => {
                let dt = 1e-6;
                let fwd = self.apply(dt, x)?;
                let bwd = self.apply(-dt, x)?;
                for ((o, a), b) in out.iter_mut().zip(&fwd).zip(&bwd) {
                    *o = (a - b) / (2.0 * dt);
                }
            }
        }
        Ok(out)
    }
}

#[inline]
fn scale_diagonal(weights: &[f64], factor: impl Fn(f64) -> f64, x: &[f64], out: &mut [f64]) {
    // weights usually repeat, so reuse the last factor
    let mut last = (f64::NAN, 0.0);
    for ((o, &w), v) in out.iter_mut().zip(weights).zip(x) {
        if w != last.0 {
            last = (w, factor(w));
        }
        *o = last.1 * v;
    }
}

/// `ratio^e`.
#[inline]
fn ratio_power(ratio: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        ratio
    } else if e == -1.0 {
        1.0 / ratio
    } else if e == 0.5 {
        ratio.sqrt()
    } else if e == -0.5 {
        1.0 / ratio.sqrt()
    } else if e == 2.0 {
        ratio * ratio
    } else {
        ratio.powf(e)
    }
}

/// Relative defect `|H(ψ_t(x)) - e^{kt} H(x)| / |H(x)|` of the degree law.
pub fn evaluate_degree_law(action: &SymmetryAction, inv: &Invariant, k: f64, x: &[f64], t: f64) -> Result<f64> {
    let h = inv.value(x);
    let floor = crate::projection::DEGENERATE_FLOOR;
    if h.abs() <= floor {
        return Err(Error::DegenerateInvariant { value: h, floor });
    }
    let moved = action.apply(t, x)?;
    Ok((inv.value(&moved) - (k * t).exp() * h).abs() / h.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> Invariant {
        Invariant::new(
            "r2",
            |x| x[0] * x[0] + x[1] * x[1],
            |x, g| {
                g[0] = 2.0 * x[0];
                g[1] = 2.0 * x[1];
            },
        )
    }

    #[test]
    fn quadratic_is_degree_two_under_isotropic_scaling() {
        let action = SymmetryAction::isotropic(vec![Some(2.0)]);
        let defect = evaluate_degree_law(&action, &circle(), 2.0, &[1.0, 0.0], 2f64.ln()).unwrap();
        assert!(defect < 1e-15, "defect {defect}");
        assert_eq!(action.apply(2f64.ln(), &[1.0, 0.0]).unwrap()[0], 2.0);
    }

    #[test]
    fn zero_time_is_identity_for_diagonal_actions() {
        let x = [0.3, -1.7, 2.5e-8, 9.0];
        let action = SymmetryAction::diagonal(vec![-2.0, -2.0, 1.0, 1.0], vec![]);
        assert_eq!(action.apply(0.0, &x).unwrap(), x.to_vec());
        let iso = SymmetryAction::isotropic(vec![]);
        assert_eq!(iso.apply(0.0, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn zero_invariant_is_degenerate() {
        let action = SymmetryAction::isotropic(vec![Some(2.0)]);
        let err = evaluate_degree_law(&action, &circle(), 2.0, &[0.0, 0.0], 0.1).unwrap_err();
        assert!(matches!(err, Error::DegenerateInvariant { .. }));
    }

    #[test]
    fn conjugate_with_identity_matches_diagonal() {
        let x = [0.4, -0.9, 1.3];
        let w = vec![1.0, 0.5, -0.25];
        let plain = SymmetryAction::diagonal(w.clone(), vec![]);
        let conj = SymmetryAction::conjugate(Arc::new(IdentityMap), w, vec![]);
        let a = plain.apply(0.37, &x).unwrap();
        let b = conj.apply(0.37, &x).unwrap();
        assert_eq!(a, b);
        let ga = plain.generator(&x).unwrap();
        let gb = conj.generator(&x).unwrap();
        for (u, v) in ga.iter().zip(&gb) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
