//! Systems, invariants and solver outputs.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// A point in phase space.
pub type State = Vec<f64>;

pub(crate) type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub(crate) type VectorFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A scalar function of the state together with its gradient.
///
/// `approximate` marks quantities that the semidiscrete system only conserves
/// approximately; consistency checks report them instead of asserting.
#[derive(Clone)]
pub struct Invariant {
    label: String,
    value: Arc<ScalarFn>,
    gradient: Arc<VectorFn>,
    approximate: bool,
}

impl Invariant {
    pub fn new<V, G>(label: impl Into<String>, value: V, gradient: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { label: label.into(), value: Arc::new(value), gradient: Arc::new(gradient), approximate: false }
    }

    /// Flags the invariant as only approximately conserved by the system.
    pub fn approximate(mut self) -> Self {
        self.approximate = true;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    pub fn gradient(&self, x: &[f64]) -> State {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }
}

impl fmt::Debug for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Invariant").field("label", &self.label).field("approximate", &self.approximate).finish()
    }
}

/// Separable split `H(q, p) = T(p) + V(q)` with the first `positions`
/// coordinates being `q`. Supplies the gradients used by drift and kick flows.
#[derive(Clone)]
pub struct SeparablePartition {
    positions: usize,
    kinetic_gradient: Arc<VectorFn>,
    potential_gradient: Arc<VectorFn>,
}

impl SeparablePartition {
    pub fn new<T, V>(positions: usize, kinetic_gradient: T, potential_gradient: V) -> Self
    where
        T: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        V: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            positions,
            kinetic_gradient: Arc::new(kinetic_gradient),
            potential_gradient: Arc::new(potential_gradient),
        }
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    /// `∇T(p)`, the velocity used by the drift flow.
    #[inline]
    pub fn kinetic_gradient(&self, p: &[f64], out: &mut [f64]) {
        (self.kinetic_gradient)(p, out)
    }

    /// `∇V(q)`, minus the force used by the kick flow.
    #[inline]
    pub fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        (self.potential_gradient)(q, out)
    }
}

/// An autonomous system `ẋ = f(x)` with its known invariants.
#[derive(Clone)]
pub struct OdeSystem {
    name: String,
    dim: usize,
    rhs: Arc<VectorFn>,
    invariants: Vec<Invariant>,
    partition: Option<SeparablePartition>,
}

impl OdeSystem {
    pub fn new<F>(name: impl Into<String>, dim: usize, rhs: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert!(dim > 0, "system dimension must be positive");
        Self { name: name.into(), dim, rhs: Arc::new(rhs), invariants: Vec::new(), partition: None }
    }

    pub fn with_invariant(mut self, invariant: Invariant) -> Self {
        self.invariants.push(invariant);
        self
    }

    pub fn with_partition(mut self, partition: SeparablePartition) -> Self {
        self.partition = Some(partition);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn invariants(&self) -> &[Invariant] {
        &self.invariants
    }

    pub fn invariant(&self, index: usize) -> Result<&Invariant> {
        self.invariants.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "invariant index {index} out of range for {} ({} invariants)",
                self.name,
                self.invariants.len()
            ))
        })
    }

    pub fn partition(&self) -> Option<&SeparablePartition> {
        self.partition.as_ref()
    }

    /// Evaluates `f(x)` into `out`. Does not touch any cost counter.
    #[inline]
    pub fn rhs_into(&self, x: &[f64], out: &mut [f64]) {
        (self.rhs)(x, out)
    }

    pub fn rhs(&self, x: &[f64]) -> State {
        let mut out = vec![0.0; self.dim];
        self.rhs_into(x, &mut out);
        out
    }

    pub fn invariant_values(&self, x: &[f64]) -> Vec<f64> {
        self.invariants.iter().map(|h| h.value(x)).collect()
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        Ok(())
    }
}

impl fmt::Debug for OdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("invariants", &self.invariants)
            .field("separable", &self.partition.is_some())
            .finish()
    }
}

/// Work counters accumulated during a solve. All counters only ever increase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Cost {
    pub rhs_evals: u64,
    pub gradient_evals: u64,
    pub projection_evals: u64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub projections_skipped: u64,
    /// Projections whose iteration stopped short of its tolerance (Newton).
    pub projections_unconverged: u64,
    /// Conjugate projections that handed over to the pseudo projection.
    pub projection_fallbacks: u64,
}

impl Cost {
    /// `true` when no counter of `self` is below the matching counter of `earlier`.
    pub fn dominates(&self, earlier: &Cost) -> bool {
        self.rhs_evals >= earlier.rhs_evals
            && self.gradient_evals >= earlier.gradient_evals
            && self.projection_evals >= earlier.projection_evals
            && self.accepted_steps >= earlier.accepted_steps
            && self.rejected_steps >= earlier.rejected_steps
            && self.projections_skipped >= earlier.projections_skipped
            && self.projections_unconverged >= earlier.projections_unconverged
            && self.projection_fallbacks >= earlier.projection_fallbacks
    }
}

/// Recorded solution: sampled states plus per-invariant drift
/// `H_i(x(t)) - H_i(x(0))` at every sample.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// `invariant_traces[i][j]` is the drift of invariant `i` at sample `j`.
    pub invariant_traces: Vec<Vec<f64>>,
    /// Every accepted step size, in order.
    pub step_sizes: Vec<f64>,
    pub cost: Cost,
    initial_invariants: Vec<f64>,
}

impl Trajectory {
    pub fn start(system: &OdeSystem, t0: f64, x0: &[f64]) -> Self {
        let initial_invariants = system.invariant_values(x0);
        let mut traj = Trajectory {
            invariant_traces: vec![Vec::new(); initial_invariants.len()],
            initial_invariants,
            ..Default::default()
        };
        traj.push(system, t0, x0);
        traj
    }

    pub fn push(&mut self, system: &OdeSystem, t: f64, x: &[f64]) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.states.push(x.to_vec());
        for ((trace, inv), h0) in
            self.invariant_traces.iter_mut().zip(system.invariants()).zip(&self.initial_invariants)
        {
            trace.push(inv.value(x) - h0);
        }
    }

    pub fn initial_invariants(&self) -> &[f64] {
        &self.initial_invariants
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NAN)
    }

    /// Largest `|H_i(x(t)) - H_i(x(0))|` over the recorded samples.
    pub fn max_drift(&self, invariant: usize) -> f64 {
        self.invariant_traces[invariant].iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Like [`Trajectory::max_drift`] but divided by `|H_i(x(0))|` (or 1 if that is zero).
    pub fn max_relative_drift(&self, invariant: usize) -> f64 {
        let scale = self.initial_invariants[invariant].abs();
        let scale = if scale > 0.0 { scale } else { 1.0 };
        self.max_drift(invariant) / scale
    }

    pub fn final_drift(&self, invariant: usize) -> f64 {
        self.invariant_traces[invariant].last().copied().unwrap_or(0.0)
    }
}

/// Largest normalised first-integral defect `|∇H·f| / (1 + |∇H||f|)` over `samples`.
pub fn check_first_integral(system: &OdeSystem, inv_index: usize, samples: &[State]) -> Result<f64> {
    let inv = system.invariant(inv_index)?;
    let n = system.dim();
    let mut grad = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for x in samples {
        system.check_dim(x)?;
        system.rhs_into(x, &mut f);
        inv.gradient_into(x, &mut grad);
        let dot: f64 = grad.iter().zip(&f).map(|(g, v)| g * v).sum();
        let scale = 1.0 + norm2(&grad) * norm2(&f);
        worst = worst.max(dot.abs() / scale);
    }
    Ok(worst)
}

/// Worst mixed-tolerance mismatch between the analytic gradient and centred
/// differences along `directions`. A value ≤ 1 means every direction passed
/// `|fd - ∇H·d| ≤ atol + rtol |∇H·d|`.
pub fn gradient_check(inv: &Invariant, x: &[f64], directions: &[State], atol: f64, rtol: f64) -> f64 {
    let grad = inv.gradient(x);
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-6 * scale;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    let mut worst: f64 = 0.0;
    for d in directions {
        let dn = norm2(d).max(f64::MIN_POSITIVE);
        for i in 0..x.len() {
            xp[i] = x[i] + eps * d[i] / dn;
            xm[i] = x[i] - eps * d[i] / dn;
        }
        let fd = (inv.value(&xp) - inv.value(&xm)) / (2.0 * eps);
        let exact: f64 = grad.iter().zip(d).map(|(g, v)| g * v / dn).sum();
        worst = worst.max((fd - exact).abs() / (atol + rtol * exact.abs()));
    }
    worst
}

#[inline]
pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|a| a.is_finite())
}
