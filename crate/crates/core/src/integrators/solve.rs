//! The driver that runs any step kind over an interval and applies a
//! post-step hook after every accepted step.

use std::fmt;

use super::explicit::{rk_embedded_step, rk_step_into, RkWorkspace, StepController};
use super::gauss::gauss_step_counted;
use super::reversible::{ReparamState, ReversibleStepper, StepDensity};
use super::splitting::{splitting_step_in_place, Composition, SplittingWorkspace};
use super::tableau::ButcherTableau;
use crate::error::{Error, Result};
use crate::projection::{PostStep, StepContext};
use crate::system::{all_finite, OdeSystem, Trajectory};

/// How to advance the solution.
#[derive(Debug, Clone)]
pub enum Method {
    /// Explicit Runge–Kutta with constant step.
    Fixed { tableau: ButcherTableau, h: f64 },
    /// Embedded pair with error control. `h0` overrides the automatic
    /// initial step; `h_max` defaults to the interval length.
    Adaptive { tableau: ButcherTableau, rtol: f64, atol: f64, h0: Option<f64>, h_max: Option<f64> },
    /// Gauss collocation with constant step.
    Gauss { stages: usize, h: f64, tol: f64, max_iters: usize },
    /// Composed Störmer–Verlet with constant step.
    Splitting { composition: Composition, h: f64 },
    /// Reversible step-density adaptivity around a composition method.
    /// `rho0` defaults to `σ(x₀)` (or 1 for a constant density).
    Reversible { composition: Composition, epsilon: f64, density: StepDensity, rho0: Option<f64> },
}

impl Method {
    pub fn fixed(tableau: ButcherTableau, h: f64) -> Self {
        Method::Fixed { tableau, h }
    }

    pub fn adaptive(tableau: ButcherTableau, rtol: f64, atol: f64) -> Self {
        Method::Adaptive { tableau, rtol, atol, h0: None, h_max: None }
    }

    pub fn label(&self) -> String {
        match self {
            Method::Fixed { tableau, .. } | Method::Adaptive { tableau, .. } => tableau.name().to_string(),
            Method::Gauss { stages, .. } => format!("gauss{}", 2 * stages),
            Method::Splitting { composition, .. } => composition.name().to_string(),
            Method::Reversible { composition, .. } => format!("reversible-{}", composition.name()),
        }
    }
}

/// Recording and safety options.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Record every `record_stride`-th accepted step (the final state is always recorded).
    pub record_stride: usize,
    pub max_steps: u64,
    /// Adaptive runs only: land steps exactly on these times and record only
    /// there (plus the start).
    pub output_times: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { record_stride: 1, max_steps: 50_000_000, output_times: None }
    }
}

impl SolveOptions {
    pub fn stride(record_stride: usize) -> Self {
        Self { record_stride: record_stride.max(1), ..Self::default() }
    }
}

/// A failed solve, carrying everything recorded before the failure.
#[derive(Debug, Clone)]
pub struct SolveFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} recorded samples, t = {})", self.error, self.partial.len(), self.partial.final_time())
    }
}

impl std::error::Error for SolveFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct Recorder {
    stride: u64,
    since: u64,
}

impl Recorder {
    fn new(stride: usize) -> Self {
        Self { stride: stride.max(1) as u64, since: 0 }
    }

    fn accepted(&mut self, sys: &OdeSystem, traj: &mut Trajectory, t: f64, x: &[f64], last: bool) {
        self.since += 1;
        if self.since >= self.stride || last {
            self.since = 0;
            traj.push(sys, t, x);
        }
    }
}

/// Integrates `sys` from `x0` over `t_span`, calling `hook` after every
/// accepted step. The hook's output replaces the stored state and is the
/// starting point of the next step.
pub fn solve(
    sys: &OdeSystem,
    x0: &[f64],
    t_span: (f64, f64),
    method: &Method,
    hook: &mut dyn PostStep,
    opts: &SolveOptions,
) -> std::result::Result<Trajectory, SolveFailure> {
    let (t0, t1) = t_span;
    let mut traj = Trajectory::start(sys, t0, x0);
    let fail = |error, partial| Err(SolveFailure { error, partial });
    if let Err(e) = sys.check_dim(x0) {
        return fail(e, traj);
    }
    if !all_finite(x0) {
        return fail(Error::NonFinite("initial state"), traj);
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return fail(Error::InvalidArgument(format!("need t1 > t0, got [{t0}, {t1}]")), traj);
    }
    let outcome = match method {
        Method::Adaptive { tableau, rtol, atol, h0, h_max } => {
            adaptive(sys, x0, t_span, tableau, *rtol, *atol, *h0, *h_max, hook, opts, &mut traj)
        }
        Method::Reversible { composition, epsilon, density, rho0 } => {
            reversible(sys, x0, t_span, composition, *epsilon, *density, *rho0, hook, opts, &mut traj)
        }
        _ => fixed(sys, x0, t_span, method, hook, opts, &mut traj),
    };
    match outcome {
        Ok(()) => Ok(traj),
        Err(e) => fail(e, traj),
    }
}

fn apply_hook(
    hook: &mut dyn PostStep,
    traj: &mut Trajectory,
    step_index: u64,
    t: f64,
    h: f64,
    previous: &[f64],
    candidate: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<bool> {
    scratch.clear();
    scratch.extend_from_slice(candidate);
    let ctx = StepContext { step_index, t, h, previous };
    hook.apply(&ctx, candidate, &mut traj.cost)?;
    if !all_finite(candidate) {
        return Err(Error::NonFinite("post-step hook"));
    }
    Ok(scratch.as_slice() != &*candidate)
}

fn fixed(
    sys: &OdeSystem,
    x0: &[f64],
    (t0, t1): (f64, f64),
    method: &Method,
    hook: &mut dyn PostStep,
    opts: &SolveOptions,
    traj: &mut Trajectory,
) -> Result<()> {
    let h = match method {
        Method::Fixed { h, .. } | Method::Gauss { h, .. } | Method::Splitting { h, .. } => *h,
        _ => unreachable!(),
    };
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    if let Method::Fixed { tableau, .. } = method {
        if !tableau.is_explicit() {
            return Err(Error::InvalidArgument(format!("{} is not explicit", tableau.name())));
        }
    }
    let partition = match method {
        Method::Splitting { .. } => Some(sys.partition().ok_or(Error::MissingPartition)?),
        _ => None,
    };
    let n = ((t1 - t0) / h - 1e-9).ceil().max(1.0) as u64;
    if n > opts.max_steps {
        return Err(Error::InvalidArgument(format!("{n} steps exceed max_steps = {}", opts.max_steps)));
    }
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut next = vec![0.0; dim];
    let mut scratch = Vec::with_capacity(dim);
    let mut rk_ws = RkWorkspace::default();
    let mut split_ws = SplittingWorkspace::default();
    let mut rec = Recorder::new(opts.record_stride);
    let mut t_prev = t0;
    for i in 1..=n {
        let last = i == n;
        let t = if last { t1 } else { t0 + i as f64 * h };
        let step = if last { t1 - t_prev } else { h };
        match method {
            Method::Fixed { tableau, .. } => {
                rk_step_into(tableau, sys, &x, step, &mut rk_ws, None, &mut next, &mut traj.cost)?
            }
            Method::Gauss { stages, tol, max_iters, .. } => {
                next = gauss_step_counted(*stages, sys, &x, step, *tol, *max_iters, &mut traj.cost)?
            }
            Method::Splitting { composition, .. } => {
                next.copy_from_slice(&x);
                splitting_step_in_place(
                    composition,
                    partition.unwrap(),
                    &mut next,
                    step,
                    &mut split_ws,
                    &mut traj.cost,
                )?
            }
            _ => unreachable!(),
        }
        apply_hook(hook, traj, i - 1, t, step, &x, &mut next, &mut scratch)?;
        std::mem::swap(&mut x, &mut next);
        traj.cost.accepted_steps += 1;
        traj.step_sizes.push(step);
        rec.accepted(sys, traj, t, &x, last);
        t_prev = t;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    sys: &OdeSystem,
    x0: &[f64],
    (t0, t1): (f64, f64),
    tableau: &ButcherTableau,
    rtol: f64,
    atol: f64,
    h0: Option<f64>,
    h_max: Option<f64>,
    hook: &mut dyn PostStep,
    opts: &SolveOptions,
    traj: &mut Trajectory,
) -> Result<()> {
    let mut ctl = StepController::for_tableau(tableau, rtol, atol)?;
    ctl.h_max = h_max.unwrap_or(t1 - t0);
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut f = sys.rhs(&x);
    traj.cost.rhs_evals += 1;
    let mut h = match h0 {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::InvalidArgument(format!("initial step must be positive, got {h}"))),
        None => ctl.initial_step(sys, &x, &f, ctl_order(tableau), &mut traj.cost),
    };
    let mut stops: Vec<f64> =
        opts.output_times.as_deref().unwrap_or(&[]).iter().copied().filter(|&s| s > t0 && s < t1).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(t1);
    let record_at_stops = opts.output_times.is_some();
    let mut stop = 0;
    let mut t = t0;
    let mut next = vec![0.0; dim];
    let mut scratch = Vec::with_capacity(dim);
    let mut ws = RkWorkspace::new(tableau.stages(), dim);
    let mut rec = Recorder::new(opts.record_stride);
    let last_stage = tableau.stages() - 1;
    while stop < stops.len() {
        if traj.cost.accepted_steps + traj.cost.rejected_steps >= opts.max_steps {
            return Err(Error::InvalidArgument(format!("exceeded max_steps = {} at t = {t}", opts.max_steps)));
        }
        let target = stops[stop];
        ctl.h_min = 10.0 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE);
        let remaining = target - t;
        let hits = h >= remaining * (1.0 - 1e-12);
        let h_try = if hits { remaining } else { h };
        let step = rk_embedded_step(tableau, sys, &x, &f, h_try, &mut ctl, &mut ws, &mut next, &mut traj.cost)
            .map_err(|e| match e {
                Error::StepUnderflow { h, h_min, .. } => Error::StepUnderflow { t, h, h_min },
                e => e,
            })?;
        if !step.accepted {
            traj.cost.rejected_steps += 1;
            h = step.h_next;
            continue;
        }
        let t_new = if hits { target } else { t + h_try };
        let changed = apply_hook(hook, traj, traj.cost.accepted_steps, t_new, h_try, &x, &mut next, &mut scratch)?;
        if tableau.is_fsal() && !changed {
            f.copy_from_slice(ws.stage(last_stage));
        } else {
            sys.rhs_into(&next, &mut f);
            traj.cost.rhs_evals += 1;
        }
        std::mem::swap(&mut x, &mut next);
        t = t_new;
        traj.cost.accepted_steps += 1;
        traj.step_sizes.push(h_try);
        let done = hits && stop + 1 == stops.len();
        if record_at_stops {
            if hits {
                traj.push(sys, t, &x);
            }
        } else {
            rec.accepted(sys, traj, t, &x, done);
        }
        if hits {
            stop += 1;
        }
        h = step.h_next;
    }
    Ok(())
}

fn ctl_order(tableau: &ButcherTableau) -> usize {
    tableau.embedded_order().unwrap_or(tableau.order())
}

#[allow(clippy::too_many_arguments)]
fn reversible(
    sys: &OdeSystem,
    x0: &[f64],
    (t0, t1): (f64, f64),
    composition: &Composition,
    epsilon: f64,
    density: StepDensity,
    rho0: Option<f64>,
    hook: &mut dyn PostStep,
    opts: &SolveOptions,
    traj: &mut Trajectory,
) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("pseudo-step must be positive, got {epsilon}")));
    }
    let mut stepper = ReversibleStepper::new(composition.clone(), density, epsilon)?;
    let rho = match rho0 {
        Some(r) => r,
        None => stepper.initial_density(sys, x0, &mut traj.cost),
    };
    if !(rho > 0.0) {
        return Err(Error::DensityUnderflow(rho));
    }
    let mut st = ReparamState { x: x0.to_vec(), rho, t: t0 };
    let mut previous = x0.to_vec();
    let mut scratch = Vec::with_capacity(x0.len());
    let mut rec = Recorder::new(opts.record_stride);
    while st.t < t1 {
        if traj.cost.accepted_steps >= opts.max_steps {
            return Err(Error::InvalidArgument(format!("exceeded max_steps = {} at t = {}", opts.max_steps, st.t)));
        }
        previous.copy_from_slice(&st.x);
        let h = stepper.step(sys, &mut st, Some(t1), &mut traj.cost)?;
        if h <= 0.0 {
            return Err(Error::StepUnderflow { t: st.t, h, h_min: 0.0 });
        }
        let changed = apply_hook(hook, traj, traj.cost.accepted_steps, st.t, h, &previous, &mut st.x, &mut scratch)?;
        if changed {
            stepper.invalidate();
        }
        traj.cost.accepted_steps += 1;
        traj.step_sizes.push(h);
        let done = st.t >= t1;
        rec.accepted(sys, traj, st.t, &st.x, done);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::NoProjection;
    use crate::system::{Invariant, SeparablePartition};

    fn oscillator() -> OdeSystem {
        OdeSystem::new("sho", 2, |x, out| {
            out[0] = x[1];
            out[1] = -x[0];
        })
        .with_invariant(Invariant::new(
            "H",
            |x| 0.5 * (x[0] * x[0] + x[1] * x[1]),
            |x, g| {
                g[0] = x[0];
                g[1] = x[1];
            },
        ))
        .with_partition(SeparablePartition::new(1, |p, v| v[0] = p[0], |q, f| f[0] = q[0]))
    }

    #[test]
    fn fixed_grid_lands_on_end() {
        let traj = solve(
            &oscillator(),
            &[1.0, 0.0],
            (0.0, 1.0),
            &Method::fixed(ButcherTableau::rk4(), 0.3),
            &mut NoProjection,
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_eq!(traj.final_time(), 1.0);
        assert_eq!(traj.cost.accepted_steps, 4);
        assert_eq!(traj.cost.rhs_evals, 16);
        assert!((traj.step_sizes[3] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn exact_grid_has_no_sliver_step() {
        let traj = solve(
            &oscillator(),
            &[1.0, 0.0],
            (0.0, 1.0),
            &Method::fixed(ButcherTableau::rk4(), 0.1),
            &mut NoProjection,
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.cost.accepted_steps, 10);
    }

    #[test]
    fn adaptive_hits_output_times() {
        let opts = SolveOptions { output_times: Some(vec![0.5, 1.0, 2.0]), ..Default::default() };
        let traj = solve(
            &oscillator(),
            &[1.0, 0.0],
            (0.0, 3.0),
            &Method::adaptive(ButcherTableau::dopri5(), 1e-9, 1e-9),
            &mut NoProjection,
            &opts,
        )
        .unwrap();
        assert_eq!(traj.times, vec![0.0, 0.5, 1.0, 2.0, 3.0]);
        for (t, x) in traj.times.iter().zip(&traj.states) {
            assert!((x[0] - t.cos()).abs() < 1e-7);
        }
    }

    #[test]
    fn bad_span_reports_partial() {
        let err = solve(
            &oscillator(),
            &[1.0, 0.0],
            (1.0, 0.0),
            &Method::fixed(ButcherTableau::rk4(), 0.1),
            &mut NoProjection,
            &SolveOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.partial.len(), 1);
    }

    #[test]
    fn splitting_requires_partition() {
        let sys = OdeSystem::new("plain", 2, |x, out| out.copy_from_slice(x));
        let err = solve(
            &sys,
            &[1.0, 0.0],
            (0.0, 1.0),
            &Method::Splitting { composition: Composition::verlet(), h: 0.1 },
            &mut NoProjection,
            &SolveOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.error, Error::MissingPartition);
    }
}
