//! Standard orthogonal projection `x̃ + G(x̃) λ`, with `λ` from Newton's method.

use super::{PostStep, StepContext};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LuFactors};
use crate::system::{all_finite, Cost, Invariant, State};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-13;
pub const DEFAULT_NEWTON_MAX_ITERS: usize = 20;

/// Result of [`newton_project`]. When `converged` is false `state` is the
/// iterate with the smallest residual seen.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub state: State,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest scaled residual `|H_i - target_i| / max(1, |target_i|)`.
    pub residual: f64,
}

impl NewtonOutcome {
    /// Turns a non-converged outcome into [`Error::NoConvergence`].
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                what: "orthogonal projection",
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Scratch {
    dirs: Vec<Vec<f64>>,
    grad: Vec<f64>,
    residual: Vec<f64>,
    x: Vec<f64>,
}

fn project_with(
    scratch: &mut Scratch,
    invariants: &[Invariant],
    x_candidate: &[f64],
    targets: &[f64],
    tol: f64,
    max_iters: usize,
    cost: &mut Cost,
) -> Result<NewtonOutcome> {
    let m = invariants.len();
    let n = x_candidate.len();
    if targets.len() != m {
        return Err(Error::Dimension { expected: m, got: targets.len() });
    }
    scratch.dirs.resize_with(m, Vec::new);
    for (d, inv) in scratch.dirs.iter_mut().zip(invariants) {
        d.resize(n, 0.0);
        inv.gradient_into(x_candidate, d);
    }
    cost.gradient_evals += m as u64;
    scratch.grad.resize(n, 0.0);
    scratch.residual.resize(m, 0.0);
    scratch.x.clear();
    scratch.x.extend_from_slice(x_candidate);

    let mut lambda = vec![0.0; m];
    let mut best = (f64::INFINITY, scratch.x.clone(), lambda.clone());
    let mut iterations = 0;
    loop {
        let mut worst: f64 = 0.0;
        for (i, inv) in invariants.iter().enumerate() {
            let r = inv.value(&scratch.x) - targets[i];
            scratch.residual[i] = r;
            worst = worst.max(r.abs() / targets[i].abs().max(1.0));
        }
        if !worst.is_finite() {
            return Err(Error::NonFinite("orthogonal projection"));
        }
        if worst < best.0 {
            best = (worst, scratch.x.clone(), lambda.clone());
        }
        if worst <= tol {
            return Ok(NewtonOutcome {
                state: scratch.x.clone(),
                lambda,
                iterations,
                converged: true,
                residual: worst,
            });
        }
        if iterations == max_iters {
            return Ok(NewtonOutcome { state: best.1, lambda: best.2, iterations, converged: false, residual: best.0 });
        }
        iterations += 1;
        // J_ij = ∇H_i(x)ᵀ G_j(x̃)
        let mut jac = DenseMatrix::zeros(m, m);
        for (i, inv) in invariants.iter().enumerate() {
            inv.gradient_into(&scratch.x, &mut scratch.grad);
            for j in 0..m {
                jac[(i, j)] = crate::system::dot(&scratch.grad, &scratch.dirs[j]);
            }
        }
        cost.gradient_evals += m as u64;
        let mut delta = scratch.residual.clone();
        LuFactors::new(&jac).map_err(|_| Error::SingularGram)?.solve_in_place(&mut delta);
        for (l, d) in lambda.iter_mut().zip(&delta) {
            *l -= d;
        }
        scratch.x.copy_from_slice(x_candidate);
        for (lj, d) in lambda.iter().zip(&scratch.dirs) {
            for (xl, dl) in scratch.x.iter_mut().zip(d) {
                *xl += lj * dl;
            }
        }
        if !all_finite(&scratch.x) {
            return Err(Error::NonFinite("orthogonal projection"));
        }
    }
}

/// Orthogonal projection of `x_candidate` onto `{H_i = target_i}` along the
/// gradients at the candidate. Residuals are measured relative to
/// `max(1, |target_i|)`.
pub fn newton_project(
    invariants: &[Invariant],
    x_candidate: &[f64],
    targets: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<NewtonOutcome> {
    project_with(&mut Scratch::default(), invariants, x_candidate, targets, tol, max_iters, &mut Cost::default())
}

/// Hook form of [`newton_project`]. Unconverged projections keep the best
/// iterate and are counted in `projections_unconverged`.
pub struct NewtonProjection {
    invariants: Vec<Invariant>,
    targets: Vec<f64>,
    tol: f64,
    max_iters: usize,
    scratch: Scratch,
}

impl NewtonProjection {
    pub fn new(invariants: Vec<Invariant>, targets: Vec<f64>) -> Self {
        Self {
            invariants,
            targets,
            tol: DEFAULT_NEWTON_TOL,
            max_iters: DEFAULT_NEWTON_MAX_ITERS,
            scratch: Scratch::default(),
        }
    }

    pub fn with_tolerance(mut self, tol: f64, max_iters: usize) -> Self {
        self.tol = tol;
        self.max_iters = max_iters;
        self
    }
}

impl PostStep for NewtonProjection {
    fn apply(&mut self, _: &StepContext<'_>, candidate: &mut [f64], cost: &mut Cost) -> Result<()> {
        cost.projection_evals += 1;
        let out = project_with(
            &mut self.scratch,
            &self.invariants,
            candidate,
            &self.targets,
            self.tol,
            self.max_iters,
            cost,
        )?;
        if !out.converged {
            cost.projections_unconverged += 1;
        }
        candidate.copy_from_slice(&out.state);
        Ok(())
    }

    fn name(&self) -> &str {
        "newton"
    }
}
