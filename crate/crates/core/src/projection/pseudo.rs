//! Pseudo projection: integrate the generator
//! `g(x) = V (GᵀV)⁻¹ diag(k_i H_i(x)) 𝟙` over unit time with an explicit
//! Runge–Kutta method, so that each `H_i` is multiplied by approximately
//! `e^{k_i}`.

use std::sync::Arc;

use super::{is_skippable, log_ratio, PostStep, StepContext};
use crate::error::{Error, Result};
use crate::integrators::ButcherTableau;
use crate::linalg::{condition_estimate, DenseMatrix, LuFactors};
use crate::system::{all_finite, Cost, Invariant, State};

/// Gram matrices with a condition estimate above this get Tikhonov damping.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;
/// Damping `μ = GRAM_REGULARIZATION · trace(GᵀV)`.
pub const GRAM_REGULARIZATION: f64 = 1e-12;

type DirectionFn = dyn Fn(&[f64], &mut [Vec<f64>]) + Send + Sync;

/// The matrix `V` whose columns span the correction.
#[derive(Clone, Default)]
pub enum DirectionChoice {
    /// `V = G`, the minimum-norm correction.
    #[default]
    Gradient,
    /// Writes one direction per invariant.
    Custom(Arc<DirectionFn>),
}

impl std::fmt::Debug for DirectionChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DirectionChoice::Gradient => write!(f, "Gradient"),
            DirectionChoice::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Parameters of a pseudo projection: the inner method order `q`, the number
/// of iterations `r` and the direction choice.
#[derive(Debug, Clone)]
pub struct PseudoGeneratorSpec {
    pub direction: DirectionChoice,
    pub inner_order: usize,
    pub iterations: usize,
}

impl Default for PseudoGeneratorSpec {
    fn default() -> Self {
        Self { direction: DirectionChoice::Gradient, inner_order: 2, iterations: 1 }
    }
}

impl PseudoGeneratorSpec {
    pub fn new(inner_order: usize, iterations: usize) -> Self {
        Self { inner_order, iterations, ..Self::default() }
    }

    pub fn with_direction(mut self, direction: DirectionChoice) -> Self {
        self.direction = direction;
        self
    }
}

/// Scratch space for generator evaluations.
#[derive(Debug, Default, Clone)]
struct Workspace {
    grads: Vec<Vec<f64>>,
    dirs: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    coeffs: Vec<f64>,
}

impl Workspace {
    fn resize(&mut self, m: usize, n: usize) {
        for v in [&mut self.grads, &mut self.dirs] {
            v.resize_with(m, Vec::new);
            for g in v.iter_mut() {
                g.resize(n, 0.0);
            }
        }
        self.rhs.resize(m, 0.0);
        self.coeffs.resize(m, 0.0);
    }
}

fn eval_generator(
    ws: &mut Workspace,
    spec: &PseudoGeneratorSpec,
    invariants: &[Invariant],
    k: &[f64],
    x: &[f64],
    out: &mut [f64],
    cost: &mut Cost,
) -> Result<()> {
    let m = invariants.len();
    out.fill(0.0);
    if k.iter().all(|&v| v == 0.0) {
        return Ok(());
    }
    ws.resize(m, x.len());
    for (i, inv) in invariants.iter().enumerate() {
        inv.gradient_into(x, &mut ws.grads[i]);
        ws.rhs[i] = if k[i] == 0.0 { 0.0 } else { k[i] * inv.value(x) };
    }
    cost.gradient_evals += m as u64;
    let use_grads = matches!(spec.direction, DirectionChoice::Gradient);
    if let DirectionChoice::Custom(f) = &spec.direction {
        f(x, &mut ws.dirs);
    }
    let dirs = if use_grads { &ws.grads } else { &ws.dirs };
    if m == 1 {
        let gram: f64 = crate::system::dot(&ws.grads[0], &dirs[0]);
        if !(gram.abs() > f64::MIN_POSITIVE) || !gram.is_finite() {
            return Err(Error::SingularGram);
        }
        ws.coeffs[0] = ws.rhs[0] / gram;
    } else {
        let mut gram = DenseMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                gram[(i, j)] = crate::system::dot(&ws.grads[i], &dirs[j]);
            }
        }
        if !gram.is_finite() {
            return Err(Error::NonFinite("Gram matrix"));
        }
        if condition_estimate(&gram) > GRAM_CONDITION_LIMIT {
            let mu = GRAM_REGULARIZATION * gram.trace().abs();
            for i in 0..m {
                gram[(i, i)] += mu;
            }
        }
        ws.coeffs.copy_from_slice(&LuFactors::new(&gram).map_err(|_| Error::SingularGram)?.solve(&ws.rhs));
    }
    for (c, d) in ws.coeffs.iter().zip(dirs) {
        for (o, v) in out.iter_mut().zip(d) {
            *o += c * v;
        }
    }
    if !all_finite(out) {
        return Err(Error::NonFinite("pseudo generator"));
    }
    Ok(())
}

/// Value of the generator at `x` for log-ratios `k`.
pub fn build_pseudo_generator(
    spec: &PseudoGeneratorSpec,
    invariants: &[Invariant],
    x: &[f64],
    k: &[f64],
) -> Result<State> {
    if k.len() != invariants.len() {
        return Err(Error::Dimension { expected: invariants.len(), got: k.len() });
    }
    let mut out = vec![0.0; x.len()];
    eval_generator(&mut Workspace::default(), spec, invariants, k, x, &mut out, &mut Cost::default())?;
    Ok(out)
}

/// Result of [`pseudo_project`].
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOutcome {
    pub state: State,
    /// Invariants left out of at least one iteration because of a sign or
    /// degeneracy violation.
    pub skipped: usize,
}

/// Pseudo projector with reusable buffers.
#[derive(Debug, Clone)]
struct Projector {
    spec: PseudoGeneratorSpec,
    tableau: ButcherTableau,
    ws: Workspace,
    k: Vec<f64>,
    skipped: Vec<bool>,
    stages: Vec<Vec<f64>>,
    z: Vec<f64>,
}

impl Projector {
    fn new(spec: PseudoGeneratorSpec) -> Result<Self> {
        if spec.iterations == 0 {
            return Err(Error::InvalidArgument("pseudo projection needs at least one iteration".into()));
        }
        let tableau = ButcherTableau::explicit_of_order(spec.inner_order)?;
        Ok(Self {
            spec,
            tableau,
            ws: Workspace::default(),
            k: Vec::new(),
            skipped: Vec::new(),
            stages: Vec::new(),
            z: Vec::new(),
        })
    }

    /// Returns the number of invariants skipped in some iteration.
    fn project(&mut self, invariants: &[Invariant], targets: &[f64], x: &mut [f64], cost: &mut Cost) -> Result<usize> {
        let n = x.len();
        let m = invariants.len();
        let s = self.tableau.stages();
        self.stages.resize_with(s, Vec::new);
        for st in &mut self.stages {
            st.resize(n, 0.0);
        }
        self.z.resize(n, 0.0);
        self.k.resize(m, 0.0);
        self.skipped.clear();
        self.skipped.resize(m, false);
        for _ in 0..self.spec.iterations {
            for i in 0..m {
                self.k[i] = match log_ratio(targets[i], invariants[i].value(x)) {
                    Ok(v) => v,
                    Err(e) if is_skippable(&e) => {
                        self.skipped[i] = true;
                        0.0
                    }
                    Err(e) => return Err(e),
                };
            }
            if self.k.iter().all(|&v| v == 0.0) {
                break;
            }
            // one explicit RK step of unit length for z' = g(z)
            for i in 0..s {
                self.z.copy_from_slice(x);
                for j in 0..i {
                    let a = self.tableau.a(i, j);
                    if a != 0.0 {
                        for (zl, kl) in self.z.iter_mut().zip(&self.stages[j]) {
                            *zl += a * kl;
                        }
                    }
                }
                let (_, rest) = self.stages.split_at_mut(i);
                eval_generator(&mut self.ws, &self.spec, invariants, &self.k, &self.z, &mut rest[0], cost)?;
            }
            for (j, st) in self.stages.iter().enumerate() {
                let b = self.tableau.b(j);
                if b != 0.0 {
                    for (xl, kl) in x.iter_mut().zip(st) {
                        *xl += b * kl;
                    }
                }
            }
        }
        if !all_finite(x) {
            return Err(Error::NonFinite("pseudo projection"));
        }
        Ok(self.skipped.iter().filter(|&&s| s).count())
    }
}

/// Applies `r` pseudo-projection iterations to `x_candidate`, recomputing the
/// log-ratios `k_i = ln(target_i / H_i(z))` before each.
pub fn pseudo_project(
    spec: &PseudoGeneratorSpec,
    invariants: &[Invariant],
    targets: &[f64],
    x_candidate: &[f64],
) -> Result<PseudoOutcome> {
    if targets.len() != invariants.len() {
        return Err(Error::Dimension { expected: invariants.len(), got: targets.len() });
    }
    let mut state = x_candidate.to_vec();
    let skipped = Projector::new(spec.clone())?.project(invariants, targets, &mut state, &mut Cost::default())?;
    Ok(PseudoOutcome { state, skipped })
}

/// Hook form of [`pseudo_project`].
pub struct PseudoProjection {
    name: String,
    projector: Projector,
    invariants: Vec<Invariant>,
    targets: Vec<f64>,
}

impl PseudoProjection {
    pub fn new(spec: PseudoGeneratorSpec, invariants: Vec<Invariant>, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != invariants.len() || invariants.is_empty() {
            return Err(Error::Dimension { expected: invariants.len(), got: targets.len() });
        }
        let labels: Vec<&str> = invariants.iter().map(Invariant::label).collect();
        Ok(Self {
            name: format!("pseudo[{}]", labels.join(",")),
            projector: Projector::new(spec)?,
            invariants,
            targets,
        })
    }
}

impl PostStep for PseudoProjection {
    fn apply(&mut self, _: &StepContext<'_>, candidate: &mut [f64], cost: &mut Cost) -> Result<()> {
        cost.projection_evals += 1;
        let skipped = self.projector.project(&self.invariants, &self.targets, candidate, cost)?;
        if skipped > 0 {
            cost.projections_skipped += 1;
        }
        Ok(())
    }

    fn name(&self) -> &str {
        &self.name
    }
}
