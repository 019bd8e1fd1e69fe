//! Several invariants restored at once by commuting diagonal actions.

use super::{is_skippable, log_ratio, PostStep, StepContext};
use crate::action::SymmetryAction;
use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, DenseMatrix, LuFactors};
use crate::system::{Cost, Invariant, State};

/// Largest degree-matrix condition estimate accepted.
pub const MAX_DEGREE_CONDITION: f64 = 1e8;

/// `m` commuting diagonal actions and the `m × m` degree matrix
/// `K[i][j]` = degree of invariant `i` under action `j`.
#[derive(Debug, Clone)]
pub struct DegreeSystem {
    weights: Vec<Vec<f64>>,
    invariants: Vec<usize>,
    matrix: DenseMatrix,
    lu: LuFactors,
}

impl DegreeSystem {
    /// `invariants[i]` is the system index of the `i`-th projected invariant;
    /// its degree under each action is looked up in that action's degree list.
    pub fn new(actions: &[SymmetryAction], invariants: &[usize], dim: usize) -> Result<Self> {
        let m = actions.len();
        if m == 0 || invariants.len() != m {
            return Err(Error::InvalidArgument(format!(
                "degree system needs as many actions as invariants, got {m} and {}",
                invariants.len()
            )));
        }
        let mut weights = Vec::with_capacity(m);
        for a in actions {
            let w = a
                .diagonal_weights(dim)
                .ok_or_else(|| Error::InvalidArgument("simultaneous projection needs diagonal actions".into()))?;
            if w.len() != dim {
                return Err(Error::Dimension { expected: dim, got: w.len() });
            }
            weights.push(w);
        }
        let mut matrix = DenseMatrix::zeros(m, m);
        for (i, &inv) in invariants.iter().enumerate() {
            for (j, a) in actions.iter().enumerate() {
                matrix[(i, j)] = a.degree(inv).ok_or_else(|| {
                    Error::InvalidArgument(format!("invariant {inv} is not homogeneous under action {j}"))
                })?;
            }
        }
        let cond = condition_estimate(&matrix);
        if !(cond <= MAX_DEGREE_CONDITION) {
            return Err(Error::SingularDegreeMatrix(cond));
        }
        let lu = LuFactors::new(&matrix).map_err(|_| Error::SingularDegreeMatrix(f64::INFINITY))?;
        Ok(Self { weights, invariants: invariants.to_vec(), matrix, lu })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn invariant_indices(&self) -> &[usize] {
        &self.invariants
    }

    /// `s = K⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve(b)
    }

    /// Applies `∏ e^{s_j A_j}` to `x`.
    pub fn apply_into(&self, s: &[f64], x: &[f64], out: &mut [f64]) {
        for (l, (o, v)) in out.iter_mut().zip(x).enumerate() {
            let exponent: f64 = self.weights.iter().zip(s).map(|(w, sj)| w[l] * sj).sum();
            *o = exponent.exp() * v;
        }
    }
}

/// Restores every invariant of `ds` to its target in one diagonal scaling.
/// `invariants` and `targets` are indexed like the system's invariant list.
pub fn simultaneous_project(ds: &DegreeSystem, x: &[f64], invariants: &[Invariant], targets: &[f64]) -> Result<State> {
    let b = ds.invariants.iter().map(|&i| log_ratio(targets[i], invariants[i].value(x))).collect::<Result<Vec<_>>>()?;
    let s = ds.solve(&b);
    let mut out = vec![0.0; x.len()];
    ds.apply_into(&s, x, &mut out);
    if !crate::system::all_finite(&out) {
        return Err(Error::NonFinite("simultaneous projection"));
    }
    Ok(out)
}

/// Hook form of [`simultaneous_project`].
pub struct SimultaneousProjection {
    ds: DegreeSystem,
    invariants: Vec<Invariant>,
    targets: Vec<f64>,
}

impl SimultaneousProjection {
    pub fn new(ds: DegreeSystem, invariants: Vec<Invariant>, targets: Vec<f64>) -> Self {
        Self { ds, invariants, targets }
    }
}

impl PostStep for SimultaneousProjection {
    fn apply(&mut self, _: &StepContext<'_>, candidate: &mut [f64], cost: &mut Cost) -> Result<()> {
        cost.projection_evals += 1;
        match simultaneous_project(&self.ds, candidate, &self.invariants, &self.targets) {
            Ok(out) => {
                candidate.copy_from_slice(&out);
                Ok(())
            }
            Err(e) if is_skippable(&e) => {
                cost.projections_skipped += 1;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    fn name(&self) -> &str {
        "simultaneous"
    }
}
