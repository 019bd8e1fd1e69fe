//! Störmer–Verlet and its symmetric compositions for separable Hamiltonians.

use crate::error::{Error, Result};
use crate::system::{all_finite, Cost, OdeSystem, SeparablePartition, State};

/// Substep fractions `γ_i` of a symmetric composition of Störmer–Verlet.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    name: String,
    coefficients: Vec<f64>,
}

impl Composition {
    pub fn new(name: impl Into<String>, coefficients: Vec<f64>) -> Self {
        Self { name: name.into(), coefficients }
    }

    pub fn verlet() -> Self {
        Self::new("verlet", vec![1.0])
    }

    /// Suzuki's fractal composition `S_{2k+2}(h) = S_{2k}(ph)² S_{2k}((1-4p)h) S_{2k}(ph)²`
    /// with `p = 1/(4 - 4^{1/(2k+1)})`, built up from Verlet to `order`.
    pub fn suzuki(order: usize) -> Result<Self> {
        if order < 2 || order % 2 == 1 {
            return Err(Error::InvalidArgument(format!("Suzuki composition of order {order}")));
        }
        let mut coeffs = vec![1.0];
        let mut k = 1;
        while 2 * k < order {
            let p = 1.0 / (4.0 - 4f64.powf(1.0 / (2 * k + 1) as f64));
            let mut next = Vec::with_capacity(coeffs.len() * 5);
            for f in [p, p, 1.0 - 4.0 * p, p, p] {
                next.extend(coeffs.iter().map(|c| c * f));
            }
            coeffs = next;
            k += 1;
        }
        Ok(Self::new(format!("suzuki{order}"), coeffs))
    }

    pub fn suzuki8() -> Self {
        Self::suzuki(8).expect("order 8 is valid")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "verlet" => Ok(Self::verlet()),
            "suzuki4" => Self::suzuki(4),
            "suzuki6" => Self::suzuki(6),
            "suzuki8" => Ok(Self::suzuki8()),
            _ => Err(Error::InvalidArgument(format!("unknown composition `{name}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

/// Buffers and the cached force `∇V(q)` at the current positions.
#[derive(Debug, Clone, Default)]
pub struct SplittingWorkspace {
    force: Vec<f64>,
    velocity: Vec<f64>,
    cached_q: Vec<f64>,
    valid: bool,
}

impl SplittingWorkspace {
    pub fn invalidate(&mut self) {
        self.valid = false;
    }
}

/// Advances `x` in place by one composed step. Each potential-gradient
/// evaluation is counted as one right-hand-side evaluation.
pub fn splitting_step_in_place(
    comp: &Composition,
    part: &SeparablePartition,
    x: &mut [f64],
    h: f64,
    ws: &mut SplittingWorkspace,
    cost: &mut Cost,
) -> Result<()> {
    let m = part.positions();
    let (q, p) = x.split_at_mut(m);
    if p.len() != m {
        return Err(Error::Dimension { expected: 2 * m, got: m + p.len() });
    }
    ws.force.resize(m, 0.0);
    ws.velocity.resize(m, 0.0);
    if !(ws.valid && ws.cached_q.as_slice() == &*q) {
        part.potential_gradient(q, &mut ws.force);
        cost.rhs_evals += 1;
    }
    for &gamma in comp.coefficients() {
        let step = gamma * h;
        for (pi, fi) in p.iter_mut().zip(&ws.force) {
            *pi -= 0.5 * step * fi;
        }
        part.kinetic_gradient(p, &mut ws.velocity);
        for (qi, vi) in q.iter_mut().zip(&ws.velocity) {
            *qi += step * vi;
        }
        part.potential_gradient(q, &mut ws.force);
        cost.rhs_evals += 1;
        for (pi, fi) in p.iter_mut().zip(&ws.force) {
            *pi -= 0.5 * step * fi;
        }
    }
    ws.cached_q.clear();
    ws.cached_q.extend_from_slice(q);
    ws.valid = true;
    if !all_finite(x) {
        return Err(Error::NonFinite("splitting step"));
    }
    Ok(())
}

/// One composed Störmer–Verlet step (kick–drift–kick substeps).
pub fn splitting_step(comp: &Composition, sys: &OdeSystem, x: &[f64], h: f64) -> Result<State> {
    sys.check_dim(x)?;
    let part = sys.partition().ok_or(Error::MissingPartition)?;
    let mut out = x.to_vec();
    splitting_step_in_place(comp, part, &mut out, h, &mut SplittingWorkspace::default(), &mut Cost::default())?;
    Ok(out)
}
