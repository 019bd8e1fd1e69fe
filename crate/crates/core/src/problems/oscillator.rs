//! Two-degree-of-freedom anharmonic oscillator
//!
//! `H = ½|p|² + 3(½q₁⁴ + q₂⁴) + 6(q₁² + 2q₂²) + 2q₁q₂(q₁² + 2q₂²) + 3 sin 5q₁ cos 3q₂`.

use crate::system::{Invariant, OdeSystem, SeparablePartition};

/// Initial point for convergence studies; `H ≈ 3.69`.
pub const DEFAULT_INITIAL: [f64; 4] = [0.3, -0.2, 0.5, 0.4];

pub fn potential(q: &[f64]) -> f64 {
    let (a, b) = (q[0], q[1]);
    3.0 * (0.5 * a.powi(4) + b.powi(4))
        + 6.0 * (a * a + 2.0 * b * b)
        + 2.0 * a * b * (a * a + 2.0 * b * b)
        + 3.0 * (5.0 * a).sin() * (3.0 * b).cos()
}

pub fn potential_gradient(q: &[f64], g: &mut [f64]) {
    let (a, b) = (q[0], q[1]);
    g[0] =
        6.0 * a.powi(3) + 12.0 * a + 2.0 * b * (3.0 * a * a + 2.0 * b * b) + 15.0 * (5.0 * a).cos() * (3.0 * b).cos();
    g[1] = 12.0 * b.powi(3) + 24.0 * b + 2.0 * a.powi(3) + 12.0 * a * b * b - 9.0 * (5.0 * a).sin() * (3.0 * b).sin();
}

pub fn hamiltonian(x: &[f64]) -> f64 {
    0.5 * (x[2] * x[2] + x[3] * x[3]) + potential(&x[..2])
}

pub fn oscillator() -> OdeSystem {
    OdeSystem::new("oscillator", 4, |x, out| {
        out[0] = x[2];
        out[1] = x[3];
        let mut g = [0.0; 2];
        potential_gradient(&x[..2], &mut g);
        out[2] = -g[0];
        out[3] = -g[1];
    })
    .with_invariant(Invariant::new("H", hamiltonian, |x, g| {
        potential_gradient(&x[..2], &mut g[..2]);
        g[2] = x[2];
        g[3] = x[3];
    }))
    .with_partition(SeparablePartition::new(2, |p, v| v.copy_from_slice(p), potential_gradient))
}
