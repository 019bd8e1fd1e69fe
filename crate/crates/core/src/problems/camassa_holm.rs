//! Periodic Camassa–Holm `u_t − u_xxt + 3uu_x = 2u_xu_xx + uu_xxx`,
//! discretised with fourth-order `D_x`, `D_xx` as
//!
//! `u̇ = −½ (I − D_xx)⁻¹ D_x g`,  `g = 3u² + (D_x u)² − 2D_x(u ∘ D_x u)`.
//!
//! `g` is `∇H₂/Δx` for `H₂ = Δx Σ (u³ + u(D_x u)²)`, and `(I − D_xx)⁻¹ D_x`
//! is skew, so `H₂` is exact. `H₁ = Δx Σ (u² + (D_x u)²)` is conserved only up
//! to the truncation error since `D_xx ≠ D_x²`.

use std::sync::Arc;

use super::fd::{PeriodicDifference, PeriodicGrid};
use crate::action::SymmetryAction;
use crate::error::Result;
use crate::linalg::{DenseMatrix, LuFactors};
use crate::system::{Invariant, OdeSystem, State};

pub const DEFAULT_POINTS: usize = 128;
pub const DEFAULT_LENGTH: f64 = 80.0;
pub const DEFAULT_CENTER: f64 = 40.0;

struct Operators {
    dx_op: PeriodicDifference,
    helmholtz: LuFactors,
}

impl Operators {
    /// `g = 3u² + w² − 2D_x(u ∘ w)` with `w = D_x u`.
    fn energy_density(&self, u: &[f64], g: &mut [f64]) {
        let w = self.dx_op.apply(u);
        let uw: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a * b).collect();
        self.dx_op.apply_into(&uw, g);
        for ((gi, ui), wi) in g.iter_mut().zip(u).zip(&w) {
            *gi = 3.0 * ui * ui + wi * wi - 2.0 * *gi;
        }
    }
}

/// Camassa–Holm on `n` points over a period `length`, with invariants `[H₁, H₂]`.
pub fn camassa_holm(n: usize, length: f64) -> Result<OdeSystem> {
    let grid = PeriodicGrid::new(n, length)?;
    let dx_op = PeriodicDifference::first_derivative(&grid, 4)?;
    let dxx = PeriodicDifference::second_derivative(&grid, 4)?.matrix();
    let mut lhs = DenseMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            lhs[(i, j)] -= dxx[(i, j)];
        }
    }
    let ops = Arc::new(Operators { dx_op, helmholtz: LuFactors::new(&lhs)? });
    let h = grid.dx();

    let rhs = {
        let ops = Arc::clone(&ops);
        move |u: &[f64], out: &mut [f64]| {
            let mut g = vec![0.0; u.len()];
            ops.energy_density(u, &mut g);
            ops.dx_op.apply_into(&g, out);
            ops.helmholtz.solve_in_place(out);
            for o in out.iter_mut() {
                *o *= -0.5;
            }
        }
    };
    let h1 = {
        let ops = Arc::clone(&ops);
        move |u: &[f64]| {
            let w = ops.dx_op.apply(u);
            h * u.iter().zip(&w).map(|(a, b)| a * a + b * b).sum::<f64>()
        }
    };
    let h1_grad = {
        let ops = Arc::clone(&ops);
        move |u: &[f64], g: &mut [f64]| {
            let w = ops.dx_op.apply(u);
            ops.dx_op.apply_into(&w, g);
            for (gi, ui) in g.iter_mut().zip(u) {
                *gi = 2.0 * h * (ui - *gi);
            }
        }
    };
    let h2 = {
        let ops = Arc::clone(&ops);
        move |u: &[f64]| {
            let w = ops.dx_op.apply(u);
            h * u.iter().zip(&w).map(|(a, b)| a * a * a + a * b * b).sum::<f64>()
        }
    };
    let h2_grad = move |u: &[f64], g: &mut [f64]| {
        ops.energy_density(u, g);
        for gi in g.iter_mut() {
            *gi *= h;
        }
    };

    Ok(OdeSystem::new(format!("camassa-holm-{n}"), n, rhs)
        .with_invariant(Invariant::new("H1", h1, h1_grad).approximate())
        .with_invariant(Invariant::new("H2", h2, h2_grad)))
}

/// The default 128-point, period-80 discretisation.
pub fn default_camassa_holm() -> OdeSystem {
    camassa_holm(DEFAULT_POINTS, DEFAULT_LENGTH).expect("default grid is valid")
}

/// `u(x) = c · e^{−|x − x₀|}` sampled at `x_i = iΔx`.
pub fn peakon(n: usize, length: f64, speed: f64, center: f64) -> Result<State> {
    let grid = PeriodicGrid::new(n, length)?;
    Ok(grid.points().into_iter().map(|x| speed * (-(x - center).abs()).exp()).collect())
}

pub fn default_peakon(speed: f64) -> State {
    peakon(DEFAULT_POINTS, DEFAULT_LENGTH, speed, DEFAULT_CENTER).expect("default grid is valid")
}

/// `u ↦ e^t u`: `H₁` has degree 2, `H₂` degree 3.
pub fn scaling_action() -> SymmetryAction {
    SymmetryAction::isotropic(vec![Some(2.0), Some(3.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{check_first_integral, gradient_check};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_states(n: usize, count: usize, seed: u64) -> Vec<State> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn h2_is_exact_and_h1_is_not() {
        let sys = default_camassa_holm();
        let samples = random_states(128, 50, 21);
        assert!(check_first_integral(&sys, 1, &samples).unwrap() <= 1e-10);
        // Rough random data exposes the D_xx vs D_x² mismatch.
        assert!(check_first_integral(&sys, 0, &samples).unwrap() > 1e-6);
        assert!(sys.invariants()[0].is_approximate());
    }

    #[test]
    fn gradients_match_differences() {
        let sys = default_camassa_holm();
        let mut states = random_states(128, 6, 22);
        let x = states.pop().unwrap();
        for inv in sys.invariants() {
            assert!(gradient_check(inv, &x, &states, 1e-7, 1e-6) <= 1.0, "{}", inv.label());
        }
    }

    #[test]
    fn smooth_data_nearly_conserve_h1() {
        let sys = default_camassa_holm();
        let grid = PeriodicGrid::new(128, 80.0).unwrap();
        let u: Vec<f64> = grid.points().iter().map(|x| 0.5 * (-(x - 40.0).powi(2) / 20.0).exp()).collect();
        assert!(check_first_integral(&sys, 0, &[u]).unwrap() < 1e-4);
    }

    #[test]
    fn peakon_shape() {
        let u = default_peakon(2.0);
        assert_eq!(u[64], 2.0);
        assert!((u[65] - 2.0 * (-0.625f64).exp()).abs() < 1e-15);
    }
}
