//! Periodic KdV `u_t + (3u² + u_xx)_x = 0` with an eighth-order skew
//! first-derivative matrix `D`:
//!
//! `u̇ = −D(3u² + D²u)`.
//!
//! `H₁ = Δx Σ u` and `H₃ = Δx Σ (u³ − ½(Du)²)` are exact first integrals of
//! the discretisation; `H₂ = Δx Σ u²` is conserved only up to the truncation
//! error and is flagged approximate.

use std::sync::Arc;

use super::fd::{PeriodicDifference, PeriodicGrid};
use crate::action::SymmetryAction;
use crate::error::Result;
use crate::system::{Invariant, OdeSystem, State};

pub const DEFAULT_POINTS: usize = 64;
pub const DEFAULT_LENGTH: f64 = 40.0;
pub const DEFAULT_CENTER: f64 = 20.0;

/// KdV on `n` points over a period `length`, with invariants `[H₁, H₂, H₃]`.
pub fn kdv(n: usize, length: f64) -> Result<OdeSystem> {
    let grid = PeriodicGrid::new(n, length)?;
    let d = Arc::new(PeriodicDifference::first_derivative(&grid, 8)?);
    let dx = grid.dx();

    // g = 3u² + D²u, the gradient of H₃ divided by Δx.
    let energy_density = {
        let d = Arc::clone(&d);
        move |u: &[f64], g: &mut [f64]| {
            let mut w = vec![0.0; u.len()];
            d.apply_into(u, &mut w);
            d.apply_into(&w, g);
            for (gi, ui) in g.iter_mut().zip(u) {
                *gi += 3.0 * ui * ui;
            }
        }
    };
    let rhs = {
        let d = Arc::clone(&d);
        let energy_density = energy_density.clone();
        move |u: &[f64], out: &mut [f64]| {
            let mut g = vec![0.0; u.len()];
            energy_density(u, &mut g);
            d.apply_into(&g, out);
            for o in out.iter_mut() {
                *o = -*o;
            }
        }
    };
    let h3 = {
        let d = Arc::clone(&d);
        move |u: &[f64]| {
            let w = d.apply(u);
            dx * u.iter().zip(&w).map(|(ui, wi)| ui * ui * ui - 0.5 * wi * wi).sum::<f64>()
        }
    };

    Ok(OdeSystem::new(format!("kdv-{n}"), n, rhs)
        .with_invariant(Invariant::new("H1", move |u| dx * u.iter().sum::<f64>(), move |_, g| g.fill(dx)))
        .with_invariant(
            Invariant::new(
                "H2",
                move |u| dx * u.iter().map(|v| v * v).sum::<f64>(),
                move |u, g| {
                    for (gi, ui) in g.iter_mut().zip(u) {
                        *gi = 2.0 * dx * ui;
                    }
                },
            )
            .approximate(),
        )
        .with_invariant(Invariant::new("H3", h3, move |u, g| {
            energy_density(u, g);
            for gi in g.iter_mut() {
                *gi *= dx;
            }
        })))
}

/// The default 64-point, period-40 discretisation.
pub fn default_kdv() -> OdeSystem {
    kdv(DEFAULT_POINTS, DEFAULT_LENGTH).expect("default grid is valid")
}

/// `u(x) = c/2 · sech²(√c/2 · (x − x₀))` sampled at `x_i = iΔx`.
pub fn soliton(n: usize, length: f64, speed: f64, center: f64) -> Result<State> {
    let grid = PeriodicGrid::new(n, length)?;
    let k = 0.5 * speed.sqrt();
    Ok(grid
        .points()
        .into_iter()
        .map(|x| {
            let s = 1.0 / (k * (x - center)).cosh();
            0.5 * speed * s * s
        })
        .collect())
}

pub fn default_soliton(speed: f64) -> State {
    soliton(DEFAULT_POINTS, DEFAULT_LENGTH, speed, DEFAULT_CENTER).expect("default grid is valid")
}

/// `u ↦ e^t u`: `H₁` has degree 1, `H₂` degree 2, `H₃` is not homogeneous.
pub fn scaling_action() -> SymmetryAction {
    SymmetryAction::isotropic(vec![Some(1.0), Some(2.0), None])
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
    fn exact_integrals_hold_at_random_states() {
        let sys = default_kdv();
        let samples = random_states(64, 50, 11);
        assert!(check_first_integral(&sys, 0, &samples).unwrap() <= 1e-10);
        assert!(check_first_integral(&sys, 2, &samples).unwrap() <= 1e-10);
        assert!(sys.invariants()[1].is_approximate());
    }

    #[test]
    fn gradients_match_differences() {
        let sys = default_kdv();
        let mut states = random_states(64, 6, 12);
        let x = states.pop().unwrap();
        for inv in sys.invariants() {
            assert!(gradient_check(inv, &x, &states, 1e-7, 1e-6) <= 1.0, "{}", inv.label());
        }
    }

    #[test]
    fn soliton_shape() {
        let u = default_soliton(2.0);
        assert_eq!(u.len(), 64);
        assert!((u[32] - 1.0).abs() < 1e-15);
        assert!(u[0] < 1e-10 && u[0] > 0.0);
    }

    #[test]
    fn soliton_moves_right_at_its_speed() {
        // Fine grid so that the travelling-wave identity u_t = −c u_x is
        // resolved; checks signs and scaling of the discretisation.
        let (n, length, c) = (512, 40.0, 2.0);
        let sys = kdv(n, length).unwrap();
        let u = soliton(n, length, c, 20.0).unwrap();
        let f = sys.rhs(&u);
        let grid = PeriodicGrid::new(n, length).unwrap();
        let ux = PeriodicDifference::first_derivative(&grid, 8).unwrap().apply(&u);
        let worst = f.iter().zip(&ux).map(|(a, b)| (a + c * b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }
}
