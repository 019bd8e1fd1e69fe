//! Planar double pendulum with unit masses and lengths.
//!
//! `H = (p₁² + 2p₂² − 2c p₁p₂) / (2(2 − c²)) + V(q)` with `c = cos(q₁ − q₂)`,
//! and either torsion springs `V = ½(q₁² + q₂²)` or gravity
//! `V = −2cos q₁ − cos q₂`.
//!
//! The triangular map `y = (h₁(q₁), h₂(q₂), Lᵀ(q) p)`, with `L` the Cholesky
//! factor of the kinetic matrix, turns `H` into `½(y₁² + y₂²) + y₃² + y₄²`
//! (torsion) or `y₁ + y₂ + y₃² + y₄²` (gravity), both homogeneous under a
//! diagonal scaling of `y`.

use std::sync::Arc;

use crate::action::{Diffeomorphism, SymmetryAction};
use crate::error::{Error, Result};
use crate::system::{Invariant, OdeSystem};

/// Below this, `|h_i'(q_i)|` marks the map as ill-conditioned.
pub const MIN_MAP_DERIVATIVE: f64 = 1e-6;
/// Inverse-trig arguments this close to ±1 are ill-conditioned; beyond ±1 by
/// more than this they are out of range.
pub const TRIG_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    Torsion,
    Gravity,
}

impl Potential {
    pub fn name(self) -> &'static str {
        match self {
            Potential::Torsion => "torsion",
            Potential::Gravity => "gravity",
        }
    }

    fn value(self, q1: f64, q2: f64) -> f64 {
        match self {
            Potential::Torsion => 0.5 * (q1 * q1 + q2 * q2),
            Potential::Gravity => -2.0 * q1.cos() - q2.cos(),
        }
    }

    fn gradient(self, q1: f64, q2: f64) -> (f64, f64) {
        match self {
            Potential::Torsion => (q1, q2),
            Potential::Gravity => (2.0 * q1.sin(), q2.sin()),
        }
    }
}

/// Initial point used by the experiments.
pub const DEFAULT_INITIAL: [f64; 4] = [0.1, -0.05, 1.5, -1.2];

/// `(T, ∂T/∂q₁, ∂T/∂p₁, ∂T/∂p₂)`; `∂T/∂q₂ = −∂T/∂q₁`.
#[inline]
fn kinetic(x: &[f64]) -> (f64, f64, f64, f64) {
    let (q1, q2, p1, p2) = (x[0], x[1], x[2], x[3]);
    let (s, c) = (q1 - q2).sin_cos();
    let delta = 2.0 - c * c;
    let num = p1 * p1 + 2.0 * p2 * p2 - 2.0 * c * p1 * p2;
    let t = num / (2.0 * delta);
    let dq1 = s * (p1 * p2 * delta - num * c) / (delta * delta);
    let dp1 = (p1 - c * p2) / delta;
    let dp2 = (2.0 * p2 - c * p1) / delta;
    (t, dq1, dp1, dp2)
}

pub fn hamiltonian(potential: Potential, x: &[f64]) -> f64 {
    kinetic(x).0 + potential.value(x[0], x[1])
}

fn hamiltonian_gradient(potential: Potential, x: &[f64], g: &mut [f64]) {
    let (_, dq1, dp1, dp2) = kinetic(x);
    let (v1, v2) = potential.gradient(x[0], x[1]);
    g[0] = dq1 + v1;
    g[1] = -dq1 + v2;
    g[2] = dp1;
    g[3] = dp2;
}

/// Hamilton's equations for the chosen potential, with `H` as invariant 0.
pub fn double_pendulum(potential: Potential) -> OdeSystem {
    OdeSystem::new(format!("double-pendulum-{}", potential.name()), 4, move |x, out| {
        let (_, dq1, dp1, dp2) = kinetic(x);
        let (v1, v2) = potential.gradient(x[0], x[1]);
        out[0] = dp1;
        out[1] = dp2;
        out[2] = -(dq1 + v1);
        out[3] = -(-dq1 + v2);
    })
    .with_invariant(Invariant::new(
        "H",
        move |x| hamiltonian(potential, x),
        move |x, g| hamiltonian_gradient(potential, x, g),
    ))
}

/// Cholesky factor `(λ₁₁, λ₂₁, λ₂₂)` of the kinetic matrix
/// `M(q) = [[1, −c], [−c, 2]] / (2Δ)`, `Δ = 2 − c²`, in the bottom-right-first
/// form of [`crate::linalg::cholesky_2x2`]. For this `M` it reduces to
/// `(½, −c/(2√Δ), 1/√Δ)`.
#[inline]
fn kinetic_factor(q1: f64, q2: f64) -> (f64, f64, f64) {
    let c = (q1 - q2).cos();
    let r = 1.0 / (2.0 - c * c).sqrt();
    (0.5, -0.5 * c * r, r)
}

/// The triangular change of variables for one potential.
#[derive(Debug, Clone, Copy)]
pub struct PendulumMap {
    potential: Potential,
}

impl PendulumMap {
    pub fn new(potential: Potential) -> Self {
        Self { potential }
    }

    /// `H` in the new variables.
    pub fn transformed_hamiltonian(&self, y: &[f64]) -> f64 {
        match self.potential {
            Potential::Torsion => 0.5 * (y[0] * y[0] + y[1] * y[1]) + y[2] * y[2] + y[3] * y[3],
            Potential::Gravity => y[0] + y[1] + y[2] * y[2] + y[3] * y[3],
        }
    }

    /// `(h₁(q₁), h₂(q₂))`.
    fn h(&self, q1: f64, q2: f64) -> (f64, f64) {
        match self.potential {
            Potential::Torsion => (q1, q2),
            Potential::Gravity => (-2.0 * q1.cos(), -q2.cos()),
        }
    }
}

/// `±arccos(arg) + 2πk` closest to `reference`.
fn arccos_near(arg: f64, reference: f64) -> Result<f64> {
    if arg.abs() > 1.0 + TRIG_MARGIN || !arg.is_finite() {
        return Err(Error::OutOfRange(arg));
    }
    if arg.abs() >= 1.0 - TRIG_MARGIN {
        return Err(Error::IllConditionedMap(format!("inverse cosine argument {arg} at the edge of its range")));
    }
    let a = arg.clamp(-1.0, 1.0).acos();
    let tau = std::f64::consts::TAU;
    let best = [a, -a]
        .into_iter()
        .map(|b| b + tau * ((reference - b) / tau).round())
        .min_by(|u, v| (u - reference).abs().total_cmp(&(v - reference).abs()))
        .unwrap();
    Ok(best)
}

impl Diffeomorphism for PendulumMap {
    fn forward(&self, x: &[f64], y: &mut [f64]) {
        let (h1, h2) = self.h(x[0], x[1]);
        let (l11, l21, l22) = kinetic_factor(x[0], x[1]);
        y[0] = h1;
        y[1] = h2;
        y[2] = l11 * x[2];
        y[3] = l21 * x[2] + l22 * x[3];
    }

    fn inverse(&self, y: &[f64], reference: &[f64], x: &mut [f64]) -> Result<()> {
        let (q1, q2) = match self.potential {
            Potential::Torsion => (y[0], y[1]),
            Potential::Gravity => (arccos_near(-0.5 * y[0], reference[0])?, arccos_near(-y[1], reference[1])?),
        };
        let (l11, l21, l22) = kinetic_factor(q1, q2);
        x[0] = q1;
        x[1] = q2;
        x[2] = y[2] / l11;
        x[3] = (y[3] - l21 * x[2]) / l22;
        Ok(())
    }

    fn transformed_value(&self, index: usize, y: &[f64]) -> Option<f64> {
        (index == 0).then(|| self.transformed_hamiltonian(y))
    }

    fn check_conditioning(&self, x: &[f64]) -> Result<()> {
        let mut y = [0.0; 4];
        self.forward_checked(x, &mut y)
    }

    fn forward_checked(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if let Potential::Gravity = self.potential {
            let d1 = (2.0 * x[0].sin()).abs();
            let d2 = x[1].sin().abs();
            if d1 < MIN_MAP_DERIVATIVE || d2 < MIN_MAP_DERIVATIVE {
                return Err(Error::IllConditionedMap(format!("|h'(q)| = ({d1:e}, {d2:e})")));
            }
        }
        self.forward(x, y);
        Ok(())
    }
}

/// The conjugate scaling under which `H` has degree 1: inner weights
/// `(½, ½, ½, ½)` for torsion and `(1, 1, ½, ½)` for gravity.
pub fn energy_action(potential: Potential) -> SymmetryAction {
    let weights = match potential {
        Potential::Torsion => vec![0.5; 4],
        Potential::Gravity => vec![1.0, 1.0, 0.5, 0.5],
    };
    SymmetryAction::conjugate(Arc::new(PendulumMap::new(potential)), weights, vec![Some(1.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::check_first_integral;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_states(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                vec![
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ]
            })
            .collect()
    }

    #[test]
    fn energy_is_a_first_integral() {
        for pot in [Potential::Torsion, Potential::Gravity] {
            let sys = double_pendulum(pot);
            assert!(check_first_integral(&sys, 0, &random_states(50, 1)).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn aligned_angles_reduce_kinetic_energy() {
        let x = [0.4, 0.4, 1.3, -0.7];
        let (p1, p2) = (x[2], x[3]);
        let expected = (p1 * p1 + 2.0 * p2 * p2 - 2.0 * p1 * p2) / 2.0 + 0.5 * (0.16 + 0.16);
        assert!((hamiltonian(Potential::Torsion, &x) - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_momentum_means_no_angular_velocity() {
        let f = double_pendulum(Potential::Gravity).rhs(&[0.7, -1.1, 0.0, 0.0]);
        assert_eq!((f[0], f[1]), (0.0, 0.0));
    }

    #[test]
    fn torsion_round_trip() {
        let map = PendulumMap::new(Potential::Torsion);
        let x = DEFAULT_INITIAL;
        let mut y = [0.0; 4];
        map.forward(&x, &mut y);
        let c = 0.15f64.cos();
        let delta = 2.0 - c * c;
        assert_eq!(y[0], 0.1);
        assert!((y[2] - 0.75).abs() < 1e-15);
        assert!((y[3] - (2.0 * -1.2 - c * 1.5) / (2.0 * delta.sqrt())).abs() < 1e-15);
        let mut back = [0.0; 4];
        map.inverse(&y, &x, &mut back).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn zero_momentum_maps_to_zero() {
        let mut y = [1.0; 4];
        PendulumMap::new(Potential::Gravity).forward(&[0.3, 1.2, 0.0, 0.0], &mut y);
        assert_eq!((y[2], y[3]), (0.0, 0.0));
    }

    #[test]
    fn conjugacy_and_round_trip_at_random_states() {
        for pot in [Potential::Torsion, Potential::Gravity] {
            let map = PendulumMap::new(pot);
            for x in random_states(100, 2) {
                let mut y = [0.0; 4];
                map.forward(&x, &mut y);
                let h = hamiltonian(pot, &x);
                assert!((map.transformed_hamiltonian(&y) - h).abs() <= 1e-12 * (1.0 + h.abs()));
                let mut back = [0.0; 4];
                map.inverse(&y, &x, &mut back).unwrap();
                for (a, b) in back.iter().zip(&x) {
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{pot:?} {x:?} -> {back:?}");
                }
            }
        }
    }

    #[test]
    fn gravity_inverse_range_checks() {
        let map = PendulumMap::new(Potential::Gravity);
        let mut x = [0.0; 4];
        let reference = [0.5, 0.5, 0.0, 0.0];
        assert!(matches!(map.inverse(&[-2.5, 0.0, 0.0, 0.0], &reference, &mut x), Err(Error::OutOfRange(_))));
        assert!(matches!(map.inverse(&[-2.0, 0.0, 0.0, 0.0], &reference, &mut x), Err(Error::IllConditionedMap(_))));
        assert!(map.check_conditioning(&[0.0, 0.5, 1.0, 1.0]).is_err());
        assert!(map.check_conditioning(&[0.4, 0.5, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn energy_degree_law() {
        for pot in [Potential::Torsion, Potential::Gravity] {
            let action = energy_action(pot);
            let inv = double_pendulum(pot).invariants()[0].clone();
            let x = [0.3, -0.4, 0.8, 0.5];
            let d = crate::action::evaluate_degree_law(&action, &inv, 1.0, &x, 0.01).unwrap();
            assert!(d <= 1e-12, "{pot:?} {d}");
        }
    }
}
