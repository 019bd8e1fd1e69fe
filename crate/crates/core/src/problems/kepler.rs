//! Planar Kepler problem `q̈ = −q/|q|³` with energy, angular momentum and the
//! first Runge–Lenz component as invariants.

use crate::action::SymmetryAction;
use crate::error::{Error, Result};
use crate::system::{Invariant, OdeSystem, SeparablePartition, State};

/// Orbital period for the normalised initial data (`H = −½`, semi-major axis 1).
pub const PERIOD: f64 = std::f64::consts::TAU;

/// Invariant indices within [`kepler`].
pub const ENERGY: usize = 0;
pub const ANGULAR_MOMENTUM: usize = 1;
pub const RUNGE_LENZ: usize = 2;

#[inline]
fn radius(x: &[f64]) -> f64 {
    x[0].hypot(x[1])
}

pub fn energy(x: &[f64]) -> f64 {
    0.5 * (x[2] * x[2] + x[3] * x[3]) - 1.0 / radius(x)
}

pub fn angular_momentum(x: &[f64]) -> f64 {
    x[0] * x[3] - x[1] * x[2]
}

/// `A₁ = p₂(p₂q₁ − p₁q₂) − q₁/|q|`.
pub fn runge_lenz(x: &[f64]) -> f64 {
    let (q1, q2, p1, p2) = (x[0], x[1], x[2], x[3]);
    p2 * (p2 * q1 - p1 * q2) - q1 / radius(x)
}

/// Right-hand side with the singularity reported instead of propagated.
pub fn kepler_rhs(x: &[f64]) -> Result<State> {
    if x[0] == 0.0 && x[1] == 0.0 {
        return Err(Error::SingularOrigin);
    }
    let r = radius(x);
    let r3 = r * r * r;
    Ok(vec![x[2], x[3], -x[0] / r3, -x[1] / r3])
}

/// The Kepler system with invariants `[H, L, A₁]` and the `T(p) + V(q)` split.
pub fn kepler() -> OdeSystem {
    OdeSystem::new("kepler", 4, |x, out| {
        let r = radius(x);
        let r3 = r * r * r;
        out[0] = x[2];
        out[1] = x[3];
        out[2] = -x[0] / r3;
        out[3] = -x[1] / r3;
    })
    .with_invariant(Invariant::new("H", energy, |x, g| {
        let r = radius(x);
        let r3 = r * r * r;
        g[0] = x[0] / r3;
        g[1] = x[1] / r3;
        g[2] = x[2];
        g[3] = x[3];
    }))
    .with_invariant(Invariant::new("L", angular_momentum, |x, g| {
        g[0] = x[3];
        g[1] = -x[2];
        g[2] = -x[1];
        g[3] = x[0];
    }))
    .with_invariant(Invariant::new("A1", runge_lenz, |x, g| {
        let (q1, q2, p1, p2) = (x[0], x[1], x[2], x[3]);
        let r = radius(x);
        let r3 = r * r * r;
        g[0] = p2 * p2 - q2 * q2 / r3;
        g[1] = -p1 * p2 + q1 * q2 / r3;
        g[2] = -p2 * q2;
        g[3] = 2.0 * p2 * q1 - p1 * q2;
    }))
    .with_partition(SeparablePartition::new(
        2,
        |p, v| v.copy_from_slice(p),
        |q, f| {
            let r = q[0].hypot(q[1]);
            let r3 = r * r * r;
            f[0] = q[0] / r3;
            f[1] = q[1] / r3;
        },
    ))
}

/// Pericentre start `q = (1 − e, 0)`, `p = (0, √((1+e)/(1−e)))`.
pub fn initial_state(eccentricity: f64) -> Result<State> {
    if !(0.0..1.0).contains(&eccentricity) {
        return Err(Error::InvalidArgument(format!("eccentricity {eccentricity} outside [0, 1)")));
    }
    let e = eccentricity;
    Ok(vec![1.0 - e, 0.0, 0.0, ((1.0 + e) / (1.0 - e)).sqrt()])
}

/// `(q, p) ↦ (e^{−2t} q, e^{t} p)`: `H` has degree 2, `L` degree −1, `A₁` degree 0.
pub fn energy_action() -> SymmetryAction {
    SymmetryAction::diagonal(vec![-2.0, -2.0, 1.0, 1.0], vec![Some(2.0), Some(-1.0), Some(0.0)])
}

/// `(q, p) ↦ (e^{at} q, e^{bt} p)`. `L` has degree `a + b`; `H` is homogeneous
/// (degree `2b`) only when `a = −2b`, and `A₁` (degree 0) under the same condition.
pub fn scaling_action(a: f64, b: f64) -> SymmetryAction {
    let balanced = a == -2.0 * b;
    let h = balanced.then_some(2.0 * b);
    let l = a + b;
    let a1 = balanced.then_some(0.0);
    SymmetryAction::diagonal(vec![a, a, b, b], vec![h, Some(l), a1])
}

/// `(q, p) ↦ (e^{t} q, p)`: only `L` is homogeneous (degree 1).
pub fn angular_action() -> SymmetryAction {
    scaling_action(1.0, 0.0)
}

/// Exact solution for the [`initial_state`] orbit, via Kepler's equation
/// `E − e sin E = t`.
pub fn exact_solution(eccentricity: f64, t: f64) -> Result<State> {
    initial_state(eccentricity)?;
    let e = eccentricity;
    let m = t.rem_euclid(PERIOD);
    let mut big_e = if e > 0.8 { std::f64::consts::PI } else { m };
    for _ in 0..100 {
        let f = big_e - e * big_e.sin() - m;
        let step = f / (1.0 - e * big_e.cos());
        big_e -= step;
        if step.abs() <= 1e-16 * (1.0 + big_e.abs()) {
            break;
        }
    }
    let (s, c) = big_e.sin_cos();
    let b = (1.0 - e * e).sqrt();
    let denom = 1.0 - e * c;
    Ok(vec![c - e, b * s, -s / denom, b * c / denom])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::evaluate_degree_law;
    use crate::system::check_first_integral;

    #[test]
    fn initial_invariants() {
        let x = initial_state(0.5).unwrap();
        assert!((energy(&x) + 0.5).abs() < 1e-15);
        assert!((angular_momentum(&x) - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((runge_lenz(&x) - 0.5).abs() < 1e-15);
        assert!(initial_state(1.0).is_err());
    }

    #[test]
    fn origin_is_singular() {
        assert_eq!(kepler_rhs(&[0.0, 0.0, 1.0, 0.0]), Err(Error::SingularOrigin));
        assert_eq!(kepler_rhs(&[1.0, 0.0, 0.0, 1.0]).unwrap(), vec![0.0, 1.0, -1.0, 0.0]);
    }

    #[test]
    fn invariants_are_first_integrals() {
        let sys = kepler();
        let samples: Vec<State> =
            (0..30).map(|i| exact_solution(0.7, 0.2 * i as f64).unwrap()).chain([vec![0.3, -1.2, 0.8, 0.1]]).collect();
        for k in 0..3 {
            assert!(check_first_integral(&sys, k, &samples).unwrap() < 1e-14, "{k}");
        }
    }

    #[test]
    fn degree_laws() {
        let sys = kepler();
        let x = [0.4, 0.9, -0.7, 0.2];
        let action = energy_action();
        for (k, inv) in sys.invariants().iter().enumerate() {
            let deg = action.degree(k).unwrap();
            assert!(evaluate_degree_law(&action, inv, deg, &x, 0.3).unwrap() < 1e-13);
        }
        let ang = angular_action();
        assert_eq!(ang.degree(0), None);
        assert!(evaluate_degree_law(&ang, &sys.invariants()[1], 1.0, &x, 0.3).unwrap() < 1e-13);
        assert_eq!(scaling_action(-2.0, 1.0).degrees(), energy_action().degrees());
    }

    #[test]
    fn exact_solution_is_periodic_and_conservative() {
        let e = 0.9;
        let x0 = initial_state(e).unwrap();
        let back = exact_solution(e, 3.0 * PERIOD).unwrap();
        for (a, b) in back.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-12);
        }
        let x = exact_solution(e, 1.234).unwrap();
        assert!((energy(&x) - energy(&x0)).abs() < 1e-13);
        assert!((angular_momentum(&x) - angular_momentum(&x0)).abs() < 1e-13);
    }

    #[test]
    fn exact_solution_matches_the_vector_field() {
        let e = 0.6;
        let t = 0.8;
        let dt = 1e-5;
        let xp = exact_solution(e, t + dt).unwrap();
        let xm = exact_solution(e, t - dt).unwrap();
        let f = kepler_rhs(&exact_solution(e, t).unwrap()).unwrap();
        for i in 0..4 {
            assert!(((xp[i] - xm[i]) / (2.0 * dt) - f[i]).abs() < 1e-8);
        }
    }
}
