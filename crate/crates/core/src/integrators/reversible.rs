//! Reversible variable steps through a step-density variable `ρ`.
//!
//! The extended system `x' = f(x)/ρ`, `ρ' = G(x)` is advanced with a fixed
//! pseudo-step `ε` by the symmetric splitting
//!
//! ```text
//! ρ½ = ρ + ε/2 · G(x),   h = ε/ρ½,   x ← Φ_h(x),   ρ ← ρ½ + ε/2 · G(x)
//! ```
//!
//! which stays time-reversible whenever the base method `Φ` is symmetric.

use super::splitting::{splitting_step_in_place, Composition, SplittingWorkspace};
use crate::error::{Error, Result};
use crate::system::{norm2, Cost, OdeSystem};

/// The density `σ(x)` whose logarithmic rate drives `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepDensity {
    /// `G ≡ 0`: constant `ρ`, i.e. fixed steps `ε/ρ₀`.
    Constant,
    /// `σ(x) = ‖f(x)‖^e`.
    RhsNormPower(f64),
}

impl Default for StepDensity {
    fn default() -> Self {
        StepDensity::RhsNormPower(0.5)
    }
}

impl StepDensity {
    /// `σ(x)`; costs one evaluation of `f`.
    pub fn sigma(&self, sys: &OdeSystem, x: &[f64], cost: &mut Cost) -> f64 {
        match self {
            StepDensity::Constant => 1.0,
            StepDensity::RhsNormPower(e) => {
                cost.rhs_evals += 1;
                norm2(&sys.rhs(x)).powf(*e)
            }
        }
    }

    /// `G(x) = d/dt ln σ(x(t))`, from a centred difference of `1/σ` along `f`.
    pub fn control(&self, sys: &OdeSystem, x: &[f64], cost: &mut Cost) -> f64 {
        let StepDensity::RhsNormPower(e) = *self else {
            return 0.0;
        };
        let f = sys.rhs(x);
        let fnorm = norm2(&f);
        cost.rhs_evals += 1;
        if fnorm == 0.0 {
            return 0.0;
        }
        let sigma = fnorm.powf(e);
        let delta = 1e-5 * (1.0 + norm2(x)) / fnorm;
        let shifted = |sign: f64| -> Vec<f64> { x.iter().zip(&f).map(|(xi, fi)| xi + sign * delta * fi).collect() };
        let inv_sigma = |y: &[f64]| norm2(&sys.rhs(y)).powf(-e);
        let d_inv = (inv_sigma(&shifted(1.0)) - inv_sigma(&shifted(-1.0))) / (2.0 * delta);
        cost.rhs_evals += 2;
        -sigma * d_inv
    }
}

/// `(x, ρ, t)` of the reparametrised integration.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamState {
    pub x: Vec<f64>,
    pub rho: f64,
    pub t: f64,
}

/// Stateful stepper; caches `G` at the current point between steps.
#[derive(Debug, Clone)]
pub struct ReversibleStepper {
    composition: Composition,
    density: StepDensity,
    epsilon: f64,
    ws: SplittingWorkspace,
    cached_control: Option<f64>,
}

impl ReversibleStepper {
    pub fn new(composition: Composition, density: StepDensity, epsilon: f64) -> Result<Self> {
        if epsilon == 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("pseudo-step must be nonzero, got {epsilon}")));
        }
        Ok(Self { composition, density, epsilon, ws: SplittingWorkspace::default(), cached_control: None })
    }

    /// Reverses the direction of the pseudo-time.
    pub fn reverse(&mut self) {
        self.epsilon = -self.epsilon;
    }

    /// Forgets cached values after the state was changed from outside.
    pub fn invalidate(&mut self) {
        self.cached_control = None;
        self.ws.invalidate();
    }

    /// `ρ₀ = σ(x₀)`, the natural start for the density.
    pub fn initial_density(&self, sys: &OdeSystem, x: &[f64], cost: &mut Cost) -> f64 {
        self.density.sigma(sys, x, cost)
    }

    /// One step; with `t_end` set the physical step is clipped so that `t`
    /// does not pass it. Returns the physical step taken.
    pub fn step(&mut self, sys: &OdeSystem, st: &mut ReparamState, t_end: Option<f64>, cost: &mut Cost) -> Result<f64> {
        let part = sys.partition().ok_or(Error::MissingPartition)?;
        let half = 0.5 * self.epsilon;
        let g0 = match self.cached_control {
            Some(g) => g,
            None => self.density.control(sys, &st.x, cost),
        };
        let rho_half = st.rho + half * g0;
        if !(rho_half > 0.0) {
            return Err(Error::DensityUnderflow(rho_half));
        }
        let mut h = self.epsilon / rho_half;
        if let Some(end) = t_end {
            if (st.t + h - end) * h.signum() > 0.0 {
                h = end - st.t;
            }
        }
        splitting_step_in_place(&self.composition, part, &mut st.x, h, &mut self.ws, cost)?;
        let g1 = self.density.control(sys, &st.x, cost);
        let rho = rho_half + half * g1;
        if !(rho > 0.0) {
            return Err(Error::DensityUnderflow(rho));
        }
        self.cached_control = Some(g1);
        st.rho = rho;
        st.t += h;
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::SeparablePartition;

    fn oscillator() -> OdeSystem {
        OdeSystem::new("sho", 2, |x, out| {
            out[0] = x[1];
            out[1] = -x[0];
        })
        .with_partition(SeparablePartition::new(1, |p, v| v[0] = p[0], |q, f| f[0] = q[0]))
    }

    #[test]
    fn constant_density_gives_fixed_steps() {
        let sys = oscillator();
        let mut stepper = ReversibleStepper::new(Composition::verlet(), StepDensity::Constant, 0.1).unwrap();
        let mut st = ReparamState { x: vec![1.0, 0.0], rho: 2.0, t: 0.0 };
        let mut cost = Cost::default();
        let mut plain = vec![1.0, 0.0];
        for _ in 0..10 {
            let h = stepper.step(&sys, &mut st, None, &mut cost).unwrap();
            assert_eq!(h, 0.05);
            plain = crate::integrators::splitting_step(&Composition::verlet(), &sys, &plain, 0.05).unwrap();
        }
        assert_eq!(st.x, plain);
        assert_eq!(st.rho, 2.0);
    }

    #[test]
    fn final_step_is_clipped() {
        let sys = oscillator();
        let mut stepper = ReversibleStepper::new(Composition::verlet(), StepDensity::Constant, 0.3).unwrap();
        let mut st = ReparamState { x: vec![1.0, 0.0], rho: 1.0, t: 0.0 };
        let mut cost = Cost::default();
        stepper.step(&sys, &mut st, Some(0.5), &mut cost).unwrap();
        let h = stepper.step(&sys, &mut st, Some(0.5), &mut cost).unwrap();
        assert!((h - 0.2).abs() < 1e-15);
        assert_eq!(st.t, 0.5);
    }

    #[test]
    fn negative_density_rejected() {
        let sys = oscillator();
        let mut stepper = ReversibleStepper::new(Composition::verlet(), StepDensity::Constant, 0.1).unwrap();
        let mut st = ReparamState { x: vec![1.0, 0.0], rho: -1.0, t: 0.0 };
        assert!(matches!(stepper.step(&sys, &mut st, None, &mut Cost::default()), Err(Error::DensityUnderflow(_))));
    }
}
