//! Explicit Runge–Kutta steps, fixed and embedded, and the step-size controller.

use super::tableau::ButcherTableau;
use crate::error::{Error, Result};
use crate::system::{all_finite, Cost, OdeSystem, State};

/// Stage storage reused across steps.
#[derive(Debug, Clone, Default)]
pub struct RkWorkspace {
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

impl RkWorkspace {
    pub fn new(stages: usize, dim: usize) -> Self {
        Self { k: vec![vec![0.0; dim]; stages], tmp: vec![0.0; dim] }
    }

    fn ensure(&mut self, stages: usize, dim: usize) {
        if self.k.len() != stages || self.tmp.len() != dim {
            *self = Self::new(stages, dim);
        }
    }

    pub fn stage(&self, i: usize) -> &[f64] {
        &self.k[i]
    }
}

/// Fills the stages of one step. `first` is `f(x)` when the caller has it.
fn compute_stages(
    tab: &ButcherTableau,
    sys: &OdeSystem,
    x: &[f64],
    h: f64,
    ws: &mut RkWorkspace,
    first: Option<&[f64]>,
    cost: &mut Cost,
) -> Result<()> {
    let s = tab.stages();
    ws.ensure(s, x.len());
    match first {
        Some(f0) => ws.k[0].copy_from_slice(f0),
        None => {
            sys.rhs_into(x, &mut ws.k[0]);
            cost.rhs_evals += 1;
        }
    }
    for i in 1..s {
        ws.tmp.copy_from_slice(x);
        for j in 0..i {
            let a = tab.a(i, j);
            if a != 0.0 {
                let ha = h * a;
                for (t, kj) in ws.tmp.iter_mut().zip(&ws.k[j]) {
                    *t += ha * kj;
                }
            }
        }
        let (_, rest) = ws.k.split_at_mut(i);
        sys.rhs_into(&ws.tmp, &mut rest[0]);
        cost.rhs_evals += 1;
        if !all_finite(&rest[0]) {
            return Err(Error::NonFinite("Runge-Kutta stage"));
        }
    }
    Ok(())
}

fn combine(tab: &ButcherTableau, x: &[f64], h: f64, ws: &RkWorkspace, out: &mut [f64]) {
    out.copy_from_slice(x);
    for j in 0..tab.stages() {
        let b = tab.b(j);
        if b != 0.0 {
            let hb = h * b;
            for (o, kj) in out.iter_mut().zip(&ws.k[j]) {
                *o += hb * kj;
            }
        }
    }
}

/// One explicit step into `out`, reusing `ws`. Costs `s` right-hand side
/// evaluations unless `first` supplies `f(x)`.
pub fn rk_step_into(
    tab: &ButcherTableau,
    sys: &OdeSystem,
    x: &[f64],
    h: f64,
    ws: &mut RkWorkspace,
    first: Option<&[f64]>,
    out: &mut [f64],
    cost: &mut Cost,
) -> Result<()> {
    compute_stages(tab, sys, x, h, ws, first, cost)?;
    combine(tab, x, h, ws, out);
    if !all_finite(out) {
        return Err(Error::NonFinite("Runge-Kutta step"));
    }
    Ok(())
}

/// One step of an explicit tableau.
pub fn rk_fixed_step(tab: &ButcherTableau, sys: &OdeSystem, x: &[f64], h: f64) -> Result<State> {
    if !tab.is_explicit() {
        return Err(Error::InvalidArgument(format!("{} is not explicit", tab.name())));
    }
    sys.check_dim(x)?;
    let mut out = vec![0.0; x.len()];
    rk_step_into(tab, sys, x, h, &mut RkWorkspace::default(), None, &mut out, &mut Cost::default())?;
    Ok(out)
}

/// Error-based step-size control for embedded pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct StepController {
    pub rtol: f64,
    pub atol: f64,
    pub safety: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    pub h_min: f64,
    pub h_max: f64,
    exponent: f64,
    rejected: bool,
}

impl StepController {
    /// Controller with the conventional constants for `tab`: safety 0.9 and
    /// factor clamp `[0.2, 10]`, or `[0.333, 6]` for the 8(5,3) pair.
    pub fn for_tableau(tab: &ButcherTableau, rtol: f64, atol: f64) -> Result<Self> {
        let p_hat = tab
            .embedded_order()
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no embedded estimate", tab.name())))?;
        if !(rtol >= 0.0 && atol >= 0.0 && rtol + atol > 0.0) {
            return Err(Error::InvalidArgument(format!("bad tolerances rtol={rtol} atol={atol}")));
        }
        let (min_factor, max_factor) = if tab.error3_weights().is_some() { (0.333, 6.0) } else { (0.2, 10.0) };
        Ok(Self {
            rtol,
            atol,
            safety: 0.9,
            min_factor,
            max_factor,
            h_min: 0.0,
            h_max: f64::INFINITY,
            exponent: 1.0 / (p_hat as f64 + 1.0),
            rejected: false,
        })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    #[inline]
    fn scale(&self, a: f64, b: f64) -> f64 {
        self.atol + self.rtol * a.abs().max(b.abs())
    }

    /// Scaled error norm of the step `x -> x_new` from its stages.
    pub fn error_norm(&self, tab: &ButcherTableau, ws: &RkWorkspace, h: f64, x: &[f64], x_new: &[f64]) -> f64 {
        let e = tab.error_weights().expect("embedded tableau");
        let n = x.len();
        match tab.error3_weights() {
            None => {
                let mut ss = 0.0;
                for l in 0..n {
                    let mut err = 0.0;
                    for (j, ej) in e.iter().enumerate() {
                        if *ej != 0.0 {
                            err += ej * ws.k[j][l];
                        }
                    }
                    let r = h * err / self.scale(x[l], x_new[l]);
                    ss += r * r;
                }
                (ss / n as f64).sqrt()
            }
            Some(e3) => {
                let (mut ss5, mut ss3) = (0.0, 0.0);
                for l in 0..n {
                    let (mut err5, mut err3) = (0.0, 0.0);
                    for j in 0..tab.stages() {
                        let kj = ws.k[j][l];
                        err5 += e[j] * kj;
                        err3 += e3[j] * kj;
                    }
                    let sc = self.scale(x[l], x_new[l]);
                    ss5 += (err5 / sc).powi(2);
                    ss3 += (err3 / sc).powi(2);
                }
                let denom = ss5 + 0.01 * ss3;
                if denom == 0.0 {
                    0.0
                } else {
                    h.abs() * ss5 / (denom * n as f64).sqrt()
                }
            }
        }
    }

    /// Decides on a step with error norm `err` and returns `(accepted, next h)`.
    pub fn decide(&mut self, err: f64, h: f64) -> (bool, f64) {
        if err < 1.0 {
            let mut factor = if err == 0.0 {
                self.max_factor
            } else {
                (self.safety * err.powf(-self.exponent)).min(self.max_factor)
            };
            if self.rejected {
                factor = factor.min(1.0);
            }
            self.rejected = false;
            (true, self.clamp(h * factor))
        } else {
            let factor = if err.is_finite() {
                (self.safety * err.powf(-self.exponent)).max(self.min_factor)
            } else {
                self.min_factor
            };
            self.rejected = true;
            (false, self.clamp(h * factor))
        }
    }

    fn clamp(&self, h: f64) -> f64 {
        h.min(self.h_max)
    }

    /// Starting step from the usual two-evaluation estimate of the local
    /// Lipschitz constant. `f0 = f(x0)`; costs one evaluation.
    pub fn initial_step(&self, sys: &OdeSystem, x0: &[f64], f0: &[f64], order: usize, cost: &mut Cost) -> f64 {
        let n = x0.len() as f64;
        let scale: Vec<f64> = x0.iter().map(|v| self.atol + v.abs() * self.rtol).collect();
        let rms = |v: &dyn Fn(usize) -> f64| ((0..x0.len()).map(|i| (v(i) / scale[i]).powi(2)).sum::<f64>() / n).sqrt();
        let d0 = rms(&|i| x0[i]);
        let d1 = rms(&|i| f0[i]);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.h_max);
        let x1: Vec<f64> = x0.iter().zip(f0).map(|(x, f)| x + h0 * f).collect();
        let f1 = sys.rhs(&x1);
        cost.rhs_evals += 1;
        let d2 = rms(&|i| f1[i] - f0[i]) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / (order as f64 + 1.0))
        };
        (100.0 * h0).min(h1).min(self.h_max)
    }
}

/// Outcome of one attempted embedded step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddedStep {
    pub accepted: bool,
    pub error_norm: f64,
    pub h_next: f64,
}

/// Attempts a step of size `h` from `x`, writing the candidate to `out`.
///
/// `f0` is `f(x)`. On return `ws` holds the stages; for first-same-as-last
/// pairs the final stage is `f(out)`.
pub fn rk_embedded_step(
    tab: &ButcherTableau,
    sys: &OdeSystem,
    x: &[f64],
    f0: &[f64],
    h: f64,
    controller: &mut StepController,
    ws: &mut RkWorkspace,
    out: &mut [f64],
    cost: &mut Cost,
) -> Result<EmbeddedStep> {
    if !tab.is_embedded() {
        return Err(Error::InvalidArgument(format!("{} has no embedded estimate", tab.name())));
    }
    let computed = compute_stages(tab, sys, x, h, ws, Some(f0), cost);
    let error_norm = match computed {
        Ok(()) => {
            combine(tab, x, h, ws, out);
            if all_finite(out) {
                controller.error_norm(tab, ws, h, x, out)
            } else {
                f64::INFINITY
            }
        }
        // a blown-up stage is treated as a very large error
        Err(Error::NonFinite(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let (accepted, h_next) = controller.decide(error_norm, h);
    if !accepted && h_next.abs() < controller.h_min {
        return Err(Error::StepUnderflow { t: f64::NAN, h: h_next, h_min: controller.h_min });
    }
    Ok(EmbeddedStep { accepted, error_norm, h_next })
}

/// Convenience wrapper returning `(candidate, outcome)`.
pub fn rk_embedded_step_alloc(
    tab: &ButcherTableau,
    sys: &OdeSystem,
    x: &[f64],
    h: f64,
    controller: &mut StepController,
) -> Result<(State, EmbeddedStep)> {
    sys.check_dim(x)?;
    let f0 = sys.rhs(x);
    let mut out = vec![0.0; x.len()];
    let step =
        rk_embedded_step(tab, sys, x, &f0, h, controller, &mut RkWorkspace::default(), &mut out, &mut Cost::default())?;
    Ok((out, step))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator() -> OdeSystem {
        OdeSystem::new("sho", 2, |x, out| {
            out[0] = x[1];
            out[1] = -x[0];
        })
    }

    fn growth(lambda: f64) -> OdeSystem {
        OdeSystem::new("exp", 1, move |x, out| out[0] = lambda * x[0])
    }

    #[test]
    fn euler_on_oscillator() {
        // (q, p) = (1, 0), q' = p, p' = -q
        let out = rk_fixed_step(&ButcherTableau::euler(), &oscillator(), &[1.0, 0.0], 0.1).unwrap();
        assert_eq!(out, vec![1.0, -0.1]);
    }

    #[test]
    fn rk4_matches_taylor_polynomial() {
        let h: f64 = 0.1;
        let out = rk_fixed_step(&ButcherTableau::rk4(), &growth(1.0), &[1.0], h).unwrap();
        let taylor = 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((out[0] - taylor).abs() < 1e-15);
        assert!((out[0] - 1.105_170_833_333_333).abs() < 1e-14);
    }

    #[test]
    fn fixed_step_counts_stages() {
        let tab = ButcherTableau::rk4();
        let mut cost = Cost::default();
        let mut out = [0.0];
        rk_step_into(&tab, &growth(1.0), &[1.0], 0.1, &mut RkWorkspace::default(), None, &mut out, &mut cost).unwrap();
        assert_eq!(cost.rhs_evals, 4);
    }

    #[test]
    fn non_finite_stage_reported() {
        let sys = OdeSystem::new("bad", 1, |x, out| out[0] = 1.0 / (x[0] - 1.0));
        let err = rk_fixed_step(&ButcherTableau::rk4(), &sys, &[1.0], 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn smooth_decay_accepts_first_trial() {
        let tab = ButcherTableau::dopri5();
        let mut ctl = StepController::for_tableau(&tab, 1e-3, 1e-3).unwrap();
        let (_, step) = rk_embedded_step_alloc(&tab, &growth(-1.0), &[1.0], 0.1, &mut ctl).unwrap();
        assert!(step.accepted && step.error_norm < 1.0);
        assert!(step.h_next > 0.1);
    }

    #[test]
    fn huge_step_rejected_and_shrunk() {
        let tab = ButcherTableau::dop853();
        let mut ctl = StepController::for_tableau(&tab, 1e-10, 1e-10).unwrap();
        let (_, step) = rk_embedded_step_alloc(&tab, &oscillator(), &[1.0, 0.0], 3.0, &mut ctl).unwrap();
        assert!(!step.accepted);
        assert!(step.h_next < 3.0 && step.h_next >= 0.333 * 3.0);
    }

    #[test]
    fn no_growth_right_after_rejection() {
        let tab = ButcherTableau::dopri5();
        let mut ctl = StepController::for_tableau(&tab, 1e-6, 1e-6).unwrap();
        let (ok, h) = ctl.decide(4.0, 1.0);
        assert!(!ok && h < 1.0);
        let (ok, h2) = ctl.decide(1e-6, h);
        assert!(ok && h2 <= h);
        let (_, h3) = ctl.decide(1e-6, h2);
        assert!(h3 > h2);
    }
}
