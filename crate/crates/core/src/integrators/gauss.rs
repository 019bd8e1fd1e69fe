//! Implicit Gauss–Legendre collocation (orders 4 and 6).

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LuFactors};
use crate::system::{all_finite, Cost, OdeSystem, State};

pub const DEFAULT_GAUSS_TOL: f64 = 1e-13;
pub const DEFAULT_GAUSS_MAX_ITERS: usize = 50;

/// Coefficients `(A, b)` of the `s`-stage Gauss method, `s ∈ {2, 3}`.
pub fn gauss_coefficients(stages: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    match stages {
        2 => {
            let r = 3f64.sqrt() / 6.0;
            Ok((vec![vec![0.25, 0.25 - r], vec![0.25 + r, 0.25]], vec![0.5, 0.5]))
        }
        3 => {
            let r = 15f64.sqrt();
            Ok((
                vec![
                    vec![5.0 / 36.0, 2.0 / 9.0 - r / 15.0, 5.0 / 36.0 - r / 30.0],
                    vec![5.0 / 36.0 + r / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r / 24.0],
                    vec![5.0 / 36.0 + r / 30.0, 2.0 / 9.0 + r / 15.0, 5.0 / 36.0],
                ],
                vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
            ))
        }
        _ => Err(Error::InvalidArgument(format!("Gauss collocation with {stages} stages is not provided"))),
    }
}

/// Forward-difference Jacobian of `f` at `x` (`n + 1` evaluations, counting `f(x)` passed in).
fn jacobian(sys: &OdeSystem, x: &[f64], fx: &[f64], cost: &mut Cost) -> DenseMatrix {
    let n = x.len();
    let mut jac = DenseMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    for l in 0..n {
        let d = f64::EPSILON.sqrt() * x[l].abs().max(1.0);
        xp[l] = x[l] + d;
        let d = xp[l] - x[l];
        sys.rhs_into(&xp, &mut fp);
        for i in 0..n {
            jac[(i, l)] = (fp[i] - fx[i]) / d;
        }
        xp[l] = x[l];
    }
    cost.rhs_evals += n as u64;
    jac
}

/// One Gauss collocation step; the stage equations are solved by simplified
/// Newton iteration with the Jacobian frozen at `x`, until the update is
/// below `tol · (1 + ‖x‖∞)`.
pub fn gauss_collocation_step(
    stages: usize,
    sys: &OdeSystem,
    x: &[f64],
    h: f64,
    tol: f64,
    max_iters: usize,
) -> Result<State> {
    sys.check_dim(x)?;
    gauss_step_counted(stages, sys, x, h, tol, max_iters, &mut Cost::default())
}

pub(crate) fn gauss_step_counted(
    stages: usize,
    sys: &OdeSystem,
    x: &[f64],
    h: f64,
    tol: f64,
    max_iters: usize,
    cost: &mut Cost,
) -> Result<State> {
    let (a, b) = gauss_coefficients(stages)?;
    let n = x.len();
    let s = stages;
    let fx = sys.rhs(x);
    cost.rhs_evals += 1;
    let jac = jacobian(sys, x, &fx, cost);
    // I - h A ⊗ J
    let mut m = DenseMatrix::identity(s * n);
    for i in 0..s {
        for j in 0..s {
            let ha = h * a[i][j];
            for r in 0..n {
                for c in 0..n {
                    m[(i * n + r, j * n + c)] -= ha * jac[(r, c)];
                }
            }
        }
    }
    let lu = LuFactors::new(&m)?;
    let mut z = vec![0.0; s * n];
    let mut f: Vec<Vec<f64>> = vec![fx; s];
    let scale = 1.0 + x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut xs = vec![0.0; n];
    let mut last = f64::INFINITY;
    for _ in 0..max_iters {
        let mut delta = vec![0.0; s * n];
        for i in 0..s {
            for r in 0..n {
                let mut acc = z[i * n + r];
                for j in 0..s {
                    acc -= h * a[i][j] * f[j][r];
                }
                delta[i * n + r] = -acc;
            }
        }
        lu.solve_in_place(&mut delta);
        let size = delta.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for (zi, d) in z.iter_mut().zip(&delta) {
            *zi += d;
        }
        for (i, fi) in f.iter_mut().enumerate() {
            for r in 0..n {
                xs[r] = x[r] + z[i * n + r];
            }
            sys.rhs_into(&xs, fi);
            if !all_finite(fi) {
                return Err(Error::NonFinite("Gauss stage"));
            }
        }
        cost.rhs_evals += s as u64;
        last = size;
        if size <= tol * scale {
            let mut out = x.to_vec();
            for (bj, fj) in b.iter().zip(&f) {
                for (o, v) in out.iter_mut().zip(fj) {
                    *o += h * bj * v;
                }
            }
            return Ok(out);
        }
    }
    Err(Error::NoConvergence { what: "Gauss collocation", iterations: max_iters, residual: last })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> OdeSystem {
        OdeSystem::new("decay", 1, |x, out| out[0] = -x[0])
    }

    fn oscillator() -> OdeSystem {
        OdeSystem::new("sho", 2, |x, out| {
            out[0] = x[1];
            out[1] = -x[0];
        })
    }

    #[test]
    fn two_stage_is_pade_on_linear_decay() {
        for h in [0.05, 0.1, 0.4] {
            let out = gauss_collocation_step(2, &decay(), &[1.0], h, 1e-14, 50).unwrap();
            let pade = (1.0 - h / 2.0 + h * h / 12.0) / (1.0 + h / 2.0 + h * h / 12.0);
            assert!((out[0] - pade).abs() < 1e-12, "h={h}");
        }
    }

    #[test]
    fn three_stage_is_pade_on_linear_decay() {
        let h: f64 = 0.3;
        let out = gauss_collocation_step(3, &decay(), &[1.0], h, 1e-14, 50).unwrap();
        let num = 1.0 - h / 2.0 + h * h / 10.0 - h.powi(3) / 120.0;
        let den = 1.0 + h / 2.0 + h * h / 10.0 + h.powi(3) / 120.0;
        assert!((out[0] - num / den).abs() < 1e-12);
    }

    #[test]
    fn quadratic_invariant_preserved() {
        for s in [2, 3] {
            let out = gauss_collocation_step(s, &oscillator(), &[0.3, 0.9], 0.1, 1e-14, 50).unwrap();
            let r0 = 0.3f64 * 0.3 + 0.9 * 0.9;
            let r1 = out[0] * out[0] + out[1] * out[1];
            assert!((r1 - r0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let out = gauss_collocation_step(2, &oscillator(), &[0.3, 0.9], 0.0, 1e-13, 50).unwrap();
        assert_eq!(out, vec![0.3, 0.9]);
    }

    #[test]
    fn unsupported_stage_count() {
        assert!(gauss_collocation_step(4, &decay(), &[1.0], 0.1, 1e-13, 50).is_err());
    }
}
