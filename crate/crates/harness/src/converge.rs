//! One-step energy-error convergence of pseudo projections: a step of an
//! order-`p` explicit method followed by `r` pseudo-projection iterations with
//! an order-`q` inner method, error `|H(x̂) − H(x₀)|` against `h`.

use std::io::Write;

use homproj::integrators::{rk_fixed_step, ButcherTableau};
use homproj::projection::{pseudo_project, PseudoGeneratorSpec};
use homproj::OdeSystem;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConvergeConfig, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::registry::build_problem;
use crate::run::fmt_f64;

/// Predicted slope: `p + 1` for the base method alone, `(p+1)(q+1)^r` after projection.
pub fn expected_slope(p: usize, q: usize, r: usize) -> f64 {
    if r == 0 {
        (p + 1) as f64
    } else {
        ((p + 1) * (q + 1).pow(r as u32)) as f64
    }
}

/// Energy error after one projected step of size `h` from `x0`, for the first invariant.
pub fn one_step_energy_error(
    sys: &OdeSystem,
    x0: &[f64],
    p: usize,
    q: usize,
    r: usize,
    h: f64,
) -> homproj::Result<f64> {
    let inv = &sys.invariants()[0];
    let target = inv.value(x0);
    let mut x = rk_fixed_step(&ButcherTableau::explicit_of_order(p)?, sys, x0, h)?;
    if r > 0 {
        x = pseudo_project(&PseudoGeneratorSpec::new(q, r), &sys.invariants()[..1], &[target], &x)?.state;
    }
    Ok((inv.value(&x) - target).abs())
}

/// `points` values of `h`, log-spaced from `h_min` to `h_max`.
pub fn log_grid(h_min: f64, h_max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![h_min];
    }
    let (a, b) = (h_min.ln(), h_max.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub points: usize,
    pub h_lo: f64,
    pub h_hi: f64,
}

/// Least-squares slope of `ln err` against `ln h` over the contiguous window:
/// scanning `h` upwards, it opens at the first error `≥ lo` and closes before
/// the first error `> hi` (or the first non-finite one). Samples inside the
/// window that dip below `lo` are left out of the fit.
pub fn fit_window(samples: &[(f64, f64)], window: [f64; 2]) -> Result<SlopeFit> {
    let [lo, hi] = window;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let start = sorted.iter().position(|&(_, e)| e.is_finite() && e >= lo);
    let used: Vec<(f64, f64)> = match start {
        None => Vec::new(),
        Some(s) => sorted[s..]
            .iter()
            .take_while(|&&(_, e)| e.is_finite() && e <= hi)
            .filter(|&&(_, e)| e >= lo)
            .copied()
            .collect(),
    };
    if used.len() < 3 {
        return Err(HarnessError::InsufficientWindow { points: used.len() });
    }
    let n = used.len() as f64;
    let lx: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(SlopeFit { slope: sxy / sxx, points: used.len(), h_lo: used[0].0, h_hi: used[used.len() - 1].0 })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConvergenceSample {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub h: f64,
    /// `NaN` when the step or projection failed.
    pub error: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SlopeRow {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub expected: f64,
    pub fit: Option<SlopeFit>,
    /// `ok` or the reason no slope could be fitted.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub samples: Vec<ConvergenceSample>,
    pub slopes: Vec<SlopeRow>,
}

/// Runs every `(p, q, r)` of `study` over its `h` grid from the problem's first starting state.
pub fn convergence_study(sys: &OdeSystem, x0: &[f64], study: &ConvergeConfig) -> ConvergenceStudy {
    let hs = log_grid(study.h_min, study.h_max, study.points);
    let per_combo: Vec<(Vec<ConvergenceSample>, SlopeRow)> = study
        .combos
        .par_iter()
        .map(|&[p, q, r]| {
            let samples: Vec<ConvergenceSample> = hs
                .iter()
                .map(|&h| ConvergenceSample {
                    p,
                    q,
                    r,
                    h,
                    error: one_step_energy_error(sys, x0, p, q, r, h).unwrap_or(f64::NAN),
                })
                .collect();
            let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.h, s.error)).collect();
            let (fit, status) = match fit_window(&pts, study.window) {
                Ok(f) => (Some(f), "ok".to_string()),
                Err(e) => (None, e.to_string()),
            };
            (samples, SlopeRow { p, q, r, expected: expected_slope(p, q, r), fit, status })
        })
        .collect();
    let mut out = ConvergenceStudy { samples: Vec::new(), slopes: Vec::new() };
    for (s, row) in per_combo {
        out.samples.extend(s);
        out.slopes.push(row);
    }
    out
}

/// The `[converge]` section of `cfg` on its problem.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceStudy> {
    let study = cfg.converge.as_ref().ok_or_else(|| cfg.invalid("converge", "needs a [converge] section"))?;
    if !(study.h_min > 0.0 && study.h_max > study.h_min) || study.points < 3 {
        return Err(cfg.invalid("converge", "need 0 < h_min < h_max and at least 3 points"));
    }
    if study.h_max / study.h_min < 10.0 {
        return Err(cfg.invalid("converge.h_max", "the h grid must span at least one decade"));
    }
    for &[p, q, r] in &study.combos {
        if !(1..=4).contains(&p) || (r > 0 && !(1..=4).contains(&q)) {
            return Err(cfg.invalid("converge.combos", &format!("orders must lie in 1..=4, got ({p}, {q}, {r})")));
        }
    }
    let problem = build_problem(cfg)?;
    if problem.system.invariants().is_empty() {
        return Err(cfg.invalid("problem", "the convergence study needs an invariant"));
    }
    Ok(convergence_study(&problem.system, &problem.initial_states[0], study))
}

pub fn write_samples_csv<W: Write>(out: W, study: &ConvergenceStudy) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "q", "r", "h", "error"])?;
    for s in &study.samples {
        w.write_record([s.p.to_string(), s.q.to_string(), s.r.to_string(), fmt_f64(s.h), fmt_f64(s.error)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slopes_csv<W: Write>(out: W, study: &ConvergenceStudy) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "q", "r", "expected", "slope", "points", "h_lo", "h_hi", "status"])?;
    for s in &study.slopes {
        let (slope, points, lo, hi) = match s.fit {
            Some(f) => (fmt_f64(f.slope), f.points.to_string(), fmt_f64(f.h_lo), fmt_f64(f.h_hi)),
            None => Default::default(),
        };
        w.write_record([
            s.p.to_string(),
            s.q.to_string(),
            s.r.to_string(),
            fmt_f64(s.expected),
            slope,
            points,
            lo,
            hi,
            s.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
