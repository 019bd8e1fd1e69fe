//! Cost/error sweeps: every method of the `[[sweep]]` list at every value of
//! its parameter, one CSV row each, in config order.

use std::io::Write;

use homproj::Cost;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, MethodConfig, SweepParameter};
use crate::error::Result;
use crate::registry::{build_method, build_problem, method_label, resolve_projection};
use crate::run::{fmt_f64, run_with_spec, RunStatus};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub parameter: &'static str,
    pub value: f64,
    pub status: RunStatus,
    pub message: Option<String>,
    pub final_time: f64,
    pub final_error: Option<f64>,
    pub final_mae: Option<f64>,
    pub mae: Option<f64>,
    /// Per invariant, in system order.
    pub max_relative_drift: Vec<f64>,
    pub cost: Cost,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub invariant_labels: Vec<String>,
    pub rows: Vec<SweepRow>,
}

fn with_value(m: &MethodConfig, parameter: SweepParameter, v: f64) -> MethodConfig {
    let mut m = m.clone();
    match parameter {
        SweepParameter::H => m.h = Some(v),
        SweepParameter::Tol => {
            m.rtol = Some(v);
            m.atol = Some(v);
        }
        SweepParameter::Epsilon => m.epsilon = Some(v),
    }
    m
}

/// Runs the sweep on the problem's first starting state. Failed runs produce
/// rows with `status = failed` and no error columns; they do not stop the sweep.
pub fn cost_error_sweep(cfg: &ExperimentConfig) -> Result<SweepTable> {
    let t_end = cfg.end_time()?;
    let problem = build_problem(cfg)?;
    let x0 = problem.initial_states[0].clone();

    let mut jobs = Vec::new();
    for (k, entry) in cfg.sweep.iter().enumerate() {
        if entry.values.len() < 2 {
            return Err(cfg.invalid(&format!("sweep[{k}].values"), "a sweep needs at least two values"));
        }
        let spec = resolve_projection(&problem, &entry.method.projection)?;
        for &v in &entry.values {
            let m = with_value(&entry.method, entry.parameter, v);
            let method = build_method(cfg, &m)?;
            jobs.push((method_label(&entry.method), entry.parameter, v, method, spec.clone()));
        }
    }

    let rows = jobs
        .par_iter()
        .map(|(label, parameter, value, method, spec)| {
            let (r, _) = run_with_spec(&problem, method, spec, &x0, t_end, cfg.stride, cfg.reference, 0)?;
            Ok(SweepRow {
                method: label.clone(),
                parameter: parameter.name(),
                value: *value,
                status: r.status,
                message: r.message,
                final_time: r.final_time,
                final_error: r.final_error,
                final_mae: r.final_mae,
                mae: r.mae,
                max_relative_drift: r.invariants.iter().map(|i| i.max_relative_drift).collect(),
                cost: r.cost,
                wall_time_s: r.wall_time_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        invariant_labels: problem.system.invariants().iter().map(|i| i.label().to_string()).collect(),
        rows,
    })
}

/// Header of the sweep CSV for the given invariant labels.
pub fn sweep_header(labels: &[String]) -> Vec<String> {
    let mut h: Vec<String> =
        ["method", "parameter", "value", "status", "final_time", "final_error", "final_mae", "mae"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    h.extend(labels.iter().map(|l| format!("max_rel_drift_{l}")));
    h.extend(
        [
            "rhs_evals",
            "gradient_evals",
            "projection_evals",
            "accepted_steps",
            "rejected_steps",
            "projections_skipped",
            "wall_time_s",
            "message",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

pub fn write_sweep_csv<W: Write>(out: W, table: &SweepTable) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sweep_header(&table.invariant_labels))?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in &table.rows {
        let mut row = vec![
            r.method.clone(),
            r.parameter.to_string(),
            fmt_f64(r.value),
            match r.status {
                RunStatus::Ok => "ok".to_string(),
                RunStatus::Failed => "failed".to_string(),
            },
            fmt_f64(r.final_time),
            opt(r.final_error),
            opt(r.final_mae),
            opt(r.mae),
        ];
        row.extend(r.max_relative_drift.iter().map(|d| fmt_f64(*d)));
        row.extend([
            r.cost.rhs_evals.to_string(),
            r.cost.gradient_evals.to_string(),
            r.cost.projection_evals.to_string(),
            r.cost.accepted_steps.to_string(),
            r.cost.rejected_steps.to_string(),
            r.cost.projections_skipped.to_string(),
            fmt_f64(r.wall_time_s),
            r.message.clone().unwrap_or_default(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
