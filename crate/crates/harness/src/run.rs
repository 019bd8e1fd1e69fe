//! Single experiments: integrate every starting state of a problem with one
//! method, compare against a reference, and write a RunRecord plus
//! trajectory CSVs.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use homproj::integrators::{solve, ButcherTableau, Method, SolveOptions};
use homproj::projection::{NoProjection, PostStep};
use homproj::{Cost, State, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ProjectionSpec, ReferenceChoice};
use crate::error::{HarnessError, Result};
use crate::registry::{build_method, build_problem, build_projection, method_label, resolve_projection, Problem};

pub const RUN_SCHEMA: &str = "homproj.run/1";

/// Tolerance of the integrated reference solution.
pub const REFERENCE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InvariantSummary {
    pub label: String,
    pub initial: f64,
    pub max_drift: f64,
    pub max_relative_drift: f64,
    pub final_drift: f64,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunResult {
    pub index: usize,
    pub status: RunStatus,
    pub message: Option<String>,
    pub initial_state: State,
    pub final_time: f64,
    pub final_state: State,
    /// Euclidean distance to the reference at the final time.
    pub final_error: Option<f64>,
    /// Mean absolute component error at the final time.
    pub final_mae: Option<f64>,
    /// Mean absolute component error over all recorded times after the start.
    pub mae: Option<f64>,
    /// Largest `|x_j|` over the recorded samples.
    pub max_abs_state: f64,
    pub invariants: Vec<InvariantSummary>,
    pub cost: Cost,
    pub samples: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// Population statistics; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stats {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub failures: usize,
    pub final_error: Option<Stats>,
    pub final_mae: Option<Stats>,
    pub mae: Option<Stats>,
    /// Per invariant, statistics of the max relative drift over the runs.
    pub max_relative_drift: Vec<Option<Stats>>,
    pub wall_time_s: Option<Stats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub schema: &'static str,
    pub config: ExperimentConfig,
    pub problem: String,
    pub system: String,
    pub method: String,
    pub runs: Vec<RunResult>,
    pub summary: Summary,
}

pub struct RunOutput {
    pub record: RunRecord,
    pub trajectories: Vec<Trajectory>,
}

/// Reference states at `times` (which start at the initial time): the exact
/// solution when the problem has one, otherwise DOP853 at `REFERENCE_TOL`.
pub fn reference_states(problem: &Problem, x0: &[f64], times: &[f64]) -> homproj::Result<Vec<State>> {
    if problem.has_exact_solution() {
        return times.iter().map(|&t| problem.exact_solution(t).expect("exact solution")).collect();
    }
    let mut out = vec![x0.to_vec()];
    if times.len() < 2 {
        return Ok(out);
    }
    let opts = SolveOptions { output_times: Some(times[1..].to_vec()), ..SolveOptions::default() };
    let method = Method::adaptive(ButcherTableau::dop853(), REFERENCE_TOL, REFERENCE_TOL);
    let traj = solve(&problem.system, x0, (times[0], *times.last().unwrap()), &method, &mut NoProjection, &opts)
        .map_err(|f| f.error)?;
    out.extend(traj.states.into_iter().skip(1));
    Ok(out)
}

fn mean_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len().max(1) as f64
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Integrates one starting state and gathers its metrics.
pub fn run_single(
    problem: &Problem,
    method: &Method,
    hook: &mut dyn PostStep,
    x0: &[f64],
    t_end: f64,
    stride: usize,
    reference: ReferenceChoice,
    index: usize,
) -> (RunResult, Trajectory) {
    let start = Instant::now();
    let outcome = solve(&problem.system, x0, (0.0, t_end), method, hook, &SolveOptions::stride(stride));
    let wall_time_s = start.elapsed().as_secs_f64();
    let (traj, mut message) = match outcome {
        Ok(t) => (t, None),
        Err(f) => (f.partial, Some(f.error.to_string())),
    };
    let status = if message.is_some() { RunStatus::Failed } else { RunStatus::Ok };

    let (mut final_error, mut final_mae, mut mae) = (None, None, None);
    if status == RunStatus::Ok && reference == ReferenceChoice::Auto {
        match reference_states(problem, x0, &traj.times) {
            Ok(refs) => {
                let last = traj.final_state();
                let rlast = refs.last().expect("reference has the start");
                final_error = Some(euclid(last, rlast));
                final_mae = Some(mean_abs(last, rlast));
                let n = traj.states.len().saturating_sub(1).max(1);
                mae = Some(traj.states.iter().zip(&refs).skip(1).map(|(x, r)| mean_abs(x, r)).sum::<f64>() / n as f64);
            }
            Err(e) => message = Some(format!("reference failed: {e}")),
        }
    }

    let invariants = problem
        .system
        .invariants()
        .iter()
        .enumerate()
        .map(|(i, inv)| InvariantSummary {
            label: inv.label().to_string(),
            initial: traj.initial_invariants()[i],
            max_drift: traj.max_drift(i),
            max_relative_drift: traj.max_relative_drift(i),
            final_drift: traj.final_drift(i),
        })
        .collect();
    // non-finite components make the whole maximum infinite
    let max_abs_state =
        traj.states.iter().flatten().fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
    let result = RunResult {
        index,
        status,
        message,
        initial_state: x0.to_vec(),
        final_time: traj.final_time(),
        final_state: traj.final_state().to_vec(),
        final_error,
        final_mae,
        mae,
        max_abs_state,
        invariants,
        cost: traj.cost,
        samples: traj.len(),
        wall_time_s,
    };
    (result, traj)
}

pub fn summarize(runs: &[RunResult], n_invariants: usize) -> Summary {
    let ok: Vec<&RunResult> = runs.iter().filter(|r| r.status == RunStatus::Ok).collect();
    let collect =
        |f: &dyn Fn(&RunResult) -> Option<f64>| Stats::of(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    Summary {
        runs: runs.len(),
        failures: runs.len() - ok.len(),
        final_error: collect(&|r| r.final_error),
        final_mae: collect(&|r| r.final_mae),
        mae: collect(&|r| r.mae),
        max_relative_drift: (0..n_invariants).map(|i| collect(&|r| Some(r.invariants[i].max_relative_drift))).collect(),
        wall_time_s: collect(&|r| Some(r.wall_time_s)),
    }
}

/// Runs the `[method]` section of `cfg` on every starting state of the problem.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mcfg = cfg.method.as_ref().ok_or_else(|| cfg.invalid("method", "a run needs a [method] section"))?;
    let t_end = cfg.end_time()?;
    let problem = build_problem(cfg)?;
    let method = build_method(cfg, mcfg)?;
    let spec = resolve_projection(&problem, &mcfg.projection)?;
    // build once up front so config errors surface before any work
    for x0 in &problem.initial_states {
        build_projection(&problem, &spec, x0)?;
    }
    let results: Vec<(RunResult, Trajectory)> = problem
        .initial_states
        .par_iter()
        .enumerate()
        .map(|(i, x0)| run_with_spec(&problem, &method, &spec, x0, t_end, cfg.stride, cfg.reference, i))
        .collect::<Result<_>>()?;
    let (runs, trajectories): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = summarize(&runs, problem.system.invariants().len());
    Ok(RunOutput {
        record: RunRecord {
            schema: RUN_SCHEMA,
            config: cfg.clone(),
            problem: problem.id.to_string(),
            system: problem.system.name().to_string(),
            method: method_label(mcfg),
            runs,
            summary,
        },
        trajectories,
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_with_spec(
    problem: &Problem,
    method: &Method,
    spec: &ProjectionSpec,
    x0: &[f64],
    t_end: f64,
    stride: usize,
    reference: ReferenceChoice,
    index: usize,
) -> Result<(RunResult, Trajectory)> {
    let mut hook = build_projection(problem, spec, x0)?;
    Ok(run_single(problem, method, hook.as_mut(), x0, t_end, stride, reference, index))
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Output { path: path.display().to_string(), message: e.to_string() }
}

/// Trajectory CSV: `t, x0 … x{d−1}, dH_<label> …`, one recorded sample per row.
pub fn write_trajectory_csv<W: Write>(out: W, labels: &[String], traj: &Trajectory) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = traj.states.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|j| format!("x{j}")));
    header.extend(labels.iter().map(|l| format!("dH_{l}")));
    w.write_record(&header)?;
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut row = vec![fmt_f64(*t)];
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        row.extend(traj.invariant_traces.iter().map(|tr| fmt_f64(tr[k])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<name>.json` and `<name>_traj<i>.csv` into `dir`; returns the paths.
pub fn write_run(dir: &Path, output: &RunOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let name = &output.record.config.name;
    let mut written = Vec::new();
    let json = dir.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(&output.record).map_err(|e| output_error(&json, e))?;
    std::fs::write(&json, text + "\n").map_err(|e| output_error(&json, e))?;
    written.push(json);
    let labels: Vec<String> =
        output.record.runs.first().map_or_else(Vec::new, |r| r.invariants.iter().map(|i| i.label.clone()).collect());
    for (i, traj) in output.trajectories.iter().enumerate() {
        let path = dir.join(format!("{name}_traj{i}.csv"));
        let file = File::create(&path).map_err(|e| output_error(&path, e))?;
        write_trajectory_csv(file, &labels, traj).map_err(|e| output_error(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_small_samples() {
        assert_eq!(Stats::of(&[]), None);
        let s = Stats::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
    }

    #[test]
    fn error_norms() {
        assert_eq!(euclid(&[3.0, 0.0], &[0.0, 4.0]), 5.0);
        assert_eq!(mean_abs(&[1.0, -1.0], &[0.0, 0.0]), 1.0);
    }
}
