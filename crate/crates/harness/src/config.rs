//! Experiment files. One TOML file describes one experiment; the subcommand
//! decides which of the `method`, `sweep` and `converge` sections is used.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Seeds every random draw (currently the perturbed initial conditions).
    #[serde(default)]
    pub seed: u64,
    /// End time. For Kepler, `periods` may be given instead.
    pub t_end: Option<f64>,
    pub periods: Option<f64>,
    /// Record every `stride`-th accepted step.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub reference: ReferenceChoice,
    pub problem: ProblemConfig,
    pub method: Option<MethodConfig>,
    #[serde(default)]
    pub sweep: Vec<SweepEntry>,
    pub converge: Option<ConvergeConfig>,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceChoice {
    /// The analytic orbit for Kepler, DOP853 at `rtol = atol = 1e-13` otherwise.
    #[default]
    Auto,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Kepler {
        #[serde(default = "default_eccentricity")]
        eccentricity: f64,
    },
    DoublePendulum {
        #[serde(default)]
        potential: PotentialName,
        /// Explicit start; defaults to `(0.1, −0.05, 1.5, −1.2)`.
        initial: Option<Vec<f64>>,
        /// Number of perturbed starts `(δ₁, δ₂, 1, −1)`, `δᵢ ~ U[−amplitude, amplitude]`.
        ensemble: Option<usize>,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    Oscillator {
        initial: Option<Vec<f64>>,
    },
    Kdv {
        #[serde(default = "kdv_points")]
        points: usize,
        #[serde(default = "kdv_length")]
        length: f64,
        #[serde(default = "default_speed")]
        speed: f64,
        #[serde(default = "kdv_center")]
        center: f64,
    },
    CamassaHolm {
        #[serde(default = "ch_points")]
        points: usize,
        #[serde(default = "ch_length")]
        length: f64,
        #[serde(default = "default_speed")]
        speed: f64,
        #[serde(default = "ch_center")]
        center: f64,
    },
}

fn default_eccentricity() -> f64 {
    0.6
}
fn default_amplitude() -> f64 {
    0.1
}
fn default_speed() -> f64 {
    2.0
}
fn kdv_points() -> usize {
    homproj::problems::kdv::DEFAULT_POINTS
}
fn kdv_length() -> f64 {
    homproj::problems::kdv::DEFAULT_LENGTH
}
fn kdv_center() -> f64 {
    homproj::problems::kdv::DEFAULT_CENTER
}
fn ch_points() -> usize {
    homproj::problems::camassa_holm::DEFAULT_POINTS
}
fn ch_length() -> f64 {
    homproj::problems::camassa_holm::DEFAULT_LENGTH
}
fn ch_center() -> f64 {
    homproj::problems::camassa_holm::DEFAULT_CENTER
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialName {
    #[default]
    Torsion,
    Gravity,
}

/// Base integrator, its step parameters and the post-step projection.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub label: Option<String>,
    /// `euler`, `midpoint`, `heun`, `kutta3`, `rk4`, `dopri5`, `dop853`,
    /// `gauss4`, `gauss6`, `verlet`, `suzuki4|6|8`, or `adaptive-<composition>`.
    pub integrator: String,
    pub h: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    /// Step-density parameter of the reversible adaptive compositions.
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub projection: ProjectionChoice,
}

/// Either a named preset of the problem (`"lh"`, `"pnh"`, …) or an explicit scheme.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ProjectionChoice {
    Preset(String),
    Scheme(ProjectionSpec),
}

impl Default for ProjectionChoice {
    fn default() -> Self {
        ProjectionChoice::Preset("none".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProjectionSpec {
    None,
    /// Closed-form projection of one invariant along a named action.
    Homogeneous {
        invariant: String,
        action: String,
        /// Hand ill-conditioned conjugate maps to the pseudo projection.
        #[serde(default)]
        fallback: bool,
    },
    /// One diagonal scaling per invariant, solved together.
    Simultaneous {
        invariants: Vec<String>,
        actions: Vec<String>,
    },
    Pseudo {
        invariants: Vec<String>,
        #[serde(default = "default_q")]
        q: usize,
        #[serde(default = "default_r")]
        r: usize,
    },
    Newton {
        invariants: Vec<String>,
        #[serde(default = "default_newton_tol")]
        tol: f64,
        #[serde(default = "default_newton_iters")]
        max_iters: usize,
    },
    Alternating {
        members: Vec<ProjectionSpec>,
    },
}

fn default_q() -> usize {
    2
}
fn default_r() -> usize {
    1
}
fn default_newton_tol() -> f64 {
    homproj::projection::DEFAULT_NEWTON_TOL
}
fn default_newton_iters() -> usize {
    homproj::projection::DEFAULT_NEWTON_MAX_ITERS
}

/// Which method parameter a sweep varies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    H,
    /// Sets `rtol = atol`.
    Tol,
    Epsilon,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::H => "h",
            SweepParameter::Tol => "tol",
            SweepParameter::Epsilon => "epsilon",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepEntry {
    #[serde(flatten)]
    pub method: MethodConfig,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    /// `(p, q, r)`: base order, inner order of the pseudo projection, iterations.
    /// `r = 0` measures the base method alone.
    pub combos: Vec<[usize; 3]>,
    #[serde(default = "default_h_min")]
    pub h_min: f64,
    #[serde(default = "default_h_max")]
    pub h_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Errors inside `[lo, hi]` enter the slope fit.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
}

fn default_h_min() -> f64 {
    1e-4
}
fn default_h_max() -> f64 {
    1.0
}
fn default_points() -> usize {
    201
}
fn default_window() -> [f64; 2] {
    [1e-13, 1e-2]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::ConfigParse { path: origin.to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::ConfigRead { path: path.display().to_string(), source })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// End of the integration interval.
    pub fn end_time(&self) -> Result<f64> {
        let t = match (self.t_end, self.periods, &self.problem) {
            (Some(t), None, _) => t,
            (None, Some(n), ProblemConfig::Kepler { .. }) => n * homproj::problems::kepler::PERIOD,
            (None, Some(_), _) => return Err(self.invalid("periods", "only Kepler has a fixed period")),
            (Some(_), Some(_), _) => return Err(self.invalid("t_end", "give either t_end or periods, not both")),
            (None, None, _) => return Err(self.invalid("t_end", "missing end time")),
        };
        if !(t > 0.0) || !t.is_finite() {
            return Err(self.invalid("t_end", &format!("must be positive, got {t}")));
        }
        Ok(t)
    }

    pub fn invalid(&self, key: &str, message: &str) -> HarnessError {
        HarnessError::Config { experiment: self.name.clone(), key: key.to_string(), message: message.to_string() }
    }
}
