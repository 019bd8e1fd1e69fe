//! Turns config ids into problems, integrators and projection hooks.

use std::sync::Arc;

use homproj::integrators::{
    ButcherTableau, Composition, Method, StepDensity, DEFAULT_GAUSS_MAX_ITERS, DEFAULT_GAUSS_TOL,
};
use homproj::problems::{camassa_holm, double_pendulum, kdv, kepler, oscillator, Potential};
use homproj::projection::{
    AlternatingProjection, DegreeSystem, HomogeneousProjection, NewtonProjection, NoProjection, PostStep,
    PseudoGeneratorSpec, PseudoProjection, SimultaneousProjection,
};
use homproj::{OdeSystem, State, SymmetryAction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, MethodConfig, PotentialName, ProblemConfig, ProjectionChoice, ProjectionSpec};
use crate::error::{HarnessError, Result};

type ExactFn = Arc<dyn Fn(f64) -> homproj::Result<State> + Send + Sync>;

/// A built problem: the system, its starting states and the named symmetry
/// actions its projections can use.
pub struct Problem {
    pub id: &'static str,
    pub system: OdeSystem,
    pub initial_states: Vec<State>,
    exact: Option<ExactFn>,
    actions: Vec<(&'static str, SymmetryAction)>,
    presets: Vec<(&'static str, ProjectionSpec)>,
}

impl Problem {
    pub fn exact_solution(&self, t: f64) -> Option<homproj::Result<State>> {
        self.exact.as_ref().map(|f| f(t))
    }

    pub fn has_exact_solution(&self) -> bool {
        self.exact.is_some()
    }

    pub fn action(&self, name: &str) -> Result<&SymmetryAction> {
        self.actions.iter().find(|(n, _)| *n == name).map(|(_, a)| a).ok_or_else(|| {
            let known: Vec<&str> = self.actions.iter().map(|(n, _)| *n).collect();
            self.unknown("action", name, &known)
        })
    }

    pub fn invariant_index(&self, label: &str) -> Result<usize> {
        self.system.invariants().iter().position(|inv| inv.label() == label).ok_or_else(|| {
            let known: Vec<&str> = self.system.invariants().iter().map(|i| i.label()).collect();
            self.unknown("invariant", label, &known)
        })
    }

    pub fn preset(&self, name: &str) -> Result<ProjectionSpec> {
        if name == "none" {
            return Ok(ProjectionSpec::None);
        }
        self.presets.iter().find(|(n, _)| *n == name).map(|(_, s)| s.clone()).ok_or_else(|| {
            let known: Vec<&str> = self.presets.iter().map(|(n, _)| *n).collect();
            self.unknown("projection preset", name, &known)
        })
    }

    pub fn action_names(&self) -> Vec<&'static str> {
        self.actions.iter().map(|(n, _)| *n).collect()
    }

    pub fn preset_names(&self) -> Vec<&'static str> {
        self.presets.iter().map(|(n, _)| *n).collect()
    }

    fn unknown(&self, what: &str, name: &str, known: &[&str]) -> HarnessError {
        HarnessError::Config {
            experiment: self.id.to_string(),
            key: what.to_string(),
            message: format!("unknown {what} `{name}` (known: {})", known.join(", ")),
        }
    }
}

fn homogeneous(invariant: &str, action: &str) -> ProjectionSpec {
    ProjectionSpec::Homogeneous { invariant: invariant.into(), action: action.into(), fallback: false }
}

fn pseudo(invariants: &[&str]) -> ProjectionSpec {
    ProjectionSpec::Pseudo { invariants: invariants.iter().map(|s| s.to_string()).collect(), q: 2, r: 1 }
}

fn newton(invariants: &[&str]) -> ProjectionSpec {
    ProjectionSpec::Newton {
        invariants: invariants.iter().map(|s| s.to_string()).collect(),
        tol: homproj::projection::DEFAULT_NEWTON_TOL,
        max_iters: homproj::projection::DEFAULT_NEWTON_MAX_ITERS,
    }
}

fn alternating(members: Vec<ProjectionSpec>) -> ProjectionSpec {
    ProjectionSpec::Alternating { members }
}

/// Problem ids with a one-line description, for `list-problems`.
pub const PROBLEMS: &[(&str, &str)] = &[
    ("kepler", "planar two-body problem; key: eccentricity"),
    ("double-pendulum", "double pendulum; keys: potential (torsion|gravity), initial, ensemble, amplitude"),
    ("oscillator", "four-dimensional nonlinear oscillator; key: initial"),
    ("kdv", "periodic KdV, 8th-order differences; keys: points, length, speed, center"),
    ("camassa-holm", "periodic Camassa-Holm, 4th-order differences; keys: points, length, speed, center"),
];

/// Integrator ids with a one-line description, for `list-methods`.
pub const INTEGRATORS: &[(&str, &str)] = &[
    ("euler, midpoint, heun, kutta3, rk4", "explicit Runge-Kutta, fixed step h"),
    ("dopri5 (rk45), dop853", "embedded pairs: adaptive with rtol/atol, or fixed with h"),
    ("gauss4, gauss6", "Gauss collocation, fixed step h"),
    ("verlet, suzuki4, suzuki6, suzuki8", "Stormer-Verlet compositions (separable problems), fixed step h"),
    ("adaptive-verlet, adaptive-suzuki8, ...", "reversible step-density adaptivity, parameter epsilon"),
];

/// Projection schemes, for `list-methods`.
pub const SCHEMES: &[(&str, &str)] = &[
    ("none", "no projection"),
    (
        "homogeneous",
        "closed-form projection of one invariant along a named action; fallback = true adds a pseudo fallback",
    ),
    ("simultaneous", "one diagonal action per invariant, parameters from the degree matrix"),
    ("pseudo", "generator-based projection of several invariants; inner order q, iterations r"),
    ("newton", "orthogonal projection by simplified Newton"),
    ("alternating", "cycles through members, one per accepted step"),
];

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    match &cfg.problem {
        ProblemConfig::Kepler { eccentricity } => {
            let e = *eccentricity;
            let x0 = kepler::initial_state(e).map_err(|err| cfg.invalid("problem.eccentricity", &err.to_string()))?;
            Ok(Problem {
                id: "kepler",
                system: kepler::kepler(),
                initial_states: vec![x0],
                exact: Some(Arc::new(move |t| kepler::exact_solution(e, t))),
                actions: vec![("energy", kepler::energy_action()), ("angular", kepler::angular_action())],
                presets: vec![
                    ("lh", homogeneous("H", "energy")),
                    (
                        "alh",
                        alternating(vec![homogeneous("L", "angular"), homogeneous("H", "energy"), pseudo(&["A1"])]),
                    ),
                    ("pnh", pseudo(&["H", "L", "A1"])),
                    ("newton", newton(&["H", "L", "A1"])),
                ],
            })
        }
        ProblemConfig::DoublePendulum { potential, initial, ensemble, amplitude } => {
            let pot = match potential {
                PotentialName::Torsion => Potential::Torsion,
                PotentialName::Gravity => Potential::Gravity,
            };
            let initial_states = match (initial, ensemble) {
                (Some(_), Some(_)) => {
                    return Err(cfg.invalid("problem.initial", "give either initial or ensemble, not both"))
                }
                (Some(x), None) => vec![check_dim(cfg, x, 4)?],
                (None, Some(n)) => pendulum_ensemble(cfg.seed, *n, *amplitude),
                (None, None) => vec![double_pendulum::DEFAULT_INITIAL.to_vec()],
            };
            Ok(Problem {
                id: "double-pendulum",
                system: double_pendulum::double_pendulum(pot),
                initial_states,
                exact: None,
                actions: vec![("energy", double_pendulum::energy_action(pot))],
                presets: vec![
                    (
                        "ch",
                        ProjectionSpec::Homogeneous { invariant: "H".into(), action: "energy".into(), fallback: true },
                    ),
                    ("pnh", pseudo(&["H"])),
                    ("newton", newton(&["H"])),
                ],
            })
        }
        ProblemConfig::Oscillator { initial } => {
            let x0 = match initial {
                Some(x) => check_dim(cfg, x, 4)?,
                None => oscillator::DEFAULT_INITIAL.to_vec(),
            };
            Ok(Problem {
                id: "oscillator",
                system: oscillator::oscillator(),
                initial_states: vec![x0],
                exact: None,
                actions: Vec::new(),
                presets: vec![("pnh", pseudo(&["H"])), ("newton", newton(&["H"]))],
            })
        }
        ProblemConfig::Kdv { points, length, speed, center } => {
            let system = kdv::kdv(*points, *length).map_err(|e| cfg.invalid("problem.points", &e.to_string()))?;
            Ok(Problem {
                id: "kdv",
                system,
                initial_states: vec![kdv::soliton(*points, *length, *speed, *center)?],
                exact: None,
                actions: vec![("scaling", kdv::scaling_action())],
                presets: vec![
                    (
                        "alt-h1h2h3",
                        alternating(vec![homogeneous("H1", "scaling"), homogeneous("H2", "scaling"), pseudo(&["H3"])]),
                    ),
                    ("alt-h1h3", alternating(vec![homogeneous("H1", "scaling"), pseudo(&["H3"])])),
                    ("pnh", pseudo(&["H1", "H2", "H3"])),
                ],
            })
        }
        ProblemConfig::CamassaHolm { points, length, speed, center } => {
            let system = camassa_holm::camassa_holm(*points, *length)
                .map_err(|e| cfg.invalid("problem.points", &e.to_string()))?;
            Ok(Problem {
                id: "camassa-holm",
                system,
                initial_states: vec![camassa_holm::peakon(*points, *length, *speed, *center)?],
                exact: None,
                actions: vec![("scaling", camassa_holm::scaling_action())],
                presets: vec![
                    ("alt-h1h2", alternating(vec![homogeneous("H1", "scaling"), homogeneous("H2", "scaling")])),
                    ("h2", homogeneous("H2", "scaling")),
                    ("pnh", pseudo(&["H1", "H2"])),
                ],
            })
        }
    }
}

fn check_dim(cfg: &ExperimentConfig, x: &[f64], dim: usize) -> Result<State> {
    if x.len() != dim {
        return Err(cfg.invalid("problem.initial", &format!("expected {dim} components, got {}", x.len())));
    }
    Ok(x.to_vec())
}

/// Starts `(δ₁, δ₂, 1, −1)` with `δᵢ` uniform in `[−amplitude, amplitude]`.
pub fn pendulum_ensemble(seed: u64, count: usize, amplitude: f64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let d1 = rng.gen_range(-amplitude..=amplitude);
            let d2 = rng.gen_range(-amplitude..=amplitude);
            vec![d1, d2, 1.0, -1.0]
        })
        .collect()
}

fn need(cfg: &ExperimentConfig, value: Option<f64>, key: &str, integrator: &str) -> Result<f64> {
    match value {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(cfg.invalid(key, &format!("must be positive, got {v}"))),
        None => Err(cfg.invalid(key, &format!("integrator `{integrator}` needs `{key}`"))),
    }
}

pub fn build_method(cfg: &ExperimentConfig, m: &MethodConfig) -> Result<Method> {
    let name = m.integrator.as_str();
    let bad = |e: homproj::Error| cfg.invalid("method.integrator", &e.to_string());
    if let Some(comp) = name.strip_prefix("adaptive-") {
        let composition = Composition::by_name(comp).map_err(bad)?;
        let epsilon = need(cfg, m.epsilon, "epsilon", name)?;
        return Ok(Method::Reversible { composition, epsilon, density: StepDensity::default(), rho0: None });
    }
    match name {
        "gauss4" | "gauss6" => {
            let stages = if name == "gauss4" { 2 } else { 3 };
            let h = need(cfg, m.h, "h", name)?;
            Ok(Method::Gauss { stages, h, tol: DEFAULT_GAUSS_TOL, max_iters: DEFAULT_GAUSS_MAX_ITERS })
        }
        "verlet" | "suzuki4" | "suzuki6" | "suzuki8" => {
            let h = need(cfg, m.h, "h", name)?;
            Ok(Method::Splitting { composition: Composition::by_name(name).map_err(bad)?, h })
        }
        _ => {
            let tableau = ButcherTableau::by_name(name).map_err(bad)?;
            match (m.rtol, m.h) {
                (Some(_), Some(_)) => Err(cfg.invalid("method.h", "give either h or rtol, not both")),
                (Some(_), None) => {
                    if !tableau.is_embedded() {
                        return Err(cfg.invalid("method.rtol", &format!("`{name}` has no error estimate")));
                    }
                    let rtol = need(cfg, m.rtol, "rtol", name)?;
                    let atol = need(cfg, m.atol.or(Some(rtol)), "atol", name)?;
                    Ok(Method::adaptive(tableau, rtol, atol))
                }
                (None, _) => Ok(Method::fixed(tableau, need(cfg, m.h, "h", name)?)),
            }
        }
    }
}

/// Display name of a method config: its label, or integrator and projection.
pub fn method_label(m: &MethodConfig) -> String {
    if let Some(label) = &m.label {
        return label.clone();
    }
    match &m.projection {
        ProjectionChoice::Preset(p) if p == "none" => m.integrator.clone(),
        ProjectionChoice::Preset(p) => format!("{}+{p}", m.integrator),
        ProjectionChoice::Scheme(s) => format!("{}+{}", m.integrator, scheme_name(s)),
    }
}

fn scheme_name(s: &ProjectionSpec) -> &'static str {
    match s {
        ProjectionSpec::None => "none",
        ProjectionSpec::Homogeneous { .. } => "homogeneous",
        ProjectionSpec::Simultaneous { .. } => "simultaneous",
        ProjectionSpec::Pseudo { .. } => "pseudo",
        ProjectionSpec::Newton { .. } => "newton",
        ProjectionSpec::Alternating { .. } => "alternating",
    }
}

pub fn resolve_projection(problem: &Problem, choice: &ProjectionChoice) -> Result<ProjectionSpec> {
    match choice {
        ProjectionChoice::Preset(name) => problem.preset(name),
        ProjectionChoice::Scheme(spec) => Ok(spec.clone()),
    }
}

/// Builds the post-step hook for `spec`, with targets taken at `x0`.
pub fn build_projection(problem: &Problem, spec: &ProjectionSpec, x0: &[f64]) -> Result<Box<dyn PostStep>> {
    let sys = &problem.system;
    let targets = sys.invariant_values(x0);
    let pick = |labels: &[String]| -> Result<(Vec<homproj::Invariant>, Vec<f64>)> {
        if labels.is_empty() {
            return Err(problem.unknown("invariant", "", &[]));
        }
        let idx = labels.iter().map(|l| problem.invariant_index(l)).collect::<Result<Vec<_>>>()?;
        Ok((idx.iter().map(|&i| sys.invariants()[i].clone()).collect(), idx.iter().map(|&i| targets[i]).collect()))
    };
    Ok(match spec {
        ProjectionSpec::None => Box::new(NoProjection),
        ProjectionSpec::Homogeneous { invariant, action, fallback } => {
            let i = problem.invariant_index(invariant)?;
            let inv = sys.invariants()[i].clone();
            let mut hook = HomogeneousProjection::new(inv.clone(), i, problem.action(action)?.clone(), targets[i])?;
            if *fallback {
                hook = hook.with_fallback(PseudoProjection::new(
                    PseudoGeneratorSpec::default(),
                    vec![inv],
                    vec![targets[i]],
                )?);
            }
            Box::new(hook)
        }
        ProjectionSpec::Simultaneous { invariants, actions } => {
            let idx = invariants.iter().map(|l| problem.invariant_index(l)).collect::<Result<Vec<_>>>()?;
            let acts = actions.iter().map(|a| problem.action(a).cloned()).collect::<Result<Vec<_>>>()?;
            let ds = DegreeSystem::new(&acts, &idx, sys.dim())?;
            Box::new(SimultaneousProjection::new(ds, sys.invariants().to_vec(), targets))
        }
        ProjectionSpec::Pseudo { invariants, q, r } => {
            let (invs, t) = pick(invariants)?;
            Box::new(PseudoProjection::new(PseudoGeneratorSpec::new(*q, *r), invs, t)?)
        }
        ProjectionSpec::Newton { invariants, tol, max_iters } => {
            let (invs, t) = pick(invariants)?;
            Box::new(NewtonProjection::new(invs, t).with_tolerance(*tol, *max_iters))
        }
        ProjectionSpec::Alternating { members } => {
            let hooks = members.iter().map(|m| build_projection(problem, m, x0)).collect::<Result<Vec<_>>>()?;
            Box::new(AlternatingProjection::new(hooks)?)
        }
    })
}
