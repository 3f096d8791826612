//! Run configuration: JSON schema types and their conversion to library
//! objects.

use std::collections::BTreeMap;
use std::path::PathBuf;

use bdlayer::diagnostics::{StudyFamily, StudyPoint};
use bdlayer::layers::Regularization;
use bdlayer::schemes::{DataProfile, GridParams, ProblemData};
use bdlayer::systems::make_model;
use bdlayer::{State, SystemModel};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub model: ModelSpec,
    #[serde(default)]
    pub scheme: Option<SchemeSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub data: Option<DataSpec>,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    Viscous { epsilon: f64 },
    LaxFriedrichs { lambda: f64, q: f64 },
    Godunov { lambda: f64 },
    Splitting { splitting: SplittingKind, lambda: f64, #[serde(default)] q: Option<f64> },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingKind {
    LaxFriedrichs,
    Upwind,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_max: f64,
    pub cells: usize,
    pub t_end: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_snapshots() -> usize {
    32
}

/// A state: a number for scalar laws, a list of components otherwise.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// Constant state or piecewise-constant table `values[i]` on
/// `[breaks[i-1], breaks[i])`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Constant(StateSpec),
    Piecewise { breaks: Vec<f64>, values: Vec<StateSpec> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub u_initial: ProfileSpec,
    pub u_boundary: ProfileSpec,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegularizationSpec {
    Viscous,
    LaxFriedrichs { lambda: f64, q: f64 },
    Godunov,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Viscous,
    LaxFriedrichs { lambda: f64, q: f64 },
    Godunov { lambda: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub param: f64,
    pub cells: usize,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// March the configured scheme; optionally extract a boundary trace.
    Simulate {
        id: String,
        #[serde(default)]
        window: Option<(f64, f64)>,
        #[serde(default)]
        probe_cells: Option<usize>,
    },
    /// Layer profile from `u_b` toward `v_inf` plus the manifold report.
    Layer {
        id: String,
        u_b: StateSpec,
        v_inf: StateSpec,
        regularization: RegularizationSpec,
    },
    /// Admissible sets: closed forms and membership grids for scalar laws,
    /// layer curves for elastodynamics, regions for Euler.
    Admissible {
        id: String,
        #[serde(default)]
        u_b: Option<StateSpec>,
        #[serde(default)]
        regularization: Option<RegularizationSpec>,
        #[serde(default)]
        grid: Option<CandidateGrid>,
        #[serde(default)]
        audit_samples: Option<usize>,
        #[serde(default)]
        curve_v: Option<Vec<f64>>,
        /// `(rho, u)` pairs for the Euler region classifier.
        #[serde(default)]
        states: Option<Vec<(f64, f64)>>,
    },
    Riemann {
        id: String,
        left: StateSpec,
        right: StateSpec,
    },
    Verify {
        id: String,
    },
    Study {
        id: String,
        family: FamilySpec,
        points: Vec<PointSpec>,
        window: (f64, f64),
        #[serde(default)]
        x_max_per_param: Option<f64>,
        #[serde(default)]
        reference_trace: Option<StateSpec>,
        #[serde(default = "default_span")]
        profile_span: f64,
        #[serde(default)]
        probe_cells: Option<usize>,
    },
}

fn default_span() -> f64 {
    5.0
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Simulate { .. } => "simulate",
            Task::Layer { .. } => "layer",
            Task::Admissible { .. } => "admissible",
            Task::Riemann { .. } => "riemann",
            Task::Verify { .. } => "verify",
            Task::Study { .. } => "study",
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Task::Simulate { id, .. }
            | Task::Layer { id, .. }
            | Task::Admissible { id, .. }
            | Task::Riemann { id, .. }
            | Task::Verify { id }
            | Task::Study { id, .. } => id,
        }
    }
}

/// A schema or consistency problem in a configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError(format!("schema error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.tasks.is_empty() {
            return Err(ConfigError("schema error: `tasks` must contain at least one task".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for t in &self.tasks {
            let id = t.id();
            if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(ConfigError(format!("task id `{id}` must be non-empty and use [A-Za-z0-9_-]")));
            }
            if !ids.insert(id) {
                return Err(ConfigError(format!("duplicate task id `{id}`")));
            }
            if matches!(t, Task::Simulate { .. } | Task::Study { .. })
                && (self.grid.is_none() || self.data.is_none())
            {
                return Err(ConfigError(format!("task `{id}` needs `grid` and `data` blocks")));
            }
            if matches!(t, Task::Simulate { .. }) && self.scheme.is_none() {
                return Err(ConfigError(format!("task `{id}` needs a `scheme` block")));
            }
        }
        if let Some(DataSpec { u_initial, u_boundary }) = &self.data {
            for p in [u_initial, u_boundary] {
                if let ProfileSpec::Piecewise { breaks, values } = p {
                    if values.len() != breaks.len() + 1 {
                        return Err(ConfigError("piecewise table needs one more value than breaks".into()));
                    }
                    if breaks.windows(2).any(|w| !(w[0] < w[1])) {
                        return Err(ConfigError("piecewise breaks must be strictly increasing".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> bdlayer::Result<SystemModel> {
        make_model(&self.model.name, &self.model.params)
    }

    pub fn grid_params(&self) -> Option<GridParams> {
        self.grid.map(|g| GridParams::new(g.x_max, g.cells, g.t_end).with_snapshots(g.snapshots))
    }

    pub fn problem_data(&self) -> bdlayer::Result<Option<ProblemData>> {
        let Some(d) = &self.data else { return Ok(None) };
        Ok(Some(ProblemData { u_initial: d.u_initial.profile()?, u_boundary: d.u_boundary.profile()? }))
    }
}

impl StateSpec {
    pub fn state(&self) -> bdlayer::Result<State> {
        match self {
            StateSpec::Scalar(x) => Ok(State::scalar(*x)),
            StateSpec::Vector(v) => State::from_slice(v),
        }
    }
}

impl ProfileSpec {
    pub fn profile(&self) -> bdlayer::Result<DataProfile> {
        match self {
            ProfileSpec::Constant(s) => Ok(DataProfile::constant(s.state()?)),
            ProfileSpec::Piecewise { breaks, values } => {
                let vals = values.iter().map(|v| v.state()).collect::<bdlayer::Result<Vec<_>>>()?;
                DataProfile::piecewise(breaks.clone(), vals)
            }
        }
    }
}

impl RegularizationSpec {
    pub fn regularization(self) -> Regularization {
        match self {
            RegularizationSpec::Viscous => Regularization::Viscous,
            RegularizationSpec::LaxFriedrichs { lambda, q } => Regularization::lf(lambda, q),
            RegularizationSpec::Godunov => Regularization::Godunov,
        }
    }
}

impl FamilySpec {
    pub fn family(self) -> StudyFamily {
        match self {
            FamilySpec::Viscous => StudyFamily::Viscous,
            FamilySpec::LaxFriedrichs { lambda, q } => StudyFamily::LaxFriedrichs { lambda, q },
            FamilySpec::Godunov { lambda } => StudyFamily::Godunov { lambda },
        }
    }
}

impl PointSpec {
    pub fn point(self) -> StudyPoint {
        StudyPoint { param: self.param, cells: self.cells }
    }
}
