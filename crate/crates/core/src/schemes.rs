//! Time-marching solvers for the quarter-plane problem
//! `u_t + f(u)_x = 0` on `x > 0`, `u(x, 0) = u_I(x)`, boundary datum `u_B(t)`.
//!
//! Conservative schemes (Lax-Friedrichs, flux splitting, Godunov) use cells
//! `[jh, (j+1)h)`, `j = 0..=J`. Cell 0 is the boundary cell: it holds `u_B(t)`
//! at every time level, so the approximate solution equals `u_B(t)` for
//! `x < h`. Interior cells are updated by
//!
//! ```text
//! u_j^{n+1} = u_j^n - lambda (g(u_j, u_{j+1}) - g(u_{j-1}, u_j)),   lambda = tau / h
//! ```
//!
//! and the right end is a zero-order extrapolation. Initial data are sampled
//! right-continuously, `u_j^0 = u_I(jh)`.
//!
//! The viscous solver uses nodes `x_j = jh` with `u_0 = u_B(t)` imposed
//! strongly, local Lax-Friedrichs convection and central diffusion, stepped
//! explicitly.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::State;
use crate::riemann;
use crate::systems::{EntropyPair, SystemModel};
use crate::tolerances::{DISCRETE_ENTROPY, SPLITTING_CONSISTENCY};

pub type ProfileFn = Arc<dyn Fn(f64) -> State + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(f64, f64) -> State + Send + Sync>;

/// A function of one variable (`x` for `u_I`, `t` for `u_B`).
#[derive(Clone)]
pub enum DataProfile {
    Constant(State),
    /// `values[k]` holds on `[breaks[k-1], breaks[k])`; `values.len() == breaks.len() + 1`.
    Piecewise { breaks: Vec<f64>, values: Vec<State> },
    Custom { label: String, f: ProfileFn },
}

impl fmt::Debug for DataProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

impl DataProfile {
    pub fn constant(u: State) -> Self {
        DataProfile::Constant(u)
    }

    pub fn scalar(u: f64) -> Self {
        DataProfile::Constant(State::scalar(u))
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<State>) -> Result<Self> {
        let p = DataProfile::Piecewise { breaks, values };
        p.validate(None)?;
        Ok(p)
    }

    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> State + Send + Sync + 'static) -> Self {
        DataProfile::Custom { label: label.into(), f: Arc::new(f) }
    }

    /// Value at `s` (right-continuous at breakpoints).
    pub fn eval(&self, s: f64) -> State {
        match self {
            DataProfile::Constant(u) => *u,
            DataProfile::Piecewise { breaks, values } => {
                let k = breaks.partition_point(|b| *b <= s);
                values[k]
            }
            DataProfile::Custom { f, .. } => f(s),
        }
    }

    /// Checks the table layout and, when `dim` is given, component counts.
    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        if let DataProfile::Piecewise { breaks, values } = self {
            if values.len() != breaks.len() + 1 {
                return Err(Error::Config(format!(
                    "piecewise table needs {} values for {} breakpoints, got {}",
                    breaks.len() + 1,
                    breaks.len(),
                    values.len()
                )));
            }
            if breaks.windows(2).any(|w| !(w[0] < w[1])) || breaks.iter().any(|b| !b.is_finite()) {
                return Err(Error::Config("piecewise breakpoints must be finite and strictly increasing".into()));
            }
        }
        if let Some(d) = dim {
            for s in self.sample_states(0.0, 1.0, 3) {
                if s.dim() != d {
                    return Err(Error::Config(format!("data state {s:?} has {} components, expected {d}", s.dim())));
                }
            }
        }
        Ok(())
    }

    /// States the profile takes on `[a, b]` (all table values; samples for custom data).
    pub fn sample_states(&self, a: f64, b: f64, n: usize) -> Vec<State> {
        match self {
            DataProfile::Constant(u) => vec![*u],
            DataProfile::Piecewise { values, .. } => values.clone(),
            DataProfile::Custom { f, .. } => {
                let n = n.max(2);
                (0..n).map(|i| f(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DataProfile::Constant(u) => format!("constant {:?}", u),
            DataProfile::Piecewise { breaks, values } => {
                format!("piecewise breaks={breaks:?} values={values:?}")
            }
            DataProfile::Custom { label, .. } => format!("custom `{label}`"),
        }
    }
}

/// Initial and boundary data.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub u_initial: DataProfile,
    pub u_boundary: DataProfile,
}

impl ProblemData {
    pub fn constant(u_i: State, u_b: State) -> Self {
        ProblemData { u_initial: DataProfile::Constant(u_i), u_boundary: DataProfile::Constant(u_b) }
    }

    pub fn scalar(u_i: f64, u_b: f64) -> Self {
        Self::constant(State::scalar(u_i), State::scalar(u_b))
    }
}

/// Requested mesh and output cadence.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridParams {
    pub x_max: f64,
    pub cells: usize,
    pub t_end: f64,
    /// Number of uniformly spaced snapshot intervals (snapshots at `t = 0` and `t_end` included).
    pub snapshots: usize,
}

impl GridParams {
    pub fn new(x_max: f64, cells: usize, t_end: f64) -> Self {
        GridParams { x_max, cells, t_end, snapshots: 32 }
    }

    pub fn with_snapshots(mut self, n: usize) -> Self {
        self.snapshots = n;
        self
    }

    pub fn h(&self) -> f64 {
        self.x_max / self.cells as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            return Err(Error::Config(format!("x_max must be positive, got {}", self.x_max)));
        }
        if self.cells < 2 {
            return Err(Error::Config("at least 2 cells are required".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.snapshots == 0 {
            return Err(Error::Config("snapshots must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mesh actually used by a run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Mesh {
    pub x_max: f64,
    pub cells: usize,
    pub h: f64,
    pub tau: f64,
    /// `tau / h`.
    pub lambda: f64,
    pub steps: usize,
    pub t_final: f64,
    /// The CFL number that was validated (`<= 1`).
    pub cfl_number: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SchemeTag {
    Viscous { epsilon: f64 },
    LaxFriedrichs { lambda: f64, q: f64 },
    FluxSplitting { name: String, lambda: f64 },
    Godunov { lambda: f64 },
}

impl SchemeTag {
    pub fn is_conservative(&self) -> bool {
        !matches!(self, SchemeTag::Viscous { .. })
    }
}

/// A flux splitting `f = f^- + f^+` with entropy fluxes `F = F^- + F^+`.
/// The numerical flux is `g(v, w) = f^+(v) + f^-(w)`.
pub trait FluxSplitting: Send + Sync {
    fn name(&self) -> String;
    /// `(f^-(u), f^+(u))`.
    fn split(&self, model: &SystemModel, u: &State) -> (State, State);
    /// `(F^-(u), F^+(u))` for an entropy pair.
    fn split_entropy(&self, model: &SystemModel, pair: &EntropyPair, u: &State) -> Result<(f64, f64)>;
    /// CFL number of the scheme over the given states (must be `<= 1`).
    fn cfl_number(&self, model: &SystemModel, lambda: f64, states: &[State]) -> Result<f64>;
}

/// `f^+- = f/2 +- (Q/lambda) u`, `F^+- = F/2 +- (Q/lambda) U`; the resulting
/// scheme is Lax-Friedrichs with coefficient `Q`.
#[derive(Clone, Copy, Debug)]
pub struct LfSplitting {
    pub lambda: f64,
    pub q: f64,
}

impl FluxSplitting for LfSplitting {
    fn name(&self) -> String {
        format!("lax_friedrichs(q={})", self.q)
    }

    fn split(&self, model: &SystemModel, u: &State) -> (State, State) {
        let f = model.flux(u) * 0.5;
        let d = *u * (self.q / self.lambda);
        (f - d, f + d)
    }

    fn split_entropy(&self, model: &SystemModel, pair: &EntropyPair, u: &State) -> Result<(f64, f64)> {
        let e = pair.eval(model, u)?;
        let d = self.q / self.lambda * e.u;
        Ok((0.5 * e.f - d, 0.5 * e.f + d))
    }

    fn cfl_number(&self, model: &SystemModel, lambda: f64, states: &[State]) -> Result<f64> {
        Ok(lambda * max_speed_over(model, states)? / self.q)
    }
}

/// Upwind (Engquist-Osher) splitting of a convex scalar flux about its sonic
/// point `u_*`: `f^+(u) = f(max(u, u_*))`, `f^-(u) = f(min(u, u_*)) - f(u_*)`.
/// For Burgers this is `f^+ = f 1_{u >= 0}`, `f^- = f 1_{u < 0}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct UpwindSplitting;

impl FluxSplitting for UpwindSplitting {
    fn name(&self) -> String {
        "upwind".into()
    }

    fn split(&self, model: &SystemModel, u: &State) -> (State, State) {
        let us = model.sonic_point().unwrap_or(0.0);
        let x = u.x();
        let fp = model.f_scalar(x.max(us));
        let fm = model.f_scalar(x.min(us)) - model.f_scalar(us);
        (State::scalar(fm), State::scalar(fp))
    }

    fn split_entropy(&self, model: &SystemModel, pair: &EntropyPair, u: &State) -> Result<(f64, f64)> {
        let us = model.sonic_point()?;
        let big = |x: f64| pair.eval(model, &State::scalar(x)).map(|e| e.f);
        let fp = big(u.x().max(us))? - big(us)?;
        Ok((big(u.x())? - fp, fp))
    }

    fn cfl_number(&self, model: &SystemModel, lambda: f64, states: &[State]) -> Result<f64> {
        if !model.is_convex_scalar() {
            return Err(Error::Config("upwind splitting needs a convex scalar flux".into()));
        }
        Ok(lambda * max_speed_over(model, states)?)
    }
}

/// Two-point numerical flux of a conservative scheme.
#[derive(Clone)]
pub enum NumericalFlux {
    /// `g(v, w) = (f(v) + f(w))/2 - (Q/lambda)(w - v)`.
    LaxFriedrichs { lambda: f64, q: f64 },
    Splitting(Arc<dyn FluxSplitting>),
    /// `g(v, w) = f(R(v, w))`.
    Godunov,
}

impl fmt::Debug for NumericalFlux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericalFlux::LaxFriedrichs { lambda, q } => write!(f, "LaxFriedrichs(lambda={lambda}, q={q})"),
            NumericalFlux::Splitting(s) => write!(f, "Splitting({})", s.name()),
            NumericalFlux::Godunov => write!(f, "Godunov"),
        }
    }
}

impl NumericalFlux {
    pub fn flux(&self, model: &SystemModel, v: &State, w: &State) -> Result<State> {
        match self {
            NumericalFlux::LaxFriedrichs { lambda, q } => {
                Ok((model.flux(v) + model.flux(w)) * 0.5 - (*w - *v) * (q / lambda))
            }
            NumericalFlux::Splitting(s) => Ok(s.split(model, v).1 + s.split(model, w).0),
            NumericalFlux::Godunov => riemann::godunov_flux(model, v, w),
        }
    }

    /// Numerical entropy flux `G(v, w)` paired with [`NumericalFlux::flux`].
    pub fn entropy_flux(&self, model: &SystemModel, pair: &EntropyPair, v: &State, w: &State) -> Result<f64> {
        match self {
            NumericalFlux::LaxFriedrichs { lambda, q } => {
                let (ev, ew) = (pair.eval(model, v)?, pair.eval(model, w)?);
                Ok(0.5 * (ev.f + ew.f) - q / lambda * (ew.u - ev.u))
            }
            NumericalFlux::Splitting(s) => {
                Ok(s.split_entropy(model, pair, v)?.1 + s.split_entropy(model, pair, w)?.0)
            }
            NumericalFlux::Godunov => {
                let r = riemann::trace(model, v, w)?;
                Ok(pair.eval(model, &r)?.f)
            }
        }
    }
}

/// One step of a conservative scheme.
#[derive(Clone, Debug)]
pub struct ConservativeStepper {
    pub model: SystemModel,
    pub flux: NumericalFlux,
    pub lambda: f64,
}

/// Fluxes through the left face of cell 1 and the right face of cell `J`.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryFluxes {
    pub inflow: State,
    pub outflow: State,
}

impl ConservativeStepper {
    /// Advance `u` (with `u[0]` the boundary cell at the current time) into
    /// `out`, setting `out[0] = u_b_next`.
    pub fn step(&self, u: &[State], u_b_next: State, out: &mut Vec<State>) -> Result<BoundaryFluxes> {
        let n = u.len();
        out.clear();
        out.push(u_b_next);
        let mut g_left = self.flux.flux(&self.model, &u[0], &u[1])?;
        let inflow = g_left;
        for j in 1..n {
            let right = if j + 1 < n { u[j + 1] } else { u[j] };
            let g_right = self.flux.flux(&self.model, &u[j], &right)?;
            out.push(u[j] - (g_right - g_left) * self.lambda);
            g_left = g_right;
        }
        Ok(BoundaryFluxes { inflow, outflow: g_left })
    }

    /// Largest positive part of the cell entropy defect
    /// `U(u^{n+1}_j) - U(u^n_j) + lambda (G(u_j, u_{j+1}) - G(u_{j-1}, u_j))`.
    pub fn entropy_defect(&self, pair: &EntropyPair, old: &[State], new: &[State]) -> Result<f64> {
        let n = old.len();
        let mut worst: f64 = 0.0;
        let mut g_left = self.flux.entropy_flux(&self.model, pair, &old[0], &old[1])?;
        for j in 1..n {
            let right = if j + 1 < n { old[j + 1] } else { old[j] };
            let g_right = self.flux.entropy_flux(&self.model, pair, &old[j], &right)?;
            let du = pair.eval(&self.model, &new[j])?.u - pair.eval(&self.model, &old[j])?.u;
            worst = worst.max(du + self.lambda * (g_right - g_left));
            g_left = g_right;
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub states: Vec<State>,
}

/// Space-time numerical solution from one run.
#[derive(Clone)]
pub struct GridSolution {
    pub model: SystemModel,
    pub scheme: SchemeTag,
    pub mesh: Mesh,
    pub data: ProblemData,
    pub snapshots: Vec<Snapshot>,
    pub warnings: Vec<String>,
    flux: Option<NumericalFlux>,
    source: Option<SourceFn>,
}

/// Serializable run description (the JSON sidecar of CSV snapshots).
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub model: String,
    pub params: std::collections::BTreeMap<String, f64>,
    pub scheme: SchemeTag,
    pub mesh: Mesh,
    pub u_initial: String,
    pub u_boundary: String,
    pub snapshot_times: Vec<f64>,
    pub warnings: Vec<String>,
}

impl fmt::Debug for GridSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSolution")
            .field("model", &self.model.name())
            .field("scheme", &self.scheme)
            .field("mesh", &self.mesh)
            .field("snapshots", &self.snapshots.len())
            .finish()
    }
}

impl GridSolution {
    /// Position of cell/node `j`.
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.mesh.h
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a run has at least one snapshot")
    }

    pub fn numerical_flux(&self) -> Option<&NumericalFlux> {
        self.flux.as_ref()
    }

    pub fn metadata(&self) -> RunMetadata {
        RunMetadata {
            model: self.model.name().to_string(),
            params: self.model.params().clone(),
            scheme: self.scheme.clone(),
            mesh: self.mesh,
            u_initial: self.data.u_initial.describe(),
            u_boundary: self.data.u_boundary.describe(),
            snapshot_times: self.snapshots.iter().map(|s| s.t).collect(),
            warnings: self.warnings.clone(),
        }
    }

    /// Replays a conservative run step by step, calling `visit(n, t_n, u^n, u^{n+1})`.
    pub fn replay(&self, mut visit: impl FnMut(usize, f64, &[State], &[State]) -> Result<()>) -> Result<()> {
        let flux = self.flux.clone().ok_or_else(|| {
            Error::InvalidParameter("only conservative runs can be replayed".into())
        })?;
        let stepper = ConservativeStepper { model: self.model.clone(), flux, lambda: self.mesh.lambda };
        let mut u = initial_cells(&self.data, &self.mesh);
        let mut next = Vec::with_capacity(u.len());
        for n in 0..self.mesh.steps {
            let t1 = (n + 1) as f64 * self.mesh.tau;
            stepper.step(&u, self.data.u_boundary.eval(t1), &mut next)?;
            visit(n, n as f64 * self.mesh.tau, &u, &next)?;
            std::mem::swap(&mut u, &mut next);
        }
        Ok(())
    }
}

fn max_speed_over(model: &SystemModel, states: &[State]) -> Result<f64> {
    if model.is_scalar() {
        // Maximum principle: values stay in the hull of the data.
        let lo = states.iter().map(|s| s.x()).fold(f64::INFINITY, f64::min);
        let hi = states.iter().map(|s| s.x()).fold(f64::NEG_INFINITY, f64::max);
        return Ok(model.max_abs_df(lo, hi));
    }
    states.iter().try_fold(0.0f64, |m, s| Ok(m.max(model.max_speed(s)?)))
}

fn data_states(model: &SystemModel, data: &ProblemData, params: &GridParams) -> Result<Vec<State>> {
    data.u_initial.validate(Some(model.dim()))?;
    data.u_boundary.validate(Some(model.dim()))?;
    let mut states = data.u_initial.sample_states(0.0, params.x_max, params.cells + 1);
    states.extend(data.u_boundary.sample_states(0.0, params.t_end, 257));
    for s in &states {
        model.check_region(s).map_err(|e| Error::Config(format!("data state rejected: {e}")))?;
    }
    Ok(states)
}

fn compatibility_warning(data: &ProblemData) -> Option<String> {
    let (a, b) = (data.u_initial.eval(0.0), data.u_boundary.eval(0.0));
    (a.dist(&b) > 1e-12).then(|| {
        format!("initial and boundary data are incompatible at the corner: u_I(0) = {a:?}, u_B(0) = {b:?}")
    })
}

fn initial_cells(data: &ProblemData, mesh: &Mesh) -> Vec<State> {
    let mut u: Vec<State> = (0..=mesh.cells).map(|j| data.u_initial.eval(j as f64 * mesh.h)).collect();
    u[0] = data.u_boundary.eval(0.0);
    u
}

fn snapshot_steps(steps: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=count).map(|k| (k * steps + count / 2) / count).collect();
    out.dedup();
    out
}

fn check_states(model: &SystemModel, u: &[State], t: f64) -> Result<()> {
    for (j, s) in u.iter().enumerate() {
        if !model.in_region(s) {
            return Err(Error::Domain(format!(
                "cell {j} left the state region at t = {t}: {s:?}"
            )));
        }
    }
    Ok(())
}

fn conservative_mesh(params: &GridParams, lambda: f64, cfl_number: f64) -> Mesh {
    let h = params.h();
    let tau = lambda * h;
    let steps = ((params.t_end / tau).round() as usize).max(1);
    Mesh {
        x_max: params.x_max,
        cells: params.cells,
        h,
        tau,
        lambda,
        steps,
        t_final: steps as f64 * tau,
        cfl_number,
    }
}

fn run_conservative(
    model: &SystemModel,
    scheme: SchemeTag,
    flux: NumericalFlux,
    lambda: f64,
    cfl_number: f64,
    cfl_of: &dyn Fn(&[State]) -> Result<f64>,
    data: &ProblemData,
    params: &GridParams,
    mut warnings: Vec<String>,
) -> Result<GridSolution> {
    let mesh = conservative_mesh(params, lambda, cfl_number);
    warnings.extend(compatibility_warning(data));
    let stepper = ConservativeStepper { model: model.clone(), flux: flux.clone(), lambda };
    let mut u = initial_cells(data, &mesh);
    check_states(model, &u, 0.0)?;
    let marks = snapshot_steps(mesh.steps, params.snapshots);
    let mut snapshots = vec![Snapshot { t: 0.0, states: u.clone() }];
    let mut next = Vec::with_capacity(u.len());
    let mut mark = 1;
    for n in 0..mesh.steps {
        let t1 = (n + 1) as f64 * mesh.tau;
        stepper.step(&u, data.u_boundary.eval(t1), &mut next)?;
        check_states(model, &next, t1)?;
        if !model.is_scalar() {
            // Systems have no maximum principle; the CFL bound is re-checked on the fly.
            let c = cfl_of(&next)?;
            if c > 1.0 + 1e-9 {
                return Err(Error::Cfl(format!("CFL number {c} exceeds 1 at t = {t1}")));
            }
        }
        std::mem::swap(&mut u, &mut next);
        if mark < marks.len() && n + 1 == marks[mark] {
            snapshots.push(Snapshot { t: t1, states: u.clone() });
            mark += 1;
        }
    }
    Ok(GridSolution {
        model: model.clone(),
        scheme,
        mesh,
        data: data.clone(),
        snapshots,
        warnings,
        flux: Some(flux),
        source: None,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("mesh ratio lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Lax-Friedrichs scheme with numerical coefficient `Q`.
///
/// CFL: `lambda sup|f'| / Q <= 1` over the data range. For `Q > 1/2` the
/// scheme is not monotone and a warning is recorded.
pub fn run_lf(model: &SystemModel, lambda: f64, q: f64, data: &ProblemData, params: &GridParams) -> Result<GridSolution> {
    params.validate()?;
    check_lambda(lambda)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("Q must lie in (0, 1), got {q}")));
    }
    let states = data_states(model, data, params)?;
    let cfl = lambda * max_speed_over(model, &states)? / q;
    if cfl > 1.0 + 1e-12 {
        return Err(Error::Cfl(format!("lambda sup|f'| / Q = {cfl} exceeds 1")));
    }
    let mut warnings = Vec::new();
    if q > 0.5 {
        warnings.push(format!("Q = {q} > 1/2: the scheme is not monotone"));
    }
    run_conservative(
        model,
        SchemeTag::LaxFriedrichs { lambda, q },
        NumericalFlux::LaxFriedrichs { lambda, q },
        lambda,
        cfl,
        &|st| Ok(lambda * max_speed_over(model, st)? / q),
        data,
        params,
        warnings,
    )
}

/// Checks `f^- + f^+ = f` at the given states.
pub fn check_splitting(model: &SystemModel, splitting: &dyn FluxSplitting, states: &[State]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in states {
        let (fm, fp) = splitting.split(model, s);
        let f = model.flux(s);
        worst = worst.max((fm + fp - f).norm() / (1.0 + f.norm()));
    }
    if worst > SPLITTING_CONSISTENCY {
        return Err(Error::Config(format!(
            "flux splitting `{}` is inconsistent: |f^- + f^+ - f| = {worst:e}",
            splitting.name()
        )));
    }
    Ok(worst)
}

/// Flux-splitting scheme `g(v, w) = f^+(v) + f^-(w)`.
pub fn run_split(
    model: &SystemModel,
    splitting: Arc<dyn FluxSplitting>,
    lambda: f64,
    data: &ProblemData,
    params: &GridParams,
) -> Result<GridSolution> {
    params.validate()?;
    check_lambda(lambda)?;
    let states = data_states(model, data, params)?;
    let mut probe = states.clone();
    if model.is_scalar() {
        let lo = states.iter().map(|s| s.x()).fold(f64::INFINITY, f64::min);
        let hi = states.iter().map(|s| s.x()).fold(f64::NEG_INFINITY, f64::max);
        probe.extend((0..=64).map(|i| State::scalar(lo - 1.0 + (hi - lo + 2.0) * i as f64 / 64.0)));
    }
    check_splitting(model, splitting.as_ref(), &probe)?;
    let cfl = splitting.cfl_number(model, lambda, &states)?;
    if cfl > 1.0 + 1e-12 {
        return Err(Error::Cfl(format!("CFL number {cfl} of `{}` exceeds 1", splitting.name())));
    }
    let name = splitting.name();
    let sp = splitting.clone();
    run_conservative(
        model,
        SchemeTag::FluxSplitting { name, lambda },
        NumericalFlux::Splitting(splitting),
        lambda,
        cfl,
        &|st| sp.cfl_number(model, lambda, st),
        data,
        params,
        vec![],
    )
}

/// Godunov scheme. CFL: `lambda max|lambda_j| <= 1/2` (non-interacting fans).
pub fn run_godunov(model: &SystemModel, lambda: f64, data: &ProblemData, params: &GridParams) -> Result<GridSolution> {
    params.validate()?;
    check_lambda(lambda)?;
    if !riemann::has_riemann_solver(model) {
        return Err(Error::Config(format!("no Riemann solver for model `{}`", model.name())));
    }
    let states = data_states(model, data, params)?;
    let cfl = 2.0 * lambda * max_speed_over(model, &states)?;
    if cfl > 1.0 + 1e-12 {
        return Err(Error::Cfl(format!("lambda max|lambda_j| = {} exceeds 1/2", cfl / 2.0)));
    }
    run_conservative(
        model,
        SchemeTag::Godunov { lambda },
        NumericalFlux::Godunov,
        lambda,
        cfl,
        &|st| Ok(2.0 * lambda * max_speed_over(model, st)?),
        data,
        params,
        vec![],
    )
}

/// Explicit viscous solver for `u_t + f(u)_x = eps B(u) u_xx (+ s(x, t))`.
///
/// The step is `tau = cfl / (alpha/h + 2 eps b_max / h^2)` with `cfl = 0.9`,
/// which satisfies `tau <= 0.9 min(h/alpha, h^2/(2 eps b_max))`.
pub fn run_viscous(model: &SystemModel, epsilon: f64, data: &ProblemData, params: &GridParams) -> Result<GridSolution> {
    run_viscous_with_source(model, epsilon, data, params, None)
}

/// [`run_viscous`] with an optional source term `s(x, t)` (used for
/// manufactured-solution tests).
pub fn run_viscous_with_source(
    model: &SystemModel,
    epsilon: f64,
    data: &ProblemData,
    params: &GridParams,
    source: Option<SourceFn>,
) -> Result<GridSolution> {
    params.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let states = data_states(model, data, params)?;
    let mut alpha = max_speed_over(model, &states)?;
    if source.is_some() || !model.is_scalar() {
        // No maximum principle: leave headroom for growth of the speeds.
        alpha *= 1.5;
    }
    let b = model.viscosity(&states[0]);
    let b_max = (0..model.dim()).map(|i| b.get(i, i)).fold(0.0f64, f64::max);
    let h = params.h();
    let tau_max = 0.9 / (alpha / h + 2.0 * epsilon * b_max / (h * h));
    let steps = (params.t_end / tau_max).ceil() as usize;
    let tau = params.t_end / steps as f64;
    let mesh = Mesh {
        x_max: params.x_max,
        cells: params.cells,
        h,
        tau,
        lambda: tau / h,
        steps,
        t_final: params.t_end,
        cfl_number: tau * (alpha / h + 2.0 * epsilon * b_max / (h * h)),
    };
    let mut warnings: Vec<String> = compatibility_warning(data).into_iter().collect();
    let n = params.cells + 1;
    let mut u: Vec<State> = (0..n).map(|j| data.u_initial.eval(j as f64 * h)).collect();
    u[0] = data.u_boundary.eval(0.0);
    check_states(model, &u, 0.0)?;
    let marks = snapshot_steps(steps, params.snapshots);
    let mut snapshots = vec![Snapshot { t: 0.0, states: u.clone() }];
    let mut mark = 1;
    let mut next = u.clone();
    let mut fl: Vec<State> = vec![State::zeros(model.dim()); n];
    let mut speed: Vec<f64> = vec![0.0; n];
    let r = tau / h;
    let d = epsilon * tau / (h * h);
    let mut speed_warned = false;
    for step in 0..steps {
        let t = step as f64 * tau;
        for j in 0..n {
            fl[j] = model.flux(&u[j]);
            speed[j] = model.max_speed(&u[j])?;
        }
        let local_max = speed.iter().cloned().fold(0.0, f64::max);
        if local_max > alpha * (1.0 + 1e-9) && !speed_warned {
            if tau * (local_max / h + 2.0 * epsilon * b_max / (h * h)) > 1.0 {
                return Err(Error::Cfl(format!("viscous CFL bound violated at t = {t}")));
            }
            warnings.push(format!("max speed {local_max} exceeded the data bound {alpha} at t = {t}"));
            speed_warned = true;
        }
        let face = |j: usize, u: &[State]| -> State {
            // Face between nodes j and j+1 (node n is the zero-gradient ghost).
            let (a, fa) = (u[j], fl[j]);
            let (bs, fb, sb) = if j + 1 < n { (u[j + 1], fl[j + 1], speed[j + 1]) } else { (u[j], fl[j], speed[j]) };
            let al = speed[j].max(sb);
            (fa + fb) * 0.5 - (bs - a) * (0.5 * al)
        };
        let mut g_left = face(0, &u);
        for j in 1..n {
            let g_right = face(j, &u);
            let right = if j + 1 < n { u[j + 1] } else { u[j] };
            let lap = right - u[j] * 2.0 + u[j - 1];
            let bj = model.viscosity(&u[j]);
            let mut val = u[j] - (g_right - g_left) * r + bj.mul_vec(&lap) * d;
            if let Some(src) = &source {
                val += src(j as f64 * h, t) * tau;
            }
            next[j] = val;
            g_left = g_right;
        }
        let t1 = (step + 1) as f64 * tau;
        next[0] = data.u_boundary.eval(t1);
        check_states(model, &next, t1)?;
        std::mem::swap(&mut u, &mut next);
        if mark < marks.len() && step + 1 == marks[mark] {
            snapshots.push(Snapshot { t: t1, states: u.clone() });
            mark += 1;
        }
    }
    Ok(GridSolution {
        model: model.clone(),
        scheme: SchemeTag::Viscous { epsilon },
        mesh,
        data: data.clone(),
        snapshots,
        warnings,
        flux: None,
        source,
    })
}

impl GridSolution {
    pub fn has_source(&self) -> bool {
        self.source.is_some()
    }
}

/// Largest positive cell entropy defect over all cells and steps of a
/// conservative run; `<= 1e-12` certifies the discrete entropy inequality.
pub fn discrete_entropy_residual(sol: &GridSolution, pair: &EntropyPair) -> Result<f64> {
    Ok(discrete_entropy_residuals(sol, std::slice::from_ref(pair))?[0])
}

/// [`discrete_entropy_residual`] for several pairs in one replay.
pub fn discrete_entropy_residuals(sol: &GridSolution, pairs: &[EntropyPair]) -> Result<Vec<f64>> {
    let flux = sol.flux.clone().ok_or_else(|| {
        Error::InvalidParameter("discrete entropy residuals need a conservative scheme".into())
    })?;
    let stepper = ConservativeStepper { model: sol.model.clone(), flux, lambda: sol.mesh.lambda };
    let mut worst = vec![0.0f64; pairs.len()];
    sol.replay(|_, _, old, new| {
        for (w, p) in worst.iter_mut().zip(pairs) {
            *w = w.max(stepper.entropy_defect(p, old, new)?);
        }
        Ok(())
    })?;
    Ok(worst)
}

/// True when every residual is within the certificate tolerance.
pub fn entropy_certified(residuals: &[f64]) -> bool {
    residuals.iter().all(|r| *r <= DISCRETE_ENTROPY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burgers_data(ui: f64, ub: f64) -> ProblemData {
        ProblemData::scalar(ui, ub)
    }

    #[test]
    fn constants_are_preserved() {
        let m = SystemModel::burgers();
        let p = GridParams::new(1.0, 50, 0.2);
        let d = burgers_data(0.7, 0.7);
        for sol in [
            run_lf(&m, 0.25, 0.5, &d, &p).unwrap(),
            run_godunov(&m, 0.25, &d, &p).unwrap(),
            run_split(&m, Arc::new(UpwindSplitting), 0.25, &d, &p).unwrap(),
            run_viscous(&m, 0.01, &d, &p).unwrap(),
        ] {
            assert!(sol.last().states.iter().all(|s| s.x() == 0.7), "{:?}", sol.scheme);
        }
    }

    #[test]
    fn lf_cfl_rejected() {
        let m = SystemModel::burgers();
        let p = GridParams::new(1.0, 50, 0.2);
        let e = run_lf(&m, 0.5, 0.5, &burgers_data(-2.0, 1.0), &p).unwrap_err();
        assert!(matches!(e, Error::Cfl(_)));
    }

    #[test]
    fn split_consistency_rejected() {
        struct Bad;
        impl FluxSplitting for Bad {
            fn name(&self) -> String {
                "bad".into()
            }
            fn split(&self, m: &SystemModel, u: &State) -> (State, State) {
                (m.flux(u), State::scalar(1e-6))
            }
            fn split_entropy(&self, _: &SystemModel, _: &EntropyPair, _: &State) -> Result<(f64, f64)> {
                Ok((0.0, 0.0))
            }
            fn cfl_number(&self, _: &SystemModel, _: f64, _: &[State]) -> Result<f64> {
                Ok(0.5)
            }
        }
        let m = SystemModel::burgers();
        let p = GridParams::new(1.0, 20, 0.1);
        assert!(matches!(run_split(&m, Arc::new(Bad), 0.2, &burgers_data(0.0, 0.0), &p), Err(Error::Config(_))));
    }

    #[test]
    fn piecewise_profile_is_right_continuous() {
        let p = DataProfile::piecewise(vec![0.5], vec![State::scalar(1.0), State::scalar(2.0)]).unwrap();
        assert_eq!(p.eval(0.49).x(), 1.0);
        assert_eq!(p.eval(0.5).x(), 2.0);
        assert!(DataProfile::piecewise(vec![0.5, 0.2], vec![State::scalar(0.0); 3]).is_err());
    }

    #[test]
    fn incompatible_corner_warns() {
        let m = SystemModel::burgers();
        let p = GridParams::new(1.0, 20, 0.1);
        let sol = run_lf(&m, 0.2, 0.5, &burgers_data(-1.0, 1.0), &p).unwrap();
        assert!(sol.warnings.iter().any(|w| w.contains("incompatible")));
    }

    #[test]
    fn snapshot_cadence() {
        let m = SystemModel::burgers();
        let p = GridParams::new(1.0, 20, 1.0);
        let sol = run_lf(&m, 0.25, 0.5, &burgers_data(0.1, 0.1), &p).unwrap();
        assert_eq!(sol.snapshots.len(), 33);
        assert_eq!(sol.last().t, sol.mesh.t_final);
    }
}
