//! Boundary traces, rescaled layer profiles and convergence studies.
//!
//! A trace is the time average, over a window `[T_1, T_2]`, of the state a
//! few layer widths inside the domain. Viscous profiles are rescaled as
//! `v(y) = u(eps y, t)`, discrete ones as `v(y) = u(y h, t)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::admissible::{entropy_check, kruzkov_entropy_check};
use crate::error::{Error, Result};
use crate::layers::{self, LayerProfile, Regularization};
use crate::linalg::State;
use crate::schemes::{self, GridParams, GridSolution, ProblemData, SchemeTag};
use crate::systems::{EntropyPair, SystemModel};
use crate::tolerances::OSCILLATION_FACTOR;

#[derive(Clone, Debug, Serialize)]
pub struct EntropyResidual {
    pub pair: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceReport {
    pub scheme: SchemeTag,
    pub window: (f64, f64),
    /// Snapshots averaged.
    pub snapshots_used: usize,
    pub probe_cells: usize,
    pub probe_x: f64,
    /// Boundary datum averaged over the window.
    pub u_b: State,
    pub trace: State,
    pub flux_trace: State,
    pub entropy_residuals: Vec<EntropyResidual>,
    /// Rescaled coordinate of each profile sample (`x/eps` or `x/h`).
    pub profile_y: Vec<f64>,
    /// Window-averaged states between the boundary and the probe.
    pub profile: Vec<State>,
    /// Largest windowed max - min over components at the probe.
    pub spread: f64,
    /// Total variation in time of the windowed probe samples.
    pub time_variation: f64,
    pub possible_oscillation: bool,
}

impl TraceReport {
    /// Rescaled profile at `y`, linearly interpolated between samples.
    pub fn profile_at(&self, y: f64) -> Option<State> {
        let ys = &self.profile_y;
        if y < ys[0] || y > ys[ys.len() - 1] {
            return None;
        }
        let k = ys.partition_point(|v| *v <= y).min(ys.len() - 1).max(1);
        let t = (y - ys[k - 1]) / (ys[k] - ys[k - 1]);
        Some(self.profile[k - 1] + (self.profile[k] - self.profile[k - 1]) * t)
    }

    pub fn worst_residual(&self) -> f64 {
        self.entropy_residuals.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The scheme's small parameter: `eps` for viscous runs, `h` otherwise.
pub fn scheme_parameter(sol: &GridSolution) -> f64 {
    match sol.scheme {
        SchemeTag::Viscous { epsilon } => epsilon,
        _ => sol.mesh.h,
    }
}

/// Default probe depth in cells: `20 eps / h` for viscous runs, 10 otherwise.
pub fn default_probe_cells(sol: &GridSolution) -> usize {
    match sol.scheme {
        SchemeTag::Viscous { epsilon } => (20.0 * epsilon / sol.mesh.h).ceil() as usize,
        _ => 10,
    }
}

/// Time-averaged boundary trace over `window`, probed `probe_cells` cells
/// inside the domain (default from [`default_probe_cells`]).
pub fn extract_boundary_trace(
    sol: &GridSolution,
    window: (f64, f64),
    probe_cells: Option<usize>,
) -> Result<TraceReport> {
    let (t1, t2) = window;
    let t_final = sol.last().t;
    let slack = 1e-12 * (1.0 + t_final);
    if !(t1 >= 0.0 && t1 <= t2 && t2 <= t_final + slack) {
        return Err(Error::InvalidParameter(format!(
            "window [{t1}, {t2}] must lie inside [0, {t_final}]"
        )));
    }
    let probe = probe_cells.unwrap_or_else(|| default_probe_cells(sol));
    if probe == 0 || probe > sol.mesh.cells {
        return Err(Error::InvalidParameter(format!(
            "probe depth {probe} cells is outside 1..={}",
            sol.mesh.cells
        )));
    }
    let snaps: Vec<_> = sol.snapshots.iter().filter(|s| s.t >= t1 - slack && s.t <= t2 + slack).collect();
    if snaps.is_empty() {
        return Err(Error::InvalidParameter(format!("no snapshot inside the window [{t1}, {t2}]")));
    }
    let n = snaps.len() as f64;
    let dim = sol.model.dim();
    let mean = |j: usize| snaps.iter().fold(State::zeros(dim), |acc, s| acc + s.states[j]) * (1.0 / n);
    let trace = mean(probe);
    let u_b = snaps.iter().fold(State::zeros(dim), |acc, s| acc + sol.data.u_boundary.eval(s.t)) * (1.0 / n);
    let scale = match sol.scheme {
        SchemeTag::Viscous { epsilon } => epsilon,
        _ => sol.mesh.h,
    };
    let profile_y: Vec<f64> = (0..=probe).map(|j| sol.x(j) / scale).collect();
    let profile: Vec<State> = (0..=probe).map(mean).collect();
    let mut spread = 0.0f64;
    for c in 0..dim {
        let vals: Vec<f64> = snaps.iter().map(|s| s.states[probe][c]).collect();
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        spread = spread.max(hi - lo);
    }
    let time_variation: f64 = snaps.windows(2).map(|w| w[1].states[probe].dist(&w[0].states[probe])).sum();
    let mut report = TraceReport {
        scheme: sol.scheme.clone(),
        window,
        snapshots_used: snaps.len(),
        probe_cells: probe,
        probe_x: sol.x(probe),
        u_b,
        trace,
        flux_trace: sol.model.flux(&trace),
        entropy_residuals: vec![],
        profile_y,
        profile,
        spread,
        time_variation,
        possible_oscillation: spread > OSCILLATION_FACTOR * scheme_parameter(sol),
    };
    report.entropy_residuals = boundary_entropy_residuals(&report, &sol.model, &sol.model.entropies())?;
    Ok(report)
}

/// `F(u_0) - F(u_B) - grad U(u_B) . (f(u_0) - f(u_B))` per pair, plus the
/// supremum over the Kruzkov family for scalar laws.
pub fn boundary_entropy_residuals(
    report: &TraceReport,
    model: &SystemModel,
    pairs: &[EntropyPair],
) -> Result<Vec<EntropyResidual>> {
    let mut out = Vec::new();
    for p in pairs {
        let c = entropy_check(model, &report.trace, &report.u_b, std::slice::from_ref(p))?;
        out.push(EntropyResidual { pair: p.label(), value: c.worst });
    }
    if model.is_scalar() {
        let k = kruzkov_entropy_check(model, report.trace.x(), report.u_b.x())?;
        out.push(EntropyResidual { pair: "kruzkov".into(), value: k.worst });
    }
    Ok(out)
}

/// Largest boundary entropy residual over the given pairs.
pub fn boundary_entropy_residual(report: &TraceReport, model: &SystemModel, pairs: &[EntropyPair]) -> Result<f64> {
    Ok(boundary_entropy_residuals(report, model, pairs)?
        .iter()
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Scheme family of a convergence study.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StudyFamily {
    /// Parameter: `eps`.
    Viscous,
    /// Parameter: `h`; `lambda = tau/h` fixed.
    LaxFriedrichs { lambda: f64, q: f64 },
    /// Parameter: `h`.
    Godunov { lambda: f64 },
}

/// One run of a study: the small parameter and the number of cells.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StudyPoint {
    pub param: f64,
    pub cells: usize,
}

#[derive(Clone, Debug)]
pub struct StudySetup {
    pub x_max: f64,
    /// When set, each run uses `x_max = factor * param` instead of `x_max`.
    pub x_max_per_param: Option<f64>,
    pub t_end: f64,
    pub window: (f64, f64),
    pub snapshots: usize,
    /// Expected trace, when known; enables trace errors and profile errors.
    pub reference_trace: Option<State>,
    /// Profile errors are measured for `y` in `[0, profile_span]` (viscous)
    /// or the first `profile_span` cells (discrete).
    pub profile_span: f64,
    pub probe_cells: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub param: f64,
    pub cells: usize,
    pub trace: State,
    pub trace_error: Option<f64>,
    pub worst_residual: f64,
    pub profile_error: Option<f64>,
    pub possible_oscillation: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyTable {
    pub family: StudyFamily,
    pub rows: Vec<StudyRow>,
    /// Trace errors nonincreasing within a factor 1.5 along the refinement
    /// (`None` with fewer than three rows or no reference).
    pub trace_error_trend: Option<bool>,
    pub profile_error_trend: Option<bool>,
    /// Set when a run failed; rows hold the runs before it.
    pub aborted: Option<String>,
}

fn trend(errors: &[Option<f64>]) -> Option<bool> {
    if errors.len() < 3 || errors.iter().any(|e| e.is_none()) {
        return None;
    }
    let e: Vec<f64> = errors.iter().map(|e| e.unwrap()).collect();
    Some(e.windows(2).all(|w| w[1] <= 1.5 * w[0]))
}

/// Sup-distance between a rescaled run profile and a layer profile.
pub fn profile_error(report: &TraceReport, layer: &LayerProfile, span: f64) -> f64 {
    report
        .profile_y
        .iter()
        .zip(&report.profile)
        .filter(|(y, _)| **y <= span + 1e-12)
        .map(|(y, s)| s.dist(&layer.value_at(*y)))
        .fold(0.0, f64::max)
}

/// Runs the family over the points (in parallel) and tabulates traces,
/// boundary entropy residuals and profile errors. Points must be ordered
/// with a decreasing small parameter.
pub fn convergence_study(
    model: &SystemModel,
    data: &ProblemData,
    family: StudyFamily,
    points: &[StudyPoint],
    setup: &StudySetup,
) -> Result<StudyTable> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("a study needs at least one parameter value".into()));
    }
    if points.windows(2).any(|w| !(w[1].param < w[0].param)) {
        return Err(Error::InvalidParameter("study parameters must be strictly decreasing".into()));
    }
    let u_b = data.u_boundary.eval(setup.t_end);
    let layer = match setup.reference_trace {
        Some(v_inf) => Some(match family {
            StudyFamily::Viscous => layers::viscous_layer_profile(model, &u_b, &v_inf, None)?,
            StudyFamily::LaxFriedrichs { lambda, q } => {
                layers::discrete_layer_membership(model, Regularization::lf(lambda, q), &u_b, &v_inf, None)?
            }
            StudyFamily::Godunov { .. } => {
                layers::discrete_layer_membership(model, Regularization::Godunov, &u_b, &v_inf, None)?
            }
        }),
        None => None,
    };
    let results: Vec<Result<StudyRow>> = points
        .par_iter()
        .map(|pt| {
            let x_max = setup.x_max_per_param.map_or(setup.x_max, |c| c * pt.param);
            let grid = GridParams::new(x_max, pt.cells, setup.t_end).with_snapshots(setup.snapshots);
            let sol = match family {
                StudyFamily::Viscous => schemes::run_viscous(model, pt.param, data, &grid)?,
                StudyFamily::LaxFriedrichs { lambda, q } => schemes::run_lf(model, lambda, q, data, &grid)?,
                StudyFamily::Godunov { lambda } => schemes::run_godunov(model, lambda, data, &grid)?,
            };
            let report = extract_boundary_trace(&sol, setup.window, setup.probe_cells)?;
            let span = match family {
                StudyFamily::Viscous => setup.profile_span,
                _ => setup.profile_span.min(report.probe_cells as f64),
            };
            Ok(StudyRow {
                param: pt.param,
                cells: pt.cells,
                trace: report.trace,
                trace_error: setup.reference_trace.map(|r| r.dist(&report.trace)),
                worst_residual: report.worst_residual(),
                profile_error: layer.as_ref().map(|l| profile_error(&report, l, span)),
                possible_oscillation: report.possible_oscillation,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut aborted = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        }
    }
    let trace_errors: Vec<Option<f64>> = rows.iter().map(|r| r.trace_error).collect();
    let profile_errors: Vec<Option<f64>> = rows.iter().map(|r| r.profile_error).collect();
    Ok(StudyTable {
        family,
        trace_error_trend: trend(&trace_errors),
        profile_error_trend: trend(&profile_errors),
        rows,
        aborted,
    })
}
