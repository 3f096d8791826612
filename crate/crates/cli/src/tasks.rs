//! Task execution and artifact writing.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bdlayer::admissible::{
    bln_check, excluded_points, inclusion_audit, kruzkov_entropy_check, layer_set_scalar, riemann_set_scalar,
};
use bdlayer::diagnostics::{convergence_study, extract_boundary_trace, StudySetup};
use bdlayer::layers::{
    discrete_layer_membership, elasto_layer_curve, lagrangian_layer_step, lf_coefficient, manifold_report,
    viscous_layer_profile, LayerProfile, Regularization,
};
use bdlayer::riemann::riemann_fan;
use bdlayer::schemes::{
    discrete_entropy_residuals, entropy_certified, run_godunov, run_lf, run_split, run_viscous, FluxSplitting,
    GridSolution, LfSplitting, UpwindSplitting,
};
use bdlayer::systems::{ModelKind, SystemModel};
use bdlayer::verify::run_suite;
use bdlayer::State;
use serde::Serialize;
use serde_json::json;

use crate::config::{CandidateGrid, RunConfig, SchemeSpec, SplittingKind, Task};

/// Failure of a task.
#[derive(Debug)]
pub enum TaskError {
    Numeric(bdlayer::Error),
    Io(io::Error),
}

impl From<bdlayer::Error> for TaskError {
    fn from(e: bdlayer::Error) -> Self {
        TaskError::Numeric(e)
    }
}

impl From<io::Error> for TaskError {
    fn from(e: io::Error) -> Self {
        TaskError::Io(e)
    }
}

impl std::fmt::Display for TaskError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskError::Numeric(e) => write!(f, "{e}"),
            TaskError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

type TaskResult<T> = Result<T, TaskError>;

/// Artifact sink rooted at the output directory. Files are written to a
/// temporary name and renamed into place.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), written: vec![] })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(io::Error::other)?;
        for r in rows {
            w.write_record(r).map_err(io::Error::other)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn take_written(&mut self) -> Vec<String> {
        std::mem::take(&mut self.written)
    }
}

/// What a task produced.
#[derive(Debug, Serialize)]
pub struct TaskSummary {
    pub id: String,
    pub task: &'static str,
    pub artifacts: Vec<String>,
    /// Set by `verify` tasks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
}

fn state_columns(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect()
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn flag(b: bool) -> String {
    (if b { "1" } else { "0" }).to_string()
}

fn push_state(row: &mut Vec<String>, s: &State) {
    row.extend(s.as_slice().iter().map(|x| num(*x)));
}

pub fn run_task(cfg: &RunConfig, model: &SystemModel, task: &Task, seed: u64, out: &mut Outputs) -> TaskResult<TaskSummary> {
    let mut passed = None;
    match task {
        Task::Simulate { id, window, probe_cells } => simulate(cfg, model, id, *window, *probe_cells, out)?,
        Task::Layer { id, u_b, v_inf, regularization } => {
            layer(model, id, &u_b.state()?, &v_inf.state()?, regularization.regularization(), out)?
        }
        Task::Admissible { id, u_b, regularization, grid, audit_samples, curve_v, states } => {
            let u_b = u_b.as_ref().map(|s| s.state()).transpose()?;
            let reg = regularization.map(|r| r.regularization());
            admissible(model, id, u_b, reg, *grid, *audit_samples, curve_v.as_deref(), states.as_deref(), seed, out)?
        }
        Task::Riemann { id, left, right } => {
            let fan = riemann_fan(model, &left.state()?, &right.state()?)?;
            out.json(&format!("{id}.riemann.json"), &fan)?;
        }
        Task::Verify { id } => {
            let report = run_suite(seed);
            out.json(&format!("{id}.verify.json"), &report)?;
            passed = Some(report.passed);
        }
        Task::Study { id, family, points, window, x_max_per_param, reference_trace, profile_span, probe_cells } => {
            let data = cfg.problem_data()?.expect("validated");
            let grid = cfg.grid_params().expect("validated");
            let setup = StudySetup {
                x_max: grid.x_max,
                x_max_per_param: *x_max_per_param,
                t_end: grid.t_end,
                window: *window,
                snapshots: grid.snapshots,
                reference_trace: reference_trace.as_ref().map(|s| s.state()).transpose()?,
                profile_span: *profile_span,
                probe_cells: *probe_cells,
            };
            let pts: Vec<_> = points.iter().map(|p| p.point()).collect();
            let table = convergence_study(model, &data, family.family(), &pts, &setup)?;
            let mut header = vec!["param".to_string(), "cells".to_string()];
            header.extend(state_columns("trace", model.dim()));
            header.extend(["trace_error", "worst_residual", "profile_error", "possible_oscillation"].map(String::from));
            let rows: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| {
                    let mut row = vec![num(r.param), r.cells.to_string()];
                    push_state(&mut row, &r.trace);
                    row.push(r.trace_error.map_or(String::new(), num));
                    row.push(num(r.worst_residual));
                    row.push(r.profile_error.map_or(String::new(), num));
                    row.push(flag(r.possible_oscillation));
                    row
                })
                .collect();
            out.csv(&format!("{id}.csv"), &header, &rows)?;
            out.json(&format!("{id}.json"), &table)?;
            if let Some(msg) = &table.aborted {
                return Err(TaskError::Numeric(bdlayer::Error::SolverFailure(format!("study aborted: {msg}"))));
            }
        }
    }
    Ok(TaskSummary { id: task.id().to_string(), task: task.kind(), artifacts: out.take_written(), passed })
}

fn run_scheme(model: &SystemModel, scheme: SchemeSpec, cfg: &RunConfig) -> TaskResult<GridSolution> {
    let data = cfg.problem_data()?.expect("validated");
    let grid = cfg.grid_params().expect("validated");
    Ok(match scheme {
        SchemeSpec::Viscous { epsilon } => run_viscous(model, epsilon, &data, &grid)?,
        SchemeSpec::LaxFriedrichs { lambda, q } => run_lf(model, lambda, q, &data, &grid)?,
        SchemeSpec::Godunov { lambda } => run_godunov(model, lambda, &data, &grid)?,
        SchemeSpec::Splitting { splitting, lambda, q } => {
            let sp: Arc<dyn FluxSplitting> = match splitting {
                SplittingKind::LaxFriedrichs => Arc::new(LfSplitting { lambda, q: q.unwrap_or(0.5) }),
                SplittingKind::Upwind => Arc::new(UpwindSplitting),
            };
            run_split(model, sp, lambda, &data, &grid)?
        }
    })
}

fn simulate(
    cfg: &RunConfig,
    model: &SystemModel,
    id: &str,
    window: Option<(f64, f64)>,
    probe_cells: Option<usize>,
    out: &mut Outputs,
) -> TaskResult<()> {
    let sol = run_scheme(model, cfg.scheme.expect("validated"), cfg)?;
    let mut header = vec!["t".to_string(), "x".to_string()];
    header.extend(state_columns("u", model.dim()));
    let mut rows = Vec::new();
    for snap in &sol.snapshots {
        for (j, s) in snap.states.iter().enumerate() {
            let mut row = vec![num(snap.t), num(sol.x(j))];
            push_state(&mut row, s);
            rows.push(row);
        }
    }
    out.csv(&format!("{id}.csv"), &header, &rows)?;
    let certificate = if sol.numerical_flux().is_some() {
        let pairs = model.entropies();
        let res = discrete_entropy_residuals(&sol, &pairs)?;
        let per_pair: Vec<_> =
            pairs.iter().zip(&res).map(|(p, r)| json!({ "pair": p.label(), "residual": r })).collect();
        json!({ "residuals": per_pair, "certified": entropy_certified(&res) })
    } else {
        serde_json::Value::Null
    };
    out.json(&format!("{id}.json"), &json!({ "run": sol.metadata(), "entropy_certificate": certificate }))?;
    if let Some(w) = window {
        let report = extract_boundary_trace(&sol, w, probe_cells)?;
        out.json(&format!("{id}.trace.json"), &report)?;
    }
    Ok(())
}

fn layer_profile(model: &SystemModel, u_b: &State, v_inf: &State, reg: Regularization) -> TaskResult<LayerProfile> {
    Ok(match reg {
        Regularization::Viscous => viscous_layer_profile(model, u_b, v_inf, None)?,
        _ => discrete_layer_membership(model, reg, u_b, v_inf, None)?,
    })
}

fn layer(model: &SystemModel, id: &str, u_b: &State, v_inf: &State, reg: Regularization, out: &mut Outputs) -> TaskResult<()> {
    let profile = layer_profile(model, u_b, v_inf, reg)?;
    let manifold = manifold_report(model, reg, Some(u_b), v_inf)?;
    out.json(&format!("{id}.layer.json"), &json!({ "profile": profile, "manifold": manifold }))?;
    let mut header = vec!["y".to_string()];
    header.extend(state_columns("v", model.dim()));
    header.push("distance".into());
    let rows: Vec<Vec<String>> = profile
        .samples
        .iter()
        .map(|s| {
            let mut row = vec![num(s.y)];
            push_state(&mut row, &s.state);
            row.push(num(s.state.dist(v_inf)));
            row
        })
        .collect();
    out.csv(&format!("{id}.layer.csv"), &header, &rows)?;
    if let (ModelKind::LagrangianGas, Regularization::LaxFriedrichs { lambda, q }) = (model.kind(), reg) {
        // Closed-form recursion; its mesh ratio is the layer coefficient. The
        // limit is a saddle, so iteration stops once within 1e-6 of it.
        let k = lf_coefficient(lambda, q);
        let mut rows = Vec::new();
        let mut x = *u_b;
        for n in 0..=200 {
            let st = lagrangian_layer_step(k, &x, v_inf)?;
            rows.push(vec![n.to_string(), num(x[0]), num(x[1]), num(x.dist(v_inf)), num(st.root_product)]);
            if x.dist(v_inf) <= 1e-6 {
                break;
            }
            x = st.next;
        }
        let header = ["n", "v", "u", "distance", "root_product"].map(String::from);
        out.csv(&format!("{id}.lagrangian.csv"), &header, &rows)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn admissible(
    model: &SystemModel,
    id: &str,
    u_b: Option<State>,
    reg: Option<Regularization>,
    grid: Option<CandidateGrid>,
    audit_samples: Option<usize>,
    curve_v: Option<&[f64]>,
    states: Option<&[(f64, f64)]>,
    seed: u64,
    out: &mut Outputs,
) -> TaskResult<()> {
    let mut report = serde_json::Map::new();
    report.insert("model".into(), json!(model.name()));
    report.insert("seed".into(), json!(seed));
    if let Some(ub) = u_b {
        report.insert("u_b".into(), json!(ub));
    }
    if let (Some(ub), true) = (u_b, model.is_scalar()) {
        let x = ub.x();
        let set = riemann_set_scalar(model, x)?;
        report.insert("riemann_set".into(), json!(set));
        report.insert("riemann_set_text".into(), json!(set.describe()));
        report.insert("excluded_points".into(), json!(excluded_points(model, x)?));
        let layer = reg.map(|r| layer_set_scalar(model, x, r)).transpose()?;
        if let Some(l) = &layer {
            report.insert("layer_set".into(), json!(l));
            report.insert("layer_set_text".into(), json!(l.describe()));
        }
        if let Some(g) = grid {
            if g.points < 2 || !(g.lo < g.hi) {
                return Err(bdlayer::Error::Config("candidate grid needs lo < hi and at least 2 points".into()).into());
            }
            let mut rows = Vec::with_capacity(g.points);
            for i in 0..g.points {
                let u0 = g.lo + (g.hi - g.lo) * i as f64 / (g.points - 1) as f64;
                let mut row = vec![
                    num(u0),
                    flag(bln_check(model, u0, x)),
                    flag(kruzkov_entropy_check(model, u0, x)?.ok),
                    flag(set.contains(u0)),
                ];
                if let Some(l) = &layer {
                    row.push(flag(l.contains(u0)));
                }
                rows.push(row);
            }
            let mut header = ["u0", "boundary_inequality", "kruzkov", "riemann"].map(String::from).to_vec();
            if layer.is_some() {
                header.push("layer".into());
            }
            out.csv(&format!("{id}.membership.csv"), &header, &rows)?;
        }
    }
    if let (Some(ub), Some(vs)) = (u_b, curve_v) {
        let curve = elasto_layer_curve(model, &ub, vs)?;
        let rows: Vec<Vec<String>> = curve.points.iter().map(|p| vec![num(p[0]), num(p[1])]).collect();
        out.csv(&format!("{id}.curve.csv"), &["v_inf", "u_inf"].map(String::from), &rows)?;
        report.insert("curve".into(), json!(curve));
    }
    if let Some(list) = states {
        let mut regions = Vec::new();
        for &(rho, u) in list {
            let region = model.classify_euler_region(rho, u)?;
            let w = SystemModel::euler_conserved(rho, u);
            let eig = model.eigenvalues(&w)?;
            let p = eig.iter().filter(|l| **l < 0.0).count();
            regions.push(json!({ "rho": rho, "u": u, "region": region, "eigenvalues": eig, "p": p }));
        }
        report.insert("regions".into(), json!(regions));
    }
    if let (Some(ub), Some(r), Some(n)) = (u_b, reg, audit_samples) {
        report.insert("audit".into(), json!(inclusion_audit(model, &ub, r, n, seed)?));
    }
    out.json(&format!("{id}.admissible.json"), &serde_json::Value::Object(report))?;
    Ok(())
}
