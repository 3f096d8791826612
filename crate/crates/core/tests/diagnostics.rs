use bdlayer::admissible::riemann_set_scalar;
use bdlayer::diagnostics::{
    boundary_entropy_residual, convergence_study, extract_boundary_trace, StudyFamily, StudyPoint, StudySetup,
};
use bdlayer::layers::{discrete_lf_layer_step, viscous_layer_profile};
use bdlayer::schemes::{run_godunov, run_lf, run_viscous, GridParams, ProblemData};
use bdlayer::systems::EntropyPair;
use bdlayer::{State, SystemModel};

fn s(x: f64) -> State {
    State::scalar(x)
}

#[test]
fn constant_run_has_zero_residuals() {
    let m = SystemModel::burgers();
    let sol = run_lf(&m, 0.2, 0.5, &ProblemData::scalar(0.7, 0.7), &GridParams::new(1.0, 100, 0.5)).unwrap();
    let r = extract_boundary_trace(&sol, (0.25, 0.5), None).unwrap();
    assert!((r.trace.x() - 0.7).abs() < 1e-12);
    assert!(r.entropy_residuals.iter().all(|e| e.value.abs() <= 1e-12));
    assert!(!r.possible_oscillation);
}

#[test]
fn viscous_trace_and_profile() {
    let m = SystemModel::burgers();
    let eps = 0.02;
    let sol = run_viscous(&m, eps, &ProblemData::scalar(-2.0, 1.0), &GridParams::new(25.0 * eps, 875, 0.3).with_snapshots(30))
        .unwrap();
    let r = extract_boundary_trace(&sol, (0.2, 0.3), None).unwrap();
    assert!((r.trace.x() + 2.0).abs() < 0.05, "{:?}", r.trace);
    // y = 0 carries the boundary datum.
    assert!((r.profile[0].x() - 1.0).abs() < 1e-12);
    let layer = viscous_layer_profile(&m, &s(1.0), &s(-2.0), None).unwrap();
    let err = (0..=50)
        .map(|i| 0.1 * i as f64)
        .map(|y| (r.profile_at(y).unwrap().x() - layer.value_at(y).x()).abs())
        .fold(0.0, f64::max);
    assert!(err <= 0.05, "{err}");
    let energy = r.entropy_residuals.iter().find(|e| e.pair == "energy").unwrap().value;
    assert!((energy + 4.5).abs() < 0.3, "{energy}");
    // The Kruzkov supremum is attained at k far from the data (value 0).
    let all = boundary_entropy_residual(&r, &m, &[EntropyPair::energy()]).unwrap();
    assert!(all.abs() < 1e-12);
}

#[test]
fn godunov_has_no_layer() {
    let m = SystemModel::burgers();
    let sol = run_godunov(&m, 0.25, &ProblemData::scalar(-2.0, 1.0), &GridParams::new(1.0, 200, 1.0)).unwrap();
    let r = extract_boundary_trace(&sol, (0.5, 1.0), None).unwrap();
    assert!((r.trace.x() + 2.0).abs() < 0.05);
    assert!((r.profile[1].x() + 2.0).abs() < 0.05);
    let set = riemann_set_scalar(&m, 1.0).unwrap();
    assert!(set.contains_tol(r.trace.x(), 1e-9 + sol.mesh.h));
}

#[test]
fn cubic_godunov_residual_is_small() {
    let m = SystemModel::cubic();
    let sol = run_godunov(&m, 0.05, &ProblemData::scalar(-1.0, 1.5), &GridParams::new(1.0, 200, 1.0)).unwrap();
    let r = extract_boundary_trace(&sol, (0.5, 1.0), None).unwrap();
    assert!(r.worst_residual() <= 10.0 * sol.mesh.h, "{:?}", r.entropy_residuals);
    assert!(riemann_set_scalar(&m, 1.5).unwrap().contains_tol(r.trace.x(), 1e-9 + sol.mesh.h), "{:?}", r.trace);
}

#[test]
fn window_and_probe_are_validated() {
    let m = SystemModel::burgers();
    let sol = run_lf(&m, 0.2, 0.5, &ProblemData::scalar(0.7, 0.7), &GridParams::new(1.0, 20, 0.5)).unwrap();
    assert!(extract_boundary_trace(&sol, (0.2, 0.9), None).is_err());
    assert!(extract_boundary_trace(&sol, (0.2, 0.5), Some(21)).is_err());
}

fn setup(reference: Option<State>) -> StudySetup {
    StudySetup {
        x_max: 1.0,
        x_max_per_param: None,
        t_end: 1.0,
        window: (0.5, 1.0),
        snapshots: 20,
        reference_trace: reference,
        profile_span: 10.0,
        probe_cells: None,
    }
}

#[test]
fn single_point_study_has_no_trend() {
    let m = SystemModel::burgers();
    let t = convergence_study(
        &m,
        &ProblemData::scalar(-2.0, 1.0),
        StudyFamily::Godunov { lambda: 0.25 },
        &[StudyPoint { param: 0.01, cells: 100 }],
        &setup(Some(s(-2.0))),
    )
    .unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.trace_error_trend.is_none() && t.profile_error_trend.is_none());
}

#[test]
fn lf_study_matches_discrete_layer() {
    let m = SystemModel::burgers();
    let points = [100, 200, 400].map(|n| StudyPoint { param: 1.0 / n as f64, cells: n });
    let t = convergence_study(
        &m,
        &ProblemData::scalar(-2.0, 1.0),
        StudyFamily::LaxFriedrichs { lambda: 0.25, q: 0.5 },
        &points,
        &setup(Some(s(-2.0))),
    )
    .unwrap();
    assert!(t.aborted.is_none());
    for row in &t.rows {
        assert!(row.profile_error.unwrap() < 1e-6, "{row:?}");
        // The probe sits 10 cells in, where the layer has decayed to about 3e-4.
        assert!(row.trace_error.unwrap() < 1e-3, "{row:?}");
    }
    assert_eq!(t.trace_error_trend, Some(true));
    // First-cell value is the first layer iterate.
    let v1 = discrete_lf_layer_step(&m, 0.25, 0.5, &s(1.0), &s(-2.0)).unwrap();
    assert!((v1.x() - (4.0 - 15f64.sqrt())).abs() < 1e-12);
}

#[test]
fn study_rejects_unordered_parameters() {
    let m = SystemModel::burgers();
    let pts = [StudyPoint { param: 0.01, cells: 100 }, StudyPoint { param: 0.02, cells: 50 }];
    let r = convergence_study(&m, &ProblemData::scalar(-2.0, 1.0), StudyFamily::Godunov { lambda: 0.25 }, &pts, &setup(None));
    assert!(r.is_err());
}
