//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line; exits nonzero if any fails.

use std::sync::Arc;
use std::time::Instant;

use bdlayer::admissible::{
    bln_check, default_pairs, godunov_set, in_trace_list, inclusion_audit, kruzkov_entropy_check,
    scheme_entropy_check,
};
use bdlayer::diagnostics::{convergence_study, StudyFamily, StudyPoint, StudySetup};
use bdlayer::layers::{
    discrete_layer_membership, discrete_lf_layer_step, discrete_stable_curve, elasto_layer_curve,
    lagrangian_layer_step, manifold_report, shoot_limit_component, viscous_layer_profile, Regularization,
};
use bdlayer::linalg::{Eigenvalues, Mat};
use bdlayer::schemes::{
    discrete_entropy_residuals, run_godunov, run_lf, run_split, DataProfile, FluxSplitting, GridParams,
    GridSolution, LfSplitting, NumericalFlux, ProblemData, UpwindSplitting,
};
use bdlayer::systems::{EntropyPair, EulerRegion};
use bdlayer::{State, SystemModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const BAND: f64 = 1e-4;

fn s(x: f64) -> State {
    State::scalar(x)
}

fn grid() -> Vec<f64> {
    (0..=600).map(|i| -3.0 + 6.0 * i as f64 / 600.0).collect()
}

// ---- closed-form admissible sets --------------------------------------------

/// A finite union of closed intervals and isolated points, restricted to
/// the candidate range.
struct Set {
    intervals: Vec<(f64, f64)>,
    points: Vec<f64>,
    /// Points of the set that layers do not reach.
    excluded: Vec<f64>,
}

impl Set {
    fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| x >= a - 1e-12 && x <= b + 1e-12)
            || self.points.iter().any(|p| (x - p).abs() <= 1e-12)
    }

    fn in_layer_set(&self, x: f64) -> bool {
        self.contains(x) && !self.excluded.iter().any(|p| (x - p).abs() <= 1e-12)
    }

    fn special(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.intervals.iter().flat_map(|&(a, b)| [a, b]).collect();
        out.extend(&self.points);
        out.extend(&self.excluded);
        out.retain(|p| p.is_finite());
        out
    }

    fn near_special(&self, x: f64) -> bool {
        self.special().iter().any(|p| (x - p).abs() < BAND)
    }
}

/// Burgers: `(-inf, -u_B] u {u_B}` for `u_B > 0` (layers miss `-u_B`),
/// `(-inf, 0]` otherwise.
fn burgers_set(ub: f64) -> Set {
    if ub > 0.0 {
        Set { intervals: vec![(f64::NEG_INFINITY, -ub)], points: vec![ub], excluded: vec![-ub] }
    } else {
        Set { intervals: vec![(f64::NEG_INFINITY, 0.0)], points: vec![], excluded: vec![] }
    }
}

/// Roots `u != u_B` of `f(u) = f(u_B)` for `f = (u^3 - 3u)/2`, i.e. of
/// `u^2 + u_B u + u_B^2 - 3 = 0`, ascending.
fn cubic_companions(ub: f64) -> Vec<f64> {
    let disc = 12.0 - 3.0 * ub * ub;
    if disc < 0.0 {
        return vec![];
    }
    let r = disc.sqrt();
    vec![(-ub - r) / 2.0, (-ub + r) / 2.0]
}

fn cubic_set(ub: f64) -> Set {
    let c = cubic_companions(ub);
    if ub < -2.0 || ub > 2.0 {
        Set { intervals: vec![], points: vec![ub], excluded: vec![] }
    } else if ub == -2.0 {
        Set { intervals: vec![], points: vec![-2.0, 1.0], excluded: vec![1.0] }
    } else if ub < -1.0 {
        Set { intervals: vec![(c[0], 1.0)], points: vec![ub], excluded: vec![c[0]] }
    } else if ub <= 1.0 {
        Set { intervals: vec![(-1.0, 1.0)], points: vec![], excluded: vec![] }
    } else if ub < 2.0 {
        Set { intervals: vec![(-1.0, c[1])], points: vec![ub], excluded: vec![c[1]] }
    } else {
        Set { intervals: vec![], points: vec![2.0, -1.0], excluded: vec![-1.0] }
    }
}

// ---- criteria 1-3 ------------------------------------------------------------

struct ScalarProtocol {
    model: SystemModel,
    cases: Vec<f64>,
    set: fn(f64) -> Set,
    /// `lambda / 2Q` of the Lax-Friedrichs window (`Q = 1/2`).
    k: f64,
}

fn layer_member(model: &SystemModel, reg: Regularization, ub: f64, v: f64) -> Result<bool, String> {
    let p = match reg {
        Regularization::Viscous => viscous_layer_profile(model, &s(ub), &s(v), None),
        _ => discrete_layer_membership(model, reg, &s(ub), &s(v), None),
    };
    p.map(|p| p.is_member()).map_err(|e| format!("layer oracle failed at u_B = {ub}, v = {v}: {e}"))
}

fn scalar_sets(p: &ScalarProtocol) -> Outcome {
    let m = &p.model;
    let g = grid();
    let lf = Regularization::lf(p.k, 0.5);
    let (mut compared, mut bad, mut excluded_checked) = (0usize, Vec::new(), 0usize);
    for &ub in &p.cases {
        let set = (p.set)(ub);
        let traces = godunov_set(m, ub, &g).map_err(|e| e.to_string())?;
        for &u0 in &g {
            if set.near_special(u0) {
                continue;
            }
            compared += 1;
            let expect = set.contains(u0);
            let kr = kruzkov_entropy_check(m, u0, ub).map_err(|e| e.to_string())?.ok;
            let checks = [
                ("boundary inequality", bln_check(m, u0, ub), expect),
                ("Kruzkov", kr, expect),
                ("Godunov traces", in_trace_list(&traces, u0), expect),
                ("viscous layer", layer_member(m, Regularization::Viscous, ub, u0)?, expect),
                ("LF layer", layer_member(m, lf, ub, u0)?, expect),
            ];
            for (name, got, want) in checks {
                if got != want {
                    bad.push(format!("{name} at u_B = {ub}, u_0 = {u0}: {got}"));
                }
            }
        }
        // Isolated points and layer exclusions, evaluated exactly.
        for &q in set.points.iter().chain(&set.excluded) {
            let layer = set.in_layer_set(q);
            excluded_checked += usize::from(!layer);
            let kr = kruzkov_entropy_check(m, q, ub).map_err(|e| e.to_string())?.ok;
            let checks = [
                ("boundary inequality", bln_check(m, q, ub), true),
                ("Kruzkov", kr, true),
                ("viscous layer", layer_member(m, Regularization::Viscous, ub, q)?, layer),
                ("LF layer", layer_member(m, lf, ub, q)?, layer),
            ];
            for (name, got, want) in checks {
                if got != want {
                    bad.push(format!("{name} at special point u_B = {ub}, u_0 = {q}: {got}"));
                }
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("{compared} grid comparisons x 5 oracles, {excluded_checked} layer exclusions confirmed"))
    } else {
        Err(format!("{} disagreements, first: {}", bad.len(), bad[0]))
    }
}

fn burgers_protocol() -> ScalarProtocol {
    // sup |f'| over [-24, 24] is 24: k = 1/2 / 24.
    ScalarProtocol {
        model: SystemModel::burgers(),
        cases: vec![-1.5, -0.5, 0.0, 0.5, 1.0, 1.5],
        set: burgers_set,
        k: 1.0 / 48.0,
    }
}

fn cubic_protocol() -> ScalarProtocol {
    // sup |f'| over [-24, 24] is (3 * 576 - 3)/2 = 862.5: k = 1/2 / 862.5.
    ScalarProtocol {
        model: SystemModel::cubic(),
        cases: vec![-2.5, -2.0, -1.5, 0.0, 1.5, 2.0, 2.5],
        set: cubic_set,
        k: 1.0 / 1725.0,
    }
}

fn within_budget(r: Outcome, start: Instant, budget: f64) -> Outcome {
    let secs = start.elapsed().as_secs_f64();
    match r {
        Ok(d) if secs < budget => Ok(d),
        Ok(d) => Err(format!("{d}; runtime {secs:.1} s exceeds {budget} s")),
        Err(e) => Err(e),
    }
}

fn c1() -> Outcome {
    let t = Instant::now();
    within_budget(scalar_sets(&burgers_protocol()), t, 10.0)
}

fn c2() -> Outcome {
    let t = Instant::now();
    let r = scalar_sets(&cubic_protocol());
    // E(1.5) = {u_B^l} with u_B^l ~ 0.3956.
    let l = cubic_companions(1.5)[1];
    if (l - 0.3956).abs() > 1e-4 {
        return Err(format!("u_B^l(1.5) = {l}"));
    }
    within_budget(r, t, 20.0)
}

fn c3() -> Outcome {
    let mut compared = 0usize;
    let mut bad = Vec::new();
    for p in [burgers_protocol(), cubic_protocol()] {
        let m = &p.model;
        let pairs = default_pairs(m);
        for &ub in &p.cases {
            let set = (p.set)(ub);
            let mut candidates: Vec<f64> = grid().into_iter().filter(|u| !set.near_special(*u)).collect();
            candidates.extend(set.points.iter().chain(&set.excluded));
            for u0 in candidates {
                compared += 1;
                let want = set.contains(u0);
                let layer = layer_member(m, Regularization::Godunov, ub, u0)?;
                let entropy = scheme_entropy_check(m, &NumericalFlux::Godunov, &s(u0), &s(ub), None, &pairs, true, (-4.0, 4.0))
                    .map_err(|e| e.to_string())?
                    .ok;
                if layer != want || entropy != want {
                    bad.push(format!("{} u_B = {ub}, u_0 = {u0}: layer {layer}, entropy {entropy}, Riemann {want}", m.name()));
                }
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("{compared} points, layer = entropy = Riemann everywhere"))
    } else {
        Err(format!("{} disagreements, first: {}", bad.len(), bad[0]))
    }
}

// ---- criterion 4 -------------------------------------------------------------

fn c4() -> Outcome {
    let cases: Vec<(SystemModel, State, f64)> = vec![
        (SystemModel::burgers(), s(1.0), 0.1),
        (SystemModel::cubic(), s(1.5), 0.04),
        (SystemModel::elastodynamics(), State::pair(2.0, 0.0), 0.1),
    ];
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (m, ub, lambda) in &cases {
        for reg in [Regularization::Viscous, Regularization::lf(*lambda, 0.5), Regularization::Godunov] {
            let r = inclusion_audit(m, ub, reg, 1000, 7).map_err(|e| format!("{} {}: {e}", m.name(), reg.label()))?;
            let tag = format!("{}/{}: {} members, {} violations", m.name(), reg.label(), r.layer_members, r.violations.len());
            if !r.violations.is_empty() || r.layer_members == 0 {
                failures.push(tag.clone());
            }
            lines.push(tag);
        }
    }
    if failures.is_empty() {
        Ok(lines.join("; "))
    } else {
        Err(failures.join("; "))
    }
}

// ---- criteria 5-6 ------------------------------------------------------------

fn c5() -> Outcome {
    let t = Instant::now();
    let m = SystemModel::burgers();
    let data = ProblemData::scalar(-2.0, 1.0);
    // x_max = 25 eps; h = eps/25, eps/35, eps/50.
    let points = [
        StudyPoint { param: 0.04, cells: 625 },
        StudyPoint { param: 0.02, cells: 875 },
        StudyPoint { param: 0.01, cells: 1250 },
    ];
    let setup = StudySetup {
        x_max: 1.0,
        x_max_per_param: Some(25.0),
        t_end: 0.3,
        window: (0.2, 0.3),
        snapshots: 30,
        reference_trace: Some(s(-2.0)),
        profile_span: 5.0,
        probe_cells: None,
    };
    let table = convergence_study(&m, &data, StudyFamily::Viscous, &points, &setup).map_err(|e| e.to_string())?;
    if let Some(a) = &table.aborted {
        return Err(format!("study aborted: {a}"));
    }
    let errs: Vec<f64> = table.rows.iter().map(|r| r.profile_error.unwrap_or(f64::INFINITY)).collect();
    let trace = table.rows.last().map(|r| r.trace.x()).unwrap_or(f64::NAN);
    let detail = format!("trace {trace:.4}, profile errors {errs:.4?}");
    if !((trace + 2.0).abs() <= 0.05) {
        return Err(format!("{detail}: trace off"));
    }
    if errs.iter().any(|e| *e > 0.05) || !errs.windows(2).all(|w| w[1] < w[0]) {
        return Err(format!("{detail}: profile errors not <= 0.05 and decreasing"));
    }
    within_budget(Ok(detail), t, 60.0)
}

fn c6() -> Outcome {
    let m = SystemModel::burgers();
    // lambda / 2Q = 0.25 with Q = 1/2.
    let (lambda, q) = (0.25, 0.5);
    let v_inf = s(-2.0);
    let first = discrete_lf_layer_step(&m, lambda, q, &s(1.0), &v_inf).map_err(|e| e.to_string())?.x();
    let exact = 4.0 - 15f64.sqrt();
    if (first - exact).abs() > 1e-10 {
        return Err(format!("first iterate {first}, expected {exact}"));
    }
    let mut iterates = vec![1.0];
    let mut v = s(1.0);
    let mut reached = None;
    for n in 1..=200 {
        v = discrete_lf_layer_step(&m, lambda, q, &v, &v_inf).map_err(|e| e.to_string())?;
        iterates.push(v.x());
        if reached.is_none() && (v.x() + 2.0).abs() <= 1e-6 {
            reached = Some(n);
        }
    }
    let Some(n_conv) = reached else {
        return Err(format!("no convergence in 200 steps, last iterate {}", v.x()));
    };
    let sol = run_lf(&m, lambda, q, &ProblemData::scalar(-2.0, 1.0), &GridParams::new(1.0, 200, 2.0))
        .map_err(|e| e.to_string())?;
    let cells = &sol.last().states;
    let gap = (1..=10).map(|j| (cells[j].x() - iterates[j]).abs()).fold(0.0, f64::max);
    let detail = format!("first iterate error {:.1e}, |v_n + 2| <= 1e-6 at n = {n_conv}, cells 1..10 vs iterates {gap:.2e}", (first - exact).abs());
    if gap <= 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- criterion 7 -------------------------------------------------------------

fn c7() -> Outcome {
    let a = [[-5.0, 5.0], [-3.0, 3.0]];
    let v = State::pair(0.0, 0.0);
    let wrong = SystemModel::linear2(a, [5.0, 1.0]).map_err(|e| e.to_string())?;
    let r = manifold_report(&wrong, Regularization::Viscous, None, &v).map_err(|e| e.to_string())?;
    let mu = r.viscous_eigenvalues.clone().unwrap_or_default();
    if (r.stable_dim, r.p, r.mismatch) != (0, 1, true) || mu.len() != 2 || mu[0].abs() > 1e-10 || (mu[1] - 2.0).abs() > 1e-10 {
        return Err(format!("B = diag(5,1): stable_dim {}, p {}, mismatch {}, eigenvalues {mu:?}", r.stable_dim, r.p, r.mismatch));
    }
    let right = SystemModel::linear2(a, [1.0, 1.0]).map_err(|e| e.to_string())?;
    let r = manifold_report(&right, Regularization::Viscous, None, &v).map_err(|e| e.to_string())?;
    let mu = r.viscous_eigenvalues.clone().unwrap_or_default();
    if (r.stable_dim, r.p, r.mismatch) != (1, 1, false) || mu.len() != 2 || (mu[0] + 2.0).abs() > 1e-10 || mu[1].abs() > 1e-10 {
        return Err(format!("B = I: stable_dim {}, p {}, mismatch {}, eigenvalues {mu:?}", r.stable_dim, r.p, r.mismatch));
    }
    // A r = -2 r: -5 r1 + 5 r2 = -2 r1 gives r parallel to (5, 3).
    let t = r.tangent_basis[0];
    let off = (t[0] * 3.0 - t[1] * 5.0).abs() / t.norm();
    if off > 1e-10 {
        return Err(format!("tangent {t:?} not parallel to (5, 3)"));
    }
    Ok("diag(5,1): stable_dim 0 < p = 1, eigenvalues (0, 2); B = I: stable_dim 1 along (5, 3), eigenvalues (-2, 0)".into())
}

// ---- criterion 8 -------------------------------------------------------------

fn fd_jacobian(f: impl Fn(&State) -> Result<State, String>, x: &State, h: f64) -> Result<Mat, String> {
    let n = x.dim();
    let mut cols = Vec::new();
    for j in 0..n {
        let e = State::basis(n, j) * h;
        cols.push((f(&(*x + e))? - f(&(*x - e))?) * (0.5 / h));
    }
    Ok(Mat::from_columns(&cols))
}

fn real_sorted(m: &Mat) -> Result<Vec<f64>, String> {
    if m.dim() == 1 {
        return Ok(vec![m.get(0, 0)]);
    }
    match m.eigenvalues() {
        Eigenvalues::Real([a, b]) => Ok(vec![a.min(b), a.max(b)]),
        Eigenvalues::Complex { re, im } => Err(format!("complex eigenvalues {re} +- {im} i")),
    }
}

fn all_models() -> Vec<SystemModel> {
    let a = [[-5.0, 5.0], [-3.0, 3.0]];
    vec![
        SystemModel::burgers(),
        SystemModel::cubic(),
        SystemModel::linear2(a, [1.0, 1.0]).unwrap(),
        SystemModel::linear2(a, [5.0, 1.0]).unwrap(),
        SystemModel::elastodynamics(),
        SystemModel::euler(2.0).unwrap(),
        SystemModel::lagrangian_gas(),
    ]
}

fn random_states(m: &SystemModel, n: usize, rng: &mut ChaCha8Rng) -> Vec<State> {
    (0..n)
        .map(|_| match m.name() {
            "burgers" | "cubic" => s(rng.gen_range(-3.0..3.0)),
            "linear2" => State::pair(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
            "euler_isentropic" => {
                let rho: f64 = rng.gen_range(0.2..3.0);
                State::pair(rho, rho * rng.gen_range(-2.0..2.0))
            }
            _ => State::pair(rng.gen_range(0.2..3.0), rng.gen_range(-2.0..2.0)),
        })
        .collect()
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut at = String::new();
    for m in all_models() {
        let psystem = matches!(m.name(), "elastodynamics" | "lagrangian_gas");
        for v in random_states(&m, 20, &mut rng) {
            let lam = m.eigenvalues(&v).map_err(|e| e.to_string())?;
            let speed = lam.iter().fold(1.0f64, |a, l| a.max(l.abs()));
            let k = 0.4 / speed;
            let a: Vec<f64> = lam.iter().map(|l| (1.0 + k * l) / (1.0 - k * l)).collect();
            let h = 1e-5 * (1.0 + v.norm());
            let j = fd_jacobian(|x| discrete_lf_layer_step(&m, k, 0.5, x, &v).map_err(|e| e.to_string()), &v, h)?;
            let num = real_sorted(&j)?;
            for (ai, ni) in a.iter().zip(&num) {
                if (ai - ni).abs() > worst {
                    worst = (ai - ni).abs();
                    at = format!("{} at {v:?}", m.name());
                }
            }
            if psystem && !(0.0 < a[0] && a[0] < 1.0 && 1.0 < a[1]) {
                return Err(format!("{} at {v:?}: amplification {a:?} not ordered 0 < a1 < 1 < a2", m.name()));
            }
        }
    }
    if worst > 1e-6 {
        return Err(format!("analytic vs finite-difference amplification: {worst:.2e} ({at})"));
    }
    let mut worst_lag = 0.0f64;
    for v_inf in [1.0, 2.0, 5.0] {
        let lim = State::pair(v_inf, 0.3);
        let j = fd_jacobian(|x| lagrangian_layer_step(0.2, x, &lim).map(|s| s.next).map_err(|e| e.to_string()), &lim, 1e-6)?;
        let num = real_sorted(&j)?;
        let a1 = (1.0 - 0.2 / v_inf) / (1.0 + 0.2 / v_inf);
        worst_lag = worst_lag.max((num[0] - a1).abs()).max((num[1] - 1.0 / a1).abs());
    }
    let detail = format!("7 models x 20 states: {worst:.1e}; Lagrangian a_1 vs Jacobian: {worst_lag:.1e}");
    if worst_lag <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- criterion 9 -------------------------------------------------------------

/// `u_inf = -+ sqrt(2 int_{v_inf}^2 (sigma(s) - sigma(v_inf)) ds)` for
/// `sigma(v) = v + v^3/3`, by the antiderivative.
fn elasto_closed_form(v_inf: f64) -> f64 {
    let sigma = |v: f64| v + v * v * v / 3.0;
    let big = |v: f64| v * v / 2.0 + v.powi(4) / 12.0;
    let i = big(2.0) - big(v_inf) - sigma(v_inf) * (2.0 - v_inf);
    let mag = (2.0 * i).sqrt();
    if v_inf < 2.0 {
        -mag
    } else {
        mag
    }
}

fn c9() -> Outcome {
    let m = SystemModel::elastodynamics();
    let base = State::pair(2.0, 0.0);
    let unit = elasto_layer_curve(&m, &base, &[1.0]).map_err(|e| e.to_string())?.points[0][1];
    let target = -(17.0f64 / 6.0).sqrt();
    if (unit - target).abs() > 1e-9 {
        return Err(format!("quadrature at v_inf = 1: {unit}, expected {target}"));
    }
    let vs: Vec<f64> = (0..=10).map(|i| 1.5 + 0.1 * i as f64).filter(|v| (v - 2.0).abs() > 1e-9).collect();
    let curve = elasto_layer_curve(&m, &base, &vs).map_err(|e| e.to_string())?;
    let (mut worst_quad, mut worst_shoot) = (0.0f64, 0.0f64);
    for (v, p) in vs.iter().zip(&curve.points) {
        worst_quad = worst_quad.max((p[1] - elasto_closed_form(*v)).abs());
        let shot = shoot_limit_component(&m, Regularization::Viscous, &base, *v, p[1] + 0.1, 0.5).map_err(|e| e.to_string())?;
        worst_shoot = worst_shoot.max((shot - p[1]).abs());
    }
    let detail = format!(
        "-sqrt(17/6) error {:.1e}; quadrature vs antiderivative {worst_quad:.1e}; shooting vs quadrature {worst_shoot:.1e} on |v - 2| <= 0.5",
        (unit - target).abs()
    );
    if worst_shoot <= 1e-3 && worst_quad <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- criterion 10 ------------------------------------------------------------

fn c10() -> Outcome {
    let lambda = 0.2;
    let m = SystemModel::lagrangian_gas();
    let (mut fixed, mut product) = (0.0f64, 0.0f64);
    let mut slowest = 0usize;
    let mut starts = 0usize;
    for lim in [State::pair(1.0, 0.3), State::pair(2.0, -0.5), State::pair(5.0, 1.0)] {
        let st = lagrangian_layer_step(lambda, &lim, &lim).map_err(|e| e.to_string())?;
        fixed = fixed.max(st.next.dist(&lim));
        product = product.max((st.root_product - 1.0).abs());
        // The Lagrangian recursion is the Lax-Friedrichs layer step with lambda/2Q = lambda.
        let curve = discrete_stable_curve(&m, lambda, 0.5, &lim, 0.3).map_err(|e| e.to_string())?;
        for start in curve.iter().filter(|p| p.dist(&lim) > 0.05) {
            starts += 1;
            let mut x = *start;
            let mut hit = None;
            for n in 1..=200 {
                let st = lagrangian_layer_step(lambda, &x, &lim).map_err(|e| e.to_string())?;
                product = product.max((st.root_product - 1.0).abs());
                x = st.next;
                if x.dist(&lim) <= 1e-6 {
                    hit = Some(n);
                    break;
                }
            }
            match hit {
                Some(n) => slowest = slowest.max(n),
                None => return Err(format!("start {start:?} toward {lim:?}: no convergence in 200 steps")),
            }
        }
    }
    let detail = format!(
        "fixed point {fixed:.1e}, root product {product:.1e}, {starts} on-curve starts converge within {slowest} steps"
    );
    if fixed <= 1e-12 && product <= 1e-12 && starts > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- criterion 11 ------------------------------------------------------------

fn max_abs_df(model: &str, lo: f64, hi: f64) -> f64 {
    let df = |u: f64| if model == "burgers" { u } else { 1.5 * u * u - 1.5 };
    let mut m = df(lo).abs().max(df(hi).abs());
    if lo < 0.0 && hi > 0.0 {
        m = m.max(df(0.0).abs());
    }
    m
}

fn random_run(rng: &mut ChaCha8Rng) -> Result<(String, GridSolution), String> {
    let burgers = rng.gen_bool(0.5);
    let m = if burgers { SystemModel::burgers() } else { SystemModel::cubic() };
    let (a, b, ub) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let data = ProblemData {
        u_initial: DataProfile::piecewise(vec![0.4], vec![s(a), s(b)]).map_err(|e| e.to_string())?,
        u_boundary: DataProfile::scalar(ub),
    };
    let lo = a.min(b).min(ub);
    let hi = a.max(b).max(ub);
    let speed = max_abs_df(m.name(), lo, hi).max(1e-3);
    let params = GridParams::new(1.0, 100, 0.4);
    let scheme = rng.gen_range(0..if burgers { 4 } else { 3 });
    let q = rng.gen_range(0.25..0.5);
    let (label, sol) = match scheme {
        0 => ("lax_friedrichs", run_lf(&m, 0.9 * q / speed, q, &data, &params)),
        1 => ("godunov", run_godunov(&m, 0.45 / speed, &data, &params)),
        2 => {
            let lambda = 0.9 * q / speed;
            let sp: Arc<dyn FluxSplitting> = Arc::new(LfSplitting { lambda, q });
            ("lf_splitting", run_split(&m, sp, lambda, &data, &params))
        }
        _ => ("upwind_splitting", run_split(&m, Arc::new(UpwindSplitting), 0.9 / speed, &data, &params)),
    };
    let sol = sol.map_err(|e| format!("{label} on {}: {e}", m.name()))?;
    Ok((format!("{label} on {} (u_I = {a:.2}/{b:.2}, u_B = {ub:.2})", m.name()), sol))
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_entropy, mut worst_mass, mut worst_max) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let (label, sol) = random_run(&mut rng)?;
        let m = &sol.model;
        let mut pairs = vec![EntropyPair::energy()];
        pairs.extend([-1.2, -0.4, 0.1, 0.8, 1.5].map(EntropyPair::kruzkov));
        let res = discrete_entropy_residuals(&sol, &pairs).map_err(|e| format!("{label}: {e}"))?;
        worst_entropy = res.iter().fold(worst_entropy, |w, r| w.max(*r));
        let flux = sol.numerical_flux().cloned().ok_or("conservative run without a flux")?;
        let lambda = sol.mesh.lambda;
        let data_vals = [sol.data.u_initial.eval(0.0).x(), sol.data.u_initial.eval(1.0).x(), sol.data.u_boundary.eval(0.0).x()];
        let lo = data_vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        sol.replay(|_, _, old, new| {
            let inflow = flux.flux(m, &old[0], &old[1])?.x();
            let outflow = m.flux(&old[old.len() - 1]).x();
            let change: f64 = old.iter().zip(new).skip(1).map(|(o, n)| n.x() - o.x()).sum();
            worst_mass = worst_mass.max((change - lambda * (inflow - outflow)).abs());
            for u in &new[1..] {
                worst_max = worst_max.max(lo - u.x()).max(u.x() - hi);
            }
            Ok(())
        })
        .map_err(|e| format!("{label}: {e}"))?;
        if worst_entropy > 1e-12 || worst_mass > 1e-11 || worst_max > 1e-12 {
            return Err(format!(
                "{label}: entropy {worst_entropy:.1e}, mass balance {worst_mass:.1e}, range excess {worst_max:.1e}"
            ));
        }
    }
    Ok(format!(
        "50 runs: entropy residual {worst_entropy:.1e}, mass balance {worst_mass:.1e}, range excess {:.1e}",
        worst_max.max(0.0)
    ))
}

// ---- criterion 12 ------------------------------------------------------------

fn c12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut jac, mut compat) = (0.0f64, 0.0f64);
    for m in all_models() {
        for u in random_states(&m, 20, &mut rng) {
            let h = 1e-5 * (1.0 + u.norm());
            let fd = fd_jacobian(|x| Ok(m.flux(x)), &u, h)?;
            let j = m.jacobian(&u);
            jac = jac.max(fd.sub(&j).norm() / (1.0 + j.norm()));
            for pair in m.entropies() {
                let n = u.dim();
                let ev = pair.eval(&m, &u).map_err(|e| e.to_string())?;
                let mut worst = 0.0f64;
                for c in 0..n {
                    let e = State::basis(n, c) * h;
                    let fp = pair.eval(&m, &(u + e)).map_err(|e| e.to_string())?.f;
                    let fm = pair.eval(&m, &(u - e)).map_err(|e| e.to_string())?.f;
                    // dF/du_c = sum_i dU/du_i df_i/du_c
                    let expect: f64 = (0..n).map(|i| ev.grad[i] * j.get(i, c)).sum();
                    worst = worst.max(((fp - fm) / (2.0 * h) - expect).abs() / (1.0 + expect.abs()));
                }
                compat = compat.max(worst);
            }
        }
    }
    // gamma = 2: c = sqrt(2 rho); regions by the signs of u - c and u + c.
    let cases = [
        (2.0, -3.0, EulerRegion::I),
        (2.0, -2.0, EulerRegion::II),
        (2.0, 0.0, EulerRegion::III),
        (2.0, 2.0, EulerRegion::IV),
        (2.0, 3.0, EulerRegion::V),
        (0.5, -1.5, EulerRegion::I),
        (0.5, -1.0, EulerRegion::II),
        (0.5, 0.5, EulerRegion::III),
        (0.5, 1.0, EulerRegion::IV),
        (0.5, 2.0, EulerRegion::V),
        (4.5, -3.0, EulerRegion::II),
        (4.5, 3.5, EulerRegion::V),
    ];
    let euler = SystemModel::euler(2.0).unwrap();
    let wrong: Vec<String> = cases
        .iter()
        .filter_map(|&(rho, u, want)| match euler.classify_euler_region(rho, u) {
            Ok(r) if r == want => None,
            other => Some(format!("(rho {rho}, u {u}): {other:?}, expected {want:?}")),
        })
        .collect();
    let detail = format!("Jacobian {jac:.1e}, entropy compatibility {compat:.1e}, Euler regions {}/12", 12 - wrong.len());
    if jac <= 1e-6 && compat <= 1e-6 && wrong.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail} {}", wrong.join(", ")))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("C1 convex scalar admissible sets", c1),
        ("C2 cubic admissible sets", c2),
        ("C3 Godunov coincidence", c3),
        ("C4 inclusion audits", c4),
        ("C5 viscous boundary layer", c5),
        ("C6 discrete Lax-Friedrichs layer", c6),
        ("C7 wrong-viscosity counterexample", c7),
        ("C8 amplification factors", c8),
        ("C9 elastodynamics layer curve", c9),
        ("C10 Lagrangian recursion", c10),
        ("C11 scheme certificates", c11),
        ("C12 structural checks", c12),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let r = run();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.2} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.2} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
