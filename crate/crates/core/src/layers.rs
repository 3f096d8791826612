//! Boundary-layer profiles and stable-manifold data.
//!
//! A continuous layer solves `B(v) v' = f(v) - f(v_inf)`, `v(0) = u_B`,
//! `v(y) -> v_inf` as `y -> +inf`. A Lax-Friedrichs layer solves
//!
//! ```text
//! H(v(y), v(y+1)) = v(y+1) - v(y) - k (f(v(y)) + f(v(y+1)) - 2 f(v_inf)) = 0,   k = lambda / (2Q),
//! ```
//!
//! with `v(0) = u_B`. A Godunov layer exists iff `v_inf = R(u_B, v_inf)`.
//!
//! Membership of `u_B` in the layer set of `v_inf` is decided by forward
//! integration (or iteration) when `v_inf` is a sink or a source of the
//! layer dynamics. At a saddle, forward integration from a point on the
//! stable manifold drifts off it through round-off, so the stable manifold
//! is traced backward from `v_inf` and `u_B` is tested against the traced
//! curve (shooting).

use serde::Serialize;

use crate::admissible::CurveSet;
use crate::error::{Error, Result};
use crate::linalg::{Mat, State};
use crate::ode::{self, Control, OdeOptions};
use crate::quad;
use crate::riemann;
use crate::roots;
use crate::systems::{generic_eigen, ModelKind, SystemModel};
use crate::tolerances::{
    tol_char, tol_conv, DIVERGENCE_FACTOR, LAYER_HORIZON_CAP_CONTINUOUS, LAYER_HORIZON_CAP_DISCRETE,
    LAYER_HORIZON_CONTINUOUS, LAYER_HORIZON_DISCRETE, NEWTON_TOL, STALL_SPEED,
};

/// The regularization whose boundary layers are considered.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Regularization {
    /// `eps B(u) u_xx` with the model's viscosity matrix.
    Viscous,
    LaxFriedrichs { lambda: f64, q: f64 },
    Godunov,
}

impl Regularization {
    pub fn lf(lambda: f64, q: f64) -> Self {
        Regularization::LaxFriedrichs { lambda, q }
    }

    pub fn label(&self) -> String {
        match self {
            Regularization::Viscous => "viscous".into(),
            Regularization::LaxFriedrichs { lambda, q } => format!("lax_friedrichs(lambda={lambda}, q={q})"),
            Regularization::Godunov => "godunov".into(),
        }
    }
}

/// `lambda / (2Q)`.
pub fn lf_coefficient(lambda: f64, q: f64) -> f64 {
    lambda / (2.0 * q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Continuous,
    Discrete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converged,
    Diverged,
    Stalled,
    HorizonReached,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileSample {
    pub y: f64,
    pub state: State,
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerProfile {
    pub kind: ProfileKind,
    pub samples: Vec<ProfileSample>,
    /// `v'(y)` at each sample (continuous profiles only).
    #[serde(skip)]
    pub slopes: Vec<State>,
    pub u_b: State,
    pub v_infinity: State,
    pub verdict: Verdict,
    pub distance_at_horizon: f64,
    pub min_distance: f64,
    /// Largest `y` reached.
    pub horizon: f64,
    /// Some eigenvalue of the flux Jacobian at `v_inf` vanishes.
    pub characteristic: bool,
    /// Distance from `u_B` to the traced stable manifold (saddle case).
    pub shooting_residual: Option<f64>,
    pub note: Option<String>,
}

impl LayerProfile {
    pub fn is_member(&self) -> bool {
        self.verdict == Verdict::Converged
    }

    /// Profile value at `y`: cubic Hermite interpolation for continuous
    /// profiles, `v(floor(y))` for discrete ones. Beyond the last sample the
    /// last value is returned.
    pub fn value_at(&self, y: f64) -> State {
        let s = &self.samples;
        if y <= s[0].y {
            return s[0].state;
        }
        let k = s.partition_point(|p| p.y <= y);
        if k >= s.len() {
            return s[s.len() - 1].state;
        }
        match self.kind {
            ProfileKind::Discrete => s[k - 1].state,
            ProfileKind::Continuous => {
                let (a, b) = (&s[k - 1], &s[k]);
                let h = b.y - a.y;
                if self.slopes.len() != s.len() || h <= 0.0 {
                    let t = (y - a.y) / h;
                    return a.state + (b.state - a.state) * t;
                }
                hermite(a.state, self.slopes[k - 1], b.state, self.slopes[k], h, (y - a.y) / h)
            }
        }
    }

    fn constant(kind: ProfileKind, u_b: State, characteristic: bool) -> Self {
        LayerProfile {
            kind,
            samples: vec![ProfileSample { y: 0.0, state: u_b }],
            slopes: vec![State::zeros(u_b.dim())],
            u_b,
            v_infinity: u_b,
            verdict: Verdict::Converged,
            distance_at_horizon: 0.0,
            min_distance: 0.0,
            horizon: 0.0,
            characteristic,
            shooting_residual: None,
            note: None,
        }
    }
}

fn hermite(p0: State, m0: State, p1: State, m1: State, h: f64, t: f64) -> State {
    let t2 = t * t;
    let t3 = t2 * t;
    p0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * ((t3 - 2.0 * t2 + t) * h)
        + p1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * ((t3 - t2) * h)
}

/// Stable-manifold data at a limit state.
#[derive(Clone, Debug, Serialize)]
pub struct ManifoldReport {
    pub regularization: Regularization,
    pub base: State,
    /// Number of strictly negative eigenvalues of the flux Jacobian.
    pub p: usize,
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues of `B^{-1} grad f` (viscous case).
    pub viscous_eigenvalues: Option<Vec<f64>>,
    /// `a_i = (1 + k lambda_i) / (1 - k lambda_i)` (Lax-Friedrichs case).
    pub amplification: Option<Vec<f64>>,
    /// Eigenvalues of the step-map Jacobian `(I - kA)^{-1}(I + kA)` computed numerically.
    pub step_jacobian_eigenvalues: Option<Vec<f64>>,
    pub stable_dim: usize,
    /// Unit vectors spanning the tangent space of the stable manifold.
    pub tangent_basis: Vec<State>,
    /// `l_j . (u_B - v_inf)` for `j = p+1..N`, when `u_B` is given.
    pub predicate_residuals: Vec<f64>,
    pub mismatch: bool,
    pub characteristic: bool,
}

/// Orients a direction so that its first non-negligible component is positive.
fn orient(v: State) -> State {
    let n = v.norm();
    let v = if n > 0.0 { v * (1.0 / n) } else { v };
    let lead = v.as_slice().iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
    if lead < 0.0 {
        -v
    } else {
        v
    }
}

/// Eigenvalues (ascending) and unit eigenvectors of a real 2x2 or 1x1 matrix
/// with real distinct eigenvalues.
fn real_eigen(m: &Mat) -> Result<(Vec<f64>, Vec<State>)> {
    let es = generic_eigen(m)?;
    Ok((es.eigenvalues.clone(), es.right.iter().map(|r| orient(*r)).collect()))
}

/// Stable-manifold report for a limit state `v_inf` (and optionally `u_B`).
pub fn manifold_report(
    model: &SystemModel,
    regularization: Regularization,
    u_b: Option<&State>,
    v_inf: &State,
) -> Result<ManifoldReport> {
    let es = model.eigen_structure(v_inf)?;
    let a = model.jacobian(v_inf);
    let n = model.dim();
    let mut report = ManifoldReport {
        regularization,
        base: *v_inf,
        p: es.p,
        eigenvalues: es.eigenvalues.clone(),
        viscous_eigenvalues: None,
        amplification: None,
        step_jacobian_eigenvalues: None,
        stable_dim: 0,
        tangent_basis: vec![],
        predicate_residuals: vec![],
        mismatch: false,
        characteristic: es.characteristic,
    };
    match regularization {
        Regularization::Viscous => {
            let m = model.viscosity(v_inf).inverse()?.mul_mat(&a);
            let (mu, vecs) = real_eigen(&m)?;
            let tol = tol_char(mu.iter().fold(0.0f64, |x, l| x.max(l.abs())));
            for (l, r) in mu.iter().zip(&vecs) {
                if *l < -tol {
                    report.stable_dim += 1;
                    report.tangent_basis.push(*r);
                }
            }
            report.viscous_eigenvalues = Some(mu);
        }
        Regularization::LaxFriedrichs { lambda, q } => {
            let k = lf_coefficient(lambda, q);
            let amp: Vec<f64> = es.eigenvalues.iter().map(|l| (1.0 + k * l) / (1.0 - k * l)).collect();
            let tol = tol_char(es.eigenvalues.iter().fold(0.0f64, |x, l| x.max(l.abs()))) * k;
            for (ai, r) in amp.iter().zip(&es.right) {
                if ai.abs() < 1.0 - tol {
                    report.stable_dim += 1;
                    report.tangent_basis.push(orient(*r));
                }
            }
            let id = Mat::identity(n);
            let jac = id.sub(&a.scale(k)).inverse()?.mul_mat(&id.add(&a.scale(k)));
            report.step_jacobian_eigenvalues = Some(real_eigen(&jac)?.0);
            report.amplification = Some(amp);
        }
        Regularization::Godunov => {
            // The Godunov layer is trivial; the stable directions are those of the
            // incoming characteristic fields.
            report.stable_dim = es.p;
            report.tangent_basis = es.right[..es.p].iter().map(|r| orient(*r)).collect();
        }
    }
    if let Some(ub) = u_b {
        let d = *ub - *v_inf;
        report.predicate_residuals = es.left[es.p..].iter().map(|l| l.dot(&d)).collect();
    }
    report.mismatch = report.stable_dim != report.p;
    Ok(report)
}

// ---- continuous layers -----------------------------------------------------

struct ViscousField<'a> {
    model: &'a SystemModel,
    binv: Mat,
    v_inf: State,
    f_inf: State,
}

impl ViscousField<'_> {
    /// `z' = B^{-1} (f(v_inf + z) - f(v_inf))` in deviation coordinates.
    fn rhs(&self, z: &State) -> Result<State> {
        let v = self.v_inf + *z;
        if !self.model.in_region(&v) {
            return Err(Error::Domain(format!("layer trajectory left the state region at {v:?}")));
        }
        Ok(self.binv.mul_vec(&(self.model.flux(&v) - self.f_inf)))
    }
}

fn distances_monotone(d: &[f64], scale: f64) -> bool {
    d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14 * scale)
}

fn finish_verdict(dist: &[f64], tol: f64, diverged: bool, stalled: bool, scale: f64) -> Verdict {
    let last = *dist.last().unwrap_or(&f64::INFINITY);
    if diverged {
        Verdict::Diverged
    } else if last <= tol && distances_monotone(&dist[dist.len() - dist.len().div_ceil(4)..], scale) {
        Verdict::Converged
    } else if stalled {
        Verdict::Stalled
    } else {
        Verdict::HorizonReached
    }
}

fn continuous_horizon(rate: Option<f64>, scale: f64, tol: f64, requested: Option<f64>) -> f64 {
    if let Some(y) = requested {
        return y;
    }
    match rate {
        Some(r) if r > 0.0 => {
            let need = 3.0 * (scale / tol).ln().max(1.0) / r;
            need.max(LAYER_HORIZON_CONTINUOUS).min(LAYER_HORIZON_CAP_CONTINUOUS)
        }
        _ => LAYER_HORIZON_CONTINUOUS,
    }
}

fn forward_continuous(
    field: &ViscousField,
    u_b: &State,
    y_max: f64,
    characteristic: bool,
) -> LayerProfile {
    let v_inf = field.v_inf;
    let tol = tol_conv(v_inf.norm());
    let scale = 1.0 + u_b.norm() + v_inf.norm();
    let limit = DIVERGENCE_FACTOR * scale;
    let mut samples = Vec::new();
    let mut slopes = Vec::new();
    let mut dist = Vec::new();
    let mut diverged = false;
    let mut stalled = false;
    let opts = OdeOptions { atol: 1e-14 * scale, ..OdeOptions::default() };
    let z0 = *u_b - v_inf;
    let out = ode::integrate(|_, z| field.rhs(z), z0, 0.0, y_max, &opts, |y, z, dz| {
        let d = z.norm();
        samples.push(ProfileSample { y, state: v_inf + *z });
        slopes.push(*dz);
        dist.push(d);
        if d <= 1e-2 * tol {
            return Control::Stop;
        }
        if d > limit {
            diverged = true;
            return Control::Stop;
        }
        if dz.norm() < STALL_SPEED && d > tol {
            stalled = true;
            return Control::Stop;
        }
        Control::Continue
    });
    let mut note = None;
    if let Err(e) = &out {
        diverged = true;
        note = Some(e.to_string());
    }
    let verdict = finish_verdict(&dist, tol, diverged, stalled, scale);
    LayerProfile {
        kind: ProfileKind::Continuous,
        horizon: samples.last().map(|s| s.y).unwrap_or(0.0),
        samples,
        slopes,
        u_b: *u_b,
        v_infinity: v_inf,
        verdict,
        distance_at_horizon: *dist.last().unwrap_or(&f64::INFINITY),
        min_distance: dist.iter().cloned().fold(f64::INFINITY, f64::min),
        characteristic,
        shooting_residual: None,
        note,
    }
}

/// A traced branch of a stable manifold: nodes at increasing parameter `t`
/// (backward time for flows, fractional iteration count for maps).
#[derive(Clone, Debug)]
struct Branch {
    t: Vec<f64>,
    z: Vec<State>,
}

/// Closest point of a traced stable manifold to a target.
#[derive(Clone, Copy, Debug)]
struct ClosestPoint {
    branch: usize,
    t: f64,
    point: State,
    signed_distance: f64,
}

trait Manifold {
    fn branches(&self) -> &[Branch; 2];
    /// Deviation `z` at parameter `t` on a branch, refined beyond the nodes.
    fn point(&self, branch: usize, t: f64) -> Result<State>;

    fn closest(&self, target_z: &State) -> Result<ClosestPoint> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (b, br) in self.branches().iter().enumerate() {
            for (k, z) in br.z.iter().enumerate() {
                let d = z.dist(target_z);
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((b, k, d));
                }
            }
        }
        let (b, k, _) = best.ok_or_else(|| Error::SolverFailure("empty stable manifold trace".into()))?;
        let br = &self.branches()[b];
        let lo = if k > 0 { br.t[k - 1] } else { br.t[0] };
        let hi = if k + 1 < br.t.len() { br.t[k + 1] } else { br.t[k] };
        let (t, _) = if hi > lo {
            roots::golden_min(
                |t| self.point(b, t).map(|z| z.dist(target_z)).unwrap_or(f64::INFINITY),
                lo,
                hi,
                1e-13 * (1.0 + hi.abs()),
            )
        } else {
            (br.t[k], 0.0)
        };
        let z = self.point(b, t)?;
        let d = z.dist(target_z);
        // Orientation: from the end of branch 1 through v_inf to the end of branch 0.
        let dt = 1e-6 * (1.0 + t.abs());
        let za = self.point(b, (t - dt).max(br.t[0]))?;
        let zb = self.point(b, t + dt)?;
        let mut tangent = zb - za;
        if b == 1 {
            tangent = -tangent;
        }
        let c = tangent.cross(&(*target_z - z));
        Ok(ClosestPoint { branch: b, t, point: z, signed_distance: if c < 0.0 { -d } else { d } })
    }
}

struct FlowManifold<'a> {
    field: ViscousField<'a>,
    branches: [Branch; 2],
    opts: OdeOptions,
}

impl Manifold for FlowManifold<'_> {
    fn branches(&self) -> &[Branch; 2] {
        &self.branches
    }

    fn point(&self, branch: usize, t: f64) -> Result<State> {
        let br = &self.branches[branch];
        let k = br.t.partition_point(|x| *x <= t).saturating_sub(1);
        if t == br.t[k] {
            return Ok(br.z[k]);
        }
        let out = ode::integrate(|_, z| self.field.rhs(z), br.z[k], -br.t[k], -t, &self.opts, |_, _, _| {
            Control::Continue
        })?;
        Ok(out.y)
    }
}

/// Traces both branches of the one-dimensional stable manifold of the layer
/// flow at `v_inf` backward until they leave the ball of radius `radius`.
fn trace_flow_manifold<'a>(
    field: ViscousField<'a>,
    r_s: State,
    mu_s: f64,
    radius: f64,
) -> Result<FlowManifold<'a>> {
    let scale = 1.0 + field.v_inf.norm();
    let delta = 1e-3 * tol_conv(field.v_inf.norm());
    let opts = OdeOptions { rtol: 1e-11, atol: 1e-16 * scale, ..OdeOptions::default() };
    let y_cap = 60.0 / mu_s.abs() + LAYER_HORIZON_CONTINUOUS;
    let mut branches = [Branch { t: vec![], z: vec![] }, Branch { t: vec![], z: vec![] }];
    for (b, sign) in [(0usize, 1.0), (1usize, -1.0)] {
        let z0 = r_s * (sign * delta);
        let br = &mut branches[b];
        let _ = ode::integrate(|_, z| field.rhs(z), z0, 0.0, -y_cap, &opts, |y, z, dz| {
            br.t.push(-y);
            br.z.push(*z);
            if z.norm() > radius || dz.norm() < 1e-3 * STALL_SPEED {
                Control::Stop
            } else {
                Control::Continue
            }
        });
        if br.t.len() < 2 {
            return Err(Error::SolverFailure("stable manifold trace failed to start".into()));
        }
    }
    Ok(FlowManifold { field, branches, opts })
}

fn viscous_field<'a>(model: &'a SystemModel, v_inf: &State) -> Result<ViscousField<'a>> {
    let binv = model.viscosity(v_inf).inverse().map_err(|_| {
        Error::InvalidParameter("viscosity matrix is singular at v_inf".into())
    })?;
    Ok(ViscousField { model, binv, v_inf: *v_inf, f_inf: model.flux(v_inf) })
}

/// Continuous boundary-layer profile from `u_B` toward `v_inf`.
///
/// `y_max` overrides the adaptive horizon (base 200, extended by the decay
/// rate at `v_inf`, capped at `1e5`).
pub fn viscous_layer_profile(
    model: &SystemModel,
    u_b: &State,
    v_inf: &State,
    y_max: Option<f64>,
) -> Result<LayerProfile> {
    model.check_region(u_b)?;
    model.check_region(v_inf)?;
    let field = viscous_field(model, v_inf)?;
    let characteristic = model.eigen_structure(v_inf).map(|e| e.characteristic).unwrap_or(false);
    let tol = tol_conv(v_inf.norm());
    if u_b.dist(v_inf) <= 1e-2 * tol {
        return Ok(LayerProfile::constant(ProfileKind::Continuous, *u_b, characteristic));
    }
    let m = field.binv.mul_mat(&model.jacobian(v_inf));
    let spectrum = real_eigen(&m).ok();
    let scale = 1.0 + u_b.dist(v_inf);
    let n = model.dim();
    let Some((mu, vecs)) = spectrum else {
        // Complex or repeated eigenvalues: forward integration only.
        return Ok(forward_continuous(&field, u_b, y_max.unwrap_or(LAYER_HORIZON_CONTINUOUS), characteristic));
    };
    let ctol = tol_char(mu.iter().fold(0.0f64, |x, l| x.max(l.abs())));
    let stable: Vec<usize> = (0..n).filter(|&i| mu[i] < -ctol).collect();
    if n == 1 || stable.is_empty() || stable.len() == n {
        let rate = stable.iter().map(|&i| -mu[i]).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))));
        let horizon = continuous_horizon(rate, scale, tol, y_max);
        return Ok(forward_continuous(&field, u_b, horizon, characteristic));
    }
    // Saddle.
    let s = stable[0];
    let radius = 1.5 * u_b.dist(v_inf) + 10.0 * tol;
    let manifold = trace_flow_manifold(field, vecs[s], mu[s], radius)?;
    let target = *u_b - *v_inf;
    let cp = manifold.closest(&target)?;
    let d = cp.signed_distance.abs();
    if d <= tol {
        Ok(saddle_profile(&manifold, &cp, u_b, characteristic, d))
    } else {
        let field = viscous_field(model, v_inf)?;
        let mut prof = forward_continuous(&field, u_b, y_max.unwrap_or(LAYER_HORIZON_CONTINUOUS), characteristic);
        prof.shooting_residual = Some(d);
        if prof.verdict == Verdict::Converged {
            prof.verdict = Verdict::HorizonReached;
            prof.note = Some("trajectory passes close to v_inf but u_B is off the stable manifold".into());
        }
        Ok(prof)
    }
}

fn saddle_profile(
    manifold: &FlowManifold,
    cp: &ClosestPoint,
    u_b: &State,
    characteristic: bool,
    residual: f64,
) -> LayerProfile {
    let v_inf = manifold.field.v_inf;
    let br = &manifold.branches[cp.branch];
    let mut samples = vec![ProfileSample { y: 0.0, state: *u_b }];
    let mut slopes = vec![manifold.field.rhs(&cp.point).unwrap_or(State::zeros(u_b.dim()))];
    for k in (0..br.t.len()).rev().filter(|&k| br.t[k] < cp.t) {
        let z = br.z[k];
        samples.push(ProfileSample { y: cp.t - br.t[k], state: v_inf + z });
        slopes.push(manifold.field.rhs(&z).unwrap_or(State::zeros(u_b.dim())));
    }
    let d_end = samples.last().map(|s| s.state.dist(&v_inf)).unwrap_or(0.0);
    LayerProfile {
        kind: ProfileKind::Continuous,
        horizon: samples.last().map(|s| s.y).unwrap_or(0.0),
        samples,
        slopes,
        u_b: *u_b,
        v_infinity: v_inf,
        verdict: Verdict::Converged,
        distance_at_horizon: d_end,
        min_distance: d_end,
        characteristic,
        shooting_residual: Some(residual),
        note: None,
    }
}

/// Signed distance from `u_B` to the stable manifold of the viscous layer
/// flow at `v_inf` (saddle case only).
pub fn viscous_shooting_residual(model: &SystemModel, u_b: &State, v_inf: &State) -> Result<f64> {
    let field = viscous_field(model, v_inf)?;
    let m = field.binv.mul_mat(&model.jacobian(v_inf));
    let (mu, vecs) = real_eigen(&m)?;
    if model.dim() != 2 || !(mu[0] < 0.0 && mu[1] > 0.0) {
        return Err(Error::InvalidParameter("shooting needs a saddle at v_inf".into()));
    }
    let radius = 1.5 * u_b.dist(v_inf) + 10.0 * tol_conv(v_inf.norm());
    let manifold = trace_flow_manifold(field, vecs[0], mu[0], radius)?;
    Ok(manifold.closest(&(*u_b - *v_inf))?.signed_distance)
}

// ---- discrete layers -------------------------------------------------------

/// Residual `H(v, w) = w - v - k (f(v) + f(w) - 2 f(v_inf))`.
fn lf_residual(model: &SystemModel, k: f64, v: &State, w: &State, f_inf: &State) -> Result<State> {
    if !model.in_region(v) || !model.in_region(w) {
        return Err(Error::Domain("layer iterate left the state region".into()));
    }
    Ok(*w - *v - (model.flux(v) + model.flux(w) - *f_inf * 2.0) * k)
}

/// One Lax-Friedrichs layer step: solves `H(v_y, w) = 0` for `w` by damped
/// Newton started at `v_y`.
pub fn discrete_lf_layer_step(model: &SystemModel, lambda: f64, q: f64, v_y: &State, v_inf: &State) -> Result<State> {
    let k = lf_coefficient(lambda, q);
    lf_step_k(model, k, v_y, v_inf, &model.flux(v_inf))
}

fn lf_step_k(model: &SystemModel, k: f64, v: &State, _v_inf: &State, f_inf: &State) -> Result<State> {
    if model.is_scalar() {
        return lf_step_scalar(model, k, v.x(), f_inf.x()).map(State::scalar);
    }
    let id = Mat::identity(model.dim());
    roots::newton(
        |w| lf_residual(model, k, v, w, f_inf),
        |w| Ok(id.sub(&model.jacobian(w).scale(k))),
        *v,
        NEWTON_TOL,
    )
}

/// Scalar version of the forward step (same damped Newton, no allocation of
/// matrices).
fn lf_step_scalar(model: &SystemModel, k: f64, v: f64, f_inf: f64) -> Result<f64> {
    let rhs = v + k * (model.f_scalar(v) - 2.0 * f_inf);
    let h = |w: f64| w - k * model.f_scalar(w) - rhs;
    let mut w = v;
    let mut r = h(w);
    for _ in 0..crate::tolerances::NEWTON_MAX_ITER {
        if r.abs() <= NEWTON_TOL * (1.0 + w.abs()) {
            for _ in 0..2 {
                let trial = w - r / (1.0 - k * model.df_scalar(w));
                let rt = h(trial);
                if !(rt.abs() < r.abs()) {
                    break;
                }
                w = trial;
                r = rt;
            }
            return Ok(w);
        }
        let dw = r / (1.0 - k * model.df_scalar(w));
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=crate::tolerances::NEWTON_MAX_HALVINGS {
            let trial = w - step * dw;
            let rt = h(trial);
            if rt.is_finite() && rt.abs() < r.abs() {
                w = trial;
                r = rt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r.abs() <= 1e3 * NEWTON_TOL * (1.0 + w.abs()) {
        Ok(w)
    } else {
        Err(Error::SolverFailure(format!("layer step Newton failed at {w} (residual {r:e})")))
    }
}

fn lf_inverse_k(model: &SystemModel, k: f64, w: &State, f_inf: &State) -> Result<State> {
    let id = Mat::identity(model.dim());
    roots::newton(
        |v| lf_residual(model, k, v, w, f_inf),
        |v| Ok(id.add(&model.jacobian(v).scale(k)).scale(-1.0)),
        *w,
        NEWTON_TOL,
    )
}

/// Inverse Lax-Friedrichs layer step: solves `H(v, w) = 0` for `v`.
pub fn discrete_lf_layer_step_inverse(
    model: &SystemModel,
    lambda: f64,
    q: f64,
    w: &State,
    v_inf: &State,
) -> Result<State> {
    lf_inverse_k(model, lf_coefficient(lambda, q), w, &model.flux(v_inf))
}

/// Keeps every sample up to this count, then every `DECIMATE`-th.
const DISCRETE_KEEP: usize = 10_000;
const DECIMATE: usize = 100;

fn forward_discrete(
    model: &SystemModel,
    k: f64,
    u_b: &State,
    v_inf: &State,
    steps: usize,
    characteristic: bool,
) -> LayerProfile {
    let tol = tol_conv(v_inf.norm());
    let scale = 1.0 + u_b.norm() + v_inf.norm();
    let window = 8.0 * u_b.norm_inf().max(v_inf.norm_inf()).max(1.0);
    let f_inf = model.flux(v_inf);
    let mut samples = vec![ProfileSample { y: 0.0, state: *u_b }];
    let mut dist = vec![u_b.dist(v_inf)];
    let mut v = *u_b;
    let (mut diverged, mut stalled) = (false, false);
    let mut note = None;
    let mut min_d = dist[0];
    let mut last_d = dist[0];
    let mut y_end = 0usize;
    for n in 1..=steps {
        // The implicit step is well posed only while k * spectral radius < 1.
        let ok = model.max_speed(&v).map(|s| k * s < 1.0).unwrap_or(false);
        let next = if ok { lf_step_k(model, k, &v, v_inf, &f_inf) } else {
            Err(Error::Domain("implicit layer step is not solvable here".into()))
        };
        let w = match next {
            Ok(w) => w,
            Err(e) => {
                diverged = true;
                note = Some(e.to_string());
                break;
            }
        };
        let d = w.dist(v_inf);
        let moved = w.dist(&v);
        v = w;
        y_end = n;
        min_d = min_d.min(d);
        last_d = d;
        if n <= DISCRETE_KEEP || n % DECIMATE == 0 {
            samples.push(ProfileSample { y: n as f64, state: v });
            dist.push(d);
        }
        if d <= 1e-2 * tol {
            break;
        }
        if d > DIVERGENCE_FACTOR * scale || v.norm_inf() > window {
            diverged = true;
            break;
        }
        if moved < STALL_SPEED && d > tol {
            stalled = true;
            break;
        }
    }
    if samples.last().map(|s| s.y as usize) != Some(y_end) {
        samples.push(ProfileSample { y: y_end as f64, state: v });
        dist.push(last_d);
    }
    let verdict = finish_verdict(&dist, tol, diverged, stalled, scale);
    LayerProfile {
        kind: ProfileKind::Discrete,
        samples,
        slopes: vec![],
        u_b: *u_b,
        v_infinity: *v_inf,
        verdict,
        distance_at_horizon: last_d,
        min_distance: min_d,
        horizon: y_end as f64,
        characteristic,
        shooting_residual: None,
        note,
    }
}

struct MapManifold<'a> {
    model: &'a SystemModel,
    k: f64,
    v_inf: State,
    f_inf: State,
    r_s: State,
    a_s: f64,
    delta: f64,
    branches: [Branch; 2],
}

impl MapManifold<'_> {
    /// `S^{-n}(v_inf + sign * s * r_s)`.
    fn orbit_point(&self, sign: f64, n: usize, s: f64) -> Result<State> {
        let mut v = self.v_inf + self.r_s * (sign * s);
        for _ in 0..n {
            v = lf_inverse_k(self.model, self.k, &v, &self.f_inf)?;
        }
        Ok(v - self.v_inf)
    }

    /// Parameter `t = n + ln(s/delta)/ln(1/a_s)`, `s in [delta a_s, delta]`.
    fn decode(&self, t: f64) -> (usize, f64) {
        let n = t.ceil().max(0.0);
        let frac = t - n; // in (-1, 0]
        (n as usize, self.delta * (1.0 / self.a_s).powf(frac))
    }
}

impl Manifold for MapManifold<'_> {
    fn branches(&self) -> &[Branch; 2] {
        &self.branches
    }

    fn point(&self, branch: usize, t: f64) -> Result<State> {
        let sign = if branch == 0 { 1.0 } else { -1.0 };
        let (n, s) = self.decode(t);
        self.orbit_point(sign, n, s)
    }
}

/// Traces the one-dimensional stable manifold of the Lax-Friedrichs layer map
/// at `v_inf` by iterating the inverse map on a fundamental domain.
fn trace_map_manifold<'a>(
    model: &'a SystemModel,
    k: f64,
    v_inf: &State,
    r_s: State,
    a_s: f64,
    radius: f64,
) -> Result<MapManifold<'a>> {
    if !(a_s > 0.0 && a_s < 1.0) {
        return Err(Error::InvalidParameter(format!("stable multiplier {a_s} outside (0, 1)")));
    }
    let delta = 1e-3 * tol_conv(v_inf.norm());
    let mut mm = MapManifold {
        model,
        k,
        v_inf: *v_inf,
        f_inf: model.flux(v_inf),
        r_s,
        a_s,
        delta,
        branches: [Branch { t: vec![], z: vec![] }, Branch { t: vec![], z: vec![] }],
    };
    const PER_DOMAIN: usize = 24;
    let max_n = ((radius / delta).ln() / (1.0 / a_s).ln()).ceil() as usize + 50;
    for (b, sign) in [(0usize, 1.0), (1usize, -1.0)] {
        let mut t_list = Vec::new();
        let mut z_list = Vec::new();
        // Current orbit points of the fundamental domain.
        let mut layer: Vec<(f64, State)> = (0..PER_DOMAIN)
            .map(|m| {
                let frac = -1.0 + m as f64 / PER_DOMAIN as f64;
                (frac, *v_inf + r_s * (sign * delta * (1.0 / a_s).powf(frac)))
            })
            .collect();
        'outer: for n in 0..max_n {
            for (frac, v) in &layer {
                t_list.push(n as f64 + frac);
                z_list.push(*v - *v_inf);
            }
            if layer.iter().any(|(_, v)| v.dist(v_inf) > radius) {
                break;
            }
            let mut next = Vec::with_capacity(layer.len());
            for (frac, v) in &layer {
                match lf_inverse_k(model, k, v, &mm.f_inf) {
                    Ok(w) if model.in_region(&w) => next.push((*frac, w)),
                    _ => break 'outer,
                }
            }
            layer = next;
        }
        if t_list.len() < 2 {
            return Err(Error::SolverFailure("discrete stable manifold trace failed".into()));
        }
        mm.branches[b] = Branch { t: t_list, z: z_list };
    }
    Ok(mm)
}

/// Discrete boundary-layer membership for `u_B` and `v_inf`.
///
/// Lax-Friedrichs: forward iteration of [`discrete_lf_layer_step`] (or the
/// stable-manifold test at a saddle); Godunov: `v_inf = R(u_B, v_inf)`.
/// `y_max` overrides the adaptive horizon (base 500 steps).
pub fn discrete_layer_membership(
    model: &SystemModel,
    regularization: Regularization,
    u_b: &State,
    v_inf: &State,
    y_max: Option<usize>,
) -> Result<LayerProfile> {
    model.check_region(u_b)?;
    model.check_region(v_inf)?;
    let es = model.eigen_structure(v_inf)?;
    let characteristic = es.characteristic;
    let tol = tol_conv(v_inf.norm());
    match regularization {
        Regularization::Viscous => Err(Error::InvalidParameter(
            "discrete_layer_membership needs a discrete scheme".into(),
        )),
        Regularization::Godunov => {
            let r = riemann::trace(model, u_b, v_inf)?;
            let gap = r.dist(v_inf);
            let member = gap <= crate::tolerances::TOL_SET_EXACT * (1.0 + v_inf.norm());
            Ok(LayerProfile {
                kind: ProfileKind::Discrete,
                samples: vec![ProfileSample { y: 0.0, state: *u_b }, ProfileSample { y: 1.0, state: *v_inf }],
                slopes: vec![],
                u_b: *u_b,
                v_infinity: *v_inf,
                verdict: if member { Verdict::Converged } else { Verdict::Diverged },
                distance_at_horizon: gap,
                min_distance: gap,
                horizon: 1.0,
                characteristic,
                shooting_residual: None,
                note: (!member).then(|| format!("R(u_B, v_inf) = {r:?} differs from v_inf")),
            })
        }
        Regularization::LaxFriedrichs { lambda, q } => {
            let k = lf_coefficient(lambda, q);
            let speed = es.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
            if k * speed >= 1.0 {
                return Err(Error::Cfl(format!(
                    "lambda/(2Q) * max|lambda_j| = {} must be below 1 at v_inf",
                    k * speed
                )));
            }
            if u_b.dist(v_inf) <= 1e-2 * tol {
                return Ok(LayerProfile::constant(ProfileKind::Discrete, *u_b, characteristic));
            }
            let amp: Vec<f64> = es.eigenvalues.iter().map(|l| (1.0 + k * l) / (1.0 - k * l)).collect();
            let ctol = tol_char(speed) * k;
            let stable: Vec<usize> = (0..amp.len()).filter(|&i| amp[i].abs() < 1.0 - ctol).collect();
            let n = model.dim();
            let scale = 1.0 + u_b.dist(v_inf);
            if n == 1 || stable.is_empty() || stable.len() == n {
                let steps = y_max.unwrap_or_else(|| {
                    let worst = stable.iter().map(|&i| amp[i].abs()).fold(0.0f64, f64::max);
                    if stable.is_empty() || worst <= 0.0 {
                        LAYER_HORIZON_DISCRETE
                    } else {
                        let rate = -worst.ln();
                        let need = (3.0 * (scale / tol).ln().max(1.0) / rate).ceil();
                        (need as usize).clamp(LAYER_HORIZON_DISCRETE, LAYER_HORIZON_CAP_DISCRETE)
                    }
                });
                return Ok(forward_discrete(model, k, u_b, v_inf, steps, characteristic));
            }
            let s = stable[0];
            let radius = 1.5 * u_b.dist(v_inf) + 10.0 * tol;
            let mm = trace_map_manifold(model, k, v_inf, orient(es.right[s]), amp[s], radius)?;
            let target = *u_b - *v_inf;
            let cp = mm.closest(&target)?;
            let d = cp.signed_distance.abs();
            if d <= tol {
                // Orbit of the closest manifold point, which shadows the orbit of u_B.
                let sign = if cp.branch == 0 { 1.0 } else { -1.0 };
                let (n0, s0) = mm.decode(cp.t);
                let mut samples = vec![ProfileSample { y: 0.0, state: *u_b }];
                for j in (0..n0).rev() {
                    samples.push(ProfileSample { y: (n0 - j) as f64, state: *v_inf + mm.orbit_point(sign, j, s0)? });
                }
                let d_end = samples.last().map(|p| p.state.dist(v_inf)).unwrap_or(0.0);
                Ok(LayerProfile {
                    kind: ProfileKind::Discrete,
                    horizon: samples.last().map(|p| p.y).unwrap_or(0.0),
                    samples,
                    slopes: vec![],
                    u_b: *u_b,
                    v_infinity: *v_inf,
                    verdict: Verdict::Converged,
                    distance_at_horizon: d_end,
                    min_distance: d_end,
                    characteristic,
                    shooting_residual: Some(d),
                    note: None,
                })
            } else {
                let mut prof = forward_discrete(model, k, u_b, v_inf, y_max.unwrap_or(LAYER_HORIZON_DISCRETE), characteristic);
                prof.shooting_residual = Some(d);
                if prof.verdict == Verdict::Converged {
                    prof.verdict = Verdict::HorizonReached;
                    prof.note = Some("orbit passes close to v_inf but u_B is off the stable manifold".into());
                }
                Ok(prof)
            }
        }
    }
}

/// Signed distance from `u_B` to the stable manifold of the Lax-Friedrichs
/// layer map at `v_inf` (saddle case only).
pub fn discrete_shooting_residual(model: &SystemModel, lambda: f64, q: f64, u_b: &State, v_inf: &State) -> Result<f64> {
    let k = lf_coefficient(lambda, q);
    let es = model.eigen_structure(v_inf)?;
    let amp: Vec<f64> = es.eigenvalues.iter().map(|l| (1.0 + k * l) / (1.0 - k * l)).collect();
    if model.dim() != 2 || !(amp[0].abs() < 1.0 && amp[1].abs() > 1.0) {
        return Err(Error::InvalidParameter("shooting needs a saddle at v_inf".into()));
    }
    let radius = 1.5 * u_b.dist(v_inf) + 10.0 * tol_conv(v_inf.norm());
    let mm = trace_map_manifold(model, k, v_inf, orient(es.right[0]), amp[0], radius)?;
    Ok(mm.closest(&(*u_b - *v_inf))?.signed_distance)
}

/// Points on the stable manifold of the Lax-Friedrichs layer map at `v_inf`,
/// within distance `radius` (both branches, ordered from one end to the other).
pub fn discrete_stable_curve(model: &SystemModel, lambda: f64, q: f64, v_inf: &State, radius: f64) -> Result<Vec<State>> {
    let k = lf_coefficient(lambda, q);
    let es = model.eigen_structure(v_inf)?;
    let amp: Vec<f64> = es.eigenvalues.iter().map(|l| (1.0 + k * l) / (1.0 - k * l)).collect();
    let mm = trace_map_manifold(model, k, v_inf, orient(es.right[0]), amp[0], radius)?;
    let mut out: Vec<State> = mm.branches[1].z.iter().rev().map(|z| *v_inf + *z).collect();
    out.extend(mm.branches[0].z.iter().map(|z| *v_inf + *z));
    Ok(out.into_iter().filter(|p| p.dist(v_inf) <= radius).collect())
}

/// Finds the second component `c` of `v_inf = (v0, c)` for which `u_B` lies
/// on the stable manifold of `v_inf` (saddle case), scanning
/// `[guess - half_width, guess + half_width]` for a sign change of the
/// signed distance and refining with Brent's method.
pub fn shoot_limit_component(
    model: &SystemModel,
    regularization: Regularization,
    u_b: &State,
    v0: f64,
    guess: f64,
    half_width: f64,
) -> Result<f64> {
    let residual = |c: f64| -> Result<f64> {
        let v_inf = State::pair(v0, c);
        match regularization {
            Regularization::Viscous => viscous_shooting_residual(model, u_b, &v_inf),
            Regularization::LaxFriedrichs { lambda, q } => discrete_shooting_residual(model, lambda, q, u_b, &v_inf),
            Regularization::Godunov => Err(Error::InvalidParameter("shooting needs a viscous or LF layer".into())),
        }
    };
    const SCAN: usize = 40;
    let cs: Vec<f64> = (0..=SCAN).map(|i| guess - half_width + 2.0 * half_width * i as f64 / SCAN as f64).collect();
    let vals: Vec<Option<f64>> = cs.iter().map(|&c| residual(c).ok()).collect();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..SCAN {
        if let (Some(a), Some(b)) = (vals[i], vals[i + 1]) {
            if a == 0.0 {
                return Ok(cs[i]);
            }
            if a.signum() != b.signum() {
                let size = a.abs() + b.abs();
                if best.is_none_or(|(_, s)| size < s) {
                    best = Some((i, size));
                }
            }
        }
    }
    let (i, _) = best.ok_or_else(|| Error::SolverFailure("shooting: no sign change in the scan window".into()))?;
    roots::brent(|c| residual(c).unwrap_or(f64::NAN), cs[i], cs[i + 1], 1e-11 * (1.0 + guess.abs()))
}

// ---- closed forms ----------------------------------------------------------

/// One step of the closed-form Lagrangian gas layer recursion, with the data
/// needed to audit it.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LagrangianStep {
    pub next: State,
    pub n: f64,
    /// Product of the two roots of `w^2 - N w + 1 = 0` (equal to 1).
    pub root_product: f64,
}

/// Closed-form Lax-Friedrichs layer step for the Lagrangian gas:
/// `N = -2u + 2u_inf - 1/w + 2/w_inf + w` with `w = v/lambda`, then the larger
/// root `w(y+1) = (N + sqrt(N^2 - 4))/2`.
pub fn lagrangian_layer_step(lambda: f64, state: &State, limit: &State) -> Result<LagrangianStep> {
    let (v, u) = (state[0], state[1]);
    let (v_inf, u_inf) = (limit[0], limit[1]);
    if !(lambda > 0.0) || !(v > 0.0) || !(v_inf > 0.0) {
        return Err(Error::Domain("Lagrangian layer step needs lambda > 0, v > 0, v_inf > 0".into()));
    }
    let w = v / lambda;
    let w_inf = v_inf / lambda;
    if !(w_inf > 1.0) {
        return Err(Error::Domain(format!("stability requires v_inf / lambda > 1, got {w_inf}")));
    }
    let n = -2.0 * u + 2.0 * u_inf - 1.0 / w + 2.0 / w_inf + w;
    let disc = n * n - 4.0;
    if disc < 0.0 {
        return Err(Error::Domain(format!("N^2 - 4 = {disc} < 0: the layer quadratic has complex roots")));
    }
    let sq = disc.sqrt();
    let w_plus = 0.5 * (n + sq);
    let w_minus = 0.5 * (n - sq);
    let next = State::pair(lambda * w_plus, 2.0 * u_inf - u + w - w_plus);
    Ok(LagrangianStep { next, n, root_product: w_plus * w_minus })
}

/// [`lagrangian_layer_step`] returning only the next state.
pub fn lagrangian_layer_iterate(lambda: f64, state: &State, limit: &State) -> Result<State> {
    lagrangian_layer_step(lambda, state, limit).map(|s| s.next)
}

/// Closed-form one-parameter family of limit states `(v_inf, u_inf)` reached
/// by viscous layers (`B = I`) from `(v_B, u_B)` in elastodynamics:
/// `u_inf = u_B -+ sqrt(2 int_{v_inf}^{v_B} (sigma(s) - sigma(v_inf)) ds)`,
/// minus for `v_inf < v_B`, plus for `v_inf > v_B`.
pub fn elasto_layer_curve(model: &SystemModel, base: &State, v_inf_values: &[f64]) -> Result<CurveSet> {
    if !matches!(model.kind(), ModelKind::Elastodynamics { .. }) {
        return Err(Error::InvalidParameter("elasto_layer_curve needs the elastodynamics model".into()));
    }
    model.check_region(base)?;
    let (v_b, u_b) = (base[0], base[1]);
    let u_of = |v_inf: f64| -> Result<f64> {
        if !(v_inf > 0.0) || !(model.dsigma(v_inf) > 0.0) {
            return Err(Error::Domain(format!("v_inf = {v_inf} leaves the region sigma' > 0, v > 0")));
        }
        let s_inf = model.sigma(v_inf);
        let integral = quad::integrate(|s| model.sigma(s) - s_inf, v_inf, v_b, 1e-13)?;
        let root = (2.0 * integral).max(0.0).sqrt();
        Ok(if v_inf < v_b { u_b - root } else { u_b + root })
    };
    let points = v_inf_values.iter().map(|&v| u_of(v).map(|u| State::pair(v, u))).collect::<Result<Vec<_>>>()?;
    let h = 1e-4 * (1.0 + v_b.abs());
    let slope = (u_of(v_b + h)? - u_of(v_b - h)?) / (2.0 * h);
    Ok(CurveSet {
        base: *base,
        params: v_inf_values.to_vec(),
        points,
        tangent: orient(State::pair(1.0, slope)),
        dimension: 1,
    })
}
