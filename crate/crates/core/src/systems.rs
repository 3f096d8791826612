//! Conservation-law models: flux, Jacobian, eigenstructure, entropy pairs and
//! viscosity matrices.
//!
//! Built-in models:
//!
//! | name               | state      | flux                          |
//! |--------------------|------------|-------------------------------|
//! | `burgers`          | `u`        | `u^2/2`                       |
//! | `cubic`            | `u`        | `(u^3 - 3u)/2`                |
//! | `linear2`          | `(u1, u2)` | `A u`                         |
//! | `elastodynamics`   | `(v, u)`   | `(-u, -sigma(v))`             |
//! | `euler_isentropic` | `(rho, m)` | `(m, m^2/rho + rho^gamma)`    |
//! | `lagrangian_gas`   | `(v, u)`   | `(-u, 1/v)`                   |
//!
//! The Euler model is written in conserved variables `(rho, m = rho u)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Eigenvalues, Mat, State};
use crate::roots;
use crate::tolerances::tol_char;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied scalar flux. Only `f` and `f'` are required; the energy
/// flux `F(u) = int u f'(u) du` for `U = u^2/2` is optional because it is never
/// obtained by quadrature.
#[derive(Clone)]
pub struct CustomFlux {
    pub label: String,
    pub f: ScalarFn,
    pub df: ScalarFn,
    pub energy_flux: Option<ScalarFn>,
    /// True if `f'' > 0` everywhere; enables the convex closed forms.
    pub convex: bool,
}

impl fmt::Debug for CustomFlux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomFlux({})", self.label)
    }
}

#[derive(Clone, Debug)]
pub enum ModelKind {
    Burgers,
    Cubic,
    /// Constant-coefficient system `u_t + A u_x = 0` with diagonal viscosity.
    Linear2 { a: Mat, b: [f64; 2] },
    /// p-system with stress law `sigma(v) = a v + b v^3 / 3`.
    Elastodynamics { a: f64, b: f64 },
    EulerIsentropic { gamma: f64 },
    LagrangianGas,
    CustomScalar(CustomFlux),
}

/// Lower bound on one state component.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ComponentBounds {
    pub name: String,
    /// Strict lower bound (`component > lower`), if any.
    pub lower: Option<f64>,
}

/// A conservation-law system. Immutable after construction.
#[derive(Clone, Debug)]
pub struct SystemModel {
    name: String,
    kind: ModelKind,
    params: BTreeMap<String, f64>,
    region: Vec<ComponentBounds>,
    viscosity: Option<Mat>,
}

/// Flags recorded on an entropy pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convexity {
    StrictlyConvex,
    Convex,
    Trivial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntropyKind {
    /// The model's physical (strictly convex) entropy.
    Energy,
    /// `(sign * u_j, sign * f_j)`.
    Trivial { component: usize, sign: f64 },
    /// Kruzkov pair `(|u - k|, sgn(u - k)(f(u) - f(k)))`, scalar models only.
    Kruzkov { k: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyPair {
    pub kind: EntropyKind,
    pub convexity: Convexity,
}

/// `(U, F, grad U)` at a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyValue {
    pub u: f64,
    pub f: f64,
    pub grad: State,
}

impl EntropyPair {
    pub fn energy() -> Self {
        EntropyPair { kind: EntropyKind::Energy, convexity: Convexity::StrictlyConvex }
    }

    pub fn trivial(component: usize, sign: f64) -> Self {
        EntropyPair { kind: EntropyKind::Trivial { component, sign }, convexity: Convexity::Trivial }
    }

    pub fn kruzkov(k: f64) -> Self {
        EntropyPair { kind: EntropyKind::Kruzkov { k }, convexity: Convexity::Convex }
    }

    pub fn label(&self) -> String {
        match self.kind {
            EntropyKind::Energy => "energy".into(),
            EntropyKind::Trivial { component, sign } => {
                format!("{}u{}", if sign > 0.0 { "+" } else { "-" }, component + 1)
            }
            EntropyKind::Kruzkov { k } => format!("kruzkov({k})"),
        }
    }

    pub fn eval(&self, model: &SystemModel, u: &State) -> Result<EntropyValue> {
        model.entropy_eval(self, u)
    }
}

/// Eigen-decomposition of the flux Jacobian at a state.
#[derive(Clone, Debug, Serialize)]
pub struct EigenStructure {
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    pub right: Vec<State>,
    pub left: Vec<State>,
    /// Number of eigenvalues below `-tol_char`.
    pub p: usize,
    /// True iff some eigenvalue has magnitude below `tol_char`.
    pub characteristic: bool,
    pub tol_char: f64,
}

impl EigenStructure {
    fn from_parts(eigenvalues: Vec<f64>, right: Vec<State>, left: Vec<State>) -> Self {
        let max = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let tol = tol_char(max);
        let p = eigenvalues.iter().filter(|&&l| l < -tol).count();
        let characteristic = eigenvalues.iter().any(|l| l.abs() < tol);
        EigenStructure { eigenvalues, right, left, p, characteristic, tol_char: tol }
    }

    /// Largest biorthonormality defect `|l_i . r_j - delta_ij|`.
    pub fn biorthonormality_defect(&self) -> f64 {
        let n = self.eigenvalues.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.left[i].dot(&self.right[j]) - target).abs());
            }
        }
        worst
    }
}

/// Regions of the `(rho, u)` plane for isentropic Euler, by the signs of
/// `u - c(rho)` and `u + c(rho)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EulerRegion {
    /// Both speeds negative.
    I,
    /// `u + c = 0`.
    II,
    /// Speeds of opposite signs.
    III,
    /// `u - c = 0`.
    IV,
    /// Both speeds positive.
    V,
}

/// Eigen-decomposition of an arbitrary 1x1 or 2x2 matrix with real distinct
/// eigenvalues. Right eigenvectors have unit norm; left eigenvectors are the
/// rows of the inverse eigenvector matrix.
pub fn generic_eigen(m: &Mat) -> Result<EigenStructure> {
    if m.dim() == 1 {
        return Ok(EigenStructure::from_parts(
            vec![m.get(0, 0)],
            vec![State::scalar(1.0)],
            vec![State::scalar(1.0)],
        ));
    }
    match m.eigenvalues() {
        Eigenvalues::Real([l1, l2]) => {
            let scale = 1.0 + m.norm();
            if (l2 - l1).abs() <= 1e-12 * scale {
                return Err(Error::HyperbolicityFailure(format!(
                    "repeated eigenvalue {l1} of {m:?}"
                )));
            }
            let r1 = m.eigenvector(l1);
            let r2 = m.eigenvector(l2);
            let inv = Mat::from_columns(&[r1, r2]).inverse().map_err(|_| {
                Error::HyperbolicityFailure(format!("defective matrix {m:?}"))
            })?;
            Ok(EigenStructure::from_parts(vec![l1, l2], vec![r1, r2], vec![inv.row(0), inv.row(1)]))
        }
        Eigenvalues::Complex { re, im } => Err(Error::HyperbolicityFailure(format!(
            "complex eigenvalues {re} +- {im}i"
        ))),
    }
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn check_known(params: &BTreeMap<String, f64>, known: &[&str], model: &str) -> Result<()> {
    for k in params.keys() {
        if !known.contains(&k.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "unknown parameter `{k}` for model `{model}` (expected one of {known:?})"
            )));
        }
    }
    for (k, v) in params {
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("parameter `{k}` must be finite")));
        }
    }
    Ok(())
}

/// Names accepted by [`make_model`].
pub const MODEL_NAMES: [&str; 6] =
    ["burgers", "cubic", "linear2", "elastodynamics", "euler_isentropic", "lagrangian_gas"];

/// Build a built-in model from its name and parameters.
///
/// Parameters:
/// * `linear2`: `a11, a12, a21, a22` (default `[[-5, 5], [-3, 3]]`) and the
///   diagonal viscosity `b1, b2` (default 1).
/// * `elastodynamics`: `stress_a`, `stress_b` for `sigma(v) = a v + b v^3/3`
///   (default 1, 1).
/// * `euler_isentropic`: `gamma` (default 1.4).
pub fn make_model(name: &str, params: &BTreeMap<String, f64>) -> Result<SystemModel> {
    let (kind, known): (ModelKind, &[&str]) = match name {
        "burgers" => (ModelKind::Burgers, &[]),
        "cubic" => (ModelKind::Cubic, &[]),
        "linear2" => {
            let a = Mat::new2(
                param(params, "a11", -5.0),
                param(params, "a12", 5.0),
                param(params, "a21", -3.0),
                param(params, "a22", 3.0),
            );
            let b = [param(params, "b1", 1.0), param(params, "b2", 1.0)];
            if b.iter().any(|&x| x <= 0.0) {
                return Err(Error::InvalidParameter(
                    "linear2 viscosity entries b1, b2 must be positive".into(),
                ));
            }
            generic_eigen(&a).map_err(|e| {
                Error::InvalidParameter(format!("linear2 matrix is not strictly hyperbolic: {e}"))
            })?;
            (ModelKind::Linear2 { a, b }, &["a11", "a12", "a21", "a22", "b1", "b2"])
        }
        "elastodynamics" => {
            let a = param(params, "stress_a", 1.0);
            let b = param(params, "stress_b", 1.0);
            if a <= 0.0 || b < 0.0 {
                return Err(Error::InvalidParameter(
                    "elastodynamics requires stress_a > 0 and stress_b >= 0 (sigma' > 0)".into(),
                ));
            }
            (ModelKind::Elastodynamics { a, b }, &["stress_a", "stress_b"])
        }
        "euler_isentropic" => {
            let gamma = param(params, "gamma", 1.4);
            if gamma <= 1.0 {
                return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
            }
            (ModelKind::EulerIsentropic { gamma }, &["gamma"])
        }
        "lagrangian_gas" => (ModelKind::LagrangianGas, &[]),
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    check_known(params, known, name)?;
    Ok(SystemModel::from_kind(name, kind, params.clone()))
}

impl SystemModel {
    fn from_kind(name: &str, kind: ModelKind, params: BTreeMap<String, f64>) -> Self {
        let bounds = |names: &[&str], lower: &[Option<f64>]| -> Vec<ComponentBounds> {
            names
                .iter()
                .zip(lower)
                .map(|(n, l)| ComponentBounds { name: n.to_string(), lower: *l })
                .collect()
        };
        let region = match &kind {
            ModelKind::Burgers | ModelKind::Cubic | ModelKind::CustomScalar(_) => bounds(&["u"], &[None]),
            ModelKind::Linear2 { .. } => bounds(&["u1", "u2"], &[None, None]),
            // Genuine nonlinearity (v sigma'' > 0) holds only on one side of v = 0.
            ModelKind::Elastodynamics { .. } => bounds(&["v", "u"], &[Some(0.0), None]),
            ModelKind::EulerIsentropic { .. } => bounds(&["rho", "m"], &[Some(0.0), None]),
            ModelKind::LagrangianGas => bounds(&["v", "u"], &[Some(0.0), None]),
        };
        SystemModel { name: name.to_string(), kind, params, region, viscosity: None }
    }

    pub fn burgers() -> Self {
        make_model("burgers", &BTreeMap::new()).expect("built-in")
    }

    pub fn cubic() -> Self {
        make_model("cubic", &BTreeMap::new()).expect("built-in")
    }

    pub fn linear2(a: [[f64; 2]; 2], b: [f64; 2]) -> Result<Self> {
        let params = BTreeMap::from([
            ("a11".to_string(), a[0][0]),
            ("a12".to_string(), a[0][1]),
            ("a21".to_string(), a[1][0]),
            ("a22".to_string(), a[1][1]),
            ("b1".to_string(), b[0]),
            ("b2".to_string(), b[1]),
        ]);
        make_model("linear2", &params)
    }

    pub fn elastodynamics() -> Self {
        make_model("elastodynamics", &BTreeMap::new()).expect("built-in")
    }

    pub fn elastodynamics_with(stress_a: f64, stress_b: f64) -> Result<Self> {
        let params =
            BTreeMap::from([("stress_a".to_string(), stress_a), ("stress_b".to_string(), stress_b)]);
        make_model("elastodynamics", &params)
    }

    pub fn euler(gamma: f64) -> Result<Self> {
        make_model("euler_isentropic", &BTreeMap::from([("gamma".to_string(), gamma)]))
    }

    pub fn lagrangian_gas() -> Self {
        make_model("lagrangian_gas", &BTreeMap::new()).expect("built-in")
    }

    pub fn custom_scalar(flux: CustomFlux) -> Self {
        let name = flux.label.clone();
        SystemModel::from_kind(&name, ModelKind::CustomScalar(flux), BTreeMap::new())
    }

    /// Replace the viscosity matrix by a constant invertible matrix.
    pub fn with_viscosity(mut self, b: Mat) -> Result<Self> {
        if b.dim() != self.dim() {
            return Err(Error::InvalidParameter("viscosity matrix has wrong dimension".into()));
        }
        b.inverse()
            .map_err(|_| Error::InvalidParameter("viscosity matrix must be invertible".into()))?;
        self.viscosity = Some(b);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn region(&self) -> &[ComponentBounds] {
        &self.region
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Burgers | ModelKind::Cubic | ModelKind::CustomScalar(_) => 1,
            _ => 2,
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.dim() == 1
    }

    /// True for the p-systems `(v, u)` with flux `(-u, -sigma(v))`.
    pub fn is_psystem(&self) -> bool {
        matches!(self.kind, ModelKind::Elastodynamics { .. } | ModelKind::LagrangianGas)
    }

    pub fn component_names(&self) -> Vec<String> {
        self.region.iter().map(|b| b.name.clone()).collect()
    }

    pub fn in_region(&self, u: &State) -> bool {
        u.dim() == self.dim()
            && u.is_finite()
            && self.region.iter().enumerate().all(|(i, b)| b.lower.is_none_or(|lo| u[i] > lo))
    }

    pub fn check_region(&self, u: &State) -> Result<()> {
        if u.dim() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "model `{}` expects {} components, got {}",
                self.name,
                self.dim(),
                u.dim()
            )));
        }
        if !self.in_region(u) {
            return Err(Error::Domain(format!("state {u:?} outside the region of `{}`", self.name)));
        }
        Ok(())
    }

    // ---- p-system stress law -------------------------------------------------

    /// Stress `sigma(v)`; the Lagrangian gas has `sigma(v) = -1/v`.
    pub fn sigma(&self, v: f64) -> f64 {
        match self.kind {
            ModelKind::Elastodynamics { a, b } => a * v + b * v * v * v / 3.0,
            ModelKind::LagrangianGas => -1.0 / v,
            _ => panic!("sigma is defined for p-systems only"),
        }
    }

    pub fn dsigma(&self, v: f64) -> f64 {
        match self.kind {
            ModelKind::Elastodynamics { a, b } => a + b * v * v,
            ModelKind::LagrangianGas => 1.0 / (v * v),
            _ => panic!("sigma is defined for p-systems only"),
        }
    }

    pub fn d2sigma(&self, v: f64) -> f64 {
        match self.kind {
            ModelKind::Elastodynamics { b, .. } => 2.0 * b * v,
            ModelKind::LagrangianGas => -2.0 / (v * v * v),
            _ => panic!("sigma is defined for p-systems only"),
        }
    }

    /// Antiderivative `Phi` of the stress with `Phi' = sigma`.
    pub fn stress_potential(&self, v: f64) -> f64 {
        match self.kind {
            ModelKind::Elastodynamics { a, b } => 0.5 * a * v * v + b * v.powi(4) / 12.0,
            ModelKind::LagrangianGas => -v.ln(),
            _ => panic!("sigma is defined for p-systems only"),
        }
    }

    // ---- scalar flux helpers -------------------------------------------------

    pub fn f_scalar(&self, u: f64) -> f64 {
        match &self.kind {
            ModelKind::Burgers => 0.5 * u * u,
            ModelKind::Cubic => 0.5 * (u * u * u - 3.0 * u),
            ModelKind::CustomScalar(c) => (c.f)(u),
            _ => panic!("f_scalar on a system"),
        }
    }

    pub fn df_scalar(&self, u: f64) -> f64 {
        match &self.kind {
            ModelKind::Burgers => u,
            ModelKind::Cubic => 1.5 * (u * u - 1.0),
            ModelKind::CustomScalar(c) => (c.df)(u),
            _ => panic!("df_scalar on a system"),
        }
    }

    /// All `u` with `f'(u) = s`, when known in closed form.
    pub fn df_preimages(&self, s: f64) -> Option<Vec<f64>> {
        match &self.kind {
            ModelKind::Burgers => Some(vec![s]),
            ModelKind::Cubic => {
                let q = 1.0 + 2.0 * s / 3.0;
                if q < 0.0 {
                    Some(vec![])
                } else if q == 0.0 {
                    Some(vec![0.0])
                } else {
                    let r = q.sqrt();
                    Some(vec![-r, r])
                }
            }
            _ => None,
        }
    }

    /// True if the scalar flux is strictly convex.
    pub fn is_convex_scalar(&self) -> bool {
        match &self.kind {
            ModelKind::Burgers => true,
            ModelKind::CustomScalar(c) => c.convex,
            _ => false,
        }
    }

    /// The sonic point `u_*` with `f'(u_*) = 0` of a convex scalar flux.
    pub fn sonic_point(&self) -> Result<f64> {
        if !self.is_convex_scalar() {
            return Err(Error::InvalidParameter(format!(
                "model `{}` is not a convex scalar law",
                self.name
            )));
        }
        if let Some(v) = self.df_preimages(0.0) {
            return v.first().copied().ok_or_else(|| {
                Error::SolverFailure("convex flux without a sonic point".into())
            });
        }
        let (mut a, mut b) = (-1.0, 1.0);
        for _ in 0..60 {
            if self.df_scalar(a) < 0.0 && self.df_scalar(b) > 0.0 {
                return roots::brent(|u| self.df_scalar(u), a, b, 1e-15);
            }
            a *= 2.0;
            b *= 2.0;
        }
        Err(Error::SolverFailure("convex flux without a sonic point".into()))
    }

    /// Extremum of `f` on `[a, b]`: `(argmax, max)` or `(argmin, min)`.
    pub fn scalar_extremum(&self, a: f64, b: f64, maximize: bool) -> (f64, f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let sgn = if maximize { 1.0 } else { -1.0 };
        match self.df_preimages(0.0) {
            Some(crit) => {
                let mut best = (lo, sgn * self.f_scalar(lo));
                for x in std::iter::once(hi).chain(crit.into_iter().filter(|c| *c > lo && *c < hi)) {
                    let v = sgn * self.f_scalar(x);
                    if v > best.1 {
                        best = (x, v);
                    }
                }
                (best.0, sgn * best.1)
            }
            None => {
                let g = |x: f64| sgn * self.f_scalar(x);
                let (x, v) = roots::sampled_max(&g, lo, hi, 2049);
                (x, sgn * v)
            }
        }
    }

    /// `sup |f'|` over `[a, b]`.
    pub fn max_abs_df(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match &self.kind {
            ModelKind::Burgers => lo.abs().max(hi.abs()),
            ModelKind::Cubic => {
                let mut m = self.df_scalar(lo).abs().max(self.df_scalar(hi).abs());
                if lo < 0.0 && hi > 0.0 {
                    m = m.max(self.df_scalar(0.0).abs());
                }
                m
            }
            _ => {
                let g = |x: f64| self.df_scalar(x).abs();
                roots::sampled_max(&g, lo, hi, 2049).1
            }
        }
    }

    // ---- flux, Jacobian, viscosity ------------------------------------------

    pub fn flux(&self, u: &State) -> State {
        match &self.kind {
            ModelKind::Burgers | ModelKind::Cubic | ModelKind::CustomScalar(_) => {
                State::scalar(self.f_scalar(u.x()))
            }
            ModelKind::Linear2 { a, .. } => a.mul_vec(u),
            ModelKind::Elastodynamics { .. } | ModelKind::LagrangianGas => {
                State::pair(-u[1], -self.sigma(u[0]))
            }
            ModelKind::EulerIsentropic { gamma } => {
                let (rho, m) = (u[0], u[1]);
                State::pair(m, m * m / rho + rho.powf(*gamma))
            }
        }
    }

    pub fn jacobian(&self, u: &State) -> Mat {
        match &self.kind {
            ModelKind::Burgers | ModelKind::Cubic | ModelKind::CustomScalar(_) => {
                Mat::scalar(self.df_scalar(u.x()))
            }
            ModelKind::Linear2 { a, .. } => *a,
            ModelKind::Elastodynamics { .. } | ModelKind::LagrangianGas => {
                Mat::new2(0.0, -1.0, -self.dsigma(u[0]), 0.0)
            }
            ModelKind::EulerIsentropic { gamma } => {
                let (rho, m) = (u[0], u[1]);
                let vel = m / rho;
                Mat::new2(0.0, 1.0, -vel * vel + gamma * rho.powf(gamma - 1.0), 2.0 * vel)
            }
        }
    }

    /// Viscosity matrix `B(u)`; identity unless overridden (diagonal for `linear2`).
    pub fn viscosity(&self, _u: &State) -> Mat {
        if let Some(b) = self.viscosity {
            return b;
        }
        match &self.kind {
            ModelKind::Linear2 { b, .. } => Mat::diag(b),
            _ => Mat::identity(self.dim()),
        }
    }

    /// Eigenvalues in ascending order without eigenvectors.
    pub fn eigenvalues(&self, u: &State) -> Result<Vec<f64>> {
        match &self.kind {
            ModelKind::Burgers | ModelKind::Cubic | ModelKind::CustomScalar(_) => {
                Ok(vec![self.df_scalar(u.x())])
            }
            ModelKind::Elastodynamics { .. } | ModelKind::LagrangianGas => {
                let s = self.psystem_speed(u[0])?;
                Ok(vec![-s, s])
            }
            ModelKind::EulerIsentropic { .. } => {
                let (vel, c) = self.euler_speeds(u)?;
                Ok(vec![vel - c, vel + c])
            }
            ModelKind::Linear2 { a, .. } => Ok(generic_eigen(a)?.eigenvalues),
        }
    }

    /// Spectral radius of the Jacobian.
    pub fn max_speed(&self, u: &State) -> Result<f64> {
        Ok(self.eigenvalues(u)?.iter().fold(0.0f64, |m, l| m.max(l.abs())))
    }

    fn psystem_speed(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("p-system requires v > 0, got {v}")));
        }
        let d = self.dsigma(v);
        if !(d > 0.0) {
            return Err(Error::HyperbolicityFailure(format!("sigma'({v}) = {d} is not positive")));
        }
        Ok(d.sqrt())
    }

    fn euler_speeds(&self, u: &State) -> Result<(f64, f64)> {
        let ModelKind::EulerIsentropic { gamma } = self.kind else { unreachable!() };
        let rho = u[0];
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("Euler requires rho > 0, got {rho}")));
        }
        Ok((u[1] / rho, (gamma * rho.powf(gamma - 1.0)).sqrt()))
    }

    /// Closed-form eigendecomposition of the flux Jacobian.
    pub fn eigen_structure(&self, u: &State) -> Result<EigenStructure> {
        self.check_region(u)?;
        match &self.kind {
            ModelKind::Burgers | ModelKind::Cubic | ModelKind::CustomScalar(_) => {
                Ok(EigenStructure::from_parts(
                    vec![self.df_scalar(u.x())],
                    vec![State::scalar(1.0)],
                    vec![State::scalar(1.0)],
                ))
            }
            ModelKind::Elastodynamics { .. } | ModelKind::LagrangianGas => {
                let s = self.psystem_speed(u[0])?;
                Ok(EigenStructure::from_parts(
                    vec![-s, s],
                    vec![State::pair(1.0, s), State::pair(1.0, -s)],
                    vec![State::pair(0.5, 0.5 / s), State::pair(0.5, -0.5 / s)],
                ))
            }
            ModelKind::EulerIsentropic { .. } => {
                let (vel, c) = self.euler_speeds(u)?;
                let k = 0.5 / c;
                Ok(EigenStructure::from_parts(
                    vec![vel - c, vel + c],
                    vec![State::pair(1.0, vel - c), State::pair(1.0, vel + c)],
                    vec![State::pair((vel + c) * k, -k), State::pair(-(vel - c) * k, k)],
                ))
            }
            ModelKind::Linear2 { a, .. } => generic_eigen(a),
        }
    }

    // ---- entropies -----------------------------------------------------------

    /// Finite explicit entropy list: the physical entropy (if available) and
    /// the trivial pairs `(+-u_j, +-f_j)`.
    pub fn entropies(&self) -> Vec<EntropyPair> {
        let mut out = Vec::new();
        let has_energy = match &self.kind {
            ModelKind::CustomScalar(c) => c.energy_flux.is_some(),
            _ => true,
        };
        if has_energy {
            out.push(EntropyPair::energy());
        }
        for j in 0..self.dim() {
            out.push(EntropyPair::trivial(j, 1.0));
            out.push(EntropyPair::trivial(j, -1.0));
        }
        out
    }

    pub fn entropy_eval(&self, pair: &EntropyPair, u: &State) -> Result<EntropyValue> {
        self.check_region(u)?;
        match pair.kind {
            EntropyKind::Trivial { component, sign } => {
                if component >= self.dim() {
                    return Err(Error::InvalidParameter(format!("no component {component}")));
                }
                Ok(EntropyValue {
                    u: sign * u[component],
                    f: sign * self.flux(u)[component],
                    grad: State::basis(self.dim(), component) * sign,
                })
            }
            EntropyKind::Kruzkov { k } => {
                if !self.is_scalar() {
                    return Err(Error::InvalidParameter(
                        "Kruzkov entropies exist for scalar models only".into(),
                    ));
                }
                let x = u.x();
                let s = sgn(x - k);
                Ok(EntropyValue {
                    u: (x - k).abs(),
                    f: s * (self.f_scalar(x) - self.f_scalar(k)),
                    grad: State::scalar(s),
                })
            }
            EntropyKind::Energy => self.energy_eval(u),
        }
    }

    fn energy_eval(&self, s: &State) -> Result<EntropyValue> {
        Ok(match &self.kind {
            ModelKind::Burgers => {
                let u = s.x();
                EntropyValue { u: 0.5 * u * u, f: u * u * u / 3.0, grad: State::scalar(u) }
            }
            ModelKind::Cubic => {
                let u = s.x();
                let u2 = u * u;
                EntropyValue { u: 0.5 * u2, f: 0.375 * u2 * u2 - 0.75 * u2, grad: State::scalar(u) }
            }
            ModelKind::CustomScalar(c) => {
                let ef = c.energy_flux.as_ref().ok_or_else(|| {
                    Error::InvalidParameter(format!("model `{}` has no energy flux", self.name))
                })?;
                let u = s.x();
                EntropyValue { u: 0.5 * u * u, f: ef(u), grad: State::scalar(u) }
            }
            ModelKind::Linear2 { a, .. } => {
                // Symmetriser entropy U = sum (l_j.u)^2 / 2, F = sum lambda_j (l_j.u)^2 / 2.
                let es = generic_eigen(a)?;
                let mut val = EntropyValue { u: 0.0, f: 0.0, grad: State::zeros(2) };
                for j in 0..2 {
                    let c = es.left[j].dot(s);
                    val.u += 0.5 * c * c;
                    val.f += 0.5 * es.eigenvalues[j] * c * c;
                    val.grad += es.left[j] * c;
                }
                val
            }
            ModelKind::Elastodynamics { .. } | ModelKind::LagrangianGas => {
                let (v, u) = (s[0], s[1]);
                EntropyValue {
                    u: 0.5 * u * u + self.stress_potential(v),
                    f: -u * self.sigma(v),
                    grad: State::pair(self.sigma(v), u),
                }
            }
            ModelKind::EulerIsentropic { gamma } => {
                let (rho, m) = (s[0], s[1]);
                let vel = m / rho;
                let p = rho.powf(*gamma);
                let uu = 0.5 * m * vel + p / (gamma - 1.0);
                EntropyValue {
                    u: uu,
                    f: (uu + p) * vel,
                    grad: State::pair(
                        -0.5 * vel * vel + gamma / (gamma - 1.0) * rho.powf(gamma - 1.0),
                        vel,
                    ),
                }
            }
        })
    }

    /// Hessian of the entropy `U`.
    pub fn entropy_hessian(&self, pair: &EntropyPair, s: &State) -> Result<Mat> {
        self.check_region(s)?;
        let n = self.dim();
        Ok(match pair.kind {
            EntropyKind::Trivial { .. } | EntropyKind::Kruzkov { .. } => Mat::zeros(n),
            EntropyKind::Energy => match &self.kind {
                ModelKind::Burgers | ModelKind::Cubic | ModelKind::CustomScalar(_) => Mat::scalar(1.0),
                ModelKind::Linear2 { a, .. } => {
                    let es = generic_eigen(a)?;
                    let l = Mat::from_rows(&es.left);
                    l.transpose().mul_mat(&l)
                }
                ModelKind::Elastodynamics { .. } | ModelKind::LagrangianGas => {
                    Mat::diag(&[self.dsigma(s[0]), 1.0])
                }
                ModelKind::EulerIsentropic { gamma } => {
                    let (rho, m) = (s[0], s[1]);
                    Mat::new2(
                        m * m / rho.powi(3) + gamma * rho.powf(gamma - 2.0),
                        -m / (rho * rho),
                        -m / (rho * rho),
                        1.0 / rho,
                    )
                }
            },
        })
    }

    /// Region of a `(rho, u)` state (primitive velocity) for isentropic Euler.
    pub fn classify_euler_region(&self, rho: f64, u: f64) -> Result<EulerRegion> {
        let ModelKind::EulerIsentropic { gamma } = self.kind else {
            return Err(Error::InvalidParameter("region classification needs euler_isentropic".into()));
        };
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("rho must be positive, got {rho}")));
        }
        let c = (gamma * rho.powf(gamma - 1.0)).sqrt();
        let (l1, l2) = (u - c, u + c);
        let tol = tol_char(l1.abs().max(l2.abs()));
        let sign = |x: f64| if x.abs() < tol { 0 } else if x > 0.0 { 1 } else { -1 };
        Ok(match (sign(l1), sign(l2)) {
            (-1, -1) => EulerRegion::I,
            (-1, 0) => EulerRegion::II,
            (-1, 1) => EulerRegion::III,
            (0, _) => EulerRegion::IV,
            (1, _) => EulerRegion::V,
            // u + c > u - c, so the remaining sign patterns cannot occur.
            _ => unreachable!("u + c < u - c"),
        })
    }

    /// Convert `(rho, u)` to conserved Euler variables.
    pub fn euler_conserved(rho: f64, u: f64) -> State {
        State::pair(rho, rho * u)
    }
}

/// Sign function with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Free-function form of [`SystemModel::entropy_eval`] returning `(U, F, grad U)`.
pub fn entropy_eval(model: &SystemModel, pair: &EntropyPair, u: &State) -> Result<(f64, f64, State)> {
    let v = model.entropy_eval(pair, u)?;
    Ok((v.u, v.f, v.grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_extrema_values() {
        let m = SystemModel::cubic();
        assert_eq!(m.f_scalar(1.0), -1.0);
        assert_eq!(m.f_scalar(-1.0), 1.0);
        assert_eq!(m.df_scalar(1.0), 0.0);
    }

    #[test]
    fn burgers_sonic_point() {
        let m = SystemModel::burgers();
        assert_eq!(m.flux(&State::scalar(0.0)).x(), 0.0);
        assert_eq!(m.jacobian(&State::scalar(0.0)).get(0, 0), 0.0);
        assert_eq!(m.sonic_point().unwrap(), 0.0);
    }

    #[test]
    fn euler_flux_at_rest() {
        let m = SystemModel::euler(2.0).unwrap();
        let f = m.flux(&SystemModel::euler_conserved(1.0, 0.0));
        assert_eq!(f.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn unknown_model_and_bad_gamma_rejected() {
        assert!(matches!(make_model("mhd", &BTreeMap::new()), Err(Error::UnknownModel(_))));
        assert!(matches!(SystemModel::euler(1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            SystemModel::linear2([[-5.0, 5.0], [-3.0, 3.0]], [0.0, 1.0]),
            Err(Error::InvalidParameter(_))
        ));
        let bad = BTreeMap::from([("gama".to_string(), 2.0)]);
        assert!(make_model("euler_isentropic", &bad).is_err());
    }

    #[test]
    fn linear2_eigen() {
        let m = make_model("linear2", &BTreeMap::new()).unwrap();
        let es = m.eigen_structure(&State::pair(0.3, -0.1)).unwrap();
        assert!((es.eigenvalues[0] + 2.0).abs() < 1e-12);
        assert!(es.eigenvalues[1].abs() < 1e-12);
        assert_eq!(es.p, 1);
        assert!(es.characteristic);
        assert!(es.biorthonormality_defect() < 1e-12);
    }

    #[test]
    fn lagrangian_eigen_at_v2() {
        let m = SystemModel::lagrangian_gas();
        let es = m.eigen_structure(&State::pair(2.0, 0.7)).unwrap();
        assert_eq!(es.eigenvalues, vec![-0.5, 0.5]);
        assert_eq!(es.p, 1);
        assert!(!es.characteristic);
    }

    #[test]
    fn burgers_eigen_at_sonic() {
        let es = SystemModel::burgers().eigen_structure(&State::scalar(0.0)).unwrap();
        assert_eq!(es.p, 0);
        assert!(es.characteristic);
    }

    #[test]
    fn euler_regions() {
        let m = SystemModel::euler(2.0).unwrap();
        assert_eq!(m.classify_euler_region(1.0, -2.0).unwrap(), EulerRegion::I);
        assert_eq!(m.classify_euler_region(1.0, 0.0).unwrap(), EulerRegion::III);
        assert_eq!(m.classify_euler_region(1.0, 2f64.sqrt()).unwrap(), EulerRegion::IV);
        assert_eq!(m.classify_euler_region(1.0, -(2f64.sqrt())).unwrap(), EulerRegion::II);
        assert_eq!(m.classify_euler_region(1.0, 3.0).unwrap(), EulerRegion::V);
        assert!(m.classify_euler_region(0.0, 0.0).is_err());
    }

    #[test]
    fn entropy_examples() {
        let m = SystemModel::burgers();
        let v = m.entropy_eval(&EntropyPair::energy(), &State::scalar(2.0)).unwrap();
        assert_eq!((v.u, v.f, v.grad.x()), (2.0, 8.0 / 3.0, 2.0));
        let k = m.entropy_eval(&EntropyPair::kruzkov(0.0), &State::scalar(-1.0)).unwrap();
        assert_eq!((k.u, k.f, k.grad.x()), (1.0, -0.5, -1.0));
        let z = m.entropy_eval(&EntropyPair::kruzkov(0.7), &State::scalar(0.7)).unwrap();
        assert_eq!((z.u, z.f, z.grad.x()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn scalar_extremum_cubic() {
        let m = SystemModel::cubic();
        let (x, v) = m.scalar_extremum(-2.0, 0.5, true);
        assert_eq!((x, v), (-1.0, 1.0));
        let (x, v) = m.scalar_extremum(-0.5, 3.0, false);
        assert_eq!((x, v), (1.0, -1.0));
    }

    #[test]
    fn region_checks() {
        let m = SystemModel::elastodynamics();
        assert!(m.in_region(&State::pair(0.5, -3.0)));
        assert!(!m.in_region(&State::pair(-0.5, 0.0)));
        assert!(matches!(m.eigen_structure(&State::pair(-1.0, 0.0)), Err(Error::Domain(_))));
    }
}
