//! Riemann solvers: the self-similar solution of `u_t + f(u)_x = 0` with
//! piecewise-constant data `(u_left, u_right)`, its trace `R(u_left, u_right)`
//! on the ray `x/t = 0+`, and the Godunov flux `f(R)`.
//!
//! Scalar laws are solved through the convex envelope of `f` (for
//! `u_left < u_right`) or the concave envelope (for `u_left > u_right`); the
//! envelopes are exact for `burgers` and `cubic` and built from a Graham scan
//! of `2^12` samples otherwise. The elastodynamics p-system is solved by
//! intersecting the forward 1-wave curve of the left state with the backward
//! 2-wave curve of the right state.
//!
//! A stationary shock is read from the right: its trace is the right state.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::State;
use crate::quad;
use crate::roots;
use crate::systems::{ModelKind, SystemModel};
use crate::tolerances::{NEWTON_MAX_HALVINGS, NEWTON_MAX_ITER, NEWTON_TOL};

/// Number of samples of the generic envelope construction.
pub const ENVELOPE_SAMPLES: usize = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveKind {
    Shock,
    Rarefaction,
    ContactLike,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Wave {
    pub kind: WaveKind,
    /// Family index (1-based) for systems; 1 for scalar waves.
    pub family: usize,
    pub speed_lo: f64,
    pub speed_hi: f64,
    pub left: State,
    pub right: State,
}

#[derive(Clone, Debug, Serialize)]
pub struct RiemannFan {
    pub left: State,
    pub right: State,
    /// Waves ordered by increasing speed.
    pub waves: Vec<Wave>,
    pub trace_at_zero_plus: State,
    pub flux_at_zero: State,
    /// True when `x/t = 0` lies inside a rarefaction (the trace is sonic).
    pub sonic: bool,
}

impl RiemannFan {
    fn constant(model: &SystemModel, w: State) -> Self {
        RiemannFan {
            left: w,
            right: w,
            waves: vec![],
            trace_at_zero_plus: w,
            flux_at_zero: model.flux(&w),
            sonic: false,
        }
    }
}

/// A piece of a scalar envelope on `[a, b]`, `a < b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Piece {
    /// The envelope is the chord of `f` between `a` and `b`.
    Chord { a: f64, b: f64 },
    /// The envelope coincides with `f` on `[a, b]`.
    Curve { a: f64, b: f64 },
}

impl Piece {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            Piece::Chord { a, b } | Piece::Curve { a, b } => (a, b),
        }
    }

    fn reflect(&self) -> Piece {
        match *self {
            Piece::Chord { a, b } => Piece::Chord { a: -b, b: -a },
            Piece::Curve { a, b } => Piece::Curve { a: -b, b: -a },
        }
    }
}

fn reflect_all(pieces: Vec<Piece>) -> Vec<Piece> {
    pieces.iter().rev().map(Piece::reflect).collect()
}

/// Pieces of the convex envelope of the cubic flux on `[a, b]`.
fn cubic_convex_pieces(a: f64, b: f64) -> Vec<Piece> {
    if a >= 0.0 {
        return vec![Piece::Curve { a, b }];
    }
    // The tangent from (a, f(a)) touches the convex branch at t = -a/2.
    let t = -0.5 * a;
    if t >= b {
        vec![Piece::Chord { a, b }]
    } else {
        vec![Piece::Chord { a, b: t }, Piece::Curve { a: t, b }]
    }
}

/// Lower convex hull of sampled points; returns hull vertex indices.
fn lower_hull(xs: &[f64], ys: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(64);
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (xs[a] - xs[o]) * (ys[i] - ys[o]) - (ys[a] - ys[o]) * (xs[i] - xs[o]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Pieces of the convex (`upper = false`) or concave (`upper = true`)
/// envelope from a Graham scan of [`ENVELOPE_SAMPLES`] samples.
pub fn generic_envelope(model: &SystemModel, a: f64, b: f64, upper: bool) -> Vec<Piece> {
    let n = ENVELOPE_SAMPLES;
    let xs: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect();
    let sign = if upper { -1.0 } else { 1.0 };
    let ys: Vec<f64> = xs.iter().map(|&x| sign * model.f_scalar(x)).collect();
    let hull = lower_hull(&xs, &ys);
    let mut pieces = Vec::new();
    let mut run_start: Option<usize> = None;
    for w in hull.windows(2) {
        let (i, j) = (w[0], w[1]);
        if j == i + 1 {
            run_start.get_or_insert(i);
        } else {
            if let Some(s) = run_start.take() {
                pieces.push(Piece::Curve { a: xs[s], b: xs[i] });
            }
            pieces.push(Piece::Chord { a: xs[i], b: xs[j] });
        }
    }
    if let Some(s) = run_start {
        pieces.push(Piece::Curve { a: xs[s], b: xs[*hull.last().unwrap()] });
    }
    pieces
}

fn envelope(model: &SystemModel, a: f64, b: f64, upper: bool, generic: bool) -> Vec<Piece> {
    if generic {
        return generic_envelope(model, a, b, upper);
    }
    match (model.kind(), upper) {
        (ModelKind::Burgers, false) => vec![Piece::Curve { a, b }],
        (ModelKind::Burgers, true) => vec![Piece::Chord { a, b }],
        (ModelKind::Cubic, false) => cubic_convex_pieces(a, b),
        // f is odd, so the concave envelope on [a, b] mirrors the convex one on [-b, -a].
        (ModelKind::Cubic, true) => reflect_all(cubic_convex_pieces(-b, -a)),
        _ => generic_envelope(model, a, b, upper),
    }
}

/// Root of `f'` on `[lo, hi]` (a sonic state inside a rarefaction).
fn sonic_state(model: &SystemModel, lo: f64, hi: f64) -> f64 {
    if let Some(cands) = model.df_preimages(0.0) {
        if let Some(u) = cands.into_iter().find(|u| *u >= lo && *u <= hi) {
            return u;
        }
    }
    roots::brent(|u| model.df_scalar(u), lo, hi, 1e-15 * (1.0 + lo.abs().max(hi.abs())))
        .unwrap_or(0.5 * (lo + hi))
}

fn scalar_fan(model: &SystemModel, ul: f64, ur: f64, generic: bool) -> RiemannFan {
    if ul == ur {
        return RiemannFan::constant(model, State::scalar(ul));
    }
    let ascending = ul < ur;
    let mut pieces = if ascending {
        envelope(model, ul, ur, false, generic)
    } else {
        envelope(model, ur, ul, true, generic)
    };
    if !ascending {
        pieces.reverse();
    }
    let mut waves = Vec::with_capacity(pieces.len());
    let mut trace: Option<(f64, bool)> = None;
    for p in &pieces {
        let (lo, hi) = p.bounds();
        let (start, end) = if ascending { (lo, hi) } else { (hi, lo) };
        match p {
            Piece::Chord { .. } => {
                let s = (model.f_scalar(end) - model.f_scalar(start)) / (end - start);
                waves.push(Wave {
                    kind: WaveKind::Shock,
                    family: 1,
                    speed_lo: s,
                    speed_hi: s,
                    left: State::scalar(start),
                    right: State::scalar(end),
                });
                if trace.is_none() && s > 0.0 {
                    trace = Some((start, false));
                }
            }
            Piece::Curve { .. } => {
                let (s0, s1) = (model.df_scalar(start), model.df_scalar(end));
                waves.push(Wave {
                    kind: WaveKind::Rarefaction,
                    family: 1,
                    speed_lo: s0,
                    speed_hi: s1,
                    left: State::scalar(start),
                    right: State::scalar(end),
                });
                if trace.is_none() {
                    if s0 > 0.0 {
                        trace = Some((start, false));
                    } else if s1 > 0.0 {
                        trace = Some((sonic_state(model, lo, hi), true));
                    }
                }
            }
        }
    }
    let (t, sonic) = trace.unwrap_or((ur, false));
    let tr = State::scalar(t);
    RiemannFan {
        left: State::scalar(ul),
        right: State::scalar(ur),
        waves,
        trace_at_zero_plus: tr,
        flux_at_zero: model.flux(&tr),
        sonic,
    }
}

/// Riemann fan of a scalar law.
pub fn scalar_riemann_trace(model: &SystemModel, u_left: f64, u_right: f64) -> Result<RiemannFan> {
    if !model.is_scalar() {
        return Err(Error::InvalidParameter("scalar Riemann solver needs a scalar model".into()));
    }
    Ok(scalar_fan(model, u_left, u_right, false))
}

/// Scalar Riemann fan forced through the sampled envelope construction, for
/// any scalar flux (used for user-supplied fluxes and as a cross-check).
pub fn scalar_riemann_trace_generic(model: &SystemModel, u_left: f64, u_right: f64) -> Result<RiemannFan> {
    if !model.is_scalar() {
        return Err(Error::InvalidParameter("scalar Riemann solver needs a scalar model".into()));
    }
    Ok(scalar_fan(model, u_left, u_right, true))
}

/// Scalar Godunov flux: `min f` on `[v, w]` if `v <= w`, `max f` on `[w, v]` otherwise.
pub fn scalar_godunov_flux(model: &SystemModel, v: f64, w: f64) -> f64 {
    if v <= w {
        model.scalar_extremum(v, w, false).1
    } else {
        model.scalar_extremum(w, v, true).1
    }
}

/// The trace `R(v, w)` at `x/t = 0+`.
pub fn trace(model: &SystemModel, v: &State, w: &State) -> Result<State> {
    riemann_fan(model, v, w).map(|f| f.trace_at_zero_plus)
}

/// Riemann fan for any model with a Riemann solver (scalar laws, elastodynamics).
pub fn riemann_fan(model: &SystemModel, v: &State, w: &State) -> Result<RiemannFan> {
    if model.is_scalar() {
        scalar_riemann_trace(model, v.x(), w.x())
    } else {
        psystem_riemann_trace(model, v, w)
    }
}

/// Godunov numerical flux `f(R(v, w))`.
pub fn godunov_flux(model: &SystemModel, v: &State, w: &State) -> Result<State> {
    if model.is_scalar() {
        Ok(State::scalar(scalar_godunov_flux(model, v.x(), w.x())))
    } else {
        Ok(psystem_riemann_trace(model, v, w)?.flux_at_zero)
    }
}

/// Whether a Riemann solver is available for the model.
pub fn has_riemann_solver(model: &SystemModel) -> bool {
    model.is_scalar() || matches!(model.kind(), ModelKind::Elastodynamics { .. })
}

// ---- p-system --------------------------------------------------------------

struct WaveCurves<'a> {
    model: &'a SystemModel,
    left: State,
    right: State,
}

impl WaveCurves<'_> {
    fn sqrt_ds(&self, v: f64) -> f64 {
        self.model.dsigma(v).sqrt()
    }

    fn rarefaction_integral(&self, from: f64, to: f64) -> Result<f64> {
        let scale = 1.0 + from.abs().max(to.abs());
        quad::integrate(|s| self.sqrt_ds(s), from, to, 1e-13 * scale)
    }

    /// Hugoniot term `sqrt((sigma(v) - sigma(v0)) (v - v0))` and its v-derivative.
    fn hugoniot(&self, v: f64, v0: f64) -> (f64, f64) {
        let ds = self.model.sigma(v) - self.model.sigma(v0);
        let g = ds * (v - v0);
        if g <= 0.0 {
            return (0.0, self.sqrt_ds(v0));
        }
        let r = g.sqrt();
        let dg = self.model.dsigma(v) * (v - v0) + ds;
        (r, dg / (2.0 * r))
    }

    /// Forward 1-wave curve from the left state: u and du/dv.
    fn u1(&self, v: f64) -> Result<(f64, f64)> {
        let (vl, ul) = (self.left[0], self.left[1]);
        if v <= vl {
            Ok((ul + self.rarefaction_integral(vl, v)?, self.sqrt_ds(v)))
        } else {
            let (h, dh) = self.hugoniot(v, vl);
            Ok((ul + h, dh))
        }
    }

    /// Backward 2-wave curve into the right state: u and du/dv.
    fn u2(&self, v: f64) -> Result<(f64, f64)> {
        let (vr, ur) = (self.right[0], self.right[1]);
        if v <= vr {
            Ok((ur + self.rarefaction_integral(v, vr)?, -self.sqrt_ds(v)))
        } else {
            let (h, dh) = self.hugoniot(v, vr);
            Ok((ur - h, -dh))
        }
    }

    fn phi(&self, v: f64) -> Result<(f64, f64)> {
        let (a, da) = self.u1(v)?;
        let (b, db) = self.u2(v)?;
        Ok((a - b, da - db))
    }
}

/// Exact Riemann solver for elastodynamics `v_t - u_x = 0, u_t - sigma(v)_x = 0`
/// on `v > 0` (where `v sigma'' > 0`).
///
/// The middle state `v*` solves `u1(v*) = u2(v*)`, where `u1` is the forward
/// 1-curve of the left state and `u2` the backward 2-curve of the right state.
/// The difference is strictly increasing in `v`, and a damped Newton iteration
/// (step halving up to 30 times, at most 100 iterations, residual tolerance
/// `1e-12`) finds the root.
pub fn psystem_riemann_trace(model: &SystemModel, left: &State, right: &State) -> Result<RiemannFan> {
    if !matches!(model.kind(), ModelKind::Elastodynamics { .. }) {
        return Err(Error::InvalidParameter(format!(
            "no exact Riemann solver for model `{}`",
            model.name()
        )));
    }
    model.check_region(left)?;
    model.check_region(right)?;
    if left == right {
        return Ok(RiemannFan::constant(model, *left));
    }
    let wc = WaveCurves { model, left: *left, right: *right };

    // Existence on v > 0: phi(0+) must be negative.
    let (phi0, _) = wc.phi(0.0)?;
    if phi0 >= 0.0 {
        return Err(Error::Domain(format!(
            "Riemann problem {left:?} | {right:?} has no intermediate state with v > 0"
        )));
    }

    let mut v = 0.5 * (left[0] + right[0]);
    let (mut r, mut dr) = wc.phi(v)?;
    let scale = 1.0 + left[1].abs().max(right[1].abs());
    let mut converged = r.abs() <= NEWTON_TOL * scale;
    let mut iter = 0;
    while !converged && iter < NEWTON_MAX_ITER {
        iter += 1;
        let step = r / dr;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let trial = v - lambda * step;
            if trial > 0.0 {
                let (rt, drt) = wc.phi(trial)?;
                if rt.abs() < r.abs() {
                    v = trial;
                    r = rt;
                    dr = drt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        converged = r.abs() <= NEWTON_TOL * scale;
    }
    if !converged && r.abs() > 1e2 * NEWTON_TOL * scale {
        return Err(Error::SolverFailure(format!(
            "p-system Newton iteration did not converge (residual {r:e} after {iter} iterations)"
        )));
    }

    let (u_mid, _) = wc.u1(v)?;
    let mid = State::pair(v, u_mid);
    let mut waves = Vec::new();
    let (vl, vr) = (left[0], right[0]);
    let sp = |x: f64| wc.sqrt_ds(x);
    if v < vl {
        waves.push(Wave { kind: WaveKind::Rarefaction, family: 1, speed_lo: -sp(vl), speed_hi: -sp(v), left: *left, right: mid });
    } else if v > vl {
        let s = -((model.sigma(v) - model.sigma(vl)) / (v - vl)).sqrt();
        waves.push(Wave { kind: WaveKind::Shock, family: 1, speed_lo: s, speed_hi: s, left: *left, right: mid });
    }
    if v < vr {
        waves.push(Wave { kind: WaveKind::Rarefaction, family: 2, speed_lo: sp(v), speed_hi: sp(vr), left: mid, right: *right });
    } else if v > vr {
        let s = ((model.sigma(v) - model.sigma(vr)) / (v - vr)).sqrt();
        waves.push(Wave { kind: WaveKind::Shock, family: 2, speed_lo: s, speed_hi: s, left: mid, right: *right });
    }
    // 1-waves travel left and 2-waves right, so the trace is the middle state.
    Ok(RiemannFan {
        left: *left,
        right: *right,
        waves,
        trace_at_zero_plus: mid,
        flux_at_zero: model.flux(&mid),
        sonic: false,
    })
}

/// Residual `|u1(v*) - u2(v*)|` of the wave-curve intersection of a solved fan.
pub fn psystem_intersection_residual(model: &SystemModel, fan: &RiemannFan) -> Result<f64> {
    let wc = WaveCurves { model, left: fan.left, right: fan.right };
    let v = fan.trace_at_zero_plus[0];
    Ok(wc.phi(v)?.0.abs())
}

/// State on the forward 2-rarefaction curve of `from` at `v = v_end > v_from`.
pub fn psystem_two_rarefaction(model: &SystemModel, from: &State, v_end: f64) -> Result<State> {
    let wc = WaveCurves { model, left: *from, right: *from };
    let du = wc.rarefaction_integral(from[0], v_end)?;
    Ok(State::pair(v_end, from[1] - du))
}

/// The conjugate state `u* != u_B` with `f(u*) = f(u_B)` for a convex flux.
pub fn conjugate_state(model: &SystemModel, u_b: f64) -> Result<f64> {
    let us = model.sonic_point()?;
    if (u_b - us).abs() <= 1e-14 * (1.0 + us.abs()) {
        return Err(Error::InvalidParameter(format!(
            "u_B = {u_b} is the sonic point; it has no conjugate state"
        )));
    }
    if matches!(model.kind(), ModelKind::Burgers) {
        return Ok(2.0 * us - u_b);
    }
    let target = model.f_scalar(u_b);
    let dir = if u_b > us { -1.0 } else { 1.0 };
    let mut d = (u_b - us).abs();
    for _ in 0..200 {
        let far = us + dir * d;
        if model.f_scalar(far) >= target {
            return roots::brent(|u| model.f_scalar(u) - target, us.min(far), us.max(far), 1e-15 * (1.0 + d));
        }
        d *= 2.0;
    }
    Err(Error::SolverFailure("conjugate state not bracketed".into()))
}

/// Solutions of `f(u) = f(u_B)`, `u != u_B`, for the cubic flux.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Companions {
    /// Ascending.
    pub values: Vec<f64>,
    /// Largest solution when there are two.
    pub largest: Option<f64>,
    /// Smallest solution when there are two.
    pub smallest: Option<f64>,
}

/// Roots of `f(u) = f(u_B)` other than `u_B` for `f = (u^3 - 3u)/2`, by
/// factoring out `u - u_B`: `u^2 + u_B u + u_B^2 - 3 = 0`.
pub fn cubic_companions(model: &SystemModel, u_b: f64) -> Result<Companions> {
    if !matches!(model.kind(), ModelKind::Cubic) {
        return Err(Error::InvalidParameter("cubic_companions needs the cubic model".into()));
    }
    let disc = 12.0 - 3.0 * u_b * u_b;
    let mut values = Vec::new();
    if disc >= 0.0 {
        let c = u_b * u_b - 3.0;
        let sq = disc.sqrt();
        // Numerically stable pair of roots of u^2 + b u + c with b = u_B.
        let q = -0.5 * (u_b + if u_b >= 0.0 { sq } else { -sq });
        let (r1, r2) = if q != 0.0 { (q, c / q) } else { (0.5 * sq, -0.5 * sq) };
        for r in [r1, r2] {
            let dup = values.iter().any(|v: &f64| (v - r).abs() <= 1e-12 * (1.0 + r.abs()));
            if (r - u_b).abs() > 1e-9 * (1.0 + u_b.abs()) && !dup {
                values.push(r);
            }
        }
    }
    values.sort_by(f64::total_cmp);
    let (largest, smallest) = if values.len() == 2 { (Some(values[1]), Some(values[0])) } else { (None, None) };
    Ok(Companions { values, largest, smallest })
}
