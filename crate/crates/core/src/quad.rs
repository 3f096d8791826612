//! Adaptive quadrature.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` over `[a, b]` with absolute tolerance
/// `tol`. Works for `a > b` (returns the signed integral).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let v = simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 60)?;
    if !v.is_finite() {
        return Err(Error::SolverFailure(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || depth == 0 || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        if depth == 0 && delta.abs() > 15.0 * tol {
            return Err(Error::SolverFailure(format!(
                "adaptive quadrature did not reach tolerance {tol:e} near {m}"
            )));
        }
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}
