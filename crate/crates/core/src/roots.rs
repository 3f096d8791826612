//! Root finding and one-dimensional optimisation.

use crate::error::{Error, Result};
use crate::linalg::{Mat, State};
use crate::tolerances::{NEWTON_MAX_HALVINGS, NEWTON_MAX_ITER};

/// Brent's method on a bracketing interval `[a, b]` with `f(a) f(b) <= 0`.
pub fn brent(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::SolverFailure(format!(
            "brent: interval [{a}, {b}] does not bracket a root (f = {fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b);
    }
    Err(Error::SolverFailure("brent: iteration limit reached".into()))
}

/// Golden-section search for a maximiser of `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while (b - a).abs() > tol && iter < 300 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
        iter += 1;
    }
    let candidates = [(a, f(a)), (b, f(b)), (x1, f1), (x2, f2)];
    candidates
        .into_iter()
        .filter(|(_, v)| !v.is_nan())
        .fold((a, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Golden-section search for a minimiser; returns `(argmin, min)`.
pub fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_max(|x| -f(x), a, b, tol);
    (x, -v)
}

/// Maximum of `f` on `[a, b]` by dense sampling followed by golden refinement
/// around every local maximum of the samples.
pub fn sampled_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64, samples: usize) -> (f64, f64) {
    if a == b {
        return (a, f(a));
    }
    let n = samples.max(3);
    let xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut best = (xs[0], vs[0]);
    for i in 0..n {
        if vs[i] > best.1 {
            best = (xs[i], vs[i]);
        }
        let left = if i == 0 { f64::NEG_INFINITY } else { vs[i - 1] };
        let right = if i + 1 == n { f64::NEG_INFINITY } else { vs[i + 1] };
        if vs[i] >= left && vs[i] >= right && i > 0 && i + 1 < n {
            let (x, v) = golden_max(f, xs[i - 1], xs[i + 1], 1e-14 * (1.0 + xs[i].abs()));
            if v > best.1 {
                best = (x, v);
            }
        }
    }
    best
}

/// Damped Newton iteration for `F(x) = 0` with an analytic Jacobian.
///
/// The full step is halved (up to [`NEWTON_MAX_HALVINGS`] times) until the
/// residual norm decreases. Convergence is declared when the residual norm
/// drops below `tol` (scaled by `1 + |x|`).
pub fn newton(
    residual: impl Fn(&State) -> Result<State>,
    jacobian: impl Fn(&State) -> Result<Mat>,
    x0: State,
    tol: f64,
) -> Result<State> {
    let mut x = x0;
    let mut r = residual(&x)?;
    let mut rn = r.norm();
    for _ in 0..NEWTON_MAX_ITER {
        if rn <= tol * (1.0 + x.norm()) {
            // Converged; two full steps more bring the residual to round-off.
            for _ in 0..2 {
                let Ok(dx) = jacobian(&x).and_then(|j| j.solve(&r)) else { break };
                let trial = x - dx;
                match residual(&trial) {
                    Ok(rt) if rt.norm() < rn => {
                        x = trial;
                        r = rt;
                        rn = r.norm();
                    }
                    _ => break,
                }
            }
            return Ok(x);
        }
        let dx = jacobian(&x)?.solve(&r)?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let trial = x - dx * step;
            if let Ok(rt) = residual(&trial) {
                let rtn = rt.norm();
                if rtn.is_finite() && rtn < rn {
                    x = trial;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // No decrease is possible at machine precision: accept if already tiny.
            if rn <= 1e3 * tol * (1.0 + x.norm()) {
                return Ok(x);
            }
            return Err(Error::SolverFailure(format!(
                "damped Newton stalled at {x:?} with residual {rn:e}"
            )));
        }
    }
    if rn <= 1e3 * tol * (1.0 + x.norm()) {
        return Ok(x);
    }
    Err(Error::SolverFailure(format!(
        "damped Newton did not converge: residual {rn:e} at {x:?}"
    )))
}

/// Scalar damped Newton with derivative; falls back to Brent on `bracket`
/// when Newton fails.
pub fn newton_scalar(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    x0: f64,
    tol: f64,
    bracket: Option<(f64, f64)>,
) -> Result<f64> {
    let res = newton(
        |x| {
            let v = f(x.x());
            if v.is_finite() {
                Ok(State::scalar(v))
            } else {
                Err(Error::Domain("non-finite residual".into()))
            }
        },
        |x| Ok(Mat::scalar(df(x.x()))),
        State::scalar(x0),
        tol,
    );
    match (res, bracket) {
        (Ok(x), _) => Ok(x.x()),
        (Err(_), Some((a, b))) => brent(f, a, b, tol * (1.0 + a.abs().max(b.abs()))),
        (Err(e), None) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_sqrt2() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn brent_rejects_non_bracket() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -1.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_max_finds_interior_peak_of_sine() {
        let f = |x: f64| x.sin();
        let (x, v) = sampled_max(&f, 0.0, 3.0, 17);
        assert!((x - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newton_solves_2d_system() {
        // x^2 + y^2 = 4, x - y = 0
        let res = |s: &State| Ok(State::pair(s[0] * s[0] + s[1] * s[1] - 4.0, s[0] - s[1]));
        let jac = |s: &State| Ok(Mat::new2(2.0 * s[0], 2.0 * s[1], 1.0, -1.0));
        let x = newton(res, jac, State::pair(3.0, 1.0), 1e-14).unwrap();
        assert!((x[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!((x[1] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn newton_scalar_uses_bracket_fallback() {
        // Derivative deliberately wrong sign: Newton diverges, Brent rescues.
        let x = newton_scalar(|x| x.powi(3) - 8.0, |_| -1.0, 0.0, 1e-13, Some((0.0, 5.0))).unwrap();
        assert!((x - 2.0).abs() < 1e-10);
    }
}
