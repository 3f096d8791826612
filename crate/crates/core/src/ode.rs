//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4) pair).

use crate::error::{Error, Result};
use crate::linalg::State;
use crate::tolerances::{ODE_ATOL, ODE_RTOL};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    /// Largest step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: ODE_RTOL, atol: ODE_ATOL, h0: None, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

/// Returned by an observer after each accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOutcome {
    pub t: f64,
    pub y: State,
    pub steps: usize,
    /// True when the observer requested termination before `t1`.
    pub stopped: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Differences between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = rhs(t, y)` from `t0` to `t1` (either direction).
///
/// `observer(t, y, y')` is called at the initial point and after every
/// accepted step; returning [`Control::Stop`] ends the integration early.
/// A right-hand side error on a trial stage shrinks the step; the error is
/// returned only when the step can no longer be reduced.
pub fn integrate<F, O>(
    rhs: F,
    y0: State,
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<OdeOutcome>
where
    F: Fn(f64, &State) -> Result<State>,
    O: FnMut(f64, &State, &State) -> Control,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y)?;
    if observer(t, &y, &k1) == Control::Stop {
        return Ok(OdeOutcome { t, y, steps: 0, stopped: true });
    }
    if span == 0.0 {
        return Ok(OdeOutcome { t, y, steps: 0, stopped: false });
    }
    let mut h = match opts.h0 {
        Some(h) => h.abs(),
        None => {
            let sc = opts.atol + opts.rtol * y.norm_inf();
            let d0 = y.norm_inf() / sc;
            let d1 = k1.norm_inf() / sc;
            let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h.min(span)
        }
    }
    .min(opts.h_max)
    .max(1e-14 * (1.0 + t0.abs()));

    let h_min = 1e-14 * (1.0 + t0.abs().max(t1.abs()));
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::SolverFailure(format!("ODE step limit reached at t = {t}")));
        }
        let last = h >= (t1 - t).abs();
        if last {
            h = (t1 - t).abs();
        }
        let hs = h * dir;
        let stage = (|| -> Result<(State, State, f64)> {
            let k2 = rhs(t + C2 * hs, &(y + k1 * (hs * A21)))?;
            let k3 = rhs(t + C3 * hs, &(y + (k1 * A31 + k2 * A32) * hs))?;
            let k4 = rhs(t + C4 * hs, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * hs))?;
            let k5 = rhs(t + C5 * hs, &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * hs))?;
            let k6 = rhs(t + hs, &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * hs))?;
            let y_new = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * hs;
            let k7 = rhs(t + hs, &y_new)?;
            let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * hs;
            let mut err: f64 = 0.0;
            for i in 0..y.dim() {
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((err_vec[i] / sc).abs());
            }
            if !y_new.is_finite() || !err.is_finite() {
                return Err(Error::Domain("non-finite ODE state".into()));
            }
            Ok((y_new, k7, err))
        })();
        match stage {
            Ok((y_new, k7, err)) if err <= 1.0 => {
                t = if last { t1 } else { t + hs };
                y = y_new;
                k1 = k7;
                steps += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * fac).min(opts.h_max);
                if observer(t, &y, &k1) == Control::Stop {
                    return Ok(OdeOutcome { t, y, steps, stopped: true });
                }
            }
            Ok((_, _, err)) => {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.5);
                if h < h_min {
                    return Err(Error::SolverFailure(format!("ODE step size underflow at t = {t}")));
                }
            }
            Err(e) => {
                h *= 0.25;
                if h < h_min {
                    return Err(e);
                }
            }
        }
    }
    Ok(OdeOutcome { t, y, steps, stopped: false })
}
