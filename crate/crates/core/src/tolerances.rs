//! Numerical tolerances shared across modules.
//!
//! Each constant names the check it governs so that a reader can trace any
//! pass/fail decision back to a single number.

/// Absolute tolerance for membership in closed-form admissible sets
/// (closed endpoints and isolated points).
pub const TOL_SET_EXACT: f64 = 1e-9;

/// Band used when comparing sampled or numerically computed sets against a
/// closed form. Candidates closer than this to a set boundary are not
/// compared.
pub const TOL_SET_NUMERIC: f64 = 1e-4;

/// Relative error allowed between the analytic Jacobian and a centered
/// finite difference of the flux.
pub const JACOBIAN_FD_REL: f64 = 1e-6;

/// Step used for finite differences, relative to the state scale.
pub const FD_STEP_REL: f64 = 1e-5;

/// Biorthonormality and eigen-residual tolerance.
pub const EIGEN_TOL: f64 = 1e-10;

/// Entropy compatibility residual `|grad F - grad U . grad f|`.
pub const ENTROPY_COMPAT: f64 = 1e-6;

/// Discrete entropy residual certifying a cell entropy inequality.
pub const DISCRETE_ENTROPY: f64 = 1e-12;

/// Newton tolerance for implicit solves and curve intersections.
pub const NEWTON_TOL: f64 = 1e-12;

/// Maximum Newton iterations.
pub const NEWTON_MAX_ITER: usize = 100;

/// Maximum number of step halvings in damped Newton.
pub const NEWTON_MAX_HALVINGS: usize = 30;

/// Relative tolerance of the adaptive ODE integrator.
pub const ODE_RTOL: f64 = 1e-10;

/// Absolute tolerance of the adaptive ODE integrator.
pub const ODE_ATOL: f64 = 1e-12;

/// Adaptive quadrature tolerance.
pub const QUAD_TOL: f64 = 1e-12;

/// Speeds below this (relative to the largest speed) count as zero.
pub fn tol_char(max_abs_speed: f64) -> f64 {
    1e-9 * (1.0 + max_abs_speed)
}

/// Convergence tolerance for a layer profile approaching `v_inf`.
pub fn tol_conv(norm_v_inf: f64) -> f64 {
    1e-6 * (1.0 + norm_v_inf)
}

/// Derivative norm below which a trajectory that has not converged is
/// declared stalled.
pub const STALL_SPEED: f64 = 1e-12;

/// Default horizon for continuous layer profiles.
pub const LAYER_HORIZON_CONTINUOUS: f64 = 200.0;

/// Default horizon (number of steps) for discrete layer profiles.
pub const LAYER_HORIZON_DISCRETE: usize = 500;

/// Upper cap on adaptively extended horizons.
pub const LAYER_HORIZON_CAP_CONTINUOUS: f64 = 1.0e5;

/// Upper cap on adaptively extended discrete horizons.
pub const LAYER_HORIZON_CAP_DISCRETE: usize = 2_000_000;

/// Distance from `v_inf`, relative to the initial distance, past which a
/// layer trajectory is declared divergent.
pub const DIVERGENCE_FACTOR: f64 = 1.0e6;

/// Splitting consistency `|f - f_plus - f_minus|`.
pub const SPLITTING_CONSISTENCY: f64 = 1e-8;

/// Time-window spread above which a trace is flagged as possibly oscillating,
/// expressed as a multiple of the scheme tolerance.
pub const OSCILLATION_FACTOR: f64 = 10.0;
