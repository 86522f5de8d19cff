//! Trajectory optimization over spline control points.
//!
//! The cost is `α_j ∫‖j‖² + α_ψ ∫ψ̈² − α_FOV ∫ inFOV/(ε + γ‖ṡ‖²) + α_g ‖p(t_f) − g‖²` and every
//! constraint (velocity, acceleration, jerk and ψ̇ limits, fixed separating planes) is
//! linear in the control points. [`solve`] runs a feasible-direction SQP: each step solves
//! a convex QP with a damped-BFGS Hessian over the exact linear constraints, followed by
//! an Armijo backtracking line search. Iterates stay feasible and the cost never increases.

mod problem;
mod qp;

pub use problem::{ConstraintKind, CostTerms, NlpProblem, PlaneConstraint, ProblemSpec, VariableSet};
pub use qp::{solve_qp, QpError, QpSolution};

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::ad::Real;
use crate::config::PlannerConfig;
use crate::geometry::{camera_point_with_rate, in_fov_camera_frame, CameraModel, FlatState, GeometryError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizerError {
    #[error("Simpson's rule needs an even, positive subinterval count (got {0})")]
    OddSampleCount(usize),
    #[error("attitude is singular at a quadrature node")]
    SingularAttitude,
    #[error("initial guess violates the constraints by {0:e}")]
    InfeasibleGuess(f64),
}

/// Composite Simpson weights (without the `h` factor) for `n` subintervals.
pub fn simpson_weights(n: usize) -> Result<Vec<f64>, OptimizerError> {
    if n < 2 || n % 2 != 0 {
        return Err(OptimizerError::OddSampleCount(n));
    }
    Ok((0..=n)
        .map(|k| {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w / 3.0
        })
        .collect())
}

/// Composite Simpson estimate of `∫_a^b f` with `n` (even) subintervals.
pub fn simpson_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Result<f64, OptimizerError> {
    let w = simpson_weights(n)?;
    let h = (b - a) / n as f64;
    Ok(w.iter().enumerate().map(|(k, wk)| wk * f(a + k as f64 * h)).sum::<f64>() * h)
}

/// `inFOV / (ε + γ‖ṡ‖²)` for an obstacle at `obstacle_p` moving with `obstacle_v`.
///
/// Written as `inFOV·z⁴ / (ε z⁴ + γ f² ‖ż_xy‖²)` with the image-velocity numerator
/// `ż_xy = ṗ_xy z − p_xy ż`, which stays finite when the obstacle crosses the image plane.
pub fn perception_reward<S: Real>(
    cam: &CameraModel,
    epsilon: f64,
    gamma_vel: f64,
    state: &FlatState<S>,
    obstacle_p: [f64; 3],
    obstacle_v: [f64; 3],
) -> Result<S, GeometryError> {
    let (pc, pc_dot) = camera_point_with_rate(
        cam,
        state,
        obstacle_p.map(S::cst),
        obstacle_v.map(S::cst),
    )?;
    let in_fov = in_fov_camera_frame(cam, pc);
    let z2 = pc[2] * pc[2];
    let z4 = z2 * z2;
    let nx = (pc_dot[0] * pc[2] - pc[0] * pc_dot[2]) * cam.focal_length;
    let ny = (pc_dot[1] * pc[2] - pc[1] * pc_dot[2]) * cam.focal_length;
    let den = z4 * epsilon + (nx * nx + ny * ny) * gamma_vel;
    if den.value() <= f64::MIN_POSITIVE {
        return Ok(S::cst(0.0));
    }
    Ok(in_fov * z4 / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostWeights {
    pub alpha_j: f64,
    pub alpha_psi: f64,
    pub alpha_fov: f64,
    pub alpha_g: f64,
    pub epsilon: f64,
    pub gamma_vel: f64,
}

impl From<&PlannerConfig> for CostWeights {
    fn from(c: &PlannerConfig) -> Self {
        Self {
            alpha_j: c.alpha_j,
            alpha_psi: c.alpha_psi,
            alpha_fov: c.alpha_fov,
            alpha_g: c.alpha_g,
            epsilon: c.epsilon,
            gamma_vel: c.gamma_vel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Limits {
    pub v_max: Vector3<f64>,
    pub a_max: Vector3<f64>,
    pub j_max: Vector3<f64>,
    pub psi_dot_max: f64,
}

impl From<&PlannerConfig> for Limits {
    fn from(c: &PlannerConfig) -> Self {
        Self {
            v_max: c.v_max,
            a_max: c.a_max,
            j_max: c.j_max,
            psi_dot_max: c.psi_dot_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl From<&PlannerConfig> for SolverSettings {
    fn from(c: &PlannerConfig) -> Self {
        Self {
            max_iterations: c.solver_max_iterations,
            tolerance: c.solver_tolerance,
        }
    }
}

/// Tolerance of the post-solve constraint audit.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub qp_iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub max_violation: f64,
    pub converged: bool,
    pub termination: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Optimized { x: DVector<f64>, report: SolveReport },
    /// The solver could not improve on the guess; carries the guess unchanged.
    FallbackToGuess { x: DVector<f64>, report: SolveReport },
}

impl SolveOutcome {
    pub fn x(&self) -> &DVector<f64> {
        match self {
            Self::Optimized { x, .. } | Self::FallbackToGuess { x, .. } => x,
        }
    }

    pub fn report(&self) -> &SolveReport {
        match self {
            Self::Optimized { report, .. } | Self::FallbackToGuess { report, .. } => report,
        }
    }
}

fn initial_hessian(h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(1e-6, f64::max);
    let mut b = h.clone();
    let mut shift = 0.0;
    while b.clone().cholesky().is_none() {
        shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
        b = h + DMatrix::identity(n, n) * shift;
    }
    b
}

/// Minimize the problem's cost from a feasible `guess`.
pub fn solve(problem: &NlpProblem, guess: &DVector<f64>, settings: &SolverSettings) -> Result<SolveOutcome, OptimizerError> {
    let violation = problem.max_violation(guess);
    if violation > FEASIBILITY_TOLERANCE {
        return Err(OptimizerError::InfeasibleGuess(violation));
    }
    let f0 = problem.evaluate_cost(guess);
    let mut report = SolveReport {
        iterations: 0,
        qp_iterations: 0,
        initial_cost: f0,
        final_cost: f0,
        max_violation: violation,
        converged: false,
        termination: String::new(),
    };
    let n = problem.num_variables();
    if n == 0 || !f0.is_finite() {
        report.termination = if n == 0 { "no variables" } else { "singular guess" }.into();
        report.converged = n == 0;
        return Ok(SolveOutcome::FallbackToGuess { x: guess.clone(), report });
    }
    let (a, b) = problem.constraints();
    let mut x = guess.clone();
    let mut f = f0;
    let mut g = problem.cost_gradient(&x)?;
    let mut hess = initial_hessian(problem.quadratic_hessian());
    let mut termination = "iteration limit";
    for _ in 0..settings.max_iterations {
        report.iterations += 1;
        let rhs = b - a * &x;
        let sol = match solve_qp(&hess, &g, a, &rhs) {
            Ok(s) => s,
            Err(_) => {
                termination = "QP subproblem failed";
                break;
            }
        };
        report.qp_iterations += sol.iterations;
        let d = sol.x;
        if d.amax() <= settings.tolerance * (1.0 + x.amax()) {
            report.converged = true;
            termination = "step below tolerance";
            break;
        }
        let slope = g.dot(&d);
        if slope >= 0.0 {
            report.converged = true;
            termination = "no descent direction";
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = &x + &d * alpha;
            let ft = problem.evaluate_cost(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            termination = "line search failed";
            break;
        };
        let g_new = match problem.cost_gradient(&x_new) {
            Ok(g) => g,
            Err(_) => {
                termination = "singular attitude";
                break;
            }
        };
        // damped BFGS update
        let s = &x_new - &x;
        let mut y = &g_new - &g;
        let bs = &hess * &s;
        let sbs = s.dot(&bs);
        let sy = s.dot(&y);
        if sbs > 1e-300 {
            if sy < 0.2 * sbs {
                let theta = 0.8 * sbs / (sbs - sy);
                y = &y * theta + &bs * (1.0 - theta);
            }
            let sy = s.dot(&y);
            if sy > 1e-300 {
                hess += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
            }
        }
        let decrease = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        if decrease <= 1e-12 * (1.0 + f.abs()) {
            report.converged = true;
            termination = "cost stalled";
            break;
        }
    }
    report.termination = termination.into();
    report.final_cost = f;
    report.max_violation = problem.max_violation(&x);
    if report.max_violation <= FEASIBILITY_TOLERANCE && f <= f0 + 1e-9 {
        Ok(SolveOutcome::Optimized { x, report })
    } else {
        report.final_cost = f0;
        report.max_violation = violation;
        report.termination = format!("audit failed after {}", report.termination);
        Ok(SolveOutcome::FallbackToGuess { x: guess.clone(), report })
    }
}
