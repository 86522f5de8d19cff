//! Initial guesses for the optimizer and the constraint audit shared with the planner.
//!
//! Position comes from [`octopus_search`], which also returns the separating planes the
//! optimizer keeps fixed. Yaw comes from a [`YawGraph`] shortest path, unwrapped and fitted
//! by a quadratic spline that matches the initial yaw and yaw rate, then projected onto
//! the yaw-rate limits.

mod octopus;
mod yaw;

pub use octopus::{octopus_search, OctopusInput, PositionGuess};
pub use yaw::{YawGraph, YawGraphNode, YawGraphSettings, YawPath};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::corridor::ObstacleHull;
use crate::optimizer::{solve_qp, Limits, PlaneConstraint, FEASIBILITY_TOLERANCE};
use crate::splines::SplineOperators;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GuessError {
    #[error("no collision-free control point sequence found after {nodes} nodes")]
    NoPathFound { nodes: usize },
    #[error("yaw graph has no path to its last layer")]
    NoYawPath,
    #[error("yaw fit needs at least one sample")]
    NoYawSamples,
    #[error("yaw fit system is singular")]
    SingularYawFit,
}

/// Wrap into `[-π, π]`; values already in that range are returned unchanged.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..=PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Shift each angle by a multiple of `2π` so consecutive values differ by at most `π`.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    for (i, &a) in angles.iter().enumerate() {
        if i == 0 {
            out.push(a);
        } else {
            let prev: f64 = out[i - 1];
            out.push(prev + wrap_angle(a - prev));
        }
    }
    out
}

/// Least-squares ψ control points through `(t, ψ)` samples (unwrapped first), with
/// `ψ_0, ψ_1` fixed by `(psi, psi_dot)` and `ψ_n = ψ_{n-1}`.
pub fn fit_yaw_spline(
    ops: &SplineOperators,
    samples: &[(f64, f64)],
    psi: f64,
    psi_dot: f64,
) -> Result<Vec<f64>, GuessError> {
    if samples.is_empty() {
        return Err(GuessError::NoYawSamples);
    }
    let n = ops.num_angle_points();
    let mut raw: Vec<f64> = vec![psi];
    raw.extend(samples.iter().map(|s| s.1));
    let unwrapped = unwrap_angles(&raw);
    let spline = ops.angle_spline(&vec![0.0; n]);
    let mut btb = DMatrix::zeros(n, n);
    let mut bty = DVector::zeros(n);
    for (k, (t, _)) in samples.iter().enumerate() {
        let t = t.clamp(ops.t_in, ops.t_f);
        let mut row = DVector::zeros(n);
        for (l, c) in spline.basis_row(spline.interval_of(t), t, 0) {
            row[l] = c;
        }
        btb += &row * row.transpose();
        bty += &row * unwrapped[k + 1];
    }
    let init = ops.initial_angle_points(psi, psi_dot);
    let mut kkt = DMatrix::zeros(n + 3, n + 3);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(btb * 2.0));
    let mut rhs = DVector::zeros(n + 3);
    rhs.rows_mut(0, n).copy_from(&(bty * 2.0));
    let eq = [(0, 1.0, None, init[0]), (1, 1.0, None, init[1]), (n - 1, 1.0, Some(n - 2), 0.0)];
    for (r, (i, c, j, v)) in eq.into_iter().enumerate() {
        kkt[(n + r, i)] = c;
        kkt[(i, n + r)] = c;
        if let Some(j) = j {
            kkt[(n + r, j)] = -1.0;
            kkt[(j, n + r)] = -1.0;
        }
        rhs[n + r] = v;
    }
    let solved = kkt.clone().lu().solve(&rhs).filter(|s| s.iter().all(|v| v.is_finite()));
    let sol = match solved {
        Some(s) => s,
        None => {
            log::warn!("yaw fit KKT system singular, regularizing");
            for i in 0..n {
                kkt[(i, i)] += 1e-9;
            }
            kkt.lu().solve(&rhs).ok_or(GuessError::SingularYawFit)?
        }
    };
    Ok(sol.rows(0, n).iter().copied().collect())
}

/// Closest ψ control points (same fixed and terminal entries) with every `|Ψ_l| ≤ psi_dot_max`.
///
/// Falls back to holding `ψ_1` when the projection QP fails.
pub fn project_angle_rates(ops: &SplineOperators, points: &[f64], psi_dot_max: f64) -> Vec<f64> {
    let n = points.len();
    let rates = &ops.angle_rate * DVector::from_column_slice(points);
    if rates.amax() <= psi_dot_max {
        return points.to_vec();
    }
    // free ψ_2 ..= ψ_{n-1}; ψ_n follows ψ_{n-1}
    let nv = n - 3;
    let expand = |x: &DVector<f64>| -> Vec<f64> {
        let mut p = points.to_vec();
        for k in 0..nv {
            p[k + 2] = x[k];
        }
        p[n - 1] = p[n - 2];
        p
    };
    let mut e = DMatrix::zeros(n, nv);
    let mut offset = DVector::zeros(n);
    offset[0] = points[0];
    offset[1] = points[1];
    for k in 0..nv {
        e[(k + 2, k)] = 1.0;
    }
    e[(n - 1, nv - 1)] = 1.0;
    let rate_x = &ops.angle_rate * &e;
    let rate_c = &ops.angle_rate * &offset;
    let m = rate_x.nrows();
    let mut a = DMatrix::zeros(2 * m, nv);
    let mut b = DVector::zeros(2 * m);
    for r in 0..m {
        a.row_mut(2 * r).copy_from(&rate_x.row(r));
        a.row_mut(2 * r + 1).copy_from(&(-rate_x.row(r)));
        b[2 * r] = psi_dot_max - rate_c[r];
        b[2 * r + 1] = psi_dot_max + rate_c[r];
    }
    let target = DVector::from_iterator(nv, (0..nv).map(|k| points[k + 2]));
    let g = DMatrix::identity(nv, nv) * 2.0;
    let c = -&target * 2.0;
    match solve_qp(&g, &c, &a, &b) {
        Ok(sol) => expand(&sol.x),
        Err(_) => expand(&DVector::from_element(nv, points[1])),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AuditViolation {
    #[error("velocity limit exceeded by {excess:e} in interval {interval}")]
    Velocity { interval: usize, excess: f64 },
    #[error("acceleration limit exceeded by {excess:e} at control point {index}")]
    Acceleration { index: usize, excess: f64 },
    #[error("jerk limit exceeded by {excess:e} at control point {index}")]
    Jerk { index: usize, excess: f64 },
    #[error("yaw-rate limit exceeded by {excess:e} at control point {index}")]
    AngleRate { index: usize, excess: f64 },
    #[error("no separating plane for obstacle {obstacle} in interval {interval}")]
    MissingPlane { interval: usize, obstacle: usize },
    #[error("agent crosses the plane of obstacle {obstacle} in interval {interval} by {excess:e}")]
    AgentSide { interval: usize, obstacle: usize, excess: f64 },
    #[error("obstacle {obstacle} crosses its plane in interval {interval} by {excess:e}")]
    ObstacleSide { interval: usize, obstacle: usize, excess: f64 },
    #[error("last three control points differ")]
    NoTerminalHover,
}

/// A candidate plan with the constraints it must satisfy.
pub struct AuditInput<'a> {
    pub ops: &'a SplineOperators,
    pub position: &'a [Vector3<f64>],
    pub angle: Option<&'a [f64]>,
    pub planes: &'a [PlaneConstraint],
    pub hulls: &'a [Vec<ObstacleHull>],
    pub limits: Limits,
    pub margin: f64,
}

/// Independent check of every linear constraint, within [`FEASIBILITY_TOLERANCE`].
pub fn audit_plan(input: &AuditInput<'_>) -> Result<(), AuditViolation> {
    let tol = FEASIBILITY_TOLERANCE;
    let ops = input.ops;
    let q = input.position;
    let lim = &input.limits;
    let n = q.len();
    if (q[n - 1] - q[n - 2]).amax() > 1e-12 || (q[n - 2] - q[n - 3]).amax() > 1e-12 {
        return Err(AuditViolation::NoTerminalHover);
    }
    for j in 0..ops.num_intervals {
        for r in 0..3 {
            let v = SplineOperators::apply_row(&ops.velocity_minvo[j], r, q);
            let excess = (v.abs() - lim.v_max).max();
            if excess > tol {
                return Err(AuditViolation::Velocity { interval: j, excess });
            }
        }
    }
    for (m, bound, is_acc) in [(&ops.acceleration, lim.a_max, true), (&ops.jerk, lim.j_max, false)] {
        for index in 0..m.nrows() {
            let excess = (SplineOperators::apply_row(m, index, q).abs() - bound).max();
            if excess > tol {
                return Err(if is_acc {
                    AuditViolation::Acceleration { index, excess }
                } else {
                    AuditViolation::Jerk { index, excess }
                });
            }
        }
    }
    if let Some(psi) = input.angle {
        for index in 0..ops.angle_rate.nrows() {
            let excess = SplineOperators::apply_row_scalar(&ops.angle_rate, index, psi).abs() - lim.psi_dot_max;
            if excess > tol {
                return Err(AuditViolation::AngleRate { index, excess });
            }
        }
    }
    for (j, hulls) in input.hulls.iter().enumerate() {
        for hull in hulls {
            let Some(pc) = input
                .planes
                .iter()
                .find(|p| p.interval == j && p.obstacle == hull.obstacle)
            else {
                return Err(AuditViolation::MissingPlane {
                    interval: j,
                    obstacle: hull.obstacle,
                });
            };
            for r in 0..4 {
                let v = SplineOperators::apply_row(&ops.position_minvo[j], r, q);
                let excess = pc.plane.eval(&v) + input.margin;
                if excess > tol {
                    return Err(AuditViolation::AgentSide {
                        interval: j,
                        obstacle: hull.obstacle,
                        excess,
                    });
                }
            }
            for c in hull.vertices() {
                let excess = input.margin - pc.plane.eval(c);
                if excess > tol {
                    return Err(AuditViolation::ObstacleSide {
                        interval: j,
                        obstacle: hull.obstacle,
                        excess,
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unwrap_example() {
        let out = unwrap_angles(&[0.0, 3.0, -3.0]);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 3.0);
        assert!((out[2] - (2.0 * PI - 3.0)).abs() < 1e-15);
    }

    #[test]
    fn wrap_keeps_in_range_values() {
        assert_eq!(wrap_angle(-PI), -PI);
        assert_eq!(wrap_angle(1.0), 1.0);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-7.0) - (-7.0 + 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn yaw_fit_reproduces_initial_state() {
        let ops = SplineOperators::new(6, 0.0, 1.8);
        let samples: Vec<(f64, f64)> = (0..=6).map(|k| (k as f64 * 0.3, 0.2 * k as f64)).collect();
        let pts = fit_yaw_spline(&ops, &samples, 0.1, 0.5).unwrap();
        let s = ops.angle_spline(&pts);
        assert!((s.evaluate(0.0, 0).unwrap()[0] - 0.1).abs() < 1e-9);
        assert!((s.evaluate(0.0, 1).unwrap()[0] - 0.5).abs() < 1e-9);
        assert!((pts[7] - pts[6]).abs() < 1e-9);
    }

    #[test]
    fn projection_enforces_rate_limit() {
        let ops = SplineOperators::new(6, 0.0, 1.2);
        let pts = vec![0.0, 0.1, 1.0, -1.0, 2.0, 0.5, 1.5, 1.5];
        let out = project_angle_rates(&ops, &pts, 2.0);
        let rates = &ops.angle_rate * DVector::from_vec(out.clone());
        assert!(rates.amax() <= 2.0 + 1e-9);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 0.1);
        assert_eq!(out[7], out[6]);
    }
}
