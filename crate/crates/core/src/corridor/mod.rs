//! Inflated obstacle hulls and separating planes.
//!
//! For every obstacle `i` and plan interval `j` the predicted mean over the interval is
//! enclosed by its MINVO points, each point is grown into a box covering the prediction
//! interval and both bounding boxes, and the hull of all box corners forms `C_ij`. The
//! agent's interval `j` is then kept on the negative side of a plane `nᵀx + d = 0` with
//! `C_ij` on the positive side.

mod hull;
mod lp;

pub use hull::{convex_hull, ConvexHull, HalfSpace};
pub use lp::{maximize, LpOutcome};

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::splines::{power_to_basis, BasisKind};
use crate::tracking::ObstaclePrediction;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorridorError {
    #[error("interval ends at {t_end} but the prediction is valid only until {valid_until}")]
    HorizonExceeded { t_end: f64, valid_until: f64 },
    #[error("point sets cannot be separated")]
    Infeasible,
    #[error("empty point set")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleHull {
    pub obstacle: usize,
    pub interval: usize,
    pub hull: ConvexHull,
}

impl ObstacleHull {
    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.hull.vertices
    }
}

/// Chebyshev nodes of the first kind mapped to `[0, 1]`.
fn chebyshev_nodes() -> [f64; 4] {
    std::array::from_fn(|k| 0.5 - 0.5 * ((2 * k + 1) as f64 * std::f64::consts::PI / 8.0).cos())
}

/// Cubic through the mean at the Chebyshev nodes of `[t_start, t_end]`, as power-basis
/// coefficients `[u³, u², u, 1]` in the normalized time `u`, plus the largest per-axis
/// deviation of the mean from that cubic over the interval.
pub fn fit_interval_cubic(
    pred: &dyn ObstaclePrediction,
    t_start: f64,
    t_end: f64,
) -> ([Vector3<f64>; 4], Vector3<f64>) {
    let nodes = chebyshev_nodes();
    let vander = Matrix4::from_fn(|r, c| nodes[r].powi(3 - c as i32));
    let lu = vander.lu();
    let samples: Vec<Vector3<f64>> = nodes
        .iter()
        .map(|u| pred.mean(t_start + u * (t_end - t_start)))
        .collect();
    let mut coeffs = [Vector3::zeros(); 4];
    for axis in 0..3 {
        let rhs = Vector4::from_fn(|r, _| samples[r][axis]);
        let sol = lu.solve(&rhs).expect("Chebyshev Vandermonde matrix is invertible");
        for c in 0..4 {
            coeffs[c][axis] = sol[c];
        }
    }
    let mut deviation: Vector3<f64> = Vector3::zeros();
    const CHECKS: usize = 24;
    for k in 0..=CHECKS {
        let u = k as f64 / CHECKS as f64;
        let cubic = coeffs
            .iter()
            .enumerate()
            .fold(Vector3::zeros(), |acc, (i, c)| acc + c * u.powi(3 - i as i32));
        let diff = (pred.mean(t_start + u * (t_end - t_start)) - cubic).abs();
        deviation = deviation.sup(&diff);
    }
    (coeffs, deviation)
}

/// Inflated hull `C_ij` of obstacle `pred` over `[t_start, t_end]`.
pub fn build_obstacle_hull(
    pred: &dyn ObstaclePrediction,
    interval: usize,
    t_start: f64,
    t_end: f64,
    delta: f64,
    agent_half_sides: &Vector3<f64>,
) -> Result<ObstacleHull, CorridorError> {
    let valid_until = pred.valid_until();
    if t_end > valid_until + 1e-9 {
        return Err(CorridorError::HorizonExceeded { t_end, valid_until });
    }
    let (coeffs, deviation) = fit_interval_cubic(pred, t_start, t_end);
    let centers = power_to_basis(&coeffs, BasisKind::Minvo).expect("cubic MINVO basis exists");
    let inflation = pred.interval_half_width(t_end, delta) + pred.half_sides() + agent_half_sides + deviation;
    let mut corners = Vec::with_capacity(centers.len() * 8);
    for c in &centers {
        for s in 0..8 {
            let sign = Vector3::new(
                if s & 1 == 0 { -1.0 } else { 1.0 },
                if s & 2 == 0 { -1.0 } else { 1.0 },
                if s & 4 == 0 { -1.0 } else { 1.0 },
            );
            corners.push(c + inflation.component_mul(&sign));
        }
    }
    Ok(ObstacleHull {
        obstacle: pred.id(),
        interval,
        hull: convex_hull(&corners),
    })
}

/// Plane `normal · x + offset = 0` with unit normal; the agent lies on the negative side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatingPlane {
    pub normal: Vector3<f64>,
    pub offset: f64,
    /// Distance from the plane to the closest point of either set.
    pub margin: f64,
}

impl SeparatingPlane {
    pub fn eval(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) + self.offset
    }
}

/// Plane with `nᵀq + d ≤ −margin` for every agent point and `nᵀc + d ≥ margin` for every
/// obstacle point, placed midway between the two sets along the normal found by a
/// margin-maximizing linear program.
pub fn find_separating_plane(
    agent: &[Vector3<f64>],
    obstacle: &[Vector3<f64>],
    margin: f64,
) -> Result<SeparatingPlane, CorridorError> {
    if agent.is_empty() || obstacle.is_empty() {
        return Err(CorridorError::EmptyInput);
    }
    let origin = (agent.iter().sum::<Vector3<f64>>() + obstacle.iter().sum::<Vector3<f64>>())
        / (agent.len() + obstacle.len()) as f64;
    // variables: n⁺ (3), n⁻ (3), d⁺, d⁻, t⁺, t⁻, all non-negative
    const NV: usize = 10;
    let rows = agent.len() + obstacle.len() + 7;
    let mut a = vec![0.0; rows * NV];
    let mut b = vec![0.0; rows];
    let mut r = 0;
    for (pts, sign) in [(agent, 1.0), (obstacle, -1.0)] {
        for p in pts {
            let q = p - origin;
            let row = &mut a[r * NV..(r + 1) * NV];
            for k in 0..3 {
                row[k] = sign * q[k];
                row[3 + k] = -sign * q[k];
            }
            row[6] = sign;
            row[7] = -sign;
            row[8] = 1.0;
            row[9] = -1.0;
            r += 1;
        }
    }
    for k in 0..7 {
        let col = if k < 6 { k } else { 8 };
        a[r * NV + col] = 1.0;
        b[r] = 1.0;
        r += 1;
    }
    let mut c = [0.0; NV];
    c[8] = 1.0;
    c[9] = -1.0;
    let x = match maximize(&c, &a, &b) {
        LpOutcome::Optimal { x, objective } if objective > 0.0 => x,
        _ => return Err(CorridorError::Infeasible),
    };
    let n = Vector3::new(x[0] - x[3], x[1] - x[4], x[2] - x[5]);
    let len = n.norm();
    if len < 1e-12 {
        return Err(CorridorError::Infeasible);
    }
    let normal = n / len;
    let a_max = agent
        .iter()
        .map(|p| normal.dot(&(p - origin)))
        .fold(f64::NEG_INFINITY, f64::max);
    let c_min = obstacle
        .iter()
        .map(|p| normal.dot(&(p - origin)))
        .fold(f64::INFINITY, f64::min);
    let half_gap = 0.5 * (c_min - a_max);
    if half_gap < margin {
        return Err(CorridorError::Infeasible);
    }
    let d_centered = -0.5 * (a_max + c_min);
    Ok(SeparatingPlane {
        normal,
        offset: d_centered - normal.dot(&origin),
        margin: half_gap,
    })
}
