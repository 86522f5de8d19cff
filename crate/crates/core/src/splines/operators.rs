//! Linear maps shared by the guess search, the optimizer and the audits.
//!
//! For a plan over `[t_in, t_f]` with `|J|` intervals, position is a cubic with `|J| + 3`
//! control points and ψ a quadratic with `|J| + 2` control points on the same knot times.
//! All derived quantities (velocity, acceleration and jerk control points, MINVO points
//! of each interval) are fixed matrices times the control points.

use nalgebra::{DMatrix, Vector1, Vector3};

use super::{segment_conversion_matrix, AngleSpline, BasisKind, PositionSpline, TrajectorySpline};

#[derive(Debug, Clone)]
pub struct SplineOperators {
    pub num_intervals: usize,
    pub t_in: f64,
    pub t_f: f64,
    /// Interval length Δ.
    pub dt: f64,
    pub position_knots: Vec<f64>,
    pub angle_knots: Vec<f64>,
    /// Velocity control points from position control points, `n_p × (n_p + 1)`.
    pub velocity: DMatrix<f64>,
    pub acceleration: DMatrix<f64>,
    pub jerk: DMatrix<f64>,
    /// `Ψ_l` from ψ control points.
    pub angle_rate: DMatrix<f64>,
    pub angle_accel: DMatrix<f64>,
    /// Per interval: MINVO position points from all position control points, `4 × (n_p + 1)`.
    pub position_minvo: Vec<DMatrix<f64>>,
    /// Per interval: MINVO velocity points from all position control points, `3 × (n_p + 1)`.
    pub velocity_minvo: Vec<DMatrix<f64>>,
}

impl SplineOperators {
    pub fn new(num_intervals: usize, t_in: f64, t_f: f64) -> Self {
        let np1 = num_intervals + 3;
        let npsi1 = num_intervals + 2;
        let pos = PositionSpline::new(3, vec![Vector3::zeros(); np1], t_in, t_f).expect("valid plan layout");
        let ang = AngleSpline::new(2, vec![Vector1::zeros(); npsi1], t_in, t_f).expect("valid plan layout");
        let vel_spline = pos.derivative().unwrap();
        let acc_spline = vel_spline.derivative().unwrap();
        let velocity = pos.derivative_matrix();
        let acceleration = vel_spline.derivative_matrix() * &velocity;
        let jerk = acc_spline.derivative_matrix() * &acceleration;
        let angle_rate = ang.derivative_matrix();
        let angle_accel = ang.derivative().unwrap().derivative_matrix() * &angle_rate;

        let mut position_minvo = Vec::with_capacity(num_intervals);
        let mut velocity_minvo = Vec::with_capacity(num_intervals);
        for j in 0..num_intervals {
            let c = segment_conversion_matrix(&pos, j, BasisKind::Minvo).unwrap();
            let mut full = DMatrix::zeros(4, np1);
            full.view_mut((0, j), (4, 4)).copy_from(&c);
            position_minvo.push(full);
            let cv = segment_conversion_matrix(&vel_spline, j, BasisKind::Minvo).unwrap();
            velocity_minvo.push(cv * velocity.rows(j, 3));
        }
        Self {
            num_intervals,
            t_in,
            t_f,
            dt: (t_f - t_in) / num_intervals as f64,
            position_knots: pos.knots().to_vec(),
            angle_knots: ang.knots().to_vec(),
            velocity,
            acceleration,
            jerk,
            angle_rate,
            angle_accel,
            position_minvo,
            velocity_minvo,
        }
    }

    pub fn num_position_points(&self) -> usize {
        self.num_intervals + 3
    }

    pub fn num_angle_points(&self) -> usize {
        self.num_intervals + 2
    }

    /// `q_0, q_1, q_2` reproducing position, velocity and acceleration at `t_in`.
    pub fn initial_position_points(&self, p: &Vector3<f64>, v: &Vector3<f64>, a: &Vector3<f64>) -> [Vector3<f64>; 3] {
        let k = &self.position_knots;
        let q0 = *p;
        let q1 = q0 + v * ((k[4] - k[1]) / 3.0);
        let v1 = v + a * ((k[4] - k[2]) / 2.0);
        let q2 = q1 + v1 * ((k[5] - k[2]) / 3.0);
        [q0, q1, q2]
    }

    /// `ψ_0, ψ_1` reproducing ψ and ψ̇ at `t_in`.
    pub fn initial_angle_points(&self, psi: f64, psi_dot: f64) -> [f64; 2] {
        let k = &self.angle_knots;
        [psi, psi + psi_dot * (k[3] - k[1]) / 2.0]
    }

    pub fn position_spline(&self, points: Vec<Vector3<f64>>) -> PositionSpline {
        TrajectorySpline::new(3, points, self.t_in, self.t_f).expect("valid plan layout")
    }

    pub fn angle_spline(&self, points: &[f64]) -> AngleSpline {
        TrajectorySpline::new(2, points.iter().map(|v| Vector1::new(*v)).collect(), self.t_in, self.t_f)
            .expect("valid plan layout")
    }

    /// Row `r` of `m` applied to a list of 3-D points.
    pub fn apply_row(m: &DMatrix<f64>, r: usize, points: &[Vector3<f64>]) -> Vector3<f64> {
        points
            .iter()
            .enumerate()
            .fold(Vector3::zeros(), |acc, (l, q)| acc + q * m[(r, l)])
    }

    pub fn apply_row_scalar(m: &DMatrix<f64>, r: usize, values: &[f64]) -> f64 {
        values.iter().enumerate().map(|(l, v)| v * m[(r, l)]).sum()
    }
}
