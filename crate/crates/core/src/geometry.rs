//! Quaternions, rigid transforms, the thrust-aligned attitude map and the pinhole camera.
//!
//! Frames follow the usual convention: `T_b^a` maps coordinates expressed in frame `b`
//! into frame `a`, `p^a = R p^b + t`. The body z axis is the thrust axis; the default
//! camera looks along the body x axis.

use std::ops::{Add, Mul};

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::ad::Real;
use crate::GRAVITY;

/// `1 + ξ̄_z` below this value is treated as the (inverted) attitude singularity.
pub const SINGULARITY_THRESHOLD: f64 = 1e-6;
/// Relative accelerations shorter than this have no defined direction.
pub const MIN_ACCELERATION_NORM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("relative acceleration is zero, thrust direction undefined")]
    ZeroAcceleration,
    #[error("attitude singularity: 1 + normalized xi_z = {0:e} (vehicle inverted)")]
    Singularity(f64),
    #[error("point coincides with the camera center")]
    DegenerateInput,
    #[error("point is behind the camera")]
    Behind,
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
}

/// Quaternion `w + x i + y j + z k`, Hamilton convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion<S = f64> {
    pub w: S,
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Real> Quaternion<S> {
    pub fn new(w: S, x: S, y: S, z: S) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(S::cst(1.0), S::cst(0.0), S::cst(0.0), S::cst(0.0))
    }

    /// Pure quaternion `(0, v)`.
    pub fn pure(v: [S; 3]) -> Self {
        Self::new(S::cst(0.0), v[0], v[1], v[2])
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_squared(&self) -> S {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn vector_part(&self) -> [S; 3] {
        [self.x, self.y, self.z]
    }

    /// Rotate `v` by this (unit) quaternion: `q (0, v) q*`.
    pub fn rotate(&self, v: [S; 3]) -> [S; 3] {
        let u = [self.x, self.y, self.z];
        let uv = cross(u, v);
        let uuv = cross(u, uv);
        let two_w = self.w * 2.0;
        [
            v[0] + uv[0] * two_w + uuv[0] * 2.0,
            v[1] + uv[1] * two_w + uuv[1] * 2.0,
            v[2] + uv[2] * two_w + uuv[2] * 2.0,
        ]
    }

    /// Lift an `f64` quaternion into this scalar type.
    pub fn lift(q: &Quaternion<f64>) -> Self {
        Self::new(S::cst(q.w), S::cst(q.x), S::cst(q.y), S::cst(q.z))
    }
}

impl<S: Real> Mul for Quaternion<S> {
    type Output = Self;

    fn mul(self, r: Self) -> Self {
        let l = self;
        Self::new(
            l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        )
    }
}

impl<S: Real> Add for Quaternion<S> {
    type Output = Self;

    fn add(self, r: Self) -> Self {
        Self::new(self.w + r.w, self.x + r.x, self.y + r.y, self.z + r.z)
    }
}

impl Quaternion<f64> {
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let a = axis.normalize() * (angle / 2.0).sin();
        Self::new((angle / 2.0).cos(), a.x, a.y, a.z)
    }

    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::from(self.rotate([v.x, v.y, v.z]))
    }

    /// `rot(q)`: the rotation matrix acting as `rotate_vector`.
    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }
}

#[inline]
pub(crate) fn cross<S: Real>(a: [S; 3], b: [S; 3]) -> [S; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot<S: Real>(a: [S; 3], b: [S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Rigid transform `p ↦ rot(rotation) p + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub rotation: Quaternion,
    pub translation: Vector3<f64>,
}

impl Transform {
    pub fn new(rotation: Quaternion, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Quaternion::identity(), Vector3::zeros())
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate_vector(p) + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate_vector(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let r = self.rotation.conjugate();
        Transform {
            rotation: r,
            translation: -r.rotate_vector(&self.translation),
        }
    }
}

/// Relative acceleration `ξ = a + g e_z`.
pub fn relative_acceleration(a: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(a.x, a.y, a.z + GRAVITY)
}

/// `q_ξ`: the minimal rotation taking `e_z` to `ξ̄`.
pub fn hopf_quaternion(xi: &Vector3<f64>) -> Result<Quaternion, GeometryError> {
    hopf_quaternion_generic([xi.x, xi.y, xi.z])
}

pub fn hopf_quaternion_generic<S: Real>(xi: [S; 3]) -> Result<Quaternion<S>, GeometryError> {
    let norm = dot(xi, xi).sqrt();
    if norm.value() < MIN_ACCELERATION_NORM {
        return Err(GeometryError::ZeroAcceleration);
    }
    let n = [xi[0] / norm, xi[1] / norm, xi[2] / norm];
    let c = n[2] + 1.0;
    if c.value() < SINGULARITY_THRESHOLD {
        return Err(GeometryError::Singularity(c.value()));
    }
    let k = (c * 2.0).sqrt().recip();
    Ok(Quaternion::new(c * k, -n[1] * k, n[0] * k, S::cst(0.0)))
}

/// `q_ψ`: rotation by `psi` about the body z axis.
pub fn psi_quaternion<S: Real>(psi: S) -> Quaternion<S> {
    let half = psi * 0.5;
    Quaternion::new(half.cos(), S::cst(0.0), S::cst(0.0), half.sin())
}

/// Body attitude `q_b^w = q_ξ ∘ q_ψ`; its body z axis is aligned with `ξ̄` for every `psi`.
pub fn body_attitude(xi: &Vector3<f64>, psi: f64) -> Result<Quaternion, GeometryError> {
    Ok(hopf_quaternion(xi)? * psi_quaternion(psi))
}

/// Position, derivatives and `ψ, ψ̇` of the vehicle at one instant (world frame).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatState<S = f64> {
    pub p: [S; 3],
    pub v: [S; 3],
    pub a: [S; 3],
    pub j: [S; 3],
    pub psi: S,
    pub psi_dot: S,
}

impl FlatState<f64> {
    pub fn from_vectors(
        p: &Vector3<f64>,
        v: &Vector3<f64>,
        a: &Vector3<f64>,
        j: &Vector3<f64>,
        psi: f64,
        psi_dot: f64,
    ) -> Self {
        Self {
            p: [p.x, p.y, p.z],
            v: [v.x, v.y, v.z],
            a: [a.x, a.y, a.z],
            j: [j.x, j.y, j.z],
            psi,
            psi_dot,
        }
    }

    /// Pose `T_b^w` of the body.
    pub fn body_to_world(&self) -> Result<Transform, GeometryError> {
        let a = Vector3::from(self.a);
        let q = body_attitude(&relative_acceleration(&a), self.psi)?;
        Ok(Transform::new(q, Vector3::from(self.p)))
    }

    pub fn world_to_body(&self) -> Result<Transform, GeometryError> {
        Ok(self.body_to_world()?.inverse())
    }
}

/// Attitude `q_b^w` and its time derivative, from `a, j = ȧ, ψ, ψ̇`.
pub fn attitude_with_rate<S: Real>(
    a: [S; 3],
    j: [S; 3],
    psi: S,
    psi_dot: S,
) -> Result<(Quaternion<S>, Quaternion<S>), GeometryError> {
    let xi = [a[0], a[1], a[2] + GRAVITY];
    let norm = dot(xi, xi).sqrt();
    if norm.value() < MIN_ACCELERATION_NORM {
        return Err(GeometryError::ZeroAcceleration);
    }
    let n = [xi[0] / norm, xi[1] / norm, xi[2] / norm];
    let c = n[2] + 1.0;
    if c.value() < SINGULARITY_THRESHOLD {
        return Err(GeometryError::Singularity(c.value()));
    }
    // d/dt of the normalized thrust direction
    let nj = dot(n, j);
    let n_dot = [
        (j[0] - n[0] * nj) / norm,
        (j[1] - n[1] * nj) / norm,
        (j[2] - n[2] * nj) / norm,
    ];
    let k = (c * 2.0).sqrt().recip();
    let c_dot = n_dot[2];
    let k_dot = -(k * c_dot) / (c * 2.0);
    let zero = S::cst(0.0);
    let q_xi = Quaternion::new(c * k, -n[1] * k, n[0] * k, zero);
    let q_xi_dot = Quaternion::new(
        c_dot * k + c * k_dot,
        -(n_dot[1] * k + n[1] * k_dot),
        n_dot[0] * k + n[0] * k_dot,
        zero,
    );
    let half = psi * 0.5;
    let (s, co) = (half.sin(), half.cos());
    let q_psi = Quaternion::new(co, zero, zero, s);
    let q_psi_dot = Quaternion::new(-(s * psi_dot) * 0.5, zero, zero, co * psi_dot * 0.5);
    Ok((q_xi * q_psi, q_xi_dot * q_psi + q_xi * q_psi_dot))
}

/// Pinhole camera with a cone-shaped field of view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraModel {
    /// Focal length (m); image coordinates are expressed in meters on the focal plane.
    pub focal_length: f64,
    /// Full opening angle of the FOV cone (rad).
    pub fov_angle: f64,
    /// Sharpness of the sigmoid replacing the hard FOV indicator.
    pub sigmoid_sharpness: f64,
    /// `T_b^c`, maps body coordinates into camera coordinates.
    pub body_to_camera: Transform,
}

impl CameraModel {
    pub fn new(
        focal_length: f64,
        fov_angle: f64,
        sigmoid_sharpness: f64,
        body_to_camera: Transform,
    ) -> Result<Self, GeometryError> {
        if !(focal_length > 0.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "focal length must be positive, got {focal_length}"
            )));
        }
        if !(fov_angle > 0.0 && fov_angle < std::f64::consts::PI) {
            return Err(GeometryError::InvalidCamera(format!(
                "FOV angle must lie in (0, pi), got {fov_angle}"
            )));
        }
        if !(sigmoid_sharpness > 0.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "sigmoid sharpness must be positive, got {sigmoid_sharpness}"
            )));
        }
        Ok(Self {
            focal_length,
            fov_angle,
            sigmoid_sharpness,
            body_to_camera,
        })
    }

    /// Camera at the body origin looking along body x (camera x = -body y, camera y = -body z).
    pub fn forward_facing(
        focal_length: f64,
        fov_angle: f64,
        sigmoid_sharpness: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(
            focal_length,
            fov_angle,
            sigmoid_sharpness,
            Transform::new(Quaternion::new(0.5, 0.5, -0.5, 0.5), Vector3::zeros()),
        )
    }

    /// Point expressed in the camera frame.
    pub fn camera_point(&self, world_to_body: &Transform, p_w: &Vector3<f64>) -> Vector3<f64> {
        self.body_to_camera.apply(&world_to_body.apply(p_w))
    }

    pub fn cos_half_fov(&self) -> f64 {
        (self.fov_angle / 2.0).cos()
    }
}

/// Result of projecting a point through the pinhole.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    Image(Vector2<f64>),
    Behind,
}

impl Projection {
    pub fn image(&self) -> Option<Vector2<f64>> {
        match self {
            Projection::Image(s) => Some(*s),
            Projection::Behind => None,
        }
    }
}

/// `s = f [p^c]_{x:y} / [p^c]_z`, or `Behind` when `[p^c]_z ≤ 0`.
pub fn project_point(
    cam: &CameraModel,
    world_to_body: &Transform,
    p_w: &Vector3<f64>,
) -> Projection {
    let pc = cam.camera_point(world_to_body, p_w);
    if pc.z <= 0.0 {
        Projection::Behind
    } else {
        Projection::Image(Vector2::new(pc.x, pc.y) * (cam.focal_length / pc.z))
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<S: Real>(x: S) -> S {
    if x.value() >= 0.0 {
        ((-x).exp() + 1.0).recip()
    } else {
        let e = x.exp();
        e / (e + 1.0)
    }
}

/// Smooth FOV indicator for a point already expressed in the camera frame.
pub fn in_fov_camera_frame<S: Real>(cam: &CameraModel, pc: [S; 3]) -> S {
    let cos_angle = pc[2] / dot(pc, pc).sqrt();
    sigmoid((cos_angle - cam.cos_half_fov()) * cam.sigmoid_sharpness)
}

/// `σ(γ(-cos(θ/2) + p^c_z / ‖p^c‖))` for a world point seen from the body pose.
pub fn in_fov_smooth(
    cam: &CameraModel,
    world_to_body: &Transform,
    p_w: &Vector3<f64>,
) -> Result<f64, GeometryError> {
    let pc = cam.camera_point(world_to_body, p_w);
    if pc.norm() < 1e-9 {
        return Err(GeometryError::DegenerateInput);
    }
    Ok(in_fov_camera_frame(cam, [pc.x, pc.y, pc.z]))
}

/// Camera-frame position of an obstacle and its time derivative along the joint motion.
pub fn camera_point_with_rate<S: Real>(
    cam: &CameraModel,
    state: &FlatState<S>,
    obstacle_p: [S; 3],
    obstacle_v: [S; 3],
) -> Result<([S; 3], [S; 3]), GeometryError> {
    let (q, q_dot) = attitude_with_rate(state.a, state.j, state.psi, state.psi_dot)?;
    let rel = Quaternion::pure([
        obstacle_p[0] - state.p[0],
        obstacle_p[1] - state.p[1],
        obstacle_p[2] - state.p[2],
    ]);
    let rel_dot = Quaternion::pure([
        obstacle_v[0] - state.v[0],
        obstacle_v[1] - state.v[1],
        obstacle_v[2] - state.v[2],
    ]);
    let qc = q.conjugate();
    let pb = (qc * rel * q).vector_part();
    let pb_dot = (q_dot.conjugate() * rel * q + qc * rel_dot * q + qc * rel * q_dot).vector_part();
    let r_cb = Quaternion::<S>::lift(&cam.body_to_camera.rotation);
    let t = cam.body_to_camera.translation;
    let pc = r_cb.rotate(pb);
    Ok((
        [pc[0] + t.x, pc[1] + t.y, pc[2] + t.z],
        r_cb.rotate(pb_dot),
    ))
}

/// `ṡ` from the camera-frame point and its rate (quotient rule on the pinhole model).
pub fn image_velocity<S: Real>(focal_length: f64, pc: [S; 3], pc_dot: [S; 3]) -> [S; 2] {
    let z2 = pc[2] * pc[2];
    [
        (pc_dot[0] * pc[2] - pc[0] * pc_dot[2]) * focal_length / z2,
        (pc_dot[1] * pc[2] - pc[1] * pc_dot[2]) * focal_length / z2,
    ]
}

/// Vehicle trajectory exposing its flat state.
pub trait FlatTrajectory {
    fn flat_state(&self, t: f64) -> FlatState;
}

/// Moving point (obstacle centroid).
pub trait PointTrajectory {
    fn position(&self, t: f64) -> Vector3<f64>;
    fn velocity(&self, t: f64) -> Vector3<f64>;
}

/// Analytic projected velocity `ṡ` of the obstacle at time `t`.
pub fn projected_velocity(
    cam: &CameraModel,
    agent: &dyn FlatTrajectory,
    obstacle: &dyn PointTrajectory,
    t: f64,
) -> Result<Vector2<f64>, GeometryError> {
    let st = agent.flat_state(t);
    let p = obstacle.position(t);
    let v = obstacle.velocity(t);
    let (pc, pc_dot) = camera_point_with_rate(cam, &st, [p.x, p.y, p.z], [v.x, v.y, v.z])?;
    if pc[2] <= 0.0 {
        return Err(GeometryError::Behind);
    }
    let s = image_velocity(cam.focal_length, pc, pc_dot);
    Ok(Vector2::new(s[0], s[1]))
}

/// Step used by [`projected_velocity_fd`].
pub const PROJECTED_VELOCITY_FD_STEP: f64 = 1e-5;

/// Central-difference projected velocity (testing fallback).
pub fn projected_velocity_fd(
    cam: &CameraModel,
    agent: &dyn FlatTrajectory,
    obstacle: &dyn PointTrajectory,
    t: f64,
) -> Result<Vector2<f64>, GeometryError> {
    let h = PROJECTED_VELOCITY_FD_STEP;
    let at = |tt: f64| -> Result<Vector2<f64>, GeometryError> {
        let pose = agent.flat_state(tt).world_to_body()?;
        project_point(cam, &pose, &obstacle.position(tt))
            .image()
            .ok_or(GeometryError::Behind)
    };
    Ok((at(t + h)? - at(t - h)?) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn cam(theta_deg: f64, gamma: f64) -> CameraModel {
        CameraModel::forward_facing(0.01, theta_deg.to_radians(), gamma).unwrap()
    }

    #[test]
    fn hover_gives_identity() {
        let q = hopf_quaternion(&Vector3::new(0.0, 0.0, GRAVITY)).unwrap();
        assert_relative_eq!(q.w, 1.0, epsilon = 1e-15);
        assert_relative_eq!(q.x, 0.0);
        assert_relative_eq!(q.y, 0.0);
        assert_relative_eq!(q.z, 0.0);
    }

    #[test]
    fn sideways_thrust() {
        let q = hopf_quaternion(&Vector3::new(GRAVITY, 0.0, 0.0)).unwrap();
        assert_relative_eq!(q.w, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(q.x, 0.0);
        assert_relative_eq!(q.y, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(q.z, 0.0);
    }

    #[test]
    fn singular_and_zero_inputs_rejected() {
        assert_eq!(
            hopf_quaternion(&Vector3::zeros()),
            Err(GeometryError::ZeroAcceleration)
        );
        assert!(matches!(
            hopf_quaternion(&Vector3::new(0.0, 0.0, -1.0)),
            Err(GeometryError::Singularity(_))
        ));
        // just on the valid side of the threshold
        let z = -1.0 + 2e-6;
        let xi = Vector3::new((1.0 - z * z).sqrt(), 0.0, z);
        assert!(hopf_quaternion(&xi).is_ok());
    }

    #[test]
    fn attitude_at_hover_is_pure_yaw() {
        let q = body_attitude(&Vector3::new(0.0, 0.0, GRAVITY), 0.0).unwrap();
        assert_relative_eq!(q.w, 1.0);
        let q = body_attitude(&Vector3::new(0.0, 0.0, GRAVITY), FRAC_PI_2).unwrap();
        assert_relative_eq!(q.w, FRAC_PI_4.cos(), epsilon = 1e-15);
        assert_relative_eq!(q.z, FRAC_PI_4.sin(), epsilon = 1e-15);
    }

    #[test]
    fn thrust_axis_matches_xi_for_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let xi = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ) * rng.gen_range(0.1..20.0);
            let n = xi.normalize();
            if n.z < -0.999 {
                continue;
            }
            let psi = rng.gen_range(-PI..PI);
            let q = body_attitude(&xi, psi).unwrap();
            assert!((q.norm() - 1.0).abs() < 1e-12);
            let bz = q.rotate_vector(&Vector3::z());
            assert!((bz - n).amax() < 1e-12);
        }
    }

    #[test]
    fn transforms_invert_and_associate() {
        let a = Transform::new(
            Quaternion::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.7),
            Vector3::new(1.0, -2.0, 0.5),
        );
        let b = Transform::new(
            Quaternion::from_axis_angle(&Vector3::new(-1.0, 0.0, 1.0), -1.2),
            Vector3::new(0.0, 3.0, 1.0),
        );
        let c = Transform::new(
            Quaternion::from_axis_angle(&Vector3::new(0.0, 1.0, 0.0), 2.0),
            Vector3::new(-4.0, 0.0, 2.0),
        );
        let p = Vector3::new(0.3, -0.8, 2.2);
        let id = a.inverse().compose(&a);
        assert!((id.apply(&p) - p).amax() < 1e-12);
        let l = a.compose(&b).compose(&c).apply(&p);
        let r = a.compose(&b.compose(&c)).apply(&p);
        assert!((l - r).amax() < 1e-12);
    }

    #[test]
    fn forward_camera_axes() {
        let c = cam(60.0, 100.0);
        let r = c.body_to_camera.rotation;
        assert!((r.rotate_vector(&Vector3::x()) - Vector3::z()).amax() < 1e-15);
        assert!((r.rotate_vector(&Vector3::y()) + Vector3::x()).amax() < 1e-15);
        assert!((r.rotate_vector(&Vector3::z()) + Vector3::y()).amax() < 1e-15);
    }

    #[test]
    fn pinhole_examples() {
        // camera frame == body frame rotated; use identity body pose
        let c = cam(60.0, 100.0);
        let pose = Transform::identity();
        // on the optical axis (body x), depth 2
        let s = project_point(&c, &pose, &Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(s, Projection::Image(Vector2::zeros()));
        // camera coords (1, 0, 2) == body (2, -1, 0)
        let s = project_point(&c, &pose, &Vector3::new(2.0, -1.0, 0.0))
            .image()
            .unwrap();
        assert_relative_eq!(s.x, 0.005, epsilon = 1e-15);
        assert_relative_eq!(s.y, 0.0, epsilon = 1e-15);
        assert_eq!(
            project_point(&c, &pose, &Vector3::new(-1.0, 0.0, 0.0)),
            Projection::Behind
        );
    }

    #[test]
    fn fov_indicator_examples() {
        let c = cam(60.0, 100.0);
        let pose = Transform::identity();
        let on_axis = in_fov_smooth(&c, &pose, &Vector3::new(3.0, 0.0, 0.0)).unwrap();
        let expected = 1.0 / (1.0 + (-100.0 * (1.0 - (PI / 6.0).cos())).exp());
        assert_relative_eq!(on_axis, expected, epsilon = 1e-15);
        assert!((on_axis - 1.0).abs() < 1e-5);
        let half = PI / 6.0;
        let boundary =
            in_fov_smooth(&c, &pose, &Vector3::new(half.cos(), half.sin(), 0.0)).unwrap();
        assert_relative_eq!(boundary, 0.5, epsilon = 1e-12);
        let behind = in_fov_smooth(&c, &pose, &Vector3::new(-2.0, 0.0, 0.0)).unwrap();
        assert!(behind < 1e-30);
        assert_eq!(
            in_fov_smooth(&c, &pose, &Vector3::zeros()),
            Err(GeometryError::DegenerateInput)
        );
    }

    #[test]
    fn fov_indicator_scale_invariant_and_hard_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let soft = cam(60.0, 100.0);
        let hard = cam(60.0, 1e4);
        let pose = Transform::identity();
        for _ in 0..500 {
            let p = Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let k = rng.gen_range(0.01..50.0);
            let a = in_fov_smooth(&soft, &pose, &p).unwrap();
            let b = in_fov_smooth(&soft, &pose, &(p * k)).unwrap();
            assert!((a - b).abs() < 1e-12);
            let pc = hard.camera_point(&pose, &p);
            let angle = (pc.z / pc.norm()).clamp(-1.0, 1.0).acos();
            if (angle - PI / 6.0).abs() >= 0.01 {
                let ind = if angle <= PI / 6.0 { 1.0 } else { 0.0 };
                let v = in_fov_smooth(&hard, &pose, &p).unwrap();
                assert!((v - ind).abs() < 1e-6, "angle {angle} value {v}");
            }
        }
    }

    struct Static(FlatState);
    impl FlatTrajectory for Static {
        fn flat_state(&self, _t: f64) -> FlatState {
            self.0
        }
    }

    struct Linear {
        p0: Vector3<f64>,
        v: Vector3<f64>,
    }
    impl PointTrajectory for Linear {
        fn position(&self, t: f64) -> Vector3<f64> {
            self.p0 + self.v * t
        }
        fn velocity(&self, _t: f64) -> Vector3<f64> {
            self.v
        }
    }

    fn hover_at_origin() -> Static {
        let z = Vector3::zeros();
        Static(FlatState::from_vectors(&z, &z, &z, &z, 0.0, 0.0))
    }

    #[test]
    fn projected_velocity_static_scene() {
        let c = cam(60.0, 100.0);
        let obs = Linear {
            p0: Vector3::new(3.0, 0.5, 0.2),
            v: Vector3::zeros(),
        };
        let s = projected_velocity(&c, &hover_at_origin(), &obs, 0.0).unwrap();
        assert!(s.amax() < 1e-15);
    }

    #[test]
    fn projected_velocity_lateral_motion() {
        // camera x axis is body -y: moving along body -y at 1 m/s at depth 2
        let c = cam(60.0, 100.0);
        let obs = Linear {
            p0: Vector3::new(2.0, 0.0, 0.0),
            v: Vector3::new(0.0, -1.0, 0.0),
        };
        let s = projected_velocity(&c, &hover_at_origin(), &obs, 0.0).unwrap();
        assert_relative_eq!(s.x, 0.005, epsilon = 1e-15);
        assert_relative_eq!(s.y, 0.0, epsilon = 1e-15);
    }

    struct Poly {
        c: [Vector3<f64>; 4],
        psi: [f64; 3],
    }
    impl FlatTrajectory for Poly {
        fn flat_state(&self, t: f64) -> FlatState {
            let c = &self.c;
            let p = c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
            let v = c[1] + c[2] * (2.0 * t) + c[3] * (3.0 * t * t);
            let a = c[2] * 2.0 + c[3] * (6.0 * t);
            let j = c[3] * 6.0;
            let psi = self.psi[0] + self.psi[1] * t + self.psi[2] * t * t;
            let psi_dot = self.psi[1] + 2.0 * self.psi[2] * t;
            FlatState::from_vectors(&p, &v, &a, &j, psi, psi_dot)
        }
    }

    #[test]
    fn projected_velocity_matches_central_difference() {
        let c = cam(60.0, 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 50 {
            let rv = |rng: &mut ChaCha8Rng, s: f64| {
                Vector3::new(
                    rng.gen_range(-s..s),
                    rng.gen_range(-s..s),
                    rng.gen_range(-s..s),
                )
            };
            let agent = Poly {
                c: [rv(&mut rng, 1.0), rv(&mut rng, 2.0), rv(&mut rng, 2.0), rv(&mut rng, 2.0)],
                psi: [rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            };
            let obs = Linear {
                p0: rv(&mut rng, 4.0),
                v: rv(&mut rng, 2.0),
            };
            let t = rng.gen_range(0.0..1.0);
            let pose = agent.flat_state(t).world_to_body().unwrap();
            let pc = c.camera_point(&pose, &obs.position(t));
            if pc.z < 0.5 {
                continue;
            }
            let a = projected_velocity(&c, &agent, &obs, t).unwrap();
            let n = projected_velocity_fd(&c, &agent, &obs, t).unwrap();
            assert!(
                (a - n).norm() <= 1e-5 * a.norm().max(1e-3),
                "analytic {a:?} numeric {n:?}"
            );
            checked += 1;
        }
    }
}
