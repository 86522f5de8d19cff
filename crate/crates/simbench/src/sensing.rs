//! Synthetic depth-camera point clouds and hard FOV classification.

use nalgebra::Vector3;
use pa_planner::geometry::{CameraModel, Transform};
use pa_planner::tracking::PointCloudSnapshot;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FovCategory {
    #[serde(rename = "IN_FOV")]
    InFov,
    #[serde(rename = "FRONT_NOT_FOV")]
    FrontNotFov,
    #[serde(rename = "BEHIND")]
    Behind,
}

impl FovCategory {
    pub const ALL: [FovCategory; 3] = [FovCategory::InFov, FovCategory::FrontNotFov, FovCategory::Behind];
}

/// `Behind` when the point has non-positive depth, `InFov` when it is at most `θ/2` off the
/// optical axis, `FrontNotFov` otherwise.
pub fn classify_frame(cam: &CameraModel, world_to_body: &Transform, center: &Vector3<f64>, theta: f64) -> FovCategory {
    let pc = cam.camera_point(world_to_body, center);
    if pc.z <= 0.0 {
        return FovCategory::Behind;
    }
    let angle = (pc.z / pc.norm()).clamp(-1.0, 1.0).acos();
    if angle <= theta / 2.0 {
        FovCategory::InFov
    } else {
        FovCategory::FrontNotFov
    }
}

fn in_cone(cam: &CameraModel, world_to_body: &Transform, p: &Vector3<f64>) -> bool {
    let pc = cam.camera_point(world_to_body, p);
    pc.z > 0.0 && pc.z / pc.norm() >= cam.cos_half_fov()
}

/// Uniform sample on the surface of an axis-aligned box.
fn sample_box_surface(rng: &mut impl Rng, center: &Vector3<f64>, half: &Vector3<f64>) -> Vector3<f64> {
    let areas = [half.y * half.z, half.x * half.z, half.x * half.y];
    let total = 2.0 * (areas[0] + areas[1] + areas[2]);
    let mut pick = rng.gen::<f64>() * total;
    let mut axis = 2;
    for (a, area) in areas.iter().enumerate() {
        if pick < 2.0 * area {
            axis = a;
            break;
        }
        pick -= 2.0 * area;
    }
    let mut local = Vector3::new(
        rng.gen_range(-1.0..=1.0) * half.x,
        rng.gen_range(-1.0..=1.0) * half.y,
        rng.gen_range(-1.0..=1.0) * half.z,
    );
    local[axis] = if rng.gen_bool(0.5) { half[axis] } else { -half[axis] };
    center + local
}

/// Point cloud of the obstacles at time `t` seen from the given camera pose.
///
/// Each obstacle box emits `density` surface samples; those outside the FOV cone or behind
/// the camera are dropped, and the rest are perturbed by isotropic Gaussian noise.
pub fn synthesize_pointcloud(
    world: &World,
    cam: &CameraModel,
    world_to_body: &Transform,
    t: f64,
    density: usize,
    noise: f64,
    rng: &mut impl Rng,
) -> PointCloudSnapshot {
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
    let mut points = Vec::new();
    for obstacle in &world.obstacles {
        let center = obstacle.path.position(t);
        for _ in 0..density {
            let p = sample_box_surface(rng, &center, &obstacle.half_sides);
            if !in_cone(cam, world_to_body, &p) {
                continue;
            }
            let p = if noise > 0.0 {
                p + Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
            } else {
                p
            };
            points.push(p);
        }
    }
    PointCloudSnapshot { timestamp: t, points }
}
