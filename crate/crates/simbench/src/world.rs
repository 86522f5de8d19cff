//! Scenario definition: trefoil-knot obstacles, goal schedule, start pose, sensing settings.

use std::sync::Arc;

use nalgebra::Vector3;
use pa_planner::geometry::PointTrajectory;
use pa_planner::ObstaclePrediction;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `x = sin ωt + 2 sin 2ωt`, `y = cos ωt − 2 cos 2ωt`, `z = −sin 3ωt`, scaled per axis and
/// offset by `center`.
pub fn trefoil_position(t: f64, scale: &Vector3<f64>, center: &Vector3<f64>, omega: f64) -> Vector3<f64> {
    let s = omega * t;
    let raw = Vector3::new(s.sin() + 2.0 * (2.0 * s).sin(), s.cos() - 2.0 * (2.0 * s).cos(), -(3.0 * s).sin());
    raw.component_mul(scale) + center
}

pub fn trefoil_velocity(t: f64, scale: &Vector3<f64>, omega: f64) -> Vector3<f64> {
    let s = omega * t;
    let raw = Vector3::new(
        s.cos() + 4.0 * (2.0 * s).cos(),
        -s.sin() + 4.0 * (2.0 * s).sin(),
        -3.0 * (3.0 * s).cos(),
    );
    raw.component_mul(scale) * omega
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trefoil {
    pub omega: f64,
    pub scale: Vector3<f64>,
    pub center: Vector3<f64>,
    /// Time offset, so several obstacles can share one knot.
    pub phase: f64,
}

impl Trefoil {
    pub fn position(&self, t: f64) -> Vector3<f64> {
        trefoil_position(t + self.phase, &self.scale, &self.center, self.omega)
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        trefoil_velocity(t + self.phase, &self.scale, self.omega)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSpec {
    pub id: usize,
    pub half_sides: Vector3<f64>,
    pub path: Trefoil,
}

impl ObstacleSpec {
    pub fn overlaps(&self, t: f64, center: &Vector3<f64>, half_sides: &Vector3<f64>) -> bool {
        let d = (self.path.position(t) - center).abs();
        (0..3).all(|a| d[a] < self.half_sides[a] + half_sides[a])
    }
}

impl PointTrajectory for ObstacleSpec {
    fn position(&self, t: f64) -> Vector3<f64> {
        self.path.position(t)
    }

    fn velocity(&self, t: f64) -> Vector3<f64> {
        self.path.velocity(t)
    }
}

/// The obstacle's true motion handed to the planner (no uncertainty, no expiry).
#[derive(Debug, Clone)]
pub struct PerfectPrediction(pub ObstacleSpec);

impl ObstaclePrediction for PerfectPrediction {
    fn id(&self) -> usize {
        self.0.id
    }

    fn mean(&self, t: f64) -> Vector3<f64> {
        self.0.path.position(t)
    }

    fn velocity(&self, t: f64) -> Vector3<f64> {
        self.0.path.velocity(t)
    }

    fn sigma(&self, _t: f64) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn half_sides(&self) -> Vector3<f64> {
        self.0.half_sides
    }

    fn valid_until(&self) -> f64 {
        f64::INFINITY
    }
}

/// Goals on the corners of a square at fixed height, switching every `period` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalSchedule {
    pub period: f64,
    pub goals: Vec<Vector3<f64>>,
}

impl GoalSchedule {
    /// Each new goal is a uniformly drawn corner different from the previous one.
    pub fn random_corners(seed: u64, duration: f64, period: f64, half_extent: f64, z: f64, start: &Vector3<f64>) -> Self {
        let corners: Vec<Vector3<f64>> = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|(x, y)| Vector3::new(x * half_extent, y * half_extent, z))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = (duration / period).ceil().max(1.0) as usize;
        let mut previous = *start;
        let mut goals = Vec::with_capacity(count);
        for _ in 0..count {
            let options: Vec<&Vector3<f64>> = corners.iter().filter(|c| (**c - previous).norm() > 1e-9).collect();
            let g = **options.choose(&mut rng).expect("at least three corners differ");
            goals.push(g);
            previous = g;
        }
        Self { period, goals }
    }

    pub fn goal_at(&self, t: f64) -> Vector3<f64> {
        let k = ((t / self.period).floor().max(0.0) as usize).min(self.goals.len() - 1);
        self.goals[k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub obstacles: Vec<ObstacleSpec>,
    pub start: Vector3<f64>,
    pub start_psi: f64,
    pub goal_period: f64,
    pub arena_half_extent: f64,
    pub goal_height: f64,
    pub frame_rate: f64,
    pub replan_period: f64,
    /// Square image side in pixels.
    pub image_size: f64,
    /// Points per visible obstacle in the synthetic point clouds.
    pub cloud_density: usize,
    pub cloud_noise: f64,
}

impl World {
    /// One 0.8 m cube on a trefoil knot spanning about 6 × 6 × 1.5 m around `(0, 0, 1)`,
    /// goals on the corners of a 10 × 10 m square.
    pub fn trefoil_scenario() -> Self {
        Self {
            obstacles: vec![ObstacleSpec {
                id: 0,
                half_sides: Vector3::repeat(0.4),
                path: Trefoil {
                    omega: 0.3,
                    scale: Vector3::new(1.0, 1.0, 0.75),
                    center: Vector3::new(0.0, 0.0, 1.0),
                    phase: 0.0,
                },
            }],
            start: Vector3::new(-5.0, -5.0, 1.0),
            start_psi: 0.0,
            goal_period: 2.0,
            arena_half_extent: 5.0,
            goal_height: 1.0,
            frame_rate: 30.0,
            replan_period: 0.2,
            image_size: 480.0,
            cloud_density: 300,
            cloud_noise: 0.01,
        }
    }

    /// Three obstacles on the same knot, a third of a period apart.
    pub fn three_obstacle_scenario() -> Self {
        let mut w = Self::trefoil_scenario();
        let base = w.obstacles[0].clone();
        let period = 2.0 * std::f64::consts::PI / base.path.omega;
        w.obstacles = (0..3)
            .map(|k| {
                let mut o = base.clone();
                o.id = k;
                o.path.phase = k as f64 * period / 3.0;
                o
            })
            .collect();
        w
    }

    pub fn goal_schedule(&self, seed: u64, duration: f64) -> GoalSchedule {
        GoalSchedule::random_corners(seed, duration, self.goal_period, self.arena_half_extent, self.goal_height, &self.start)
    }

    pub fn perfect_predictions(&self) -> Vec<Arc<dyn ObstaclePrediction>> {
        self.obstacles
            .iter()
            .map(|o| Arc::new(PerfectPrediction(o.clone())) as Arc<dyn ObstaclePrediction>)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trefoil_origin_value() {
        let p = trefoil_position(0.0, &Vector3::repeat(1.0), &Vector3::zeros(), 0.7);
        assert!((p - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn goals_switch_between_distinct_corners() {
        let w = World::trefoil_scenario();
        let s = w.goal_schedule(3, 60.0);
        assert_eq!(s.goals.len(), 30);
        for pair in s.goals.windows(2) {
            assert!((pair[0] - pair[1]).norm() > 1.0);
        }
        assert_eq!(s.goal_at(0.0), s.goals[0]);
        assert_eq!(s.goal_at(2.5), s.goals[1]);
        assert_eq!(s.goal_at(1e6), *s.goals.last().unwrap());
    }
}
