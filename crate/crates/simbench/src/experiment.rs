//! Closed-loop runs: the agent follows the committed trajectory exactly while the planner
//! replans at a fixed period from perfect or tracked obstacle predictions.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use pa_planner::geometry::{project_point, projected_velocity, CameraModel, GeometryError, Projection};
use pa_planner::planner::{AgentState, Planner, PlannerMode, StageTimings, WorldSnapshot};
use pa_planner::tracking::{Tracker, TrackerConfig, TrackingError};
use pa_planner::PlannerConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::metrics::{compute_metrics, FrameRecord, ImageSpec, Metrics};
use crate::sensing::{classify_frame, synthesize_pointcloud};
use crate::world::World;

/// Seconds without a successful replan after which the run is flagged as stalled.
pub const STALL_TIMEOUT: f64 = 5.0;

/// Extra collision checks between consecutive frames.
const COLLISION_SUBSTEPS: usize = 4;

/// How far past its last observation a tracked prediction may be queried.
const TRACKED_HORIZON: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PredictionSource {
    Perfect,
    Tracked,
}

impl fmt::Display for PredictionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictionSource::Perfect => "perfect",
            PredictionSource::Tracked => "tracked",
        })
    }
}

impl FromStr for PredictionSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "perfect" => Ok(PredictionSource::Perfect),
            "tracked" => Ok(PredictionSource::Tracked),
            other => Err(format!("unknown prediction source `{other}` (expected perfect or tracked)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub mode: PlannerMode,
    pub seed: u64,
    pub duration: f64,
    pub prediction: PredictionSource,
    pub config: PlannerConfig,
}

/// Stage timings of one replan (seconds).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub time: f64,
    pub obstacles: usize,
    pub convex_hulls: f64,
    pub position_guess: f64,
    pub psi_guess: f64,
    pub optimization: f64,
    pub total: f64,
    pub committed: bool,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub records: Vec<FrameRecord>,
    pub metrics: Metrics,
    pub timings: Vec<TimingRow>,
    /// One JSON record per replan.
    pub logs: Vec<String>,
    /// Start times of stalls longer than [`STALL_TIMEOUT`].
    pub stalls: Vec<f64>,
    pub replans: usize,
    pub failed_replans: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("tracking: {0}")]
    Tracking(#[from] TrackingError),
    #[error("invalid configuration: {0}")]
    Config(#[from] pa_planner::ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn image_spec(config: &PlannerConfig, world: &World) -> ImageSpec {
    ImageSpec {
        size_px: world.image_size,
        focal_length: config.focal_length,
        fov_angle: config.theta,
    }
}

pub fn run_experiment(world: &World, settings: &RunSettings) -> Result<Experiment, SimError> {
    let config = &settings.config;
    config.validate()?;
    let camera = CameraModel::forward_facing(config.focal_length, config.theta, config.gamma_sig)?;
    let image = image_spec(config, world);
    let px_per_m = image.px_per_meter();
    let goals = world.goal_schedule(settings.seed, settings.duration);
    let initial = AgentState::hover(world.start, world.start_psi);
    let mut planner = Planner::new(config.clone(), settings.mode, &initial, 0.0)?;
    let mut tracker = Tracker::new(TrackerConfig::from(config));
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed_c10d);

    let frame_dt = 1.0 / world.frame_rate;
    let frames = (settings.duration * world.frame_rate).round() as usize;
    let replan_every = ((world.replan_period * world.frame_rate).round() as usize).max(1);

    let mut records = Vec::with_capacity(frames * world.obstacles.len());
    let mut timings = Vec::new();
    let mut logs = Vec::new();
    let mut stalls = Vec::new();
    let mut collisions = 0;
    let (mut replans, mut failed) = (0, 0);
    let mut last_commit = 0.0;
    let mut stalled = false;

    for k in 0..=frames {
        let t = k as f64 * frame_dt;
        if settings.prediction == PredictionSource::Tracked {
            let pose = planner.committed().flat_state_at(t).world_to_body()?;
            let cloud = synthesize_pointcloud(world, &camera, &pose, t, world.cloud_density, world.cloud_noise, &mut rng);
            tracker.ingest(&cloud)?;
        }
        if k % replan_every == 0 && k < frames {
            let predictions = match settings.prediction {
                PredictionSource::Perfect => world.perfect_predictions(),
                PredictionSource::Tracked => tracker.predictions(TRACKED_HORIZON),
            };
            let snapshot = WorldSnapshot {
                time: t,
                predictions,
                terminal_goal: goals.goal_at(t),
            };
            let outcome = planner.replan(&snapshot);
            replans += 1;
            let log = outcome.log();
            if outcome.is_committed() {
                last_commit = t;
                stalled = false;
            } else {
                failed += 1;
                log::debug!("t={t:.2}: keeping previous trajectory ({})", log.failure.as_deref().unwrap_or(""));
            }
            timings.push(timing_row(t, snapshot.predictions.len(), &log.timings, outcome.is_committed()));
            logs.push(log.to_json());
            if !stalled && t - last_commit > STALL_TIMEOUT {
                stalled = true;
                stalls.push(last_commit);
                log::warn!("planner stalled since t={last_commit:.2}");
            }
        }

        // collisions on the sub-steps since the previous frame
        if k > 0 {
            for s in 1..=COLLISION_SUBSTEPS {
                let ts = t - frame_dt + frame_dt * s as f64 / COLLISION_SUBSTEPS as f64;
                let p = Vector3::from(planner.committed().flat_state_at(ts).p);
                if world.obstacles.iter().any(|o| o.overlaps(ts, &p, &config.agent_half_sides)) {
                    collisions += 1;
                }
            }
        }

        let state = planner.committed().flat_state_at(t);
        let pose = state.world_to_body()?;
        for obstacle in &world.obstacles {
            let center = obstacle.path.position(t);
            let category = classify_frame(&camera, &pose, &center, config.theta);
            let (image_x, image_y, projected_speed) = match project_point(&camera, &pose, &center) {
                Projection::Image(s) => {
                    let speed = projected_velocity(&camera, planner.committed(), obstacle, t)
                        .map(|v| v.norm() * px_per_m)
                        .ok();
                    (Some(s.x), Some(s.y), speed)
                }
                Projection::Behind => (None, None, None),
            };
            records.push(FrameRecord {
                time: t,
                agent_x: state.p[0],
                agent_y: state.p[1],
                agent_z: state.p[2],
                agent_vx: state.v[0],
                agent_vy: state.v[1],
                agent_vz: state.v[2],
                agent_ax: state.a[0],
                agent_ay: state.a[1],
                agent_az: state.a[2],
                agent_psi: state.psi,
                agent_psi_dot: state.psi_dot,
                committed_id: planner.committed().id_at(t),
                obstacle_id: obstacle.id,
                obstacle_x: center.x,
                obstacle_y: center.y,
                obstacle_z: center.z,
                image_x,
                image_y,
                projected_speed,
                category,
            });
        }
    }
    let metrics = compute_metrics(&records, &image, collisions);
    Ok(Experiment {
        records,
        metrics,
        timings,
        logs,
        stalls,
        replans,
        failed_replans: failed,
    })
}

fn timing_row(t: f64, obstacles: usize, s: &StageTimings, committed: bool) -> TimingRow {
    TimingRow {
        time: t,
        obstacles,
        convex_hulls: s.convex_hulls,
        position_guess: s.position_guess,
        psi_guess: s.psi_guess,
        optimization: s.optimization,
        total: s.total(),
        committed,
    }
}
