//! Perception-aware trajectory planning for multirotors flying among dynamic obstacles.
//!
//! The planner jointly optimizes a cubic position spline and a quadratic spline for the
//! rotation angle about the thrust axis, so that a selected obstacle stays inside a
//! forward-facing camera's field of view with a small projected velocity, while
//! separating planes keep every interval of the trajectory clear of the inflated
//! predicted obstacle hulls.
//!
//! Module map:
//! - [`geometry`]: quaternions, transforms, the thrust-aligned attitude map, pinhole camera.
//! - [`splines`]: clamped uniform splines and MINVO conversion.
//! - [`tracking`]: clustering, Hungarian assignment, polynomial prediction.
//! - [`corridor`]: inflated obstacle hulls and separating planes.
//! - [`guess`]: control-point search for the position guess, layered yaw graph.
//! - [`optimizer`]: the nonlinear program and its solver.
//! - [`planner`]: replanning orchestration.

pub mod ad;
pub mod config;
pub mod corridor;
pub mod geometry;
pub mod guess;
pub mod optimizer;
pub mod planner;
pub mod splines;
pub mod tracking;

pub use config::{ConfigError, PlannerConfig};
pub use geometry::{CameraModel, Quaternion, Transform};
pub use planner::{AgentState, CommittedTrajectory, Planner, PlannerMode, ReplanOutcome};
pub use splines::TrajectorySpline;
pub use tracking::{ObstaclePrediction, PredictedTrajectory, Tracker};

/// Standard gravity used for the relative acceleration `a + g e_z`.
pub const GRAVITY: f64 = 9.81;
