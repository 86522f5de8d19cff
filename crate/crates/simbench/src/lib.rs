//! Headless closed-loop benchmark for the perception-aware planner.
//!
//! A box-shaped obstacle flies a trefoil knot while the agent visits random corners of a
//! square arena. Every frame records where the obstacle appears in the agent's camera,
//! and the runs of the three planner modes are compared on the share of frames with the
//! obstacle in the FOV and on its projected speed in the image.

pub mod experiment;
pub mod metrics;
pub mod output;
pub mod sensing;
pub mod world;

pub use experiment::{run_experiment, Experiment, PredictionSource, RunSettings, SimError};
pub use metrics::{compute_metrics, projection_histogram, FrameRecord, ImageSpec, Metrics};
pub use sensing::{classify_frame, synthesize_pointcloud, FovCategory};
pub use world::{trefoil_position, trefoil_velocity, World};
