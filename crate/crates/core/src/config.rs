//! Planner configuration and its `key = value` text format.
//!
//! One entry per line, `#` starts a comment, vectors are comma separated. Every key is
//! optional; missing keys keep their defaults. [`PlannerConfig::to_text`] writes every key
//! with its unit as a trailing comment, so a written file is self-documenting:
//!
//! ```text
//! alpha_j = 0.001        # weight on ∫‖jerk‖² dt
//! v_max = 3.5, 3.5, 3.5  # m/s
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: cannot parse value for `{key}`: {value}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    // cost weights
    pub alpha_j: f64,
    pub alpha_psi: f64,
    pub alpha_fov: f64,
    pub alpha_g: f64,
    pub epsilon: f64,
    pub gamma_vel: f64,
    // camera
    pub gamma_sig: f64,
    pub theta: f64,
    pub focal_length: f64,
    // dynamic limits
    pub v_max: Vector3<f64>,
    pub a_max: Vector3<f64>,
    pub j_max: Vector3<f64>,
    pub psi_dot_max: f64,
    // corridor
    pub delta: f64,
    pub separation_margin: f64,
    pub agent_half_sides: Vector3<f64>,
    // goal, horizon and obstacle selection
    pub sphere_radius: f64,
    pub selection_radius: f64,
    pub selection_samples: usize,
    pub num_intervals: usize,
    pub horizon_min: f64,
    pub horizon_speed_fraction: f64,
    pub replan_budget: f64,
    pub simpson_subintervals: usize,
    // yaw graph
    pub c_psi: f64,
    pub c_psi_max: f64,
    pub c_fov: f64,
    pub yaw_samples: usize,
    // octopus search
    pub octopus_samples_per_axis: usize,
    pub octopus_node_budget: usize,
    pub octopus_goal_weight: f64,
    // solver
    pub solver_max_iterations: usize,
    pub solver_tolerance: f64,
    // tracker
    pub cluster_tolerance: f64,
    pub new_track_threshold: f64,
    pub track_window: usize,
    pub track_expiry: usize,
    pub poly_degree: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            alpha_j: 1e-3,
            alpha_psi: 1e-2,
            alpha_fov: 10.0,
            alpha_g: 10.0,
            epsilon: 0.1,
            gamma_vel: 1.0,
            gamma_sig: 20.0,
            theta: 60f64.to_radians(),
            focal_length: 1.0,
            v_max: Vector3::repeat(3.5),
            a_max: Vector3::repeat(8.0),
            j_max: Vector3::repeat(40.0),
            psi_dot_max: 4.0,
            delta: 0.95,
            separation_margin: 1e-3,
            agent_half_sides: Vector3::repeat(0.15),
            sphere_radius: 4.0,
            selection_radius: 1.0,
            selection_samples: 20,
            num_intervals: 6,
            horizon_min: 1.0,
            horizon_speed_fraction: 0.7,
            replan_budget: 0.12,
            simpson_subintervals: 8,
            c_psi: 1.0,
            c_psi_max: 10.0,
            c_fov: 5.0,
            yaw_samples: 12,
            octopus_samples_per_axis: 9,
            octopus_node_budget: 50_000,
            octopus_goal_weight: 1.0,
            solver_max_iterations: 150,
            solver_tolerance: 1e-7,
            cluster_tolerance: 0.3,
            new_track_threshold: 1.5,
            track_window: 20,
            track_expiry: 10,
            poly_degree: 2,
        }
    }
}

enum Slot<'a> {
    Real(&'a mut f64),
    Vec3(&'a mut Vector3<f64>),
    Count(&'a mut usize),
}

impl PlannerConfig {
    /// `(key, unit or meaning, slot)` for every field, in file order.
    fn slots(&mut self) -> Vec<(&'static str, &'static str, Slot<'_>)> {
        use Slot::*;
        vec![
            ("alpha_j", "weight on ∫‖jerk‖² dt", Real(&mut self.alpha_j)),
            ("alpha_psi", "weight on ∫ψ̈² dt", Real(&mut self.alpha_psi)),
            ("alpha_fov", "weight on the perception reward", Real(&mut self.alpha_fov)),
            ("alpha_g", "weight on ‖p(t_f) − g‖², 1/m²", Real(&mut self.alpha_g)),
            ("epsilon", "reward denominator offset", Real(&mut self.epsilon)),
            ("gamma_vel", "projected velocity weight, s²/m²", Real(&mut self.gamma_vel)),
            ("gamma_sig", "sigmoid sharpness of the FOV indicator", Real(&mut self.gamma_sig)),
            ("theta", "FOV cone opening angle, rad", Real(&mut self.theta)),
            ("focal_length", "m", Real(&mut self.focal_length)),
            ("v_max", "m/s per axis", Vec3(&mut self.v_max)),
            ("a_max", "m/s² per axis", Vec3(&mut self.a_max)),
            ("j_max", "m/s³ per axis", Vec3(&mut self.j_max)),
            ("psi_dot_max", "rad/s", Real(&mut self.psi_dot_max)),
            ("delta", "prediction interval probability", Real(&mut self.delta)),
            ("separation_margin", "m", Real(&mut self.separation_margin)),
            ("agent_half_sides", "m", Vec3(&mut self.agent_half_sides)),
            ("sphere_radius", "goal projection radius r, m", Real(&mut self.sphere_radius)),
            ("selection_radius", "obstacle selection radius R, m", Real(&mut self.selection_radius)),
            ("selection_samples", "obstacle selection samples U", Count(&mut self.selection_samples)),
            ("num_intervals", "knot intervals per plan", Count(&mut self.num_intervals)),
            ("horizon_min", "s", Real(&mut self.horizon_min)),
            ("horizon_speed_fraction", "fraction of min v_max used for the horizon", Real(&mut self.horizon_speed_fraction)),
            ("replan_budget", "s", Real(&mut self.replan_budget)),
            ("simpson_subintervals", "even Simpson subintervals per knot interval", Count(&mut self.simpson_subintervals)),
            ("c_psi", "yaw graph smoothness weight, 1/rad²", Real(&mut self.c_psi)),
            ("c_psi_max", "yaw graph rate-violation penalty", Real(&mut self.c_psi_max)),
            ("c_fov", "yaw graph FOV reward", Real(&mut self.c_fov)),
            ("yaw_samples", "ψ samples per yaw graph layer", Count(&mut self.yaw_samples)),
            ("octopus_samples_per_axis", "velocity grid samples per axis", Count(&mut self.octopus_samples_per_axis)),
            ("octopus_node_budget", "generated search nodes", Count(&mut self.octopus_node_budget)),
            ("octopus_goal_weight", "distance-to-goal heuristic weight", Real(&mut self.octopus_goal_weight)),
            ("solver_max_iterations", "SQP iterations", Count(&mut self.solver_max_iterations)),
            ("solver_tolerance", "step and stationarity tolerance", Real(&mut self.solver_tolerance)),
            ("cluster_tolerance", "m", Real(&mut self.cluster_tolerance)),
            ("new_track_threshold", "m", Real(&mut self.new_track_threshold)),
            ("track_window", "observations", Count(&mut self.track_window)),
            ("track_expiry", "missed snapshots", Count(&mut self.track_expiry)),
            ("poly_degree", "prediction polynomial degree", Count(&mut self.poly_degree)),
        ]
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        {
            let mut slots = cfg.slots();
            for (i, raw) in text.lines().enumerate() {
                let line_no = i + 1;
                let line = raw.split('#').next().unwrap().trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or(ConfigError::Syntax { line: line_no })?;
                let (key, value) = (key.trim(), value.trim());
                let bad = || ConfigError::BadValue {
                    line: line_no,
                    key: key.to_string(),
                    value: value.to_string(),
                };
                let slot = slots
                    .iter_mut()
                    .find(|(k, _, _)| *k == key)
                    .map(|(_, _, s)| s)
                    .ok_or_else(|| ConfigError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })?;
                match slot {
                    Slot::Real(r) => **r = value.parse().map_err(|_| bad())?,
                    Slot::Count(c) => **c = value.parse().map_err(|_| bad())?,
                    Slot::Vec3(v) => {
                        let parts: Vec<f64> = value
                            .split(',')
                            .map(|s| s.trim().parse())
                            .collect::<Result<_, _>>()
                            .map_err(|_| bad())?;
                        **v = match parts.as_slice() {
                            [s] => Vector3::repeat(*s),
                            [x, y, z] => Vector3::new(*x, *y, *z),
                            _ => return Err(bad()),
                        };
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        for (key, unit, slot) in copy.slots() {
            let value = match slot {
                Slot::Real(r) => format!("{r:?}"),
                Slot::Count(c) => c.to_string(),
                Slot::Vec3(v) => format!("{:?}, {:?}, {:?}", v.x, v.y, v.z),
            };
            writeln!(out, "{key} = {value}  # {unit}").unwrap();
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        for (name, w) in [
            ("alpha_j", self.alpha_j),
            ("alpha_psi", self.alpha_psi),
            ("alpha_fov", self.alpha_fov),
            ("alpha_g", self.alpha_g),
            ("gamma_vel", self.gamma_vel),
            ("c_psi", self.c_psi),
            ("c_psi_max", self.c_psi_max),
            ("c_fov", self.c_fov),
        ] {
            if !(w >= 0.0) {
                return fail(format!("{name} must be non-negative"));
            }
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be positive".into());
        }
        if !(self.gamma_sig > 0.0) || !(self.focal_length > 0.0) {
            return fail("gamma_sig and focal_length must be positive".into());
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::PI) {
            return fail("theta must lie in (0, π)".into());
        }
        for (name, v) in [("v_max", self.v_max), ("a_max", self.a_max), ("j_max", self.j_max)] {
            if v.iter().any(|c| !(*c > 0.0)) {
                return fail(format!("{name} must be positive"));
            }
        }
        if !(self.psi_dot_max > 0.0) {
            return fail("psi_dot_max must be positive".into());
        }
        if !(self.delta > 0.5 && self.delta < 1.0) {
            return fail("delta must lie in (0.5, 1)".into());
        }
        if self.simpson_subintervals < 2 || self.simpson_subintervals % 2 != 0 {
            return fail("simpson_subintervals must be even and at least 2".into());
        }
        if self.num_intervals < 3 {
            return fail("num_intervals must be at least 3".into());
        }
        if self.octopus_samples_per_axis < 2 || self.yaw_samples < 1 || self.selection_samples < 1 {
            return fail("search grids need at least two samples".into());
        }
        if !(self.sphere_radius > 0.0 && self.horizon_min > 0.0 && self.horizon_speed_fraction > 0.0) {
            return fail("sphere_radius and horizon parameters must be positive".into());
        }
        if self.track_window < self.poly_degree + 2 {
            return fail("track_window must hold at least poly_degree + 2 observations".into());
        }
        Ok(())
    }

    /// Number of position control points `n_p + 1`.
    pub fn num_position_points(&self) -> usize {
        self.num_intervals + 3
    }

    /// Number of ψ control points `n_ψ + 1` (degree 2 on the same knot times).
    pub fn num_angle_points(&self) -> usize {
        self.num_intervals + 2
    }

    /// Plan duration for a goal at distance `dist` from the commit point.
    pub fn horizon(&self, dist: f64) -> f64 {
        let v = self.v_max.min() * self.horizon_speed_fraction;
        self.horizon_min.max(dist / v)
    }
}
