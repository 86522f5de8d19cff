//! Replanning: commit point, goal projection, obstacle selection, guess, solve, audit, splice.
//!
//! Each cycle plans from the state `d` the vehicle will have once the replan budget has
//! elapsed. Every obstacle gets an inflated hull per interval and a separating plane, but
//! only the obstacle most likely to come near the straight line towards the terminal goal
//! enters the perception term. A new trajectory is spliced in only after it passes the
//! constraint audit; otherwise the vehicle keeps following the previous one.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DVector, Vector3};
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::config::PlannerConfig;
use crate::corridor::{build_obstacle_hull, CorridorError, ObstacleHull};
use crate::geometry::{CameraModel, FlatState, FlatTrajectory, GeometryError};
use crate::guess::{
    audit_plan, fit_yaw_spline, octopus_search, project_angle_rates, AuditInput, AuditViolation, GuessError,
    OctopusInput, YawGraph, YawGraphSettings,
};
use crate::optimizer::{
    solve, CostWeights, Limits, NlpProblem, OptimizerError, ProblemSpec, SolveOutcome, SolveReport, SolverSettings,
    VariableSet,
};
use crate::splines::{AngleSpline, PositionSpline, SplineOperators};
use crate::tracking::ObstaclePrediction;

/// Position, velocity, acceleration, ψ and ψ̇ of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub a: Vector3<f64>,
    pub psi: f64,
    pub psi_dot: f64,
}

impl AgentState {
    pub fn hover(p: Vector3<f64>, psi: f64) -> Self {
        Self {
            p,
            v: Vector3::zeros(),
            a: Vector3::zeros(),
            psi,
            psi_dot: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).chain(self.a.iter()).all(|x| x.is_finite())
            && self.psi.is_finite()
            && self.psi_dot.is_finite()
    }

    /// Largest absolute difference over the eleven components.
    pub fn max_difference(&self, other: &AgentState) -> f64 {
        (self.p - other.p)
            .amax()
            .max((self.v - other.v).amax())
            .max((self.a - other.a).amax())
            .max((self.psi - other.psi).abs())
            .max((self.psi_dot - other.psi_dot).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PlannerMode {
    /// Position only, ψ held at its initial value.
    NoPa,
    /// Position without the perception term, then ψ with it.
    Decoupled,
    /// Position and ψ together with the perception term.
    Coupled,
}

impl PlannerMode {
    pub const ALL: [PlannerMode; 3] = [PlannerMode::NoPa, PlannerMode::Decoupled, PlannerMode::Coupled];

    pub fn name(self) -> &'static str {
        match self {
            PlannerMode::NoPa => "no_pa",
            PlannerMode::Decoupled => "decoupled",
            PlannerMode::Coupled => "coupled",
        }
    }
}

impl fmt::Display for PlannerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "no_pa" | "nopa" => Ok(PlannerMode::NoPa),
            "decoupled" => Ok(PlannerMode::Decoupled),
            "coupled" => Ok(PlannerMode::Coupled),
            other => Err(format!("unknown planner mode `{other}` (expected no_pa, decoupled or coupled)")),
        }
    }
}

/// One planned trajectory on absolute time.
#[derive(Debug, Clone)]
pub struct TrajectoryPiece {
    pub id: u64,
    pub position: PositionSpline,
    pub angle: AngleSpline,
}

impl TrajectoryPiece {
    pub fn t_in(&self) -> f64 {
        self.position.t_in()
    }

    pub fn t_f(&self) -> f64 {
        self.position.t_f()
    }

    fn flat_state(&self, t: f64) -> FlatState {
        if t > self.t_f() {
            let p = self.position.evaluate(self.t_f(), 0).unwrap();
            let psi = self.angle.evaluate(self.t_f(), 0).unwrap()[0];
            let zero = Vector3::zeros();
            return FlatState::from_vectors(&p, &zero, &zero, &zero, psi, 0.0);
        }
        let t = t.max(self.t_in());
        let d = |k| self.position.evaluate(t, k).unwrap();
        let psi = self.angle.evaluate(t, 0).unwrap()[0];
        let psi_dot = self.angle.evaluate(t, 1).unwrap()[0];
        FlatState::from_vectors(&d(0), &d(1), &d(2), &d(3), psi, psi_dot)
    }
}

/// The trajectory being executed: a chain of pieces, each followed until the next begins,
/// and a hover at the end of the last one.
#[derive(Debug, Clone)]
pub struct CommittedTrajectory {
    pieces: Vec<TrajectoryPiece>,
    next_id: u64,
}

impl CommittedTrajectory {
    /// Hover at `state` (velocity, acceleration and ψ̇ are ignored) starting at `t0`.
    pub fn hover(state: &AgentState, t0: f64) -> Self {
        let ops = SplineOperators::new(1, t0, t0 + 1.0);
        let piece = TrajectoryPiece {
            id: 0,
            position: ops.position_spline(vec![state.p; ops.num_position_points()]),
            angle: ops.angle_spline(&vec![state.psi; ops.num_angle_points()]),
        };
        Self {
            pieces: vec![piece],
            next_id: 1,
        }
    }

    pub fn pieces(&self) -> &[TrajectoryPiece] {
        &self.pieces
    }

    fn piece_at(&self, t: f64) -> &TrajectoryPiece {
        let k = self.pieces.partition_point(|p| p.t_in() <= t);
        &self.pieces[k.saturating_sub(1)]
    }

    /// Identifier of the piece executing at `t`.
    pub fn id_at(&self, t: f64) -> u64 {
        self.piece_at(t).id
    }

    /// End of the last piece; the vehicle hovers afterwards.
    pub fn end_time(&self) -> f64 {
        self.pieces.last().unwrap().t_f()
    }

    pub fn flat_state_at(&self, t: f64) -> FlatState {
        self.piece_at(t).flat_state(t)
    }

    pub fn state_at(&self, t: f64) -> AgentState {
        let s = self.flat_state_at(t);
        AgentState {
            p: Vector3::from(s.p),
            v: Vector3::from(s.v),
            a: Vector3::from(s.a),
            psi: s.psi,
            psi_dot: s.psi_dot,
        }
    }

    /// Follow `position`/`angle` from their start time on. Returns the new piece id.
    pub fn splice(&mut self, position: PositionSpline, angle: AngleSpline) -> u64 {
        let t = position.t_in();
        while self.pieces.len() > 1 && self.pieces.last().unwrap().t_in() >= t {
            self.pieces.pop();
        }
        let id = self.next_id;
        self.next_id += 1;
        self.pieces.push(TrajectoryPiece { id, position, angle });
        id
    }

    /// Drop pieces already superseded at `t`.
    pub fn prune(&mut self, t: f64) {
        let k = self.pieces.partition_point(|p| p.t_in() <= t);
        if k > 1 {
            self.pieces.drain(..k - 1);
        }
    }
}

impl FlatTrajectory for CommittedTrajectory {
    fn flat_state(&self, t: f64) -> FlatState {
        self.flat_state_at(t)
    }
}

/// The state at `now + budget` on the committed trajectory, which the next plan starts from.
pub fn pick_commit_point(committed: &CommittedTrajectory, now: f64, budget: f64) -> (AgentState, f64) {
    let t_in = now + budget;
    (committed.state_at(t_in), t_in)
}

/// `g_term` pulled onto the sphere of radius `r` around `p` when it lies outside.
pub fn project_goal(p: &Vector3<f64>, g_term: &Vector3<f64>, r: f64) -> Vector3<f64> {
    let d = g_term - p;
    let dist = d.norm();
    if dist > r {
        p + d * (r / dist)
    } else {
        *g_term
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(|X| ≤ r)` for `X ~ N(mu, sigma²)`.
fn band_probability(mu: f64, sigma: f64, r: f64) -> f64 {
    if sigma <= 1e-12 {
        return if mu.abs() <= r { 1.0 } else { 0.0 };
    }
    normal_cdf((r - mu) / sigma) - normal_cdf((-r - mu) / sigma)
}

/// Score of one obstacle: `Σ_u P(‖p_i(t_u) − κ(u)‖∞ ≤ R)` over `u = 0..=U`, with `κ(u)`
/// on the segment from `p` to `g_term` and `t_u` evenly spaced over `[t_in, t_f]`.
pub fn selection_score(
    pred: &dyn ObstaclePrediction,
    p: &Vector3<f64>,
    g_term: &Vector3<f64>,
    radius: f64,
    samples: usize,
    t_in: f64,
    t_f: f64,
) -> f64 {
    let u_max = samples.max(1);
    (0..=u_max)
        .map(|u| {
            let s = u as f64 / u_max as f64;
            let kappa = p + (g_term - p) * s;
            let t = t_in + s * (t_f - t_in);
            let mu = pred.mean(t) - kappa;
            let sigma = pred.sigma(t);
            (0..3).map(|a| band_probability(mu[a], sigma[a], radius)).product::<f64>()
        })
        .sum()
}

/// Id of the obstacle with the highest [`selection_score`]; ties go to the lower id.
pub fn select_obstacle(
    predictions: &[Arc<dyn ObstaclePrediction>],
    p: &Vector3<f64>,
    g_term: &Vector3<f64>,
    radius: f64,
    samples: usize,
    t_in: f64,
    t_f: f64,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for pred in predictions {
        let score = selection_score(pred.as_ref(), p, g_term, radius, samples, t_in, t_f);
        let id = pred.id();
        best = match best {
            Some((s, i)) if s > score || (s == score && i < id) => Some((s, i)),
            _ => Some((score, id)),
        };
    }
    best.map(|(_, id)| id)
}

/// What the planner sees in one cycle.
#[derive(Debug, Clone)]
pub struct WorldSnapshot {
    pub time: f64,
    pub predictions: Vec<Arc<dyn ObstaclePrediction>>,
    pub terminal_goal: Vector3<f64>,
}

/// Wall time of each stage in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub convex_hulls: f64,
    pub position_guess: f64,
    pub psi_guess: f64,
    pub optimization: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.convex_hulls + self.position_guess + self.psi_guess + self.optimization
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplanFailure {
    #[error("corridor: {0}")]
    Corridor(#[from] CorridorError),
    #[error("guess: {0}")]
    Guess(#[from] GuessError),
    #[error("optimizer: {0}")]
    Optimizer(#[from] OptimizerError),
    #[error("audit: {0}")]
    Audit(#[from] AuditViolation),
}

/// Per-replan log record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplanLog {
    pub time: f64,
    pub mode: PlannerMode,
    pub t_in: f64,
    pub t_f: f64,
    pub goal: Vector3<f64>,
    pub selected_obstacle: Option<usize>,
    pub obstacles: usize,
    pub guess_nodes: usize,
    pub guess_goal_distance: f64,
    pub timings: StageTimings,
    pub solves: Vec<SolveReport>,
    pub committed_id: Option<u64>,
    pub failure: Option<String>,
}

impl ReplanLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log record serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplanOutcome {
    Committed { id: u64, log: ReplanLog },
    KeepPrevious { reason: ReplanFailure, log: ReplanLog },
}

impl ReplanOutcome {
    pub fn log(&self) -> &ReplanLog {
        match self {
            Self::Committed { log, .. } | Self::KeepPrevious { log, .. } => log,
        }
    }

    pub fn is_committed(&self) -> bool {
        matches!(self, Self::Committed { .. })
    }
}

/// A candidate plan with the data needed to audit it.
#[derive(Debug, Clone)]
pub struct Plan {
    pub ops: SplineOperators,
    pub position: Vec<Vector3<f64>>,
    pub angle: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Planner {
    config: PlannerConfig,
    mode: PlannerMode,
    camera: CameraModel,
    committed: CommittedTrajectory,
}

impl Planner {
    pub fn new(config: PlannerConfig, mode: PlannerMode, initial: &AgentState, t0: f64) -> Result<Self, GeometryError> {
        let camera = CameraModel::forward_facing(config.focal_length, config.theta, config.gamma_sig)?;
        Ok(Self {
            config,
            mode,
            camera,
            committed: CommittedTrajectory::hover(initial, t0),
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn mode(&self) -> PlannerMode {
        self.mode
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn committed(&self) -> &CommittedTrajectory {
        &self.committed
    }

    /// Run one cycle and splice the result if it passes the audit.
    pub fn replan(&mut self, world: &WorldSnapshot) -> ReplanOutcome {
        let (d, t_in) = pick_commit_point(&self.committed, world.time, self.config.replan_budget);
        let mut log = ReplanLog {
            time: world.time,
            mode: self.mode,
            t_in,
            t_f: t_in,
            goal: world.terminal_goal,
            selected_obstacle: None,
            obstacles: world.predictions.len(),
            guess_nodes: 0,
            guess_goal_distance: f64::NAN,
            timings: StageTimings::default(),
            solves: Vec::new(),
            committed_id: None,
            failure: None,
        };
        match self.plan(world, &d, t_in, &mut log) {
            Ok(plan) => {
                let position = plan.ops.position_spline(plan.position);
                let angle = plan.ops.angle_spline(&plan.angle);
                let id = self.committed.splice(position, angle);
                self.committed.prune(world.time);
                log.committed_id = Some(id);
                ReplanOutcome::Committed { id, log }
            }
            Err(reason) => {
                log.failure = Some(reason.to_string());
                ReplanOutcome::KeepPrevious { reason, log }
            }
        }
    }

    /// Plan from `d` at `t_in` without touching the committed trajectory.
    pub fn plan(
        &self,
        world: &WorldSnapshot,
        d: &AgentState,
        t_in: f64,
        log: &mut ReplanLog,
    ) -> Result<Plan, ReplanFailure> {
        let cfg = &self.config;
        let goal = project_goal(&d.p, &world.terminal_goal, cfg.sphere_radius);
        let t_f = t_in + cfg.horizon((goal - d.p).norm());
        log.goal = goal;
        log.t_f = t_f;
        let ops = SplineOperators::new(cfg.num_intervals, t_in, t_f);
        let limits = Limits::from(cfg);

        let clock = Instant::now();
        let mut hulls: Vec<Vec<ObstacleHull>> = vec![Vec::new(); ops.num_intervals];
        for (j, row) in hulls.iter_mut().enumerate() {
            let (a, b) = (t_in + j as f64 * ops.dt, t_in + (j + 1) as f64 * ops.dt);
            for pred in &world.predictions {
                row.push(build_obstacle_hull(pred.as_ref(), j, a, b, cfg.delta, &cfg.agent_half_sides)?);
            }
        }
        log.timings.convex_hulls = clock.elapsed().as_secs_f64();

        let selected = if cfg.alpha_fov > 0.0 && self.mode != PlannerMode::NoPa {
            select_obstacle(
                &world.predictions,
                &d.p,
                &world.terminal_goal,
                cfg.selection_radius,
                cfg.selection_samples,
                t_in,
                t_f,
            )
        } else {
            None
        };
        log.selected_obstacle = selected;
        let target: Option<&dyn ObstaclePrediction> = selected
            .and_then(|id| world.predictions.iter().find(|p| p.id() == id))
            .map(|p| p.as_ref());

        let clock = Instant::now();
        let start = ops.initial_position_points(&d.p, &d.v, &d.a);
        let guess = octopus_search(&OctopusInput {
            ops: &ops,
            start,
            goal,
            hulls: &hulls,
            limits,
            margin: cfg.separation_margin,
            samples_per_axis: cfg.octopus_samples_per_axis,
            node_budget: cfg.octopus_node_budget,
            goal_weight: cfg.octopus_goal_weight,
            jerk_weight: cfg.alpha_j,
        });
        log.timings.position_guess = clock.elapsed().as_secs_f64();
        let guess = guess.map_err(|e| {
            if let GuessError::NoPathFound { nodes } = e {
                log.guess_nodes = nodes;
            }
            e
        })?;
        log.guess_nodes = guess.nodes_generated;
        log.guess_goal_distance = guess.goal_distance;

        let init_angle = ops.initial_angle_points(d.psi, d.psi_dot);
        let mut frozen_angle = vec![init_angle[1]; ops.num_angle_points()];
        frozen_angle[0] = init_angle[0];

        let settings = SolverSettings::from(cfg);
        let mut no_pa = CostWeights::from(cfg);
        no_pa.alpha_fov = 0.0;
        let pa = CostWeights::from(cfg);
        let base = ProblemSpec {
            ops: &ops,
            variables: VariableSet::PositionOnly,
            reference_position: &guess.control_points,
            reference_angle: &frozen_angle,
            weights: no_pa,
            limits,
            camera: &self.camera,
            goal,
            obstacle: None,
            planes: &guess.planes,
            margin: cfg.separation_margin,
            simpson_subintervals: cfg.simpson_subintervals,
        };
        let (position, angle) = match self.mode {
            PlannerMode::NoPa => {
                let clock = Instant::now();
                let problem = NlpProblem::new(ProblemSpec { ..base })?;
                let (pos, _) = run_solve(&problem, &guess.control_points, &frozen_angle, &settings, log)?;
                log.timings.optimization = clock.elapsed().as_secs_f64();
                (pos, frozen_angle)
            }
            PlannerMode::Decoupled => {
                let clock = Instant::now();
                let problem = NlpProblem::new(ProblemSpec { ..base })?;
                let (pos, _) = run_solve(&problem, &guess.control_points, &frozen_angle, &settings, log)?;
                let mut optimization = clock.elapsed().as_secs_f64();
                let clock = Instant::now();
                let angle_guess = self.yaw_guess(&ops, &pos, d, target)?;
                log.timings.psi_guess = clock.elapsed().as_secs_f64();
                let clock = Instant::now();
                let problem = NlpProblem::new(ProblemSpec {
                    variables: VariableSet::AngleOnly,
                    reference_position: &pos,
                    reference_angle: &angle_guess,
                    weights: pa,
                    obstacle: target,
                    ..base
                })?;
                let (_, ang) = run_solve(&problem, &pos, &angle_guess, &settings, log)?;
                optimization += clock.elapsed().as_secs_f64();
                log.timings.optimization = optimization;
                (pos, ang)
            }
            PlannerMode::Coupled => {
                let clock = Instant::now();
                let angle_guess = self.yaw_guess(&ops, &guess.control_points, d, target)?;
                log.timings.psi_guess = clock.elapsed().as_secs_f64();
                let clock = Instant::now();
                let problem = NlpProblem::new(ProblemSpec {
                    variables: VariableSet::Joint,
                    reference_angle: &angle_guess,
                    weights: pa,
                    obstacle: target,
                    ..base
                })?;
                let out = run_solve(&problem, &guess.control_points, &angle_guess, &settings, log)?;
                log.timings.optimization = clock.elapsed().as_secs_f64();
                out
            }
        };

        audit_plan(&AuditInput {
            ops: &ops,
            position: &position,
            angle: Some(&angle),
            planes: &guess.planes,
            hulls: &hulls,
            limits,
            margin: cfg.separation_margin,
        })?;
        Ok(Plan { ops, position, angle })
    }

    fn yaw_guess(
        &self,
        ops: &SplineOperators,
        position: &[Vector3<f64>],
        d: &AgentState,
        target: Option<&dyn ObstaclePrediction>,
    ) -> Result<Vec<f64>, GuessError> {
        let spline = ops.position_spline(position.to_vec());
        let graph = YawGraph::build(&spline, d.psi, target, &self.camera, YawGraphSettings::from(&self.config));
        let path = graph.shortest_path()?;
        let fitted = fit_yaw_spline(ops, &path.samples, d.psi, d.psi_dot)?;
        Ok(project_angle_rates(ops, &fitted, self.config.psi_dot_max))
    }
}

fn run_solve(
    problem: &NlpProblem,
    position: &[Vector3<f64>],
    angle: &[f64],
    settings: &SolverSettings,
    log: &mut ReplanLog,
) -> Result<(Vec<Vector3<f64>>, Vec<f64>), OptimizerError> {
    let fixed = problem.fixed_violation();
    if fixed > crate::optimizer::FEASIBILITY_TOLERANCE {
        return Err(OptimizerError::InfeasibleGuess(fixed));
    }
    let x0: DVector<f64> = problem.pack(position, angle);
    let outcome = solve(problem, &x0, settings)?;
    log.solves.push(outcome.report().clone());
    let x = match &outcome {
        SolveOutcome::Optimized { x, .. } | SolveOutcome::FallbackToGuess { x, .. } => x,
    };
    Ok(problem.unpack(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goal_projection_examples() {
        let g = project_goal(&Vector3::zeros(), &Vector3::new(10.0, 0.0, 0.0), 4.0);
        assert_eq!(g, Vector3::new(4.0, 0.0, 0.0));
        let near = Vector3::new(1.0, 1.0, 1.0);
        assert_eq!(project_goal(&Vector3::zeros(), &near, 4.0), near);
        assert_eq!(project_goal(&near, &near, 4.0), near);
    }

    #[test]
    fn commit_point_on_hover_and_past_end() {
        let s = AgentState::hover(Vector3::new(1.0, 2.0, 3.0), 0.3);
        let c = CommittedTrajectory::hover(&s, 0.0);
        let (d, t) = pick_commit_point(&c, 5.0, 0.1);
        assert!((t - 5.1).abs() < 1e-15);
        assert!(d.max_difference(&s) < 1e-12);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in PlannerMode::ALL {
            assert_eq!(m.name().parse::<PlannerMode>().unwrap(), m);
        }
        assert!("fancy".parse::<PlannerMode>().is_err());
    }
}
