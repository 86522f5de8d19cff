mod support;

use std::sync::Arc;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use pa_planner::config::PlannerConfig;
use pa_planner::geometry::{in_fov_smooth, FlatTrajectory};
use pa_planner::optimizer::simpson_integrate;
use pa_planner::planner::{
    pick_commit_point, project_goal, select_obstacle, selection_score, AgentState, CommittedTrajectory, Planner,
    PlannerMode, ReplanLog, ReplanOutcome, StageTimings, WorldSnapshot,
};
use pa_planner::splines::{clamped_uniform_knots, SplineOperators};
use pa_planner::tracking::{ObstaclePrediction, StaticPrediction};
use support::LinearObstacle;

fn gaussian_obstacle(id: usize, position: Vector3<f64>, sigma: Vector3<f64>) -> Arc<dyn ObstaclePrediction> {
    Arc::new(StaticPrediction { id, position, sigma, half_sides: Vector3::repeat(0.3), valid_until: 100.0 })
}

#[test]
fn commit_point_on_hover_is_the_hover_state() {
    let hover = AgentState::hover(Vector3::new(1.0, -2.0, 1.5), 0.7);
    let committed = CommittedTrajectory::hover(&hover, 3.0);
    for budget in [0.0, 0.05, 0.12, 0.5, 10.0] {
        let (d, t_in) = pick_commit_point(&committed, 3.0, budget);
        assert_eq!(t_in, 3.0 + budget);
        assert!(d.max_difference(&hover) < 1e-12, "{d:?}");
    }
}

/// Splice a unit-speed straight line along x through the origin at `t = 0`.
fn constant_velocity() -> CommittedTrajectory {
    let mut committed = CommittedTrajectory::hover(&AgentState::hover(Vector3::zeros(), 0.0), 0.0);
    let ops = SplineOperators::new(5, 0.0, 5.0);
    let n = ops.num_position_points();
    let knots = clamped_uniform_knots(3, n, 0.0, 5.0);
    // Greville abscissae reproduce a linear function exactly
    let points = (0..n).map(|i| Vector3::new((knots[i + 1] + knots[i + 2] + knots[i + 3]) / 3.0, 0.0, 0.0)).collect();
    committed.splice(ops.position_spline(points), ops.angle_spline(&vec![0.0; ops.num_angle_points()]));
    committed
}

#[test]
fn commit_point_on_constant_velocity() {
    let committed = constant_velocity();
    let (d, t_in) = pick_commit_point(&committed, 0.0, 0.1);
    assert!((t_in - 0.1).abs() < 1e-15);
    assert!((d.p - Vector3::new(0.1, 0.0, 0.0)).amax() < 1e-12, "{:?}", d.p);
    assert!((d.v - Vector3::x()).amax() < 1e-12);
}

#[test]
fn commit_point_past_the_end_hovers() {
    let committed = constant_velocity();
    let end = committed.end_time();
    let (d, _) = pick_commit_point(&committed, end + 1.0, 0.12);
    assert!((d.p - Vector3::new(5.0, 0.0, 0.0)).amax() < 1e-12);
    assert!(d.v.amax() < 1e-12 && d.a.amax() < 1e-12 && d.psi_dot.abs() < 1e-12);
}

#[test]
fn goal_projection_examples() {
    let g = project_goal(&Vector3::zeros(), &Vector3::new(10.0, 0.0, 0.0), 4.0);
    assert!((g - Vector3::new(4.0, 0.0, 0.0)).norm() < 1e-12);
    let near = Vector3::new(1.0, 1.0, 1.0) + Vector3::new(0.0, 2.0, 0.0);
    assert_eq!(project_goal(&Vector3::new(1.0, 1.0, 1.0), &near, 4.0), near);
    let p = Vector3::new(1.0, 2.0, 3.0);
    assert_eq!(project_goal(&p, &p, 4.0), p);
}

#[test]
fn single_obstacle_is_selected() {
    let obs = vec![gaussian_obstacle(7, Vector3::new(30.0, 30.0, 30.0), Vector3::repeat(0.1))];
    let pick = select_obstacle(&obs, &Vector3::zeros(), &Vector3::new(5.0, 0.0, 0.0), 1.0, 10, 0.0, 2.0);
    assert_eq!(pick, Some(7));
    assert_eq!(select_obstacle(&[], &Vector3::zeros(), &Vector3::x(), 1.0, 10, 0.0, 2.0), None);
}

#[test]
fn obstacle_on_the_path_beats_a_distant_one() {
    let p = Vector3::zeros();
    let g = Vector3::new(6.0, 0.0, 0.0);
    let on_path = gaussian_obstacle(4, Vector3::new(3.0, 0.0, 0.0), Vector3::repeat(1e-9));
    let far = gaussian_obstacle(1, Vector3::new(3.0, 100.0, 0.0), Vector3::repeat(0.5));
    let a = selection_score(on_path.as_ref(), &p, &g, 1.0, 10, 0.0, 2.0);
    let b = selection_score(far.as_ref(), &p, &g, 1.0, 10, 0.0, 2.0);
    // samples with |κ_x − 3| ≤ 1: u = 4, 5, 6
    assert!((a - 3.0).abs() < 1e-9, "{a}");
    assert!(b < 1e-12);
    assert_eq!(select_obstacle(&[far.clone(), on_path.clone()], &p, &g, 1.0, 10, 0.0, 2.0), Some(4));
}

#[test]
fn ties_go_to_the_lower_id() {
    let a = gaussian_obstacle(5, Vector3::new(2.0, 0.0, 0.0), Vector3::repeat(0.3));
    let b = gaussian_obstacle(2, Vector3::new(2.0, 0.0, 0.0), Vector3::repeat(0.3));
    let g = Vector3::new(4.0, 0.0, 0.0);
    assert_eq!(select_obstacle(&[a.clone(), b.clone()], &Vector3::zeros(), &g, 1.0, 10, 0.0, 1.0), Some(2));
    assert_eq!(select_obstacle(&[b, a], &Vector3::zeros(), &g, 1.0, 10, 0.0, 1.0), Some(2));
}

/// Monte-Carlo estimate of `Σ_u P(‖X_u − κ(u)‖∞ ≤ R)` with joint draws of `X_u`.
fn monte_carlo_score(
    pred: &dyn ObstaclePrediction,
    p: &Vector3<f64>,
    g: &Vector3<f64>,
    radius: f64,
    samples: usize,
    (t_in, t_f): (f64, f64),
    draws: usize,
    rng: &mut impl Rng,
) -> f64 {
    let std = Normal::new(0.0, 1.0).unwrap();
    (0..=samples)
        .map(|u| {
            let s = u as f64 / samples as f64;
            let kappa = p + (g - p) * s;
            let t = t_in + s * (t_f - t_in);
            let (mean, sigma) = (pred.mean(t), pred.sigma(t));
            let hits = (0..draws)
                .filter(|_| {
                    let x = mean + sigma.component_mul(&Vector3::from_fn(|_, _| std.sample(rng)));
                    (x - kappa).amax() <= radius
                })
                .count();
            hits as f64 / draws as f64
        })
        .sum()
}

#[test]
fn selection_agrees_with_monte_carlo() {
    let mut rng = support::rng(61);
    let seeds = 100;
    let mut agree = 0;
    for _ in 0..seeds {
        let p = Vector3::new(0.0, 0.0, 1.0);
        let g = Vector3::new(rng.gen_range(3.0..6.0), rng.gen_range(-2.0..2.0), 1.0);
        let obstacles: Vec<Arc<dyn ObstaclePrediction>> = (0..3)
            .map(|id| -> Arc<dyn ObstaclePrediction> {
                Arc::new(LinearObstacle {
                    id,
                    start: Vector3::new(rng.gen_range(0.0..6.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0)),
                    velocity: Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0),
                    sigma: Vector3::from_fn(|_, _| rng.gen_range(0.05..1.0)),
                    half_sides: Vector3::repeat(0.3),
                })
            })
            .collect();
        let expected = select_obstacle(&obstacles, &p, &g, 1.0, 10, 0.0, 2.0).unwrap();
        let estimates: Vec<f64> = obstacles
            .iter()
            .map(|o| monte_carlo_score(o.as_ref(), &p, &g, 1.0, 10, (0.0, 2.0), 100_000, &mut rng))
            .collect();
        let best = (0..3).max_by(|&a, &b| estimates[a].total_cmp(&estimates[b])).unwrap();
        agree += usize::from(best == expected);
    }
    assert!(agree * 100 >= 99 * seeds, "{agree} of {seeds} seeds agree");
}

fn empty_log() -> ReplanLog {
    ReplanLog {
        time: 0.0,
        mode: PlannerMode::Coupled,
        t_in: 0.0,
        t_f: 0.0,
        goal: Vector3::zeros(),
        selected_obstacle: None,
        obstacles: 0,
        guess_nodes: 0,
        guess_goal_distance: f64::NAN,
        timings: StageTimings::default(),
        solves: Vec::new(),
        committed_id: None,
        failure: None,
    }
}

#[test]
fn empty_world_reaches_the_goal_in_every_mode() {
    let goal = Vector3::new(3.0, 1.0, 1.5);
    for mode in PlannerMode::ALL {
        let start = AgentState::hover(Vector3::new(0.0, 0.0, 1.0), 0.0);
        let mut planner = Planner::new(PlannerConfig::default(), mode, &start, 0.0).unwrap();
        let world = WorldSnapshot { time: 0.0, predictions: Vec::new(), terminal_goal: goal };
        // one plan moves toward the goal and ends at rest
        let plan = planner.plan(&world, &start, 0.0, &mut empty_log()).unwrap();
        let n = plan.position.len();
        assert!((plan.position[n - 1] - goal).norm() < (start.p - goal).norm());
        assert_eq!(plan.position[n - 1], plan.position[n - 2]);
        assert_eq!(plan.position[n - 2], plan.position[n - 3]);
        assert_eq!(plan.angle[plan.angle.len() - 1], plan.angle[plan.angle.len() - 2]);
        // replanning closes the remaining distance
        for step in 0..60 {
            let world = WorldSnapshot { time: step as f64 * 0.1, ..world.clone() };
            assert!(planner.replan(&world).is_committed(), "{mode}: replan {step} failed");
        }
        let end = planner.committed().state_at(planner.committed().end_time());
        assert!((end.p - goal).norm() < 0.05, "{mode}: ended at {:?}", end.p);
        assert!(end.v.amax() < 1e-9 && end.a.amax() < 1e-9);
    }
}

fn boxes_overlap(a: &Vector3<f64>, ha: &Vector3<f64>, b: &Vector3<f64>, hb: &Vector3<f64>) -> bool {
    (0..3).all(|k| (a[k] - b[k]).abs() < ha[k] + hb[k])
}

#[test]
fn crossing_obstacle_is_avoided_in_closed_loop() {
    let config = PlannerConfig::default();
    let agent_half = config.agent_half_sides;
    for mode in PlannerMode::ALL {
        let obstacle = LinearObstacle {
            id: 0,
            start: Vector3::new(4.0, -3.0, 1.0),
            velocity: Vector3::new(0.0, 1.8, 0.0),
            sigma: Vector3::zeros(),
            half_sides: Vector3::repeat(0.4),
        };
        let start = AgentState::hover(Vector3::new(0.0, 0.0, 1.0), 0.0);
        let mut planner = Planner::new(config.clone(), mode, &start, 0.0).unwrap();
        let goal = Vector3::new(9.0, 0.0, 1.0);
        let period = 0.1;
        let mut committed_count = 0;
        for step in 0..100 {
            let now = step as f64 * period;
            let t_in = now + config.replan_budget;
            let before = planner.committed().state_at(t_in);
            let world = WorldSnapshot { time: now, predictions: vec![Arc::new(obstacle.clone())], terminal_goal: goal };
            let outcome = planner.replan(&world);
            if let ReplanOutcome::Committed { .. } = outcome {
                committed_count += 1;
            }
            let after = planner.committed().state_at(t_in);
            assert!(before.max_difference(&after) < 1e-9, "{mode}: splice jump at {t_in}");
            for k in 0..=40 {
                let t = now + period * k as f64 / 40.0;
                let p = Vector3::from(planner.committed().flat_state_at(t).p);
                assert!(
                    !boxes_overlap(&p, &agent_half, &obstacle.mean(t), &obstacle.half_sides),
                    "{mode}: collision at t = {t}"
                );
            }
        }
        assert!(committed_count > 50, "{mode}: only {committed_count} commits");
        let end = planner.committed().state_at(10.0).p;
        assert!((end - goal).norm() < 0.3, "{mode}: ended at {end:?}");
    }
}

fn fov_integral(traj: &CommittedTrajectory, planner: &Planner, obstacle: &LinearObstacle, t_in: f64, t_f: f64) -> f64 {
    simpson_integrate(
        |t| {
            let s = traj.flat_state(t);
            let w2b = s.world_to_body().unwrap();
            in_fov_smooth(planner.camera(), &w2b, &obstacle.mean(t)).unwrap()
        },
        t_in,
        t_f,
        200,
    )
    .unwrap()
}

#[test]
fn coupled_plan_sees_more_than_no_pa() {
    let mut rng = support::rng(12);
    for case in 0..6 {
        let obstacle = LinearObstacle {
            id: 0,
            start: Vector3::new(rng.gen_range(2.0..4.0), rng.gen_range(-3.0..-2.0), 1.0),
            velocity: Vector3::new(0.0, rng.gen_range(0.5..1.5), 0.0),
            sigma: Vector3::repeat(0.02),
            half_sides: Vector3::repeat(0.3),
        };
        let start = AgentState::hover(Vector3::new(0.0, 0.0, 1.0), rng.gen_range(-0.5..0.5));
        let world = WorldSnapshot {
            time: 0.0,
            predictions: vec![Arc::new(obstacle.clone())],
            terminal_goal: Vector3::new(8.0, 0.0, 1.0),
        };
        let mut integrals = Vec::new();
        for mode in [PlannerMode::NoPa, PlannerMode::Coupled] {
            let planner = Planner::new(PlannerConfig::default(), mode, &start, 0.0).unwrap();
            let plan = planner.plan(&world, &start, 0.0, &mut empty_log()).unwrap();
            let mut traj = CommittedTrajectory::hover(&start, 0.0);
            traj.splice(plan.ops.position_spline(plan.position.clone()), plan.ops.angle_spline(&plan.angle));
            integrals.push(fov_integral(&traj, &planner, &obstacle, plan.ops.t_in, plan.ops.t_f));
        }
        assert!(integrals[1] >= integrals[0], "case {case}: coupled {} < no_pa {}", integrals[1], integrals[0]);
    }
}

proptest! {
    #[test]
    fn projected_goal_stays_in_the_sphere(
        p in prop::array::uniform3(-50.0..50.0f64),
        g in prop::array::uniform3(-50.0..50.0f64),
        r in 0.1..10.0f64,
    ) {
        let (p, g) = (Vector3::from(p), Vector3::from(g));
        let out = project_goal(&p, &g, r);
        prop_assert!((out - p).norm() <= r + 1e-12);
        if (g - p).norm() > r {
            // same direction as the terminal goal
            prop_assert!((out - p).normalize().dot(&(g - p).normalize()) > 1.0 - 1e-12);
        } else {
            prop_assert_eq!(out, g);
        }
    }

    #[test]
    fn selection_ignores_list_order(seed in 0u64..10_000) {
        let mut rng = support::rng(seed);
        let mut obstacles: Vec<Arc<dyn ObstaclePrediction>> = (0..4)
            .map(|id| gaussian_obstacle(
                id,
                Vector3::new(rng.gen_range(0.0..5.0), rng.gen_range(-2.0..2.0), 1.0),
                Vector3::from_fn(|_, _| rng.gen_range(0.05..1.0)),
            ))
            .collect();
        let p = Vector3::new(0.0, 0.0, 1.0);
        let g = Vector3::new(5.0, 0.0, 1.0);
        let first = select_obstacle(&obstacles, &p, &g, 1.0, 20, 0.0, 2.0);
        obstacles.reverse();
        prop_assert_eq!(first, select_obstacle(&obstacles, &p, &g, 1.0, 20, 0.0, 2.0));
        obstacles.swap(0, 2);
        prop_assert_eq!(first, select_obstacle(&obstacles, &p, &g, 1.0, 20, 0.0, 2.0));
    }
}
