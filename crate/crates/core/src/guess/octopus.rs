//! Best-first search over position control points.
//!
//! The first three control points are fixed by the initial state. Each search level picks
//! the next control point `q_l` by sampling its velocity control point `v_{l-1}` on a
//! per-axis grid. The grid is restricted to the range where the new acceleration and jerk
//! control points respect their limits, so every generated child is dynamically feasible
//! at the control-point level. The last free point is repeated twice for terminal hover.
//! Separating planes for an interval are computed when a node completing that interval is
//! popped from the queue. A candidate whose control point falls in a voxel already
//! occupied at the same level is dropped without counting against the node budget.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use nalgebra::{DMatrix, Vector3};

use crate::corridor::{find_separating_plane, ObstacleHull};
use crate::optimizer::{Limits, PlaneConstraint};
use crate::splines::{segment_conversion_matrix, BasisKind, SplineOperators};

use super::GuessError;

/// Search inputs.
pub struct OctopusInput<'a> {
    pub ops: &'a SplineOperators,
    /// `q_0, q_1, q_2`.
    pub start: [Vector3<f64>; 3],
    pub goal: Vector3<f64>,
    /// Obstacle hulls of every interval (`hulls[j]` for interval `j`).
    pub hulls: &'a [Vec<ObstacleHull>],
    pub limits: Limits,
    pub margin: f64,
    pub samples_per_axis: usize,
    pub node_budget: usize,
    pub goal_weight: f64,
    pub jerk_weight: f64,
}

#[derive(Debug, Clone)]
pub struct PositionGuess {
    pub control_points: Vec<Vector3<f64>>,
    pub planes: Vec<PlaneConstraint>,
    pub nodes_generated: usize,
    /// Distance from the last control point to the goal.
    pub goal_distance: f64,
    /// Goal reached within one grid step.
    pub reached_goal: bool,
}

struct Node {
    parent: usize,
    /// Index `l` of the newest control point.
    level: usize,
    /// `q_{l-3} ..= q_l` (older entries repeat `q_0` near the root).
    window: [Vector3<f64>; 4],
    v: Vector3<f64>,
    a: Vector3<f64>,
    jerk_cost: f64,
    planes: Vec<PlaneConstraint>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on priority, then on insertion order
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Narrow `[lo, hi]` to the values of `x` with `|alpha x + beta| ≤ bound`.
fn restrict(range: (f64, f64), alpha: f64, beta: f64, bound: f64) -> (f64, f64) {
    let (a, b) = ((-bound - beta) / alpha, (bound - beta) / alpha);
    let (a, b) = if alpha > 0.0 { (a, b) } else { (b, a) };
    (range.0.max(a), range.1.min(b))
}

fn grid(lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    if hi - lo <= 1e-9 * (1.0 + hi.abs()) {
        return vec![0.5 * (lo + hi)];
    }
    (0..samples)
        .map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64)
        .collect()
}

struct Search<'a> {
    input: &'a OctopusInput<'a>,
    knots: &'a [f64],
    pos_minvo: Vec<DMatrix<f64>>,
    vel_minvo: Vec<DMatrix<f64>>,
    last_free: usize,
}

impl Search<'_> {
    fn velocity_between(&self, i: usize, qi: &Vector3<f64>, qn: &Vector3<f64>) -> Vector3<f64> {
        (qn - qi) * (3.0 / (self.knots[i + 4] - self.knots[i + 1]))
    }

    /// MINVO velocity points of interval `j` from `q_j ..= q_{j+3}` inside the limits.
    fn velocity_ok(&self, j: usize, q: &[Vector3<f64>; 4]) -> bool {
        let v = [
            self.velocity_between(j, &q[0], &q[1]),
            self.velocity_between(j + 1, &q[1], &q[2]),
            self.velocity_between(j + 2, &q[2], &q[3]),
        ];
        let m = &self.vel_minvo[j];
        (0..3).all(|r| {
            let p = v[0] * m[(r, 0)] + v[1] * m[(r, 1)] + v[2] * m[(r, 2)];
            (0..3).all(|a| p[a].abs() <= self.input.limits.v_max[a] + 1e-9)
        })
    }

    fn planes_for(&self, j: usize, q: &[Vector3<f64>; 4]) -> Option<Vec<PlaneConstraint>> {
        let m = &self.pos_minvo[j];
        let agent: Vec<Vector3<f64>> = (0..4)
            .map(|r| (0..4).fold(Vector3::zeros(), |acc, k| acc + q[k] * m[(r, k)]))
            .collect();
        let mut out = Vec::new();
        for hull in &self.input.hulls[j] {
            let plane = find_separating_plane(&agent, hull.vertices(), self.input.margin).ok()?;
            out.push(PlaneConstraint {
                interval: j,
                obstacle: hull.obstacle,
                plane,
            });
        }
        Some(out)
    }

    /// Velocity range for `v_{l-1}` on one axis given `v_{l-2}` and `a_{l-3}`.
    fn axis_range(&self, l: usize, axis: usize, v_prev: f64, a_prev: f64, terminal: bool) -> (f64, f64) {
        let k = self.knots;
        let lim = &self.input.limits;
        let mut r = (-lim.v_max[axis], lim.v_max[axis]);
        // a_{l-2} = 2 (v_{l-1} - v_{l-2}) / (t_{l+2} - t_l)
        let d0 = k[l + 2] - k[l];
        r = restrict(r, 2.0 / d0, -2.0 * v_prev / d0, lim.a_max[axis]);
        // j_{l-3} = (a_{l-2} - a_{l-3}) / (t_{l+1} - t_l)
        let dj = k[l + 1] - k[l];
        r = restrict(r, 2.0 / (d0 * dj), (-2.0 * v_prev / d0 - a_prev) / dj, lim.j_max[axis]);
        if terminal {
            // hover copies give v_l = v_{l+1} = 0, so a_{l-1} = -2 v_{l-1} / (t_{l+3} - t_{l+1})
            let d1 = k[l + 3] - k[l + 1];
            r = restrict(r, -2.0 / d1, 0.0, lim.a_max[axis]);
            // j_{l-1} = (0 - a_{l-1}) / (t_{l+3} - t_{l+2})
            let d3 = k[l + 3] - k[l + 2];
            r = restrict(r, 2.0 / (d1 * d3), 0.0, lim.j_max[axis]);
            // j_{l-2} = (a_{l-1} - a_{l-2}) / (t_{l+2} - t_{l+1})
            let d2 = k[l + 2] - k[l + 1];
            r = restrict(r, (-2.0 / d1 - 2.0 / d0) / d2, 2.0 * v_prev / (d0 * d2), lim.j_max[axis]);
        }
        r
    }
}

pub fn octopus_search(input: &OctopusInput<'_>) -> Result<PositionGuess, GuessError> {
    let ops = input.ops;
    let knots = &ops.position_knots;
    let np1 = ops.num_position_points();
    let pos = ops.position_spline(vec![Vector3::zeros(); np1]);
    let vel = pos.derivative().unwrap();
    let search = Search {
        input,
        knots,
        pos_minvo: (0..ops.num_intervals)
            .map(|j| segment_conversion_matrix(&pos, j, BasisKind::Minvo).unwrap())
            .collect(),
        vel_minvo: (0..ops.num_intervals)
            .map(|j| segment_conversion_matrix(&vel, j, BasisKind::Minvo).unwrap())
            .collect(),
        last_free: np1 - 3,
    };
    let [q0, q1, q2] = input.start;
    let v1 = search.velocity_between(1, &q1, &q2);
    let v0 = search.velocity_between(0, &q0, &q1);
    let a0 = (v1 - v0) * (2.0 / (knots[4] - knots[2]));
    let mut nodes = vec![Node {
        parent: usize::MAX,
        level: 2,
        window: [q0, q0, q1, q2],
        v: v1,
        a: a0,
        jerk_cost: 0.0,
        planes: Vec::new(),
    }];
    let mut heap = BinaryHeap::new();
    heap.push(Entry(0.0, 0));
    let mut generated = 1;
    let samples = input.samples_per_axis.max(2);
    let mut grid_step: f64 = 0.0;
    let mut occupied: HashSet<(usize, [i64; 3])> = HashSet::new();

    while let Some(Entry(_, idx)) = heap.pop() {
        let level = nodes[idx].level;
        if level >= 3 {
            // interval level-3 is complete: planes
            let j = level - 3;
            let window = nodes[idx].window;
            let Some(mut planes) = search.planes_for(j, &window) else {
                continue;
            };
            if level == search.last_free {
                let q = window[3];
                let mut ok = true;
                for (jj, w) in [(j + 1, [window[1], window[2], q, q]), (j + 2, [window[2], q, q, q])] {
                    if !search.velocity_ok(jj, &w) {
                        ok = false;
                        break;
                    }
                    match search.planes_for(jj, &w) {
                        Some(p) => planes.extend(p),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                nodes[idx].planes = planes;
                return Ok(finish(&nodes, idx, input, generated, grid_step));
            }
            nodes[idx].planes = planes;
        }
        if generated >= input.node_budget {
            continue;
        }
        // expand: choose q_{level+1} through v_{level}
        let l = level + 1;
        let terminal = l == search.last_free;
        let (v_prev, a_prev) = (nodes[idx].v, nodes[idx].a);
        let ranges: Vec<(f64, f64)> = (0..3)
            .map(|a| search.axis_range(l, a, v_prev[a], a_prev[a], terminal))
            .collect();
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            continue;
        }
        let axes: Vec<Vec<f64>> = ranges.iter().map(|(lo, hi)| grid(*lo, *hi, samples)).collect();
        let scale = (knots[l + 3] - knots[l]) / 3.0;
        let voxel = (0..3)
            .map(|a| input.limits.v_max[a] * scale / (samples - 1) as f64)
            .fold(f64::INFINITY, f64::min);
        if terminal {
            grid_step = ranges
                .iter()
                .map(|(lo, hi)| (hi - lo) / (samples - 1) as f64 * scale)
                .fold(grid_step, f64::max);
        }
        let parent_window = nodes[idx].window;
        let q_last = parent_window[3];
        for &vx in &axes[0] {
            for &vy in &axes[1] {
                for &vz in &axes[2] {
                    if generated >= input.node_budget {
                        break;
                    }
                    let v = Vector3::new(vx, vy, vz);
                    let q = q_last + v * scale;
                    let window = [parent_window[1], parent_window[2], parent_window[3], q];
                    if l >= 3 && !search.velocity_ok(l - 3, &window) {
                        continue;
                    }
                    let cell = [0, 1, 2].map(|a| (q[a] / voxel).floor() as i64);
                    if !occupied.insert((l, cell)) {
                        continue;
                    }
                    let a = (v - v_prev) * (2.0 / (knots[l + 2] - knots[l]));
                    let jerk = (a - a_prev) / (knots[l + 1] - knots[l]);
                    let jerk_cost = nodes[idx].jerk_cost + jerk.norm_squared() * ops.dt;
                    let priority = input.jerk_weight * jerk_cost + input.goal_weight * (q - input.goal).norm();
                    nodes.push(Node {
                        parent: idx,
                        level: l,
                        window,
                        v,
                        a,
                        jerk_cost,
                        planes: Vec::new(),
                    });
                    heap.push(Entry(priority, nodes.len() - 1));
                    generated += 1;
                }
            }
        }
    }
    Err(GuessError::NoPathFound { nodes: generated })
}

fn finish(nodes: &[Node], leaf: usize, input: &OctopusInput<'_>, generated: usize, grid_step: f64) -> PositionGuess {
    let mut chain = Vec::new();
    let mut planes = Vec::new();
    let mut idx = leaf;
    while idx != usize::MAX {
        chain.push(nodes[idx].window[3]);
        planes.extend(nodes[idx].planes.iter().copied());
        idx = nodes[idx].parent;
    }
    chain.reverse();
    // chain holds q_2 ..= q_{n-2}
    let mut pts = vec![input.start[0], input.start[1]];
    pts.extend(chain);
    let last = *pts.last().unwrap();
    pts.push(last);
    pts.push(last);
    planes.sort_by_key(|p| (p.interval, p.obstacle));
    let goal_distance = (last - input.goal).norm();
    PositionGuess {
        control_points: pts,
        planes,
        nodes_generated: generated,
        goal_distance,
        reached_goal: goal_distance <= grid_step * 3f64.sqrt() + 1e-9,
    }
}
