//! Independent oracles shared by the integration tests and the acceptance target.
//!
//! Every oracle draws its instances from a seeded ChaCha stream and returns the measured
//! statistic, so callers decide the threshold and how to report it.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use pa_planner::geometry::{body_attitude, CameraModel, GeometryError, SINGULARITY_THRESHOLD};
use pa_planner::guess::{YawGraph, YawGraphNode, YawGraphSettings};
use pa_planner::optimizer::{
    solve, CostWeights, Limits, NlpProblem, ProblemSpec, SolverSettings, VariableSet,
};
use pa_planner::splines::{segment_to_basis, BasisKind, SplineOperators, TrajectorySpline};
use pa_planner::tracking::{assignment_cost, fit_and_predict, hungarian, ObstaclePrediction, Track};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_vec(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.gen_range(lo..hi))
}

/// Obstacle moving on a straight line with a fixed spread.
#[derive(Debug, Clone)]
pub struct LinearObstacle {
    pub id: usize,
    pub start: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub sigma: Vector3<f64>,
    pub half_sides: Vector3<f64>,
}

impl ObstaclePrediction for LinearObstacle {
    fn id(&self) -> usize {
        self.id
    }
    fn mean(&self, t: f64) -> Vector3<f64> {
        self.start + self.velocity * t
    }
    fn velocity(&self, _t: f64) -> Vector3<f64> {
        self.velocity
    }
    fn sigma(&self, _t: f64) -> Vector3<f64> {
        self.sigma
    }
    fn half_sides(&self) -> Vector3<f64> {
        self.half_sides
    }
    fn valid_until(&self) -> f64 {
        f64::INFINITY
    }
}

// ---------------------------------------------------------------------------
// attitude

#[derive(Debug, Clone, Copy, Default)]
pub struct HopfStats {
    pub max_axis_error: f64,
    pub max_norm_error: f64,
    /// Samples near the inverted pose where the error/no-error decision disagrees with
    /// `1 + ξ̄_z < threshold`.
    pub singularity_mismatches: usize,
    pub singular_samples: usize,
}

pub fn hopf_suite(samples: usize, seed: u64) -> HopfStats {
    let mut rng = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut stats = HopfStats::default();
    for _ in 0..samples {
        let dir = Vector3::from_fn(|_, _| normal.sample(&mut rng)).normalize();
        let xi = dir * rng.gen_range(0.1..30.0);
        let psi = rng.gen_range(-PI..PI);
        match body_attitude(&xi, psi) {
            Ok(q) => {
                let z = q.rotate_vector(&Vector3::z());
                stats.max_axis_error = stats.max_axis_error.max((z - xi.normalize()).norm());
                stats.max_norm_error = stats.max_norm_error.max((q.norm() - 1.0).abs());
            }
            Err(_) => stats.singularity_mismatches += usize::from(1.0 + xi.z / xi.norm() >= SINGULARITY_THRESHOLD),
        }
    }
    // directions close to -z, log-uniform in 1 + ξ̄_z
    for _ in 0..samples {
        let c: f64 = 10f64.powf(rng.gen_range(-9.0..-3.0));
        let nz = c - 1.0;
        let r = (1.0 - nz * nz).max(0.0).sqrt();
        let phi = rng.gen_range(-PI..PI);
        let xi = Vector3::new(r * phi.cos(), r * phi.sin(), nz) * rng.gen_range(0.5..20.0);
        let n = xi / (xi.x * xi.x + xi.y * xi.y + xi.z * xi.z).sqrt();
        let expect_singular = 1.0 + n.z < SINGULARITY_THRESHOLD;
        let got = body_attitude(&xi, rng.gen_range(-PI..PI));
        stats.singular_samples += usize::from(expect_singular);
        let got_singular = matches!(got, Err(GeometryError::Singularity(_)));
        if got_singular != expect_singular {
            stats.singularity_mismatches += 1;
        }
    }
    stats
}

// ---------------------------------------------------------------------------
// MINVO hulls

/// Outward distances of `x` to the facets of the simplex `v` (in `D` dimensions, `D + 1`
/// vertices); the maximum is ≤ 0 exactly when `x` lies inside.
fn simplex_outside_distance<const D: usize>(v: &[SVector<f64, D>], x: &SVector<f64, D>) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for skip in 0..=D {
        let face: Vec<&SVector<f64, D>> = v.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, p)| p).collect();
        let normal: SVector<f64, D> = if D == 2 {
            let e = face[1] - face[0];
            SVector::from_fn(|i, _| if i == 0 { -e[1] } else { e[0] })
        } else {
            let (e1, e2) = (face[1] - face[0], face[2] - face[0]);
            let a = Vector3::new(e1[0], e1[1], e1[2]).cross(&Vector3::new(e2[0], e2[1], e2[2]));
            SVector::from_fn(|i, _| a[i])
        };
        let mut n = normal.normalize();
        if n.dot(&(v[skip] - face[0])) > 0.0 {
            n = -n;
        }
        worst = worst.max(n.dot(&(x - face[0])));
    }
    worst
}

fn simplex_volume<const D: usize>(v: &[SVector<f64, D>]) -> f64 {
    let m = DMatrix::from_fn(D, D, |r, c| v[c + 1][r] - v[0][r]);
    let factorial: f64 = (1..=D).map(|k| k as f64).product();
    m.determinant().abs() / factorial
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MinvoStats {
    /// Largest distance of a curve sample outside its MINVO simplex (≤ 0 when inside).
    pub max_outside: f64,
    /// Segments whose MINVO simplex is larger than the Bézier one.
    pub volume_violations: usize,
    pub segments: usize,
}

fn minvo_degree<const D: usize>(segments: usize, points: usize, rng: &mut ChaCha8Rng, stats: &mut MinvoStats) {
    let p = D;
    for _ in 0..segments {
        let ctrl: Vec<SVector<f64, D>> = (0..=p)
            .map(|_| SVector::from_fn(|_, _| rng.gen_range(-5.0..5.0)))
            .collect();
        let t0 = rng.gen_range(-2.0..2.0);
        let spline = TrajectorySpline::<D>::new(p, ctrl, t0, t0 + rng.gen_range(0.2..3.0)).unwrap();
        let mv = segment_to_basis(&spline, 0, BasisKind::Minvo).unwrap().points;
        let bz = segment_to_basis(&spline, 0, BasisKind::Bezier).unwrap().points;
        let (a, b) = (spline.t_in(), spline.t_f());
        for k in 0..points {
            let t = a + (b - a) * k as f64 / (points - 1) as f64;
            let x = spline.evaluate(t, 0).unwrap();
            stats.max_outside = stats.max_outside.max(simplex_outside_distance(&mv, &x));
        }
        if simplex_volume(&mv) > simplex_volume(&bz) * (1.0 + 1e-12) {
            stats.volume_violations += 1;
        }
        stats.segments += 1;
    }
}

/// Random degree-2 (planar) and degree-3 (spatial) segments sampled densely.
pub fn minvo_containment(segments: usize, points: usize, seed: u64) -> MinvoStats {
    let mut rng = rng(seed);
    let mut stats = MinvoStats {
        max_outside: f64::NEG_INFINITY,
        ..Default::default()
    };
    minvo_degree::<2>(segments, points, &mut rng, &mut stats);
    minvo_degree::<3>(segments, points, &mut rng, &mut stats);
    stats
}

// ---------------------------------------------------------------------------
// assignment

fn brute_force_assignment(cost: &DMatrix<f64>) -> f64 {
    let (rows, cols) = cost.shape();
    fn recurse(cost: &DMatrix<f64>, row: usize, used: &mut Vec<bool>, slots: usize, acc: f64, best: &mut f64) {
        let (rows, cols) = cost.shape();
        if slots == 0 || row == rows {
            if slots == 0 {
                *best = best.min(acc);
            }
            return;
        }
        // rows may stay unassigned only while enough rows remain to fill the slots
        if rows - row > slots {
            recurse(cost, row + 1, used, slots, acc, best);
        }
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                recurse(cost, row + 1, used, slots - 1, acc + cost[(row, c)], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    recurse(cost, 0, &mut vec![false; cols], rows.min(cols), 0.0, &mut best);
    best
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssignmentStats {
    pub instances: usize,
    pub mismatches: usize,
    pub max_difference: f64,
}

pub fn hungarian_oracle(instances: usize, max_size: usize, seed: u64) -> AssignmentStats {
    let mut rng = rng(seed);
    let mut stats = AssignmentStats::default();
    for _ in 0..instances {
        let rows = rng.gen_range(1..=max_size);
        let cols = rng.gen_range(1..=max_size);
        let integer = rng.gen_bool(0.3);
        let cost = DMatrix::from_fn(rows, cols, |_, _| {
            if integer {
                rng.gen_range(0..6) as f64
            } else {
                rng.gen_range(0.0..10.0)
            }
        });
        let assignment = hungarian(&cost);
        let mut cols_used = vec![false; cols];
        let mut valid = assignment.len() == rows;
        let mut assigned = 0;
        for c in assignment.iter().flatten() {
            valid &= *c < cols && !cols_used[*c];
            if *c < cols {
                cols_used[*c] = true;
            }
            assigned += 1;
        }
        valid &= assigned == rows.min(cols);
        let diff = (assignment_cost(&cost, &assignment) - brute_force_assignment(&cost)).abs();
        stats.max_difference = stats.max_difference.max(diff);
        if !valid || diff > 1e-9 {
            stats.mismatches += 1;
        }
        stats.instances += 1;
    }
    stats
}

// ---------------------------------------------------------------------------
// yaw graph

pub fn random_yaw_graph(rng: &mut ChaCha8Rng, max_layers: usize, max_samples: usize) -> YawGraph {
    let layers = rng.gen_range(1..=max_layers);
    let samples = rng.gen_range(1..=max_samples);
    let settings = YawGraphSettings {
        c_psi: rng.gen_range(0.0..3.0),
        c_psi_max: rng.gen_range(0.0..20.0),
        c_fov: rng.gen_range(0.0..10.0),
        psi_dot_max: rng.gen_range(0.5..6.0),
        samples,
    };
    let layer_dt = rng.gen_range(0.05..0.5);
    let mut graph = vec![vec![YawGraphNode {
        time: 0.0,
        psi: rng.gen_range(-PI..PI),
        in_fov: rng.gen_range(0.0..1.0),
    }]];
    for k in 1..=layers {
        graph.push(
            (0..samples)
                .map(|i| YawGraphNode {
                    time: k as f64 * layer_dt,
                    psi: -PI + 2.0 * PI * i as f64 / samples as f64,
                    in_fov: rng.gen_range(0.0..1.0),
                })
                .collect(),
        );
    }
    YawGraph {
        layers: graph,
        layer_dt,
        settings,
    }
}

/// Cheapest root-to-leaf cost by enumerating every path.
pub fn enumerate_yaw_paths(graph: &YawGraph) -> f64 {
    fn walk(graph: &YawGraph, layer: usize, node: usize, acc: f64, best: &mut f64) {
        if layer + 1 == graph.layers.len() {
            *best = best.min(acc);
            return;
        }
        let from = &graph.layers[layer][node];
        for (k, to) in graph.layers[layer + 1].iter().enumerate() {
            walk(graph, layer + 1, k, acc + graph.edge_cost(from, to), best);
        }
    }
    let mut best = f64::INFINITY;
    walk(graph, 0, 0, 0.0, &mut best);
    best
}

#[derive(Debug, Clone, Copy, Default)]
pub struct YawGraphStats {
    pub graphs: usize,
    pub mismatches: usize,
    pub max_difference: f64,
}

pub fn yaw_graph_oracle(graphs: usize, seed: u64) -> YawGraphStats {
    let mut rng = rng(seed);
    let mut stats = YawGraphStats::default();
    for _ in 0..graphs {
        let graph = random_yaw_graph(&mut rng, 5, 8);
        let path = graph.shortest_path().unwrap();
        let best = enumerate_yaw_paths(&graph);
        // the reported cost must also be the cost of the reported path
        let walked: f64 = path
            .samples
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let from = graph.layers[l].iter().find(|n| n.psi == w[0].1).unwrap();
                let to = graph.layers[l + 1].iter().find(|n| n.psi == w[1].1).unwrap();
                graph.edge_cost(from, to)
            })
            .sum();
        let diff = (path.cost - best).abs().max((walked - best).abs());
        stats.max_difference = stats.max_difference.max(diff);
        if diff > 1e-9 {
            stats.mismatches += 1;
        }
        stats.graphs += 1;
    }
    stats
}

// ---------------------------------------------------------------------------
// optimizer

/// Clamped uniform knot vector built from scratch.
fn clamped_knots(degree: usize, count: usize, a: f64, b: f64) -> Vec<f64> {
    let intervals = count - degree;
    let mut k = vec![a; degree + 1];
    for i in 1..intervals {
        k.push(a + (b - a) * i as f64 / intervals as f64);
    }
    k.extend(std::iter::repeat(b).take(degree + 1));
    k
}

/// Matrix taking control points of a degree-`p` spline to the control points of its
/// `order`-th derivative.
fn derivative_operator(degree: usize, count: usize, a: f64, b: f64, order: usize) -> DMatrix<f64> {
    let mut knots = clamped_knots(degree, count, a, b);
    let mut op = DMatrix::<f64>::identity(count, count);
    let mut p = degree;
    for _ in 0..order {
        let rows = op.nrows() - 1;
        let d = DMatrix::from_fn(rows, op.nrows(), |i, j| {
            let s = p as f64 / (knots[i + p + 1] - knots[i + 1]);
            if j == i + 1 {
                s
            } else if j == i {
                -s
            } else {
                0.0
            }
        });
        op = d * op;
        knots = knots[1..knots.len() - 1].to_vec();
        p -= 1;
    }
    op
}

/// Minimizer of `Σ w_r (row_r · q − target_r)²` over the free entries of `q`, with
/// `q = E z + f` given by `tied[i] = Some(k)` (entry `i` equals free variable `k`) or
/// `None` (entry fixed at `fixed[i]`).
fn least_squares(rows: &[(Vec<f64>, f64, f64)], tied: &[Option<usize>], fixed: &[f64], free: usize) -> DVector<f64> {
    let mut h = DMatrix::zeros(free, free);
    let mut g = DVector::zeros(free);
    for (row, target, w) in rows {
        let mut coeff = DVector::zeros(free);
        let mut rhs = *target;
        for (i, r) in row.iter().enumerate() {
            match tied[i] {
                Some(k) => coeff[k] += r,
                None => rhs -= r * fixed[i],
            }
        }
        h += &coeff * coeff.transpose() * *w;
        g += &coeff * (rhs * w);
    }
    h.lu().solve(&g).expect("positive definite normal equations")
}

pub struct QpInstance {
    pub ops: SplineOperators,
    pub position: Vec<Vector3<f64>>,
    pub angle: Vec<f64>,
    pub weights: CostWeights,
    pub goal: Vector3<f64>,
}

pub fn random_instance(rng: &mut ChaCha8Rng, alpha_fov: f64) -> QpInstance {
    let intervals = rng.gen_range(3..=8);
    let t_in = rng.gen_range(0.0..5.0);
    let ops = SplineOperators::new(intervals, t_in, t_in + rng.gen_range(0.8..3.0));
    let p = uniform_vec(rng, -3.0, 3.0);
    let v = uniform_vec(rng, -1.5, 1.5);
    let a = uniform_vec(rng, -2.0, 2.0);
    let start = ops.initial_position_points(&p, &v, &a);
    let np1 = ops.num_position_points();
    let mut position = start.to_vec();
    position.resize(np1, start[2]);
    let [psi0, psi1] = ops.initial_angle_points(rng.gen_range(-PI..PI), rng.gen_range(-1.0..1.0));
    let mut angle = vec![psi0, psi1];
    angle.resize(ops.num_angle_points(), psi1);
    QpInstance {
        goal: p + uniform_vec(rng, -3.0, 3.0),
        weights: CostWeights {
            alpha_j: 10f64.powf(rng.gen_range(-3.0..0.0)),
            alpha_psi: 10f64.powf(rng.gen_range(-3.0..0.0)),
            alpha_fov,
            alpha_g: rng.gen_range(1.0..20.0),
            epsilon: rng.gen_range(0.05..0.5),
            gamma_vel: rng.gen_range(0.2..2.0),
        },
        ops,
        position,
        angle,
    }
}

pub fn loose_limits() -> Limits {
    Limits {
        v_max: Vector3::repeat(1e6),
        a_max: Vector3::repeat(1e6),
        j_max: Vector3::repeat(1e6),
        psi_dot_max: 1e6,
    }
}

/// Closed-form optimum of the jerk, ψ̈ and terminal terms for `inst`.
pub fn kkt_optimum(inst: &QpInstance) -> (Vec<Vector3<f64>>, Vec<f64>) {
    let ops = &inst.ops;
    let (a, b) = (ops.t_in, ops.t_f);
    let dt = (b - a) / ops.num_intervals as f64;
    let np1 = ops.num_position_points();
    let na1 = ops.num_angle_points();
    let jerk = derivative_operator(3, np1, a, b, 3);
    let psi_acc = derivative_operator(2, na1, a, b, 2);
    let w = &inst.weights;

    // position: free q_3 ..= q_{n-2}, q_{n-1} = q_n = q_{n-2}
    let free_pos = np1 - 5;
    let tied_pos: Vec<Option<usize>> = (0..np1)
        .map(|i| if i < 3 { None } else { Some((i - 3).min(free_pos - 1)) })
        .collect();
    let mut position = vec![Vector3::zeros(); np1];
    for axis in 0..3 {
        let fixed: Vec<f64> = inst.position.iter().map(|q| q[axis]).collect();
        let mut rows: Vec<(Vec<f64>, f64, f64)> = (0..jerk.nrows())
            .map(|r| (jerk.row(r).iter().copied().collect(), 0.0, w.alpha_j * dt))
            .collect();
        let mut last = vec![0.0; np1];
        last[np1 - 1] = 1.0;
        rows.push((last, inst.goal[axis], w.alpha_g));
        let z = least_squares(&rows, &tied_pos, &fixed, free_pos);
        for i in 0..np1 {
            position[i][axis] = match tied_pos[i] {
                Some(k) => z[k],
                None => fixed[i],
            };
        }
    }

    // ψ: free ψ_2 ..= ψ_{n-1}, ψ_n = ψ_{n-1}
    let free_ang = na1 - 3;
    let tied_ang: Vec<Option<usize>> = (0..na1)
        .map(|i| if i < 2 { None } else { Some((i - 2).min(free_ang - 1)) })
        .collect();
    let rows: Vec<(Vec<f64>, f64, f64)> = (0..psi_acc.nrows())
        .map(|r| (psi_acc.row(r).iter().copied().collect(), 0.0, w.alpha_psi * dt))
        .collect();
    let z = least_squares(&rows, &tied_ang, &inst.angle, free_ang);
    let angle = (0..na1)
        .map(|i| match tied_ang[i] {
            Some(k) => z[k],
            None => inst.angle[i],
        })
        .collect();
    (position, angle)
}

pub fn camera(gamma_sig: f64) -> CameraModel {
    CameraModel::forward_facing(1.0, 60f64.to_radians(), gamma_sig).unwrap()
}

/// Largest control-point difference between `solve` and the KKT optimum over random
/// obstacle-free instances with `α_FOV = 0`.
pub fn kkt_oracle(instances: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let cam = camera(20.0);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let inst = random_instance(&mut rng, 0.0);
        let problem = NlpProblem::new(ProblemSpec {
            ops: &inst.ops,
            variables: VariableSet::Joint,
            reference_position: &inst.position,
            reference_angle: &inst.angle,
            weights: inst.weights,
            limits: loose_limits(),
            camera: &cam,
            goal: inst.goal,
            obstacle: None,
            planes: &[],
            margin: 1e-3,
            simpson_subintervals: 8,
        })
        .unwrap();
        let guess = problem.pack(&inst.position, &inst.angle);
        let settings = SolverSettings {
            max_iterations: 200,
            tolerance: 1e-12,
        };
        let out = solve(&problem, &guess, &settings).unwrap();
        let (pos, ang) = problem.unpack(out.x());
        let (pos_ref, ang_ref) = kkt_optimum(&inst);
        for (q, r) in pos.iter().zip(&pos_ref) {
            worst = worst.max((q - r).amax());
        }
        for (q, r) in ang.iter().zip(&ang_ref) {
            worst = worst.max((q - r).abs());
        }
    }
    worst
}

/// Worst relative error `‖∇f − ∇_FD f‖∞ / ‖∇_FD f‖∞` with central differences over random
/// perception-aware instances.
pub fn gradient_check(instances: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let alpha_fov = rng.gen_range(0.5..10.0);
        let inst = random_instance(&mut rng, alpha_fov);
        let cam = camera(rng.gen_range(5.0..50.0));
        // obstacle a few meters from the start at t_in, drifting
        let velocity = uniform_vec(&mut rng, -1.0, 1.0);
        let at_t_in = inst.position[0] + uniform_vec(&mut rng, 1.0, 4.0) - Vector3::new(0.0, 0.0, 2.0);
        let obstacle = LinearObstacle {
            id: 0,
            start: at_t_in - velocity * inst.ops.t_in,
            velocity,
            sigma: Vector3::repeat(0.1),
            half_sides: Vector3::repeat(0.2),
        };
        let problem = NlpProblem::new(ProblemSpec {
            ops: &inst.ops,
            variables: VariableSet::Joint,
            reference_position: &inst.position,
            reference_angle: &inst.angle,
            weights: inst.weights,
            limits: loose_limits(),
            camera: &cam,
            goal: inst.goal,
            obstacle: Some(&obstacle),
            planes: &[],
            margin: 1e-3,
            simpson_subintervals: 8,
        })
        .unwrap();
        let base = problem.pack(&inst.position, &inst.angle);
        let x = DVector::from_fn(base.len(), |i, _| base[i] + rng.gen_range(-0.3..0.3));
        let grad = problem.cost_gradient(&x).unwrap();
        let h = 1e-5;
        let fd = DVector::from_fn(x.len(), |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (problem.evaluate_cost(&xp) - problem.evaluate_cost(&xm)) / (2.0 * h)
        });
        let err = (&grad - &fd).amax() / fd.amax().max(1e-8);
        worst = worst.max(err);
    }
    worst
}

// ---------------------------------------------------------------------------
// tracking

/// Fraction of fresh observations inside the `delta` prediction interval, per axis, for a
/// quadratic truth observed with Gaussian noise.
pub fn coverage_oracle(repeats: usize, samples: usize, noise: f64, delta: f64, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let gauss = Normal::new(0.0, noise).unwrap();
    let dt = 0.1;
    let (mut hits, mut total) = (0usize, 0usize);
    for _ in 0..repeats {
        let c0 = uniform_vec(&mut rng, -3.0, 3.0);
        let c1 = uniform_vec(&mut rng, -1.0, 1.0);
        let c2 = uniform_vec(&mut rng, -0.5, 0.5);
        let truth = |t: f64| c0 + c1 * t + c2 * t * t;
        let mut track = Track::new(0, samples);
        for k in 0..samples {
            let t = k as f64 * dt;
            let noisy = truth(t) + Vector3::from_fn(|_, _| gauss.sample(&mut rng));
            track.observe(t, noisy, Vector3::repeat(0.2));
        }
        let pred = fit_and_predict(&track, 2, 1.0).unwrap();
        let t_star = (samples as f64 - 1.0) * dt + rng.gen_range(0.0..0.5);
        let fresh = truth(t_star) + Vector3::from_fn(|_, _| gauss.sample(&mut rng));
        let half = pred.interval_half_width(t_star, delta);
        let mean = pred.mean(t_star);
        for a in 0..3 {
            hits += usize::from((fresh[a] - mean[a]).abs() <= half[a]);
            total += 1;
        }
    }
    hits as f64 / total as f64
}
