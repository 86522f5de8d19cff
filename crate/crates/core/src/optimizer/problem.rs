//! The trajectory NLP: decision layout, cost, gradient and linear constraints.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::ad::{Dual, Real};
use crate::corridor::SeparatingPlane;
use crate::geometry::{CameraModel, FlatState};
use crate::splines::SplineOperators;
use crate::tracking::ObstaclePrediction;

use super::{perception_reward, simpson_weights, CostWeights, Limits, OptimizerError};

/// Which control points are decision variables; the rest stay at their reference values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VariableSet {
    Joint,
    PositionOnly,
    AngleOnly,
}

impl VariableSet {
    fn position(self) -> bool {
        matches!(self, Self::Joint | Self::PositionOnly)
    }
    fn angle(self) -> bool {
        matches!(self, Self::Joint | Self::AngleOnly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneConstraint {
    pub interval: usize,
    pub obstacle: usize,
    pub plane: SeparatingPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintKind {
    Velocity,
    Acceleration,
    Jerk,
    AngleRate,
    Plane,
}

/// Everything needed to assemble an [`NlpProblem`].
pub struct ProblemSpec<'a> {
    pub ops: &'a SplineOperators,
    pub variables: VariableSet,
    /// Full position control points; supply the fixed and frozen entries.
    pub reference_position: &'a [Vector3<f64>],
    /// Full ψ control points; supply the fixed and frozen entries.
    pub reference_angle: &'a [f64],
    pub weights: CostWeights,
    pub limits: Limits,
    pub camera: &'a CameraModel,
    pub goal: Vector3<f64>,
    /// Obstacle entering the perception term, if any.
    pub obstacle: Option<&'a dyn ObstaclePrediction>,
    pub planes: &'a [PlaneConstraint],
    pub margin: f64,
    /// Even number of Simpson subintervals per knot interval.
    pub simpson_subintervals: usize,
}

/// Unweighted cost terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostTerms {
    /// `∫ ‖j‖² dt`.
    pub jerk: f64,
    /// `∫ ψ̈² dt`.
    pub angle: f64,
    /// `∫ inFOV / (ε + γ‖ṡ‖²) dt` (`None` at a singular attitude).
    pub reward: Option<f64>,
    /// `‖p(t_f) − g‖²`.
    pub terminal: f64,
}

const LOCAL: usize = 14;

/// A Simpson node of the perception integral. The local flat state
/// `(p, v, a, j, ψ, ψ̇)` is `consts + rows · x`.
#[derive(Debug, Clone)]
struct RewardNode {
    weight: f64,
    obstacle_p: [f64; 3],
    obstacle_v: [f64; 3],
    rows: DMatrix<f64>,
    consts: [f64; LOCAL],
}

#[derive(Debug, Clone)]
pub struct NlpProblem {
    ops: SplineOperators,
    variables: VariableSet,
    num_vars: usize,
    /// Full vector `[Q_0, …, Q_n (xyz), Ψ_0, …, Ψ_n]` equals `expansion · x + offset`.
    expansion: DMatrix<f64>,
    offset: DVector<f64>,
    weights: CostWeights,
    camera: CameraModel,
    goal: Vector3<f64>,
    quad_h: DMatrix<f64>,
    quad_g: DVector<f64>,
    nodes: Vec<RewardNode>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    kinds: Vec<ConstraintKind>,
    /// Largest violation among constraints that involve no decision variable.
    fixed_violation: f64,
}

impl NlpProblem {
    pub fn new(spec: ProblemSpec<'_>) -> Result<Self, OptimizerError> {
        let ops = spec.ops;
        let np1 = ops.num_position_points();
        let na1 = ops.num_angle_points();
        assert_eq!(spec.reference_position.len(), np1);
        assert_eq!(spec.reference_angle.len(), na1);
        let full_len = 3 * np1 + na1;
        let angle_index = |l: usize| 3 * np1 + l;

        // decision layout
        let free_pos = np1 - 5; // q_3 ..= q_{n-2}
        let free_ang = na1 - 3; // ψ_2 ..= ψ_{n-1}
        let n_pos = if spec.variables.position() { 3 * free_pos } else { 0 };
        let n_ang = if spec.variables.angle() { free_ang } else { 0 };
        let num_vars = n_pos + n_ang;
        let mut expansion = DMatrix::zeros(full_len, num_vars);
        let mut offset = DVector::zeros(full_len);
        for l in 0..np1 {
            let k = l.min(np1 - 3); // terminal points repeat q_{n-2}
            for a in 0..3 {
                if spec.variables.position() && (3..np1 - 2).contains(&k) {
                    expansion[(3 * l + a, 3 * (k - 3) + a)] = 1.0;
                } else {
                    offset[3 * l + a] = spec.reference_position[l][a];
                }
            }
        }
        for l in 0..na1 {
            let k = l.min(na1 - 2);
            if spec.variables.angle() && (2..na1 - 1).contains(&k) {
                expansion[(angle_index(l), n_pos + k - 2)] = 1.0;
            } else {
                offset[angle_index(l)] = spec.reference_angle[l];
            }
        }

        let to_vars = |row: &DVector<f64>| -> (DVector<f64>, f64) {
            ((row.transpose() * &expansion).transpose(), row.dot(&offset))
        };

        // quadratic part: Σ w (r·full − target)²
        let w = spec.weights;
        let mut quad_h = DMatrix::zeros(num_vars, num_vars);
        let mut quad_g = DVector::zeros(num_vars);
        let mut add_square = |row: &DVector<f64>, target: f64, weight: f64| {
            if weight == 0.0 {
                return;
            }
            let (rx, c) = to_vars(row);
            let c = c - target;
            quad_h += &rx * rx.transpose() * (2.0 * weight);
            quad_g += &rx * (2.0 * weight * c);
        };
        for i in 0..ops.jerk.nrows() {
            for a in 0..3 {
                let mut row = DVector::zeros(full_len);
                for l in 0..np1 {
                    row[3 * l + a] = ops.jerk[(i, l)];
                }
                add_square(&row, 0.0, w.alpha_j * ops.dt);
            }
        }
        for i in 0..ops.angle_accel.nrows() {
            let mut row = DVector::zeros(full_len);
            for l in 0..na1 {
                row[angle_index(l)] = ops.angle_accel[(i, l)];
            }
            add_square(&row, 0.0, w.alpha_psi * ops.dt);
        }
        for a in 0..3 {
            let mut row = DVector::zeros(full_len);
            row[3 * (np1 - 1) + a] = 1.0;
            add_square(&row, spec.goal[a], w.alpha_g);
        }

        // perception nodes
        let mut nodes = Vec::new();
        if let (Some(obstacle), true) = (spec.obstacle, w.alpha_fov > 0.0) {
            let n_s = spec.simpson_subintervals;
            let sw = simpson_weights(n_s)?;
            let pos = ops.position_spline(spec.reference_position.to_vec());
            let ang = ops.angle_spline(spec.reference_angle);
            for j in 0..ops.num_intervals {
                let t_a = ops.t_in + j as f64 * ops.dt;
                let h = ops.dt / n_s as f64;
                for (k, wk) in sw.iter().enumerate() {
                    let t = t_a + k as f64 * h;
                    let mut full_rows = DMatrix::zeros(LOCAL, full_len);
                    for order in 0..4 {
                        for (l, c) in pos.basis_row(j, t, order) {
                            for a in 0..3 {
                                full_rows[(3 * order + a, 3 * l + a)] = c;
                            }
                        }
                    }
                    for order in 0..2 {
                        for (l, c) in ang.basis_row(j, t, order) {
                            full_rows[(12 + order, angle_index(l))] = c;
                        }
                    }
                    let rows = &full_rows * &expansion;
                    let c = &full_rows * &offset;
                    let op = obstacle.mean(t);
                    let ov = obstacle.velocity(t);
                    nodes.push(RewardNode {
                        weight: wk * h,
                        obstacle_p: [op.x, op.y, op.z],
                        obstacle_v: [ov.x, ov.y, ov.z],
                        rows,
                        consts: std::array::from_fn(|i| c[i]),
                    });
                }
            }
        }

        // linear constraints, r·full ≤ ub
        let mut rows: Vec<(DVector<f64>, f64, ConstraintKind)> = Vec::new();
        let lim = spec.limits;
        let mut push_bounds = |m: &DMatrix<f64>, r: usize, axis: usize, bound: f64, kind: ConstraintKind| {
            let mut row = DVector::zeros(full_len);
            for l in 0..np1 {
                row[3 * l + axis] = m[(r, l)];
            }
            rows.push((row.clone(), bound, kind));
            rows.push((-row, bound, kind));
        };
        for j in 0..ops.num_intervals {
            for r in 0..3 {
                for a in 0..3 {
                    push_bounds(&ops.velocity_minvo[j], r, a, lim.v_max[a], ConstraintKind::Velocity);
                }
            }
        }
        for r in 0..ops.acceleration.nrows() {
            for a in 0..3 {
                push_bounds(&ops.acceleration, r, a, lim.a_max[a], ConstraintKind::Acceleration);
            }
        }
        for r in 0..ops.jerk.nrows() {
            for a in 0..3 {
                push_bounds(&ops.jerk, r, a, lim.j_max[a], ConstraintKind::Jerk);
            }
        }
        for r in 0..ops.angle_rate.nrows() {
            let mut row = DVector::zeros(full_len);
            for l in 0..na1 {
                row[angle_index(l)] = ops.angle_rate[(r, l)];
            }
            rows.push((row.clone(), lim.psi_dot_max, ConstraintKind::AngleRate));
            rows.push((-row, lim.psi_dot_max, ConstraintKind::AngleRate));
        }
        for pc in spec.planes {
            let m = &ops.position_minvo[pc.interval];
            for r in 0..4 {
                let mut row = DVector::zeros(full_len);
                for l in 0..np1 {
                    for a in 0..3 {
                        row[3 * l + a] = pc.plane.normal[a] * m[(r, l)];
                    }
                }
                rows.push((row, -spec.margin - pc.plane.offset, ConstraintKind::Plane));
            }
        }
        let mut a_rows = Vec::new();
        let mut b = Vec::new();
        let mut kinds = Vec::new();
        let mut fixed_violation: f64 = 0.0;
        for (row, ub, kind) in rows {
            let (rx, c) = to_vars(&row);
            if rx.amax() < 1e-12 {
                fixed_violation = fixed_violation.max(c - ub);
            } else {
                a_rows.push(rx.transpose());
                b.push(ub - c);
                kinds.push(kind);
            }
        }
        let a = if a_rows.is_empty() {
            DMatrix::zeros(0, num_vars)
        } else {
            DMatrix::from_rows(&a_rows)
        };
        Ok(Self {
            ops: ops.clone(),
            variables: spec.variables,
            num_vars,
            expansion,
            offset,
            weights: w,
            camera: spec.camera.clone(),
            goal: spec.goal,
            quad_h,
            quad_g,
            nodes,
            a,
            b: DVector::from_vec(b),
            kinds,
            fixed_violation,
        })
    }

    pub fn num_variables(&self) -> usize {
        self.num_vars
    }

    pub fn variables(&self) -> VariableSet {
        self.variables
    }

    pub fn operators(&self) -> &SplineOperators {
        &self.ops
    }

    /// Constraint matrix and bounds, `A x ≤ b`.
    pub fn constraints(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.a, &self.b)
    }

    pub fn constraint_kinds(&self) -> &[ConstraintKind] {
        &self.kinds
    }

    /// Hessian of the quadratic cost terms (jerk, ψ̈ and terminal).
    pub fn quadratic_hessian(&self) -> &DMatrix<f64> {
        &self.quad_h
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    /// Decision vector holding the free entries of full control-point lists.
    pub fn pack(&self, position: &[Vector3<f64>], angle: &[f64]) -> DVector<f64> {
        let mut x = DVector::zeros(self.num_vars);
        let np1 = self.ops.num_position_points();
        let mut k = 0;
        if self.variables.position() {
            for q in &position[3..np1 - 2] {
                for a in 0..3 {
                    x[k] = q[a];
                    k += 1;
                }
            }
        }
        if self.variables.angle() {
            for v in &angle[2..self.ops.num_angle_points() - 1] {
                x[k] = *v;
                k += 1;
            }
        }
        x
    }

    /// Full position and ψ control points for a decision vector.
    pub fn unpack(&self, x: &DVector<f64>) -> (Vec<Vector3<f64>>, Vec<f64>) {
        let full = &self.expansion * x + &self.offset;
        let np1 = self.ops.num_position_points();
        let pos = (0..np1)
            .map(|l| Vector3::new(full[3 * l], full[3 * l + 1], full[3 * l + 2]))
            .collect();
        let ang = (0..self.ops.num_angle_points()).map(|l| full[3 * np1 + l]).collect();
        (pos, ang)
    }

    fn local_state(node: &RewardNode, x: &DVector<f64>) -> [f64; LOCAL] {
        let y = &node.rows * x;
        std::array::from_fn(|i| node.consts[i] + y[i])
    }

    fn flat_state<S: Real>(y: &[S; LOCAL]) -> FlatState<S> {
        FlatState {
            p: [y[0], y[1], y[2]],
            v: [y[3], y[4], y[5]],
            a: [y[6], y[7], y[8]],
            j: [y[9], y[10], y[11]],
            psi: y[12],
            psi_dot: y[13],
        }
    }

    pub fn cost_terms(&self, x: &DVector<f64>) -> CostTerms {
        let (pos, ang) = self.unpack(x);
        let ops = &self.ops;
        let jerk = (0..ops.jerk.nrows())
            .map(|i| SplineOperators::apply_row(&ops.jerk, i, &pos).norm_squared())
            .sum::<f64>()
            * ops.dt;
        let angle = (0..ops.angle_accel.nrows())
            .map(|i| SplineOperators::apply_row_scalar(&ops.angle_accel, i, &ang).powi(2))
            .sum::<f64>()
            * ops.dt;
        let terminal = (pos.last().unwrap() - self.goal).norm_squared();
        let mut reward = Some(0.0);
        for node in &self.nodes {
            let y = Self::local_state(node, x);
            match perception_reward(
                &self.camera,
                self.weights.epsilon,
                self.weights.gamma_vel,
                &Self::flat_state(&y),
                node.obstacle_p,
                node.obstacle_v,
            ) {
                Ok(r) => reward = reward.map(|acc| acc + node.weight * r),
                Err(_) => {
                    reward = None;
                    break;
                }
            }
        }
        CostTerms {
            jerk,
            angle,
            reward,
            terminal,
        }
    }

    /// Weighted cost; `+∞` at a singular attitude.
    pub fn evaluate_cost(&self, x: &DVector<f64>) -> f64 {
        let t = self.cost_terms(x);
        let Some(reward) = t.reward else {
            return f64::INFINITY;
        };
        let w = &self.weights;
        w.alpha_j * t.jerk + w.alpha_psi * t.angle - w.alpha_fov * reward + w.alpha_g * t.terminal
    }

    pub fn cost_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, OptimizerError> {
        let mut grad = &self.quad_h * x + &self.quad_g;
        for node in &self.nodes {
            let y = Self::local_state(node, x);
            let yd: [Dual<LOCAL>; LOCAL] = std::array::from_fn(|i| Dual::variable(y[i], i));
            let op = node.obstacle_p;
            let ov = node.obstacle_v;
            let r = perception_reward(
                &self.camera,
                self.weights.epsilon,
                self.weights.gamma_vel,
                &Self::flat_state(&yd),
                op,
                ov,
            )
            .map_err(|_| OptimizerError::SingularAttitude)?;
            let scale = -self.weights.alpha_fov * node.weight;
            for (i, dr) in r.eps.iter().enumerate() {
                if *dr != 0.0 {
                    let coef = scale * dr;
                    for k in 0..self.num_vars {
                        grad[k] += coef * node.rows[(i, k)];
                    }
                }
            }
        }
        Ok(grad)
    }

    /// Largest constraint violation `max(A x − b, fixed rows)`, never negative.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst = self.fixed_violation.max(0.0);
        if self.a.nrows() > 0 {
            let s = &self.a * x - &self.b;
            worst = worst.max(s.max());
        }
        worst
    }

    /// Violation of the constraints that no decision variable can change.
    pub fn fixed_violation(&self) -> f64 {
        self.fixed_violation.max(0.0)
    }
}
