//! Layered yaw graph over a fixed position spline.
//!
//! Layer 0 holds the current yaw. Layers `1..=|J|` sit at the knot times `t_in + kΔ` and
//! each holds evenly spaced yaw samples in `[-π, π)`. An edge from `ψ_a` to `ψ_b` costs
//! `c_ψ w² + c_Ψmax 1{|w|/Δ > Ψ̇_max} − c_FOV inFOV(ψ_b)` with `w` the wrapped yaw change.
//! Dijkstra runs on the costs shifted by `c_FOV`, which makes every edge non-negative and
//! adds the same constant to every root-to-leaf path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::config::PlannerConfig;
use crate::geometry::{body_attitude, in_fov_smooth, relative_acceleration, CameraModel, Transform};
use crate::splines::PositionSpline;
use crate::tracking::ObstaclePrediction;

use super::{wrap_angle, GuessError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawGraphSettings {
    pub c_psi: f64,
    pub c_psi_max: f64,
    pub c_fov: f64,
    pub psi_dot_max: f64,
    pub samples: usize,
}

impl From<&PlannerConfig> for YawGraphSettings {
    fn from(c: &PlannerConfig) -> Self {
        Self {
            c_psi: c.c_psi,
            c_psi_max: c.c_psi_max,
            c_fov: c.c_fov,
            psi_dot_max: c.psi_dot_max,
            samples: c.yaw_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YawGraphNode {
    pub time: f64,
    pub psi: f64,
    /// Smooth FOV indicator of the obstacle mean at this yaw (0 without an obstacle).
    pub in_fov: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YawGraph {
    pub layers: Vec<Vec<YawGraphNode>>,
    /// Time between consecutive layers.
    pub layer_dt: f64,
    pub settings: YawGraphSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YawPath {
    /// `(t, ψ)` for the root and one node per layer.
    pub samples: Vec<(f64, f64)>,
    /// Unshifted path cost.
    pub cost: f64,
    pub expanded: usize,
}

fn fov_at(
    camera: &CameraModel,
    position: &Vector3<f64>,
    acceleration: &Vector3<f64>,
    psi: f64,
    target: &Vector3<f64>,
) -> f64 {
    let Ok(q) = body_attitude(&relative_acceleration(acceleration), psi) else {
        return 0.0;
    };
    let world_to_body = Transform::new(q, *position).inverse();
    in_fov_smooth(camera, &world_to_body, target).unwrap_or(0.0)
}

impl YawGraph {
    pub fn build(
        position: &PositionSpline,
        psi_in: f64,
        obstacle: Option<&dyn ObstaclePrediction>,
        camera: &CameraModel,
        settings: YawGraphSettings,
    ) -> Self {
        let (t_in, t_f) = (position.t_in(), position.t_f());
        let num_layers = position.num_intervals();
        let layer_dt = (t_f - t_in) / num_layers as f64;
        let node_fov = |t: f64, psi: f64| match obstacle {
            Some(o) => {
                let p = position.evaluate(t, 0).unwrap();
                let a = position.evaluate(t, 2).unwrap();
                fov_at(camera, &p, &a, psi, &o.mean(t))
            }
            None => 0.0,
        };
        let mut layers = vec![vec![YawGraphNode {
            time: t_in,
            psi: psi_in,
            in_fov: node_fov(t_in, psi_in),
        }]];
        let m = settings.samples.max(1);
        for k in 1..=num_layers {
            let t = if k == num_layers { t_f } else { t_in + k as f64 * layer_dt };
            layers.push(
                (0..m)
                    .map(|i| {
                        let psi = -PI + 2.0 * PI * i as f64 / m as f64;
                        YawGraphNode {
                            time: t,
                            psi,
                            in_fov: node_fov(t, psi),
                        }
                    })
                    .collect(),
            );
        }
        Self {
            layers,
            layer_dt,
            settings,
        }
    }

    /// Unshifted cost of the edge `from → to`.
    pub fn edge_cost(&self, from: &YawGraphNode, to: &YawGraphNode) -> f64 {
        let s = &self.settings;
        let w = wrap_angle(to.psi - from.psi);
        let rate_penalty = if w.abs() / self.layer_dt > s.psi_dot_max { s.c_psi_max } else { 0.0 };
        s.c_psi * w * w + rate_penalty - s.c_fov * to.in_fov
    }

    /// Cheapest root-to-last-layer path. Stops as soon as a last-layer node is settled.
    pub fn shortest_path(&self) -> Result<YawPath, GuessError> {
        let last = self.layers.len() - 1;
        if last == 0 {
            let root = &self.layers[0][0];
            return Ok(YawPath {
                samples: vec![(root.time, root.psi)],
                cost: 0.0,
                expanded: 0,
            });
        }
        let shift = self.settings.c_fov;
        let mut dist: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![f64::INFINITY; l.len()]).collect();
        let mut prev: Vec<Vec<usize>> = self.layers.iter().map(|l| vec![usize::MAX; l.len()]).collect();
        let mut settled: Vec<Vec<bool>> = self.layers.iter().map(|l| vec![false; l.len()]).collect();
        dist[0][0] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem(0.0, 0, 0));
        let mut expanded = 0;
        while let Some(HeapItem(d, layer, i)) = heap.pop() {
            if settled[layer][i] {
                continue;
            }
            settled[layer][i] = true;
            expanded += 1;
            if layer == last {
                let mut samples = Vec::with_capacity(last + 1);
                let mut idx = i;
                for l in (0..=last).rev() {
                    let node = &self.layers[l][idx];
                    samples.push((node.time, node.psi));
                    idx = prev[l][idx];
                }
                samples.reverse();
                return Ok(YawPath {
                    samples,
                    cost: d - shift * last as f64,
                    expanded,
                });
            }
            let from = &self.layers[layer][i];
            for (k, to) in self.layers[layer + 1].iter().enumerate() {
                let nd = d + self.edge_cost(from, to) + shift;
                if nd < dist[layer + 1][k] {
                    dist[layer + 1][k] = nd;
                    prev[layer + 1][k] = i;
                    heap.push(HeapItem(nd, layer + 1, k));
                }
            }
        }
        Err(GuessError::NoYawPath)
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then(other.1.cmp(&self.1))
            .then(other.2.cmp(&self.2))
    }
}
