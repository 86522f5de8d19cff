//! Obstacle tracking from point clouds.
//!
//! Each snapshot is split into Euclidean clusters, clusters are matched to existing tracks
//! with a minimum-cost assignment on the distance to each track's predicted position, and
//! every track's sliding window is fit with per-axis polynomials whose prediction
//! intervals give the Gaussian spread used to inflate obstacle hulls.

mod hungarian;
mod kdtree;
mod predict;

pub use hungarian::{assignment_cost, hungarian};
pub use kdtree::KdTree;
pub use predict::{fit_and_predict, norminv, ObstaclePrediction, PredictedTrajectory, StaticPrediction, MAX_CONDITION};

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, Vector3};

use crate::config::PlannerConfig;

#[derive(Debug, thiserror::Error)]
pub enum TrackingError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("need {needed} observations for the fit, have {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("normal equations are ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("probability {0} outside (0, 1)")]
    OutOfRange(f64),
    #[error("snapshot time {t} does not follow previous time {previous}")]
    NonIncreasingTimestamp { t: f64, previous: f64 },
    #[error("snapshot file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudSnapshot {
    pub timestamp: f64,
    pub points: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub centroid: Vector3<f64>,
    pub count: usize,
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
    /// Indices into the snapshot's point list.
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn half_sides(&self) -> Vector3<f64> {
        (self.max - self.min) * 0.5
    }
}

/// Euclidean clustering: connected components of the graph linking points closer than
/// `tolerance`. Clusters are ordered by their smallest member index.
pub fn cluster(snapshot: &PointCloudSnapshot, tolerance: f64) -> Result<Vec<Cluster>, TrackingError> {
    let pts = &snapshot.points;
    if pts.is_empty() {
        return Err(TrackingError::EmptyCloud);
    }
    let tree = KdTree::build(pts);
    let mut label = vec![usize::MAX; pts.len()];
    let mut clusters = Vec::new();
    for seed in 0..pts.len() {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        label[seed] = id;
        let mut members = vec![seed];
        let mut head = 0;
        while head < members.len() {
            let cur = members[head];
            head += 1;
            for nb in tree.within(&pts[cur], tolerance) {
                if label[nb] == usize::MAX {
                    label[nb] = id;
                    members.push(nb);
                }
            }
        }
        members.sort_unstable();
        let mut min = Vector3::repeat(f64::INFINITY);
        let mut max = Vector3::repeat(f64::NEG_INFINITY);
        let mut sum = Vector3::zeros();
        for &m in &members {
            sum += pts[m];
            min = min.inf(&pts[m]);
            max = max.sup(&pts[m]);
        }
        clusters.push(Cluster {
            centroid: sum / members.len() as f64,
            count: members.len(),
            min,
            max,
            members,
        });
    }
    Ok(clusters)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(cluster index, track index)` pairs.
    pub matches: Vec<(usize, usize)>,
    /// Clusters that start new tracks.
    pub new_tracks: Vec<usize>,
}

/// Match cluster centroids to predicted track positions. Matches farther apart than
/// `threshold` are broken and their clusters become new tracks.
pub fn assign(centroids: &[Vector3<f64>], predicted: &[Vector3<f64>], threshold: f64) -> Assignment {
    let cost = DMatrix::from_fn(centroids.len(), predicted.len(), |c, t| (centroids[c] - predicted[t]).norm());
    let mut out = Assignment::default();
    for (c, t) in hungarian(&cost).into_iter().enumerate() {
        match t {
            Some(t) if cost[(c, t)] <= threshold => out.matches.push((c, t)),
            _ => out.new_tracks.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    id: usize,
    window: VecDeque<(f64, Vector3<f64>)>,
    capacity: usize,
    half_sides: Vector3<f64>,
    missed: usize,
}

impl Track {
    pub fn new(id: usize, capacity: usize) -> Self {
        Self {
            id,
            window: VecDeque::with_capacity(capacity),
            capacity,
            half_sides: Vector3::zeros(),
            missed: 0,
        }
    }

    /// Append an observation, dropping the oldest beyond the window length.
    pub fn observe(&mut self, t: f64, centroid: Vector3<f64>, half_sides: Vector3<f64>) {
        self.window.push_back((t, centroid));
        while self.window.len() > self.capacity {
            self.window.pop_front();
        }
        self.half_sides = self.half_sides.sup(&half_sides);
        self.missed = 0;
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn window(&self) -> &VecDeque<(f64, Vector3<f64>)> {
        &self.window
    }

    pub fn half_sides(&self) -> Vector3<f64> {
        self.half_sides
    }

    pub fn missed(&self) -> usize {
        self.missed
    }

    pub fn last_observation(&self) -> (f64, Vector3<f64>) {
        *self.window.back().expect("tracks are created with an observation")
    }
}

/// Tracker settings, a subset of [`PlannerConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub cluster_tolerance: f64,
    pub new_track_threshold: f64,
    pub window: usize,
    pub expiry: usize,
    pub poly_degree: usize,
}

impl From<&PlannerConfig> for TrackerConfig {
    fn from(c: &PlannerConfig) -> Self {
        Self {
            cluster_tolerance: c.cluster_tolerance,
            new_track_threshold: c.new_track_threshold,
            window: c.track_window,
            expiry: c.track_expiry,
            poly_degree: c.poly_degree,
        }
    }
}

impl Default for TrackerConfig {
    fn default() -> Self {
        (&PlannerConfig::default()).into()
    }
}

pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: usize,
    last_time: Option<f64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Self {
            config,
            tracks: Vec::new(),
            next_id: 0,
            last_time: None,
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Best available prediction for a track: the configured degree, lowered while the
    /// window is too short or the fit is ill-conditioned.
    pub fn predict_track(&self, track: &Track, horizon: f64) -> Arc<dyn ObstaclePrediction> {
        let (t_last, p_last) = track.last_observation();
        let max_degree = self.config.poly_degree.min(track.window().len().saturating_sub(2));
        if track.window().len() >= 2 {
            for degree in (0..=max_degree).rev() {
                if let Ok(p) = fit_and_predict(track, degree, horizon) {
                    return Arc::new(p);
                }
            }
        }
        Arc::new(StaticPrediction {
            id: track.id(),
            position: p_last,
            sigma: Vector3::repeat(self.config.cluster_tolerance),
            half_sides: track.half_sides(),
            valid_until: t_last + horizon,
        })
    }

    pub fn ingest(&mut self, snapshot: &PointCloudSnapshot) -> Result<(), TrackingError> {
        let t = snapshot.timestamp;
        if let Some(previous) = self.last_time {
            if !(t > previous) {
                return Err(TrackingError::NonIncreasingTimestamp { t, previous });
            }
        }
        self.last_time = Some(t);
        let clusters = if snapshot.points.is_empty() {
            Vec::new()
        } else {
            cluster(snapshot, self.config.cluster_tolerance)?
        };
        let predicted: Vec<Vector3<f64>> = self
            .tracks
            .iter()
            .map(|tr| self.predict_track(tr, t - tr.last_observation().0 + 1.0).mean(t))
            .collect();
        let centroids: Vec<Vector3<f64>> = clusters.iter().map(|c| c.centroid).collect();
        let assignment = assign(&centroids, &predicted, self.config.new_track_threshold);
        let mut seen = vec![false; self.tracks.len()];
        for (c, tr) in assignment.matches {
            seen[tr] = true;
            self.tracks[tr].observe(t, clusters[c].centroid, clusters[c].half_sides());
        }
        for (tr, s) in self.tracks.iter_mut().zip(&seen) {
            if !s {
                tr.missed += 1;
            }
        }
        let expiry = self.config.expiry;
        self.tracks.retain(|tr| tr.missed <= expiry);
        for c in assignment.new_tracks {
            let mut tr = Track::new(self.next_id, self.config.window);
            self.next_id += 1;
            tr.observe(t, clusters[c].centroid, clusters[c].half_sides());
            self.tracks.push(tr);
        }
        Ok(())
    }

    /// Predictions of every live track, valid `horizon` seconds past its last observation.
    pub fn predictions(&self, horizon: f64) -> Vec<Arc<dyn ObstaclePrediction>> {
        self.tracks.iter().map(|tr| self.predict_track(tr, horizon)).collect()
    }
}

/// Read snapshots from the replay text format: one point per line as `t x y z`; a line
/// holding only `t` records an empty snapshot. Consecutive lines with the same `t` form
/// one snapshot; `#` starts a comment.
pub fn read_snapshots(reader: impl BufRead) -> Result<Vec<PointCloudSnapshot>, TrackingError> {
    let mut out: Vec<PointCloudSnapshot> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let nums: Vec<f64> = body
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| TrackingError::Parse {
                line: i + 1,
                message: format!("{e}"),
            })?;
        let t = nums[0];
        let point = match nums.len() {
            1 => None,
            4 => Some(Vector3::new(nums[1], nums[2], nums[3])),
            k => {
                return Err(TrackingError::Parse {
                    line: i + 1,
                    message: format!("expected 1 or 4 fields, found {k}"),
                })
            }
        };
        match out.last_mut() {
            Some(last) if last.timestamp == t => last.points.extend(point),
            _ => out.push(PointCloudSnapshot {
                timestamp: t,
                points: point.into_iter().collect(),
            }),
        }
    }
    Ok(out)
}

pub fn write_snapshots(mut writer: impl Write, snapshots: &[PointCloudSnapshot]) -> std::io::Result<()> {
    for s in snapshots {
        if s.points.is_empty() {
            writeln!(writer, "{:?}", s.timestamp)?;
        }
        for p in &s.points {
            writeln!(writer, "{:?} {:?} {:?} {:?}", s.timestamp, p.x, p.y, p.z)?;
        }
    }
    Ok(())
}
