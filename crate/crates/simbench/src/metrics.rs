//! Per-frame records and the aggregate visibility metrics.

use serde::{Deserialize, Serialize};

use crate::sensing::FovCategory;

/// One frame for one obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub time: f64,
    pub agent_x: f64,
    pub agent_y: f64,
    pub agent_z: f64,
    pub agent_vx: f64,
    pub agent_vy: f64,
    pub agent_vz: f64,
    pub agent_ax: f64,
    pub agent_ay: f64,
    pub agent_az: f64,
    pub agent_psi: f64,
    pub agent_psi_dot: f64,
    pub committed_id: u64,
    pub obstacle_id: usize,
    pub obstacle_x: f64,
    pub obstacle_y: f64,
    pub obstacle_z: f64,
    /// Image-plane coordinates in meters, empty when behind the camera.
    pub image_x: Option<f64>,
    pub image_y: Option<f64>,
    /// Projected speed in px/s, empty when behind the camera.
    pub projected_speed: Option<f64>,
    pub category: FovCategory,
}

/// Square image with a pinhole of focal length `focal_length` and full FOV `fov_angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSpec {
    pub size_px: f64,
    pub focal_length: f64,
    pub fov_angle: f64,
}

impl ImageSpec {
    /// Half-width of the image on the focal plane, meters.
    pub fn half_width(&self) -> f64 {
        self.focal_length * (self.fov_angle / 2.0).tan()
    }

    pub fn px_per_meter(&self) -> f64 {
        self.size_px / 2.0 / self.half_width()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let h = self.half_width();
        x.abs() <= h && y.abs() <= h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub frames: usize,
    pub in_fov_pct: f64,
    pub front_not_fov_pct: f64,
    pub behind_pct: f64,
    /// Mean projected speed (px/s) over frames whose obstacle centroid is inside the image.
    pub projected_speed_mean: f64,
    pub projected_speed_std: f64,
    pub projected_speed_frames: usize,
    pub collisions: usize,
}

pub fn compute_metrics(records: &[FrameRecord], image: &ImageSpec, collisions: usize) -> Metrics {
    let n = records.len();
    let pct = |c: FovCategory| {
        if n == 0 {
            f64::NAN
        } else {
            100.0 * records.iter().filter(|r| r.category == c).count() as f64 / n as f64
        }
    };
    let speeds: Vec<f64> = records
        .iter()
        .filter(|r| matches!((r.image_x, r.image_y), (Some(x), Some(y)) if image.contains(x, y)))
        .filter_map(|r| r.projected_speed)
        .collect();
    let m = speeds.len();
    let mean = speeds.iter().sum::<f64>() / m as f64;
    let var = speeds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / m as f64;
    Metrics {
        frames: n,
        in_fov_pct: pct(FovCategory::InFov),
        front_not_fov_pct: pct(FovCategory::FrontNotFov),
        behind_pct: pct(FovCategory::Behind),
        projected_speed_mean: if m == 0 { f64::NAN } else { mean },
        projected_speed_std: if m == 0 { f64::NAN } else { var.sqrt() },
        projected_speed_frames: m,
        collisions,
    }
}

/// Counts of in-image obstacle projections on a grid of `cell_px` cells, smoothed with a
/// Gaussian of standard deviation `sigma_cells` (truncated at three sigmas, zero padding).
/// Row 0 is the top of the image.
pub fn projection_histogram(records: &[FrameRecord], image: &ImageSpec, cell_px: f64, sigma_cells: f64) -> Vec<Vec<f64>> {
    let cells = (image.size_px / cell_px).ceil() as usize;
    let mut counts = vec![vec![0.0; cells]; cells];
    let scale = image.px_per_meter();
    for r in records {
        let (Some(x), Some(y)) = (r.image_x, r.image_y) else {
            continue;
        };
        if !image.contains(x, y) {
            continue;
        }
        let px = x * scale + image.size_px / 2.0;
        let py = y * scale + image.size_px / 2.0;
        let col = ((px / cell_px) as usize).min(cells - 1);
        let row = ((py / cell_px) as usize).min(cells - 1);
        counts[row][col] += 1.0;
    }
    if sigma_cells <= 0.0 {
        return counts;
    }
    let radius = (3.0 * sigma_cells).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma_cells * sigma_cells)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / total).collect();
    let blur = |src: &Vec<Vec<f64>>, horizontal: bool| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; cells]; cells];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, value) in row.iter_mut().enumerate() {
                for (k, w) in kernel.iter().enumerate() {
                    let off = k as isize - radius;
                    let (ii, jj) = if horizontal { (i as isize, j as isize + off) } else { (i as isize + off, j as isize) };
                    if (0..cells as isize).contains(&ii) && (0..cells as isize).contains(&jj) {
                        *value += w * src[ii as usize][jj as usize];
                    }
                }
            }
        }
        out
    };
    blur(&blur(&counts, true), false)
}
