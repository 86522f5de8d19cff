//! CSV outputs of a run and the record reader used by `replay`.
//!
//! Files written by [`emit_outputs`]:
//! - `records.csv`: one row per frame and obstacle ([`FrameRecord`] columns).
//! - `metrics.csv`: one row of [`Metrics`].
//! - `histogram.csv`: smoothed projection counts, `row,col,value` on 30 px cells.
//! - `timings.csv`: stage timings per replan ([`TimingRow`] columns, seconds).
//! - `replans.jsonl`: one JSON log record per replan.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::experiment::{SimError, TimingRow};
use crate::metrics::{projection_histogram, FrameRecord, ImageSpec, Metrics};

/// Histogram cell size in pixels.
pub const HISTOGRAM_CELL_PX: f64 = 30.0;
/// Standard deviation of the histogram smoothing, in cells.
pub const HISTOGRAM_SIGMA_CELLS: f64 = 1.0;

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), SimError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const RECORD_COLUMNS: [&str; 21] = [
    "time",
    "agent_x",
    "agent_y",
    "agent_z",
    "agent_vx",
    "agent_vy",
    "agent_vz",
    "agent_ax",
    "agent_ay",
    "agent_az",
    "agent_psi",
    "agent_psi_dot",
    "committed_id",
    "obstacle_id",
    "obstacle_x",
    "obstacle_y",
    "obstacle_z",
    "image_x",
    "image_y",
    "projected_speed",
    "category",
];

pub const METRIC_COLUMNS: [&str; 8] = [
    "frames",
    "in_fov_pct",
    "front_not_fov_pct",
    "behind_pct",
    "projected_speed_mean",
    "projected_speed_std",
    "projected_speed_frames",
    "collisions",
];

pub const TIMING_COLUMNS: [&str; 8] = [
    "time",
    "obstacles",
    "convex_hulls",
    "position_guess",
    "psi_guess",
    "optimization",
    "total",
    "committed",
];

pub fn write_records(path: &Path, records: &[FrameRecord]) -> Result<(), SimError> {
    write_rows(path, records, &RECORD_COLUMNS)
}

pub fn write_metrics(path: &Path, metrics: &Metrics) -> Result<(), SimError> {
    write_rows(path, std::slice::from_ref(metrics), &METRIC_COLUMNS)
}

pub fn write_timings(path: &Path, rows: &[TimingRow]) -> Result<(), SimError> {
    write_rows(path, rows, &TIMING_COLUMNS)
}

pub fn write_histogram(path: &Path, grid: &[Vec<f64>]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "col", "value"])?;
    for (i, row) in grid.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            w.write_record([i.to_string(), j.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<FrameRecord>, SimError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Write every output file of a run into `dir` (created if missing).
pub fn emit_outputs(
    dir: &Path,
    records: &[FrameRecord],
    metrics: &Metrics,
    timings: &[TimingRow],
    logs: &[String],
    image: &ImageSpec,
) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    write_records(&dir.join("records.csv"), records)?;
    write_metrics(&dir.join("metrics.csv"), metrics)?;
    let grid = projection_histogram(records, image, HISTOGRAM_CELL_PX, HISTOGRAM_SIGMA_CELLS);
    write_histogram(&dir.join("histogram.csv"), &grid)?;
    write_timings(&dir.join("timings.csv"), timings)?;
    let mut w = BufWriter::new(File::create(dir.join("replans.jsonl"))?);
    for line in logs {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the mode comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub mode: String,
    /// Seed, or `mean` for the aggregate over seeds.
    pub seed: String,
    pub in_fov_pct: f64,
    pub front_not_fov_pct: f64,
    pub behind_pct: f64,
    pub projected_speed_mean: f64,
    pub projected_speed_std: f64,
    pub collisions: usize,
    pub failed_replans: usize,
    pub stalls: usize,
}

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<(), SimError> {
    write_rows(
        path,
        rows,
        &[
            "mode",
            "seed",
            "in_fov_pct",
            "front_not_fov_pct",
            "behind_pct",
            "projected_speed_mean",
            "projected_speed_std",
            "collisions",
            "failed_replans",
            "stalls",
        ],
    )
}
