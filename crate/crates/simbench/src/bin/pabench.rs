use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pa_planner::planner::PlannerMode;
use pa_planner::PlannerConfig;
use pa_simbench::experiment::image_spec;
use pa_simbench::output::{
    emit_outputs, read_records, write_comparison, write_histogram, write_metrics, ComparisonRow, HISTOGRAM_CELL_PX,
    HISTOGRAM_SIGMA_CELLS,
};
use pa_simbench::{compute_metrics, projection_histogram, run_experiment, PredictionSource, RunSettings, SimError, World};

#[derive(Parser)]
#[command(name = "pabench", about = "Closed-loop benchmark of the perception-aware planner modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mode and write records, metrics, histogram and timings.
    Run {
        #[arg(long, default_value = "coupled")]
        mode: PlannerMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        /// Planner config file (`key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "perfect")]
        prediction: PredictionSource,
        /// Use the three-obstacle scenario.
        #[arg(long)]
        three_obstacles: bool,
    },
    /// Run all three modes over several seeds and write `comparison.csv`.
    Compare {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "perfect")]
        prediction: PredictionSource,
    },
    /// Recompute metrics and the histogram from a `records.csv`.
    Replay {
        records: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for `metrics.csv` and `histogram.csv` (stdout summary only when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<PlannerConfig, SimError> {
    Ok(match path {
        Some(p) => PlannerConfig::load(p)?,
        None => PlannerConfig::default(),
    })
}

fn execute(cli: Cli) -> Result<bool, SimError> {
    match cli.command {
        Command::Run {
            mode,
            seed,
            duration,
            config,
            out,
            prediction,
            three_obstacles,
        } => {
            let config = load_config(&config)?;
            let world = if three_obstacles {
                World::three_obstacle_scenario()
            } else {
                World::trefoil_scenario()
            };
            let settings = RunSettings {
                mode,
                seed,
                duration,
                prediction,
                config: config.clone(),
            };
            let run = run_experiment(&world, &settings)?;
            emit_outputs(&out, &run.records, &run.metrics, &run.timings, &run.logs, &image_spec(&config, &world))?;
            let m = &run.metrics;
            println!(
                "{mode}: in FOV {:.1}%, front {:.1}%, behind {:.1}%, projected speed {:.1} ± {:.1} px/s, collisions {}, failed replans {}/{}",
                m.in_fov_pct,
                m.front_not_fov_pct,
                m.behind_pct,
                m.projected_speed_mean,
                m.projected_speed_std,
                m.collisions,
                run.failed_replans,
                run.replans
            );
            Ok(run.stalls.is_empty())
        }
        Command::Compare {
            seeds,
            duration,
            config,
            out,
            prediction,
        } => {
            let config = load_config(&config)?;
            let world = World::trefoil_scenario();
            std::fs::create_dir_all(&out)?;
            let mut rows = Vec::new();
            let mut ok = true;
            for mode in PlannerMode::ALL {
                let mut mode_rows = Vec::new();
                for seed in 0..seeds {
                    let run = run_experiment(
                        &world,
                        &RunSettings {
                            mode,
                            seed,
                            duration,
                            prediction,
                            config: config.clone(),
                        },
                    )?;
                    ok &= run.stalls.is_empty();
                    let m = &run.metrics;
                    println!(
                        "{mode} seed {seed}: in FOV {:.1}%, projected speed {:.1} px/s, collisions {}",
                        m.in_fov_pct, m.projected_speed_mean, m.collisions
                    );
                    mode_rows.push(ComparisonRow {
                        mode: mode.to_string(),
                        seed: seed.to_string(),
                        in_fov_pct: m.in_fov_pct,
                        front_not_fov_pct: m.front_not_fov_pct,
                        behind_pct: m.behind_pct,
                        projected_speed_mean: m.projected_speed_mean,
                        projected_speed_std: m.projected_speed_std,
                        collisions: m.collisions,
                        failed_replans: run.failed_replans,
                        stalls: run.stalls.len(),
                    });
                }
                let n = mode_rows.len().max(1) as f64;
                let mean = |f: fn(&ComparisonRow) -> f64| mode_rows.iter().map(f).sum::<f64>() / n;
                let aggregate = ComparisonRow {
                    mode: mode.to_string(),
                    seed: "mean".into(),
                    in_fov_pct: mean(|r| r.in_fov_pct),
                    front_not_fov_pct: mean(|r| r.front_not_fov_pct),
                    behind_pct: mean(|r| r.behind_pct),
                    projected_speed_mean: mean(|r| r.projected_speed_mean),
                    projected_speed_std: mean(|r| r.projected_speed_std),
                    collisions: mode_rows.iter().map(|r| r.collisions).sum(),
                    failed_replans: mode_rows.iter().map(|r| r.failed_replans).sum(),
                    stalls: mode_rows.iter().map(|r| r.stalls).sum(),
                };
                rows.extend(mode_rows);
                rows.push(aggregate);
            }
            write_comparison(&out.join("comparison.csv"), &rows)?;
            Ok(ok)
        }
        Command::Replay { records, config, out } => {
            let config = load_config(&config)?;
            let world = World::trefoil_scenario();
            let rows = read_records(&records)?;
            let image = image_spec(&config, &world);
            let m = compute_metrics(&rows, &image, 0);
            println!(
                "frames {}: in FOV {:.1}%, front {:.1}%, behind {:.1}%, projected speed {:.1} ± {:.1} px/s",
                m.frames, m.in_fov_pct, m.front_not_fov_pct, m.behind_pct, m.projected_speed_mean, m.projected_speed_std
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                write_metrics(&dir.join("metrics.csv"), &m)?;
                let grid = projection_histogram(&rows, &image, HISTOGRAM_CELL_PX, HISTOGRAM_SIGMA_CELLS);
                write_histogram(&dir.join("histogram.csv"), &grid)?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("planner stalled for more than 5 s during the run");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
