//! The elevation-mask sweep: runs both estimators over masks and seeds,
//! pools epoch errors across seeds, and emits the CSV artifacts.

use super::estimate::{run_proposed, run_rtk_only_baseline, solve_epochs, SeriesPoint};
use super::metrics::{evaluate, truth_rows, MetricsReport};
use super::sim::{apply_mask, simulate};
use super::{EstimatorKind, FixValidation, HarnessError, SimulatedWorld};
use crate::csvio::{write_rows, MetricsRow, SeriesRow};
use crate::graph::GraphSettings;
use crate::rtk::RtkConfig;
use crate::scenario::Scenario;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Sweep configuration; mirrors the TOML config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Scenario asset to run; the built-in default scenario when absent.
    pub scenario_path: Option<PathBuf>,
    pub masks_deg: Vec<f64>,
    pub seeds: Vec<u64>,
    pub estimators: Vec<EstimatorKind>,
    pub output_dir: PathBuf,
    pub rtk: RtkConfig,
    pub optimizer: GraphSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario_path: None,
            masks_deg: vec![10.0, 35.0, 45.0],
            seeds: vec![1, 2, 3, 4, 5],
            estimators: vec![EstimatorKind::Proposed, EstimatorKind::RtkOnly],
            output_dir: PathBuf::from("out"),
            rtk: RtkConfig::default(),
            optimizer: GraphSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed required".into()));
        }
        if self.masks_deg.iter().any(|m| !(0.0..90.0).contains(m)) {
            return Err(HarnessError::Config(
                "masks must lie in [0, 90) degrees".into(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(HarnessError::Config("at least one estimator".into()));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, HarnessError> {
        match &self.scenario_path {
            Some(p) => Ok(Scenario::load(p)?),
            None => Ok(Scenario::default_scenario()),
        }
    }
}

/// One (estimator, mask, seed) cell of the sweep.
#[derive(Debug)]
pub struct CellResult {
    pub estimator: EstimatorKind,
    pub mask_deg: f64,
    pub seed: u64,
    pub report: Option<MetricsReport>,
    pub series: Vec<SeriesPoint>,
    pub runtime: Duration,
    pub error: Option<String>,
}

/// Everything the sweep produced; the CSV artifacts are already on disk
/// when this is returned.
pub struct SweepOutcome {
    /// Pooled metrics per (estimator, mask), in config order.
    pub metrics: Vec<MetricsRow>,
    /// Pooled reports matching `metrics` (per-antenna/per-pair fix rates
    /// averaged across seeds).
    pub reports: Vec<(EstimatorKind, f64, MetricsReport)>,
    pub cells: Vec<CellResult>,
    /// Fix validation pooled over every cell.
    pub fix_validation: FixValidation,
    pub failed_cells: usize,
}

fn series_rows(series: &[SeriesPoint]) -> Vec<SeriesRow> {
    series
        .iter()
        .map(|p| SeriesRow {
            t: p.t,
            e: p.position.map(|q| q.e).unwrap_or(f64::NAN),
            n: p.position.map(|q| q.n).unwrap_or(f64::NAN),
            u: p.position.map(|q| q.u).unwrap_or(f64::NAN),
            angle: p.articulated_deg.unwrap_or(f64::NAN),
            status_flags: p.status_flags(),
        })
        .collect()
}

fn mask_label(mask: f64) -> String {
    format!("{mask}").replace('.', "p")
}

/// Runs the full sweep and writes `truth.csv`, per-cell `series_*.csv` and
/// `errors_*.csv`, and the pooled `metrics.csv` into the output directory.
///
/// Cells run in parallel; failures are recorded per cell and the sweep
/// continues. All outputs are deterministic functions of the config.
pub fn run_mask_sweep(config: &ExperimentConfig) -> Result<SweepOutcome, HarnessError> {
    config.validate()?;
    let scenario = config.scenario()?;
    std::fs::create_dir_all(&config.output_dir)?;

    // One world per seed: same trajectory and constellation, seed-specific
    // noise, clocks and ambiguities.
    let worlds: Vec<SimulatedWorld> = config
        .seeds
        .par_iter()
        .map(|seed| {
            let mut s = scenario.clone();
            s.budget.seed = *seed;
            simulate(&s)
        })
        .collect::<Result<_, _>>()?;

    let truth = truth_rows(&worlds[0]);
    write_rows(&config.output_dir.join("truth.csv"), &truth)?;

    // Per (seed, mask): the expensive per-epoch RTK stage, shared by both
    // estimators.
    struct Job<'a> {
        seed_idx: usize,
        mask: f64,
        world: &'a SimulatedWorld,
    }
    let mut jobs: Vec<Job> = Vec::new();
    for (seed_idx, world) in worlds.iter().enumerate() {
        for mask in &config.masks_deg {
            jobs.push(Job {
                seed_idx,
                mask: *mask,
                world,
            });
        }
    }

    let base_pos = scenario.base_position().as_vector();
    let dt = scenario.dt();
    let geometry = scenario.geometry;

    struct JobResult {
        seed_idx: usize,
        mask: f64,
        cells: Vec<CellResult>,
        validation: FixValidation,
    }

    let job_results: Vec<JobResult> = jobs
        .par_iter()
        .map(|job| {
            let masked = apply_mask(job.world, job.mask);
            let solves = solve_epochs(&masked.observations, &masked.skies, &base_pos, dt, &config.rtk);
            let validation = super::validate_fixes(&solves, &masked);
            let seed = config.seeds[job.seed_idx];

            let cells = config
                .estimators
                .iter()
                .map(|estimator| {
                    let start = std::time::Instant::now();
                    let outcome: Result<Vec<SeriesPoint>, HarnessError> = match estimator {
                        EstimatorKind::RtkOnly => Ok(run_rtk_only_baseline(&solves)),
                        EstimatorKind::Proposed => run_proposed(
                            &solves,
                            &geometry,
                            &base_pos,
                            dt,
                            config.optimizer,
                        )
                        .map(|(series, _report)| series),
                    };
                    let runtime = start.elapsed();
                    match outcome {
                        Ok(series) => {
                            let report = evaluate(&series, &truth, Some(&solves)).ok();
                            CellResult {
                                estimator: *estimator,
                                mask_deg: job.mask,
                                seed,
                                report,
                                series,
                                runtime,
                                error: None,
                            }
                        }
                        Err(e) => CellResult {
                            estimator: *estimator,
                            mask_deg: job.mask,
                            seed,
                            report: None,
                            series: Vec::new(),
                            runtime,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect();
            JobResult {
                seed_idx: job.seed_idx,
                mask: job.mask,
                cells,
                validation,
            }
        })
        .collect();

    // Deterministic flattening: seed-major then mask order as configured.
    let mut cells: Vec<CellResult> = Vec::new();
    let mut fix_validation = FixValidation::default();
    for jr in job_results {
        let _ = (jr.seed_idx, jr.mask);
        fix_validation.n_fix += jr.validation.n_fix;
        fix_validation.n_wrong += jr.validation.n_wrong;
        cells.extend(jr.cells);
    }

    // Per-cell artifacts.
    for cell in &cells {
        if cell.error.is_some() {
            continue;
        }
        let tag = format!(
            "{}_m{}_s{}",
            cell.estimator.name(),
            mask_label(cell.mask_deg),
            cell.seed
        );
        write_rows(
            &config.output_dir.join(format!("series_{tag}.csv")),
            &series_rows(&cell.series),
        )?;
        if let Some(report) = &cell.report {
            write_rows(
                &config.output_dir.join(format!("errors_{tag}.csv")),
                &report.per_epoch,
            )?;
        }
    }

    // Pooled aggregation: RMS over epoch errors pooled across seeds.
    let mut metrics = Vec::new();
    let mut reports = Vec::new();
    let mut failed_cells = 0usize;
    for estimator in &config.estimators {
        for mask in &config.masks_deg {
            let group: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.estimator == *estimator && c.mask_deg == *mask)
                .collect();
            failed_cells += group.iter().filter(|c| c.error.is_some()).count();
            let pooled = pool_reports(&group);
            if let Some(pooled) = pooled {
                metrics.push(MetricsRow {
                    estimator: estimator.name().to_string(),
                    mask: *mask,
                    pos_rms_m: pooled.pos_rms_m,
                    angle_rms_deg: pooled.angle_rms_deg,
                    fix_rate: pooled.fix_rate(),
                });
                reports.push((*estimator, *mask, pooled));
            }
        }
    }
    write_rows(&config.output_dir.join("metrics.csv"), &metrics)?;

    Ok(SweepOutcome {
        metrics,
        reports,
        cells,
        fix_validation,
        failed_cells,
    })
}

/// Pools per-seed reports into one: RMS of pooled epoch errors (not the
/// mean of per-seed RMS values), fix rates averaged.
fn pool_reports(group: &[&CellResult]) -> Option<MetricsReport> {
    let reports: Vec<&MetricsReport> = group.iter().filter_map(|c| c.report.as_ref()).collect();
    if reports.is_empty() {
        return None;
    }
    let mut pos_sq = 0.0;
    let mut n_pos = 0usize;
    let mut angle_sq = 0.0;
    let mut n_angle = 0usize;
    let mut per_epoch = Vec::new();
    for r in &reports {
        for row in &r.per_epoch {
            if row.pos_err_m.is_finite() {
                pos_sq += row.pos_err_m * row.pos_err_m;
                n_pos += 1;
            }
            if row.angle_err_deg.is_finite() {
                angle_sq += row.angle_err_deg * row.angle_err_deg;
                n_angle += 1;
            }
            per_epoch.push(row.clone());
        }
    }
    let k = reports.len() as f64;
    let mut fix_rate_per_antenna = [0.0f64; 4];
    let mut fix_rate_per_pair = [0.0f64; 6];
    for r in &reports {
        for (acc, rate) in fix_rate_per_antenna.iter_mut().zip(&r.fix_rate_per_antenna) {
            *acc += rate / k;
        }
        for (acc, rate) in fix_rate_per_pair.iter_mut().zip(&r.fix_rate_per_pair) {
            *acc += rate / k;
        }
    }
    Some(MetricsReport {
        pos_rms_m: if n_pos > 0 {
            (pos_sq / n_pos as f64).sqrt()
        } else {
            0.0
        },
        angle_rms_deg: if n_angle > 0 {
            (angle_sq / n_angle as f64).sqrt()
        } else {
            0.0
        },
        n_epochs: reports.iter().map(|r| r.n_epochs).sum(),
        n_position_epochs: n_pos,
        n_angle_epochs: n_angle,
        fix_rate_per_antenna,
        fix_rate_per_pair,
        per_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_match_experiment_design() {
        let c = ExperimentConfig::default();
        assert_eq!(c.masks_deg, vec![10.0, 35.0, 45.0]);
        assert_eq!(c.seeds.len(), 5);
        assert_eq!(c.estimators.len(), 2);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = ExperimentConfig::default();
        let text = toml::to_string_pretty(&c).unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.masks_deg, c.masks_deg);
        assert_eq!(back.seeds, c.seeds);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = ExperimentConfig::from_toml_str("seeds = [7]\n").unwrap();
        assert_eq!(c.seeds, vec![7]);
        assert_eq!(c.masks_deg, vec![10.0, 35.0, 45.0]);
    }

    #[test]
    fn invalid_mask_rejected() {
        assert!(ExperimentConfig::from_toml_str("masks_deg = [95.0]\n").is_err());
        assert!(ExperimentConfig::from_toml_str("seeds = []\n").is_err());
    }
}
