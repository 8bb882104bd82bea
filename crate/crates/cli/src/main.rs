//! Command line for the articulated-truck GNSS estimator.
//!
//! Verbs:
//! * `simulate` - scenario asset to observation + ground-truth CSVs
//! * `estimate` - observation CSV to an estimated truck series CSV
//! * `sweep`    - the full elevation-mask experiment (metrics + artifacts)
//! * `report`   - series + truth CSVs to RMS metrics
//!
//! Exit codes: 0 success, 2 configuration error, 3 estimation failure.

use artic_gnss::csvio::{
    read_observations, read_rows, write_observations, write_rows, MetricsRow, RtkDiagRow,
    SeriesRow, SolveReportRow, TruthRow,
};
use artic_gnss::graph::{FactorKind, GraphSettings, SolveReport, ANTENNA_PAIRS};
use artic_gnss::harness::{
    apply_mask, evaluate, run_mask_sweep, run_proposed, run_rtk_only_baseline, simulate,
    solve_epochs, truth_rows, EpochSolve, EstimatorKind, ExperimentConfig, SeriesPoint,
};
use artic_gnss::obs::GnssObservation;
use artic_gnss::rtk::RtkConfig;
use artic_gnss::sky::{visible_sky, EnuSky};
use artic_gnss::Scenario;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "artic-gnss", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Proposed,
    RtkOnly,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(value: EstimatorArg) -> Self {
        match value {
            EstimatorArg::Proposed => EstimatorKind::Proposed,
            EstimatorArg::RtkOnly => EstimatorKind::RtkOnly,
        }
    }
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario asset (TOML); the built-in default scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

impl ScenarioArg {
    fn load(&self) -> Result<Scenario, CliError> {
        match &self.scenario {
            Some(p) => Scenario::load(p).map_err(|e| CliError::config(e.to_string())),
            None => Ok(Scenario::default_scenario()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario into observation and ground-truth CSVs.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Output directory for obs.csv and truth.csv.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Elevation mask applied on top of the scenario's base mask.
        #[arg(long)]
        mask: Option<f64>,
        /// Also write the effective scenario asset alongside the outputs.
        #[arg(long)]
        write_scenario: bool,
    },
    /// Estimate a truck series from an observation CSV.
    Estimate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Observation CSV (the `simulate` output schema).
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, value_enum, default_value = "proposed")]
        estimator: EstimatorArg,
        /// Output series CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-epoch RTK diagnostics CSV.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Optional machine-readable solve report CSV (proposed estimator).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the full elevation-mask sweep from a config file.
    Sweep {
        /// Experiment config (TOML); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate a series CSV against a truth CSV.
    Report {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Optional metrics CSV output (single row).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Estimator label for the metrics row.
        #[arg(long, default_value = "unknown")]
        label: String,
        /// Mask label for the metrics row.
        #[arg(long, default_value_t = f64::NAN)]
        mask: f64,
    },
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 2,
        }
    }

    fn estimation(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 3,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            scenario,
            out_dir,
            mask,
            write_scenario,
        } => cmd_simulate(&scenario, &out_dir, mask, write_scenario),
        Command::Estimate {
            scenario,
            obs,
            estimator,
            out,
            diagnostics,
            report,
        } => cmd_estimate(&scenario, &obs, estimator.into(), &out, diagnostics, report),
        Command::Sweep { config, out_dir } => cmd_sweep(config, out_dir),
        Command::Report {
            series,
            truth,
            out,
            label,
            mask,
        } => cmd_report(&series, &truth, out, &label, mask),
    }
}

fn cmd_simulate(
    scenario: &ScenarioArg,
    out_dir: &Path,
    mask: Option<f64>,
    write_scenario: bool,
) -> Result<(), CliError> {
    let scenario = scenario.load()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::config(e.to_string()))?;
    let world = simulate(&scenario).map_err(|e| CliError::estimation(e.to_string()))?;

    let obs: Vec<GnssObservation> = match mask {
        Some(m) if m > scenario.base_mask_deg => {
            apply_mask(&world, m).observations.into_iter().flatten().collect()
        }
        _ => world.observations.iter().flatten().cloned().collect(),
    };
    write_observations(&out_dir.join("obs.csv"), &obs)
        .map_err(|e| CliError::estimation(e.to_string()))?;
    write_rows(&out_dir.join("truth.csv"), &truth_rows(&world))
        .map_err(|e| CliError::estimation(e.to_string()))?;
    if write_scenario {
        scenario
            .save(&out_dir.join("scenario.toml"))
            .map_err(|e| CliError::estimation(e.to_string()))?;
    }
    println!(
        "wrote {} observations over {} epochs to {}",
        obs.len(),
        world.observations.len(),
        out_dir.display()
    );
    Ok(())
}

/// Groups a flat observation stream into per-epoch buckets on the
/// scenario's epoch grid.
fn group_epochs(
    obs: Vec<GnssObservation>,
    scenario: &Scenario,
) -> Result<Vec<Vec<GnssObservation>>, CliError> {
    let n = scenario.n_epochs();
    let mut epochs = vec![Vec::new(); n];
    for o in obs {
        let idx = (o.t * scenario.rate_hz).round() as usize;
        if idx >= n || (o.t - scenario.epoch_time(idx)).abs() > 1e-6 {
            return Err(CliError::config(format!(
                "observation at t={} is off the scenario's {} Hz grid",
                o.t, scenario.rate_hz
            )));
        }
        epochs[idx].push(o);
    }
    Ok(epochs)
}

fn diag_rows(solves: &[EpochSolve]) -> Vec<RtkDiagRow> {
    let mut rows = Vec::new();
    for s in solves {
        let mut push = |pair: String, sol: &artic_gnss::rtk::RtkSolution| {
            rows.push(RtkDiagRow {
                t: s.t,
                pair,
                status: sol.status.to_string(),
                ratio: sol.ratio,
                n_sats: sol.n_sats,
                baseline_e: sol.baseline.x,
                baseline_n: sol.baseline.y,
                baseline_u: sol.baseline.z,
            });
        };
        for (j, sol) in s.rtk.iter().enumerate() {
            if let Some(sol) = sol {
                push(format!("{}", j + 1), sol);
            }
        }
        for (k, sol) in s.mvbase.iter().enumerate() {
            if let Some(sol) = sol {
                let (a, b) = ANTENNA_PAIRS[k];
                push(format!("{}-{}", a + 1, b + 1), sol);
            }
        }
    }
    rows
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

fn report_row(report: &SolveReport) -> SolveReportRow {
    let rms = |kind: FactorKind| {
        report
            .residual_rms
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN)
    };
    SolveReportRow {
        iterations: report.iterations,
        initial_objective: report.initial_objective,
        final_objective: report.final_objective,
        converged: report.converged,
        rtk_rms_m: rms(FactorKind::Rtk),
        moving_base_rms_m: rms(FactorKind::MovingBase),
        velocity_rms_m: rms(FactorKind::DopplerVelocity),
        baseline_rms_m: rms(FactorKind::BaselineLength),
    }
}

fn cmd_estimate(
    scenario: &ScenarioArg,
    obs_path: &Path,
    estimator: EstimatorKind,
    out: &Path,
    diagnostics: Option<PathBuf>,
    report_path: Option<PathBuf>,
) -> Result<(), CliError> {
    let scenario = scenario.load()?;
    let obs = read_observations(obs_path).map_err(|e| CliError::config(e.to_string()))?;
    let epochs = group_epochs(obs, &scenario)?;

    // Rebuild per-epoch satellite geometry from the scenario's orbit table.
    let base_ecef = artic_gnss::geodesy::enu_to_ecef(&scenario.base_position(), &scenario.site);
    let skies: Vec<EnuSky> = (0..epochs.len())
        .map(|epoch| {
            let view = visible_sky(
                &scenario.orbits,
                scenario.epoch_time(epoch),
                &base_ecef,
                &scenario.site,
                0.0,
            );
            EnuSky::from_view(&view, &scenario.site)
        })
        .collect();

    let base_pos = scenario.base_position().as_vector();
    let solves = solve_epochs(&epochs, &skies, &base_pos, scenario.dt(), &RtkConfig::default());
    if let Some(path) = diagnostics {
        write_rows(&path, &diag_rows(&solves)).map_err(|e| CliError::estimation(e.to_string()))?;
    }

    let series = match estimator {
        EstimatorKind::RtkOnly => run_rtk_only_baseline(&solves),
        EstimatorKind::Proposed => {
            let (series, report) = run_proposed(
                &solves,
                &scenario.geometry,
                &base_pos,
                scenario.dt(),
                GraphSettings::default(),
            )
            .map_err(|e| CliError::estimation(e.to_string()))?;
            print!("{report}");
            if let Some(path) = report_path {
                write_rows(&path, &[report_row(&report)])
                    .map_err(|e| CliError::estimation(e.to_string()))?;
            }
            series
        }
    };
    write_rows(out, &series_rows(&series)).map_err(|e| CliError::estimation(e.to_string()))?;
    println!("wrote {} epochs to {}", series.len(), out.display());
    Ok(())
}

fn cmd_sweep(config: Option<PathBuf>, out_dir: Option<PathBuf>) -> Result<(), CliError> {
    let mut config = match config {
        Some(p) => ExperimentConfig::load(&p).map_err(|e| CliError::config(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = out_dir {
        config.output_dir = dir;
    }
    let outcome = run_mask_sweep(&config).map_err(|e| CliError::estimation(e.to_string()))?;

    println!("estimator  mask   pos_rms_m  angle_rms_deg  fix_rate");
    for row in &outcome.metrics {
        println!(
            "{:<9}  {:>4}   {:>9.4}  {:>13.4}  {:>8.3}",
            row.estimator, row.mask, row.pos_rms_m, row.angle_rms_deg, row.fix_rate
        );
    }
    println!(
        "fix validation: {}/{} incorrect; artifacts in {}",
        outcome.fix_validation.n_wrong,
        outcome.fix_validation.n_fix,
        config.output_dir.display()
    );
    for cell in &outcome.cells {
        if let Some(err) = &cell.error {
            log::error!(
                "cell {} mask {} seed {}: {err}",
                cell.estimator.name(),
                cell.mask_deg,
                cell.seed
            );
        }
    }
    if outcome.failed_cells > 0 {
        return Err(CliError::estimation(format!(
            "{} sweep cells failed",
            outcome.failed_cells
        )));
    }
    Ok(())
}

fn cmd_report(
    series_path: &Path,
    truth_path: &Path,
    out: Option<PathBuf>,
    label: &str,
    mask: f64,
) -> Result<(), CliError> {
    let series: Vec<SeriesRow> =
        read_rows(series_path).map_err(|e| CliError::config(e.to_string()))?;
    let truth: Vec<TruthRow> = read_rows(truth_path).map_err(|e| CliError::config(e.to_string()))?;

    let points: Vec<SeriesPoint> = series
        .iter()
        .enumerate()
        .map(|(i, r)| SeriesPoint {
            epoch: i,
            t: r.t,
            position: (r.e.is_finite() && r.n.is_finite() && r.u.is_finite())
                .then(|| artic_gnss::geodesy::EnuPoint::new(r.e, r.n, r.u)),
            articulated_deg: r.angle.is_finite().then_some(r.angle),
            n_fix_antennas: 0,
            n_fix_pairs: 0,
            n_velocities: 0,
        })
        .collect();
    let report = evaluate(&points, &truth, None).map_err(|e| CliError::estimation(e.to_string()))?;
    println!(
        "epochs {} (pos {}, angle {}): position RMS {:.4} m, angle RMS {:.4} deg",
        report.n_epochs,
        report.n_position_epochs,
        report.n_angle_epochs,
        report.pos_rms_m,
        report.angle_rms_deg
    );
    if let Some(path) = out {
        write_rows(
            &path,
            &[MetricsRow {
                estimator: label.to_string(),
                mask,
                pos_rms_m: report.pos_rms_m,
                angle_rms_deg: report.angle_rms_deg,
                fix_rate: f64::NAN,
            }],
        )
        .map_err(|e| CliError::estimation(e.to_string()))?;
    }
    Ok(())
}
