use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rovernav::global::{describe, localize_grid, MatchParams, Metric};
use rovernav::mission::{
    emit_metrics, load_bumper, parse_trajectory, run_scenario, ModePolicy, ScenarioConfig, CSV_HEADER,
};
use rovernav::sim::{CameraModel, RoverPose};
use rovernav::terrain::read_asc;
use rovernav::NavError;

#[derive(Parser)]
#[command(name = "rovernav", version, about = "Two-level rover navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Efficient,
    Full,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Raw,
    Ncc,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write metrics.csv, trajectory.csv and events.log.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Calibrate the hazard camera on flat ground and write calibration.txt.
    Calibrate {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match a local DEM against an orbital DEM.
    Match {
        local: PathBuf,
        orbital: PathBuf,
        #[arg(long, value_enum, default_value = "raw")]
        metric: MetricArg,
        /// Search radius around the local DEM's own georeference, meters.
        #[arg(long)]
        search_radius: Option<f64>,
        /// Write the score surface here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit a trajectory as plot data: truth and estimate tracks plus the error.
    Replay { trajectory: PathBuf },
}

enum Failure {
    Fault(String),
    Config(String),
}

impl From<NavError> for Failure {
    fn from(e: NavError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Fault(msg)) => {
            eprintln!("run ended with a fault: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn output_dir(config: &ScenarioConfig, out: Option<PathBuf>, scenario: &Path) -> PathBuf {
    out.or_else(|| config.output_dir.clone()).unwrap_or_else(|| {
        let stem = scenario
            .file_stem()
            .map_or("run".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from("out").join(stem)
    })
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            scenario,
            out,
            seed,
            mode,
        } => {
            let mut config = ScenarioConfig::load(&scenario)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(mode) = mode {
                config.mode = match mode {
                    ModeArg::Efficient => ModePolicy::EfficientOnly,
                    ModeArg::Full => ModePolicy::FullOnly,
                    ModeArg::Auto => ModePolicy::Auto,
                };
            }
            let dir = output_dir(&config, out, &scenario);
            let output = run_scenario(&config)?;
            emit_metrics(&output, &dir)?;
            println!("{CSV_HEADER}");
            println!("{}", output.metrics.csv_row());
            println!("outputs in {}", dir.display());
            if output.metrics.status.is_fault() {
                return Err(Failure::Fault(output.metrics.status.as_str().into()));
            }
            Ok(())
        }
        Command::Calibrate { scenario, out } => {
            let config = ScenarioConfig::load(&scenario)?;
            let cam = CameraModel::pinhole(&config.cameras.loccam)?;
            let bumper = load_bumper(&config, &cam)?;
            let dir = output_dir(&config, out, &scenario);
            std::fs::create_dir_all(&dir).map_err(NavError::from)?;
            let path = dir.join("calibration.txt");
            bumper.table.save(&path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Match {
            local,
            orbital,
            metric,
            search_radius,
            out,
        } => {
            let local = read_asc(local)?;
            let orbital = read_asc(orbital)?;
            let mut params = MatchParams {
                metric: match metric {
                    MetricArg::Raw => Metric::Raw,
                    MetricArg::Ncc => Metric::Ncc,
                },
                ..MatchParams::default()
            };
            if let Some(r) = search_radius {
                params.search_radius = r;
            }
            // The local DEM carries its own georeference; the gate stays relative to it.
            let mid = local.origin().lerp(local.extent_max(), 0.5);
            let estimate = RoverPose::planar(mid.x, mid.y, 0.0);
            let fix = localize_grid(&local, &orbital, &estimate, &params)?;
            println!("{}", describe(&fix));
            if let Some(out) = out {
                fix.result.write_csv(&out)?;
                println!("scores in {}", out.display());
            }
            Ok(())
        }
        Command::Replay { trajectory } => {
            let text = std::fs::read_to_string(&trajectory).map_err(NavError::from)?;
            let rows = parse_trajectory(&text)?;
            println!("t,truth_x,truth_y,est_x,est_y,error_m,mode");
            for r in &rows {
                let err = (r.truth.0 - r.estimate.0).hypot(r.truth.1 - r.estimate.1);
                println!(
                    "{:.2},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
                    r.time, r.truth.0, r.truth.1, r.estimate.0, r.estimate.1, err, r.mode
                );
            }
            Ok(())
        }
    }
}
