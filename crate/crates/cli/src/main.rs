use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use soilradar::capture;
use soilradar::moisture::{
    estimate_vwc, fit_calibration, read_pairs_csv, surface_distance, CalibrationCurve,
    EstimateOptions, KaMode, MeasurementGeometry, MoistureFlag, SurfaceOptions, VwcModel,
};
use soilradar::radar::FrameCapture;
use soilradar::scenario::{simulate, Scenario};
use soilradar::sweep::{run_sweep, snr_svg, write_csv, SweepSpec};
use soilradar::tag::TagConfig;
use soilradar::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NOT_DETECTED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "soilradar",
    version,
    about = "Radar backscatter soil moisture toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a capture from a scenario file.
    Simulate {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Estimate moisture from a capture file.
    Process {
        capture: PathBuf,
        /// Radar to surface distance (m); defaults to the capture annotation.
        #[arg(long)]
        d_air: Option<f64>,
        /// Tag burial depth (m); defaults to the capture annotation.
        #[arg(long)]
        d_soil: Option<f64>,
        /// Tag oscillation frequency (Hz); defaults to the annotation or 80.
        #[arg(long)]
        osc_freq: Option<f64>,
        /// Measure d_air from the surface echo instead of taking it as given.
        #[arg(long, conflicts_with = "d_air")]
        measure_surface: bool,
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, default_value = "exact")]
        ka_mode: String,
        #[arg(long, default_value_t = 10.0)]
        threshold_db: f64,
    },
    /// Fit a calibration curve to `ka,theta` pairs.
    Calibrate {
        pairs: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a parameter sweep and write one CSV row per replicate.
    Sweep {
        sweep: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write an SVG plot of mean SNR against the swept value.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ProcessRecord {
    detected: bool,
    theta: Option<f64>,
    ka: Option<f64>,
    delta_tof_ns: Option<f64>,
    snr_db: f64,
    flags: Vec<MoistureFlag>,
    mode: KaMode,
    expected_bin: f64,
    measured_bin: f64,
    d_air: f64,
    d_soil: f64,
    scenario_digest: Option<String>,
    seed: u64,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::CorruptCapture(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn annotation(cap: &FrameCapture, key: &str) -> Result<Option<f64>, Error> {
    cap.annotations
        .get(key)
        .map(|v| {
            v.parse::<f64>().map_err(|_| Error::InvalidParameter {
                field: key.into(),
                reason: format!("bad annotation {v:?}"),
            })
        })
        .transpose()
}

fn missing(field: &str) -> Error {
    Error::InvalidParameter {
        field: field.into(),
        reason: "not given and not recorded in the capture".into(),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { scenario, output } => {
            let s = Scenario::from_json(&fs::read_to_string(scenario)?)?;
            let cap = simulate(&s)?;
            capture::save(&cap, &output)?;
            println!("{}", s.digest()?);
            Ok(0)
        }
        Command::Process {
            capture: path,
            d_air,
            d_soil,
            osc_freq,
            measure_surface,
            calibration,
            ka_mode,
            threshold_db,
        } => {
            let cap = capture::load(&path)?;
            let ka_mode: KaMode = ka_mode.parse()?;
            let d_air = if measure_surface {
                surface_distance(&cap, &SurfaceOptions::default())?
            } else {
                d_air
                    .or(annotation(&cap, "d_air")?)
                    .ok_or_else(|| missing("d_air"))?
            };
            let d_soil = d_soil
                .or(annotation(&cap, "d_soil")?)
                .ok_or_else(|| missing("d_soil"))?;
            let osc_freq = osc_freq.or(annotation(&cap, "osc_freq")?).unwrap_or(80.0);
            let model = match calibration {
                Some(p) => {
                    VwcModel::Calibrated(CalibrationCurve::from_json(&fs::read_to_string(p)?)?)
                }
                None => VwcModel::Topp,
            };
            let tag = TagConfig::new(d_soil).with_osc_freq(osc_freq);
            tag.validate(&cap.config)?;
            let geom = MeasurementGeometry {
                d_air,
                d_soil,
                range_res: cap.config.range_res,
            };
            let opts = EstimateOptions {
                ka_mode,
                threshold_db,
                ..EstimateOptions::default()
            };
            let est = estimate_vwc(&cap, &tag, &geom, &model, &opts)?;
            let record = ProcessRecord {
                detected: est.detected(),
                theta: est.theta,
                ka: est.ka,
                delta_tof_ns: est.delta_tof.map(|d| d * 1e9),
                snr_db: est.snr_db,
                flags: est.flags.iter().copied().collect(),
                mode: est.ka_mode,
                expected_bin: est.expected_bin,
                measured_bin: est.measured_bin,
                d_air,
                d_soil,
                scenario_digest: cap.scenario_digest.clone(),
                seed: cap.seed,
            };
            println!("{}", serde_json::to_string(&record)?);
            Ok(if est.detected() { 0 } else { EXIT_NOT_DETECTED })
        }
        Command::Calibrate { pairs, output } => {
            let pairs = read_pairs_csv(fs::File::open(pairs)?)?;
            let curve = fit_calibration(&pairs)?;
            fs::write(&output, curve.to_json()?)?;
            println!("{}", serde_json::to_string(&curve)?);
            Ok(0)
        }
        Command::Sweep { sweep, output, svg } => {
            let spec = SweepSpec::from_json(&fs::read_to_string(sweep)?)?;
            let rows = run_sweep(&spec)?;
            write_csv(&rows, fs::File::create(&output)?)?;
            if let Some(svg) = svg {
                fs::write(svg, snr_svg(&rows))?;
            }
            eprintln!("{} rows written to {}", rows.len(), output.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
