//! `vessel`: batch front end for normalisation, enhancement, tracking,
//! minimum-cost paths, evaluation, phantoms, parameter sweeps and the HTTP
//! service.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{FrangiSection, RunConfig, SigmoidSection, TrackerSection, WindowSection};

#[derive(Debug, Parser)]
#[command(name = "vessel", version, about = "Vessel centerline extraction toolkit")]
struct Cli {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Window a raw-stored volume into [0, 1] working units
    Normalize {
        /// Raw-stored input volume (header .json or .nrrd)
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output volume header path
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        window: WindowSection,
    },
    /// Frangi vesselness of a normalised volume, rescaled to [0, 1]
    Enhance {
        /// Normalised input volume
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output volume header path
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        frangi: FrangiSection,
    },
    /// Track a centerline from the first seed, heading for the second
    Track {
        /// Vesselness volume
        #[arg(long)]
        vesselness: Option<PathBuf>,
        /// Seed landmark file; the first point starts the track and an
        /// optional second point sets the initial direction
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Normalised intensity volume (checked for matching geometry)
        #[arg(long)]
        intensity: Option<PathBuf>,
        /// Fascia label volume; tracking stops on entering it
        #[arg(long)]
        fascia: Option<PathBuf>,
        /// Output centerline JSON
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tracker: TrackerSection,
    },
    /// Minimum-cost path between the first and last seeds
    Minpath {
        /// Normalised vesselness volume
        #[arg(long)]
        vesselness: Option<PathBuf>,
        /// Normalised intensity volume
        #[arg(long)]
        intensity: Option<PathBuf>,
        /// Seed landmark file with at least two points
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Output centerline JSON
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write zero as the search time so outputs are byte-reproducible
        #[arg(long)]
        no_timing: bool,
        #[command(flatten)]
        sigmoid: SigmoidSection,
    },
    /// Score centerlines against ground-truth landmarks (CSV)
    Eval {
        /// Ground-truth landmark file
        #[arg(long)]
        landmarks: Option<PathBuf>,
        /// Centerline JSON; repeat for several
        #[arg(long = "centerline")]
        centerlines: Vec<PathBuf>,
        /// Output CSV
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render a tube phantom and its axis landmarks
    Phantom {
        /// Phantom specification JSON ({"geometry": ..., "tube": ...})
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output volume header path
        #[arg(long)]
        output: Option<PathBuf>,
        /// Output landmark file (axis samples)
        #[arg(long)]
        landmarks: Option<PathBuf>,
        /// Landmark spacing along the axis in mm [default: 2]
        #[arg(long)]
        landmark_step_mm: Option<f64>,
        /// Write raw stored values under the HU window instead of [0, 1]
        /// units
        #[arg(long)]
        stored: bool,
        #[command(flatten)]
        window: WindowSection,
    },
    /// Minimum-cost paths over the sigmoid parameter grid (CSV)
    Sweep {
        /// Normalised vesselness volume
        #[arg(long)]
        vesselness: Option<PathBuf>,
        /// Normalised intensity volume
        #[arg(long)]
        intensity: Option<PathBuf>,
        /// Seed landmark file; the path joins the first and last points
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Ground-truth landmark file
        #[arg(long)]
        landmarks: Option<PathBuf>,
        /// Output CSV
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write every row, with node counts and path costs, as JSON
        #[arg(long)]
        rows_json: Option<PathBuf>,
        /// Comma-separated slopes [default: 7.5 to 45 in steps of 7.5]
        #[arg(long, value_delimiter = ',')]
        a_s: Option<Vec<f64>>,
        /// Comma-separated midpoints [default: 0.50 to 0.80 in steps of 0.05]
        #[arg(long, value_delimiter = ',')]
        b_s: Option<Vec<f64>>,
        /// Cost regulariser [default: 0.001, toolkit default]
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Start the HTTP service
    Serve {
        /// Bind address
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Port
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of static files served at the root
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", commands::describe(&e));
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    use commands as c;
    match cli.command {
        Command::Normalize { input, output, window } => c::normalize(&cfg, input, output, &window),
        Command::Enhance { input, output, frangi } => c::enhance(&cfg, input, output, &frangi),
        Command::Track {
            vesselness,
            seeds,
            intensity,
            fascia,
            output,
            tracker,
        } => c::track(&cfg, c::TrackFiles { vesselness, seeds, intensity, fascia, output }, &tracker),
        Command::Minpath {
            vesselness,
            intensity,
            seeds,
            output,
            no_timing,
            sigmoid,
        } => c::minpath(&cfg, vesselness, intensity, seeds, output, no_timing, &sigmoid),
        Command::Eval { landmarks, centerlines, output } => c::eval(&cfg, landmarks, centerlines, output),
        Command::Phantom {
            spec,
            output,
            landmarks,
            landmark_step_mm,
            stored,
            window,
        } => c::phantom(&cfg, spec, output, landmarks, landmark_step_mm, stored, &window),
        Command::Sweep {
            vesselness,
            intensity,
            seeds,
            landmarks,
            output,
            rows_json,
            a_s,
            b_s,
            epsilon,
        } => c::sweep(
            &cfg,
            c::SweepFiles { vesselness, intensity, seeds, landmarks, output, rows_json },
            a_s,
            b_s,
            epsilon,
        ),
        Command::Serve { host, port, static_dir } => c::serve(&host, port, static_dir),
    }
}
