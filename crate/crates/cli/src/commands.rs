//! Command implementations. Each reads its inputs, calls the library and
//! writes its outputs; nothing is printed except log lines.

use std::fmt;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use vessel_core::metrics::{evaluate, metrics_csv, LandmarkKind, LandmarkSet};
use vessel_core::minpath::{run_sweep, sweep_csv, sweep_grid, SigmoidParams};
use vessel_core::phantom::{generate, TubeSpec};
use vessel_core::pipeline::{run_minpath, run_track, MinpathOptions};
use vessel_core::tracker::FasciaMask;
use vessel_core::vesselness::{enhance_volume, enhance_volume_multiscale, normalize_vesselness};
use vessel_core::volume::{load_nrrd, load_volume, normalize_hu, save_volume};
use vessel_core::{Centerline, Error, Geometry, ValueKind, Volume};

use crate::config::{FrangiSection, RunConfig, SigmoidSection, TrackerSection, WindowSection};

/// A required input was given neither as a flag nor in the configuration.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// 2 for usage errors, 4 for computations that could not complete, 3 for
/// everything else (bad files, parameters or coordinates).
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return if err.is_data_error() { 3 } else { 4 };
        }
    }
    3
}

/// The error chain joined with `: `, skipping causes already spelled out by
/// the message before them.
pub fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn required(flag: Option<PathBuf>, config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| Usage(format!("--{name} is required (flag or config files.{name})")).into())
}

fn read_volume(path: &Path) -> Result<Volume> {
    let v = if path.extension().is_some_and(|e| e == "nrrd") {
        load_nrrd(path)
    } else {
        load_volume(path)
    };
    v.with_context(|| format!("loading volume {}", path.display()))
}

fn write_volume(v: &Volume, path: &Path) -> Result<()> {
    save_volume(v, path).with_context(|| format!("writing volume {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn read_landmarks(path: &Path) -> Result<LandmarkSet> {
    LandmarkSet::load(path).with_context(|| format!("loading landmarks {}", path.display()))
}

pub fn normalize(cfg: &RunConfig, input: Option<PathBuf>, output: Option<PathBuf>, w: &WindowSection) -> Result<()> {
    let input = required(input, &cfg.files.input, "input")?;
    let output = required(output, &cfg.files.output, "output")?;
    let window = cfg.window(w);
    let v = read_volume(&input)?;
    let out = normalize_hu(&v, &window).with_context(|| format!("normalising {}", input.display()))?;
    write_volume(&out, &output)
}

pub fn enhance(cfg: &RunConfig, input: Option<PathBuf>, output: Option<PathBuf>, f: &FrangiSection) -> Result<()> {
    let input = required(input, &cfg.files.input, "input")?;
    let output = required(output, &cfg.files.output, "output")?;
    let (preset, params, scales) = cfg.frangi(f)?;
    let v = read_volume(&input)?;
    log::info!("enhancing {} with preset {preset}", input.display());
    let raw = match &scales {
        Some(s) => enhance_volume_multiscale(&v, &params, s),
        None => enhance_volume(&v, &params),
    }
    .with_context(|| format!("enhancing {}", input.display()))?;
    let out = normalize_vesselness(&raw)?.with_metadata("preset", preset.into());
    write_volume(&out, &output)
}

pub struct TrackFiles {
    pub vesselness: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub intensity: Option<PathBuf>,
    pub fascia: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

pub fn track(cfg: &RunConfig, files: TrackFiles, t: &TrackerSection) -> Result<()> {
    let ves_path = required(files.vesselness, &cfg.files.vesselness, "vesselness")?;
    let seeds_path = required(files.seeds, &cfg.files.seeds, "seeds")?;
    let output = required(files.output, &cfg.files.output, "output")?;
    let tracker = cfg.tracker(t);
    let ves = read_volume(&ves_path)?;
    let intensity = files
        .intensity
        .or_else(|| cfg.files.intensity.clone())
        .map(|p| read_volume(&p))
        .transpose()?;
    let fascia = files
        .fascia
        .or_else(|| cfg.files.fascia.clone())
        .map(|p| read_volume(&p).map(FasciaMask::new))
        .transpose()?;
    let seeds = read_landmarks(&seeds_path)?;
    let line = run_track(
        &ves,
        intensity.as_ref(),
        fascia.as_ref(),
        &seeds.points[0],
        seeds.points.get(1),
        &tracker,
    )
    .with_context(|| format!("tracking from the first seed of {}", seeds_path.display()))?;
    log::info!("{} points, {}", line.len(), line.termination);
    write_text(&output, &line.to_json()?)
}

pub fn minpath(
    cfg: &RunConfig,
    vesselness: Option<PathBuf>,
    intensity: Option<PathBuf>,
    seeds: Option<PathBuf>,
    output: Option<PathBuf>,
    no_timing: bool,
    s: &SigmoidSection,
) -> Result<()> {
    let ves_path = required(vesselness, &cfg.files.vesselness, "vesselness")?;
    let int_path = required(intensity, &cfg.files.intensity, "intensity")?;
    let seeds_path = required(seeds, &cfg.files.seeds, "seeds")?;
    let output = required(output, &cfg.files.output, "output")?;
    let opts = MinpathOptions {
        sigmoid: cfg.sigmoid(s),
        timing: !no_timing && cfg.timing.unwrap_or(true),
    };
    opts.sigmoid.validate()?;
    let (ves, int) = (read_volume(&ves_path)?, read_volume(&int_path)?);
    let seeds = read_landmarks(&seeds_path)?;
    if seeds.points.len() < 2 {
        return Err(Error::InvalidParameter(format!("{} needs at least two points", seeds_path.display())).into());
    }
    let (start, goal) = (&seeds.points[0], &seeds.points[seeds.points.len() - 1]);
    let line = run_minpath(&ves, &int, start, goal, &opts)
        .with_context(|| format!("searching between the end seeds of {}", seeds_path.display()))?;
    if let Some(st) = &line.stats {
        log::info!("cost {:.3}, {} nodes expanded", st.total_cost, st.expanded_nodes);
    }
    write_text(&output, &line.to_json()?)
}

pub fn eval(cfg: &RunConfig, landmarks: Option<PathBuf>, centerlines: Vec<PathBuf>, output: Option<PathBuf>) -> Result<()> {
    let gt_path = required(landmarks, &cfg.files.landmarks, "landmarks")?;
    let output = required(output, &cfg.files.output, "output")?;
    let centerlines = if centerlines.is_empty() {
        cfg.files.centerlines.clone().unwrap_or_default()
    } else {
        centerlines
    };
    if centerlines.is_empty() {
        return Err(Usage("at least one --centerline is required".into()).into());
    }
    let gt = read_landmarks(&gt_path)?;
    let mut rows = Vec::with_capacity(centerlines.len());
    for p in &centerlines {
        let line = Centerline::load(p).with_context(|| format!("loading centerline {}", p.display()))?;
        let m = evaluate(&gt, &line)?;
        log::info!("{}: mean {:.4} mm, hausdorff {:.4} mm", p.display(), m.mean_distance_mm, m.hausdorff_mm);
        rows.push((p.display().to_string(), m));
    }
    write_text(&output, &metrics_csv(&rows))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhantomFile {
    geometry: Geometry,
    tube: TubeSpec,
}

pub fn phantom(
    cfg: &RunConfig,
    spec: Option<PathBuf>,
    output: Option<PathBuf>,
    landmarks: Option<PathBuf>,
    landmark_step_mm: Option<f64>,
    stored: bool,
    w: &WindowSection,
) -> Result<()> {
    let spec_path = required(spec, &cfg.files.spec, "spec")?;
    let output = required(output, &cfg.files.output, "output")?;
    let lm_path = required(landmarks, &cfg.files.landmarks, "landmarks")?;
    let step = landmark_step_mm.or(cfg.phantom.landmark_step_mm).unwrap_or(2.0);
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("landmark step must be positive, got {step}")).into());
    }
    let text = fs::read_to_string(&spec_path).map_err(|e| Error::Io {
        path: spec_path.clone(),
        source: e,
    })?;
    let doc: PhantomFile = serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("parsing phantom spec {}", spec_path.display()))?;
    let ph = generate(&doc.tube, doc.geometry)?;
    let volume = if stored {
        let window = cfg.window(w);
        window.validate()?;
        ph.volume
            .map(ValueKind::RawStored, move |u| window.invert(u))?
            .with_metadata("window", serde_json::to_value(window)?)
    } else {
        ph.volume.clone()
    };
    write_volume(&volume, &output)?;
    let name = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "phantom".into());
    let set = LandmarkSet::new(name, LandmarkKind::Subcutaneous, ph.landmarks(step))?;
    set.save(&lm_path)
        .with_context(|| format!("writing landmarks {}", lm_path.display()))
}

pub struct SweepFiles {
    pub vesselness: Option<PathBuf>,
    pub intensity: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub landmarks: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub rows_json: Option<PathBuf>,
}

pub fn sweep(
    cfg: &RunConfig,
    files: SweepFiles,
    a_s: Option<Vec<f64>>,
    b_s: Option<Vec<f64>>,
    epsilon: Option<f64>,
) -> Result<()> {
    let ves_path = required(files.vesselness, &cfg.files.vesselness, "vesselness")?;
    let int_path = required(files.intensity, &cfg.files.intensity, "intensity")?;
    let seeds_path = required(files.seeds, &cfg.files.seeds, "seeds")?;
    let gt_path = required(files.landmarks, &cfg.files.landmarks, "landmarks")?;
    let output = required(files.output, &cfg.files.output, "output")?;
    let rows_json = files.rows_json.or_else(|| cfg.files.rows_json.clone());

    let a_s = a_s.or_else(|| cfg.sweep.a_s.clone());
    let b_s = b_s.or_else(|| cfg.sweep.b_s.clone());
    let grid = match (a_s, b_s) {
        (None, None) => sweep_grid(),
        (a, b) => {
            let default = sweep_grid();
            let mut a_default: Vec<f64> = default.iter().map(|c| c.0).collect();
            a_default.dedup();
            let b_default: Vec<f64> = default.iter().take(7).map(|c| c.1).collect();
            let (a, b) = (a.unwrap_or(a_default), b.unwrap_or(b_default));
            a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
        }
    };
    let base: SigmoidParams = cfg.sigmoid(&SigmoidSection {
        epsilon,
        ..Default::default()
    });
    for &(a, b) in &grid {
        SigmoidParams { a_s: a, b_s: b, ..base }.validate()?;
    }

    let (ves, int) = (read_volume(&ves_path)?, read_volume(&int_path)?);
    let seeds = read_landmarks(&seeds_path)?;
    let gt = read_landmarks(&gt_path)?;
    let g = ves.geometry();
    let voxel = |i: usize| {
        let p = &seeds.points[i];
        g.nearest_voxel(p).ok_or(Error::OutOfBounds([p.x, p.y, p.z]))
    };
    let (start, goal) = (voxel(0)?, voxel(seeds.points.len() - 1)?);
    log::info!("sweeping {} parameter cells", grid.len());
    let rows = run_sweep(&ves, &int, start, goal, &gt.points, &base, &grid)
        .with_context(|| format!("sweeping between the end seeds of {}", seeds_path.display()))?;
    write_text(&output, &sweep_csv(&rows))?;
    if let Some(p) = rows_json {
        write_text(&p, &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    }
    Ok(())
}

pub fn serve(host: &str, port: u16, static_dir: Option<PathBuf>) -> Result<()> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|_| Usage(format!("invalid bind address {host}:{port}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(vessel_service::serve(addr, static_dir))
        .with_context(|| format!("serving on {addr}"))
}
