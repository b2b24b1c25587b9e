//! Run configuration file. Every field is optional; command-line flags
//! take precedence over anything set here.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Deserialize;
use vessel_core::minpath::{SigmoidOrientation, SigmoidParams};
use vessel_core::tracker::TrackerConfig;
use vessel_core::vesselness::{FrangiParams, Polarity};
use vessel_core::{Error, WindowParams};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub files: Files,
    pub window: WindowSection,
    pub frangi: FrangiSection,
    pub tracker: TrackerSection,
    pub sigmoid: SigmoidSection,
    pub sweep: SweepSection,
    pub phantom: PhantomSection,
    /// Record search times in minimum-path outputs.
    pub timing: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Files {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub vesselness: Option<PathBuf>,
    pub intensity: Option<PathBuf>,
    pub fascia: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub landmarks: Option<PathBuf>,
    pub centerlines: Option<Vec<PathBuf>>,
    pub spec: Option<PathBuf>,
    pub rows_json: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    /// Window centre in HU [default: 60, published]
    #[arg(long)]
    pub window_center: Option<f64>,
    /// Window width in HU [default: 400, published]
    #[arg(long)]
    pub window_width: Option<f64>,
    /// HU of a stored zero [default: -1024, published]
    #[arg(long, allow_negative_numbers = true)]
    pub rescale_intercept: Option<f64>,
    /// HU per stored unit [default: 1, published]
    #[arg(long)]
    pub rescale_slope: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct FrangiSection {
    /// Parameter preset: subcutaneous (alpha 0.5, beta 10, c 500) or
    /// intramuscular (alpha 0.5, beta 0.5, c 100) [default: subcutaneous,
    /// published values]
    #[arg(long)]
    pub preset: Option<String>,
    /// Plate/line sensitivity [default: from preset]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Blob sensitivity [default: from preset]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Structure-norm sensitivity [default: from preset]
    #[arg(long)]
    pub c: Option<f64>,
    /// Gaussian scale in mm [default: 1.0, toolkit default]
    #[arg(long)]
    pub sigma_mm: Option<f64>,
    /// Comma-separated scales for a multi-scale maximum; replaces --sigma-mm
    /// [default: single scale]
    #[arg(long, value_delimiter = ',')]
    pub scales_mm: Option<Vec<f64>>,
    /// bright-on-dark or dark-on-bright [default: bright-on-dark]
    #[arg(long, value_parser = parse_kebab::<Polarity>)]
    pub polarity: Option<Polarity>,
}

#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerSection {
    /// Advance per iteration in mm [default: 1, published]
    #[arg(long)]
    pub step_delta_mm: Option<f64>,
    /// Side of the gradient window in mm [default: 4, published]
    #[arg(long)]
    pub window_side_mm: Option<f64>,
    /// Ridge correction every N iterations [default: 3, published]
    #[arg(long)]
    pub correction_interval: Option<usize>,
    /// Largest turn between steps in degrees [default: 60, published]
    #[arg(long)]
    pub max_turn_deg: Option<f64>,
    /// Side of the correction cross-section in mm [default: 6, toolkit default]
    #[arg(long)]
    pub cross_section_side_mm: Option<f64>,
    /// Cross-section sample spacing in mm [default: 0.25, toolkit default]
    #[arg(long)]
    pub cross_section_resolution_mm: Option<f64>,
    /// Vesselness below which tracking stops [default: 0.01, toolkit default]
    #[arg(long)]
    pub min_vesselness: Option<f64>,
    /// Iteration cap [default: 500, toolkit default]
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct SigmoidSection {
    /// Sigmoid slope [default: 45, published best cell]
    #[arg(long)]
    pub a_s: Option<f64>,
    /// Sigmoid midpoint in normalised intensity [default: 0.60, published best cell]
    #[arg(long)]
    pub b_s: Option<f64>,
    /// Cost regulariser [default: 0.001, toolkit default]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// bright-is-cheap or paper-literal [default: bright-is-cheap]
    #[arg(long, value_parser = parse_kebab::<SigmoidOrientation>)]
    pub orientation: Option<SigmoidOrientation>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub a_s: Option<Vec<f64>>,
    pub b_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub landmark_step_mm: Option<f64>,
}

/// Parses a kebab-case enum name the way the configuration file spells it.
pub fn parse_kebab<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn window(&self, flags: &WindowSection) -> WindowParams {
        let d = WindowParams::default();
        let (f, c) = (flags, &self.window);
        WindowParams {
            window_center: f.window_center.or(c.window_center).unwrap_or(d.window_center),
            window_width: f.window_width.or(c.window_width).unwrap_or(d.window_width),
            rescale_intercept: f
                .rescale_intercept
                .or(c.rescale_intercept)
                .unwrap_or(d.rescale_intercept),
            rescale_slope: f.rescale_slope.or(c.rescale_slope).unwrap_or(d.rescale_slope),
        }
    }

    pub fn tracker(&self, flags: &TrackerSection) -> TrackerConfig {
        let d = TrackerConfig::default();
        let (f, c) = (flags, &self.tracker);
        TrackerConfig {
            step_delta_mm: f.step_delta_mm.or(c.step_delta_mm).unwrap_or(d.step_delta_mm),
            window_side_mm: f.window_side_mm.or(c.window_side_mm).unwrap_or(d.window_side_mm),
            correction_interval: f
                .correction_interval
                .or(c.correction_interval)
                .unwrap_or(d.correction_interval),
            max_turn_deg: f.max_turn_deg.or(c.max_turn_deg).unwrap_or(d.max_turn_deg),
            cross_section_side_mm: f
                .cross_section_side_mm
                .or(c.cross_section_side_mm)
                .unwrap_or(d.cross_section_side_mm),
            cross_section_resolution_mm: f
                .cross_section_resolution_mm
                .or(c.cross_section_resolution_mm)
                .unwrap_or(d.cross_section_resolution_mm),
            min_vesselness: f.min_vesselness.or(c.min_vesselness).unwrap_or(d.min_vesselness),
            max_iterations: f.max_iterations.or(c.max_iterations).unwrap_or(d.max_iterations),
        }
    }

    /// Preset name, resolved parameters and the optional scale list.
    pub fn frangi(&self, flags: &FrangiSection) -> Result<(String, FrangiParams, Option<Vec<f64>>), Error> {
        let (f, c) = (flags, &self.frangi);
        let preset = f
            .preset
            .clone()
            .or_else(|| c.preset.clone())
            .unwrap_or_else(|| "subcutaneous".into());
        let d = FrangiParams::preset(&preset)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset {preset:?}")))?;
        let p = FrangiParams {
            alpha: f.alpha.or(c.alpha).unwrap_or(d.alpha),
            beta: f.beta.or(c.beta).unwrap_or(d.beta),
            c: f.c.or(c.c).unwrap_or(d.c),
            sigma_mm: f.sigma_mm.or(c.sigma_mm).unwrap_or(d.sigma_mm),
            polarity: f.polarity.or(c.polarity).unwrap_or(d.polarity),
        };
        Ok((preset, p, f.scales_mm.clone().or_else(|| c.scales_mm.clone())))
    }

    pub fn sigmoid(&self, flags: &SigmoidSection) -> SigmoidParams {
        let d = SigmoidParams::default();
        let (f, c) = (flags, &self.sigmoid);
        SigmoidParams {
            a_s: f.a_s.or(c.a_s).unwrap_or(d.a_s),
            b_s: f.b_s.or(c.b_s).unwrap_or(d.b_s),
            epsilon: f.epsilon.or(c.epsilon).unwrap_or(d.epsilon),
            orientation: f.orientation.or(c.orientation).unwrap_or(d.orientation),
        }
    }
}
