//! Minimum-cost paths through a terrain built from vesselness and a sigmoid
//! intensity transfer.
//!
//! Per-voxel cost is `C(s) = max(1, 1 / (ν(s)·T(I(s)) + ε))`, paths are
//! searched on the 26-connected voxel graph with edge cost
//! `C(s₂)·|s₂ − s₁|` in mm, and A* uses the Euclidean distance to the goal
//! as heuristic. Because every per-mm cost is at least 1 that heuristic is
//! consistent.

mod search;
mod sweep;

use std::fmt;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centerline::{Centerline, PathStats, Termination};
use crate::error::{Error, Result};
use crate::volume::{PointMm, ValueKind, Volume};

pub use search::{astar, dijkstra_oracle, distances_to_goal, heuristic_mm, VoxelPath};
pub use sweep::{run_sweep, sweep_csv, sweep_grid, SweepRow, SWEEP_CSV_HEADER};

/// Which side of the threshold the sigmoid favours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmoidOrientation {
    /// `1 / (1 + exp(a_s·(I − b_s)))`: bright voxels get a low transfer.
    PaperLiteral,
    /// `1 / (1 + exp(−a_s·(I − b_s)))`: bright voxels get a high transfer
    /// and therefore a low cost.
    #[default]
    BrightIsCheap,
}

impl fmt::Display for SigmoidOrientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SigmoidOrientation::PaperLiteral => "paper-literal",
            SigmoidOrientation::BrightIsCheap => "bright-is-cheap",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SigmoidParams {
    pub a_s: f64,
    pub b_s: f64,
    pub epsilon: f64,
    pub orientation: SigmoidOrientation,
}

impl Default for SigmoidParams {
    fn default() -> Self {
        SigmoidParams {
            a_s: 45.0,
            b_s: 0.60,
            epsilon: 1e-3,
            orientation: SigmoidOrientation::BrightIsCheap,
        }
    }
}

impl SigmoidParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(0.0..=1.0).contains(&self.b_s) {
            return Err(Error::InvalidParameter(format!("b_s must lie in [0, 1], got {}", self.b_s)));
        }
        if !self.a_s.is_finite() {
            return Err(Error::InvalidParameter("a_s must be finite".into()));
        }
        Ok(())
    }
}

const EXPONENT_LIMIT: f64 = 500.0;

pub fn sigmoid_transfer(intensity: f64, p: &SigmoidParams) -> f64 {
    let x = p.a_s * (intensity - p.b_s);
    let x = match p.orientation {
        SigmoidOrientation::PaperLiteral => x,
        SigmoidOrientation::BrightIsCheap => -x,
    };
    1.0 / (1.0 + x.clamp(-EXPONENT_LIMIT, EXPONENT_LIMIT).exp())
}

/// `max(1, 1 / (ν·T + ε))`.
pub fn voxel_cost(vesselness: f64, transfer: f64, epsilon: f64) -> f64 {
    (1.0 / (vesselness * transfer + epsilon)).max(1.0)
}

/// Terrain cost volume from normalised vesselness and normalised intensity.
pub fn build_cost_volume(
    vness_norm: &Volume,
    intensity_norm: &Volume,
    p: &SigmoidParams,
) -> Result<Volume> {
    p.validate()?;
    vness_norm.ensure_kind(ValueKind::NormalizedUnit)?;
    intensity_norm.ensure_kind(ValueKind::NormalizedUnit)?;
    vness_norm.ensure_same_geometry(intensity_norm)?;
    let data: Vec<f64> = vness_norm
        .data()
        .par_iter()
        .zip(intensity_norm.data().par_iter())
        .map(|(&nu, &i)| voxel_cost(nu, sigmoid_transfer(i, p), p.epsilon))
        .collect();
    Ok(Volume::new(*vness_norm.geometry(), data, ValueKind::Cost)?
        .with_metadata("sigmoid", serde_json::to_value(p)?))
}

/// Converts a voxel chain into a millimetre polyline.
///
/// Interior points are smoothed with a centred moving average of three
/// vertices; the end points stay on their voxel centres. The per-point
/// `vesselness` field holds the inverse cost `1/C` at each point.
pub fn refine_path(path: &VoxelPath, costs: &Volume) -> Result<Centerline> {
    costs.ensure_kind(ValueKind::Cost)?;
    if path.voxels.is_empty() {
        return Err(Error::InvalidParameter("empty voxel path".into()));
    }
    let g = costs.geometry();
    let raw: Vec<PointMm> = path.voxels.iter().map(|&v| g.voxel_to_mm(v)).collect();
    let n = raw.len();
    let points: Vec<PointMm> = (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                raw[i]
            } else {
                PointMm::from((raw[i - 1].coords + raw[i].coords + raw[i + 1].coords) / 3.0)
            }
        })
        .collect();
    let directions = (0..n)
        .map(|i| {
            let d = if n == 1 {
                Vector3::zeros()
            } else if i == 0 {
                points[1] - points[0]
            } else if i + 1 == n {
                points[n - 1] - points[n - 2]
            } else {
                points[i + 1] - points[i - 1]
            };
            d.try_normalize(0.0).unwrap_or_else(Vector3::z)
        })
        .collect();
    let vesselness = points
        .iter()
        .map(|p| costs.sample_trilinear(p).map(|c| 1.0 / c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Centerline {
        points,
        directions,
        vesselness,
        termination: Termination::FasciaReached,
        stats: Some(PathStats {
            total_cost: path.total_cost,
            expanded_nodes: path.expanded_nodes,
            elapsed_ms: path.elapsed.as_secs_f64() * 1e3,
        }),
    })
}
