//! Extracted centerlines and their JSON document form.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::PointMm;

/// Why a centerline ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    FasciaReached,
    LowVesselness,
    OutOfBounds,
    MaxIterations,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::FasciaReached => "fascia-reached",
            Termination::LowVesselness => "low-vesselness",
            Termination::OutOfBounds => "out-of-bounds",
            Termination::MaxIterations => "max-iterations",
        };
        f.write_str(s)
    }
}

/// Search statistics attached to centerlines produced by the minimum-cost
/// path search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub total_cost: f64,
    pub expanded_nodes: u64,
    /// Wall-clock search time. This is the only non-reproducible field of a
    /// centerline document.
    pub elapsed_ms: f64,
}

/// Ordered polyline with per-point direction and vesselness.
#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    pub points: Vec<PointMm>,
    pub directions: Vec<Vector3<f64>>,
    pub vesselness: Vec<f64>,
    pub termination: Termination,
    pub stats: Option<PathStats>,
}

#[derive(Serialize, Deserialize)]
struct CenterlineDoc {
    points_mm: Vec<[f64; 3]>,
    directions: Vec<[f64; 3]>,
    vesselness: Vec<f64>,
    termination: Termination,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    stats: Option<PathStats>,
}

impl Centerline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total polyline length in mm.
    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CenterlineDoc {
            points_mm: self.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            directions: self.directions.iter().map(|d| [d.x, d.y, d.z]).collect(),
            vesselness: self.vesselness.clone(),
            termination: self.termination,
            stats: self.stats,
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CenterlineDoc = serde_json::from_str(text)?;
        if doc.points_mm.is_empty() {
            return Err(Error::InvalidParameter("centerline has no points".into()));
        }
        if doc.directions.len() != doc.points_mm.len() || doc.vesselness.len() != doc.points_mm.len()
        {
            return Err(Error::InvalidParameter(
                "centerline arrays differ in length".into(),
            ));
        }
        Ok(Centerline {
            points: doc.points_mm.iter().map(|&p| PointMm::from(p)).collect(),
            directions: doc.directions.iter().map(|&d| Vector3::from(d)).collect(),
            vesselness: doc.vesselness,
            termination: doc.termination,
            stats: doc.stats,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
