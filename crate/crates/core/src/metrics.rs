//! Directed distances from sparse ground-truth landmarks to an extracted
//! polyline.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::centerline::Centerline;
use crate::error::{Error, Result};
use crate::volume::PointMm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LandmarkKind {
    Subcutaneous,
    Intramuscular,
}

/// Ground-truth points annotated along one vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub name: String,
    pub kind: LandmarkKind,
    pub points: Vec<PointMm>,
}

#[derive(Serialize, Deserialize)]
struct LandmarkDoc {
    name: String,
    kind: LandmarkKind,
    points_mm: Vec<[f64; 3]>,
}

impl LandmarkSet {
    pub fn new(name: impl Into<String>, kind: LandmarkKind, points: Vec<PointMm>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("landmark set has no points".into()));
        }
        Ok(LandmarkSet {
            name: name.into(),
            kind,
            points,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = LandmarkDoc {
            name: self.name.clone(),
            kind: self.kind,
            points_mm: self.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LandmarkDoc = serde_json::from_str(text)?;
        Self::new(doc.name, doc.kind, doc.points_mm.into_iter().map(PointMm::from).collect())
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub mean_distance_mm: f64,
    pub hausdorff_mm: f64,
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_to_segment(p: &PointMm, a: &PointMm, b: &PointMm) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to a polyline given by its vertices.
///
/// # Panics
/// If `vertices` is empty.
pub fn point_to_vertices(p: &PointMm, vertices: &[PointMm]) -> f64 {
    assert!(!vertices.is_empty(), "polyline has no vertices");
    if vertices.len() == 1 {
        return (p - vertices[0]).norm();
    }
    vertices
        .windows(2)
        .map(|w| point_to_segment(p, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

pub fn point_to_polyline(p: &PointMm, line: &Centerline) -> f64 {
    point_to_vertices(p, &line.points)
}

/// Mean and maximum landmark-to-polyline distance.
pub fn evaluate_points(gt: &[PointMm], vertices: &[PointMm]) -> Result<PathMetrics> {
    if gt.is_empty() || vertices.is_empty() {
        return Err(Error::InvalidParameter("evaluation needs non-empty inputs".into()));
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for p in gt {
        let d = point_to_vertices(p, vertices);
        sum += d;
        max = max.max(d);
    }
    Ok(PathMetrics {
        mean_distance_mm: sum / gt.len() as f64,
        hausdorff_mm: max,
    })
}

pub fn evaluate(gt: &LandmarkSet, line: &Centerline) -> Result<PathMetrics> {
    evaluate_points(&gt.points, &line.points)
}

/// One CSV report row per evaluated path.
pub fn metrics_csv(rows: &[(String, PathMetrics)]) -> String {
    let mut out = String::from("path,mean_euclidean_mm,hausdorff_mm\n");
    for (name, m) in rows {
        let _ = writeln!(out, "{name},{},{}", m.mean_distance_mm, m.hausdorff_mm);
    }
    out
}
