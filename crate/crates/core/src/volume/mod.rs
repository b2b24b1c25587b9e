//! Anisotropic voxel grids and differential sampling.
//!
//! Voxel `(i, j, k)` sits at `origin + spacing ⊙ (i, j, k)` millimetres and is
//! stored at linear offset `i + nx·(j + ny·k)` (x fastest, then y, then z).
//! Sampling functions take millimetre positions; [`Volume::hessian_at_scale`]
//! and the minimum-path search address voxels by index.

mod gaussian;
mod io;
mod nrrd;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gaussian::{hessian_volume, DerivativeKernel, HessianField};
pub use io::{header_path, load_volume, payload_path, save_volume, volume_from_parts, Dtype, VolumeHeader};
pub use nrrd::load_nrrd;

/// A position in the physical (millimetre) frame of a volume.
pub type PointMm = Point3<f64>;

/// Relative slack allowed when deciding whether a continuous index lies on
/// the boundary of the grid.
const BOUNDS_EPS: f64 = 1e-9;

/// What the stored values of a [`Volume`] represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueKind {
    RawStored,
    Hounsfield,
    NormalizedUnit,
    Vesselness,
    Cost,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::RawStored => "raw-stored",
            ValueKind::Hounsfield => "hounsfield",
            ValueKind::NormalizedUnit => "normalized-unit",
            ValueKind::Vesselness => "vesselness",
            ValueKind::Cost => "cost",
        };
        f.write_str(s)
    }
}

/// Grid shape and its placement in physical space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], origin_mm: [f64; 3]) -> Result<Self> {
        let g = Geometry {
            dims,
            spacing_mm,
            origin_mm,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 2) {
            return Err(Error::Geometry(format!(
                "every axis needs at least 2 voxels, got {:?}",
                self.dims
            )));
        }
        if self.spacing_mm.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Geometry(format!(
                "spacing must be positive, got {:?}",
                self.spacing_mm
            )));
        }
        if self.origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::Geometry("origin must be finite".into()));
        }
        self.dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Geometry("voxel count overflows".into()))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing_mm.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing_mm.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    pub fn offset(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn index_of(&self, offset: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [offset % nx, (offset / nx) % ny, offset / (nx * ny)]
    }

    pub fn contains_index(&self, idx: [i64; 3]) -> bool {
        (0..3).all(|a| idx[a] >= 0 && (idx[a] as usize) < self.dims[a])
    }

    /// Millimetre position of a voxel centre.
    pub fn voxel_to_mm(&self, idx: [usize; 3]) -> PointMm {
        Point3::new(
            self.origin_mm[0] + self.spacing_mm[0] * idx[0] as f64,
            self.origin_mm[1] + self.spacing_mm[1] * idx[1] as f64,
            self.origin_mm[2] + self.spacing_mm[2] * idx[2] as f64,
        )
    }

    /// Continuous index coordinates of a millimetre position.
    pub fn mm_to_continuous(&self, p: &PointMm) -> [f64; 3] {
        [
            (p.x - self.origin_mm[0]) / self.spacing_mm[0],
            (p.y - self.origin_mm[1]) / self.spacing_mm[1],
            (p.z - self.origin_mm[2]) / self.spacing_mm[2],
        ]
    }

    /// Whether `p` lies inside the box spanned by the first and last voxel
    /// centres.
    pub fn contains(&self, p: &PointMm) -> bool {
        let c = self.mm_to_continuous(p);
        (0..3).all(|a| {
            let hi = (self.dims[a] - 1) as f64;
            c[a] >= -BOUNDS_EPS && c[a] <= hi + BOUNDS_EPS * hi.max(1.0)
        })
    }

    /// Nearest voxel to `p`, or `None` when `p` is outside the grid.
    pub fn nearest_voxel(&self, p: &PointMm) -> Option<[usize; 3]> {
        if !self.contains(p) {
            return None;
        }
        let c = self.mm_to_continuous(p);
        let mut idx = [0usize; 3];
        for a in 0..3 {
            idx[a] = (c[a].round().max(0.0) as usize).min(self.dims[a] - 1);
        }
        Some(idx)
    }

    /// Physical extent `[min, max]` of the voxel-centre box.
    pub fn bounds_mm(&self) -> (PointMm, PointMm) {
        let lo = Point3::from(self.origin_mm);
        let hi = self.voxel_to_mm([self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1]);
        (lo, hi)
    }
}

/// HU windowing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    pub window_center: f64,
    pub window_width: f64,
    pub rescale_intercept: f64,
    pub rescale_slope: f64,
}

impl Default for WindowParams {
    /// Abdominal CTA windowing: centre 60 HU, width 400 HU, intercept
    /// -1024 HU, slope 1.
    fn default() -> Self {
        WindowParams {
            window_center: 60.0,
            window_width: 400.0,
            rescale_intercept: -1024.0,
            rescale_slope: 1.0,
        }
    }
}

impl WindowParams {
    /// Maps `[0, 1]` onto itself.
    pub fn identity() -> Self {
        WindowParams {
            window_center: 0.5,
            window_width: 1.0,
            rescale_intercept: 0.0,
            rescale_slope: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "window width must be positive, got {}",
                self.window_width
            )));
        }
        if self.rescale_slope == 0.0 || !self.rescale_slope.is_finite() {
            return Err(Error::InvalidParameter("rescale slope must be non-zero".into()));
        }
        Ok(())
    }

    /// Stored value → HU → `[0, 1]`, clamped outside the window.
    #[inline]
    pub fn apply(&self, stored: f64) -> f64 {
        let hu = stored * self.rescale_slope + self.rescale_intercept;
        let low = self.window_center - self.window_width / 2.0;
        ((hu - low) / self.window_width).clamp(0.0, 1.0)
    }

    /// Stored value whose windowed output is `unit` (for `unit` in `[0, 1]`).
    pub fn invert(&self, unit: f64) -> f64 {
        let hu = self.window_center - self.window_width / 2.0 + unit * self.window_width;
        (hu - self.rescale_intercept) / self.rescale_slope
    }
}

/// An immutable scalar grid with physical geometry. Values are held in
/// double precision; files store them as `f32` whenever that is lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geometry: Geometry,
    data: Vec<f64>,
    kind: ValueKind,
    metadata: BTreeMap<String, serde_json::Value>,
}

impl Volume {
    pub fn new(geometry: Geometry, data: Vec<f64>, kind: ValueKind) -> Result<Self> {
        geometry.validate()?;
        if data.len() != geometry.len() {
            return Err(Error::PayloadSizeMismatch {
                expected: geometry.len(),
                found: data.len(),
            });
        }
        if kind == ValueKind::NormalizedUnit {
            if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidParameter(format!(
                    "normalized-unit volume holds {bad}, outside [0, 1]"
                )));
            }
        }
        if kind == ValueKind::Cost {
            if let Some(bad) = data.iter().find(|v| !(**v >= 1.0)) {
                return Err(Error::InvalidParameter(format!(
                    "cost volume holds {bad}; costs must be at least 1"
                )));
            }
        }
        Ok(Volume {
            geometry,
            data,
            kind,
            metadata: BTreeMap::new(),
        })
    }

    pub fn filled(geometry: Geometry, value: f64, kind: ValueKind) -> Result<Self> {
        Volume::new(geometry, vec![value; geometry.len()], kind)
    }

    /// Builds a volume by evaluating `f` at every voxel centre (in mm).
    pub fn from_fn(
        geometry: Geometry,
        kind: ValueKind,
        mut f: impl FnMut(PointMm) -> f64,
    ) -> Result<Self> {
        geometry.validate()?;
        let mut data = Vec::with_capacity(geometry.len());
        for k in 0..geometry.dims[2] {
            for j in 0..geometry.dims[1] {
                for i in 0..geometry.dims[0] {
                    data.push(f(geometry.voxel_to_mm([i, j, k])));
                }
            }
        }
        Volume::new(geometry, data, kind)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.geometry.spacing_mm
    }

    pub fn origin(&self) -> [f64; 3] {
        self.geometry.origin_mm
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn metadata(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.metadata
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: serde_json::Value) -> Self {
        self.metadata.insert(key.into(), value);
        self
    }

    pub fn set_metadata(&mut self, metadata: BTreeMap<String, serde_json::Value>) {
        self.metadata = metadata;
    }

    #[inline]
    pub fn get(&self, idx: [usize; 3]) -> f64 {
        self.data[self.geometry.offset(idx)]
    }

    pub fn same_geometry(&self, other: &Volume) -> bool {
        self.geometry == other.geometry
    }

    pub fn ensure_same_geometry(&self, other: &Volume) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }

    pub fn ensure_kind(&self, expected: ValueKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::ValueKind {
                expected,
                found: self.kind,
            })
        }
    }

    pub fn contains(&self, p: &PointMm) -> bool {
        self.geometry.contains(p)
    }

    /// Minimum and maximum stored value.
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Trilinear interpolation at a millimetre position.
    pub fn sample_trilinear(&self, p: &PointMm) -> Result<f64> {
        if !self.geometry.contains(p) {
            return Err(Error::OutOfBounds([p.x, p.y, p.z]));
        }
        Ok(self.trilinear_unchecked(self.geometry.mm_to_continuous(p)))
    }

    /// Trilinear interpolation that yields `None` outside the grid.
    pub fn try_sample(&self, p: &PointMm) -> Option<f64> {
        self.geometry
            .contains(p)
            .then(|| self.trilinear_unchecked(self.geometry.mm_to_continuous(p)))
    }

    fn trilinear_unchecked(&self, c: [f64; 3]) -> f64 {
        let dims = self.geometry.dims;
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let hi = (dims[a] - 2) as f64;
            let f = c[a].floor().clamp(0.0, hi);
            base[a] = f as usize;
            frac[a] = (c[a] - f).clamp(0.0, 1.0);
        }
        let [i, j, k] = base;
        let [tx, ty, tz] = frac;
        let v = |di: usize, dj: usize, dk: usize| self.get([i + di, j + dj, k + dk]);
        let c00 = v(0, 0, 0) * (1.0 - tx) + v(1, 0, 0) * tx;
        let c10 = v(0, 1, 0) * (1.0 - tx) + v(1, 1, 0) * tx;
        let c01 = v(0, 0, 1) * (1.0 - tx) + v(1, 0, 1) * tx;
        let c11 = v(0, 1, 1) * (1.0 - tx) + v(1, 1, 1) * tx;
        let c0 = c00 * (1.0 - ty) + c10 * ty;
        let c1 = c01 * (1.0 - ty) + c11 * ty;
        c0 * (1.0 - tz) + c1 * tz
    }

    /// Default finite-difference step: half the smallest spacing.
    pub fn default_gradient_step(&self) -> f64 {
        0.5 * self.geometry.min_spacing()
    }

    /// Central-difference gradient (per mm) of the interpolated field.
    pub fn gradient_at(&self, p: &PointMm, h: f64) -> Result<Vector3<f64>> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gradient step must be positive, got {h}"
            )));
        }
        let mut g = Vector3::zeros();
        for a in 0..3 {
            let mut e = Vector3::zeros();
            e[a] = h;
            let fwd = self.sample_trilinear(&(p + e))?;
            let bwd = self.sample_trilinear(&(p - e))?;
            g[a] = (fwd - bwd) / (2.0 * h);
        }
        Ok(g)
    }

    /// Hessian (per mm²) of the volume smoothed with an isotropic Gaussian
    /// of standard deviation `sigma_mm`, evaluated at a voxel.
    pub fn hessian_at_scale(&self, idx: [usize; 3], sigma_mm: f64) -> Result<Matrix3<f64>> {
        gaussian::hessian_at(self, idx, sigma_mm)
    }

    /// Applies `f` to every value, producing a volume of kind `kind`.
    pub fn map(&self, kind: ValueKind, f: impl Fn(f64) -> f64 + Sync) -> Result<Volume> {
        use rayon::prelude::*;
        let data: Vec<f64> = self.data.par_iter().map(|&v| f(v)).collect();
        Volume::new(self.geometry, data, kind)
    }
}

/// Windows a raw-stored volume into `[0, 1]` working units.
pub fn normalize_hu(v: &Volume, window: &WindowParams) -> Result<Volume> {
    v.ensure_kind(ValueKind::RawStored)?;
    window.validate()?;
    let w = *window;
    let out = v.map(ValueKind::NormalizedUnit, move |s| w.apply(s))?;
    Ok(out.with_metadata("window", serde_json::to_value(w)?))
}
