//! Planar patches resampled orthogonally to the vessel direction.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::volume::{PointMm, Volume};

/// A square 2D image with isotropic sample spacing. Row `r`, column `c`
/// is at `values[r * width + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub width: usize,
    pub height: usize,
    pub resolution_mm: f64,
    pub values: Vec<f64>,
}

impl Patch {
    pub fn new(width: usize, height: usize, resolution_mm: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "patch of {width}x{height} given {} values",
                values.len()
            )));
        }
        Ok(Patch {
            width,
            height,
            resolution_mm,
            values,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        resolution_mm: f64,
        f: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(c, r));
            }
        }
        Patch {
            width,
            height,
            resolution_mm,
            values,
        }
    }

    #[inline]
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Patch centre in (column, row) sample coordinates.
    pub fn centre(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }

    /// (column, row) of the largest value; first in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}

/// A patch together with the frame it was sampled in. Column `c`, row `r`
/// maps to `centre + (c − c₀)·res·u + (r − r₀)·res·v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub patch: Patch,
    pub centre: PointMm,
    pub u_axis: Vector3<f64>,
    pub v_axis: Vector3<f64>,
    /// Fraction of samples that fell inside the volume.
    pub coverage: f64,
}

impl CrossSection {
    /// Millimetre position of an in-plane offset (in mm).
    pub fn to_world(&self, du: f64, dv: f64) -> PointMm {
        self.centre + self.u_axis * du + self.v_axis * dv
    }
}

/// Orthonormal in-plane basis for a plane with the given unit normal: `u`
/// is the coordinate axis least aligned with the normal (earliest on ties)
/// made orthogonal to it, and `v = normal × u`.
pub fn plane_basis(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let mut axis = 0;
    for a in 1..3 {
        if normal[a].abs() < normal[axis].abs() {
            axis = a;
        }
    }
    let mut e = Vector3::zeros();
    e[axis] = 1.0;
    let u = (e - normal * normal.dot(&e)).normalize();
    let v = normal.cross(&u).normalize();
    (u, v)
}

/// Samples a `side_mm` square patch at `resolution_mm` through `centre`,
/// orthogonal to `normal`. Samples outside the volume read as zero.
pub fn extract_cross_section(
    v: &Volume,
    centre: &PointMm,
    normal: &Vector3<f64>,
    side_mm: f64,
    resolution_mm: f64,
) -> Result<CrossSection> {
    if !(resolution_mm > 0.0) || !(side_mm >= 8.0 * resolution_mm) {
        return Err(Error::InvalidParameter(format!(
            "cross-section resolution {resolution_mm} mm too coarse for side {side_mm} mm"
        )));
    }
    let mut n = (side_mm / resolution_mm).round() as usize + 1;
    if n.is_multiple_of(2) {
        n += 1;
    }
    let (u, w) = plane_basis(&normal.normalize());
    let half = (n as f64 - 1.0) / 2.0;
    let mut inside = 0usize;
    let mut values = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let p = centre
                + u * ((c as f64 - half) * resolution_mm)
                + w * ((r as f64 - half) * resolution_mm);
            match v.try_sample(&p) {
                Some(x) => {
                    inside += 1;
                    values.push(x);
                }
                None => values.push(0.0),
            }
        }
    }
    let coverage = inside as f64 / (n * n) as f64;
    if coverage < 0.5 {
        return Err(Error::CrossSectionOutOfVolume(coverage));
    }
    Ok(CrossSection {
        patch: Patch {
            width: n,
            height: n,
            resolution_mm,
            values,
        },
        centre: *centre,
        u_axis: u,
        v_axis: w,
        coverage,
    })
}
