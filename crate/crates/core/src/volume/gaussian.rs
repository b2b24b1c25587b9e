//! Separable Gaussian derivative filtering in millimetre units.
//!
//! Kernels are sampled per axis at that axis' spacing, truncated at
//! `ceil(3σ / spacing)` voxels and renormalised so that they reproduce the
//! exact derivatives of polynomials up to degree two. Borders use
//! half-sample symmetric reflection.

use nalgebra::Matrix3;
use rayon::prelude::*;

use super::{Geometry, Volume};
use crate::error::{Error, Result};

/// Sampled Gaussian (order 0), first- and second-derivative kernels along
/// one axis, stored as correlation weights for offsets `-radius..=radius`.
#[derive(Debug, Clone)]
pub struct DerivativeKernel {
    pub radius: usize,
    pub weights: [Vec<f64>; 3],
}

impl DerivativeKernel {
    pub fn new(sigma_mm: f64, spacing_mm: f64) -> Self {
        let radius = ((3.0 * sigma_mm / spacing_mm).ceil() as usize).max(1);
        let xs: Vec<f64> = (-(radius as i64)..=radius as i64)
            .map(|k| k as f64 * spacing_mm)
            .collect();
        let s2 = sigma_mm * sigma_mm;
        let g: Vec<f64> = xs.iter().map(|x| (-x * x / (2.0 * s2)).exp()).collect();

        let total: f64 = g.iter().sum();
        let w0: Vec<f64> = g.iter().map(|v| v / total).collect();

        let raw1: Vec<f64> = xs.iter().zip(&g).map(|(x, g)| x / s2 * g).collect();
        let m1: f64 = raw1.iter().zip(&xs).map(|(w, x)| w * x).sum();
        let w1: Vec<f64> = raw1.iter().map(|w| w / m1).collect();

        let raw2: Vec<f64> = xs
            .iter()
            .zip(&g)
            .map(|(x, g)| (x * x / (s2 * s2) - 1.0 / s2) * g)
            .collect();
        let mean = raw2.iter().sum::<f64>() / raw2.len() as f64;
        let centred: Vec<f64> = raw2.iter().map(|w| w - mean).collect();
        let m2: f64 = centred.iter().zip(&xs).map(|(w, x)| w * x * x / 2.0).sum();
        let w2: Vec<f64> = centred.iter().map(|w| w / m2).collect();

        DerivativeKernel {
            radius,
            weights: [w0, w1, w2],
        }
    }
}

#[inline]
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

fn check_scale(geometry: &Geometry, sigma_mm: f64) -> Result<()> {
    let min_spacing = geometry.min_spacing();
    if !(sigma_mm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma_mm}"
        )));
    }
    if sigma_mm < 0.5 * min_spacing {
        return Err(Error::UnderResolvedScale {
            sigma: sigma_mm,
            min_spacing,
        });
    }
    Ok(())
}

fn kernels(geometry: &Geometry, sigma_mm: f64) -> [DerivativeKernel; 3] {
    [0, 1, 2].map(|a| DerivativeKernel::new(sigma_mm, geometry.spacing_mm[a]))
}

/// Derivative orders (x, y, z) for the six unique Hessian entries, in the
/// order xx, yy, zz, xy, xz, yz.
const ORDERS: [[usize; 3]; 6] = [
    [2, 0, 0],
    [0, 2, 0],
    [0, 0, 2],
    [1, 1, 0],
    [1, 0, 1],
    [0, 1, 1],
];

/// Hessian at a single voxel by direct summation over the kernel support.
pub(crate) fn hessian_at(v: &Volume, idx: [usize; 3], sigma_mm: f64) -> Result<Matrix3<f64>> {
    let g = v.geometry();
    check_scale(g, sigma_mm)?;
    if (0..3).any(|a| idx[a] >= g.dims[a]) {
        return Err(Error::InvalidParameter(format!(
            "voxel {idx:?} outside dims {:?}",
            g.dims
        )));
    }
    let ks = kernels(g, sigma_mm);
    let [rx, ry, rz] = [ks[0].radius as i64, ks[1].radius as i64, ks[2].radius as i64];
    let mut acc = [0.0f64; 6];
    for dz in -rz..=rz {
        let z = reflect(idx[2] as i64 + dz, g.dims[2]);
        let wz = |o: usize| ks[2].weights[o][(dz + rz) as usize];
        for dy in -ry..=ry {
            let y = reflect(idx[1] as i64 + dy, g.dims[1]);
            let wy = |o: usize| ks[1].weights[o][(dy + ry) as usize];
            for dx in -rx..=rx {
                let x = reflect(idx[0] as i64 + dx, g.dims[0]);
                let wx = |o: usize| ks[0].weights[o][(dx + rx) as usize];
                let f = v.get([x, y, z]);
                for (slot, o) in ORDERS.iter().enumerate() {
                    acc[slot] += wx(o[0]) * wy(o[1]) * wz(o[2]) * f;
                }
            }
        }
    }
    Ok(assemble(&acc))
}

fn assemble(h: &[f64; 6]) -> Matrix3<f64> {
    let [xx, yy, zz, xy, xz, yz] = *h;
    Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
}

/// The six unique Hessian entries for every voxel of a volume.
#[derive(Debug, Clone)]
pub struct HessianField {
    pub geometry: Geometry,
    /// xx, yy, zz, xy, xz, yz, each in x-fastest voxel order.
    pub components: [Vec<f32>; 6],
}

impl HessianField {
    /// Symmetric matrix at a linear voxel offset.
    pub fn at(&self, offset: usize) -> Matrix3<f64> {
        let h = [0, 1, 2, 3, 4, 5].map(|c| self.components[c][offset] as f64);
        assemble(&h)
    }

    pub fn len(&self) -> usize {
        self.geometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One separable correlation pass along `axis`: `out(pos) = Σ_k w[r+k]·src(pos+k)`
/// with reflected borders. Passes along y and z accumulate whole rows or
/// slabs so memory is read contiguously.
fn pass(src: &[f32], g: &Geometry, axis: usize, kernel: &DerivativeKernel, order: usize) -> Vec<f32> {
    let [nx, ny, nz] = g.dims;
    let r = kernel.radius as i64;
    let w = &kernel.weights[order];
    let slab_len = nx * ny;
    let mut out = vec![0.0f32; src.len()];
    out.par_chunks_mut(slab_len)
        .enumerate()
        .for_each(|(z, slab)| match axis {
            0 => {
                let mut line = vec![0.0f64; nx + 2 * r as usize];
                for y in 0..ny {
                    let row = &src[z * slab_len + y * nx..][..nx];
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = row[reflect(i as i64 - r, nx)] as f64;
                    }
                    for (x, o) in slab[y * nx..(y + 1) * nx].iter_mut().enumerate() {
                        *o = w.iter().zip(&line[x..]).map(|(wk, v)| wk * v).sum::<f64>() as f32;
                    }
                }
            }
            1 => {
                let mut acc = vec![0.0f64; nx];
                for y in 0..ny {
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    for k in -r..=r {
                        let wk = w[(r + k) as usize];
                        let row = &src[z * slab_len + reflect(y as i64 + k, ny) * nx..][..nx];
                        acc.iter_mut().zip(row).for_each(|(a, &v)| *a += wk * v as f64);
                    }
                    slab[y * nx..(y + 1) * nx]
                        .iter_mut()
                        .zip(&acc)
                        .for_each(|(o, &a)| *o = a as f32);
                }
            }
            _ => {
                let mut acc = vec![0.0f64; slab_len];
                for k in -r..=r {
                    let wk = w[(r + k) as usize];
                    let other = &src[reflect(z as i64 + k, nz) * slab_len..][..slab_len];
                    acc.iter_mut().zip(other).for_each(|(a, &v)| *a += wk * v as f64);
                }
                slab.iter_mut().zip(&acc).for_each(|(o, &a)| *o = a as f32);
            }
        });
    out
}

/// Hessian of the Gaussian-smoothed volume at every voxel.
pub fn hessian_volume(v: &Volume, sigma_mm: f64) -> Result<HessianField> {
    let g = *v.geometry();
    check_scale(&g, sigma_mm)?;
    let ks = kernels(&g, sigma_mm);
    let src: Vec<f32> = v.data().iter().map(|&x| x as f32).collect();

    let x_passes: [Vec<f32>; 3] = [0, 1, 2].map(|o| pass(&src, &g, 0, &ks[0], o));
    drop(src);
    let components = ORDERS.map(|o| {
        let y = pass(&x_passes[o[0]], &g, 1, &ks[1], o[1]);
        pass(&y, &g, 2, &ks[2], o[2])
    });
    Ok(HessianField {
        geometry: g,
        components,
    })
}
