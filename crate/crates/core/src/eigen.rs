//! Eigen-decomposition of symmetric 3×3 matrices by cyclic Jacobi rotations.

use nalgebra::{Matrix3, Vector3};

/// Eigenpairs ordered by increasing absolute eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenTriple {
    pub values: [f64; 3],
    pub vectors: [Vector3<f64>; 3],
}

impl EigenTriple {
    pub fn lambda1(&self) -> f64 {
        self.values[0]
    }
    pub fn lambda2(&self) -> f64 {
        self.values[1]
    }
    pub fn lambda3(&self) -> f64 {
        self.values[2]
    }

    /// `Σ λᵢ eᵢ eᵢᵀ`.
    pub fn reconstruct(&self) -> Matrix3<f64> {
        (0..3).fold(Matrix3::zeros(), |acc, i| {
            acc + self.vectors[i] * self.vectors[i].transpose() * self.values[i]
        })
    }
}

const MAX_SWEEPS: usize = 64;

/// Eigenpairs of a symmetric matrix. Only the upper triangle is read.
///
/// Eigenvectors are orthonormal and signed so that their largest-magnitude
/// component is non-negative (earliest axis wins ties). Repeated eigenvalues
/// still yield an orthonormal basis.
pub fn eig3_symmetric(m: &Matrix3<f64>) -> EigenTriple {
    let mut a = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            a[i][j] = m[(i, j)];
            a[j][i] = m[(i, j)];
        }
    }
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    let scale = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    if scale > 0.0 && scale.is_finite() {
        for _ in 0..MAX_SWEEPS {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            if off.sqrt() <= f64::EPSILON * scale * 1e-3 {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut pairs: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| (a[i][i], Vector3::new(v[0][i], v[1][i], v[2][i])))
        .collect();
    pairs.sort_by(|x, y| x.0.abs().total_cmp(&y.0.abs()));
    let values = [pairs[0].0, pairs[1].0, pairs[2].0];
    let vectors = [0, 1, 2].map(|i| canonical_sign(pairs[i].1.normalize()));
    EigenTriple { values, vectors }
}

/// Annihilates `a[p][q]` with one Jacobi rotation, accumulating into `v`.
fn rotate(a: &mut [[f64; 3]; 3], v: &mut [[f64; 3]; 3], p: usize, q: usize) {
    let apq = a[p][q];
    if apq == 0.0 {
        return;
    }
    let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    for k in 0..3 {
        let akp = a[k][p];
        let akq = a[k][q];
        a[k][p] = c * akp - s * akq;
        a[k][q] = s * akp + c * akq;
    }
    for k in 0..3 {
        let apk = a[p][k];
        let aqk = a[q][k];
        a[p][k] = c * apk - s * aqk;
        a[q][k] = s * apk + c * aqk;
    }
    a[p][q] = 0.0;
    a[q][p] = 0.0;
    for row in v.iter_mut() {
        let vp = row[p];
        let vq = row[q];
        row[p] = c * vp - s * vq;
        row[q] = s * vp + c * vq;
    }
}

fn canonical_sign(e: Vector3<f64>) -> Vector3<f64> {
    let mut best = 0;
    for i in 1..3 {
        if e[i].abs() > e[best].abs() {
            best = i;
        }
    }
    if e[best] < 0.0 {
        -e
    } else {
        e
    }
}
