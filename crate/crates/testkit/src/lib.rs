//! Reference implementations that the test suites compare against.
//!
//! Everything here is written independently of `vessel-core` and favours
//! obviousness over speed.

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly distributed unit vector.
pub fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Uniformly distributed rotation (axis uniform on the sphere, angle
/// uniform in `[0, π)`; good enough for invariance checks).
pub fn rotation(rng: &mut impl Rng) -> Rotation3<f64> {
    let axis = Unit::new_normalize(unit_vector(rng));
    Rotation3::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::PI))
}

/// Symmetric matrix with entries uniform in `[-scale, scale]`.
pub fn symmetric(rng: &mut impl Rng, scale: f64) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let v = rng.random_range(-scale..scale);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Eigenvalues of a symmetric 3×3 matrix as the roots of its characteristic
/// polynomial (trigonometric form), descending.
pub fn char_poly_eigenvalues(a: &Matrix3<f64>) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    if p1 == 0.0 {
        let mut d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

/// Distance from `p` to segment `a`–`b`, by cases on where the foot of the
/// perpendicular falls.
pub fn segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let to_a = (p - a).norm();
    let to_b = (p - b).norm();
    if ab.norm() == 0.0 {
        return to_a;
    }
    let before = (p - a).dot(&ab) < 0.0;
    let after = (p - b).dot(&ab) > 0.0;
    if before || after {
        to_a.min(to_b)
    } else {
        (p - a).cross(&ab).norm() / ab.norm()
    }
}

/// Two-loop directed mean and maximum distance from `gt` to the polyline.
pub fn directed_distances(gt: &[Point3<f64>], polyline: &[Point3<f64>]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for p in gt {
        let mut best = f64::INFINITY;
        if polyline.len() == 1 {
            best = (p - polyline[0]).norm();
        }
        for i in 1..polyline.len() {
            best = best.min(segment_distance(p, &polyline[i - 1], &polyline[i]));
        }
        sum += best;
        max = max.max(best);
    }
    (sum / gt.len() as f64, max)
}

/// Brute-force cross-correlation of a 2D vector field with the
/// centre-seeking template; returns the argmax `(col, row)`, first in
/// row-major order on ties.
pub fn correlation_argmax(field: &[[f64; 2]], width: usize, height: usize) -> (usize, usize) {
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for qr in 0..height {
        for qc in 0..width {
            let mut acc = 0.0;
            for r in 0..height {
                for c in 0..width {
                    let dx = qc as f64 - c as f64;
                    let dy = qr as f64 - r as f64;
                    let len = (dx * dx + dy * dy).sqrt();
                    if len > 0.0 {
                        let g = field[r * width + c];
                        acc += (g[0] * dx + g[1] * dy) / len;
                    }
                }
            }
            if acc > best.0 {
                best = (acc, (qc, qr));
            }
        }
    }
    best.1
}

/// Textbook Frangi measure for eigenvalues sorted by magnitude, bright
/// structures on a dark background.
pub fn frangi_reference(l: [f64; 3], alpha: f64, beta: f64, c: f64) -> f64 {
    if l[1] > 0.0 || l[2] > 0.0 || l[2] == 0.0 {
        return 0.0;
    }
    let ra = l[1].abs() / l[2].abs();
    let rb = l[0].abs() / (l[1] * l[2]).abs().sqrt();
    let s2 = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
    (1.0 - (-ra * ra / (2.0 * alpha * alpha)).exp())
        * (-rb * rb / (2.0 * beta * beta)).exp()
        * (1.0 - (-s2 / (2.0 * c * c)).exp())
}

/// Minimum path cost from `source` to every voxel of an x-fastest grid with
/// 26-connectivity, where entering voxel `w` from `u` costs
/// `cost[w] · |u − w|` in mm. With `reverse`, the cost is that of reaching
/// `source` instead (`cost[u]` is paid on entering `u`'s successor).
pub fn grid_dijkstra(
    dims: [usize; 3],
    spacing: [f64; 3],
    cost: &[f64],
    source: [usize; 3],
    reverse: bool,
) -> Vec<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Key(f64);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Key {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0)
        }
    }

    let idx = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
    let mut dist = vec![f64::INFINITY; dims[0] * dims[1] * dims[2]];
    let mut heap = BinaryHeap::new();
    dist[idx(source[0], source[1], source[2])] = 0.0;
    heap.push(Reverse((Key(0.0), source)));
    while let Some(Reverse((Key(d), [i, j, k]))) = heap.pop() {
        let here = idx(i, j, k);
        if d > dist[here] {
            continue;
        }
        for dk in -1i64..=1 {
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 && dk == 0 {
                        continue;
                    }
                    let (ni, nj, nk) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                    if ni < 0 || nj < 0 || nk < 0 {
                        continue;
                    }
                    let (ni, nj, nk) = (ni as usize, nj as usize, nk as usize);
                    if ni >= dims[0] || nj >= dims[1] || nk >= dims[2] {
                        continue;
                    }
                    let there = idx(ni, nj, nk);
                    let len = ((di as f64 * spacing[0]).powi(2)
                        + (dj as f64 * spacing[1]).powi(2)
                        + (dk as f64 * spacing[2]).powi(2))
                    .sqrt();
                    let paid = if reverse { cost[here] } else { cost[there] };
                    if !paid.is_finite() {
                        continue;
                    }
                    let nd = d + paid * len;
                    if nd < dist[there] {
                        dist[there] = nd;
                        heap.push(Reverse((Key(nd), [ni, nj, nk])));
                    }
                }
            }
        }
    }
    dist
}
