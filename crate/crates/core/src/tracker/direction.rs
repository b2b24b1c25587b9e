//! Local vessel direction from the gradient correlation matrix, and the
//! spherical-cap bound on direction changes.

use nalgebra::{Matrix3, Vector3};

use crate::eigen::eig3_symmetric;
use crate::error::{Error, Result};

/// Minimum number of gradient samples for a direction estimate.
pub const MIN_GRADIENTS: usize = 6;

/// Fields whose two smallest correlation eigenvalues differ by less than
/// this fraction of the largest one are reported as degenerate.
pub const DEGENERACY_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionEstimate {
    /// Unit eigenvector of the smallest correlation eigenvalue.
    pub direction: Vector3<f64>,
    /// Correlation eigenvalues, ascending.
    pub eigenvalues: [f64; 3],
    /// The smallest eigenvalue is not separated from the middle one; the
    /// caller should keep its previous direction.
    pub degenerate: bool,
}

/// Correlation matrix `(1/n) Σ g gᵀ`.
pub fn gradient_correlation(gradients: &[Vector3<f64>]) -> Matrix3<f64> {
    let sum = gradients
        .iter()
        .fold(Matrix3::zeros(), |acc, g| acc + g * g.transpose());
    sum / gradients.len() as f64
}

/// Direction minimising the mean squared projection of the gradients.
///
/// With a `reference`, the sign is chosen so the result does not point
/// against it; otherwise the eigenvector sign convention applies.
pub fn estimate_direction(
    gradients: &[Vector3<f64>],
    reference: Option<&Vector3<f64>>,
) -> Result<DirectionEstimate> {
    if gradients.len() < MIN_GRADIENTS {
        return Err(Error::TooFewGradients(gradients.len()));
    }
    let eig = eig3_symmetric(&gradient_correlation(gradients));
    // The correlation matrix is positive semi-definite, so ordering by
    // magnitude is ordering by value (up to round-off below zero).
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]));
    let eigenvalues = order.map(|i| eig.values[i]);
    let mut direction = eig.vectors[order[0]];
    if let Some(r) = reference {
        if direction.dot(r) < 0.0 {
            direction = -direction;
        }
    }
    let gap = eigenvalues[1] - eigenvalues[0];
    let degenerate = !(eigenvalues[2] > 0.0) || gap <= (DEGENERACY_RATIO * eigenvalues[2]).max(1e-9 * eigenvalues[2]);
    Ok(DirectionEstimate {
        direction,
        eigenvalues,
        degenerate,
    })
}

/// Limits the angle between `candidate` and `previous` to `max_turn_deg`,
/// projecting onto the cap boundary within their common plane.
/// An anti-parallel candidate yields `previous`.
pub fn clamp_direction(
    candidate: &Vector3<f64>,
    previous: &Vector3<f64>,
    max_turn_deg: f64,
) -> Vector3<f64> {
    let cos = candidate.dot(previous).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let cap = max_turn_deg.to_radians();
    if angle <= cap {
        return *candidate;
    }
    let perp = candidate - previous * cos;
    let norm = perp.norm();
    if norm < 1e-12 {
        return *previous;
    }
    let w = perp / norm;
    (previous * cap.cos() + w * cap.sin()).normalize()
}

/// Angle in degrees between two unit vectors.
pub fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn ring() -> Vec<Vector3<f64>> {
        let mut g = vec![
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(-1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, -1.0, 0.0),
        ];
        // Pad to the minimum count with more in-plane vectors.
        g.push(Vector3::new(0.6, 0.8, 0.0));
        g.push(Vector3::new(-0.8, 0.6, 0.0));
        g
    }

    #[test]
    fn tube_gradients_give_axis() {
        let up = Vector3::z();
        let e = estimate_direction(&ring(), Some(&up)).unwrap();
        assert!((e.direction - up).norm() < 1e-12);
        assert!(!e.degenerate);
        let down = -Vector3::z();
        let e = estimate_direction(&ring(), Some(&down)).unwrap();
        assert!((e.direction - down).norm() < 1e-12);
    }

    #[test]
    fn rotated_field_rotates_output() {
        let r = Rotation3::from_euler_angles(0.4, 1.2, -0.3);
        let rotated: Vec<_> = ring().iter().map(|g| r * g).collect();
        let expected = r * Vector3::z();
        let e = estimate_direction(&rotated, Some(&expected)).unwrap();
        assert!((e.direction - expected).norm() < 1e-6);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            estimate_direction(&ring()[..4], None),
            Err(Error::TooFewGradients(4))
        ));
    }

    #[test]
    fn zero_field_is_degenerate() {
        let z = vec![Vector3::zeros(); 8];
        assert!(estimate_direction(&z, None).unwrap().degenerate);
    }

    #[test]
    fn clamp_examples() {
        let prev = Vector3::z();
        assert_eq!(clamp_direction(&prev, &prev, 60.0), prev);
        let inside = Vector3::new(30f64.to_radians().sin(), 0.0, 30f64.to_radians().cos());
        assert_eq!(clamp_direction(&inside, &prev, 60.0), inside);
        let perp = Vector3::x();
        let c = clamp_direction(&perp, &prev, 60.0);
        assert!((angle_deg(&c, &prev) - 60.0).abs() < 1e-6);
        assert!(c.y.abs() < 1e-12, "must stay in the x-z plane");
        assert_eq!(clamp_direction(&-prev, &prev, 60.0), prev);
    }
}
