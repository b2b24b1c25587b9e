use nalgebra::Vector3;
use rand::Rng;
use vessel_core::phantom::{generate, CurveSpec, TubeSpec};
use vessel_core::tracker::{
    angle_deg, clamp_direction, estimate_direction, extract_cross_section, orientation_field,
    ridge_correct, Patch,
};
use vessel_core::Geometry;
use vessel_core::PointMm;
use vessel_testkit::{correlation_argmax, rng, rotation, unit_vector};

/// Gradients of a tube along `axis`: mostly orthogonal to it, with a small
/// axial component.
fn tube_field(r: &mut impl Rng, axis: &Vector3<f64>, n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| {
            let g = unit_vector(r) * r.random_range(0.1..2.0);
            let radial = g - axis * axis.dot(&g);
            radial + axis * (0.05 * axis.dot(&g))
        })
        .collect()
}

#[test]
fn direction_is_rotation_equivariant_and_scale_invariant() {
    let mut r = rng(31);
    for _ in 0..1000 {
        let axis = unit_vector(&mut r);
        let field = tube_field(&mut r, &axis, 64);
        let base = estimate_direction(&field, Some(&axis)).unwrap();
        assert!(!base.degenerate);
        assert!(base.direction.dot(&axis) > 0.99);

        let rot = rotation(&mut r);
        let turned: Vec<_> = field.iter().map(|g| rot * g).collect();
        let reference = rot * axis;
        let e = estimate_direction(&turned, Some(&reference)).unwrap();
        assert!((e.direction - rot * base.direction).norm() < 1e-6);

        let k = 10f64.powf(r.random_range(-6.0..6.0));
        let scaled: Vec<_> = field.iter().map(|g| g * k).collect();
        let s = estimate_direction(&scaled, Some(&axis)).unwrap();
        assert!((s.direction - base.direction).norm() < 1e-6);
        assert!(!s.degenerate);
    }
}

#[test]
fn isotropic_gradients_are_degenerate() {
    let mut r = rng(32);
    for _ in 0..20 {
        let field: Vec<_> = (0..10_000).map(|_| unit_vector(&mut r)).collect();
        assert!(estimate_direction(&field, None).unwrap().degenerate);
    }
}

#[test]
fn clamp_stays_on_the_cap_and_in_plane() {
    let mut r = rng(33);
    for _ in 0..10_000 {
        let prev = unit_vector(&mut r);
        let cand = unit_vector(&mut r);
        let cap = r.random_range(1.0..90.0);
        let out = clamp_direction(&cand, &prev, cap);
        assert!((out.norm() - 1.0).abs() < 1e-12);
        let a = angle_deg(&cand, &prev);
        if a <= cap {
            assert_eq!(out, cand);
        } else {
            assert!((angle_deg(&out, &prev) - cap).abs() < 1e-6);
            assert!(out.dot(&prev.cross(&cand)).abs() < 1e-9);
            assert!(out.dot(&cand) > prev.dot(&cand) - 1e-12);
        }
    }
    let prev = Vector3::z();
    assert_eq!(clamp_direction(&-prev, &prev, 60.0), prev);
    let out = clamp_direction(&Vector3::x(), &prev, 60.0);
    assert!((angle_deg(&out, &prev) - 60.0).abs() < 1e-6);
}

fn blob(n: usize, cx: f64, cy: f64, s: f64) -> Patch {
    Patch::from_fn(n, n, 0.25, |c, r| {
        let dx = c as f64 - cx;
        let dy = r as f64 - cy;
        (-(dx * dx + dy * dy) / (2.0 * s * s)).exp()
    })
}

#[test]
fn ridge_recovers_displaced_gaussians() {
    let n = 25;
    let centre = 12.0;
    let max_shift = 0.25 * n as f64;
    let steps = [-1.0, -0.5, 0.0, 0.5, 1.0];
    for sy in steps {
        for sx in steps {
            let (dx, dy) = (sx * max_shift, sy * max_shift);
            let p = blob(n, centre + dx, centre + dy, 3.0);
            let o = ridge_correct(&p).unwrap();
            assert!((o.x / 0.25 - dx).abs() <= 0.5 && (o.y / 0.25 - dy).abs() <= 0.5, "{dx} {dy} {o}");
        }
    }
}

#[test]
fn ridge_argmax_matches_brute_force_correlation() {
    let mut r = rng(34);
    for _ in 0..30 {
        let n = r.random_range(8..16);
        let p = Patch::from_fn(n, n, 0.3, |c, row| {
            let a = (c as f64 - 5.0) * 0.4;
            let b = (row as f64 - 6.0) * 0.3;
            (-(a * a + b * b)).exp() + 0.1 * ((c * 7 + row * 3) % 5) as f64
        });
        let field: Vec<[f64; 2]> = orientation_field(&p).iter().map(|g| [g.x, g.y]).collect();
        let (c, row) = correlation_argmax(&field, n, n);
        let o = ridge_correct(&p).unwrap();
        let (c0, r0) = p.centre();
        assert_eq!(o.x, (c as f64 - c0) * 0.3);
        assert_eq!(o.y, (row as f64 - r0) * 0.3);
        let half_diagonal = 0.5 * (2.0f64).sqrt() * n as f64 * 0.3;
        assert!(o.norm() <= half_diagonal);
    }
}

#[test]
fn cross_section_of_a_tube_peaks_at_the_axis() {
    let g = Geometry::new([41, 41, 41], [0.5; 3], [0.0; 3]).unwrap();
    let spec = TubeSpec {
        curve: CurveSpec::Straight {
            start_mm: [10.0, 10.0, 2.0],
            end_mm: [10.0, 10.0, 18.0],
        },
        radius_mm: 1.0,
        peak_intensity: 0.9,
        background: 0.1,
        slab: None,
        noise_sigma: 0.0,
        seed: 0,
    };
    let v = generate(&spec, g).unwrap().volume;
    let cs = extract_cross_section(&v, &PointMm::new(10.0, 10.0, 10.0), &Vector3::z(), 6.0, 0.25).unwrap();
    let (c, r) = cs.patch.argmax();
    let (c0, r0) = cs.patch.centre();
    assert!((c as f64 - c0).abs() <= 1.0 && (r as f64 - r0).abs() <= 1.0);

    let cs = extract_cross_section(&v, &PointMm::new(11.0, 10.0, 10.0), &Vector3::z(), 6.0, 0.25).unwrap();
    assert_eq!(cs.u_axis, Vector3::x());
    let (c, r) = cs.patch.argmax();
    assert!(((c as f64 - c0) * 0.25 + 1.0).abs() <= 0.25);
    assert!((r as f64 - r0).abs() <= 1.0);
}
