use proptest::prelude::*;
use vessel_core::volume::{load_volume, normalize_hu, save_volume};
use vessel_core::{Geometry, PointMm, ValueKind, Volume, WindowParams};

fn geometry() -> impl Strategy<Value = Geometry> {
    (
        [2usize..6, 2usize..6, 2usize..6],
        [0.2f64..2.0, 0.2f64..2.0, 0.2f64..2.0],
        [-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0],
    )
        .prop_map(|(d, s, o)| Geometry::new(d, s, o).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_load_round_trip(g in geometry(), seed in any::<u64>(), as_f32 in any::<bool>()) {
        let mut x = seed;
        let v = Volume::from_fn(g, ValueKind::RawStored, |_| {
            x = x.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            let raw = (x >> 11) as f64 / (1u64 << 53) as f64 * 4000.0 - 2000.0;
            if as_f32 { raw.round() } else { raw }
        }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.json");
        save_volume(&v, &path).unwrap();
        let back = load_volume(&path).unwrap();
        prop_assert_eq!(back.geometry(), v.geometry());
        prop_assert_eq!(back.kind(), v.kind());
        prop_assert_eq!(back.data(), v.data());
    }

    #[test]
    fn normalisation_is_monotone_and_bounded(a in -3000.0f64..3000.0, b in -3000.0f64..3000.0,
                                             wc in -500.0f64..500.0, ww in 1.0f64..2000.0) {
        let w = WindowParams { window_center: wc, window_width: ww, ..WindowParams::default() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (x, y) = (w.apply(lo), w.apply(hi));
        prop_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        prop_assert!(x <= y);
    }

    #[test]
    fn trilinear_stays_within_corner_values(g in geometry(), seed in any::<u64>(),
                                            f in [0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0]) {
        let mut x = seed;
        let v = Volume::from_fn(g, ValueKind::NormalizedUnit, |_| {
            x = x.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            (x >> 11) as f64 / (1u64 << 53) as f64
        }).unwrap();
        let (lo, hi) = g.bounds_mm();
        let p = PointMm::new(
            lo.x + f[0] * (hi.x - lo.x),
            lo.y + f[1] * (hi.y - lo.y),
            lo.z + f[2] * (hi.z - lo.z),
        );
        let s = v.sample_trilinear(&p).unwrap();
        let c = g.mm_to_continuous(&p);
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let idx = [
                        ((c[0].floor() as usize) + dx).min(g.dims[0] - 1),
                        ((c[1].floor() as usize) + dy).min(g.dims[1] - 1),
                        ((c[2].floor() as usize) + dz).min(g.dims[2] - 1),
                    ];
                    min = min.min(v.get(idx));
                    max = max.max(v.get(idx));
                }
            }
        }
        prop_assert!(s >= min - 1e-12 && s <= max + 1e-12);
    }
}

#[test]
fn normalize_hu_on_a_volume() {
    let g = Geometry::new([4, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
    let row = [0.0, 884.0, 1084.0, 3000.0];
    let raw = Volume::new(g, row.repeat(4), ValueKind::RawStored).unwrap();
    let n = normalize_hu(&raw, &WindowParams::default()).unwrap();
    assert_eq!(n.kind(), ValueKind::NormalizedUnit);
    assert_eq!(&n.data()[..4], &[0.0, 0.0, 0.5, 1.0]);
}
