use vessel_core::metrics::evaluate_points;
use vessel_core::minpath::{
    astar, build_cost_volume, dijkstra_oracle, distances_to_goal, heuristic_mm, refine_path,
    SigmoidOrientation, SigmoidParams,
};
use vessel_core::phantom::{generate, CurveSpec, Phantom, TubeSpec};
use vessel_core::vesselness::{enhance_volume, normalize_vesselness, FrangiParams};
use vessel_core::{Geometry, ValueKind, Volume};

fn curved(geometry: Geometry, sigmoid: &SigmoidParams) -> (Phantom, Volume) {
    let spec = TubeSpec {
        curve: CurveSpec::Spline {
            control_points_mm: vec![
                [4.0, 6.0, 4.0],
                [10.0, 14.0, 8.0],
                [16.0, 10.0, 14.0],
                [20.0, 18.0, 20.0],
            ],
        },
        radius_mm: 1.0,
        peak_intensity: 0.9,
        background: 0.2,
        slab: None,
        noise_sigma: 0.0,
        seed: 1,
    };
    let ph = generate(&spec, geometry).unwrap();
    let fp = FrangiParams {
        sigma_mm: geometry.max_spacing().max(1.0),
        ..FrangiParams::intramuscular()
    };
    let ves = normalize_vesselness(&enhance_volume(&ph.volume, &fp).unwrap()).unwrap();
    let costs = build_cost_volume(&ves, &ph.volume, sigmoid).unwrap();
    (ph, costs)
}

fn endpoints(ph: &Phantom, g: &Geometry) -> ([usize; 3], [usize; 3]) {
    (
        g.nearest_voxel(&ph.axis.point_at_arc_length(0.0)).unwrap(),
        g.nearest_voxel(&ph.axis.point_at_arc_length(ph.axis.length())).unwrap(),
    )
}

#[test]
fn curved_tube_path_hugs_the_axis() {
    let spacing = [0.6, 0.6, 0.9];
    let g = Geometry::new([40, 40, 30], spacing, [0.0; 3]).unwrap();
    let (ph, costs) = curved(g, &SigmoidParams::default());
    let (start, goal) = endpoints(&ph, &g);
    let a = astar(&costs, start, goal).unwrap();
    let d = dijkstra_oracle(&costs, start, goal).unwrap();
    assert!((a.total_cost - d.total_cost).abs() < 1e-9);
    assert!(a.expanded_nodes <= d.expanded_nodes);
    assert_eq!(a.voxels[0], start);
    assert_eq!(*a.voxels.last().unwrap(), goal);
    for w in a.voxels.windows(2) {
        let step = (0..3).map(|i| w[0][i].abs_diff(w[1][i])).max().unwrap();
        assert_eq!(step, 1);
    }
    for v in &a.voxels {
        let p = g.voxel_to_mm(*v);
        let q = ph.axis.nearest(&p).point;
        for ax in 0..3 {
            assert!((p[ax] - q[ax]).abs() <= spacing[ax], "{v:?}");
        }
    }
    let line = refine_path(&a, &costs).unwrap();
    let m = evaluate_points(&ph.landmarks(2.0), &line.points).unwrap();
    assert!(m.mean_distance_mm < 0.75 * 0.6, "{m:?}");
}

#[test]
fn heuristic_never_overestimates() {
    let g = Geometry::new([14, 12, 10], [0.6, 0.7, 1.1], [0.0; 3]).unwrap();
    let (_, costs) = curved(
        Geometry::new([40, 40, 30], [0.6, 0.6, 0.9], [0.0; 3]).unwrap(),
        &SigmoidParams::default(),
    );
    let small = Volume::from_fn(g, ValueKind::Cost, |p| {
        costs.sample_trilinear(&p).unwrap_or(1.0)
    })
    .unwrap();
    let goal = [7, 6, 5];
    let dist = distances_to_goal(&small, goal).unwrap();
    for (off, &d) in dist.iter().enumerate() {
        assert!(heuristic_mm(&g, g.index_of(off), goal) <= d);
    }
}

#[test]
fn literal_orientation_makes_the_tube_expensive() {
    let g = Geometry::new([40, 40, 30], [0.6, 0.6, 0.9], [0.0; 3]).unwrap();
    let literal = SigmoidParams {
        orientation: SigmoidOrientation::PaperLiteral,
        ..SigmoidParams::default()
    };
    let (ph, cheap) = curved(g, &SigmoidParams::default());
    let (_, dear) = curved(g, &literal);
    let on_axis = g.nearest_voxel(&ph.axis.point_at_arc_length(10.0)).unwrap();
    let o = g.offset(on_axis);
    assert!(cheap.data()[o] < 2.0);
    assert!(dear.data()[o] > 100.0);
}
