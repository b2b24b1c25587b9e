use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vessel_core::metrics::LandmarkSet;
use vessel_core::volume::{load_volume, save_volume};
use vessel_core::{Centerline, Geometry, ValueKind, Volume};

fn vessel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vessel")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = vessel(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Straight tube along z, written by the `phantom` command; returns the
/// volume and landmark paths.
fn straight_phantom(dir: &Path, stored: bool) -> (PathBuf, PathBuf) {
    let spec = json!({
        "geometry": { "dims": [32, 32, 40], "spacing_mm": [0.6, 0.6, 0.5], "origin_mm": [0.0, 0.0, 0.0] },
        "tube": {
            "curve": { "type": "straight", "start_mm": [9.3, 9.3, 2.0], "end_mm": [9.3, 9.3, 17.5] },
            "radius_mm": 1.0, "peak_intensity": 0.9, "background": 0.1
        }
    });
    let spec_path = dir.join("spec.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let (vol, lm) = (dir.join("tube.json"), dir.join("tube_gt.json"));
    let mut args = vec!["phantom", "--spec", p(&spec_path), "--output", p(&vol), "--landmarks", p(&lm)];
    if stored {
        args.push("--stored");
    }
    ok(&args);
    (vol, lm)
}

fn seeds(dir: &Path, points: &[[f64; 3]]) -> PathBuf {
    let path = dir.join("seeds.json");
    let doc = json!({ "name": "seeds", "kind": "subcutaneous", "points_mm": points });
    fs::write(&path, doc.to_string()).unwrap();
    path
}

#[test]
fn normalize_applies_the_default_window() {
    let dir = tempfile::tempdir().unwrap();
    let g = Geometry::new([4, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
    let mut data = vec![0.0; 16];
    data[..4].copy_from_slice(&[0.0, 884.0, 1084.0, 3000.0]);
    let input = dir.path().join("raw.json");
    save_volume(&Volume::new(g, data, ValueKind::RawStored).unwrap(), &input).unwrap();
    let output = dir.path().join("norm.json");
    ok(&["normalize", "--input", p(&input), "--output", p(&output)]);
    let v = load_volume(&output).unwrap();
    assert_eq!(v.kind(), ValueKind::NormalizedUnit);
    assert_eq!(&v.data()[..4], &[0.0, 0.0, 0.5, 1.0]);

    // A wider window from the configuration file, narrowed again by a flag.
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{ "window": { "window_width": 800, "window_center": 100 } }"#).unwrap();
    ok(&["normalize", "--config", p(&cfg), "--input", p(&input), "--output", p(&output), "--window-width", "400"]);
    let v = load_volume(&output).unwrap();
    // Stored 1084 is 60 HU; window [-100, 300].
    assert!((v.data()[2] - 0.4).abs() < 1e-12);
}

#[test]
fn enhance_records_preset_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, _) = straight_phantom(dir.path(), false);
    for (preset, beta, c) in [("subcutaneous", 10.0, 500.0), ("intramuscular", 0.5, 100.0)] {
        let out = dir.path().join(format!("{preset}.json"));
        ok(&["enhance", "--input", p(&vol), "--output", p(&out), "--preset", preset]);
        let header: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        let f = &header["metadata"]["frangi"];
        assert_eq!((f["alpha"].as_f64(), f["beta"].as_f64(), f["c"].as_f64()), (Some(0.5), Some(beta), Some(c)));
        assert_eq!(header["metadata"]["preset"], preset);
        assert_eq!(header["value_kind"], "normalized-unit");
    }
    let out = vessel(&["enhance", "--input", p(&vol), "--output", "/tmp/never.json", "--preset", "deep"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = vessel(&["enhance", "--input", "/no/such/volume.json", "--output", p(&dir.path().join("o.json"))]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/no/such/volume"));
    assert_eq!(vessel(&["enhance"]).status.code(), Some(2));
    assert_eq!(vessel(&["track", "--bogus"]).status.code(), Some(2));
    assert_eq!(vessel(&["frobnicate"]).status.code(), Some(2));

    // A seed outside the grid is a data error.
    let (vol, _) = straight_phantom(dir.path(), false);
    let s = seeds(dir.path(), &[[50.0, 50.0, 50.0]]);
    let out = vessel(&["track", "--vesselness", p(&vol), "--seeds", p(&s), "--output", p(&dir.path().join("c.json"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn help_lists_defaults() {
    for (cmd, needles) in [
        ("normalize", vec!["--window-center", "60", "--window-width", "400", "-1024"]),
        ("enhance", vec!["--preset", "subcutaneous", "--sigma-mm", "1.0"]),
        ("track", vec!["--step-delta-mm", "--window-side-mm", "--correction-interval", "--max-turn-deg", "60"]),
        ("minpath", vec!["--a-s", "45", "--b-s", "0.60", "--epsilon"]),
        ("sweep", vec!["7.5", "0.80"]),
        ("serve", vec!["--host", "--port", "8080"]),
    ] {
        let out = vessel(&[cmd, "--help"]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        for n in needles {
            assert!(text.contains(n), "{cmd} --help lacks {n}");
        }
    }
}

#[test]
fn track_then_eval_on_a_straight_tube() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, gt) = straight_phantom(dir.path(), true);
    let norm = dir.path().join("norm.json");
    let ves = dir.path().join("ves.json");
    ok(&["normalize", "--input", p(&vol), "--output", p(&norm)]);
    ok(&["enhance", "--input", p(&norm), "--output", p(&ves)]);
    let s = seeds(dir.path(), &[[9.3, 9.3, 4.0], [9.3, 9.3, 15.0]]);
    let line_path = dir.path().join("line.json");
    ok(&["track", "--vesselness", p(&ves), "--intensity", p(&norm), "--seeds", p(&s), "--output", p(&line_path)]);
    let line = Centerline::load(&line_path).unwrap();
    assert!(line.len() > 5);
    assert!(line.points.iter().all(|q| ((q.x - 9.3).powi(2) + (q.y - 9.3).powi(2)).sqrt() < 0.3));

    let csv = dir.path().join("m.csv");
    ok(&["eval", "--landmarks", p(&gt), "--centerline", p(&line_path), "--output", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("path,mean_euclidean_mm,hausdorff_mm\n"));

    // Ground truth taken from the path's own vertices scores zero.
    let on_path = dir.path().join("on_path.json");
    LandmarkSet::new("own", vessel_core::metrics::LandmarkKind::Subcutaneous, line.points.clone())
        .unwrap()
        .save(&on_path)
        .unwrap();
    ok(&["eval", "--landmarks", p(&on_path), "--centerline", p(&line_path), "--output", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);

    // Settings from the configuration file apply, and flags beat them.
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{ "tracker": { "max_iterations": 2 } }"#).unwrap();
    ok(&["track", "--config", p(&cfg), "--vesselness", p(&ves), "--seeds", p(&s), "--output", p(&line_path)]);
    assert_eq!(Centerline::load(&line_path).unwrap().len(), 3);
    ok(&[
        "track", "--config", p(&cfg), "--vesselness", p(&ves), "--seeds", p(&s), "--output", p(&line_path),
        "--max-iterations", "4",
    ]);
    assert_eq!(Centerline::load(&line_path).unwrap().len(), 5);
}

#[test]
fn minpath_and_sweep_on_a_straight_tube() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, gt) = straight_phantom(dir.path(), false);
    let ves = dir.path().join("ves.json");
    ok(&["enhance", "--input", p(&vol), "--output", p(&ves), "--preset", "intramuscular"]);
    let s = seeds(dir.path(), &[[9.0, 9.0, 3.0], [9.0, 9.0, 16.5]]);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        ok(&["minpath", "--vesselness", p(&ves), "--intensity", p(&vol), "--seeds", p(&s), "--output", p(out), "--no-timing"]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let line = Centerline::load(&a).unwrap();
    assert_eq!(line.stats.unwrap().elapsed_ms, 0.0);

    let csv = dir.path().join("sweep.csv");
    let rows = dir.path().join("rows.json");
    ok(&[
        "sweep", "--vesselness", p(&ves), "--intensity", p(&vol), "--seeds", p(&s), "--landmarks", p(&gt),
        "--output", p(&csv), "--rows-json", p(&rows),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "a_s,b_s,mean_euclidean_mm,hausdorff_mm,elapsed_s");
    assert_eq!(lines.len(), 43);
    let rows: Vec<Value> = serde_json::from_str(&fs::read_to_string(&rows).unwrap()).unwrap();
    assert_eq!(rows.len(), 42);
    assert!(rows.iter().all(|r| r["expanded_nodes"].as_u64().unwrap() > 0));

    let small = dir.path().join("small.csv");
    ok(&[
        "sweep", "--vesselness", p(&ves), "--intensity", p(&vol), "--seeds", p(&s), "--landmarks", p(&gt),
        "--output", p(&small), "--a-s", "10,20", "--b-s", "0.5",
    ]);
    assert_eq!(fs::read_to_string(&small).unwrap().lines().count(), 3);
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn service_runs_match_command_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, _) = straight_phantom(dir.path(), true);
    let norm = dir.path().join("norm.json");
    let ves = dir.path().join("ves.json");
    let ves_m = dir.path().join("ves_m.json");
    ok(&["normalize", "--input", p(&vol), "--output", p(&norm)]);
    ok(&["enhance", "--input", p(&norm), "--output", p(&ves)]);
    ok(&["enhance", "--input", p(&norm), "--output", p(&ves_m), "--preset", "intramuscular"]);
    let pts = [[9.3, 9.3, 4.0], [9.3, 9.3, 15.0]];
    let s = seeds(dir.path(), &pts);
    let track_out = dir.path().join("track.json");
    let path_out = dir.path().join("path.json");
    ok(&["track", "--vesselness", p(&ves), "--intensity", p(&norm), "--seeds", p(&s), "--output", p(&track_out)]);
    ok(&["minpath", "--vesselness", p(&ves_m), "--intensity", p(&norm), "--seeds", p(&s), "--output", p(&path_out), "--no-timing"]);

    let app = vessel_service::router(vessel_service::AppState::default(), None);
    // The session loads the raw volume; the service windows it and derives
    // both vesselness volumes itself.
    let (status, body) = call(&app, "POST", "/volumes", Some(json!({ "volume": vol }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = serde_json::from_slice::<Value>(&body).unwrap()["id"].as_str().unwrap().to_string();
    let doc: Value = serde_json::from_str(&fs::read_to_string(&s).unwrap()).unwrap();
    let (_, body) = call(&app, "POST", &format!("/volumes/{id}/seeds"), Some(doc)).await;
    let set = serde_json::from_slice::<Value>(&body).unwrap()["seed_set_id"].clone();

    for (mode, extra, expected) in [
        ("track", json!({}), &track_out),
        ("minpath", json!({ "minpath": { "timing": false } }), &path_out),
    ] {
        let mut run = json!({ "session": id, "mode": mode, "seeds": set });
        run.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        let (status, body) = call(&app, "POST", "/runs", Some(run)).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        let run_id = serde_json::from_slice::<Value>(&body).unwrap()["run_id"].as_str().unwrap().to_string();
        let mut finished = false;
        for _ in 0..400 {
            let (_, body) = call(&app, "GET", &format!("/runs/{run_id}"), None).await;
            let v: Value = serde_json::from_slice(&body).unwrap();
            if v["status"] != "pending" {
                assert_eq!(v["status"], "done", "{v}");
                finished = true;
                break;
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        assert!(finished);
        let (_, body) = call(&app, "GET", &format!("/runs/{run_id}/centerline"), None).await;
        assert_eq!(body, fs::read(expected).unwrap(), "{mode}");
    }
}
