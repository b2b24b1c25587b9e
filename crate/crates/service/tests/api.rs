use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vessel_core::metrics::{LandmarkKind, LandmarkSet};
use vessel_core::phantom::{generate, CurveSpec, TubeSpec};
use vessel_core::pipeline::{run_minpath, run_track, MinpathOptions};
use vessel_core::tracker::TrackerConfig;
use vessel_core::vesselness::{enhance_volume, normalize_vesselness, FrangiParams};
use vessel_core::volume::save_volume;
use vessel_core::{Geometry, PointMm, ValueKind, Volume};
use vessel_service::{router, AppState};

fn app() -> Router {
    router(AppState::default(), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn inline(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], kind: &str, values: &[f32]) -> Value {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    json!({
        "header": {
            "dims": dims,
            "spacing_mm": spacing,
            "origin_mm": origin,
            "dtype": "f32",
            "value_kind": kind,
        },
        "payload_base64": base64::engine::general_purpose::STANDARD.encode(bytes),
    })
}

async fn constant_session(app: &Router, value: f32) -> Value {
    let vol = inline([5, 4, 3], [0.7, 0.8, 1.5], [10.0, -5.0, 2.0], "raw-stored", &[value; 60]);
    let (status, body) = call(app, "POST", "/volumes", Some(json!({ "volume": vol }))).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    json_of(&body)
}

fn decode_png(bytes: &[u8]) -> image::GrayImage {
    image::load_from_memory(bytes).unwrap().to_luma8()
}

#[tokio::test]
async fn constant_volume_gives_uniform_slices() {
    let app = app();
    // Stored 1084 is 60 HU, the centre of the default window.
    let info = constant_session(&app, 1084.0).await;
    assert_eq!(info["dims"], json!([5, 4, 3]));
    let id = info["id"].as_str().unwrap();
    for (axis, w, h) in [("x", 4, 3), ("y", 5, 3), ("z", 5, 4)] {
        let (status, body) = call(&app, "GET", &format!("/volumes/{id}/slice?axis={axis}&index=1"), None).await;
        assert_eq!(status, StatusCode::OK);
        let img = decode_png(&body);
        assert_eq!((img.width(), img.height()), (w, h));
        assert!(img.pixels().all(|p| p.0[0] == 128), "axis {axis}");
    }
    // A window override centred above the value renders it black.
    let (_, body) = call(&app, "GET", &format!("/volumes/{id}/slice?axis=z&index=0&wc=500&ww=100"), None).await;
    assert!(decode_png(&body).pixels().all(|p| p.0[0] == 0));
}

#[tokio::test]
async fn slice_rows_follow_the_volume_axes() {
    let app = app();
    // Normalised volume whose value encodes the x index.
    let values: Vec<f32> = (0..2 * 3 * 4).map(|o| (o % 2) as f32).collect();
    let vol = inline([2, 3, 4], [1.0; 3], [0.0; 3], "normalized-unit", &values);
    let (_, body) = call(&app, "POST", "/volumes", Some(json!({ "volume": vol }))).await;
    let id = json_of(&body)["id"].as_str().unwrap().to_string();
    let (_, body) = call(&app, "GET", &format!("/volumes/{id}/slice?axis=z&index=2"), None).await;
    let img = decode_png(&body);
    for r in 0..3 {
        assert_eq!(img.get_pixel(0, r).0[0], 0);
        assert_eq!(img.get_pixel(1, r).0[0], 255);
    }
}

#[tokio::test]
async fn slice_request_errors() {
    let app = app();
    let info = constant_session(&app, 0.0).await;
    let id = info["id"].as_str().unwrap();
    let (status, _) = call(&app, "GET", &format!("/volumes/{id}/slice?axis=z&index=3"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "GET", &format!("/volumes/{id}/slice?axis=w&index=0"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", "/volumes/nope/slice?axis=z&index=0", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn seed_validation_and_round_trip() {
    let app = app();
    let info = constant_session(&app, 0.0).await;
    let id = info["id"].as_str().unwrap();
    let uri = format!("/volumes/{id}/seeds");

    // Voxel (3, 2, 1) of the session grid.
    let (i, j, k) = (3.0, 2.0, 1.0);
    let p = [10.0 + 0.7 * i, -5.0 + 0.8 * j, 2.0 + 1.5 * k];
    let set = json!({ "name": "s", "kind": "subcutaneous", "points_mm": [p] });
    let (status, body) = call(&app, "POST", &uri, Some(set)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(json_of(&body)["seed_set_id"], "0");
    let (_, body) = call(&app, "GET", &uri, None).await;
    let back = json_of(&body)[0]["points_mm"][0].clone();
    for a in 0..3 {
        assert!((back[a].as_f64().unwrap() - p[a]).abs() < 1e-6);
    }

    let outside = json!({ "name": "s", "kind": "subcutaneous", "points_mm": [[0.0, 0.0, 0.0]] });
    assert_eq!(call(&app, "POST", &uri, Some(outside)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let malformed = json!({ "name": "s", "points_mm": "here" });
    assert_eq!(call(&app, "POST", &uri, Some(malformed)).await.0, StatusCode::BAD_REQUEST);
    let empty = json!({ "name": "s", "kind": "subcutaneous", "points_mm": [] });
    assert_eq!(call(&app, "POST", &uri, Some(empty)).await.0, StatusCode::BAD_REQUEST);
    let set = json!({ "name": "s", "kind": "subcutaneous", "points_mm": [p] });
    assert_eq!(call(&app, "POST", "/volumes/missing/seeds", Some(set)).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unknown_ids_and_bad_loads() {
    let app = app();
    assert_eq!(call(&app, "GET", "/runs/missing", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/volumes/missing", None).await.0, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/volumes", Some(json!({ "volume": "/no/such/file" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let short = inline([2, 2, 2], [1.0; 3], [0.0; 3], "raw-stored", &[0.0; 7]);
    let (status, _) = call(&app, "POST", "/volumes", Some(json!({ "volume": short }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let run = json!({ "session": "missing", "mode": "track", "seeds": "0" });
    assert_eq!(call(&app, "POST", "/runs", Some(run)).await.0, StatusCode::NOT_FOUND);
}

fn straight_phantom() -> Volume {
    let g = Geometry::new([32, 32, 40], [0.6, 0.6, 0.5], [0.0; 3]).unwrap();
    let spec = TubeSpec {
        curve: CurveSpec::Straight {
            start_mm: [9.3, 9.3, 2.0],
            end_mm: [9.3, 9.3, 17.5],
        },
        radius_mm: 1.0,
        peak_intensity: 0.9,
        background: 0.1,
        slab: None,
        noise_sigma: 0.0,
        seed: 0,
    };
    generate(&spec, g).unwrap().volume
}

async fn wait_for(app: &Router, run_id: &str) -> Value {
    for _ in 0..400 {
        let (status, body) = call(app, "GET", &format!("/runs/{run_id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let v = json_of(&body);
        if v["status"] != "pending" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("run {run_id} did not finish");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn runs_match_direct_pipeline_calls() {
    let dir = tempfile::tempdir().unwrap();
    let volume = straight_phantom();
    assert_eq!(volume.kind(), ValueKind::NormalizedUnit);
    let path = dir.path().join("phantom.json");
    save_volume(&volume, &path).unwrap();

    let app = app();
    let (status, body) = call(&app, "POST", "/volumes", Some(json!({ "volume": path }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = json_of(&body)["id"].as_str().unwrap().to_string();
    let seed = PointMm::new(9.3, 9.3, 4.0);
    let toward = PointMm::new(9.3, 9.3, 15.0);
    let set = LandmarkSet::new("pair", LandmarkKind::Subcutaneous, vec![seed, toward]).unwrap();
    let set_json: Value = serde_json::from_str(&set.to_json().unwrap()).unwrap();
    let (_, body) = call(&app, "POST", &format!("/volumes/{id}/seeds"), Some(set_json)).await;
    let seeds = json_of(&body)["seed_set_id"].as_str().unwrap().to_string();

    let loaded = vessel_core::volume::load_volume(&path).unwrap();
    let cfg = TrackerConfig::default();
    let ves = normalize_vesselness(&enhance_volume(&loaded, &FrangiParams::subcutaneous()).unwrap()).unwrap();
    let expected_track = run_track(&ves, Some(&loaded), None, &seed, Some(&toward), &cfg)
        .unwrap()
        .to_json()
        .unwrap();
    let opts = MinpathOptions {
        timing: false,
        ..Default::default()
    };
    let ves_m = normalize_vesselness(&enhance_volume(&loaded, &FrangiParams::intramuscular()).unwrap()).unwrap();
    let expected_path = run_minpath(&ves_m, &loaded, &seed, &toward, &opts).unwrap().to_json().unwrap();

    for (mode, extra, expected) in [
        ("track", json!({ "tracker": cfg }), expected_track),
        ("minpath", json!({ "minpath": opts }), expected_path),
    ] {
        let mut run = json!({ "session": id, "mode": mode, "seeds": seeds });
        run.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        let (status, body) = call(&app, "POST", "/runs", Some(run)).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&body));
        let run_id = json_of(&body)["run_id"].as_str().unwrap().to_string();
        let done = wait_for(&app, &run_id).await;
        assert_eq!(done["status"], "done", "{done}");
        let (status, body) = call(&app, "GET", &format!("/runs/{run_id}/centerline"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(String::from_utf8(body).unwrap(), expected, "{mode}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn failed_runs_report_errors() {
    let app = app();
    let info = constant_session(&app, 0.0).await;
    let id = info["id"].as_str().unwrap();
    let p = [11.4, -3.4, 3.5];
    let set = json!({ "name": "s", "kind": "subcutaneous", "points_mm": [p] });
    call(&app, "POST", &format!("/volumes/{id}/seeds"), Some(set)).await;
    let run = json!({ "session": id, "mode": "minpath", "seeds": "0" });
    assert_eq!(call(&app, "POST", "/runs", Some(run)).await.0, StatusCode::BAD_REQUEST);
    let run = json!({ "session": id, "mode": "track", "seeds": "7" });
    assert_eq!(call(&app, "POST", "/runs", Some(run)).await.0, StatusCode::NOT_FOUND);

    // Flat volume: the seed is not on a vessel.
    let run = json!({ "session": id, "mode": "track", "seeds": "0" });
    let (status, body) = call(&app, "POST", "/runs", Some(run)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let run_id = json_of(&body)["run_id"].as_str().unwrap().to_string();
    let done = wait_for(&app, &run_id).await;
    assert_eq!(done["status"], "error");
    assert!(!done["error"].as_str().unwrap().is_empty());
    assert_eq!(
        call(&app, "GET", &format!("/runs/{run_id}/centerline"), None).await.0,
        StatusCode::CONFLICT
    );
}
