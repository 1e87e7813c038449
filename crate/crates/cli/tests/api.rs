mod common;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use channelforge_cli::api::{router, AppState, REVISION_HEADER};
use common::{block_keypoints, block_stl, BLOCK};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    revision: Option<u64>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: impl Into<Body>) -> Reply {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let revision = resp
        .headers()
        .get(REVISION_HEADER)
        .map(|v| v.to_str().unwrap().parse().unwrap());
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, revision, body }
}

fn app(dir: &std::path::Path) -> Router {
    router(AppState::new(dir).unwrap())
}

async fn upload(app: &Router) -> String {
    let r = call(app, Method::POST, "/projects", block_stl(BLOCK)).await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn upload_returns_created_with_id() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path());
    let r = call(&app, Method::POST, "/projects?units=mm", block_stl(BLOCK)).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let body = r.json();
    assert_eq!(r.revision, Some(1));
    assert_eq!(body["revision"], 1);
    assert_eq!(body["diagnostics"]["watertight"], true);
    let id = body["id"].as_str().unwrap();
    let second = upload(&app).await;
    assert_ne!(id, second);

    let m = call(&app, Method::GET, &format!("/projects/{id}"), Body::empty()).await;
    assert_eq!(m.status, StatusCode::OK);
    assert_eq!(m.json()["id"], id);
}

#[tokio::test]
async fn schema_and_order_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path());

    let r = call(
        &app,
        Method::POST,
        "/projects",
        b"solid nothing\nendsolid nothing\n".to_vec(),
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(
        std::fs::read_dir(tmp.path()).unwrap().count(),
        0,
        "failed upload left a project behind"
    );

    let r = call(&app, Method::POST, "/projects/00000abc/voxelize", "{}").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = call(&app, Method::GET, "/projects/..%2F..%2Fetc/report", Body::empty()).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);

    let id = upload(&app).await;
    let route = format!("/projects/{id}/route");
    let r = call(&app, Method::POST, &route, block_keypoints().to_string()).await;
    assert_eq!(r.status, StatusCode::CONFLICT, "route before voxelize");
    assert!(r.json()["error"].as_str().unwrap().contains("grid"));

    let r = call(
        &app,
        Method::POST,
        &format!("/projects/{id}/voxelize"),
        r#"{"voxel_size_mm": 1.0}"#,
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);

    let one = json!({ "keypoints": [[8.0, 8.0, 2.5]] });
    let r = call(&app, Method::POST, &route, one.to_string()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(r.json()["error"].as_str().unwrap().contains("at least 2 keypoints"));

    for bad in [r#"{"keypoints": "x"}"#, r#"{"keypoints": [], "extra": 1}"#, "not json"] {
        let r = call(&app, Method::POST, &route, bad).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{bad}");
    }
    let r = call(
        &app,
        Method::POST,
        &format!("/projects/{id}/voxelize"),
        r#"{"voxel_size_mm": 0}"#,
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let r = call(&app, Method::GET, &format!("/projects/{id}/report"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    let r = call(
        &app,
        Method::GET,
        &format!("/projects/{id}/mesh?stage=bogus"),
        Body::empty(),
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn design_loop_revisions_and_invalidation() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path());
    let id = upload(&app).await;
    let base = format!("/projects/{id}");

    let v = call(
        &app,
        Method::POST,
        &format!("{base}/voxelize"),
        r#"{"voxel_size_mm": 1.0}"#,
    )
    .await;
    assert_eq!(v.revision, Some(2));

    let r = call(
        &app,
        Method::POST,
        &format!("{base}/route"),
        block_keypoints().to_string(),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    assert_eq!(r.revision, Some(3));
    let routed = r.json();
    let polyline = routed["path"]["polyline"].as_array().unwrap().len();
    assert_eq!(polyline, routed["path"]["path"]["voxels"].as_array().unwrap().len());
    assert!(routed["violations"].is_array());

    let p = call(&app, Method::GET, &format!("{base}/path"), Body::empty()).await;
    assert_eq!(p.status, StatusCode::OK);
    assert_eq!(p.revision, Some(3));
    assert_eq!(p.json(), routed["path"], "GET path differs from the route response");

    let c = call(&app, Method::POST, &format!("{base}/carve"), r#"{"smoothing": 0}"#).await;
    assert_eq!(c.status, StatusCode::OK, "{}", String::from_utf8_lossy(&c.body));
    let after_carve = c.revision.unwrap();
    assert!(after_carve > 3);
    let rep = call(&app, Method::GET, &format!("{base}/report"), Body::empty()).await;
    assert_eq!(rep.json(), c.json()["report"]);
    let stl = call(&app, Method::GET, &format!("{base}/mesh?stage=carved"), Body::empty()).await;
    assert_eq!(stl.status, StatusCode::OK);
    assert!(stl.body.len() > 84);
    let input = call(&app, Method::GET, &format!("{base}/mesh"), Body::empty()).await;
    assert_eq!(input.body, block_stl(BLOCK));

    // Moving a keypoint invalidates everything downstream of the path.
    let mut moved = block_keypoints();
    moved["keypoints"][1] = json!([22.0, 18.0, 18.0]);
    let r = call(&app, Method::POST, &format!("{base}/route"), moved.to_string()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.revision.unwrap() > after_carve);
    for uri in [format!("{base}/report"), format!("{base}/mesh?stage=carved")] {
        assert_eq!(
            call(&app, Method::GET, &uri, Body::empty()).await.status,
            StatusCode::CONFLICT,
            "{uri}"
        );
    }
}
