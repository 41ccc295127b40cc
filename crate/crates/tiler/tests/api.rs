use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use shiftlab::dsl::parse_formula;
use shiftlab::logic::Alphabet;
use shiftlab::sft::Sft;
use shiftlab::topology::Topology;
use shiftlab_tiler::{router, TilerSession};
use tower::ServiceExt;

fn app() -> axum::Router {
    let sft = Sft::from_formula(
        &Topology::builtin("square").unwrap(),
        &Alphabet::binary(),
        &parse_formula("Ao o = 1 -> (o.rt = 0 & o.up = 0)").unwrap(),
    )
    .unwrap();
    router(TilerSession::new("gm", sft).unwrap())
}

async fn call(app: &axum::Router, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(path).header("content-type", "application/json");
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let code = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (code, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn state_pin_complete_round_trip() {
    let app = app();
    let (code, st) = call(&app, "GET", "/state", None).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(st["window"]["size"], json!([16, 16]));
    assert_eq!(st["pinned"], json!([]));

    let n = json!({"cell": [3, 3], "node": "0"});
    let (code, st) = call(&app, "POST", "/pin", Some(json!({"node": n, "symbol": "1"}))).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(st["pinned"][0]["node"], n);

    let (code, done) = call(&app, "POST", "/complete", None).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(done["result"], "completed");
    let filled = done["state"]["filled"].as_array().unwrap();
    assert_eq!(filled.len(), 255);
    let right = filled.iter().find(|a| a["node"]["cell"] == json!([4, 3])).unwrap();
    assert_eq!(right["symbol"], "0");

    // the snapshot after completion equals a fresh fetch
    let (_, again) = call(&app, "GET", "/state", None).await;
    assert_eq!(again, done["state"]);

    let (code, st) = call(&app, "POST", "/unpin", Some(json!({"node": n}))).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(st["pinned"], json!([]));
    assert_eq!(st["filled"], json!([]));
}

#[tokio::test]
async fn unsatisfiable_and_errors() {
    let app = app();
    for x in [1, 2] {
        let n = json!({"cell": [x, 1], "node": "0"});
        call(&app, "POST", "/pin", Some(json!({"node": n, "symbol": "1"}))).await;
    }
    let (_, done) = call(&app, "POST", "/complete", None).await;
    assert_eq!(done["result"], "unsatisfiable");
    assert_eq!(done["state"]["pinned"].as_array().unwrap().len(), 2);

    let far = json!({"cell": [40, 0], "node": "0"});
    let (code, err) = call(&app, "POST", "/pin", Some(json!({"node": far, "symbol": "1"}))).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
    assert!(err["error"].as_str().unwrap().contains("outside"));

    let (code, _) = call(&app, "POST", "/resize", Some(json!({"origin": [0, 0], "size": [0, 3]}))).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
    let (code, r) = call(&app, "POST", "/resize", Some(json!({"origin": [0, 0], "size": [2, 2]}))).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(r["dropped"], json!([{"cell": [2, 1], "node": "0"}]));
}
