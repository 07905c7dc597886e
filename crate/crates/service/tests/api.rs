use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use clonevet_core::classifiers::{train, NeuralNetConfig, TrainerConfig, TrainingSet};
use clonevet_core::corpus::synthetic_corpus;
use clonevet_core::mutation::generate_benchmark;
use clonevet_core::store::{CloneStore, RecordSource};
use clonevet_core::{ClonePair, CodeFragment, Label};
use clonevet_service::{build_router, AppState, ServiceConfig};

const FRAGMENT_1: &str = "try {\n    if (args.length == 0) {\n\tthrow new Exception(\n\t    \"The first argument must be the class name of a kernel\");\n    }\n    String associator = args[0];\n    args[0] = \">\";\n    System.out.println(evaluate(associator, args));\n}\n";

fn bench_pairs(t: usize, f: usize) -> Vec<ClonePair> {
    let corpus = synthetic_corpus(6, 5, 3);
    generate_benchmark(&corpus, t, f, &[1.0; 9], 11).unwrap().0
}

fn small_model() -> clonevet_core::classifiers::Model {
    let ts = TrainingSet::from_pairs(&bench_pairs(40, 40), false).unwrap();
    let cfg = NeuralNetConfig { max_epochs: 300, ..Default::default() };
    train(&ts, &TrainerConfig::NeuralNet(cfg)).unwrap()
}

fn state_with(model: bool) -> Arc<AppState> {
    let cfg = ServiceConfig { cv_folds: 3, ..Default::default() };
    Arc::new(AppState::new(CloneStore::in_memory(), model.then(small_model), cfg))
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = build_router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn raw_post(state: &Arc<AppState>, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder().method("POST").uri(uri).body(Body::from(body.to_string())).unwrap();
    let resp = build_router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn probs(v: &Value) -> (f64, f64) {
    let o = &v["output"];
    (o["prob_false_clone_pair"].as_f64().unwrap(), o["prob_true_clone_pair"].as_f64().unwrap())
}

#[tokio::test]
async fn sample_request_gets_documented_response() {
    let state = state_with(true);
    let body = json!({ "lang": "Java", "sourceCode_1": FRAGMENT_1, "sourceCode_2": FRAGMENT_1 });
    let (status, v) = call(&state, "POST", "/api/validate", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    for key in ["output", "log_msg", "error_msg", "decision", "gamma_used"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["error_msg"].is_null());
    let (pf, pt) = probs(&v);
    assert!((pf + pt - 1.0).abs() < 1e-9);
    assert!(pt > pf, "{v}");
    assert_eq!(v["decision"], "TruePositive");
    assert_eq!(v["gamma_used"], 0.5);
    let log = v["log_msg"].as_str().unwrap();
    assert!(log.contains("normalization") && log.contains("feature extraction") && log.contains("prediction"));
}

#[tokio::test]
async fn malformed_requests_are_rejected() {
    let state = state_with(true);
    let (status, v) = call(&state, "POST", "/api/validate", Some(json!({ "lang": "Java", "sourceCode_1": "a();" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error_msg"], "missing field: sourceCode_2");
    assert!(v.get("output").is_none());

    let (status, v) = raw_post(&state, "/api/validate", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error_msg"].as_str().unwrap().starts_with("invalid JSON"));

    let body = json!({ "lang": "Java", "sourceCode_1": "a();", "sourceCode_2": "", });
    let (status, _) = call(&state, "POST", "/api/validate", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let body = json!({ "lang": "Java", "sourceCode_1": "a();", "sourceCode_2": "a();", "gamma": 2.0 });
    let (status, _) = call(&state, "POST", "/api/validate", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unsupported_language_and_unknown_model() {
    let state = state_with(true);
    let body = json!({ "lang": "COBOL", "sourceCode_1": "a", "sourceCode_2": "b" });
    let (status, v) = call(&state, "POST", "/api/validate", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error_msg"].is_string() && v.get("output").is_none());

    let body = json!({ "lang": "Java", "sourceCode_1": "a();", "sourceCode_2": "a();", "model": "fica" });
    let (status, _) = call(&state, "POST", "/api/validate", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn no_model_is_unavailable() {
    let state = state_with(false);
    let body = json!({ "lang": "Java", "sourceCode_1": "a();", "sourceCode_2": "a();" });
    let (status, v) = call(&state, "POST", "/api/validate", Some(body)).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert!(v["error_msg"].is_string());
    let (status, v) = call(&state, "GET", "/api/model", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["loaded"], false);
}

#[tokio::test]
async fn random_requests_sum_to_one() {
    let state = state_with(true);
    let pairs = bench_pairs(50, 50);
    for p in &pairs {
        let body = json!({
            "lang": "java",
            "sourceCode_1": p.fragment1.source_text,
            "sourceCode_2": p.fragment2.source_text,
            "gamma": 0.3,
        });
        let (status, v) = call(&state, "POST", "/api/validate", Some(body)).await;
        assert_eq!(status, StatusCode::OK);
        let (pf, pt) = probs(&v);
        assert!((pf + pt - 1.0).abs() < 1e-9);
        assert_eq!((pt * 1e6).round() / 1e6, pt);
        let expected = if pt >= 0.3 { "TruePositive" } else { "FalsePositive" };
        assert_eq!(v["decision"], expected);
    }
}

#[tokio::test]
async fn feedback_imports_labels_and_is_idempotent() {
    let state = state_with(false);
    let body = json!({ "sourceCode_1": "a();", "sourceCode_2": "b();", "label": "TP", "labeler": "ann", "pair_id": "new-1" });
    let (status, v) = call(&state, "POST", "/api/feedback", Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["imported"], true);
    let rec = state.store.get("new-1").unwrap();
    assert_eq!(rec.source, RecordSource::ApiFeedback);
    assert_eq!(rec.current_label(), Some(Label::TruePositive));

    let (status, v) = call(&state, "POST", "/api/feedback", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["history_length"], 1);

    let (status, v) =
        call(&state, "POST", "/api/feedback", Some(json!({ "pair_id": "new-1", "label": "maybe", "labeler": "ann" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error_msg"].is_string());

    let (status, _) = call(&state, "POST", "/api/feedback", Some(json!({ "pair_id": "new-1", "label": "FP" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&state, "POST", "/api/feedback", Some(json!({ "pair_id": "ghost", "label": "FP", "labeler": "ann" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, v) = call(&state, "POST", "/api/feedback", Some(json!({ "pair_id": "new-1", "label": "FP", "labeler": "ann" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["history_length"], 2);
}

#[tokio::test]
async fn training_contracts() {
    let state = state_with(false);
    for (i, p) in bench_pairs(5, 0).into_iter().enumerate() {
        let mut p = p;
        p.id = format!("t{i}");
        state.store.insert(p, RecordSource::MutationBench).unwrap();
    }
    let (status, v) = call(&state, "POST", "/api/train", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v}");

    {
        let _slot = state.try_begin_training().unwrap();
        let (status, v) = call(&state, "POST", "/api/train", None).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert!(v["error_msg"].as_str().unwrap().contains("already running"));
    }

    let (status, v) = call(&state, "POST", "/api/train", Some(json!({ "model": "unknown" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
}

#[tokio::test]
async fn training_swaps_the_served_model() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    let cfg = ServiceConfig {
        cv_folds: 3,
        model_path: Some(model_path.clone()),
        trainer: TrainerConfig::NeuralNet(NeuralNetConfig { max_epochs: 200, ..Default::default() }),
        ..Default::default()
    };
    let state = Arc::new(AppState::new(CloneStore::in_memory(), None, cfg));
    for p in bench_pairs(30, 30) {
        state.store.insert(p, RecordSource::MutationBench).unwrap();
    }
    let (status, v) = call(&state, "POST", "/api/train", Some(json!({}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["model"], "neural_net");
    assert_eq!(v["train_size"], 60);
    assert_eq!(v["cv"]["k"], 3);
    assert!(model_path.exists());

    let (_, m) = call(&state, "GET", "/api/model", None).await;
    assert_eq!(m["loaded"], true);
    assert_eq!(m["kind"], "neural_net");
    assert_eq!(m["store"]["true_positive"], 30);

    let body = json!({ "lang": "Java", "sourceCode_1": FRAGMENT_1, "sourceCode_2": FRAGMENT_1 });
    let (status, v) = call(&state, "POST", "/api/validate", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let (pf, pt) = probs(&v);
    assert!(pt > pf);

    let (status, v) = call(&state, "POST", "/api/train", Some(json!({ "model": "fica", "k": 2 }))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["model"], "tf_idf");
    let body = json!({ "lang": "Java", "sourceCode_1": "int a = 1;", "sourceCode_2": "int a = 1;", "model": "fica" });
    let (status, _) = call(&state, "POST", "/api/validate", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn queue_paging_and_predictions() {
    let state = state_with(true);
    let (status, v) = call(&state, "GET", "/api/queue?labeler=ann", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["items"].as_array().unwrap().len(), 0);
    assert_eq!(v["total"], 0);

    for i in 0..50 {
        let p = ClonePair::new(format!("q{i:02}"), CodeFragment::java(format!("int a = {i};\nf(a);")), CodeFragment::java("f(b);"));
        state.store.insert(p, RecordSource::DetectorImport).unwrap();
    }
    let mut sizes = Vec::new();
    for page in 0..3 {
        let (_, v) = call(&state, "GET", &format!("/api/queue?labeler=ann&page={page}&page_size=20"), None).await;
        sizes.push(v["items"].as_array().unwrap().len());
        let first = &v["items"][0];
        assert_eq!(first["features"].as_array().unwrap().len(), 8);
        let pr = &first["prediction"];
        let s = pr["prob_true_clone_pair"].as_f64().unwrap() + pr["prob_false_clone_pair"].as_f64().unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }
    assert_eq!(sizes, vec![20, 20, 10]);

    call(&state, "POST", "/api/feedback", Some(json!({ "pair_id": "q00", "label": "FP", "labeler": "ann" }))).await;
    let (_, v) = call(&state, "GET", "/api/queue?page_size=20", None).await;
    assert_eq!(v["total"], 49);
    assert_eq!(v["items"][0]["pair_id"], "q01");
}

#[tokio::test]
async fn cors_headers_present() {
    let state = state_with(false);
    let req = Request::builder()
        .method("GET")
        .uri("/api/model")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = build_router(state).oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}
