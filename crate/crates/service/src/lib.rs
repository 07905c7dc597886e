//! HTTP front end for clone validation.
//!
//! Routes:
//!
//! * `POST /api/validate` scores an inline pair with the served model.
//! * `POST /api/feedback` records a human label, importing the pair if needed.
//! * `POST /api/train` retrains on the store and swaps the served model.
//! * `GET /api/queue` pages through unlabeled pairs with predictions.
//! * `GET /api/model` describes the served model.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tower_http::cors::{Any, CorsLayer};

use clonevet_core::classifiers::document::input_names;
use clonevet_core::classifiers::{
    decide, deserialize_model, serialize_model, train, train_fica, BandwidthRule, DecisionConfig, Model,
    NaiveBayesConfig, NeuralNetConfig, Prediction, TrainerConfig,
};
use clonevet_core::evaluation::{k_fold_cross_validate, k_fold_cross_validate_pairs, CVReport};
use clonevet_core::features::FEATURE_NAMES;
use clonevet_core::store::{pair_id_for, CloneStore, RecordSource, TrainingFilter};
use clonevet_core::{ClonePair, CodeFragment, Error, Label, Language};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub port: u16,
    /// In-memory store when absent.
    pub store_path: Option<PathBuf>,
    /// Loaded at startup if present; rewritten after each training job.
    pub model_path: Option<PathBuf>,
    pub default_gamma: f64,
    /// Allowed browser origin; any origin when absent.
    pub cors_origin: Option<String>,
    pub trainer: TrainerConfig,
    pub cv_folds: usize,
    pub seed: u64,
    pub page_size: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            store_path: None,
            model_path: None,
            default_gamma: 0.5,
            cors_origin: None,
            trainer: TrainerConfig::default(),
            cv_folds: 10,
            seed: 42,
            page_size: 20,
        }
    }
}

pub struct AppState {
    pub store: Arc<CloneStore>,
    model: RwLock<Option<Arc<Model>>>,
    training: AtomicBool,
    pub config: ServiceConfig,
}

/// Held while a training job runs; releases the slot on drop.
pub struct TrainingSlot<'a>(&'a AtomicBool);

impl Drop for TrainingSlot<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

impl AppState {
    pub fn new(store: CloneStore, model: Option<Model>, config: ServiceConfig) -> Self {
        AppState {
            store: Arc::new(store),
            model: RwLock::new(model.map(Arc::new)),
            training: AtomicBool::new(false),
            config,
        }
    }

    /// Opens the configured store and loads the model file if one exists.
    pub fn from_config(config: ServiceConfig) -> Result<Self, Error> {
        DecisionConfig::new(config.default_gamma)?;
        let store = match &config.store_path {
            Some(p) => CloneStore::open(p)?,
            None => CloneStore::in_memory(),
        };
        let model = match &config.model_path {
            Some(p) if p.exists() => Some(deserialize_model(&std::fs::read_to_string(p)?)?),
            _ => None,
        };
        Ok(AppState::new(store, model, config))
    }

    pub fn model(&self) -> Option<Arc<Model>> {
        self.model.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn swap_model(&self, model: Model) {
        *self.model.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(model));
    }

    /// `None` if a job is already running.
    pub fn try_begin_training(&self) -> Option<TrainingSlot<'_>> {
        self.training
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| TrainingSlot(&self.training))
    }
}

pub fn build_router(state: Arc<AppState>) -> Router {
    let cors = match state.config.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(origin)) => CorsLayer::new().allow_origin(origin),
        _ => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    Router::new()
        .route("/api/validate", post(handle_validate))
        .route("/api/feedback", post(handle_feedback))
        .route("/api/train", post(handle_train))
        .route("/api/queue", get(handle_queue))
        .route("/api/model", get(handle_model))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let port = config.port;
    let state = AppState::from_config(config).map_err(std::io::Error::other)?;
    let app = build_router(Arc::new(state));
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], port))).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}

/// Rounds to six decimals and keeps the pair summing to one.
pub fn wire_probabilities(p: &Prediction) -> (f64, f64) {
    let t = (p.probs[0] * 1e6).round() / 1e6;
    let f = ((1.0 - t) * 1e6).round() / 1e6;
    (f, t)
}

fn error_body(status: StatusCode, log_msg: &str, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "log_msg": log_msg, "error_msg": msg.into() }))).into_response()
}

fn parse_body(body: &Bytes) -> Result<Map<String, Value>, String> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err("request body must be a JSON object".into()),
        Err(e) => Err(format!("invalid JSON: {e}")),
    }
}

fn required_str<'a>(m: &'a Map<String, Value>, key: &str) -> Result<&'a str, String> {
    match m.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s),
        Some(Value::String(_)) | None | Some(Value::Null) => Err(format!("missing field: {key}")),
        Some(_) => Err(format!("field {key} must be a string")),
    }
}

fn optional_str<'a>(m: &'a Map<String, Value>, key: &str) -> Result<Option<&'a str>, String> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(format!("field {key} must be a string")),
    }
}

fn model_matches(requested: &str, model: &Model) -> bool {
    let r = requested.trim().to_ascii_lowercase();
    r == "default"
        || r == model.kind()
        || matches!(
            (r.as_str(), model),
            ("nn" | "neural-net" | "neuralnet", Model::NeuralNet(_))
                | ("nb" | "bayes" | "naive-bayes", Model::NaiveBayes(_))
                | ("fica" | "tfidf" | "tf-idf", Model::TfIdf(_))
        )
}

async fn handle_validate(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let mut log = vec!["request received".to_string()];
    let bad = |log: &[String], msg: String| error_body(StatusCode::BAD_REQUEST, &log.join(", "), msg);
    let m = match parse_body(&body) {
        Ok(m) => m,
        Err(e) => return bad(&log, e),
    };
    let fields = (|| {
        Ok::<_, String>((
            required_str(&m, "lang")?,
            required_str(&m, "sourceCode_1")?,
            required_str(&m, "sourceCode_2")?,
            optional_str(&m, "model")?,
        ))
    })();
    let (lang, code1, code2, requested) = match fields {
        Ok(f) => f,
        Err(e) => return bad(&log, e),
    };
    let gamma = match m.get("gamma") {
        None | Some(Value::Null) => state.config.default_gamma,
        Some(v) => match v.as_f64().map(DecisionConfig::new) {
            Some(Ok(d)) => d.gamma,
            _ => return bad(&log, "gamma must be a number in [0, 1]".into()),
        },
    };
    let language: Language = match lang.parse() {
        Ok(l) => l,
        Err(e) => return error_body(StatusCode::UNPROCESSABLE_ENTITY, &log.join(", "), e.to_string()),
    };
    let Some(model) = state.model() else {
        return error_body(StatusCode::SERVICE_UNAVAILABLE, &log.join(", "), "no model loaded");
    };
    if let Some(r) = requested.filter(|r| !model_matches(r, &model)) {
        let msg = format!("model {r} is not loaded; serving {}", model.kind());
        return error_body(StatusCode::UNPROCESSABLE_ENTITY, &log.join(", "), msg);
    }
    let fragment = |code: &str| {
        let mut f = CodeFragment::java(code);
        f.language = language;
        f
    };
    let pair = ClonePair::new("request", fragment(code1), fragment(code2));
    log.push(format!("normalization: {lang} fragments of {} and {} lines", pair.fragment1.raw_lines(), pair.fragment2.raw_lines()));
    let model_for_job = model.clone();
    let pred = tokio::task::spawn_blocking(move || model_for_job.predict_pair(&pair)).await;
    let pred = match pred {
        Ok(Ok(p)) => p,
        Ok(Err(e)) => return error_body(StatusCode::UNPROCESSABLE_ENTITY, &log.join(", "), e.to_string()),
        Err(e) => return error_body(StatusCode::INTERNAL_SERVER_ERROR, &log.join(", "), e.to_string()),
    };
    match model.as_ref() {
        Model::TfIdf(m) => log.push(format!("feature extraction: {}-gram terms", m.n)),
        other => log.push(format!("feature extraction: {} features", other.input_dim())),
    }
    log.push(format!("prediction: {}", model.kind()));
    let (pf, pt) = wire_probabilities(&pred);
    let decision = decide(&pred, &DecisionConfig { gamma });
    Json(json!({
        "output": { "prob_false_clone_pair": pf, "prob_true_clone_pair": pt },
        "log_msg": log.join(", "),
        "error_msg": null,
        "decision": decision.to_string(),
        "gamma_used": gamma,
    }))
    .into_response()
}

async fn handle_feedback(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let bad = |msg: String| (StatusCode::BAD_REQUEST, Json(json!({ "error_msg": msg }))).into_response();
    let m = match parse_body(&body) {
        Ok(m) => m,
        Err(e) => return bad(e),
    };
    let label: Label = match required_str(&m, "label").map(|s| s.parse()) {
        Ok(Ok(l)) => l,
        Ok(Err(e)) => return bad(e.to_string()),
        Err(e) => return bad(e),
    };
    let labeler = match required_str(&m, "labeler") {
        Ok(l) => l.trim().to_string(),
        Err(e) => return bad(e),
    };
    let pair_id = match optional_str(&m, "pair_id") {
        Ok(p) => p.map(str::to_string),
        Err(e) => return bad(e),
    };
    let known = pair_id.as_deref().is_some_and(|id| state.store.contains(id));
    let mut imported = false;
    let id = if known {
        pair_id.expect("known implies present")
    } else {
        let parts = (|| {
            Ok::<_, String>((
                required_str(&m, "sourceCode_1")?,
                required_str(&m, "sourceCode_2")?,
                optional_str(&m, "lang")?.unwrap_or("java"),
                optional_str(&m, "detector")?,
            ))
        })();
        let (c1, c2, lang, detector) = match parts {
            Ok(p) => p,
            Err(e) => return bad(e),
        };
        if let Err(e) = lang.parse::<Language>() {
            return bad(e.to_string());
        }
        let id = pair_id.unwrap_or_else(|| pair_id_for(&[c1, c2]));
        let mut pair = ClonePair::new(id.clone(), CodeFragment::java(c1), CodeFragment::java(c2));
        pair.detector = detector.map(str::to_string);
        match state.store.insert(pair, RecordSource::ApiFeedback) {
            Ok(added) => imported = added,
            Err(e) => return error_body(StatusCode::INTERNAL_SERVER_ERROR, "", e.to_string()),
        }
        id
    };
    match state.store.record_label(&id, &labeler, label) {
        Ok(rec) => Json(json!({
            "pair_id": id,
            "label": label.to_string(),
            "labeler": labeler,
            "imported": imported,
            "history_length": rec.history.len(),
        }))
        .into_response(),
        Err(e @ Error::LabelWithoutLabeler(_)) => bad(e.to_string()),
        Err(e) => error_body(StatusCode::INTERNAL_SERVER_ERROR, "", e.to_string()),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct TrainRequest {
    model: Option<String>,
    k: Option<usize>,
    labelers: Option<Vec<String>>,
}

enum Trainer {
    Features(TrainerConfig),
    Fica,
}

fn trainer_for(name: Option<&str>, default: &TrainerConfig) -> Result<Trainer, String> {
    match name.map(|s| s.trim().to_ascii_lowercase()).as_deref() {
        None | Some("default") => Ok(Trainer::Features(default.clone())),
        Some("nn" | "neural_net" | "neural-net") => Ok(Trainer::Features(TrainerConfig::NeuralNet(NeuralNetConfig::default()))),
        Some("deep" | "mlp") => Ok(Trainer::Features(TrainerConfig::NeuralNet(NeuralNetConfig::deep()))),
        Some("nb" | "bayes" | "naive_bayes" | "naive-bayes") => Ok(Trainer::Features(TrainerConfig::NaiveBayes(
            NaiveBayesConfig { bandwidth_rule: BandwidthRule::Silverman },
        ))),
        Some("fica" | "tf_idf" | "tfidf" | "tf-idf") => Ok(Trainer::Fica),
        Some(other) => Err(format!("unknown model {other:?}")),
    }
}

struct TrainOutcome {
    model: Model,
    train_size: usize,
    class_counts: [usize; 2],
    cv: Option<CVReport>,
}

fn run_training(state: &AppState, trainer: &Trainer, k: usize, filter: &TrainingFilter) -> Result<TrainOutcome, Error> {
    let seed = state.config.seed;
    let gamma = state.config.default_gamma;
    let cv_or_none = |r: Result<CVReport, Error>| match r {
        Ok(r) => Ok(Some(r)),
        Err(Error::InsufficientData(why)) => {
            log::warn!("skipping cross-validation: {why}");
            Ok(None)
        }
        Err(e) => Err(e),
    };
    match trainer {
        Trainer::Features(cfg) => {
            let ts = state.store.assemble_training_set(filter, false);
            ts.check_trainable()?;
            let cv = if k >= 2 { cv_or_none(k_fold_cross_validate(&ts, k, cfg, seed, gamma))? } else { None };
            let model = train(&ts, cfg)?;
            Ok(TrainOutcome { model, train_size: ts.len(), class_counts: ts.class_counts(), cv })
        }
        Trainer::Fica => {
            let pairs = state.store.labeled_pairs(filter);
            let mut counts = [0, 0];
            for p in &pairs {
                counts[p.label.expect("labeled").class_index()] += 1;
            }
            if counts.contains(&0) {
                return Err(Error::SingleClassTrainingSet);
            }
            let cv = if k >= 2 { cv_or_none(k_fold_cross_validate_pairs(&pairs, k, seed, gamma))? } else { None };
            let model = Model::TfIdf(train_fica(&pairs)?);
            Ok(TrainOutcome { model, train_size: pairs.len(), class_counts: counts, cv })
        }
    }
}

async fn handle_train(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: TrainRequest = if body.iter().all(u8::is_ascii_whitespace) {
        TrainRequest::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error_body(StatusCode::BAD_REQUEST, "", format!("invalid JSON: {e}")),
        }
    };
    let trainer = match trainer_for(req.model.as_deref(), &state.config.trainer) {
        Ok(t) => t,
        Err(e) => return error_body(StatusCode::BAD_REQUEST, "", e),
    };
    if state.training.load(Ordering::Acquire) {
        return error_body(StatusCode::CONFLICT, "", "training already running");
    }
    let k = req.k.unwrap_or(state.config.cv_folds);
    let filter = TrainingFilter { labelers: req.labelers, ..Default::default() };
    let job_state = state.clone();
    let job = tokio::task::spawn_blocking(move || {
        let Some(_slot) = job_state.try_begin_training() else {
            return Err(None);
        };
        let outcome = run_training(&job_state, &trainer, k, &filter).map_err(Some)?;
        if let Some(path) = &job_state.config.model_path {
            let doc = serialize_model(&outcome.model).map_err(Some)?;
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, doc).and_then(|_| std::fs::rename(&tmp, path)).map_err(|e| Some(e.into()))?;
        }
        job_state.swap_model(outcome.model.clone());
        Ok(outcome)
    })
    .await;
    match job {
        Ok(Ok(o)) => Json(json!({
            "model": o.model.kind(),
            "train_size": o.train_size,
            "class_counts": { "true_positive": o.class_counts[0], "false_positive": o.class_counts[1] },
            "cv": o.cv.map(|r| json!({ "k": r.k, "mean": r.mean, "std": r.std })),
            "error_msg": null,
        }))
        .into_response(),
        Ok(Err(None)) => error_body(StatusCode::CONFLICT, "", "training already running"),
        Ok(Err(Some(e @ (Error::SingleClassTrainingSet | Error::EmptyPartition | Error::InsufficientClasses)))) => {
            error_body(StatusCode::UNPROCESSABLE_ENTITY, "", format!("{e}; label at least one pair of each class"))
        }
        Ok(Err(Some(e))) => error_body(StatusCode::INTERNAL_SERVER_ERROR, "", e.to_string()),
        Err(e) => error_body(StatusCode::INTERNAL_SERVER_ERROR, "", e.to_string()),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct QueueQuery {
    labeler: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

async fn handle_queue(State(state): State<Arc<AppState>>, Query(q): Query<QueueQuery>) -> Response {
    let page = q.page.unwrap_or(0);
    let page_size = q.page_size.unwrap_or(state.config.page_size).clamp(1, 500);
    let (records, total) = state.store.unlabeled_page(page, page_size);
    let model = state.model();
    let gamma = state.config.default_gamma;
    let store = state.store.clone();
    let items = tokio::task::spawn_blocking(move || {
        records
            .iter()
            .map(|r| {
                let p = &r.pair;
                let features = store.features(p, false).ok();
                let prediction = model.as_ref().and_then(|m| {
                    let pred = match (m.as_ref(), &features) {
                        (Model::TfIdf(_), _) => m.predict_pair(p).ok()?,
                        (_, Some(x)) if x.len() == m.input_dim() => m.predict(x).ok()?,
                        _ => m.predict_pair(p).ok()?,
                    };
                    let (pf, pt) = wire_probabilities(&pred);
                    Some(json!({
                        "prob_false_clone_pair": pf,
                        "prob_true_clone_pair": pt,
                        "decision": decide(&pred, &DecisionConfig { gamma }).to_string(),
                    }))
                });
                json!({
                    "pair_id": p.id,
                    "sourceCode_1": p.fragment1.source_text,
                    "sourceCode_2": p.fragment2.source_text,
                    "detector": p.detector,
                    "source": r.source,
                    "features": features.map(|f| f.values),
                    "prediction": prediction,
                })
            })
            .collect::<Vec<_>>()
    })
    .await
    .unwrap_or_default();
    Json(json!({
        "labeler": q.labeler,
        "page": page,
        "page_size": page_size,
        "total": total,
        "items": items,
    }))
    .into_response()
}

async fn handle_model(State(state): State<Arc<AppState>>) -> Response {
    let counts = state.store.counts();
    let store = json!({
        "true_positive": counts.true_positive,
        "false_positive": counts.false_positive,
        "unlabeled": counts.unlabeled,
    });
    let training = state.training.load(Ordering::Acquire);
    let body = match state.model() {
        Some(m) => {
            let names = if m.input_dim() == 0 { Vec::new() } else { input_names(m.input_dim()) };
            json!({
                "loaded": true,
                "kind": m.kind(),
                "input_dim": m.input_dim(),
                "feature_names": names,
                "default_gamma": state.config.default_gamma,
                "training": training,
                "store": store,
            })
        }
        None => json!({
            "loaded": false,
            "feature_names": FEATURE_NAMES,
            "default_gamma": state.config.default_gamma,
            "training": training,
            "store": store,
        }),
    };
    Json(body).into_response()
}
