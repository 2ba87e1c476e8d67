//! HTTP front end for the stitcher.
//!
//! Handlers call the same core functions as the CLI, so a request with an
//! explicit seed returns the bytes a local `stitch_sentence` + `encode_wav`
//! would produce. CPU work runs on the blocking pool.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use stitchvox_core::audio::encode_wav;
use stitchvox_core::seed::{seed_for_key, stable_hash};
use stitchvox_core::{
    cs_stitch, stitch_sentence, CsAssets, CsConfig, Error, SpeakerPolicy, SpokenVocabBank, StitchConfig,
};
use tokio::net::TcpListener;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_MAX_BATCH: usize = 256;
pub const REPORT_HEADER: &str = "x-stitch-report";
pub const CS_REPORT_HEADER: &str = "x-cs-report";

#[derive(Clone)]
pub struct AppState {
    pub bank: Arc<SpokenVocabBank>,
    pub cs: Option<Arc<CsAssets>>,
    pub max_batch: usize,
    /// Used when a request names no speaker.
    pub default_policy: SpeakerPolicy,
    pub base_config: StitchConfig,
}

impl AppState {
    pub fn new(bank: Arc<SpokenVocabBank>) -> Self {
        Self {
            bank,
            cs: None,
            max_batch: DEFAULT_MAX_BATCH,
            default_policy: SpeakerPolicy::UniformRandom,
            base_config: StitchConfig::default(),
        }
    }

    pub fn with_code_switching(mut self, assets: Arc<CsAssets>) -> Self {
        self.cs = Some(assets);
        self
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StitchRequest {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
    /// When absent the seed is a hash of `text`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distort: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_rate_hz: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fade_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsStitchRequest {
    #[serde(flatten)]
    pub stitch: StitchRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchItem {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRequest {
    /// Item `id` is stitched with `seed_for_key(seed, id)`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distort: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_rate_hz: Option<u32>,
    pub items: Vec<BatchItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BankInfo {
    pub speakers: Vec<String>,
    pub vocab_size: usize,
    pub sample_rate_hz: u32,
}

/// Seed used for a request that does not carry one.
pub fn default_seed(text: &str) -> u64 {
    stable_hash(text.as_bytes())
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_)
            | Error::OutOfRange { .. }
            | Error::UnknownSpeaker(_)
            | Error::NoStitchableTokens
            | Error::FillerNotInVocab(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

/// JSON with every non-ASCII character written as a `\u` escape, so the
/// result is a valid header value and still parses to the same document.
fn ascii_json<T: Serialize>(value: &T) -> String {
    let raw = serde_json::to_string(value).expect("reports always serialize");
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        if c.is_ascii() {
            out.push(c);
        } else {
            let mut units = [0u16; 2];
            for u in c.encode_utf16(&mut units) {
                out.push_str(&format!("\\u{u:04x}"));
            }
        }
    }
    out
}

fn policy_for(state: &AppState, speaker: &Option<String>) -> SpeakerPolicy {
    match speaker {
        Some(id) => SpeakerPolicy::Fixed(id.clone()),
        None => state.default_policy.clone(),
    }
}

fn config_for(
    state: &AppState,
    distort: Option<bool>,
    output_rate_hz: Option<u32>,
    fade_ms: Option<f64>,
) -> StitchConfig {
    let mut cfg = state.base_config.clone();
    if let Some(d) = distort {
        cfg.distort = d;
    }
    if output_rate_hz.is_some() {
        cfg.output_rate_hz = output_rate_hz;
    }
    if let Some(f) = fade_ms {
        cfg.fade_ms = f;
    }
    cfg
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))?
}

fn wav_response(wav: Vec<u8>, headers: Vec<(&'static str, String)>) -> Result<Response, ApiError> {
    let mut map = HeaderMap::new();
    map.insert(header::CONTENT_TYPE, HeaderValue::from_static("audio/wav"));
    for (name, value) in headers {
        let value = HeaderValue::from_str(&value)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        map.insert(name, value);
    }
    Ok((map, wav).into_response())
}

async fn healthz() -> &'static str {
    "ok"
}

async fn bank_info(State(state): State<AppState>) -> Json<BankInfo> {
    Json(BankInfo {
        speakers: state.bank.speakers().to_vec(),
        vocab_size: state.bank.vocab_size(),
        sample_rate_hz: state.bank.sample_rate_hz(),
    })
}

async fn stitch(State(state): State<AppState>, Json(req): Json<StitchRequest>) -> Result<Response, ApiError> {
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty text"));
    }
    let policy = policy_for(&state, &req.speaker);
    let cfg = config_for(&state, req.distort, req.output_rate_hz, req.fade_ms);
    let seed = req.seed.unwrap_or_else(|| default_seed(&req.text));
    let bank = state.bank.clone();
    let (wav, report) = blocking(move || {
        let (audio, report) = stitch_sentence(&req.text, &bank, &policy, &cfg, seed)?;
        Ok((encode_wav(&audio), report))
    })
    .await?;
    wav_response(wav, vec![(REPORT_HEADER, ascii_json(&report))])
}

async fn cs_stitch_handler(
    State(state): State<AppState>,
    Json(req): Json<CsStitchRequest>,
) -> Result<Response, ApiError> {
    let Some(assets) = state.cs.clone() else {
        return Err(ApiError::new(
            StatusCode::NOT_IMPLEMENTED,
            "code switching is not configured",
        ));
    };
    let base = &req.stitch;
    if base.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty text"));
    }
    let defaults = CsConfig::default();
    let cs_cfg = CsConfig {
        p: req.p.unwrap_or(defaults.p),
        n: req.n.unwrap_or(defaults.n),
        ..defaults
    };
    let policy = policy_for(&state, &base.speaker);
    let cfg = config_for(&state, base.distort, base.output_rate_hz, base.fade_ms);
    let seed = base.seed.unwrap_or_else(|| default_seed(&base.text));
    let text = req.stitch.text;
    let (wav, report, cs_report) = blocking(move || {
        let (audio, report, cs_report) = cs_stitch(&text, &assets, &cs_cfg, &cfg, &policy, seed)?;
        Ok((encode_wav(&audio), report, cs_report))
    })
    .await?;
    wav_response(
        wav,
        vec![
            (REPORT_HEADER, ascii_json(&report)),
            (CS_REPORT_HEADER, ascii_json(&cs_report)),
        ],
    )
}

async fn batch(State(state): State<AppState>, Json(req): Json<BatchRequest>) -> Result<Response, ApiError> {
    if req.items.len() > state.max_batch {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("batch of {} exceeds the limit of {}", req.items.len(), state.max_batch),
        ));
    }
    let cfg = config_for(&state, req.distort, req.output_rate_hz, None);
    let body = blocking(move || {
        let mut body = String::new();
        for item in &req.items {
            let policy = policy_for(&state, &item.speaker);
            let seed = seed_for_key(req.seed, &item.id);
            let line = match stitch_sentence(&item.text, &state.bank, &policy, &cfg, seed) {
                Ok((audio, report)) => serde_json::json!({
                    "id": item.id,
                    "wav_base64": BASE64.encode(encode_wav(&audio)),
                    "n_frames": audio.len(),
                    "report": report,
                }),
                Err(e) => serde_json::json!({ "id": item.id, "error": e.to_string() }),
            };
            body.push_str(&line.to_string());
            body.push('\n');
        }
        Ok(body)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/bank", get(bank_info))
        .route("/v1/stitch", post(stitch))
        .route("/v1/cs-stitch", post(cs_stitch_handler))
        .route("/v1/batch", post(batch))
        .layer(DefaultBodyLimit::max(16 * 1024 * 1024))
        .with_state(state)
}

/// Serve on an already bound listener until `shutdown` resolves. In-flight
/// requests are allowed to finish.
pub async fn serve_listener<F>(listener: TcpListener, state: AppState, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

pub async fn serve<F>(state: AppState, addr: SocketAddr, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    let listener = TcpListener::bind(addr).await?;
    serve_listener(listener, state, shutdown).await
}

/// Resolves on Ctrl-C.
pub async fn ctrl_c() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::warn!(error = %e, "cannot listen for ctrl-c; serving until killed");
        std::future::pending::<()>().await;
    }
}
