//! Stateless HTTP analysis service.
//!
//! * `POST /v1/analyze` analyzes a query against a reference and returns the
//!   report plus plot-ready spectra and correlation curves per word.
//! * `GET /v1/health` and `GET /v1/config` describe the server.
//! * Any other `GET` is served from the static directory, if one is set.
//!
//! Every JSON response carries `"version": 1`.

use std::io::Read;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use base64::Engine;
use emphadet::audio_io::condition_with;
use emphadet::{
    analyze_with_evidence, read_wav_bytes, AnalysisConfig, AnalysisReport, Error, ReferenceProvider,
    UtteranceKey, WordEvidence,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tiny_http::{Header, Method, Request, Response, Server};

use crate::settings::apply_overrides;

pub const API_VERSION: u32 = 1;
pub const MAX_BODY_BYTES: usize = 25 * 1024 * 1024;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    /// Base64-encoded WAV.
    pub query_audio: String,
    pub reference_audio: Option<String>,
    pub transcript: Option<String>,
    pub speaker_id: Option<String>,
    pub utterance_id: Option<String>,
    #[serde(default)]
    pub overrides: Value,
}

#[derive(Debug, Serialize)]
pub struct WordPlot {
    pub index: usize,
    /// `(frequency_hz, magnitude)` rows.
    pub query_spectrum: Vec<(f64, f64)>,
    pub reference_spectrum: Vec<(f64, f64)>,
    /// `(lag_hz, value)` rows.
    pub correlation: Vec<(f64, f64)>,
    pub peak_lag_hz: f64,
    pub peak_value: f64,
}

impl From<&WordEvidence> for WordPlot {
    fn from(e: &WordEvidence) -> Self {
        Self {
            index: e.index,
            query_spectrum: e.query_spectrum.rows(),
            reference_spectrum: e.reference_spectrum.rows(),
            correlation: e.correlation.rows(),
            peak_lag_hz: e.correlation.peak_lag_hz,
            peak_value: e.correlation.peak_value,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AnalyzeResponse {
    pub version: u32,
    pub report: AnalysisReport,
    pub plots: Vec<WordPlot>,
}

/// A response before it is written to the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Reply {
    fn json(status: u16, value: &impl Serialize) -> Self {
        Self { status, content_type: "application/json", body: serde_json::to_vec(value).expect("response serializes") }
    }

    fn error(status: u16, code: &str, message: impl Into<String>) -> Self {
        Self::json(status, &json!({ "version": API_VERSION, "error": { "code": code, "message": message.into() } }))
    }

    fn from_error(err: &Error) -> Self {
        let status = match err {
            Error::AlignmentFailed { .. } | Error::NoSpeech | Error::EmptyAfterTrim | Error::BufferTooShort { .. } => 422,
            Error::ProviderTimeout(_) => 504,
            Error::ProviderUnreachable(_) | Error::ProviderError(_) | Error::MissingFixture(_) => 502,
            Error::Io(_) => 500,
            _ => 400,
        };
        Self::error(status, err.code(), err.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct Service {
    pub config: AnalysisConfig,
    pub provider: Option<ReferenceProvider>,
    pub static_dir: Option<PathBuf>,
}

impl Service {
    pub fn new(config: AnalysisConfig) -> Self {
        Self { config, provider: None, static_dir: None }
    }

    /// Routes one request. `body` is `None` when it exceeded [`MAX_BODY_BYTES`].
    pub fn handle(&self, method: &str, url: &str, body: Option<&[u8]>) -> Reply {
        let path = url.split('?').next().unwrap_or("/");
        match (method, path) {
            ("GET", "/v1/health") => {
                Reply::json(200, &json!({ "version": API_VERSION, "status": "ok", "service": env!("CARGO_PKG_VERSION") }))
            }
            ("GET", "/v1/config") => Reply::json(200, &json!({ "version": API_VERSION, "config": self.config })),
            ("POST", "/v1/analyze") => match body {
                None => Reply::error(413, "payload_too_large", format!("request body exceeds {MAX_BODY_BYTES} bytes")),
                Some(bytes) => self.analyze(bytes),
            },
            (_, "/v1/analyze" | "/v1/health" | "/v1/config") => Reply::error(405, "method_not_allowed", format!("{method} {path}")),
            ("GET", _) => self.static_file(path),
            _ => Reply::error(404, "not_found", path.to_string()),
        }
    }

    fn analyze(&self, body: &[u8]) -> Reply {
        let request: AnalyzeRequest = match serde_json::from_slice(body) {
            Ok(r) => r,
            Err(e) => return Reply::error(400, "malformed_request", e.to_string()),
        };
        let config = if request.overrides.is_null() {
            self.config
        } else {
            match apply_overrides(&self.config, &request.overrides) {
                Ok(c) => c,
                Err(e) => return Reply::error(400, "invalid_config", e),
            }
        };
        match self.run_analysis(&request, &config) {
            Ok(response) => Reply::json(200, &response),
            Err(AnalyzeFailure::Bad(message)) => Reply::error(400, "malformed_request", message),
            Err(AnalyzeFailure::Core(e)) => Reply::from_error(&e),
        }
    }

    fn run_analysis(&self, request: &AnalyzeRequest, config: &AnalysisConfig) -> Result<AnalyzeResponse, AnalyzeFailure> {
        let decode = |field: &str, text: &str| -> Result<_, AnalyzeFailure> {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(text.trim())
                .map_err(|e| AnalyzeFailure::Bad(format!("{field} is not valid base64: {e}")))?;
            Ok(condition_with(&read_wav_bytes(&bytes)?, &config.segmentation)?)
        };
        let query = decode("query_audio", &request.query_audio)?;
        let key = UtteranceKey::new(
            request.speaker_id.clone().unwrap_or_default(),
            request.utterance_id.clone().unwrap_or_default(),
        );
        let provider = || {
            self.provider
                .as_ref()
                .ok_or_else(|| AnalyzeFailure::Bad("this server has no reference provider configured".into()))
        };
        let tokens = match &request.transcript {
            Some(text) => {
                let tokens = emphadet::tokenize(text);
                if tokens.is_empty() {
                    return Err(AnalyzeFailure::Bad("transcript has no words".into()));
                }
                tokens
            }
            None => provider()?.transcribe(&query, &key)?,
        };
        let reference = match (&request.reference_audio, &request.speaker_id) {
            (Some(audio), _) => decode("reference_audio", audio)?,
            (None, Some(_)) => provider()?.synthesize_reference(&tokens, &key)?,
            (None, None) => return Err(AnalyzeFailure::Bad("either reference_audio or speaker_id is required".into())),
        };
        let (report, evidence) = analyze_with_evidence(&query, &reference, &tokens, config)?;
        Ok(AnalyzeResponse { version: API_VERSION, report, plots: evidence.iter().map(WordPlot::from).collect() })
    }

    fn static_file(&self, path: &str) -> Reply {
        let Some(root) = &self.static_dir else {
            return Reply::error(404, "not_found", path.to_string());
        };
        let relative = Path::new(path.trim_start_matches('/'));
        if relative.components().any(|c| !matches!(c, Component::Normal(_))) {
            return Reply::error(404, "not_found", path.to_string());
        }
        let mut file = root.join(relative);
        if file.is_dir() {
            file = file.join("index.html");
        }
        match std::fs::read(&file) {
            Ok(body) => Reply { status: 200, content_type: content_type(&file), body },
            Err(_) => Reply::error(404, "not_found", path.to_string()),
        }
    }
}

enum AnalyzeFailure {
    Bad(String),
    Core(Error),
}

impl From<Error> for AnalyzeFailure {
    fn from(e: Error) -> Self {
        AnalyzeFailure::Core(e)
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("wasm") => "application/wasm",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("wav") => "audio/wav",
        _ => "application/octet-stream",
    }
}

fn read_body(request: &mut Request) -> std::io::Result<Option<Vec<u8>>> {
    if request.body_length().is_some_and(|n| n > MAX_BODY_BYTES) {
        return Ok(None);
    }
    let mut body = Vec::new();
    request.as_reader().take(MAX_BODY_BYTES as u64 + 1).read_to_end(&mut body)?;
    Ok((body.len() <= MAX_BODY_BYTES).then_some(body))
}

fn respond(mut request: Request, service: &Service) {
    let method = match request.method() {
        Method::Get => "GET",
        Method::Post => "POST",
        Method::Head => "HEAD",
        _ => "OTHER",
    }
    .to_string();
    let url = request.url().to_string();
    let reply = match read_body(&mut request) {
        Ok(body) => service.handle(&method, &url, body.as_deref()),
        Err(e) => Reply::error(400, "malformed_request", e.to_string()),
    };
    let header = Header::from_bytes("Content-Type", reply.content_type).expect("static header");
    let response = Response::from_data(reply.body).with_status_code(reply.status).with_header(header);
    let _ = request.respond(response);
}

/// A running server; dropping it leaves the workers running until
/// [`Handle::shutdown`] is called.
pub struct Handle {
    pub addr: SocketAddr,
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
}

impl Handle {
    pub fn shutdown(self) {
        self.server.unblock();
        for _ in 1..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers {
            let _ = w.join();
        }
    }

    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

/// Binds `addr` and serves requests on `threads` worker threads.
pub fn start(service: Service, addr: &str, threads: usize) -> Result<Handle, String> {
    let server = Arc::new(Server::http(addr).map_err(|e| format!("cannot bind {addr}: {e}"))?);
    let bound = server.server_addr().to_ip().ok_or_else(|| format!("{addr} is not an IP address"))?;
    let service = Arc::new(service);
    let workers = (0..threads.max(1))
        .map(|_| {
            let (server, service) = (Arc::clone(&server), Arc::clone(&service));
            std::thread::spawn(move || {
                while let Ok(request) = server.recv() {
                    respond(request, &service);
                }
            })
        })
        .collect();
    Ok(Handle { addr: bound, server, workers })
}
