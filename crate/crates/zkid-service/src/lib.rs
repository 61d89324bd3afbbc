//! HTTP/JSON service exposing the identification protocol suite.
//!
//! Besides whole-run operations (keygen, run, bench, attack, curve-check,
//! info tables) the service hosts interactive verifier sessions: a remote
//! prover opens a session with its public key and exchanges wire frames
//! round by round until the verifier issues its verdict. Frames travel
//! hex-encoded inside JSON but keep the exact wire layout.
//!
//! ```text
//! GET    /v1/health
//! POST   /v1/keygen
//! POST   /v1/run
//! POST   /v1/bench
//! POST   /v1/attack
//! POST   /v1/curve-check
//! GET    /v1/info/security-levels
//! GET    /v1/info/nist-fields
//! POST   /v1/sessions
//! POST   /v1/sessions/{id}/frames
//! GET    /v1/sessions/{id}
//! DELETE /v1/sessions/{id}
//! ```

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use zkid_client::types::*;
use zkid_core::bench::{compare, BenchError, BenchPlan};
use zkid_core::ecc::{CurveParams, Point};
use zkid_core::keyfile::{self, KeyFileError};
use zkid_core::protocols::{
    attack, generate_setting, keygen, parse_params, run_rounds, verdict_frame, ProtocolConfig,
    ProtocolError, ProtocolId, ProverKey, SessionState, Setting, SettingSpec, Transcript,
    Verdict,
};
use zkid_core::wire::{decode_frame, encode_frame, Direction, Frame, MeteredChannel, MsgType};

const MAX_SESSIONS: usize = 4096;

// ---------------------------------------------------------------------------
// State and errors
// ---------------------------------------------------------------------------

struct VerifierSession {
    state: SessionState,
    rng: ChaCha20Rng,
    expected_rounds: u32,
    params_seen: bool,
    verdict: Option<Verdict>,
}

#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<String, VerifierSession>>,
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(ErrorBody {
                error: self.message,
            }),
        )
            .into_response()
    }
}

/// Domain failures on already-validated requests map to 422; the caller's
/// own mistakes map to 400 at the call sites.
fn domain_error(e: ProtocolError) -> ApiError {
    match e {
        ProtocolError::StateOrderViolation(m) => ApiError::conflict(m),
        ProtocolError::AttackFailed { .. } => ApiError::internal(e.to_string()),
        other => ApiError::unprocessable(other.to_string()),
    }
}

fn keyfile_error(e: KeyFileError) -> ApiError {
    ApiError::unprocessable(e.to_string())
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker task failed: {e}")))?
}

fn seeded_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn parse_protocol(name: &str) -> Result<ProtocolId, ApiError> {
    name.parse().map_err(|e: String| ApiError::bad_request(e))
}

fn hex_int(x: &BigUint) -> String {
    format!("0x{}", x.to_str_radix(16))
}

fn point_str(p: &Point) -> String {
    match p {
        Point::Infinity => "infinity".to_string(),
        Point::Affine { x, y } => format!("({}, {})", hex_int(x), hex_int(y)),
    }
}

// ---------------------------------------------------------------------------
// Router
// ---------------------------------------------------------------------------

pub fn router() -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/keygen", post(keygen_handler))
        .route("/v1/run", post(run_handler))
        .route("/v1/bench", post(bench_handler))
        .route("/v1/attack", post(attack_handler))
        .route("/v1/curve-check", post(curve_check_handler))
        .route("/v1/info/security-levels", get(security_levels_handler))
        .route("/v1/info/nist-fields", get(nist_fields_handler))
        .route("/v1/sessions", post(open_session_handler))
        .route(
            "/v1/sessions/{id}",
            get(session_status_handler).delete(close_session_handler),
        )
        .route("/v1/sessions/{id}/frames", post(session_frame_handler))
        .with_state(Arc::new(AppState::default()))
}

/// Serves forever on `addr`.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router()).await
}

/// Binds an ephemeral loopback port and serves in a background task;
/// used by the CLI when no `--server` is given and by tests.
pub async fn bind_ephemeral() -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        let _ = axum::serve(listener, router()).await;
    });
    Ok((addr, handle))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

// ---------------------------------------------------------------------------
// Key generation
// ---------------------------------------------------------------------------

fn spec_from_keygen(req: &KeygenRequest) -> SettingSpec {
    SettingSpec {
        modulus_bits: req.bits.unwrap_or(256),
        subgroup_bits: req.subgroup_bits.unwrap_or(64),
        ec_field_bits: req.ec_field_bits.or(req.bits).unwrap_or(16).min(20),
        ring_factor_bits: req.ring_factor_bits.unwrap_or(8),
    }
}

fn config_from_keygen(protocol: ProtocolId, req: &KeygenRequest) -> ProtocolConfig {
    let mut cfg = ProtocolConfig::new(protocol, 1);
    if let Some(k) = req.k {
        cfg.fs_secrets = k;
    }
    if let Some(v) = req.v {
        cfg.gq_exponent = BigUint::from(v);
    }
    cfg
}

fn setting_from_curve_text(
    protocol: ProtocolId,
    text: &str,
) -> Result<Setting, ApiError> {
    let data = keyfile::parse_curve_file(text).map_err(keyfile_error)?;
    match protocol {
        ProtocolId::EcDlog => {
            let curve = CurveParams::field(data.modulus, data.a, data.b)
                .map_err(|e| ApiError::unprocessable(e.to_string()))?;
            let base = data
                .base
                .ok_or_else(|| ApiError::bad_request("curve file needs 'base'"))?;
            let base_order = data
                .base_order
                .ok_or_else(|| ApiError::bad_request("curve file needs 'base_order'"))?;
            Ok(Setting::EcGroup {
                curve,
                base,
                base_order,
            })
        }
        ProtocolId::EcSchnorr2g => {
            let curve = CurveParams::field(data.modulus, data.a, data.b)
                .map_err(|e| ApiError::unprocessable(e.to_string()))?;
            let p1 = data
                .p1
                .ok_or_else(|| ApiError::bad_request("curve file needs 'p1'"))?;
            let p2 = data
                .p2
                .ok_or_else(|| ApiError::bad_request("curve file needs 'p2'"))?;
            let order = data
                .order
                .ok_or_else(|| ApiError::bad_request("curve file needs 'order'"))?;
            Ok(Setting::EcTwoGen {
                curve,
                p1,
                p2,
                order,
            })
        }
        other => Err(ApiError::bad_request(format!(
            "--curve-file does not apply to {other}"
        ))),
    }
}

fn keygen_summary(protocol: ProtocolId, key: &ProverKey, cfg: &ProtocolConfig) -> Vec<String> {
    let mut lines = vec![format!("protocol: {protocol}")];
    match key {
        ProverKey::Qr(k) => lines.push(format!("modulus_bits: {}", k.n.bits())),
        ProverKey::Fs(k) => {
            lines.push(format!("modulus_bits: {}", k.n.bits()));
            lines.push(format!("secrets: {}", k.secrets.len()));
        }
        ProverKey::Gq(k) => {
            lines.push(format!("modulus_bits: {}", k.n.bits()));
            lines.push(format!("exponent: {}", k.v));
        }
        ProverKey::Schnorr(k) => {
            lines.push(format!("p_bits: {}", k.group.p.bits()));
            lines.push(format!("q_bits: {}", k.group.q.bits()));
        }
        ProverKey::EcSqrt(k) => {
            lines.push(format!("ring_modulus: {}", hex_int(&k.curve.m)));
            lines.push(format!("public_point: {}", point_str(&k.b_point)));
        }
        ProverKey::EcDlog(k) => {
            lines.push(format!("field_modulus: {}", hex_int(&k.curve.m)));
            lines.push(format!("base_order: {}", k.base_order));
        }
        ProverKey::EcSchnorr2g(k) => {
            lines.push(format!("field_modulus: {}", hex_int(&k.curve.m)));
            lines.push(format!("generator_order: {}", k.order));
        }
    }
    if protocol == ProtocolId::Fs || protocol == ProtocolId::Gq {
        lines.push(format!("challenge_space_bits: {}", cfg.fs_secrets));
    }
    lines
}

async fn keygen_handler(
    Json(req): Json<KeygenRequest>,
) -> Result<Json<KeygenResponse>, ApiError> {
    blocking(move || {
        let protocol = parse_protocol(&req.protocol)?;
        let cfg = config_from_keygen(protocol, &req);
        cfg.validate(protocol)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let mut rng = seeded_rng(req.seed);
        let identity = match &req.identity_hex {
            Some(h) => hex::decode(h)
                .map_err(|e| ApiError::bad_request(format!("bad identity hex: {e}")))?,
            None => {
                let mut id = vec![0u8; 16];
                rng.fill_bytes(&mut id);
                id
            }
        };
        let spec = spec_from_keygen(&req);
        let (prover, verifier) = if let Some(curve_text) = &req.curve {
            let setting = setting_from_curve_text(protocol, curve_text)?;
            keygen(protocol, &setting, &cfg, &identity, &mut rng)
                .map_err(|e| ApiError::bad_request(e.to_string()))?
        } else {
            // some draws are incompatible (e.g. the GQ exponent divides
            // the group order); redraw a few times before giving up
            let mut result = None;
            for _ in 0..32 {
                let setting = generate_setting(protocol, &spec, &mut rng)
                    .map_err(|e| ApiError::bad_request(e.to_string()))?;
                match keygen(protocol, &setting, &cfg, &identity, &mut rng) {
                    Ok(pair) => {
                        result = Some(pair);
                        break;
                    }
                    Err(ProtocolError::InvalidSetting(_)) => continue,
                    Err(e) => return Err(ApiError::unprocessable(e.to_string())),
                }
            }
            result.ok_or_else(|| {
                ApiError::unprocessable("could not draw a compatible setting".to_string())
            })?
        };
        let summary = keygen_summary(protocol, &prover, &cfg);
        Ok(Json(KeygenResponse {
            public_key: keyfile::serialize_public(&verifier),
            secret_key: keyfile::serialize_prover(&prover),
            summary,
        }))
    })
    .await
}

// ---------------------------------------------------------------------------
// Full runs
// ---------------------------------------------------------------------------

fn transcript_round_log(transcript: &Transcript) -> Vec<RoundSummary> {
    let mut rounds: Vec<RoundSummary> = Vec::new();
    for entry in &transcript.entries {
        if entry.round == 0 || entry.frame.msg_type == MsgType::Verdict {
            continue;
        }
        if rounds.last().map(|r| r.round) != Some(entry.round) {
            rounds.push(RoundSummary {
                round: entry.round,
                commit: String::new(),
                challenge: String::new(),
                response: String::new(),
                ok: transcript.rejected_at != Some(entry.round),
            });
        }
        let slot = rounds.last_mut().expect("just pushed");
        let payload = hex::encode(&entry.frame.payload);
        match (entry.frame.msg_type, entry.direction) {
            (MsgType::Commit, Direction::AToB) => slot.commit = payload,
            (MsgType::Challenge, Direction::BToA) => slot.challenge = payload,
            (MsgType::Response, Direction::AToB) => slot.response = payload,
            _ => {}
        }
    }
    rounds
}

async fn run_handler(Json(req): Json<RunRequest>) -> Result<Json<RunResponse>, ApiError> {
    blocking(move || {
        let secret = keyfile::parse_key_material(&req.secret_key).map_err(keyfile_error)?;
        let Some(prover_key) = secret.prover().cloned() else {
            return Err(ApiError::unprocessable(
                "secret key file carries no secret material",
            ));
        };
        let public = keyfile::parse_key_material(&req.public_key).map_err(keyfile_error)?;
        let verifier_key = public.public();
        if verifier_key != prover_key.verifier_key() {
            return Err(ApiError::unprocessable(
                "public key file does not match the secret key",
            ));
        }
        let protocol = prover_key.protocol();
        let mut cfg = ProtocolConfig::new(protocol, req.rounds.unwrap_or(20));
        if let Some(bits) = req.challenge_bits {
            cfg.challenge_bits = bits;
        }
        if let ProverKey::Fs(k) = &prover_key {
            cfg.fs_secrets = k.secrets.len() as u32;
        }
        if let ProverKey::Gq(k) = &prover_key {
            cfg.gq_exponent = k.v.clone();
        }
        cfg.precompute_commitments = req.precompute.unwrap_or(false);
        cfg.validate(protocol)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;

        let mut rng = seeded_rng(req.seed);
        let mut prover =
            SessionState::new_prover(prover_key, cfg.clone()).map_err(domain_error)?;
        let mut verifier =
            SessionState::new_verifier(verifier_key, cfg.clone()).map_err(domain_error)?;
        if cfg.precompute_commitments {
            prover.precompute_commitments(&mut rng).map_err(domain_error)?;
        }
        let mut channel = MeteredChannel::new();
        let transcript =
            run_rounds(&mut prover, &mut verifier, &mut channel, &mut rng).map_err(domain_error)?;

        Ok(Json(RunResponse {
            protocol: protocol.name().to_string(),
            rounds: cfg.rounds,
            verdict: verdict_name(transcript.verdict).to_string(),
            rejected_at: transcript.rejected_at,
            round_log: transcript_round_log(&transcript),
            metrics: MetricsDto {
                bandwidth_bits: transcript.metrics.bandwidth_bits,
                prover_modmuls: transcript.metrics.prover_modmuls,
                memory_bytes: transcript.metrics.memory_bytes,
                elapsed_ms: transcript.metrics.elapsed_ms,
            },
        }))
    })
    .await
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Accept => "accept",
        Verdict::Reject => "reject",
    }
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

async fn bench_handler(Json(req): Json<BenchRequest>) -> Result<Json<BenchResponse>, ApiError> {
    blocking(move || {
        let protocols = req
            .protocols
            .iter()
            .map(|p| parse_protocol(p))
            .collect::<Result<Vec<_>, _>>()?;
        let mut plan = BenchPlan::default();
        if let Some(r) = req.rounds {
            plan.rounds = r;
        }
        if let Some(k) = req.k {
            plan.fs_secrets = k;
        }
        if let Some(v) = req.v {
            plan.gq_exponent = BigUint::from(v);
        }
        if let Some(bits) = req.modbits {
            plan.spec.modulus_bits = bits;
        }
        if let Some(bits) = req.subgroup_bits {
            plan.spec.subgroup_bits = bits;
        }
        if let Some(bits) = req.ec_field_bits {
            plan.spec.ec_field_bits = bits;
        }
        if let Some(bits) = req.ring_factor_bits {
            plan.spec.ring_factor_bits = bits;
        }
        let mut rng = seeded_rng(req.seed);
        let report = compare(&protocols, &plan, &mut rng).map_err(|e| match e {
            BenchError::NeedTwoProtocols => ApiError::bad_request(e.to_string()),
            other => ApiError::unprocessable(other.to_string()),
        })?;
        let rows = report
            .rows
            .iter()
            .map(|(p, m)| BenchRow {
                protocol: p.name().to_string(),
                bandwidth_bits: m.bandwidth_bits,
                prover_modmuls: m.prover_modmuls,
                memory_bytes: m.memory_bytes,
                elapsed_ms: m.elapsed_ms,
            })
            .collect();
        Ok(Json(BenchResponse {
            rows,
            table: report.to_table_string(),
            csv: report.to_csv_string(),
        }))
    })
    .await
}

// ---------------------------------------------------------------------------
// Attack demo
// ---------------------------------------------------------------------------

async fn attack_handler(Json(req): Json<AttackRequest>) -> Result<Json<AttackResponse>, ApiError> {
    if !(3..=16).contains(&req.pbits) {
        return Err(ApiError::bad_request(
            "pbits must be between 3 and 16 (desk-scale factoring bound)",
        ));
    }
    blocking(move || {
        let mut rng = seeded_rng(req.seed);
        let spec = SettingSpec {
            ring_factor_bits: req.pbits,
            ..SettingSpec::default()
        };
        let cfg = ProtocolConfig::new(ProtocolId::EcSqrt, 1);
        let setting = generate_setting(ProtocolId::EcSqrt, &spec, &mut rng)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let (prover_key, verifier_key) =
            keygen(ProtocolId::EcSqrt, &setting, &cfg, &[], &mut rng).map_err(domain_error)?;
        let mut prover =
            SessionState::new_prover(prover_key, cfg.clone()).map_err(domain_error)?;

        let started = Instant::now();
        let outcome =
            attack::ec_sqrt_attack(&verifier_key, &mut prover, &mut rng).map_err(domain_error)?;
        let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

        let zkid_core::protocols::VerifierKey::EcSqrt(vk) = &verifier_key else {
            unreachable!("keygen produced an EC square-root key");
        };
        let check = attack::doubles_to_public(&outcome.recovered, &outcome.factors, vk)
            .map_err(domain_error)?;
        Ok(Json(AttackResponse {
            modulus: hex_int(&vk.curve.m),
            factors: outcome.factors.iter().map(hex_int).collect(),
            public_b: point_str(&vk.b_point),
            commitment: point_str(&outcome.commitment),
            response: point_str(&outcome.response),
            recovered: point_str(&outcome.recovered),
            doubles_to_public: check,
            candidates_tried: outcome.candidates_tried,
            elapsed_ms,
        }))
    })
    .await
}

// ---------------------------------------------------------------------------
// Curve checks and info tables
// ---------------------------------------------------------------------------

async fn curve_check_handler(
    Json(req): Json<CurveCheckRequest>,
) -> Result<Json<CurveCheckResponse>, ApiError> {
    blocking(move || {
        let data = keyfile::parse_curve_file(&req.curve).map_err(keyfile_error)?;
        let curve = CurveParams::field(data.modulus, data.a, data.b)
            .map_err(|e| ApiError::unprocessable(e.to_string()))?;
        let report = zkid_core::ecc::curve_security_check(&curve, req.min_prime_bits.unwrap_or(16))
            .map_err(|e| ApiError::unprocessable(e.to_string()))?;
        Ok(Json(CurveCheckResponse {
            order: report.order,
            large_prime_factor: report.large_prime_factor,
            pollard_ok: report.pollard_ok,
            mov_ok: report.mov_ok,
            anomalous_ok: report.anomalous_ok,
            all_ok: report.all_ok(),
        }))
    })
    .await
}

async fn security_levels_handler() -> Json<InfoRowsResponse> {
    Json(InfoRowsResponse {
        rows: zkid_core::bench::security_levels()
            .iter()
            .map(|(l, e, r)| vec![*l as u64, *e as u64, *r as u64])
            .collect(),
    })
}

async fn nist_fields_handler() -> Json<InfoRowsResponse> {
    Json(InfoRowsResponse {
        rows: zkid_core::bench::nist_field_sizes()
            .iter()
            .map(|(p, b)| vec![*p as u64, *b as u64])
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// Interactive verifier sessions
// ---------------------------------------------------------------------------

async fn open_session_handler(
    State(state): State<Arc<AppState>>,
    Json(req): Json<OpenSessionRequest>,
) -> Result<(StatusCode, Json<OpenSessionResponse>), ApiError> {
    let material = keyfile::parse_key_material(&req.public_key).map_err(keyfile_error)?;
    let verifier_key = material.public();
    let protocol = verifier_key.protocol();
    let mut cfg = ProtocolConfig::new(protocol, req.rounds);
    if let Some(bits) = req.challenge_bits {
        cfg.challenge_bits = bits;
    }
    if let zkid_core::protocols::VerifierKey::Fs(k) = &verifier_key {
        cfg.fs_secrets = k.publics.len() as u32;
    }
    if let zkid_core::protocols::VerifierKey::Gq(k) = &verifier_key {
        cfg.gq_exponent = k.v.clone();
    }
    cfg.validate(protocol)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let session = SessionState::new_verifier(verifier_key, cfg).map_err(domain_error)?;

    let id = uuid::Uuid::new_v4().to_string();
    let mut sessions = state.sessions.lock().expect("session lock");
    if sessions.len() >= MAX_SESSIONS {
        return Err(ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            message: "session table full".into(),
        });
    }
    sessions.insert(
        id.clone(),
        VerifierSession {
            state: session,
            rng: seeded_rng(req.seed),
            expected_rounds: req.rounds,
            params_seen: false,
            verdict: None,
        },
    );
    Ok((
        StatusCode::CREATED,
        Json(OpenSessionResponse {
            session_id: id,
            protocol: protocol.name().to_string(),
        }),
    ))
}

async fn session_frame_handler(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<FrameRequest>,
) -> Result<Json<FrameReply>, ApiError> {
    let bytes = hex::decode(&req.frame)
        .map_err(|e| ApiError::bad_request(format!("bad frame hex: {e}")))?;
    let frame =
        decode_frame(&bytes).map_err(|e| ApiError::bad_request(format!("bad frame: {e}")))?;

    let mut sessions = state.sessions.lock().expect("session lock");
    let session = sessions
        .get_mut(&id)
        .ok_or_else(|| ApiError::not_found("no such session"))?;
    if session.verdict.is_some() {
        return Err(ApiError::conflict("session already decided"));
    }
    if frame.protocol != session.state.protocol() {
        return Err(ApiError::bad_request("frame protocol does not match session"));
    }

    let reply = match frame.msg_type {
        MsgType::Params => {
            if session.params_seen {
                return Err(ApiError::conflict("params frame already received"));
            }
            let (rounds, bits, identity) = parse_params(&frame)
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
            if rounds != session.expected_rounds
                || bits != session.state.config().challenge_bits
                || identity != session.state.public_key().identity()
            {
                return Err(ApiError::bad_request(
                    "params frame disagrees with the session parameters",
                ));
            }
            session.params_seen = true;
            FrameReply {
                reply: None,
                verdict: None,
                rounds_completed: session.state.rounds_completed(),
            }
        }
        MsgType::Commit => {
            if !session.params_seen {
                return Err(ApiError::conflict("params frame must come first"));
            }
            session
                .state
                .verifier_absorb_commitment(&frame)
                .map_err(domain_error)?;
            let challenge = session
                .state
                .verifier_challenge(&mut session.rng)
                .map_err(domain_error)?;
            FrameReply {
                reply: Some(encode_hex_frame(&challenge)?),
                verdict: None,
                rounds_completed: session.state.rounds_completed(),
            }
        }
        MsgType::Response => {
            let ok = session.state.verifier_check(&frame).map_err(domain_error)?;
            let done = !ok || session.state.rounds_completed() >= session.expected_rounds;
            if done {
                let verdict = if ok
                    && session.state.accepted_rounds() == session.expected_rounds
                {
                    Verdict::Accept
                } else {
                    Verdict::Reject
                };
                session.verdict = Some(verdict);
                let vf = verdict_frame(session.state.protocol(), verdict);
                FrameReply {
                    reply: Some(encode_hex_frame(&vf)?),
                    verdict: Some(verdict_name(verdict).to_string()),
                    rounds_completed: session.state.rounds_completed(),
                }
            } else {
                FrameReply {
                    reply: None,
                    verdict: None,
                    rounds_completed: session.state.rounds_completed(),
                }
            }
        }
        other => {
            return Err(ApiError::bad_request(format!(
                "verifier sessions do not accept {other:?} frames"
            )))
        }
    };
    Ok(Json(reply))
}

fn encode_hex_frame(frame: &Frame) -> Result<String, ApiError> {
    encode_frame(frame)
        .map(hex::encode)
        .map_err(|e| ApiError::internal(e.to_string()))
}

async fn session_status_handler(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionStatus>, ApiError> {
    let sessions = state.sessions.lock().expect("session lock");
    let session = sessions
        .get(&id)
        .ok_or_else(|| ApiError::not_found("no such session"))?;
    Ok(Json(SessionStatus {
        protocol: session.state.protocol().name().to_string(),
        rounds_completed: session.state.rounds_completed(),
        accepted_rounds: session.state.accepted_rounds(),
        verdict: session.verdict.map(|v| verdict_name(v).to_string()),
    }))
}

async fn close_session_handler(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    let mut sessions = state.sessions.lock().expect("session lock");
    sessions
        .remove(&id)
        .ok_or_else(|| ApiError::not_found("no such session"))?;
    Ok(StatusCode::NO_CONTENT)
}
