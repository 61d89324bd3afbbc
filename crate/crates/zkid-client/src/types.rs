//! Request and response bodies of the HTTP/JSON API. The service crate
//! builds its handlers on these same types, so client and server cannot
//! drift apart.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KeygenRequest {
    pub protocol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Modulus bits for the RSA-style and Schnorr settings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroup_bits: Option<u64>,
    /// Fiat–Shamir secret count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Guillou–Quisquater public exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_hex: Option<String>,
    /// Curve description text for the elliptic-curve protocols; a fresh
    /// desk-scale curve is generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ec_field_bits: Option<u64>,
    /// Bits per prime factor of the ring modulus for the square-root
    /// scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring_factor_bits: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeygenResponse {
    pub public_key: String,
    pub secret_key: String,
    pub summary: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunRequest {
    pub public_key: String,
    pub secret_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precompute: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub commit: String,
    pub challenge: String,
    pub response: String,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsDto {
    pub bandwidth_bits: u64,
    pub prover_modmuls: u64,
    pub memory_bytes: u64,
    /// Wall-clock and therefore not reproducible across runs.
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResponse {
    pub protocol: String,
    pub rounds: u32,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected_at: Option<u32>,
    pub round_log: Vec<RoundSummary>,
    pub metrics: MetricsDto,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchRequest {
    pub protocols: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modbits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroup_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ec_field_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring_factor_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub protocol: String,
    pub bandwidth_bits: u64,
    pub prover_modmuls: u64,
    pub memory_bytes: u64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResponse {
    pub rows: Vec<BenchRow>,
    pub table: String,
    pub csv: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackRequest {
    /// Bits per prime factor of the ring modulus (desk scale, ≤ 16).
    pub pbits: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackResponse {
    pub modulus: String,
    pub factors: Vec<String>,
    pub public_b: String,
    pub commitment: String,
    pub response: String,
    pub recovered: String,
    /// Whether the recovered point doubles to the public point.
    pub doubles_to_public: bool,
    pub candidates_tried: u64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveCheckRequest {
    pub curve: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_prime_bits: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveCheckResponse {
    pub order: u64,
    pub large_prime_factor: u64,
    pub pollard_ok: bool,
    pub mov_ok: bool,
    pub anomalous_ok: bool,
    pub all_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfoRowsResponse {
    pub rows: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpenSessionRequest {
    pub public_key: String,
    pub rounds: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpenSessionResponse {
    pub session_id: String,
    pub protocol: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameRequest {
    /// Hex-encoded wire frame.
    pub frame: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameReply {
    /// Hex-encoded verifier frame, when this step produces one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    /// Set once the verifier has decided.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    pub rounds_completed: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionStatus {
    pub protocol: String,
    pub rounds_completed: u32,
    pub accepted_rounds: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
