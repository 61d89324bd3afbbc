//! Typed client for the identification protocol service.
//!
//! Wraps every endpoint of the HTTP/JSON API and implements the prover
//! side of an interactive verifier session: the client holds the secret
//! key, drives the local protocol state machine, and exchanges wire frames
//! with the remote verifier until it hands down a verdict.

pub mod types;

#[cfg(feature = "client")]
pub use client::{Client, ClientError};

#[cfg(feature = "client")]
mod client {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use serde::de::DeserializeOwned;
    use serde::Serialize;
    use thiserror::Error;

    use zkid_core::keyfile;
    use zkid_core::protocols::{
        params_frame, ProtocolConfig, ProtocolError, SessionState, Verdict,
    };
    use zkid_core::wire::{decode_frame, encode_frame, Frame, MsgType};

    use crate::types::*;

    #[derive(Debug, Error)]
    pub enum ClientError {
        #[error("transport error: {0}")]
        Transport(#[from] reqwest::Error),
        #[error("server returned {status}: {message}")]
        Api { status: u16, message: String },
        #[error("key file error: {0}")]
        KeyFile(#[from] keyfile::KeyFileError),
        #[error(transparent)]
        Protocol(#[from] ProtocolError),
        #[error("protocol exchange broke down: {0}")]
        Exchange(String),
    }

    /// Typed handle to one service instance.
    #[derive(Debug, Clone)]
    pub struct Client {
        base: String,
        http: reqwest::Client,
    }

    impl Client {
        pub fn new(base_url: impl Into<String>) -> Self {
            let mut base = base_url.into();
            while base.ends_with('/') {
                base.pop();
            }
            Client {
                base,
                http: reqwest::Client::new(),
            }
        }

        pub fn base_url(&self) -> &str {
            &self.base
        }

        async fn decode<T: DeserializeOwned>(
            response: reqwest::Response,
        ) -> Result<T, ClientError> {
            let status = response.status();
            if status.is_success() {
                Ok(response.json().await?)
            } else {
                let message = match response.json::<ErrorBody>().await {
                    Ok(body) => body.error,
                    Err(_) => status.to_string(),
                };
                Err(ClientError::Api {
                    status: status.as_u16(),
                    message,
                })
            }
        }

        async fn post<Req: Serialize, Resp: DeserializeOwned>(
            &self,
            path: &str,
            body: &Req,
        ) -> Result<Resp, ClientError> {
            let url = format!("{}{path}", self.base);
            Self::decode(self.http.post(url).json(body).send().await?).await
        }

        async fn get<Resp: DeserializeOwned>(&self, path: &str) -> Result<Resp, ClientError> {
            let url = format!("{}{path}", self.base);
            Self::decode(self.http.get(url).send().await?).await
        }

        pub async fn health(&self) -> Result<(), ClientError> {
            let _: serde_json::Value = self.get("/v1/health").await?;
            Ok(())
        }

        pub async fn keygen(&self, req: &KeygenRequest) -> Result<KeygenResponse, ClientError> {
            self.post("/v1/keygen", req).await
        }

        pub async fn run(&self, req: &RunRequest) -> Result<RunResponse, ClientError> {
            self.post("/v1/run", req).await
        }

        pub async fn bench(&self, req: &BenchRequest) -> Result<BenchResponse, ClientError> {
            self.post("/v1/bench", req).await
        }

        pub async fn attack(&self, req: &AttackRequest) -> Result<AttackResponse, ClientError> {
            self.post("/v1/attack", req).await
        }

        pub async fn curve_check(
            &self,
            req: &CurveCheckRequest,
        ) -> Result<CurveCheckResponse, ClientError> {
            self.post("/v1/curve-check", req).await
        }

        pub async fn security_levels(&self) -> Result<InfoRowsResponse, ClientError> {
            self.get("/v1/info/security-levels").await
        }

        pub async fn nist_fields(&self) -> Result<InfoRowsResponse, ClientError> {
            self.get("/v1/info/nist-fields").await
        }

        pub async fn open_session(
            &self,
            req: &OpenSessionRequest,
        ) -> Result<OpenSessionResponse, ClientError> {
            self.post("/v1/sessions", req).await
        }

        pub async fn send_frame(
            &self,
            session_id: &str,
            frame: &Frame,
        ) -> Result<FrameReply, ClientError> {
            let body = FrameRequest {
                frame: hex::encode(encode_frame(frame).map_err(ProtocolError::Wire)?),
            };
            self.post(&format!("/v1/sessions/{session_id}/frames"), &body)
                .await
        }

        pub async fn session_status(
            &self,
            session_id: &str,
        ) -> Result<SessionStatus, ClientError> {
            self.get(&format!("/v1/sessions/{session_id}")).await
        }

        /// Authenticates against a remote verifier session: opens the
        /// session with the public half of the key, then runs the prover
        /// state machine over the frame endpoint until the verdict frame
        /// arrives.
        pub async fn authenticate(
            &self,
            secret_key_text: &str,
            rounds: u32,
            challenge_bits: Option<u32>,
            seed: Option<u64>,
        ) -> Result<Verdict, ClientError> {
            let material = keyfile::parse_key_material(secret_key_text)?;
            let Some(prover_key) = material.prover().cloned() else {
                return Err(ClientError::Exchange(
                    "authentication needs the secret key file".into(),
                ));
            };
            let protocol = prover_key.protocol();
            let mut cfg = ProtocolConfig::new(protocol, rounds);
            if let Some(bits) = challenge_bits {
                cfg.challenge_bits = bits;
            }
            if let zkid_core::protocols::ProverKey::Fs(k) = &prover_key {
                cfg.fs_secrets = k.secrets.len() as u32;
            }
            if let zkid_core::protocols::ProverKey::Gq(k) = &prover_key {
                cfg.gq_exponent = k.v.clone();
            }
            let public_text = keyfile::serialize_public(&prover_key.verifier_key());
            let identity = prover_key.verifier_key().identity().to_vec();

            let opened = self
                .open_session(&OpenSessionRequest {
                    public_key: public_text,
                    rounds,
                    challenge_bits: Some(cfg.challenge_bits),
                    seed,
                })
                .await?;

            let mut rng = match seed {
                // prover and verifier coins stay independent
                Some(s) => ChaCha20Rng::seed_from_u64(s ^ 0x70726f766572),
                None => ChaCha20Rng::from_entropy(),
            };
            let mut prover = SessionState::new_prover(prover_key, cfg.clone())?;

            let hello = params_frame(protocol, &cfg, &identity);
            let ack = self.send_frame(&opened.session_id, &hello).await?;
            if ack.reply.is_some() {
                return Err(ClientError::Exchange("unexpected reply to params".into()));
            }

            for _ in 0..rounds {
                let commit = prover.prover_commit(&mut rng)?;
                let step = self.send_frame(&opened.session_id, &commit).await?;
                let challenge_hex = step
                    .reply
                    .ok_or_else(|| ClientError::Exchange("verifier sent no challenge".into()))?;
                let challenge = decode_hex_frame(&challenge_hex)?;
                let response = prover.prover_respond(&challenge)?;
                let step = self.send_frame(&opened.session_id, &response).await?;
                match (step.reply, step.verdict) {
                    (Some(reply), Some(verdict)) => {
                        let frame = decode_hex_frame(&reply)?;
                        if frame.msg_type != MsgType::Verdict {
                            return Err(ClientError::Exchange("expected a verdict frame".into()));
                        }
                        return Ok(if verdict == "accept" {
                            Verdict::Accept
                        } else {
                            Verdict::Reject
                        });
                    }
                    (None, None) => continue,
                    _ => return Err(ClientError::Exchange("inconsistent verdict step".into())),
                }
            }
            Err(ClientError::Exchange("verifier never decided".into()))
        }
    }

    fn decode_hex_frame(hex_str: &str) -> Result<Frame, ClientError> {
        let bytes = hex::decode(hex_str)
            .map_err(|e| ClientError::Exchange(format!("bad frame hex: {e}")))?;
        Ok(decode_frame(&bytes).map_err(ProtocolError::Wire)?)
    }
}
