//! End-to-end tests of the HTTP surface, driven through the typed client
//! over a real loopback socket.

use zkid_client::types::*;
use zkid_client::{Client, ClientError};
use zkid_core::keyfile;
use zkid_core::protocols::Verdict;

async fn start() -> Client {
    let (addr, _handle) = zkid_service::bind_ephemeral().await.expect("bind loopback");
    Client::new(format!("http://{addr}"))
}

fn keygen_req(protocol: &str, seed: u64) -> KeygenRequest {
    KeygenRequest {
        protocol: protocol.into(),
        seed: Some(seed),
        bits: Some(64),
        subgroup_bits: Some(24),
        ec_field_bits: Some(12),
        ring_factor_bits: Some(8),
        ..KeygenRequest::default()
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn health_and_info_tables() {
    let client = start().await;
    client.health().await.unwrap();

    let levels = client.security_levels().await.unwrap();
    assert_eq!(levels.rows.len(), 5);
    assert!(levels.rows.contains(&vec![80, 160, 1024]));
    assert!(levels.rows.contains(&vec![256, 512, 15360]));

    let fields = client.nist_fields().await.unwrap();
    assert_eq!(fields.rows.len(), 5);
    assert!(fields.rows.contains(&vec![192, 163]));
    assert!(fields.rows.contains(&vec![521, 571]));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn keygen_then_run_accepts() {
    let client = start().await;
    for protocol in ["qr", "fs", "gq", "schnorr", "ec-sqrt", "ec-dlog", "ec-schnorr2g"] {
        let keys = client.keygen(&keygen_req(protocol, 7)).await.unwrap();
        assert!(keys.summary[0].contains(protocol));
        // both files parse and agree
        let secret = keyfile::parse_key_material(&keys.secret_key).unwrap();
        let public = keyfile::parse_key_material(&keys.public_key).unwrap();
        assert_eq!(secret.public(), public.public());

        let run = client
            .run(&RunRequest {
                public_key: keys.public_key,
                secret_key: keys.secret_key,
                rounds: Some(8),
                seed: Some(11),
                ..RunRequest::default()
            })
            .await
            .unwrap();
        assert_eq!(run.verdict, "accept", "{protocol}");
        assert_eq!(run.round_log.len(), 8);
        assert!(run.metrics.bandwidth_bits > 0);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn runs_are_deterministic_given_a_seed() {
    let client = start().await;
    let keys = client.keygen(&keygen_req("schnorr", 21)).await.unwrap();
    let req = RunRequest {
        public_key: keys.public_key,
        secret_key: keys.secret_key,
        rounds: Some(10),
        seed: Some(5),
        ..RunRequest::default()
    };
    let a = client.run(&req).await.unwrap();
    let b = client.run(&req).await.unwrap();
    let strip = |r: &RunResponse| {
        (
            r.verdict.clone(),
            r.round_log
                .iter()
                .map(|x| (x.commit.clone(), x.challenge.clone(), x.response.clone()))
                .collect::<Vec<_>>(),
            r.metrics.bandwidth_bits,
            r.metrics.prover_modmuls,
            r.metrics.memory_bytes,
        )
    };
    assert_eq!(strip(&a), strip(&b));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn run_rejects_mismatched_key_files() {
    let client = start().await;
    let k1 = client.keygen(&keygen_req("qr", 1)).await.unwrap();
    let k2 = client.keygen(&keygen_req("qr", 2)).await.unwrap();
    let err = client
        .run(&RunRequest {
            public_key: k2.public_key,
            secret_key: k1.secret_key,
            rounds: Some(4),
            seed: Some(1),
            ..RunRequest::default()
        })
        .await
        .unwrap_err();
    let ClientError::Api { status, .. } = err else {
        panic!("expected API error, got {err}");
    };
    assert_eq!(status, 422);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bench_endpoint_reports_rows_and_csv() {
    let client = start().await;
    let resp = client
        .bench(&BenchRequest {
            protocols: vec!["schnorr".into(), "qr".into()],
            modbits: Some(64),
            subgroup_bits: Some(24),
            rounds: Some(20),
            seed: Some(3),
            ..BenchRequest::default()
        })
        .await
        .unwrap();
    assert_eq!(resp.rows.len(), 2);
    assert!(resp
        .csv
        .starts_with("protocol,bandwidth_bits,prover_modmuls,memory_bytes,elapsed_ms"));
    let schnorr = resp.rows.iter().find(|r| r.protocol == "schnorr").unwrap();
    let qr = resp.rows.iter().find(|r| r.protocol == "qr").unwrap();
    assert!(schnorr.bandwidth_bits < qr.bandwidth_bits);

    // fewer than two protocols is a usage error
    let err = client
        .bench(&BenchRequest {
            protocols: vec!["qr".into()],
            seed: Some(1),
            ..BenchRequest::default()
        })
        .await
        .unwrap_err();
    let ClientError::Api { status, .. } = err else {
        panic!("expected API error");
    };
    assert_eq!(status, 400);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn attack_endpoint_recovers_the_secret() {
    let client = start().await;
    let resp = client
        .attack(&AttackRequest {
            pbits: 8,
            seed: Some(13),
        })
        .await
        .unwrap();
    assert!(resp.doubles_to_public);
    assert_eq!(resp.factors.len(), 2);
    assert!(resp.recovered.starts_with('('));

    let err = client
        .attack(&AttackRequest {
            pbits: 20,
            seed: None,
        })
        .await
        .unwrap_err();
    let ClientError::Api { status, .. } = err else {
        panic!("expected API error");
    };
    assert_eq!(status, 400);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn curve_check_endpoint() {
    let client = start().await;
    // supersingular curve: order 12 over F_11, trace zero
    let resp = client
        .curve_check(&CurveCheckRequest {
            curve: "modulus = 0xb\ncurve_a = 0x0\ncurve_b = 0x1\n".into(),
            min_prime_bits: Some(2),
        })
        .await
        .unwrap();
    assert_eq!(resp.order, 12);
    assert!(!resp.mov_ok);
    assert!(!resp.all_ok);

    // the order-19 curve over F_17 passes everything
    let resp = client
        .curve_check(&CurveCheckRequest {
            curve: "modulus = 0x11\ncurve_a = 0x2\ncurve_b = 0x2\n".into(),
            min_prime_bits: Some(4),
        })
        .await
        .unwrap();
    assert_eq!(resp.order, 19);
    assert!(resp.all_ok);

    // singular curve is rejected as unprocessable
    let err = client
        .curve_check(&CurveCheckRequest {
            curve: "modulus = 0xb\ncurve_a = 0x0\ncurve_b = 0x0\n".into(),
            min_prime_bits: None,
        })
        .await
        .unwrap_err();
    let ClientError::Api { status, .. } = err else {
        panic!("expected API error");
    };
    assert_eq!(status, 422);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn interactive_session_accepts_an_honest_prover() {
    let client = start().await;
    for protocol in ["qr", "schnorr", "ec-dlog", "ec-sqrt", "ec-schnorr2g"] {
        let keys = client.keygen(&keygen_req(protocol, 31)).await.unwrap();
        let verdict = client
            .authenticate(&keys.secret_key, 6, None, Some(17))
            .await
            .unwrap();
        assert_eq!(verdict, Verdict::Accept, "{protocol}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn interactive_session_rejects_a_prover_with_the_wrong_secret() {
    use zkid_core::protocols::{
        params_frame, ProtocolConfig, ProtocolId, ProverKey, SchnorrProverKey, SessionState,
    };
    let client = start().await;
    let honest = client.keygen(&keygen_req("schnorr", 41)).await.unwrap();
    let honest_key = keyfile::parse_key_material(&honest.secret_key).unwrap();
    let ProverKey::Schnorr(honest_schnorr) = honest_key.prover().unwrap().clone() else {
        panic!("schnorr key expected");
    };
    // same group, different secret: the public values no longer match
    let imposter = SchnorrProverKey::from_parts(
        honest_schnorr.group.clone(),
        honest_schnorr.x + num_bigint::BigUint::from(1u32),
    );
    assert_ne!(imposter.b, honest_schnorr.b);

    let opened = client
        .open_session(&OpenSessionRequest {
            public_key: honest.public_key.clone(),
            rounds: 8,
            challenge_bits: Some(20),
            seed: Some(2),
        })
        .await
        .unwrap();

    let cfg = ProtocolConfig::new(ProtocolId::Schnorr, 8);
    let mut prover =
        SessionState::new_prover(ProverKey::Schnorr(imposter), cfg.clone()).unwrap();
    let mut rng = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(4);

    let hello = params_frame(ProtocolId::Schnorr, &cfg, &[]);
    client.send_frame(&opened.session_id, &hello).await.unwrap();
    let mut verdict = None;
    for _ in 0..8 {
        let commit = prover.prover_commit(&mut rng).unwrap();
        let step = client.send_frame(&opened.session_id, &commit).await.unwrap();
        let challenge_hex = step.reply.expect("challenge");
        let challenge =
            zkid_core::wire::decode_frame(&hex::decode(challenge_hex).unwrap()).unwrap();
        let response = prover.prover_respond(&challenge).unwrap();
        let step = client.send_frame(&opened.session_id, &response).await.unwrap();
        if let Some(v) = step.verdict {
            verdict = Some(v);
            break;
        }
    }
    assert_eq!(verdict.as_deref(), Some("reject"));

    let status = client.session_status(&opened.session_id).await.unwrap();
    assert_eq!(status.verdict.as_deref(), Some("reject"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn session_errors() {
    let client = start().await;
    let err = client.session_status("nope").await.unwrap_err();
    let ClientError::Api { status, .. } = err else {
        panic!("expected API error");
    };
    assert_eq!(status, 404);
}
