//! Transcript simulator and the cheating prover.
//!
//! Both rest on the same forgery: fix the challenge first, then derive a
//! commitment/response pair that satisfies the verification equation
//! without the secret. The simulator witnesses the zero-knowledge
//! property; the cheating prover turns the forgery into a soundness
//! experiment by guessing each challenge before it is drawn.

use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;

use crate::bench::Metrics;
use crate::ecc::{point_add, point_neg, scalar_mul, EcError};
use crate::numtheory::{mod_exp, mod_inv, mul_mod, rand_below, MulCounter};
use crate::wire::{Direction, Frame, MeteredChannel, MsgType};

use super::steps::{
    commitment_frame_for_public, response_frame_for_public, verify_response,
};
use super::{
    params_frame_for_public, verdict_frame, Body, ProtocolConfig, ProtocolError, Transcript,
    TranscriptEntry, Verdict, VerifierKey,
};

/// How the cheating prover's verifier draws its challenges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuessStrategy {
    /// Honest verifier: uniform challenges, so each round's guess matches
    /// with probability one over the challenge-space size.
    Uniform,
    /// Rigged verifier that always asks exactly what the prover prepared
    /// for; the run must accept.
    Rigged,
}

/// Forged accepting round for a fixed challenge, from an explicit coin.
///
/// Supported for the protocols whose forgery needs a single scalar coin;
/// the exhaustive zero-knowledge comparison drives this deterministically.
pub fn forge_round_with_coin(
    publics: &VerifierKey,
    challenge: &BigUint,
    coin: &BigUint,
) -> Result<(Body, Body), ProtocolError> {
    let mut ctr = MulCounter::new();
    match publics {
        VerifierKey::Qr(k) => {
            // c = 0: (r², r); c = 1: (m²·b⁻¹, m)
            let sq = mul_mod(coin, coin, &k.n, &mut ctr);
            let commitment = if challenge.is_zero() {
                sq
            } else {
                let b_inv = mod_inv(&k.b, &k.n)?;
                mul_mod(&sq, &b_inv, &k.n, &mut ctr)
            };
            Ok((Body::Int(commitment), Body::Int(coin.clone())))
        }
        VerifierKey::Fs(k) => {
            let mut t = mul_mod(coin, coin, &k.n, &mut ctr);
            for (i, v) in k.publics.iter().enumerate() {
                if challenge.bit(i as u64) {
                    let v_inv = mod_inv(v, &k.n)?;
                    t = mul_mod(&t, &v_inv, &k.n, &mut ctr);
                }
            }
            Ok((Body::Int(t), Body::Int(coin.clone())))
        }
        VerifierKey::Gq(k) => {
            // T := y^v · J^e satisfies the check by definition
            let yv = mod_exp(coin, &k.v, &k.n, &mut ctr);
            let je = mod_exp(&k.j, challenge, &k.n, &mut ctr);
            let t = mul_mod(&yv, &je, &k.n, &mut ctr);
            Ok((Body::Int(t), Body::Int(coin.clone())))
        }
        VerifierKey::Schnorr(k) => {
            // h := g^y · b^-e
            let gy = mod_exp(&k.group.g, coin, &k.group.p, &mut ctr);
            let be = mod_exp(&k.b, challenge, &k.group.p, &mut ctr);
            let h = mul_mod(&gy, &mod_inv(&be, &k.group.p)?, &k.group.p, &mut ctr);
            Ok((Body::Int(h), Body::Int(coin.clone())))
        }
        VerifierKey::EcDlog(k) => {
            let commitment = if challenge.is_zero() {
                scalar_mul(coin, &k.base, &k.curve, &mut ctr)?
            } else {
                // A := x·G - B
                point_add(
                    &scalar_mul(coin, &k.base, &k.curve, &mut ctr)?,
                    &point_neg(&k.b_point, &k.curve),
                    &k.curve,
                    &mut ctr,
                )?
            };
            Ok((Body::Point(commitment), Body::Int(coin.clone())))
        }
        VerifierKey::EcSqrt(_) | VerifierKey::EcSchnorr2g(_) => {
            Err(ProtocolError::InvalidSetting(
                "this protocol's forgery does not take a single scalar coin".into(),
            ))
        }
    }
}

/// Forged accepting round for a fixed challenge.
pub fn forge_round<R: RngCore + ?Sized>(
    publics: &VerifierKey,
    challenge: &BigUint,
    rng: &mut R,
) -> Result<(Body, Body), ProtocolError> {
    match publics {
        VerifierKey::Qr(k) => {
            let coin = rand_below(&k.n, rng);
            forge_round_with_coin(publics, challenge, &coin)
        }
        VerifierKey::Fs(k) => {
            let coin = rand_below(&k.n, rng);
            forge_round_with_coin(publics, challenge, &coin)
        }
        VerifierKey::Gq(k) => {
            let coin = rand_below(&k.n, rng);
            forge_round_with_coin(publics, challenge, &coin)
        }
        VerifierKey::Schnorr(k) => {
            let coin = rand_below(&k.group.q, rng);
            forge_round_with_coin(publics, challenge, &coin)
        }
        VerifierKey::EcDlog(k) => {
            let coin = rand_below(&k.base_order, rng);
            forge_round_with_coin(publics, challenge, &coin)
        }
        VerifierKey::EcSqrt(k) => {
            // Without the factorization, sampling arbitrary ring points is
            // hard; multiples of the public point are enough to satisfy
            // the verifier. Resample on ring-arithmetic failures.
            let mut ctr = MulCounter::new();
            loop {
                let k_coin = rand_below(&k.curve.m, rng) + BigUint::one();
                let attempt = (|| -> Result<(Body, Body), EcError> {
                    let t = scalar_mul(&k_coin, &k.b_point, &k.curve, &mut ctr)?;
                    let double_t = point_add(&t, &t, &k.curve, &mut ctr)?;
                    let commitment = if challenge.is_zero() {
                        // S := 2T, answer T
                        double_t
                    } else {
                        // S := 2T - B, answer T
                        point_add(&double_t, &point_neg(&k.b_point, &k.curve), &k.curve, &mut ctr)?
                    };
                    Ok((Body::Point(commitment), Body::Point(t)))
                })();
                match attempt {
                    Ok(pair) => return Ok(pair),
                    Err(EcError::RingInversionFailure { .. }) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
        }
        VerifierKey::EcSchnorr2g(k) => {
            let mut ctr = MulCounter::new();
            let y1 = rand_below(&k.order, rng);
            let y2 = rand_below(&k.order, rng);
            // Q := W = y1·P1 + y2·P2 + e·V
            let w = point_add(
                &point_add(
                    &scalar_mul(&y1, &k.p1, &k.curve, &mut ctr)?,
                    &scalar_mul(&y2, &k.p2, &k.curve, &mut ctr)?,
                    &k.curve,
                    &mut ctr,
                )?,
                &scalar_mul(challenge, &k.v_point, &k.curve, &mut ctr)?,
                &k.curve,
                &mut ctr,
            )?;
            Ok((Body::Point(w), Body::IntPair(y1, y2)))
        }
    }
}

/// Runs a secret-less prover against an honest verifier for `cfg.rounds`
/// rounds: guess the challenge, commit to the guessed branch, answer, and
/// let the real verification equation decide. Accepts iff every guess
/// matched.
pub fn cheating_prover_run<R: RngCore + ?Sized>(
    publics: &VerifierKey,
    cfg: &ProtocolConfig,
    strategy: GuessStrategy,
    rng: &mut R,
) -> Result<Verdict, ProtocolError> {
    cfg.validate(publics.protocol())?;
    let space = publics.challenge_space(cfg);
    let mut ctr = MulCounter::new();
    for _ in 0..cfg.rounds {
        let guess = rand_below(&space, rng);
        let (commitment, response) = forge_round(publics, &guess, rng)?;
        let actual = match strategy {
            GuessStrategy::Uniform => rand_below(&space, rng),
            GuessStrategy::Rigged => guess.clone(),
        };
        if !verify_response(publics, &commitment, &actual, &response, &mut ctr)? {
            return Ok(Verdict::Reject);
        }
    }
    Ok(Verdict::Accept)
}

/// Produces an accepting transcript without the secret key, sampling each
/// challenge before its commitment — the standard simulator ordering.
pub fn simulate_transcript<R: RngCore + ?Sized>(
    publics: &VerifierKey,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<Transcript, ProtocolError> {
    cfg.validate(publics.protocol())?;
    let started = Instant::now();
    let protocol = publics.protocol();
    let space = publics.challenge_space(cfg);
    let mut channel = MeteredChannel::new();
    let mut entries = Vec::with_capacity(3 * cfg.rounds as usize + 2);
    let mut ctr = MulCounter::new();

    let push = |channel: &mut MeteredChannel,
                    entries: &mut Vec<TranscriptEntry>,
                    round: u32,
                    direction: Direction,
                    frame: Frame|
     -> Result<(), ProtocolError> {
        channel.send(direction, frame.clone())?;
        channel.recv(direction)?;
        entries.push(TranscriptEntry {
            round,
            direction,
            frame,
        });
        Ok(())
    };

    let params = params_frame_for_public(publics, cfg);
    push(&mut channel, &mut entries, 0, Direction::AToB, params)?;

    for round in 1..=cfg.rounds {
        let challenge = rand_below(&space, rng);
        let (commitment, response) = forge_round(publics, &challenge, rng)?;
        debug_assert!(verify_response(publics, &commitment, &challenge, &response, &mut ctr)?);

        let cf = commitment_frame_for_public(publics, &commitment);
        push(&mut channel, &mut entries, round, Direction::AToB, cf)?;
        let chf = Frame::new(protocol, MsgType::Challenge, crate::wire::encode_int(&challenge));
        push(&mut channel, &mut entries, round, Direction::BToA, chf)?;
        let rf = response_frame_for_public(publics, &response);
        push(&mut channel, &mut entries, round, Direction::AToB, rf)?;
    }

    let vf = verdict_frame(protocol, Verdict::Accept);
    push(&mut channel, &mut entries, cfg.rounds, Direction::BToA, vf)?;

    let max_frame = entries
        .iter()
        .map(|e| e.frame.encoded_len() as u64)
        .max()
        .unwrap_or(0);
    Ok(Transcript {
        protocol,
        entries,
        verdict: Verdict::Accept,
        rejected_at: None,
        metrics: Metrics {
            bandwidth_bits: 8 * channel.total_bytes(),
            prover_modmuls: ctr.get(),
            memory_bytes: max_frame,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    })
}
