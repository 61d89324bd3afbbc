//! Malicious-verifier attack on the EC square-root scheme over a
//! composite ring.
//!
//! A verifier that always fixes the challenge bit to 1 receives the
//! commitment `S = 2R` and the answer `M = R + A`. At desk scale it
//! factors the ring modulus by trial division, finds every half point of
//! `S` modulo each prime factor by exhaustive search, lifts the candidate
//! `R` back up with the Chinese remainder theorem, and reads off the
//! secret as `A = M − R`. The discrete-log scheme has no such handle: its
//! response `x = r + m` is consistent with every candidate secret, which
//! [`count_consistent_dlog_secrets`] demonstrates.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::RngCore;

use crate::ecc::{
    factor_u64, find_half_points, on_curve, point_add, point_neg, CurveParams,
    EcError, Point,
};
use crate::numtheory::{crt_combine, MulCounter};
use crate::wire::{decode_int, encode_int, Frame, MsgType};

use super::{
    EcSqrtVerifierKey, ProtocolError, ProtocolId, Role, SessionState, VerifierKey,
};

/// What the attack produced, plus the malicious round it was built from.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub recovered: Point,
    pub factors: Vec<BigUint>,
    pub candidates_tried: u64,
    pub commitment: Point,
    pub response: Point,
}

/// Runs one malicious round against a live prover session (challenge bit
/// forced to 1) and recovers a secret point `A` with `2A = B`.
pub fn ec_sqrt_attack<R: RngCore + ?Sized>(
    publics: &VerifierKey,
    prover: &mut SessionState,
    rng: &mut R,
) -> Result<AttackOutcome, ProtocolError> {
    let VerifierKey::EcSqrt(key) = publics else {
        return Err(ProtocolError::InvalidSetting(
            "attack applies to the EC square-root scheme".into(),
        ));
    };
    if prover.protocol() != ProtocolId::EcSqrt || prover.role() != Role::Prover {
        return Err(ProtocolError::SessionMismatch);
    }

    // one rigged round: commitment out, challenge fixed to 1, answer in
    let commit = prover.prover_commit(rng)?;
    let commitment = decode_commit_point(&commit, key)?;
    let rigged = Frame::new(
        ProtocolId::EcSqrt,
        MsgType::Challenge,
        encode_int(&BigUint::one()),
    );
    let response_frame = prover.prover_respond(&rigged)?;
    let response = decode_commit_point(&response_frame, key)?;
    debug_assert!(decode_int(&rigged.payload).unwrap().is_one());

    let recovery = recover_secret(key, &commitment, &response)?;
    Ok(AttackOutcome {
        recovered: recovery.0,
        factors: recovery.1,
        candidates_tried: recovery.2,
        commitment,
        response,
    })
}

fn decode_commit_point(frame: &Frame, key: &EcSqrtVerifierKey) -> Result<Point, ProtocolError> {
    crate::ecc::decode_point(&frame.payload, &key.curve)
        .map_err(|e| ProtocolError::MalformedFrame(e.to_string()))
}

/// Offline part of the attack: from `S = 2R` and `M = R + A`, factor the
/// modulus and lift every candidate `R`, returning the first `A = M − R`
/// with `2A = B`.
fn recover_secret(
    key: &EcSqrtVerifierKey,
    s: &Point,
    m_point: &Point,
) -> Result<(Point, Vec<BigUint>, u64), ProtocolError> {
    let n = key
        .curve
        .m
        .to_u64()
        .ok_or(ProtocolError::Ec(EcError::ModulusTooLarge))?;
    let factorization = factor_u64(n);
    if factorization.len() < 2 || factorization.iter().any(|(_, e)| *e != 1) {
        return Err(ProtocolError::InvalidSetting(
            "ring modulus must be squarefree with at least two prime factors".into(),
        ));
    }
    let factors: Vec<BigUint> = factorization
        .iter()
        .map(|(p, _)| BigUint::from(*p))
        .collect();

    // half points of S modulo each prime factor
    let mut per_factor: Vec<(BigUint, CurveParams, Vec<Point>)> = Vec::new();
    for f in &factors {
        let field_curve = key.curve.reduce_mod_factor(f)?;
        let halves = find_half_points(&s.reduce_mod_factor(f), &field_curve)?;
        if halves.is_empty() {
            return Err(ProtocolError::AttackFailed { candidates_tried: 0 });
        }
        per_factor.push((f.clone(), field_curve, halves));
    }

    let mut scratch = MulCounter::new();
    let mut candidates_tried = 0u64;
    let mut indices = vec![0usize; per_factor.len()];
    'combos: loop {
        candidates_tried += 1;
        // candidate A modulo each factor: A_f = M_f - R_f
        let mut residues_x = Vec::with_capacity(per_factor.len());
        let mut residues_y = Vec::with_capacity(per_factor.len());
        let mut viable = true;
        let mut doubles_to_b = true;
        for (idx, (f, field_curve, halves)) in indices.iter().zip(&per_factor) {
            let r_f = &halves[*idx];
            let a_f = point_add(
                &m_point.reduce_mod_factor(f),
                &point_neg(r_f, field_curve),
                field_curve,
                &mut scratch,
            )?;
            let Point::Affine { x, y } = a_f.clone() else {
                viable = false;
                break;
            };
            let double = point_add(&a_f, &a_f, field_curve, &mut scratch)?;
            if double != key.b_point.reduce_mod_factor(f) {
                doubles_to_b = false;
                break;
            }
            residues_x.push((x, f.clone()));
            residues_y.push((y, f.clone()));
        }
        if viable && doubles_to_b {
            let x = crt_combine(&residues_x)?;
            let y = crt_combine(&residues_y)?;
            let recovered = Point::Affine { x, y };
            debug_assert!(on_curve(&recovered, &key.curve));
            return Ok((recovered, factors, candidates_tried));
        }
        // next combination
        for pos in 0..indices.len() {
            indices[pos] += 1;
            if indices[pos] < per_factor[pos].2.len() {
                continue 'combos;
            }
            indices[pos] = 0;
        }
        break;
    }
    Err(ProtocolError::AttackFailed { candidates_tried })
}

/// Verifies a recovered secret against the public point: `2A = B`,
/// checked per prime factor so ring arithmetic cannot fail.
pub fn doubles_to_public(
    recovered: &Point,
    factors: &[BigUint],
    key: &EcSqrtVerifierKey,
) -> Result<bool, ProtocolError> {
    let mut scratch = MulCounter::new();
    for f in factors {
        let field_curve = key.curve.reduce_mod_factor(f)?;
        let a_f = recovered.reduce_mod_factor(f);
        let doubled = point_add(&a_f, &a_f, &field_curve, &mut scratch)?;
        if doubled != key.b_point.reduce_mod_factor(f) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Counts candidate secrets `m'` that a factoring attacker cannot rule out
/// from the response `x = r + m` of a discrete-log round: those with some
/// commitment coin `r' ∈ [0, order)` satisfying `r' + m' ≡ x`. Every
/// candidate qualifies — the coin blinds the secret like a one-time pad,
/// and tying `x` back to the commitment point would mean solving the
/// discrete logarithm, which factoring does not touch: the field modulus
/// is prime, so the square-root attack's factor-and-lift pipeline has
/// nothing to split.
pub fn count_consistent_dlog_secrets(
    publics: &VerifierKey,
    response: &BigUint,
) -> Result<u64, ProtocolError> {
    let VerifierKey::EcDlog(key) = publics else {
        return Err(ProtocolError::InvalidSetting(
            "consistency count applies to the EC discrete-log scheme".into(),
        ));
    };
    let order = key
        .base_order
        .to_u64()
        .ok_or(ProtocolError::Ec(EcError::ModulusTooLarge))?;
    let modulus_factors = factor_u64(
        key.curve
            .m
            .to_u64()
            .ok_or(ProtocolError::Ec(EcError::ModulusTooLarge))?,
    );
    debug_assert_eq!(modulus_factors.len(), 1, "prime field: nothing to factor");
    let mut consistent = 0u64;
    for candidate in 0..order {
        let candidate = BigUint::from(candidate);
        // the coin that would explain this secret
        let r = (response + &key.base_order - (&candidate % &key.base_order)) % &key.base_order;
        if r < key.base_order {
            consistent += 1;
        }
    }
    Ok(consistent)
}
