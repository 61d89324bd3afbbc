//! Per-protocol commit / respond / check arithmetic and the frame
//! encodings of commitments and responses.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;

use crate::ecc::{
    self, decode_point, encode_point, point_add, scalar_mul, CurveParams, EcError,
    Point,
};
use crate::numtheory::{crt_combine, mod_exp, mul_mod, rand_below, MulCounter};
use crate::wire::{put_bytes, put_int, Frame, MsgType, PayloadReader};

use super::{Body, CommitSecret, ProtocolError, ProverKey, VerifierKey};

// ---------------------------------------------------------------------------
// Commitments
// ---------------------------------------------------------------------------

/// Commitment from an explicit scalar coin, for the protocols whose
/// per-round randomness is a single scalar. Lets tests and the transcript
/// enumeration drive the real code path deterministically.
pub(crate) fn scalar_commitment_from_coin(
    key: &ProverKey,
    r: BigUint,
    ctr: &mut MulCounter,
) -> Result<(CommitSecret, Body), ProtocolError> {
    let commitment = match key {
        ProverKey::Qr(k) => Body::Int(mul_mod(&r, &r, &k.n, ctr)),
        ProverKey::Fs(k) => Body::Int(mul_mod(&r, &r, &k.n, ctr)),
        ProverKey::Gq(k) => Body::Int(mod_exp(&r, &k.v, &k.n, ctr)),
        ProverKey::Schnorr(k) => Body::Int(mod_exp(&k.group.g, &r, &k.group.p, ctr)),
        ProverKey::EcDlog(k) => Body::Point(scalar_mul(&r, &k.base, &k.curve, ctr)?),
        ProverKey::EcSqrt(_) | ProverKey::EcSchnorr2g(_) => {
            return Err(ProtocolError::InvalidSetting(
                "this protocol does not take a single-scalar commitment coin".into(),
            ))
        }
    };
    Ok((CommitSecret::Scalar(r), commitment))
}

/// Draws this round's randomness and produces the commitment.
pub(crate) fn compute_commitment<R: RngCore + ?Sized>(
    key: &ProverKey,
    rng: &mut R,
    ctr: &mut MulCounter,
) -> Result<(CommitSecret, Body), ProtocolError> {
    match key {
        ProverKey::Qr(k) => {
            let r = rand_below(&k.n, rng);
            scalar_commitment_from_coin(key, r, ctr)
        }
        ProverKey::Fs(k) => {
            let r = rand_below(&k.n, rng);
            scalar_commitment_from_coin(key, r, ctr)
        }
        ProverKey::Gq(k) => {
            let r = rand_below(&k.n, rng);
            scalar_commitment_from_coin(key, r, ctr)
        }
        ProverKey::Schnorr(k) => {
            let r = rand_below(&k.group.q, rng);
            scalar_commitment_from_coin(key, r, ctr)
        }
        ProverKey::EcDlog(k) => {
            let r = rand_below(&k.base_order, rng);
            scalar_commitment_from_coin(key, r, ctr)
        }
        ProverKey::EcSqrt(k) => {
            // Keep resampling until both the commitment S = 2R and the
            // c = 1 answer M = R + A are computable over the ring, so the
            // respond step can never fail.
            loop {
                let r = random_ring_point(&k.curve, &k.factors, rng)?;
                let s = match point_add(&r, &r, &k.curve, ctr) {
                    Ok(s) => s,
                    Err(EcError::RingInversionFailure { .. }) => continue,
                    Err(e) => return Err(e.into()),
                };
                let m = match point_add(&r, &k.a_point, &k.curve, ctr) {
                    Ok(m) => m,
                    Err(EcError::RingInversionFailure { .. }) => continue,
                    Err(e) => return Err(e.into()),
                };
                return Ok((CommitSecret::RingPair { r, m }, Body::Point(s)));
            }
        }
        ProverKey::EcSchnorr2g(k) => {
            let span = &k.order - BigUint::one();
            loop {
                let r1 = rand_below(&span, rng) + BigUint::one();
                let r2 = rand_below(&span, rng) + BigUint::one();
                let q = point_add(
                    &scalar_mul(&r1, &k.p1, &k.curve, ctr)?,
                    &scalar_mul(&r2, &k.p2, &k.curve, ctr)?,
                    &k.curve,
                    ctr,
                )?;
                // the x-coordinate comparison needs an affine commitment
                if !q.is_infinity() {
                    return Ok((CommitSecret::ScalarPair(r1, r2), Body::Point(q)));
                }
            }
        }
    }
}

/// Uniform point on a ring curve, assembled per prime factor. Only the
/// prover can do this: it requires the factorization.
fn random_ring_point<R: RngCore + ?Sized>(
    curve: &CurveParams,
    factors: &(BigUint, BigUint),
    rng: &mut R,
) -> Result<Point, ProtocolError> {
    let (p, q) = factors;
    let cp = curve.reduce_mod_factor(p)?;
    let cq = curve.reduce_mod_factor(q)?;
    let (Point::Affine { x: xp, y: yp }, Point::Affine { x: xq, y: yq }) =
        (ecc::random_point(&cp, rng), ecc::random_point(&cq, rng))
    else {
        unreachable!("random_point returns affine points")
    };
    let x = crt_combine(&[(xp, p.clone()), (xq, q.clone())])?;
    let y = crt_combine(&[(yp, p.clone()), (yq, q.clone())])?;
    Ok(Point::Affine { x, y })
}

// ---------------------------------------------------------------------------
// Responses
// ---------------------------------------------------------------------------

pub(crate) fn compute_response(
    key: &ProverKey,
    secret: &CommitSecret,
    challenge: &BigUint,
    ctr: &mut MulCounter,
) -> Result<Body, ProtocolError> {
    let body = match (key, secret) {
        (ProverKey::Qr(k), CommitSecret::Scalar(r)) => {
            if challenge.is_zero() {
                Body::Int(r.clone())
            } else {
                Body::Int(mul_mod(r, &k.x, &k.n, ctr))
            }
        }
        (ProverKey::Fs(k), CommitSecret::Scalar(r)) => {
            let mut y = r.clone();
            for (i, s) in k.secrets.iter().enumerate() {
                if challenge.bit(i as u64) {
                    y = mul_mod(&y, s, &k.n, ctr);
                }
            }
            Body::Int(y)
        }
        (ProverKey::Gq(k), CommitSecret::Scalar(r)) => {
            let pow = mod_exp(&k.s, challenge, &k.n, ctr);
            Body::Int(mul_mod(r, &pow, &k.n, ctr))
        }
        (ProverKey::Schnorr(k), CommitSecret::Scalar(r)) => {
            // the online cost: exactly one modular multiplication
            let xe = mul_mod(&k.x, challenge, &k.group.q, ctr);
            Body::Int((r + xe) % &k.group.q)
        }
        (ProverKey::EcDlog(k), CommitSecret::Scalar(r)) => {
            if challenge.is_zero() {
                Body::Int(r.clone())
            } else {
                Body::Int((r + &k.secret) % &k.base_order)
            }
        }
        (ProverKey::EcSqrt(_), CommitSecret::RingPair { r, m }) => {
            if challenge.is_zero() {
                Body::Point(r.clone())
            } else {
                Body::Point(m.clone())
            }
        }
        (ProverKey::EcSchnorr2g(k), CommitSecret::ScalarPair(r1, r2)) => {
            let y1 = (r1 + mul_mod(challenge, &k.d1, &k.order, ctr)) % &k.order;
            let y2 = (r2 + mul_mod(challenge, &k.d2, &k.order, ctr)) % &k.order;
            Body::IntPair(y1, y2)
        }
        _ => unreachable!("commit secret shape always matches the key"),
    };
    Ok(body)
}

/// Commitment and response for one honest round with an injected coin.
/// Supported for the protocols whose randomness is one scalar; used by the
/// worked-example tests and the exhaustive transcript enumeration.
pub fn honest_round_with_coin(
    key: &ProverKey,
    coin: &BigUint,
    challenge: &BigUint,
) -> Result<(Body, Body), ProtocolError> {
    let mut ctr = MulCounter::new();
    let (secret, commitment) = scalar_commitment_from_coin(key, coin.clone(), &mut ctr)?;
    let response = compute_response(key, &secret, challenge, &mut ctr)?;
    Ok((commitment, response))
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

pub(crate) fn verify_response(
    key: &VerifierKey,
    commitment: &Body,
    challenge: &BigUint,
    response: &Body,
    ctr: &mut MulCounter,
) -> Result<bool, ProtocolError> {
    let ok = match (key, commitment, response) {
        (VerifierKey::Qr(k), Body::Int(s), Body::Int(y)) => {
            let y_sq = mul_mod(y, y, &k.n, ctr);
            if challenge.is_zero() {
                y_sq == *s
            } else {
                y_sq == mul_mod(s, &k.b, &k.n, ctr)
            }
        }
        (VerifierKey::Fs(k), Body::Int(t), Body::Int(y)) => {
            let y_sq = mul_mod(y, y, &k.n, ctr);
            let mut rhs = t.clone();
            for (i, v) in k.publics.iter().enumerate() {
                if challenge.bit(i as u64) {
                    rhs = mul_mod(&rhs, v, &k.n, ctr);
                }
            }
            y_sq == rhs
        }
        (VerifierKey::Gq(k), Body::Int(t), Body::Int(y)) => {
            let yv = mod_exp(y, &k.v, &k.n, ctr);
            let je = mod_exp(&k.j, challenge, &k.n, ctr);
            mul_mod(&yv, &je, &k.n, ctr) == *t
        }
        (VerifierKey::Schnorr(k), Body::Int(h), Body::Int(y)) => {
            let lhs = mod_exp(&k.group.g, y, &k.group.p, ctr);
            let be = mod_exp(&k.b, challenge, &k.group.p, ctr);
            lhs == mul_mod(h, &be, &k.group.p, ctr)
        }
        (VerifierKey::EcSqrt(k), Body::Point(s), Body::Point(t)) => {
            ring_double_matches(&k.curve, t, s, &k.b_point, !challenge.is_zero(), ctr)?
        }
        (VerifierKey::EcDlog(k), Body::Point(a), Body::Int(y)) => {
            let lhs = scalar_mul(y, &k.base, &k.curve, ctr)?;
            if challenge.is_zero() {
                lhs == *a
            } else {
                lhs == point_add(a, &k.b_point, &k.curve, ctr)?
            }
        }
        (VerifierKey::EcSchnorr2g(k), Body::Point(q), Body::IntPair(y1, y2)) => {
            let w = point_add(
                &point_add(
                    &scalar_mul(y1, &k.p1, &k.curve, ctr)?,
                    &scalar_mul(y2, &k.p2, &k.curve, ctr)?,
                    &k.curve,
                    ctr,
                )?,
                &scalar_mul(challenge, &k.v_point, &k.curve, ctr)?,
                &k.curve,
                ctr,
            )?;
            match (q, &w) {
                (Point::Infinity, Point::Infinity) => true,
                (Point::Affine { x: xq, .. }, Point::Affine { x: xw, .. }) => xq == xw,
                _ => false,
            }
        }
        _ => {
            return Err(ProtocolError::MalformedFrame(
                "message shapes do not fit the protocol".into(),
            ))
        }
    };
    Ok(ok)
}

/// Ring-curve check `2T = S` (or `2T = S + B` when `with_b`), evaluated
/// over pairwise-coprime parts of the modulus. When the affine arithmetic
/// hits a non-invertible denominator the revealed factor splits the part
/// and the check continues per factor; the verdict the CRT components
/// agree on is the semantic truth of the equation.
fn ring_double_matches(
    curve: &CurveParams,
    t: &Point,
    s: &Point,
    b: &Point,
    with_b: bool,
    ctr: &mut MulCounter,
) -> Result<bool, ProtocolError> {
    let mut parts = vec![curve.m.clone()];
    let mut i = 0;
    while i < parts.len() {
        let m = parts[i].clone();
        let attempt = (|| -> Result<bool, EcError> {
            let part_curve = if m == curve.m {
                curve.clone()
            } else {
                CurveParams::ring(m.clone(), &curve.a % &m, &curve.b % &m)?
            };
            let tm = t.reduce_mod_factor(&m);
            let sm = s.reduce_mod_factor(&m);
            let lhs = point_add(&tm, &tm, &part_curve, ctr)?;
            let rhs = if with_b {
                point_add(&sm, &b.reduce_mod_factor(&m), &part_curve, ctr)?
            } else {
                sm
            };
            Ok(lhs == rhs)
        })();
        match attempt {
            Ok(true) => i += 1,
            Ok(false) => return Ok(false),
            Err(EcError::RingInversionFailure { gcd })
                if gcd > BigUint::one() && gcd < m =>
            {
                let other = &m / &gcd;
                if other.gcd(&gcd) != BigUint::one() {
                    // square factor; cannot split coprimely
                    return Err(EcError::RingInversionFailure { gcd }.into());
                }
                parts[i] = gcd;
                parts.push(other);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Frame encodings
// ---------------------------------------------------------------------------

fn curve_of_verifier(key: &VerifierKey) -> Option<&CurveParams> {
    match key {
        VerifierKey::EcSqrt(k) => Some(&k.curve),
        VerifierKey::EcDlog(k) => Some(&k.curve),
        VerifierKey::EcSchnorr2g(k) => Some(&k.curve),
        _ => None,
    }
}

fn curve_of_prover(key: &ProverKey) -> Option<&CurveParams> {
    match key {
        ProverKey::EcSqrt(k) => Some(&k.curve),
        ProverKey::EcDlog(k) => Some(&k.curve),
        ProverKey::EcSchnorr2g(k) => Some(&k.curve),
        _ => None,
    }
}

fn encode_body(body: &Body, curve: Option<&CurveParams>, identity: Option<&[u8]>) -> Vec<u8> {
    let mut payload = Vec::new();
    if let Some(id) = identity {
        put_bytes(&mut payload, id);
    }
    match body {
        Body::Int(x) => put_int(&mut payload, x),
        Body::Point(p) => {
            payload.extend_from_slice(&encode_point(p, curve.expect("EC body needs a curve")))
        }
        Body::IntPair(a, b) => {
            put_int(&mut payload, a);
            put_int(&mut payload, b);
        }
    }
    payload
}

pub(crate) fn commitment_frame(key: &ProverKey, body: &Body) -> Frame {
    let identity = match key {
        // the identity rides along with every GQ commitment
        ProverKey::Gq(k) => Some(k.identity.as_slice()),
        _ => None,
    };
    Frame::new(
        key.protocol(),
        MsgType::Commit,
        encode_body(body, curve_of_prover(key), identity),
    )
}

pub(crate) fn commitment_frame_for_public(key: &VerifierKey, body: &Body) -> Frame {
    let identity = match key {
        VerifierKey::Gq(k) => Some(k.identity.as_slice()),
        _ => None,
    };
    Frame::new(
        key.protocol(),
        MsgType::Commit,
        encode_body(body, curve_of_verifier(key), identity),
    )
}

pub(crate) fn response_frame(key: &ProverKey, body: &Body) -> Frame {
    Frame::new(
        key.protocol(),
        MsgType::Response,
        encode_body(body, curve_of_prover(key), None),
    )
}

pub(crate) fn response_frame_for_public(key: &VerifierKey, body: &Body) -> Frame {
    Frame::new(
        key.protocol(),
        MsgType::Response,
        encode_body(body, curve_of_verifier(key), None),
    )
}

fn read_reduced_int(
    reader: &mut PayloadReader<'_>,
    modulus: &BigUint,
) -> Result<BigUint, ProtocolError> {
    let x = reader
        .read_int()
        .map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    if &x >= modulus {
        return Err(ProtocolError::MalformedFrame(
            "value not reduced modulo the setting".into(),
        ));
    }
    Ok(x)
}

fn read_point(payload: &[u8], curve: &CurveParams) -> Result<Point, ProtocolError> {
    decode_point(payload, curve).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))
}

pub(crate) fn parse_commitment(
    key: &VerifierKey,
    payload: &[u8],
) -> Result<Body, ProtocolError> {
    match key {
        VerifierKey::Qr(k) => parse_single_int(payload, &k.n),
        VerifierKey::Fs(k) => parse_single_int(payload, &k.n),
        VerifierKey::Gq(k) => {
            let mut r = PayloadReader::new(payload);
            let identity = r
                .read_bytes()
                .map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
            if identity != k.identity {
                return Err(ProtocolError::MalformedFrame(
                    "commitment carries a different identity".into(),
                ));
            }
            let t = read_reduced_int(&mut r, &k.n)?;
            r.finish()
                .map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
            Ok(Body::Int(t))
        }
        VerifierKey::Schnorr(k) => parse_single_int(payload, &k.group.p),
        VerifierKey::EcSqrt(k) => Ok(Body::Point(read_point(payload, &k.curve)?)),
        VerifierKey::EcDlog(k) => Ok(Body::Point(read_point(payload, &k.curve)?)),
        VerifierKey::EcSchnorr2g(k) => Ok(Body::Point(read_point(payload, &k.curve)?)),
    }
}

pub(crate) fn parse_response(key: &VerifierKey, payload: &[u8]) -> Result<Body, ProtocolError> {
    match key {
        VerifierKey::Qr(k) => parse_single_int(payload, &k.n),
        VerifierKey::Fs(k) => parse_single_int(payload, &k.n),
        VerifierKey::Gq(k) => parse_single_int(payload, &k.n),
        VerifierKey::Schnorr(k) => parse_single_int(payload, &k.group.q),
        VerifierKey::EcSqrt(k) => Ok(Body::Point(read_point(payload, &k.curve)?)),
        VerifierKey::EcDlog(k) => parse_single_int(payload, &k.base_order),
        VerifierKey::EcSchnorr2g(k) => {
            let mut r = PayloadReader::new(payload);
            let y1 = read_reduced_int(&mut r, &k.order)?;
            let y2 = read_reduced_int(&mut r, &k.order)?;
            r.finish()
                .map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
            Ok(Body::IntPair(y1, y2))
        }
    }
}

fn parse_single_int(payload: &[u8], modulus: &BigUint) -> Result<Body, ProtocolError> {
    let mut r = PayloadReader::new(payload);
    let x = read_reduced_int(&mut r, modulus)?;
    r.finish()
        .map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    Ok(Body::Int(x))
}

