//! Session state machines for the seven identification protocols.
//!
//! Each run is a sequence of commit / challenge / respond / check rounds
//! between a prover and a verifier exchanging [`Frame`]s, preceded by a
//! params frame and closed by a verdict frame. The four classical
//! protocols (quadratic residues, Fiat–Shamir, Guillou–Quisquater,
//! Schnorr) work in RSA-style or Schnorr-group settings; the three
//! elliptic-curve protocols work over a prime-field curve or, for the
//! square-root scheme, a composite ring.

mod steps;

pub mod attack;
pub mod sim;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use thiserror::Error;

use crate::bench::Metrics;
use crate::ecc::{
    self, on_curve, point_add, point_neg, scalar_mul, CurveParams, EcError, Point,
};
use crate::numtheory::{
    gen_prime, gen_rsa_modulus, gen_schnorr_group, is_probable_prime, mod_exp, mod_inv,
    rand_below, MulCounter, NumTheoryError, RsaModulus, SchnorrGroup, DEFAULT_PRIMALITY_ROUNDS,
};
use crate::wire::{
    decode_int, encode_int, put_bytes, put_int, Direction, Frame, MeteredChannel, MsgType,
    PayloadReader, WireError,
};

pub use sim::{cheating_prover_run, forge_round, forge_round_with_coin, simulate_transcript, GuessStrategy};
pub use steps::honest_round_with_coin;

/// Protocol identifiers with their fixed wire byte values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolId {
    Qr,
    Fs,
    Gq,
    Schnorr,
    EcSqrt,
    EcDlog,
    EcSchnorr2g,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 7] = [
        ProtocolId::Qr,
        ProtocolId::Fs,
        ProtocolId::Gq,
        ProtocolId::Schnorr,
        ProtocolId::EcSqrt,
        ProtocolId::EcDlog,
        ProtocolId::EcSchnorr2g,
    ];

    pub fn wire_byte(self) -> u8 {
        match self {
            ProtocolId::Qr => 0x01,
            ProtocolId::Fs => 0x02,
            ProtocolId::Gq => 0x03,
            ProtocolId::Schnorr => 0x04,
            ProtocolId::EcSqrt => 0x11,
            ProtocolId::EcDlog => 0x12,
            ProtocolId::EcSchnorr2g => 0x13,
        }
    }

    pub fn from_wire_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => ProtocolId::Qr,
            0x02 => ProtocolId::Fs,
            0x03 => ProtocolId::Gq,
            0x04 => ProtocolId::Schnorr,
            0x11 => ProtocolId::EcSqrt,
            0x12 => ProtocolId::EcDlog,
            0x13 => ProtocolId::EcSchnorr2g,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolId::Qr => "qr",
            ProtocolId::Fs => "fs",
            ProtocolId::Gq => "gq",
            ProtocolId::Schnorr => "schnorr",
            ProtocolId::EcSqrt => "ec-sqrt",
            ProtocolId::EcDlog => "ec-dlog",
            ProtocolId::EcSchnorr2g => "ec-schnorr2g",
        }
    }

    /// Bit-challenge protocols must run with `challenge_bits = 1`.
    pub fn is_bit_challenge(self) -> bool {
        !matches!(self, ProtocolId::Schnorr | ProtocolId::EcSchnorr2g)
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qr" => Ok(ProtocolId::Qr),
            "fs" | "fiat-shamir" => Ok(ProtocolId::Fs),
            "gq" | "guillou-quisquater" => Ok(ProtocolId::Gq),
            "schnorr" => Ok(ProtocolId::Schnorr),
            "ec-sqrt" => Ok(ProtocolId::EcSqrt),
            "ec-dlog" => Ok(ProtocolId::EcDlog),
            "ec-schnorr2g" => Ok(ProtocolId::EcSchnorr2g),
            other => Err(format!("unknown protocol '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("state machine order violated: {0}")]
    StateOrderViolation(&'static str),
    #[error("challenge out of range for this protocol")]
    ChallengeOutOfRange,
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
    #[error("prover and verifier sessions do not match")]
    SessionMismatch,
    #[error("secret recovery failed after {candidates_tried} candidate lifts")]
    AttackFailed { candidates_tried: u64 },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Ec(#[from] EcError),
    #[error(transparent)]
    Num(#[from] NumTheoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Prover,
    Verifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// Typed protocol message content, before wire encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Int(BigUint),
    Point(Point),
    IntPair(BigUint, BigUint),
}

impl Body {
    pub fn as_int(&self) -> Option<&BigUint> {
        match self {
            Body::Int(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_point(&self) -> Option<&Point> {
        match self {
            Body::Point(p) => Some(p),
            _ => None,
        }
    }
}

/// Per-round randomness held by the prover between commit and respond.
#[derive(Debug, Clone)]
pub enum CommitSecret {
    /// `r` for the scalar protocols.
    Scalar(BigUint),
    /// Random ring point `R` plus the precomputed `M = R + A` for the EC
    /// square-root scheme; computing `M` at commit time lets the prover
    /// resample when the ring arithmetic fails.
    RingPair { r: Point, m: Point },
    /// `(r1, r2)` for the two-generator scheme.
    ScalarPair(BigUint, BigUint),
}

/// Run parameters shared by prover and verifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    /// Number of rounds `t`.
    pub rounds: u32,
    /// Number of Fiat–Shamir secrets `k`.
    pub fs_secrets: u32,
    /// Guillou–Quisquater public exponent `v` (prime).
    pub gq_exponent: BigUint,
    /// Challenge size in bits: 1 for the bit protocols, `t_e` for Schnorr
    /// and the two-generator scheme.
    pub challenge_bits: u32,
    /// Draw all per-round commitments before the run starts; the online
    /// multiplication counter then covers only challenge-dependent work.
    pub precompute_commitments: bool,
}

impl ProtocolConfig {
    pub fn new(protocol: ProtocolId, rounds: u32) -> Self {
        ProtocolConfig {
            rounds,
            fs_secrets: 3,
            gq_exponent: BigUint::from(65537u32),
            challenge_bits: if protocol.is_bit_challenge() { 1 } else { 20 },
            precompute_commitments: false,
        }
    }

    pub fn validate(&self, protocol: ProtocolId) -> Result<(), ProtocolError> {
        if protocol.is_bit_challenge() && self.challenge_bits != 1 {
            return Err(ProtocolError::InvalidSetting(format!(
                "{protocol} takes 1-bit challenges, got {} bits",
                self.challenge_bits
            )));
        }
        if self.challenge_bits == 0 || self.challenge_bits > 64 {
            return Err(ProtocolError::InvalidSetting(
                "challenge_bits must be in 1..=64".into(),
            ));
        }
        if self.fs_secrets == 0 {
            return Err(ProtocolError::InvalidSetting("fs_secrets must be ≥ 1".into()));
        }
        if protocol == ProtocolId::Gq
            && !is_probable_prime(&self.gq_exponent, DEFAULT_PRIMALITY_ROUNDS)
        {
            return Err(ProtocolError::InvalidSetting(
                "gq_exponent must be prime".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Keys
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrVerifierKey {
    pub n: BigUint,
    pub b: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrProverKey {
    pub n: BigUint,
    pub b: BigUint,
    pub x: BigUint,
}

impl QrProverKey {
    /// Builds the key pair from the secret root; `b = x² mod n`.
    pub fn from_parts(n: BigUint, x: BigUint) -> Result<Self, ProtocolError> {
        if x.gcd(&n) != BigUint::one() {
            return Err(ProtocolError::InvalidSetting(
                "secret root must be coprime to the modulus".into(),
            ));
        }
        let b = (&x * &x) % &n;
        Ok(QrProverKey { n, b, x })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsVerifierKey {
    pub n: BigUint,
    pub publics: Vec<BigUint>,
    pub identity: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsProverKey {
    pub n: BigUint,
    pub secrets: Vec<BigUint>,
    pub publics: Vec<BigUint>,
    pub identity: Vec<u8>,
}

impl FsProverKey {
    pub fn from_parts(
        n: BigUint,
        secrets: Vec<BigUint>,
        identity: Vec<u8>,
    ) -> Result<Self, ProtocolError> {
        if secrets.is_empty() {
            return Err(ProtocolError::InvalidSetting("need at least one secret".into()));
        }
        for s in &secrets {
            if s.gcd(&n) != BigUint::one() {
                return Err(ProtocolError::InvalidSetting(
                    "secrets must be coprime to the modulus".into(),
                ));
            }
        }
        let publics = secrets.iter().map(|s| (s * s) % &n).collect();
        Ok(FsProverKey {
            n,
            secrets,
            publics,
            identity,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GqVerifierKey {
    pub n: BigUint,
    pub v: BigUint,
    pub j: BigUint,
    pub identity: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GqProverKey {
    pub n: BigUint,
    pub v: BigUint,
    pub j: BigUint,
    pub s: BigUint,
    pub identity: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchnorrVerifierKey {
    pub group: SchnorrGroup,
    pub b: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchnorrProverKey {
    pub group: SchnorrGroup,
    pub b: BigUint,
    pub x: BigUint,
}

impl SchnorrProverKey {
    pub fn from_parts(group: SchnorrGroup, x: BigUint) -> Self {
        let mut scratch = MulCounter::new();
        let b = mod_exp(&group.g, &x, &group.p, &mut scratch);
        SchnorrProverKey { group, b, x }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcSqrtVerifierKey {
    pub curve: CurveParams,
    pub b_point: Point,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcSqrtProverKey {
    pub curve: CurveParams,
    pub b_point: Point,
    pub a_point: Point,
    /// Prime factors of the ring modulus; the prover generated the
    /// instance and uses them to sample random ring points.
    pub factors: (BigUint, BigUint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcDlogVerifierKey {
    pub curve: CurveParams,
    pub base: Point,
    pub base_order: BigUint,
    pub b_point: Point,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcDlogProverKey {
    pub curve: CurveParams,
    pub base: Point,
    pub base_order: BigUint,
    pub b_point: Point,
    pub secret: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ec2gVerifierKey {
    pub curve: CurveParams,
    pub p1: Point,
    pub p2: Point,
    pub order: BigUint,
    pub v_point: Point,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ec2gProverKey {
    pub curve: CurveParams,
    pub p1: Point,
    pub p2: Point,
    pub order: BigUint,
    pub d1: BigUint,
    pub d2: BigUint,
    pub v_point: Point,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProverKey {
    Qr(QrProverKey),
    Fs(FsProverKey),
    Gq(GqProverKey),
    Schnorr(SchnorrProverKey),
    EcSqrt(EcSqrtProverKey),
    EcDlog(EcDlogProverKey),
    EcSchnorr2g(Ec2gProverKey),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifierKey {
    Qr(QrVerifierKey),
    Fs(FsVerifierKey),
    Gq(GqVerifierKey),
    Schnorr(SchnorrVerifierKey),
    EcSqrt(EcSqrtVerifierKey),
    EcDlog(EcDlogVerifierKey),
    EcSchnorr2g(Ec2gVerifierKey),
}

impl ProverKey {
    pub fn protocol(&self) -> ProtocolId {
        match self {
            ProverKey::Qr(_) => ProtocolId::Qr,
            ProverKey::Fs(_) => ProtocolId::Fs,
            ProverKey::Gq(_) => ProtocolId::Gq,
            ProverKey::Schnorr(_) => ProtocolId::Schnorr,
            ProverKey::EcSqrt(_) => ProtocolId::EcSqrt,
            ProverKey::EcDlog(_) => ProtocolId::EcDlog,
            ProverKey::EcSchnorr2g(_) => ProtocolId::EcSchnorr2g,
        }
    }

    /// The corresponding public key: everything minus secret material.
    pub fn verifier_key(&self) -> VerifierKey {
        match self {
            ProverKey::Qr(k) => VerifierKey::Qr(QrVerifierKey {
                n: k.n.clone(),
                b: k.b.clone(),
            }),
            ProverKey::Fs(k) => VerifierKey::Fs(FsVerifierKey {
                n: k.n.clone(),
                publics: k.publics.clone(),
                identity: k.identity.clone(),
            }),
            ProverKey::Gq(k) => VerifierKey::Gq(GqVerifierKey {
                n: k.n.clone(),
                v: k.v.clone(),
                j: k.j.clone(),
                identity: k.identity.clone(),
            }),
            ProverKey::Schnorr(k) => VerifierKey::Schnorr(SchnorrVerifierKey {
                group: k.group.clone(),
                b: k.b.clone(),
            }),
            ProverKey::EcSqrt(k) => VerifierKey::EcSqrt(EcSqrtVerifierKey {
                curve: k.curve.clone(),
                b_point: k.b_point.clone(),
            }),
            ProverKey::EcDlog(k) => VerifierKey::EcDlog(EcDlogVerifierKey {
                curve: k.curve.clone(),
                base: k.base.clone(),
                base_order: k.base_order.clone(),
                b_point: k.b_point.clone(),
            }),
            ProverKey::EcSchnorr2g(k) => VerifierKey::EcSchnorr2g(Ec2gVerifierKey {
                curve: k.curve.clone(),
                p1: k.p1.clone(),
                p2: k.p2.clone(),
                order: k.order.clone(),
                v_point: k.v_point.clone(),
            }),
        }
    }

    /// Checks the defining public/secret equation of the key pair.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let mut scratch = MulCounter::new();
        let ok = match self {
            ProverKey::Qr(k) => (&k.x * &k.x) % &k.n == k.b,
            ProverKey::Fs(k) => {
                k.secrets.len() == k.publics.len()
                    && k.secrets
                        .iter()
                        .zip(&k.publics)
                        .all(|(s, v)| (s * s) % &k.n == *v)
            }
            ProverKey::Gq(k) => {
                let sv = mod_exp(&k.s, &k.v, &k.n, &mut scratch);
                (&k.j * sv) % &k.n == BigUint::one()
            }
            ProverKey::Schnorr(k) => {
                mod_exp(&k.group.g, &k.x, &k.group.p, &mut scratch) == k.b
            }
            ProverKey::EcSqrt(k) => {
                let (p, q) = &k.factors;
                if p * q != k.curve.m || !on_curve(&k.a_point, &k.curve) {
                    false
                } else {
                    // check 2A = B modulo each factor to dodge ring failures
                    [p, q].into_iter().all(|f| {
                        let Ok(cf) = k.curve.reduce_mod_factor(f) else {
                            return false;
                        };
                        let af = k.a_point.reduce_mod_factor(f);
                        let bf = k.b_point.reduce_mod_factor(f);
                        point_add(&af, &af, &cf, &mut scratch) == Ok(bf)
                    })
                }
            }
            ProverKey::EcDlog(k) => {
                on_curve(&k.base, &k.curve)
                    && scalar_mul(&k.secret, &k.base, &k.curve, &mut scratch)
                        == Ok(k.b_point.clone())
            }
            ProverKey::EcSchnorr2g(k) => {
                let q1 = point_neg(
                    &scalar_mul(&k.d1, &k.p1, &k.curve, &mut scratch)?,
                    &k.curve,
                );
                let q2 = point_neg(
                    &scalar_mul(&k.d2, &k.p2, &k.curve, &mut scratch)?,
                    &k.curve,
                );
                point_add(&q1, &q2, &k.curve, &mut scratch)? == k.v_point
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ProtocolError::InvalidSetting(
                "key pair fails its defining equation".into(),
            ))
        }
    }

    /// Total serialized size of the key material, used by the memory
    /// metric.
    pub fn wire_len(&self) -> u64 {
        let int = |x: &BigUint| encode_int(x).len() as u64;
        let pt = |p: &Point, e: &CurveParams| ecc::encode_point(p, e).len() as u64;
        let curve = |e: &CurveParams| int(&e.m) + int(&e.a) + int(&e.b);
        match self {
            ProverKey::Qr(k) => int(&k.n) + int(&k.b) + int(&k.x),
            ProverKey::Fs(k) => {
                int(&k.n)
                    + k.secrets.iter().map(&int).sum::<u64>()
                    + k.publics.iter().map(&int).sum::<u64>()
                    + 2
                    + k.identity.len() as u64
            }
            ProverKey::Gq(k) => {
                int(&k.n) + int(&k.v) + int(&k.j) + int(&k.s) + 2 + k.identity.len() as u64
            }
            ProverKey::Schnorr(k) => {
                int(&k.group.p) + int(&k.group.q) + int(&k.group.g) + int(&k.b) + int(&k.x)
            }
            ProverKey::EcSqrt(k) => {
                curve(&k.curve)
                    + pt(&k.b_point, &k.curve)
                    + pt(&k.a_point, &k.curve)
                    + int(&k.factors.0)
                    + int(&k.factors.1)
            }
            ProverKey::EcDlog(k) => {
                curve(&k.curve)
                    + pt(&k.base, &k.curve)
                    + int(&k.base_order)
                    + pt(&k.b_point, &k.curve)
                    + int(&k.secret)
            }
            ProverKey::EcSchnorr2g(k) => {
                curve(&k.curve)
                    + pt(&k.p1, &k.curve)
                    + pt(&k.p2, &k.curve)
                    + pt(&k.v_point, &k.curve)
                    + int(&k.order)
                    + int(&k.d1)
                    + int(&k.d2)
            }
        }
    }
}

impl VerifierKey {
    pub fn protocol(&self) -> ProtocolId {
        match self {
            VerifierKey::Qr(_) => ProtocolId::Qr,
            VerifierKey::Fs(_) => ProtocolId::Fs,
            VerifierKey::Gq(_) => ProtocolId::Gq,
            VerifierKey::Schnorr(_) => ProtocolId::Schnorr,
            VerifierKey::EcSqrt(_) => ProtocolId::EcSqrt,
            VerifierKey::EcDlog(_) => ProtocolId::EcDlog,
            VerifierKey::EcSchnorr2g(_) => ProtocolId::EcSchnorr2g,
        }
    }

    /// Identity bytes carried by the identity-based protocols.
    pub fn identity(&self) -> &[u8] {
        match self {
            VerifierKey::Fs(k) => &k.identity,
            VerifierKey::Gq(k) => &k.identity,
            _ => &[],
        }
    }

    /// Size of the challenge space under `cfg`.
    pub fn challenge_space(&self, cfg: &ProtocolConfig) -> BigUint {
        match self {
            VerifierKey::Qr(_) | VerifierKey::EcSqrt(_) | VerifierKey::EcDlog(_) => {
                BigUint::from(2u32)
            }
            VerifierKey::Fs(k) => BigUint::one() << k.publics.len(),
            VerifierKey::Gq(k) => k.v.clone(),
            VerifierKey::Schnorr(_) | VerifierKey::EcSchnorr2g(_) => {
                BigUint::one() << cfg.challenge_bits
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Settings and key generation
// ---------------------------------------------------------------------------

/// Algebraic setting a protocol instance lives in.
#[derive(Debug, Clone)]
pub enum Setting {
    Rsa(RsaModulus),
    Schnorr(SchnorrGroup),
    EcGroup {
        curve: CurveParams,
        base: Point,
        base_order: BigUint,
    },
    EcTwoGen {
        curve: CurveParams,
        p1: Point,
        p2: Point,
        order: BigUint,
    },
    /// Factors and the `a` coefficient for a ring curve; the curve's `b`
    /// is fixed during key generation so the secret point lands on it.
    EcRing {
        p: BigUint,
        q: BigUint,
        a: BigUint,
    },
}

/// Parameter sizes for [`generate_setting`].
#[derive(Debug, Clone)]
pub struct SettingSpec {
    /// Bits of the RSA-style modulus / Schnorr prime `p`.
    pub modulus_bits: u64,
    /// Bits of the Schnorr subgroup order `q`.
    pub subgroup_bits: u64,
    /// Bits of the prime field for EC protocols (desk scale, ≤ 20).
    pub ec_field_bits: u64,
    /// Bits of each prime factor of the EC ring modulus (≤ 16).
    pub ring_factor_bits: u64,
}

impl Default for SettingSpec {
    fn default() -> Self {
        SettingSpec {
            modulus_bits: 256,
            subgroup_bits: 64,
            ec_field_bits: 16,
            ring_factor_bits: 16,
        }
    }
}

/// Draws a fresh setting of the right kind for `protocol`.
pub fn generate_setting<R: RngCore + ?Sized>(
    protocol: ProtocolId,
    spec: &SettingSpec,
    rng: &mut R,
) -> Result<Setting, ProtocolError> {
    match protocol {
        ProtocolId::Qr | ProtocolId::Fs | ProtocolId::Gq => {
            Ok(Setting::Rsa(gen_rsa_modulus(spec.modulus_bits, rng)))
        }
        ProtocolId::Schnorr => Ok(Setting::Schnorr(gen_schnorr_group(
            spec.modulus_bits,
            spec.subgroup_bits,
            rng,
        ))),
        ProtocolId::EcDlog => {
            let (curve, base, base_order) = random_prime_order_generator(spec.ec_field_bits, rng)?;
            Ok(Setting::EcGroup {
                curve,
                base,
                base_order,
            })
        }
        ProtocolId::EcSchnorr2g => {
            let (curve, p1, order) = random_prime_order_generator(spec.ec_field_bits, rng)?;
            let cofactor = {
                let total = ecc::count_points(&curve)?;
                BigUint::from(total) / &order
            };
            let mut scratch = MulCounter::new();
            let p2 = loop {
                let candidate = ecc::random_point(&curve, rng);
                let projected = scalar_mul(&cofactor, &candidate, &curve, &mut scratch)?;
                if !projected.is_infinity() && projected != p1 {
                    break projected;
                }
            };
            Ok(Setting::EcTwoGen {
                curve,
                p1,
                p2,
                order,
            })
        }
        ProtocolId::EcSqrt => {
            if spec.ring_factor_bits < 3 || spec.ring_factor_bits > 16 {
                return Err(ProtocolError::InvalidSetting(
                    "ring factor size must be 3..=16 bits".into(),
                ));
            }
            let p = gen_prime(spec.ring_factor_bits.max(3), false, rng);
            let q = loop {
                let q = gen_prime(spec.ring_factor_bits.max(3), false, rng);
                if q != p {
                    break q;
                }
            };
            let n = &p * &q;
            let a = rand_below(&n, rng);
            Ok(Setting::EcRing { p, q, a })
        }
    }
}

/// Random desk-scale curve together with a point of large prime order.
fn random_prime_order_generator<R: RngCore + ?Sized>(
    field_bits: u64,
    rng: &mut R,
) -> Result<(CurveParams, Point, BigUint), ProtocolError> {
    if !(4..=20).contains(&field_bits) {
        return Err(ProtocolError::InvalidSetting(
            "EC field size must be 4..=20 bits".into(),
        ));
    }
    let mut scratch = MulCounter::new();
    loop {
        let m = gen_prime(field_bits, false, rng);
        if m < BigUint::from(5u32) {
            continue;
        }
        let a = rand_below(&m, rng);
        let b = rand_below(&m, rng);
        let Ok(curve) = CurveParams::field(m, a, b) else {
            continue;
        };
        let order = ecc::count_points(&curve)?;
        let largest_prime = ecc::factor_u64(order)
            .into_iter()
            .map(|(p, _)| p)
            .max()
            .unwrap_or(1);
        // insist on a usable subgroup: prime order comfortably above the
        // cofactor noise
        if largest_prime < 5 {
            continue;
        }
        let cofactor = BigUint::from(order / largest_prime);
        for _ in 0..32 {
            let candidate = ecc::random_point(&curve, rng);
            let base = scalar_mul(&cofactor, &candidate, &curve, &mut scratch)?;
            if !base.is_infinity() {
                return Ok((curve, base, BigUint::from(largest_prime)));
            }
        }
    }
}

/// Generates a key pair for `protocol` in `setting`.
///
/// `identity` is the opaque identity string baked into the Fiat–Shamir and
/// Guillou–Quisquater keys; other protocols ignore it.
pub fn keygen<R: RngCore + ?Sized>(
    protocol: ProtocolId,
    setting: &Setting,
    cfg: &ProtocolConfig,
    identity: &[u8],
    rng: &mut R,
) -> Result<(ProverKey, VerifierKey), ProtocolError> {
    cfg.validate(protocol)?;
    let prover = match (protocol, setting) {
        (ProtocolId::Qr, Setting::Rsa(m)) => {
            let x = random_coprime(&m.n, rng);
            ProverKey::Qr(QrProverKey::from_parts(m.n.clone(), x)?)
        }
        (ProtocolId::Fs, Setting::Rsa(m)) => {
            let secrets = (0..cfg.fs_secrets)
                .map(|_| random_coprime(&m.n, rng))
                .collect();
            ProverKey::Fs(FsProverKey::from_parts(
                m.n.clone(),
                secrets,
                identity.to_vec(),
            )?)
        }
        (ProtocolId::Gq, Setting::Rsa(m)) => {
            ProverKey::Gq(gq_keygen(m, &cfg.gq_exponent, identity)?)
        }
        (ProtocolId::Schnorr, Setting::Schnorr(group)) => {
            if !group.validate() {
                return Err(ProtocolError::InvalidSetting(
                    "Schnorr group fails validation".into(),
                ));
            }
            let x = rand_below(&(&group.q - BigUint::one()), rng) + BigUint::one();
            ProverKey::Schnorr(SchnorrProverKey::from_parts(group.clone(), x))
        }
        (ProtocolId::EcSqrt, Setting::EcRing { p, q, a }) => {
            ProverKey::EcSqrt(ec_sqrt_keygen(p, q, a, rng)?)
        }
        (ProtocolId::EcDlog, Setting::EcGroup { curve, base, base_order }) => {
            validate_generator(curve, base, base_order)?;
            let mut scratch = MulCounter::new();
            let secret = rand_below(&(base_order - BigUint::one()), rng) + BigUint::one();
            let b_point = scalar_mul(&secret, base, curve, &mut scratch)?;
            ProverKey::EcDlog(EcDlogProverKey {
                curve: curve.clone(),
                base: base.clone(),
                base_order: base_order.clone(),
                b_point,
                secret,
            })
        }
        (ProtocolId::EcSchnorr2g, Setting::EcTwoGen { curve, p1, p2, order }) => {
            validate_generator(curve, p1, order)?;
            validate_generator(curve, p2, order)?;
            if !is_probable_prime(order, DEFAULT_PRIMALITY_ROUNDS) {
                return Err(ProtocolError::InvalidSetting(
                    "generator order must be prime".into(),
                ));
            }
            let mut scratch = MulCounter::new();
            let span = order - BigUint::one();
            let d1 = rand_below(&span, rng) + BigUint::one();
            let d2 = rand_below(&span, rng) + BigUint::one();
            let q1 = point_neg(&scalar_mul(&d1, p1, curve, &mut scratch)?, curve);
            let q2 = point_neg(&scalar_mul(&d2, p2, curve, &mut scratch)?, curve);
            let v_point = point_add(&q1, &q2, curve, &mut scratch)?;
            ProverKey::EcSchnorr2g(Ec2gProverKey {
                curve: curve.clone(),
                p1: p1.clone(),
                p2: p2.clone(),
                order: order.clone(),
                d1,
                d2,
                v_point,
            })
        }
        _ => {
            return Err(ProtocolError::InvalidSetting(format!(
                "setting kind does not fit protocol {protocol}"
            )))
        }
    };
    let verifier = prover.verifier_key();
    Ok((prover, verifier))
}

fn random_coprime<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> BigUint {
    loop {
        let x = rand_below(n, rng);
        if x > BigUint::one() && x.gcd(n) == BigUint::one() {
            return x;
        }
    }
}

fn validate_generator(
    curve: &CurveParams,
    base: &Point,
    order: &BigUint,
) -> Result<(), ProtocolError> {
    if base.is_infinity() || !on_curve(base, curve) {
        return Err(ProtocolError::InvalidSetting(
            "base point must be a finite point on the curve".into(),
        ));
    }
    if *order < BigUint::from(2u32) {
        return Err(ProtocolError::InvalidSetting(
            "generator order too small".into(),
        ));
    }
    let mut scratch = MulCounter::new();
    if !scalar_mul(order, base, curve, &mut scratch)?.is_infinity() {
        return Err(ProtocolError::InvalidSetting(
            "stated order does not annihilate the base point".into(),
        ));
    }
    Ok(())
}

fn gq_keygen(
    modulus: &RsaModulus,
    v: &BigUint,
    identity: &[u8],
) -> Result<GqProverKey, ProtocolError> {
    if !is_probable_prime(v, DEFAULT_PRIMALITY_ROUNDS) {
        return Err(ProtocolError::InvalidSetting("GQ exponent must be prime".into()));
    }
    let one = BigUint::one();
    let lambda = (&modulus.p - &one) * (&modulus.q - &one);
    if v.gcd(&lambda) != one {
        return Err(ProtocolError::InvalidSetting(
            "GQ exponent shares a factor with the group order".into(),
        ));
    }
    let j = BigUint::from_bytes_be(identity) % &modulus.n;
    if j.is_zero() || j.gcd(&modulus.n) != one {
        return Err(ProtocolError::InvalidSetting(
            "identity maps to a non-invertible value".into(),
        ));
    }
    // J · s^v ≡ 1: s = (J^-1)^(v^-1 mod λ)
    let d = mod_inv(v, &lambda)?;
    let j_inv = mod_inv(&j, &modulus.n)?;
    let mut scratch = MulCounter::new();
    let s = mod_exp(&j_inv, &d, &modulus.n, &mut scratch);
    debug_assert_eq!(
        (&j * mod_exp(&s, v, &modulus.n, &mut scratch)) % &modulus.n,
        one
    );
    Ok(GqProverKey {
        n: modulus.n.clone(),
        v: v.clone(),
        j,
        s,
        identity: identity.to_vec(),
    })
}

fn ec_sqrt_keygen<R: RngCore + ?Sized>(
    p: &BigUint,
    q: &BigUint,
    a: &BigUint,
    rng: &mut R,
) -> Result<EcSqrtProverKey, ProtocolError> {
    let five = BigUint::from(5u32);
    if p == q
        || *p < five
        || *q < five
        || !is_probable_prime(p, DEFAULT_PRIMALITY_ROUNDS)
        || !is_probable_prime(q, DEFAULT_PRIMALITY_ROUNDS)
    {
        return Err(ProtocolError::InvalidSetting(
            "ring modulus needs two distinct primes ≥ 5".into(),
        ));
    }
    let n = p * q;
    let mut scratch = MulCounter::new();
    loop {
        // pick the secret point first and solve for b so it lies on the curve
        let x = rand_below(&n, rng);
        let y = rand_below(&n, rng);
        let b = ((&y * &y) + (&n * 2u32) - ((&x * &x * &x + a * &x) % &n)) % &n;
        if ecc::discriminant_term(a, &b, &n).gcd(&n) != BigUint::one() {
            continue;
        }
        let curve = CurveParams::ring(n.clone(), a.clone(), b)?;
        let a_point = Point::Affine { x, y };
        match point_add(&a_point, &a_point, &curve, &mut scratch) {
            Ok(b_point) if !b_point.is_infinity() => {
                return Ok(EcSqrtProverKey {
                    curve,
                    b_point,
                    a_point,
                    factors: (p.clone(), q.clone()),
                });
            }
            Ok(_) | Err(EcError::RingInversionFailure { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

// ---------------------------------------------------------------------------
// Session state machine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    ProverReady,
    ProverAwaitChallenge,
    VerifierAwaitCommit,
    VerifierReadyToChallenge,
    VerifierAwaitResponse,
}

#[derive(Debug, Clone)]
enum SessionKeys {
    Prover(ProverKey),
    Verifier(VerifierKey),
}

/// One party's protocol state.
///
/// Operations enforce the commit → challenge → respond → check order and
/// erase the per-round commitment randomness as soon as the response is
/// produced.
#[derive(Debug)]
pub struct SessionState {
    protocol: ProtocolId,
    role: Role,
    cfg: ProtocolConfig,
    phase: Phase,
    keys: SessionKeys,
    rounds_completed: u32,
    accepted_rounds: u32,
    commitment_secret: Option<CommitSecret>,
    last_commitment: Option<Body>,
    last_challenge: Option<BigUint>,
    counter: MulCounter,
    precompute_counter: MulCounter,
    precomputed: VecDeque<(CommitSecret, Body)>,
    peak_state_bytes: u64,
}

impl SessionState {
    pub fn new_prover(key: ProverKey, cfg: ProtocolConfig) -> Result<Self, ProtocolError> {
        let protocol = key.protocol();
        cfg.validate(protocol)?;
        check_cfg_against_keys(&cfg, &key)?;
        Ok(SessionState {
            protocol,
            role: Role::Prover,
            cfg,
            phase: Phase::ProverReady,
            keys: SessionKeys::Prover(key),
            rounds_completed: 0,
            accepted_rounds: 0,
            commitment_secret: None,
            last_commitment: None,
            last_challenge: None,
            counter: MulCounter::new(),
            precompute_counter: MulCounter::new(),
            precomputed: VecDeque::new(),
            peak_state_bytes: 0,
        })
    }

    pub fn new_verifier(key: VerifierKey, cfg: ProtocolConfig) -> Result<Self, ProtocolError> {
        let protocol = key.protocol();
        cfg.validate(protocol)?;
        Ok(SessionState {
            protocol,
            role: Role::Verifier,
            cfg,
            phase: Phase::VerifierAwaitCommit,
            keys: SessionKeys::Verifier(key),
            rounds_completed: 0,
            accepted_rounds: 0,
            commitment_secret: None,
            last_commitment: None,
            last_challenge: None,
            counter: MulCounter::new(),
            precompute_counter: MulCounter::new(),
            precomputed: VecDeque::new(),
            peak_state_bytes: 0,
        })
    }

    pub fn protocol(&self) -> ProtocolId {
        self.protocol
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn rounds_completed(&self) -> u32 {
        self.rounds_completed
    }

    pub fn accepted_rounds(&self) -> u32 {
        self.accepted_rounds
    }

    /// Online modular multiplications performed so far.
    pub fn mul_count(&self) -> u64 {
        self.counter.get()
    }

    /// Multiplications spent preparing commitments ahead of time.
    pub fn precompute_mul_count(&self) -> u64 {
        self.precompute_counter.get()
    }

    pub fn reset_counters(&mut self) {
        self.counter.reset();
        self.precompute_counter.reset();
    }

    /// True while per-round commitment randomness is held.
    pub fn has_pending_commitment(&self) -> bool {
        self.commitment_secret.is_some()
    }

    pub fn peak_state_bytes(&self) -> u64 {
        self.peak_state_bytes
    }

    fn prover_key(&self) -> &ProverKey {
        match &self.keys {
            SessionKeys::Prover(k) => k,
            SessionKeys::Verifier(_) => unreachable!("checked by role guard"),
        }
    }

    fn verifier_key(&self) -> &VerifierKey {
        match &self.keys {
            SessionKeys::Verifier(k) => k,
            SessionKeys::Prover(_) => unreachable!("checked by role guard"),
        }
    }

    /// The public key this session argues about, regardless of role.
    pub fn public_key(&self) -> VerifierKey {
        match &self.keys {
            SessionKeys::Prover(k) => k.verifier_key(),
            SessionKeys::Verifier(k) => k.clone(),
        }
    }

    fn require(&self, role: Role, phase: Phase, what: &'static str) -> Result<(), ProtocolError> {
        if self.role != role || self.phase != phase {
            return Err(ProtocolError::StateOrderViolation(what));
        }
        Ok(())
    }

    /// Draws and caches commitments for every round before the run starts.
    /// Their cost lands on the precompute counter, mirroring a card doing
    /// its exponentiations offline.
    pub fn precompute_commitments<R: RngCore + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<(), ProtocolError> {
        self.require(Role::Prover, Phase::ProverReady, "precompute before the run starts")?;
        if self.rounds_completed != 0 || !self.precomputed.is_empty() {
            return Err(ProtocolError::StateOrderViolation(
                "precompute must happen exactly once, before round 1",
            ));
        }
        let SessionKeys::Prover(key) = &self.keys else {
            unreachable!("checked by role guard");
        };
        let mut state_bytes = 0u64;
        for _ in 0..self.cfg.rounds {
            let (secret, commitment) =
                steps::compute_commitment(key, rng, &mut self.precompute_counter)?;
            state_bytes += secret_len(&secret, key) + body_len(&commitment, key);
            self.precomputed.push_back((secret, commitment));
        }
        self.peak_state_bytes = self.peak_state_bytes.max(state_bytes);
        Ok(())
    }

    /// Prover step 1: draw fresh randomness, emit the commitment frame.
    pub fn prover_commit<R: RngCore + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<Frame, ProtocolError> {
        self.require(Role::Prover, Phase::ProverReady, "commit expects a fresh round")?;
        let SessionKeys::Prover(key) = &self.keys else {
            unreachable!("checked by role guard");
        };
        let (secret, commitment) = match self.precomputed.pop_front() {
            Some(pair) => pair,
            None => steps::compute_commitment(key, rng, &mut self.counter)?,
        };
        let state = secret_len(&secret, key) + body_len(&commitment, key);
        self.peak_state_bytes = self.peak_state_bytes.max(state);
        let frame = steps::commitment_frame(key, &commitment);
        self.commitment_secret = Some(secret);
        self.last_commitment = Some(commitment);
        self.phase = Phase::ProverAwaitChallenge;
        Ok(frame)
    }

    /// Verifier step 1: take in the prover's commitment.
    pub fn verifier_absorb_commitment(&mut self, frame: &Frame) -> Result<(), ProtocolError> {
        self.require(
            Role::Verifier,
            Phase::VerifierAwaitCommit,
            "absorb expects a commitment frame",
        )?;
        if frame.protocol != self.protocol || frame.msg_type != MsgType::Commit {
            return Err(ProtocolError::MalformedFrame(
                "expected a commitment frame for this protocol".into(),
            ));
        }
        let body = steps::parse_commitment(self.verifier_key(), &frame.payload)?;
        self.last_commitment = Some(body);
        self.phase = Phase::VerifierReadyToChallenge;
        Ok(())
    }

    /// Verifier step 2: draw and emit the challenge.
    pub fn verifier_challenge<R: RngCore + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<Frame, ProtocolError> {
        self.require(
            Role::Verifier,
            Phase::VerifierReadyToChallenge,
            "challenge requires an absorbed commitment",
        )?;
        let space = self.verifier_key().challenge_space(&self.cfg);
        let challenge = rand_below(&space, rng);
        let frame = Frame::new(self.protocol, MsgType::Challenge, encode_int(&challenge));
        self.last_challenge = Some(challenge);
        self.phase = Phase::VerifierAwaitResponse;
        Ok(frame)
    }

    /// Prover step 2: answer the challenge and erase the round randomness.
    pub fn prover_respond(&mut self, challenge: &Frame) -> Result<Frame, ProtocolError> {
        self.require(
            Role::Prover,
            Phase::ProverAwaitChallenge,
            "respond requires a sent commitment",
        )?;
        if challenge.protocol != self.protocol || challenge.msg_type != MsgType::Challenge {
            return Err(ProtocolError::MalformedFrame(
                "expected a challenge frame for this protocol".into(),
            ));
        }
        let c = decode_int(&challenge.payload)
            .map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
        let space = self.prover_key().verifier_key().challenge_space(&self.cfg);
        if c >= space {
            return Err(ProtocolError::ChallengeOutOfRange);
        }
        let secret = self
            .commitment_secret
            .take()
            .expect("phase guard guarantees a pending commitment");
        let SessionKeys::Prover(key) = &self.keys else {
            unreachable!("checked by role guard");
        };
        let response = steps::compute_response(key, &secret, &c, &mut self.counter)?;
        let frame = steps::response_frame(key, &response);
        self.last_challenge = Some(c);
        self.phase = Phase::ProverReady;
        self.rounds_completed += 1;
        Ok(frame)
    }

    /// Verifier step 3: check the response against the round's commitment
    /// and challenge.
    pub fn verifier_check(&mut self, response: &Frame) -> Result<bool, ProtocolError> {
        self.require(
            Role::Verifier,
            Phase::VerifierAwaitResponse,
            "check requires an issued challenge",
        )?;
        if response.protocol != self.protocol || response.msg_type != MsgType::Response {
            return Err(ProtocolError::MalformedFrame(
                "expected a response frame for this protocol".into(),
            ));
        }
        let body = steps::parse_response(self.verifier_key(), &response.payload)?;
        let commitment = self
            .last_commitment
            .take()
            .expect("phase guard guarantees a commitment");
        let challenge = self
            .last_challenge
            .take()
            .expect("phase guard guarantees a challenge");
        let SessionKeys::Verifier(key) = &self.keys else {
            unreachable!("checked by role guard");
        };
        let ok = steps::verify_response(key, &commitment, &challenge, &body, &mut self.counter)?;
        if ok {
            self.accepted_rounds += 1;
        }
        self.rounds_completed += 1;
        self.phase = Phase::VerifierAwaitCommit;
        Ok(ok)
    }
}

fn check_cfg_against_keys(cfg: &ProtocolConfig, key: &ProverKey) -> Result<(), ProtocolError> {
    match key {
        ProverKey::Fs(k) if k.secrets.len() != cfg.fs_secrets as usize => {
            Err(ProtocolError::InvalidSetting(format!(
                "config says {} FS secrets, key has {}",
                cfg.fs_secrets,
                k.secrets.len()
            )))
        }
        ProverKey::Gq(k) if k.v != cfg.gq_exponent => Err(ProtocolError::InvalidSetting(
            "config GQ exponent differs from the key's".into(),
        )),
        _ => Ok(()),
    }
}

fn body_len(body: &Body, key: &ProverKey) -> u64 {
    match body {
        Body::Int(x) => encode_int(x).len() as u64,
        Body::Point(p) => point_len(p, key),
        Body::IntPair(a, b) => (encode_int(a).len() + encode_int(b).len()) as u64,
    }
}

fn secret_len(secret: &CommitSecret, key: &ProverKey) -> u64 {
    match secret {
        CommitSecret::Scalar(r) => encode_int(r).len() as u64,
        CommitSecret::RingPair { r, m } => point_len(r, key) + point_len(m, key),
        CommitSecret::ScalarPair(a, b) => (encode_int(a).len() + encode_int(b).len()) as u64,
    }
}

fn point_len(p: &Point, key: &ProverKey) -> u64 {
    let curve = match key {
        ProverKey::EcSqrt(k) => &k.curve,
        ProverKey::EcDlog(k) => &k.curve,
        ProverKey::EcSchnorr2g(k) => &k.curve,
        _ => unreachable!("point bodies only occur in EC protocols"),
    };
    ecc::encode_point(p, curve).len() as u64
}

// ---------------------------------------------------------------------------
// Transcripts and the run loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TranscriptEntry {
    /// 1-based round number; 0 for the params frame, the final round count
    /// for the verdict frame.
    pub round: u32,
    pub direction: Direction,
    pub frame: Frame,
}

/// Ordered record of one protocol run.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub protocol: ProtocolId,
    pub entries: Vec<TranscriptEntry>,
    pub verdict: Verdict,
    /// Round at which the verifier rejected, if it did.
    pub rejected_at: Option<u32>,
    pub metrics: Metrics,
}

/// Payload of the run-opening params frame: rounds, challenge bits,
/// identity string.
pub fn params_frame(protocol: ProtocolId, cfg: &ProtocolConfig, identity: &[u8]) -> Frame {
    let mut payload = Vec::new();
    put_int(&mut payload, &BigUint::from(cfg.rounds));
    put_int(&mut payload, &BigUint::from(cfg.challenge_bits));
    put_bytes(&mut payload, identity);
    Frame::new(protocol, MsgType::Params, payload)
}

/// Inverse of [`params_frame`]: `(rounds, challenge_bits, identity)`.
pub fn parse_params(frame: &Frame) -> Result<(u32, u32, Vec<u8>), ProtocolError> {
    let mut r = PayloadReader::new(&frame.payload);
    let rounds = r.read_int().map_err(wire_to_malformed)?;
    let bits = r.read_int().map_err(wire_to_malformed)?;
    let identity = r.read_bytes().map_err(wire_to_malformed)?.to_vec();
    r.finish().map_err(wire_to_malformed)?;
    use num_traits::ToPrimitive;
    Ok((
        rounds
            .to_u32()
            .ok_or_else(|| ProtocolError::MalformedFrame("round count too large".into()))?,
        bits.to_u32()
            .ok_or_else(|| ProtocolError::MalformedFrame("challenge bits too large".into()))?,
        identity,
    ))
}

fn wire_to_malformed(e: WireError) -> ProtocolError {
    ProtocolError::MalformedFrame(e.to_string())
}

pub(crate) fn params_frame_for_public(publics: &VerifierKey, cfg: &ProtocolConfig) -> Frame {
    params_frame(publics.protocol(), cfg, publics.identity())
}

pub fn verdict_frame(protocol: ProtocolId, verdict: Verdict) -> Frame {
    Frame::new(
        protocol,
        MsgType::Verdict,
        vec![if verdict.is_accept() { 0x01 } else { 0x00 }],
    )
}

/// Executes a full run: params frame, `t` rounds, verdict frame. The
/// verifier accepts iff every round checks out; a failing round rejects
/// immediately.
pub fn run_rounds<R: RngCore + ?Sized>(
    prover: &mut SessionState,
    verifier: &mut SessionState,
    channel: &mut MeteredChannel,
    rng: &mut R,
) -> Result<Transcript, ProtocolError> {
    if prover.role != Role::Prover || verifier.role != Role::Verifier {
        return Err(ProtocolError::SessionMismatch);
    }
    if prover.protocol != verifier.protocol
        || prover.cfg.rounds != verifier.cfg.rounds
        || prover.cfg.challenge_bits != verifier.cfg.challenge_bits
        || prover.prover_key().verifier_key() != *verifier.verifier_key()
    {
        return Err(ProtocolError::SessionMismatch);
    }

    let started = Instant::now();
    let protocol = prover.protocol;
    let rounds = prover.cfg.rounds;
    let mut entries = Vec::with_capacity(3 * rounds as usize + 2);

    let push = |channel: &mut MeteredChannel,
                    entries: &mut Vec<TranscriptEntry>,
                    round: u32,
                    direction: Direction,
                    frame: Frame|
     -> Result<Frame, ProtocolError> {
        channel.send(direction, frame.clone())?;
        entries.push(TranscriptEntry {
            round,
            direction,
            frame,
        });
        Ok(channel.recv(direction)?)
    };

    // params: prover announces run shape and identity
    let params = params_frame(protocol, &prover.cfg, prover.prover_key().verifier_key().identity());
    let received = push(channel, &mut entries, 0, Direction::AToB, params)?;
    let (t, bits, identity) = parse_params(&received)?;
    if t != verifier.cfg.rounds
        || bits != verifier.cfg.challenge_bits
        || identity != verifier.verifier_key().identity()
    {
        return Err(ProtocolError::SessionMismatch);
    }

    let mut verdict = Verdict::Accept;
    let mut rejected_at = None;
    for round in 1..=rounds {
        let commit = prover.prover_commit(rng)?;
        let commit = push(channel, &mut entries, round, Direction::AToB, commit)?;
        verifier.verifier_absorb_commitment(&commit)?;

        let challenge = verifier.verifier_challenge(rng)?;
        let challenge = push(channel, &mut entries, round, Direction::BToA, challenge)?;

        let response = prover.prover_respond(&challenge)?;
        let response = push(channel, &mut entries, round, Direction::AToB, response)?;

        if !verifier.verifier_check(&response)? {
            verdict = Verdict::Reject;
            rejected_at = Some(round);
            break;
        }
    }

    let final_round = verifier.rounds_completed;
    let vf = verdict_frame(protocol, verdict);
    let vf = push(channel, &mut entries, final_round, Direction::BToA, vf)?;
    if vf.payload != [if verdict.is_accept() { 0x01 } else { 0x00 }] {
        return Err(ProtocolError::MalformedFrame("verdict frame mismatch".into()));
    }

    let max_frame = entries
        .iter()
        .map(|e| e.frame.encoded_len() as u64)
        .max()
        .unwrap_or(0);
    let metrics = Metrics {
        bandwidth_bits: 8 * channel.total_bytes(),
        prover_modmuls: prover.counter.get(),
        memory_bytes: prover.prover_key().wire_len() + max_frame + prover.peak_state_bytes,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(Transcript {
        protocol,
        entries,
        verdict,
        rejected_at,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::attack::{count_consistent_dlog_secrets, doubles_to_public, ec_sqrt_attack};
    use num_traits::ToPrimitive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn curve17() -> CurveParams {
        CurveParams::field(big(17), big(2), big(2)).unwrap()
    }

    fn ec_dlog_key_17(secret: u64) -> ProverKey {
        let curve = curve17();
        let base = Point::affine(5u64, 1u64);
        let mut scratch = MulCounter::new();
        let b_point = scalar_mul(&big(secret), &base, &curve, &mut scratch).unwrap();
        ProverKey::EcDlog(EcDlogProverKey {
            curve,
            base,
            base_order: big(19),
            b_point,
            secret: big(secret),
        })
    }

    fn small_spec() -> SettingSpec {
        SettingSpec {
            modulus_bits: 48,
            subgroup_bits: 16,
            ec_field_bits: 10,
            ring_factor_bits: 8,
        }
    }

    fn keypair_for(protocol: ProtocolId, seed: u64) -> (ProverKey, VerifierKey, ProtocolConfig) {
        let mut r = rng(seed);
        let cfg = ProtocolConfig::new(protocol, 8);
        for _ in 0..16 {
            let setting = generate_setting(protocol, &small_spec(), &mut r).unwrap();
            if let Ok((pk, vk)) = keygen(protocol, &setting, &cfg, b"id-A", &mut r) {
                return (pk, vk, cfg);
            }
        }
        panic!("no compatible setting drawn for {protocol}");
    }

    #[test]
    fn protocol_wire_bytes_are_fixed() {
        assert_eq!(ProtocolId::Qr.wire_byte(), 0x01);
        assert_eq!(ProtocolId::Fs.wire_byte(), 0x02);
        assert_eq!(ProtocolId::Gq.wire_byte(), 0x03);
        assert_eq!(ProtocolId::Schnorr.wire_byte(), 0x04);
        assert_eq!(ProtocolId::EcSqrt.wire_byte(), 0x11);
        assert_eq!(ProtocolId::EcDlog.wire_byte(), 0x12);
        assert_eq!(ProtocolId::EcSchnorr2g.wire_byte(), 0x13);
        for p in ProtocolId::ALL {
            assert_eq!(ProtocolId::from_wire_byte(p.wire_byte()), Some(p));
            assert_eq!(p.name().parse::<ProtocolId>().unwrap(), p);
        }
    }

    #[test]
    fn qr_keygen_worked_example() {
        // n = 77, x = 9: b = 81 mod 77 = 4
        let key = QrProverKey::from_parts(big(77), big(9)).unwrap();
        assert_eq!(key.b, big(4));
        ProverKey::Qr(key).validate().unwrap();
    }

    #[test]
    fn schnorr_keygen_worked_example() {
        // (p, q, g) = (23, 11, 2), x = 7: b = 2^7 mod 23 = 13
        let group = SchnorrGroup {
            p: big(23),
            q: big(11),
            g: big(2),
        };
        let key = SchnorrProverKey::from_parts(group, big(7));
        assert_eq!(key.b, big(13));
        ProverKey::Schnorr(key).validate().unwrap();
    }

    #[test]
    fn qr_round_worked_example() {
        // r = 2: commitment 4; c = 1: response 2·9 = 18; 18² ≡ 16 ≡ s·b
        let key = ProverKey::Qr(QrProverKey::from_parts(big(77), big(9)).unwrap());
        let (commitment, response) = honest_round_with_coin(&key, &big(2), &big(1)).unwrap();
        assert_eq!(commitment, Body::Int(big(4)));
        assert_eq!(response, Body::Int(big(18)));
        let mut ctr = MulCounter::new();
        assert!(steps::verify_response(&key.verifier_key(), &commitment, &big(1), &response, &mut ctr).unwrap());
        // c = 0 branch answers r itself
        let (c0, r0) = honest_round_with_coin(&key, &big(2), &big(0)).unwrap();
        assert_eq!(r0, Body::Int(big(2)));
        assert!(steps::verify_response(&key.verifier_key(), &c0, &big(0), &r0, &mut ctr).unwrap());
    }

    #[test]
    fn schnorr_round_worked_example() {
        // r = 3: h = 8; e = 1: y = 3 + 7 = 10; g^10 ≡ 12 ≡ h·b mod 23
        let group = SchnorrGroup { p: big(23), q: big(11), g: big(2) };
        let key = ProverKey::Schnorr(SchnorrProverKey::from_parts(group, big(7)));
        let (commitment, response) = honest_round_with_coin(&key, &big(3), &big(1)).unwrap();
        assert_eq!(commitment, Body::Int(big(8)));
        assert_eq!(response, Body::Int(big(10)));
        let mut ctr = MulCounter::new();
        assert!(steps::verify_response(&key.verifier_key(), &commitment, &big(1), &response, &mut ctr).unwrap());
    }

    #[test]
    fn fs_round_worked_example() {
        // n = 77, secrets (3, 5, 9), r = 2, e = (1, 0, 1): y = 2·3·9 = 54
        // 54² ≡ 67 ≡ T·v1·v3 = 4·9·4 mod 77
        let key = ProverKey::Fs(
            FsProverKey::from_parts(big(77), vec![big(3), big(5), big(9)], b"ia".to_vec()).unwrap(),
        );
        let e = big(0b101);
        let (commitment, response) = honest_round_with_coin(&key, &big(2), &e).unwrap();
        assert_eq!(commitment, Body::Int(big(4)));
        assert_eq!(response, Body::Int(big(54)));
        let mut ctr = MulCounter::new();
        assert!(steps::verify_response(&key.verifier_key(), &commitment, &e, &response, &mut ctr).unwrap());
    }

    #[test]
    fn ec_dlog_round_worked_example() {
        // G = (5,1) on the F_17 curve, r = 2: commitment 2G = (6,3)
        let key = ec_dlog_key_17(7);
        let (commitment, response) = honest_round_with_coin(&key, &big(2), &big(1)).unwrap();
        assert_eq!(commitment, Body::Point(Point::affine(6u64, 3u64)));
        // x = r + m mod 19 = 9
        assert_eq!(response, Body::Int(big(9)));
        let mut ctr = MulCounter::new();
        assert!(steps::verify_response(&key.verifier_key(), &commitment, &big(1), &response, &mut ctr).unwrap());
    }

    #[test]
    fn gq_key_equation_holds() {
        let modulus = gen_rsa_modulus(48, &mut rng(3));
        let cfg = ProtocolConfig {
            gq_exponent: big(7),
            ..ProtocolConfig::new(ProtocolId::Gq, 4)
        };
        let (pk, vk) = keygen(ProtocolId::Gq, &Setting::Rsa(modulus), &cfg, b"alice", &mut rng(4)).unwrap();
        pk.validate().unwrap();
        // GQ challenges come from [0, v)
        assert_eq!(vk.challenge_space(&cfg), big(7));
    }

    #[test]
    fn gq_rejects_composite_exponent() {
        let cfg = ProtocolConfig {
            gq_exponent: big(4),
            ..ProtocolConfig::new(ProtocolId::Gq, 4)
        };
        assert!(matches!(
            cfg.validate(ProtocolId::Gq),
            Err(ProtocolError::InvalidSetting(_))
        ));
    }

    #[test]
    fn ec2g_zero_randomness_identity() {
        // with r1 = r2 = 0 and e = 1: W = d1·P1 + d2·P2 + V = O
        let (pk, _, _) = keypair_for(ProtocolId::EcSchnorr2g, 21);
        let ProverKey::EcSchnorr2g(k) = &pk else { unreachable!() };
        let mut ctr = MulCounter::new();
        let w = point_add(
            &point_add(
                &scalar_mul(&k.d1, &k.p1, &k.curve, &mut ctr).unwrap(),
                &scalar_mul(&k.d2, &k.p2, &k.curve, &mut ctr).unwrap(),
                &k.curve,
                &mut ctr,
            )
            .unwrap(),
            &k.v_point,
            &k.curve,
            &mut ctr,
        )
        .unwrap();
        assert_eq!(w, Point::Infinity);
    }

    #[test]
    fn challenge_ranges() {
        let mut r = rng(5);
        for (protocol, bits) in [(ProtocolId::Qr, 1u32), (ProtocolId::EcDlog, 1)] {
            let (pk, vk, _) = keypair_for(protocol, 100 + bits as u64);
            let cfg = ProtocolConfig::new(protocol, 4);
            let mut verifier = SessionState::new_verifier(vk, cfg.clone()).unwrap();
            let mut prover = SessionState::new_prover(pk, cfg).unwrap();
            for _ in 0..16 {
                let commit = prover.prover_commit(&mut r).unwrap();
                verifier.verifier_absorb_commitment(&commit).unwrap();
                let ch = verifier.verifier_challenge(&mut r).unwrap();
                let c = decode_int(&ch.payload).unwrap();
                assert!(c < big(2));
                let resp = prover.prover_respond(&ch).unwrap();
                verifier.verifier_check(&resp).unwrap();
            }
        }
        // wide challenges stay below 2^20
        let (pk, vk, _) = keypair_for(ProtocolId::EcSchnorr2g, 7);
        let cfg = ProtocolConfig::new(ProtocolId::EcSchnorr2g, 64);
        assert_eq!(cfg.challenge_bits, 20);
        let mut verifier = SessionState::new_verifier(vk, cfg.clone()).unwrap();
        let mut prover = SessionState::new_prover(pk, cfg).unwrap();
        for _ in 0..64 {
            let commit = prover.prover_commit(&mut r).unwrap();
            verifier.verifier_absorb_commitment(&commit).unwrap();
            let ch = verifier.verifier_challenge(&mut r).unwrap();
            assert!(decode_int(&ch.payload).unwrap() < (big(1) << 20));
            let resp = prover.prover_respond(&ch).unwrap();
            assert!(verifier.verifier_check(&resp).unwrap());
        }
    }

    #[test]
    fn state_machine_order_is_enforced() {
        let (pk, vk, cfg) = keypair_for(ProtocolId::Qr, 11);
        let mut r = rng(1);
        let mut prover = SessionState::new_prover(pk, cfg.clone()).unwrap();
        let mut verifier = SessionState::new_verifier(vk, cfg).unwrap();

        // respond before commit
        let bogus = Frame::new(ProtocolId::Qr, MsgType::Challenge, encode_int(&big(0)));
        assert!(matches!(
            prover.prover_respond(&bogus),
            Err(ProtocolError::StateOrderViolation(_))
        ));
        // challenge before a commitment arrives
        assert!(matches!(
            verifier.verifier_challenge(&mut r),
            Err(ProtocolError::StateOrderViolation(_))
        ));
        // double commit
        let c1 = prover.prover_commit(&mut r).unwrap();
        assert!(prover.has_pending_commitment());
        assert!(matches!(
            prover.prover_commit(&mut r),
            Err(ProtocolError::StateOrderViolation(_))
        ));
        verifier.verifier_absorb_commitment(&c1).unwrap();
        assert!(matches!(
            verifier.verifier_absorb_commitment(&c1),
            Err(ProtocolError::StateOrderViolation(_))
        ));
        let ch = verifier.verifier_challenge(&mut r).unwrap();
        // commitment randomness is erased by responding
        let resp = prover.prover_respond(&ch).unwrap();
        assert!(!prover.has_pending_commitment());
        assert!(verifier.verifier_check(&resp).unwrap());
        assert!(matches!(
            verifier.verifier_check(&resp),
            Err(ProtocolError::StateOrderViolation(_))
        ));
        // challenge out of range
        let c2 = prover.prover_commit(&mut r).unwrap();
        let _ = c2;
        let too_big = Frame::new(ProtocolId::Qr, MsgType::Challenge, encode_int(&big(2)));
        assert!(matches!(
            prover.prover_respond(&too_big),
            Err(ProtocolError::ChallengeOutOfRange)
        ));
    }

    #[test]
    fn honest_runs_accept_for_every_protocol() {
        for (i, protocol) in ProtocolId::ALL.into_iter().enumerate() {
            let (pk, vk, _) = keypair_for(protocol, 200 + i as u64);
            let cfg = ProtocolConfig::new(protocol, 12);
            let mut r = rng(300 + i as u64);
            let mut prover = SessionState::new_prover(pk, cfg.clone()).unwrap();
            let mut verifier = SessionState::new_verifier(vk, cfg.clone()).unwrap();
            let mut channel = MeteredChannel::new();
            let t = run_rounds(&mut prover, &mut verifier, &mut channel, &mut r).unwrap();
            assert_eq!(t.verdict, Verdict::Accept, "{protocol}");
            assert_eq!(t.rejected_at, None);
            // params + 3 per round + verdict
            assert_eq!(t.entries.len(), 3 * cfg.rounds as usize + 2, "{protocol}");
            assert!(t.metrics.bandwidth_bits > 0);
        }
    }

    #[test]
    fn zero_round_run_accepts_vacuously() {
        let (pk, vk, _) = keypair_for(ProtocolId::Schnorr, 17);
        let cfg = ProtocolConfig::new(ProtocolId::Schnorr, 0);
        let mut r = rng(2);
        let mut prover = SessionState::new_prover(pk, cfg.clone()).unwrap();
        let mut verifier = SessionState::new_verifier(vk, cfg).unwrap();
        let mut channel = MeteredChannel::new();
        let t = run_rounds(&mut prover, &mut verifier, &mut channel, &mut r).unwrap();
        assert_eq!(t.verdict, Verdict::Accept);
        assert_eq!(t.entries.len(), 2);
    }

    #[test]
    fn corrupted_response_rejects_in_round_one() {
        let (pk, vk, cfg) = keypair_for(ProtocolId::Qr, 23);
        let mut r = rng(9);
        let mut prover = SessionState::new_prover(pk, cfg.clone()).unwrap();
        let mut verifier = SessionState::new_verifier(vk.clone(), cfg).unwrap();
        let commit = prover.prover_commit(&mut r).unwrap();
        verifier.verifier_absorb_commitment(&commit).unwrap();
        let ch = verifier.verifier_challenge(&mut r).unwrap();
        let resp = prover.prover_respond(&ch).unwrap();
        // flip the response value
        let VerifierKey::Qr(qk) = &vk else { unreachable!() };
        let honest = decode_int(&resp.payload).unwrap();
        let corrupted = Frame::new(
            ProtocolId::Qr,
            MsgType::Response,
            encode_int(&((honest + big(1)) % &qk.n)),
        );
        assert!(!verifier.verifier_check(&corrupted).unwrap());
        assert_eq!(verifier.accepted_rounds(), 0);
    }

    #[test]
    fn mismatched_public_key_rejects() {
        let (pk, _, cfg) = keypair_for(ProtocolId::Schnorr, 31);
        let (_, vk2, _) = keypair_for(ProtocolId::Schnorr, 32);
        let mut prover = SessionState::new_prover(pk, cfg.clone()).unwrap();
        let mut verifier = SessionState::new_verifier(vk2, cfg).unwrap();
        let mut channel = MeteredChannel::new();
        assert!(matches!(
            run_rounds(&mut prover, &mut verifier, &mut channel, &mut rng(1)),
            Err(ProtocolError::SessionMismatch)
        ));
    }

    #[test]
    fn ec2g_w_equals_q_exactly_for_honest_rounds() {
        let (pk, vk, _) = keypair_for(ProtocolId::EcSchnorr2g, 41);
        let ProverKey::EcSchnorr2g(k) = pk.clone() else { unreachable!() };
        let cfg = ProtocolConfig::new(ProtocolId::EcSchnorr2g, 1);
        let mut r = rng(6);
        for _ in 0..50 {
            let mut prover = SessionState::new_prover(pk.clone(), cfg.clone()).unwrap();
            let commit = prover.prover_commit(&mut r).unwrap();
            let q_point = crate::ecc::decode_point(&commit.payload, &k.curve).unwrap();
            let e = rand_below(&(big(1) << 20), &mut r);
            let ch = Frame::new(ProtocolId::EcSchnorr2g, MsgType::Challenge, encode_int(&e));
            let resp = prover.prover_respond(&ch).unwrap();
            let body = steps::parse_response(&vk, &resp.payload).unwrap();
            let Body::IntPair(y1, y2) = body else { unreachable!() };
            // W = y1·P1 + y2·P2 + e·V must equal Q as a point
            let mut ctr = MulCounter::new();
            let w = point_add(
                &point_add(
                    &scalar_mul(&y1, &k.p1, &k.curve, &mut ctr).unwrap(),
                    &scalar_mul(&y2, &k.p2, &k.curve, &mut ctr).unwrap(),
                    &k.curve,
                    &mut ctr,
                )
                .unwrap(),
                &scalar_mul(&e, &k.v_point, &k.curve, &mut ctr).unwrap(),
                &k.curve,
                &mut ctr,
            )
            .unwrap();
            assert_eq!(w, q_point);
        }
    }

    #[test]
    fn schnorr_online_cost_is_one_multiplication_per_round() {
        let (pk, vk, _) = keypair_for(ProtocolId::Schnorr, 43);
        for rounds in [1u32, 10, 25] {
            let cfg = ProtocolConfig {
                precompute_commitments: true,
                ..ProtocolConfig::new(ProtocolId::Schnorr, rounds)
            };
            let mut r = rng(rounds as u64);
            let mut prover = SessionState::new_prover(pk.clone(), cfg.clone()).unwrap();
            let mut verifier = SessionState::new_verifier(vk.clone(), cfg).unwrap();
            prover.precompute_commitments(&mut r).unwrap();
            assert!(prover.precompute_mul_count() > 0);
            let mut channel = MeteredChannel::new();
            let t = run_rounds(&mut prover, &mut verifier, &mut channel, &mut r).unwrap();
            assert_eq!(t.verdict, Verdict::Accept);
            assert_eq!(t.metrics.prover_modmuls, rounds as u64);
        }
    }

    #[test]
    fn ec_sqrt_honest_runs_survive_ring_edge_cases() {
        // tiny ring modulus 91 = 7·13 makes the non-invertible slope cases
        // common; the verifier must still reach the right verdict
        let setting = Setting::EcRing {
            p: big(7),
            q: big(13),
            a: big(2),
        };
        let cfg = ProtocolConfig::new(ProtocolId::EcSqrt, 200);
        let mut r = rng(77);
        for _ in 0..5 {
            let (pk, vk) = keygen(ProtocolId::EcSqrt, &setting, &cfg, &[], &mut r).unwrap();
            let mut prover = SessionState::new_prover(pk, cfg.clone()).unwrap();
            let mut verifier = SessionState::new_verifier(vk, cfg.clone()).unwrap();
            let mut channel = MeteredChannel::new();
            let t = run_rounds(&mut prover, &mut verifier, &mut channel, &mut r).unwrap();
            assert_eq!(t.verdict, Verdict::Accept);
        }
    }

    #[test]
    fn ring_check_handles_two_torsion_splits() {
        // T ≡ (x0, 0) mod 7 doubles to the identity mod 7, so no affine S
        // can satisfy 2T = S; the evaluator must answer false, not error
        let setting = Setting::EcRing { p: big(7), q: big(13), a: big(1) };
        let mut r = rng(123);
        let cfg = ProtocolConfig::new(ProtocolId::EcSqrt, 1);
        'outer: for _ in 0..200 {
            let (pk, vk) = keygen(ProtocolId::EcSqrt, &setting, &cfg, &[], &mut r).unwrap();
            let ProverKey::EcSqrt(k) = &pk else { unreachable!() };
            let c7 = k.curve.reduce_mod_factor(&big(7)).unwrap();
            // find a 2-torsion point mod 7 if this curve has one
            for x in 0u64..7 {
                let probe = Point::affine(x, 0u64);
                if crate::ecc::on_curve(&probe, &c7) {
                    let c13 = k.curve.reduce_mod_factor(&big(13)).unwrap();
                    let p13 = crate::ecc::random_point(&c13, &mut r);
                    let Point::Affine { x: x13, y: y13 } = p13 else { unreachable!() };
                    let tx = crate::numtheory::crt_combine(&[(big(x), big(7)), (x13, big(13))]).unwrap();
                    let ty = crate::numtheory::crt_combine(&[(big(0), big(7)), (y13, big(13))]).unwrap();
                    let t = Point::Affine { x: tx, y: ty };
                    let VerifierKey::EcSqrt(vkk) = &vk else { unreachable!() };
                    let mut ctr = MulCounter::new();
                    let ok = steps::verify_response(
                        &VerifierKey::EcSqrt(vkk.clone()),
                        &Body::Point(k.b_point.clone()),
                        &big(0),
                        &Body::Point(t),
                        &mut ctr,
                    )
                    .unwrap();
                    assert!(!ok);
                    break 'outer;
                }
            }
        }
    }

    #[test]
    fn cheater_with_rigged_challenges_always_passes() {
        for (i, protocol) in ProtocolId::ALL.into_iter().enumerate() {
            let (_, vk, _) = keypair_for(protocol, 400 + i as u64);
            let cfg = ProtocolConfig::new(protocol, 10);
            let mut r = rng(500 + i as u64);
            for _ in 0..5 {
                let verdict =
                    cheating_prover_run(&vk, &cfg, GuessStrategy::Rigged, &mut r).unwrap();
                assert_eq!(verdict, Verdict::Accept, "{protocol}");
            }
        }
    }

    #[test]
    fn cheater_acceptance_rate_is_the_challenge_space_inverse() {
        // QR at t = 1: acceptance frequency near 1/2
        let (_, vk, _) = keypair_for(ProtocolId::Qr, 61);
        let cfg = ProtocolConfig::new(ProtocolId::Qr, 1);
        let mut r = rng(8);
        let trials = 4000;
        let mut hits = 0;
        for _ in 0..trials {
            if cheating_prover_run(&vk, &cfg, GuessStrategy::Uniform, &mut r)
                .unwrap()
                .is_accept()
            {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.04, "freq {freq}");
    }

    #[test]
    fn simulated_transcripts_always_verify() {
        for (i, protocol) in ProtocolId::ALL.into_iter().enumerate() {
            let (_, vk, _) = keypair_for(protocol, 600 + i as u64);
            let cfg = ProtocolConfig::new(protocol, 6);
            let mut r = rng(700 + i as u64);
            let t = simulate_transcript(&vk, &cfg, &mut r).unwrap();
            assert_eq!(t.verdict, Verdict::Accept, "{protocol}");
            assert_eq!(t.entries.len(), 3 * 6 + 2);
        }
    }

    #[test]
    fn attack_recovers_the_ring_secret_on_a_toy_modulus() {
        // n = 91 = 7·13
        let setting = Setting::EcRing { p: big(7), q: big(13), a: big(3) };
        let cfg = ProtocolConfig::new(ProtocolId::EcSqrt, 1);
        let mut r = rng(99);
        for _ in 0..10 {
            let (pk, vk) = keygen(ProtocolId::EcSqrt, &setting, &cfg, &[], &mut r).unwrap();
            let mut prover = SessionState::new_prover(pk, cfg.clone()).unwrap();
            let outcome = ec_sqrt_attack(&vk, &mut prover, &mut r).unwrap();
            let VerifierKey::EcSqrt(k) = &vk else { unreachable!() };
            assert!(doubles_to_public(&outcome.recovered, &outcome.factors, k).unwrap());
            assert_eq!(outcome.factors, vec![big(7), big(13)]);
        }
    }

    #[test]
    fn factoring_attacker_gets_nothing_from_dlog_rounds() {
        // x = r + m with a fresh uniform coin: every candidate secret is
        // explained by some coin, and the prime field modulus leaves the
        // factor-and-lift pipeline nothing to split
        let key = ec_dlog_key_17(7);
        let vk = key.verifier_key();
        let mut r = rng(15);
        let cfg = ProtocolConfig::new(ProtocolId::EcDlog, 1);
        let mut prover = SessionState::new_prover(key, cfg.clone()).unwrap();
        let _commit = prover.prover_commit(&mut r).unwrap();
        let ch = Frame::new(ProtocolId::EcDlog, MsgType::Challenge, encode_int(&big(1)));
        let resp = prover.prover_respond(&ch).unwrap();
        let response = decode_int(&resp.payload).unwrap();
        let consistent = count_consistent_dlog_secrets(&vk, &response).unwrap();
        assert_eq!(consistent, 19);
        // the square-root attacker itself refuses the scheme outright
        let mut prover = SessionState::new_prover(ec_dlog_key_17(7), cfg).unwrap();
        assert!(matches!(
            ec_sqrt_attack(&vk, &mut prover, &mut r),
            Err(ProtocolError::InvalidSetting(_))
        ));
    }

    #[test]
    fn run_metrics_are_deterministic_given_a_seed() {
        let (pk, vk, _) = keypair_for(ProtocolId::Fs, 71);
        let cfg = ProtocolConfig::new(ProtocolId::Fs, 10);
        let run = |seed: u64| {
            let mut r = rng(seed);
            let mut prover = SessionState::new_prover(pk.clone(), cfg.clone()).unwrap();
            let mut verifier = SessionState::new_verifier(vk.clone(), cfg.clone()).unwrap();
            let mut channel = MeteredChannel::new();
            let t = run_rounds(&mut prover, &mut verifier, &mut channel, &mut r).unwrap();
            (t.metrics, channel.encoded_log())
        };
        let (m1, log1) = run(42);
        let (m2, log2) = run(42);
        assert_eq!(log1, log2);
        assert_eq!(m1.bandwidth_bits, m2.bandwidth_bits);
        assert_eq!(m1.prover_modmuls, m2.prover_modmuls);
        assert_eq!(m1.memory_bytes, m2.memory_bytes);
        let (_, log3) = run(43);
        assert_ne!(log1, log3);
    }

    #[test]
    fn session_rejects_config_key_mismatches() {
        let (pk, _, _) = keypair_for(ProtocolId::Fs, 81);
        let cfg = ProtocolConfig {
            fs_secrets: 5,
            ..ProtocolConfig::new(ProtocolId::Fs, 4)
        };
        assert!(matches!(
            SessionState::new_prover(pk, cfg),
            Err(ProtocolError::InvalidSetting(_))
        ));
    }

    #[test]
    fn keygen_rejects_wrong_setting_kind() {
        let mut r = rng(3);
        let group = gen_schnorr_group(16, 8, &mut r);
        let cfg = ProtocolConfig::new(ProtocolId::Qr, 4);
        assert!(matches!(
            keygen(ProtocolId::Qr, &Setting::Schnorr(group), &cfg, &[], &mut r),
            Err(ProtocolError::InvalidSetting(_))
        ));
    }

    #[test]
    fn keygen_rejects_off_curve_base_points() {
        let curve = curve17();
        let cfg = ProtocolConfig::new(ProtocolId::EcDlog, 4);
        let bad = Setting::EcGroup {
            curve,
            base: Point::affine(5u64, 2u64),
            base_order: big(19),
        };
        assert!(matches!(
            keygen(ProtocolId::EcDlog, &bad, &cfg, &[], &mut rng(1)),
            Err(ProtocolError::InvalidSetting(_))
        ));
    }

    #[test]
    fn prover_modmuls_exclude_precomputed_work() {
        let (pk, vk, _) = keypair_for(ProtocolId::Qr, 91);
        let cfg_pre = ProtocolConfig {
            precompute_commitments: true,
            ..ProtocolConfig::new(ProtocolId::Qr, 20)
        };
        let mut r = rng(10);
        let mut prover = SessionState::new_prover(pk.clone(), cfg_pre.clone()).unwrap();
        let mut verifier = SessionState::new_verifier(vk.clone(), cfg_pre.clone()).unwrap();
        prover.precompute_commitments(&mut r).unwrap();
        let mut channel = MeteredChannel::new();
        let t_pre = run_rounds(&mut prover, &mut verifier, &mut channel, &mut r).unwrap();
        // online QR work is one multiplication per c = 1 round only
        assert!(t_pre.metrics.prover_modmuls <= 20);
        assert!(prover.precompute_mul_count() >= 20);

        let cfg_plain = ProtocolConfig::new(ProtocolId::Qr, 20);
        let mut prover = SessionState::new_prover(pk, cfg_plain.clone()).unwrap();
        let mut verifier = SessionState::new_verifier(vk, cfg_plain.clone()).unwrap();
        let mut channel = MeteredChannel::new();
        let t_plain = run_rounds(&mut prover, &mut verifier, &mut channel, &mut rng(10)).unwrap();
        assert!(t_plain.metrics.prover_modmuls >= 20);
    }

    #[test]
    fn forge_round_with_coin_matches_forge_semantics() {
        let (_, vk, _) = keypair_for(ProtocolId::Qr, 95);
        let mut ctr = MulCounter::new();
        for c in [big(0), big(1)] {
            for coin in 0u64..20 {
                let (commitment, response) =
                    forge_round_with_coin(&vk, &c, &big(coin)).unwrap();
                assert!(steps::verify_response(&vk, &commitment, &c, &response, &mut ctr).unwrap());
            }
        }
        let qr_17 = ec_dlog_key_17(5).verifier_key();
        for c in [big(0), big(1)] {
            for coin in 0u64..19 {
                let (commitment, response) =
                    forge_round_with_coin(&qr_17, &c, &big(coin)).unwrap();
                assert!(steps::verify_response(&qr_17, &commitment, &c, &response, &mut ctr).unwrap());
            }
        }
    }

    #[test]
    fn rsa_settings_are_reusable_across_the_classical_protocols() {
        let mut r = rng(55);
        let modulus = gen_rsa_modulus(48, &mut r);
        assert!(modulus.n.to_u64().is_some());
        for protocol in [ProtocolId::Qr, ProtocolId::Fs] {
            let cfg = ProtocolConfig::new(protocol, 4);
            let (pk, _) = keygen(protocol, &Setting::Rsa(modulus.clone()), &cfg, b"i", &mut r).unwrap();
            pk.validate().unwrap();
        }
    }
}
