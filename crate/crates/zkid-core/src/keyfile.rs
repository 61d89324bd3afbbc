//! Line-oriented `key = value` text format for key material and curve
//! descriptions.
//!
//! Integers are `0x`-prefixed hex, points are `(0xX, 0xY)` or `infinity`,
//! identity strings are raw hex bytes. Secret keys belong in files written
//! with a `.secret` suffix; the public serialization never includes them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::Num;
use thiserror::Error;

use crate::ecc::{CurveParams, Point};
use crate::numtheory::SchnorrGroup;
use crate::protocols::{
    Ec2gProverKey, Ec2gVerifierKey, EcDlogProverKey, EcDlogVerifierKey, EcSqrtProverKey,
    EcSqrtVerifierKey, FsProverKey, FsVerifierKey, GqProverKey, GqVerifierKey, ProtocolError,
    ProtocolId, ProverKey, QrProverKey, QrVerifierKey, SchnorrProverKey, SchnorrVerifierKey,
    VerifierKey,
};

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("line {0}: expected 'key = value'")]
    BadLine(usize),
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("bad value for '{key}': {reason}")]
    BadValue { key: String, reason: String },
    #[error("unknown protocol '{0}'")]
    UnknownProtocol(String),
    #[error("key material inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Curve(#[from] crate::ecc::EcError),
}

/// Parsed key material; a file either carries only public values or the
/// full prover side.
#[derive(Debug, Clone)]
pub enum KeyMaterial {
    Public(VerifierKey),
    Prover(ProverKey),
}

impl KeyMaterial {
    pub fn protocol(&self) -> ProtocolId {
        match self {
            KeyMaterial::Public(k) => k.protocol(),
            KeyMaterial::Prover(k) => k.protocol(),
        }
    }

    pub fn public(&self) -> VerifierKey {
        match self {
            KeyMaterial::Public(k) => k.clone(),
            KeyMaterial::Prover(k) => k.verifier_key(),
        }
    }

    pub fn prover(&self) -> Option<&ProverKey> {
        match self {
            KeyMaterial::Prover(k) => Some(k),
            KeyMaterial::Public(_) => None,
        }
    }
}

fn hex(x: &BigUint) -> String {
    format!("0x{}", x.to_str_radix(16))
}

fn point_str(p: &Point) -> String {
    match p {
        Point::Infinity => "infinity".to_string(),
        Point::Affine { x, y } => format!("({}, {})", hex(x), hex(y)),
    }
}

fn bytes_str(b: &[u8]) -> String {
    format!("0x{}", b.iter().map(|x| format!("{x:02x}")).collect::<String>())
}

/// Serializes the public half of a key pair.
pub fn serialize_public(key: &VerifierKey) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} public key", key.protocol().name());
    let _ = writeln!(out, "protocol = {}", key.protocol().name());
    match key {
        VerifierKey::Qr(k) => {
            let _ = writeln!(out, "n = {}", hex(&k.n));
            let _ = writeln!(out, "b = {}", hex(&k.b));
        }
        VerifierKey::Fs(k) => {
            let _ = writeln!(out, "n = {}", hex(&k.n));
            let _ = writeln!(out, "identity = {}", bytes_str(&k.identity));
            for (i, v) in k.publics.iter().enumerate() {
                let _ = writeln!(out, "v{} = {}", i + 1, hex(v));
            }
        }
        VerifierKey::Gq(k) => {
            let _ = writeln!(out, "n = {}", hex(&k.n));
            let _ = writeln!(out, "v = {}", hex(&k.v));
            let _ = writeln!(out, "j = {}", hex(&k.j));
            let _ = writeln!(out, "identity = {}", bytes_str(&k.identity));
        }
        VerifierKey::Schnorr(k) => {
            let _ = writeln!(out, "p = {}", hex(&k.group.p));
            let _ = writeln!(out, "q = {}", hex(&k.group.q));
            let _ = writeln!(out, "g = {}", hex(&k.group.g));
            let _ = writeln!(out, "b = {}", hex(&k.b));
        }
        VerifierKey::EcSqrt(k) => {
            let _ = writeln!(out, "modulus = {}", hex(&k.curve.m));
            let _ = writeln!(out, "curve_a = {}", hex(&k.curve.a));
            let _ = writeln!(out, "curve_b = {}", hex(&k.curve.b));
            let _ = writeln!(out, "pub_b = {}", point_str(&k.b_point));
        }
        VerifierKey::EcDlog(k) => {
            let _ = writeln!(out, "modulus = {}", hex(&k.curve.m));
            let _ = writeln!(out, "curve_a = {}", hex(&k.curve.a));
            let _ = writeln!(out, "curve_b = {}", hex(&k.curve.b));
            let _ = writeln!(out, "base = {}", point_str(&k.base));
            let _ = writeln!(out, "base_order = {}", hex(&k.base_order));
            let _ = writeln!(out, "pub_b = {}", point_str(&k.b_point));
        }
        VerifierKey::EcSchnorr2g(k) => {
            let _ = writeln!(out, "modulus = {}", hex(&k.curve.m));
            let _ = writeln!(out, "curve_a = {}", hex(&k.curve.a));
            let _ = writeln!(out, "curve_b = {}", hex(&k.curve.b));
            let _ = writeln!(out, "p1 = {}", point_str(&k.p1));
            let _ = writeln!(out, "p2 = {}", point_str(&k.p2));
            let _ = writeln!(out, "order = {}", hex(&k.order));
            let _ = writeln!(out, "pub_v = {}", point_str(&k.v_point));
        }
    }
    out
}

/// Serializes the full prover side (public values plus secrets).
pub fn serialize_prover(key: &ProverKey) -> String {
    let mut out = serialize_public(&key.verifier_key());
    out = out.replacen("public key", "secret key", 1);
    match key {
        ProverKey::Qr(k) => {
            let _ = writeln!(out, "x = {}", hex(&k.x));
        }
        ProverKey::Fs(k) => {
            for (i, s) in k.secrets.iter().enumerate() {
                let _ = writeln!(out, "s{} = {}", i + 1, hex(s));
            }
        }
        ProverKey::Gq(k) => {
            let _ = writeln!(out, "s = {}", hex(&k.s));
        }
        ProverKey::Schnorr(k) => {
            let _ = writeln!(out, "x = {}", hex(&k.x));
        }
        ProverKey::EcSqrt(k) => {
            let _ = writeln!(out, "secret_a = {}", point_str(&k.a_point));
            let _ = writeln!(out, "factor_p = {}", hex(&k.factors.0));
            let _ = writeln!(out, "factor_q = {}", hex(&k.factors.1));
        }
        ProverKey::EcDlog(k) => {
            let _ = writeln!(out, "secret = {}", hex(&k.secret));
        }
        ProverKey::EcSchnorr2g(k) => {
            let _ = writeln!(out, "d1 = {}", hex(&k.d1));
            let _ = writeln!(out, "d2 = {}", hex(&k.d2));
        }
    }
    out
}

struct Fields {
    map: BTreeMap<String, String>,
}

impl Fields {
    fn parse(text: &str) -> Result<Self, KeyFileError> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(KeyFileError::BadLine(lineno + 1))?;
            map.insert(key.trim().to_ascii_lowercase(), value.trim().to_string());
        }
        Ok(Fields { map })
    }

    fn get(&self, key: &'static str) -> Result<&str, KeyFileError> {
        self.map
            .get(key)
            .map(|s| s.as_str())
            .ok_or(KeyFileError::MissingKey(key))
    }

    fn opt(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn int(&self, key: &'static str) -> Result<BigUint, KeyFileError> {
        parse_int(key, self.get(key)?)
    }

    fn opt_int(&self, key: &str) -> Result<Option<BigUint>, KeyFileError> {
        self.opt(key).map(|v| parse_int(key, v)).transpose()
    }

    fn point(&self, key: &'static str) -> Result<Point, KeyFileError> {
        parse_point(key, self.get(key)?)
    }

    fn opt_point(&self, key: &str) -> Result<Option<Point>, KeyFileError> {
        self.opt(key).map(|v| parse_point(key, v)).transpose()
    }

    fn bytes(&self, key: &'static str) -> Result<Vec<u8>, KeyFileError> {
        let v = self.get(key)?;
        parse_bytes(key, v)
    }

    /// v1, v2, ... in index order.
    fn numbered(&self, prefix: &str) -> Result<Vec<BigUint>, KeyFileError> {
        let mut out = Vec::new();
        for i in 1.. {
            match self.opt(&format!("{prefix}{i}")) {
                Some(v) => out.push(parse_int(prefix, v)?),
                None => break,
            }
        }
        Ok(out)
    }
}

fn parse_int(key: &str, value: &str) -> Result<BigUint, KeyFileError> {
    let digits = value
        .strip_prefix("0x")
        .or_else(|| value.strip_prefix("0X"))
        .ok_or_else(|| KeyFileError::BadValue {
            key: key.into(),
            reason: "integers are 0x-prefixed hex".into(),
        })?;
    BigUint::from_str_radix(digits, 16).map_err(|e| KeyFileError::BadValue {
        key: key.into(),
        reason: e.to_string(),
    })
}

fn parse_bytes(key: &str, value: &str) -> Result<Vec<u8>, KeyFileError> {
    let digits = value.strip_prefix("0x").ok_or_else(|| KeyFileError::BadValue {
        key: key.into(),
        reason: "byte strings are 0x-prefixed hex".into(),
    })?;
    if digits.len() % 2 != 0 {
        return Err(KeyFileError::BadValue {
            key: key.into(),
            reason: "odd hex length".into(),
        });
    }
    (0..digits.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&digits[i..i + 2], 16).map_err(|e| KeyFileError::BadValue {
                key: key.into(),
                reason: e.to_string(),
            })
        })
        .collect()
}

fn parse_point(key: &str, value: &str) -> Result<Point, KeyFileError> {
    if value.eq_ignore_ascii_case("infinity") {
        return Ok(Point::Infinity);
    }
    let inner = value
        .strip_prefix('(')
        .and_then(|v| v.strip_suffix(')'))
        .ok_or_else(|| KeyFileError::BadValue {
            key: key.into(),
            reason: "points are '(0xX, 0xY)' or 'infinity'".into(),
        })?;
    let (x, y) = inner.split_once(',').ok_or_else(|| KeyFileError::BadValue {
        key: key.into(),
        reason: "points need two coordinates".into(),
    })?;
    Ok(Point::Affine {
        x: parse_int(key, x.trim())?,
        y: parse_int(key, y.trim())?,
    })
}

/// Parses key material, validating invariants; returns the prover side
/// when secrets are present.
pub fn parse_key_material(text: &str) -> Result<KeyMaterial, KeyFileError> {
    let f = Fields::parse(text)?;
    let protocol: ProtocolId = f
        .get("protocol")?
        .parse()
        .map_err(KeyFileError::UnknownProtocol)?;
    match protocol {
        ProtocolId::Qr => {
            let n = f.int("n")?;
            let b = f.int("b")?;
            match f.opt_int("x")? {
                Some(x) => {
                    let key = QrProverKey::from_parts(n, x)?;
                    if key.b != b {
                        return Err(KeyFileError::Inconsistent("b ≠ x² mod n".into()));
                    }
                    Ok(KeyMaterial::Prover(ProverKey::Qr(key)))
                }
                None => Ok(KeyMaterial::Public(VerifierKey::Qr(QrVerifierKey { n, b }))),
            }
        }
        ProtocolId::Fs => {
            let n = f.int("n")?;
            let identity = f.bytes("identity")?;
            let publics = f.numbered("v")?;
            if publics.is_empty() {
                return Err(KeyFileError::MissingKey("v1"));
            }
            let secrets = f.numbered("s")?;
            if secrets.is_empty() {
                return Ok(KeyMaterial::Public(VerifierKey::Fs(FsVerifierKey {
                    n,
                    publics,
                    identity,
                })));
            }
            let key = FsProverKey::from_parts(n, secrets, identity)?;
            if key.publics != publics {
                return Err(KeyFileError::Inconsistent("v_i ≠ s_i² mod n".into()));
            }
            Ok(KeyMaterial::Prover(ProverKey::Fs(key)))
        }
        ProtocolId::Gq => {
            let n = f.int("n")?;
            let v = f.int("v")?;
            let j = f.int("j")?;
            let identity = f.bytes("identity")?;
            match f.opt_int("s")? {
                Some(s) => {
                    let key = GqProverKey {
                        n,
                        v,
                        j,
                        s,
                        identity,
                    };
                    ProverKey::Gq(key.clone()).validate().map_err(|_| {
                        KeyFileError::Inconsistent("J·s^v ≠ 1 mod n".into())
                    })?;
                    Ok(KeyMaterial::Prover(ProverKey::Gq(key)))
                }
                None => Ok(KeyMaterial::Public(VerifierKey::Gq(GqVerifierKey {
                    n,
                    v,
                    j,
                    identity,
                }))),
            }
        }
        ProtocolId::Schnorr => {
            let group = SchnorrGroup {
                p: f.int("p")?,
                q: f.int("q")?,
                g: f.int("g")?,
            };
            if !group.validate() {
                return Err(KeyFileError::Inconsistent(
                    "not a valid Schnorr group".into(),
                ));
            }
            let b = f.int("b")?;
            match f.opt_int("x")? {
                Some(x) => {
                    let key = SchnorrProverKey::from_parts(group, x);
                    if key.b != b {
                        return Err(KeyFileError::Inconsistent("b ≠ g^x mod p".into()));
                    }
                    Ok(KeyMaterial::Prover(ProverKey::Schnorr(key)))
                }
                None => Ok(KeyMaterial::Public(VerifierKey::Schnorr(
                    SchnorrVerifierKey { group, b },
                ))),
            }
        }
        ProtocolId::EcSqrt => {
            let curve = CurveParams::ring(f.int("modulus")?, f.int("curve_a")?, f.int("curve_b")?)?;
            let b_point = f.point("pub_b")?;
            match f.opt_point("secret_a")? {
                Some(a_point) => {
                    let key = EcSqrtProverKey {
                        curve,
                        b_point,
                        a_point,
                        factors: (f.int("factor_p")?, f.int("factor_q")?),
                    };
                    ProverKey::EcSqrt(key.clone()).validate().map_err(|_| {
                        KeyFileError::Inconsistent("2A ≠ B over the ring".into())
                    })?;
                    Ok(KeyMaterial::Prover(ProverKey::EcSqrt(key)))
                }
                None => Ok(KeyMaterial::Public(VerifierKey::EcSqrt(EcSqrtVerifierKey {
                    curve,
                    b_point,
                }))),
            }
        }
        ProtocolId::EcDlog => {
            let curve =
                CurveParams::field(f.int("modulus")?, f.int("curve_a")?, f.int("curve_b")?)?;
            let base = f.point("base")?;
            let base_order = f.int("base_order")?;
            let b_point = f.point("pub_b")?;
            match f.opt_int("secret")? {
                Some(secret) => {
                    let key = EcDlogProverKey {
                        curve,
                        base,
                        base_order,
                        b_point,
                        secret,
                    };
                    ProverKey::EcDlog(key.clone()).validate().map_err(|_| {
                        KeyFileError::Inconsistent("B ≠ secret·G".into())
                    })?;
                    Ok(KeyMaterial::Prover(ProverKey::EcDlog(key)))
                }
                None => Ok(KeyMaterial::Public(VerifierKey::EcDlog(EcDlogVerifierKey {
                    curve,
                    base,
                    base_order,
                    b_point,
                }))),
            }
        }
        ProtocolId::EcSchnorr2g => {
            let curve =
                CurveParams::field(f.int("modulus")?, f.int("curve_a")?, f.int("curve_b")?)?;
            let p1 = f.point("p1")?;
            let p2 = f.point("p2")?;
            let order = f.int("order")?;
            let v_point = f.point("pub_v")?;
            match (f.opt_int("d1")?, f.opt_int("d2")?) {
                (Some(d1), Some(d2)) => {
                    let key = Ec2gProverKey {
                        curve,
                        p1,
                        p2,
                        order,
                        d1,
                        d2,
                        v_point,
                    };
                    ProverKey::EcSchnorr2g(key.clone()).validate().map_err(|_| {
                        KeyFileError::Inconsistent("V ≠ -d1·P1 - d2·P2".into())
                    })?;
                    Ok(KeyMaterial::Prover(ProverKey::EcSchnorr2g(key)))
                }
                (None, None) => Ok(KeyMaterial::Public(VerifierKey::EcSchnorr2g(
                    Ec2gVerifierKey {
                        curve,
                        p1,
                        p2,
                        order,
                        v_point,
                    },
                ))),
                _ => Err(KeyFileError::Inconsistent(
                    "both halves of the secret pair are required".into(),
                )),
            }
        }
    }
}

/// Curve description file: modulus and coefficients, plus optional
/// generator data for key generation.
#[derive(Debug, Clone)]
pub struct CurveFileData {
    pub modulus: BigUint,
    pub a: BigUint,
    pub b: BigUint,
    pub base: Option<Point>,
    pub base_order: Option<BigUint>,
    pub p1: Option<Point>,
    pub p2: Option<Point>,
    pub order: Option<BigUint>,
}

pub fn parse_curve_file(text: &str) -> Result<CurveFileData, KeyFileError> {
    let f = Fields::parse(text)?;
    Ok(CurveFileData {
        modulus: f.int("modulus")?,
        a: f.int("curve_a")?,
        b: f.int("curve_b")?,
        base: f.opt_point("base")?,
        base_order: f.opt_int("base_order")?,
        p1: f.opt_point("p1")?,
        p2: f.opt_point("p2")?,
        order: f.opt_int("order")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{generate_setting, keygen, ProtocolConfig, SettingSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn round_trips_every_protocol() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let spec = SettingSpec {
            modulus_bits: 48,
            subgroup_bits: 16,
            ec_field_bits: 10,
            ring_factor_bits: 8,
        };
        for protocol in ProtocolId::ALL {
            let cfg = ProtocolConfig::new(protocol, 4);
            let setting = generate_setting(protocol, &spec, &mut rng).unwrap();
            let Ok((prover, verifier)) = keygen(protocol, &setting, &cfg, b"id-bytes", &mut rng)
            else {
                continue;
            };
            let pub_text = serialize_public(&verifier);
            let sec_text = serialize_prover(&prover);
            let parsed_pub = parse_key_material(&pub_text).unwrap();
            assert!(parsed_pub.prover().is_none());
            assert_eq!(parsed_pub.public(), verifier, "{protocol} public");
            let parsed_sec = parse_key_material(&sec_text).unwrap();
            assert_eq!(parsed_sec.prover().unwrap(), &prover, "{protocol} secret");
        }
    }

    #[test]
    fn rejects_inconsistent_material() {
        let text = "protocol = qr\nn = 0x4d\nb = 0x05\nx = 0x9\n";
        assert!(matches!(
            parse_key_material(text),
            Err(KeyFileError::Inconsistent(_))
        ));
        // 0x4 ≠ 9² mod 77 is fine: 81 mod 77 = 4
        let ok = "protocol = qr\nn = 0x4d\nb = 0x04\nx = 0x9\n";
        assert!(parse_key_material(ok).is_ok());
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_key_material("protocol = qr\nn 0x4d\n"),
            Err(KeyFileError::BadLine(2))
        ));
        assert!(matches!(
            parse_key_material("protocol = nope\n"),
            Err(KeyFileError::UnknownProtocol(_))
        ));
        assert!(matches!(
            parse_key_material("protocol = qr\nn = 0x4d\n"),
            Err(KeyFileError::MissingKey("b"))
        ));
        assert!(matches!(
            parse_key_material("protocol = qr\nn = 77\nb = 0x4\n"),
            Err(KeyFileError::BadValue { .. })
        ));
    }

    #[test]
    fn curve_file_parsing() {
        let text = "# toy curve\nmodulus = 0x11\ncurve_a = 0x2\ncurve_b = 0x2\nbase = (0x5, 0x1)\nbase_order = 0x13\n";
        let data = parse_curve_file(text).unwrap();
        assert_eq!(data.modulus, BigUint::from(17u32));
        assert_eq!(
            data.base,
            Some(Point::affine(5u64, 1u64))
        );
        assert_eq!(data.base_order, Some(BigUint::from(19u32)));
        assert!(data.p1.is_none());
    }
}
