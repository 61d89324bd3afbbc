//! Short-Weierstrass elliptic curve arithmetic `y² = x³ + ax + b` over a
//! prime field, or over a composite ring for the square-root identification
//! scheme, in affine coordinates.
//!
//! Over a ring the chord-tangent formulas can hit a non-invertible slope
//! denominator; that failure is surfaced as
//! [`EcError::RingInversionFailure`] carrying the offending gcd, because a
//! failing denominator reveals a factor of the modulus and the attack on
//! the ring scheme is built on exactly that.
//!
//! Point counting, point order, half-point search and the security checks
//! are exhaustive desk-scale routines capped at a 2^20 modulus.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use thiserror::Error;

use crate::numtheory::{
    is_probable_prime, mod_inv, mul_mod, rand_below, sqrt_mod_prime, MulCounter, NumTheoryError,
    DEFAULT_PRIMALITY_ROUNDS,
};

/// Exhaustive routines refuse moduli above this bound.
pub const DESK_SCALE_MAX: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EcError {
    #[error("curve is singular: 4a³ + 27b² ≡ 0")]
    Singular,
    #[error("field modulus must be a prime ≥ 5")]
    NotPrime,
    #[error("slope denominator not invertible, gcd with modulus is {gcd}")]
    RingInversionFailure { gcd: BigUint },
    #[error("modulus exceeds the 2^20 desk-scale bound for exhaustive routines")]
    ModulusTooLarge,
    #[error("malformed point encoding")]
    MalformedPoint,
    #[error("point does not satisfy the curve equation")]
    PointOffCurve,
}

/// Curve `y² = x³ + ax + b` over the integers mod `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveParams {
    pub m: BigUint,
    pub a: BigUint,
    pub b: BigUint,
    pub is_field: bool,
}

impl CurveParams {
    /// Curve over a prime field. `m` must be a prime ≥ 5 and the curve
    /// non-singular.
    pub fn field(m: BigUint, a: BigUint, b: BigUint) -> Result<Self, EcError> {
        if m < BigUint::from(5u32) || !is_probable_prime(&m, DEFAULT_PRIMALITY_ROUNDS) {
            return Err(EcError::NotPrime);
        }
        Self::build(m, a, b, true)
    }

    /// Curve over a composite ring (square-root scheme and its attack).
    pub fn ring(m: BigUint, a: BigUint, b: BigUint) -> Result<Self, EcError> {
        if m < BigUint::from(5u32) {
            return Err(EcError::NotPrime);
        }
        Self::build(m, a, b, false)
    }

    fn build(m: BigUint, a: BigUint, b: BigUint, is_field: bool) -> Result<Self, EcError> {
        let a = a % &m;
        let b = b % &m;
        if discriminant_term(&a, &b, &m).is_zero() {
            return Err(EcError::Singular);
        }
        Ok(CurveParams { m, a, b, is_field })
    }

    /// Byte length of a field element in the point encoding.
    pub fn field_byte_len(&self) -> usize {
        self.m.bits().div_ceil(8) as usize
    }

    /// The same curve reduced modulo a prime factor of the ring modulus.
    pub fn reduce_mod_factor(&self, factor: &BigUint) -> Result<CurveParams, EcError> {
        CurveParams::field(factor.clone(), &self.a % factor, &self.b % factor)
    }
}

/// `4a³ + 27b² mod m`, the quantity that must not vanish for the curve to
/// be non-singular.
pub fn discriminant_term(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    let four_a3 = (BigUint::from(4u32) * a * a * a) % m;
    let twenty_seven_b2 = (BigUint::from(27u32) * b * b) % m;
    (four_a3 + twenty_seven_b2) % m
}

/// Affine point or the group identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Point {
    Infinity,
    Affine { x: BigUint, y: BigUint },
}

impl Point {
    pub fn affine(x: impl Into<BigUint>, y: impl Into<BigUint>) -> Self {
        Point::Affine {
            x: x.into(),
            y: y.into(),
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, Point::Infinity)
    }

    /// X-coordinate, if affine.
    pub fn x(&self) -> Option<&BigUint> {
        match self {
            Point::Infinity => None,
            Point::Affine { x, .. } => Some(x),
        }
    }

    pub fn reduce_mod_factor(&self, factor: &BigUint) -> Point {
        match self {
            Point::Infinity => Point::Infinity,
            Point::Affine { x, y } => Point::Affine {
                x: x % factor,
                y: y % factor,
            },
        }
    }
}

/// True iff `p` is the identity or satisfies the curve equation.
pub fn on_curve(p: &Point, e: &CurveParams) -> bool {
    match p {
        Point::Infinity => true,
        Point::Affine { x, y } => {
            if x >= &e.m || y >= &e.m {
                return false;
            }
            let lhs = (y * y) % &e.m;
            let rhs = (x * x * x + &e.a * x + &e.b) % &e.m;
            lhs == rhs
        }
    }
}

/// Additive inverse: `(x, m - y)`, with `-O = O`.
pub fn point_neg(p: &Point, e: &CurveParams) -> Point {
    match p {
        Point::Infinity => Point::Infinity,
        Point::Affine { x, y } => {
            let ny = if y.is_zero() {
                BigUint::zero()
            } else {
                &e.m - y
            };
            Point::Affine {
                x: x.clone(),
                y: ny,
            }
        }
    }
}

fn invert_slope_denominator(den: &BigUint, m: &BigUint) -> Result<BigUint, EcError> {
    mod_inv(den, m).map_err(|err| match err {
        NumTheoryError::NotInvertible { gcd } => EcError::RingInversionFailure { gcd },
        other => unreachable!("mod_inv cannot return {other:?}"),
    })
}

/// Chord-tangent addition. Each call costs 3 counted field multiplications
/// for a generic addition and 4 for a doubling; small-constant multiples go
/// through additions and the inversion itself is not counted.
pub fn point_add(
    p: &Point,
    q: &Point,
    e: &CurveParams,
    ctr: &mut MulCounter,
) -> Result<Point, EcError> {
    let m = &e.m;
    let (x1, y1, x2, y2) = match (p, q) {
        (Point::Infinity, _) => return Ok(q.clone()),
        (_, Point::Infinity) => return Ok(p.clone()),
        (Point::Affine { x: x1, y: y1 }, Point::Affine { x: x2, y: y2 }) => (x1, y1, x2, y2),
    };

    let lambda = if x1 == x2 {
        if ((y1 + y2) % m).is_zero() {
            return Ok(Point::Infinity);
        }
        if y1 != y2 {
            // Distinct on-curve points sharing an x-coordinate can only
            // happen over a ring, with the y-signs disagreeing across
            // factors; y1 + y2 then shares a factor with the modulus.
            return Err(EcError::RingInversionFailure {
                gcd: ((y1 + y2) % m).gcd(m),
            });
        }
        // tangent slope (3x² + a) / 2y
        let x_sq = mul_mod(x1, x1, m, ctr);
        let num = (&x_sq + &x_sq + &x_sq + &e.a) % m;
        let den = (y1 + y1) % m;
        let inv = invert_slope_denominator(&den, m)?;
        mul_mod(&num, &inv, m, ctr)
    } else {
        // chord slope (y2 - y1) / (x2 - x1)
        let num = (y2 + m - y1) % m;
        let den = (x2 + m - x1) % m;
        let inv = invert_slope_denominator(&den, m)?;
        mul_mod(&num, &inv, m, ctr)
    };

    let lambda_sq = mul_mod(&lambda, &lambda, m, ctr);
    let x3 = (lambda_sq + m + m - x1 - x2) % m;
    let y3 = (mul_mod(&lambda, &((x1 + m - &x3) % m), m, ctr) + m - y1) % m;
    Ok(Point::Affine { x: x3, y: y3 })
}

/// `k · p` by double-and-add; `0 · p = O`.
pub fn scalar_mul(
    k: &BigUint,
    p: &Point,
    e: &CurveParams,
    ctr: &mut MulCounter,
) -> Result<Point, EcError> {
    if k.is_zero() || p.is_infinity() {
        return Ok(Point::Infinity);
    }
    let mut acc = p.clone();
    for i in (0..k.bits() - 1).rev() {
        acc = point_add(&acc.clone(), &acc, e, ctr)?;
        if k.bit(i) {
            acc = point_add(&acc, p, e, ctr)?;
        }
    }
    Ok(acc)
}

/// Report produced by [`curve_security_check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveReport {
    pub order: u64,
    pub large_prime_factor: u64,
    pub pollard_ok: bool,
    pub mov_ok: bool,
    pub anomalous_ok: bool,
}

impl CurveReport {
    pub fn all_ok(&self) -> bool {
        self.pollard_ok && self.mov_ok && self.anomalous_ok
    }
}

fn desk_scale_modulus(e: &CurveParams) -> Result<u64, EcError> {
    if !e.is_field {
        return Err(EcError::NotPrime);
    }
    match e.m.to_u64() {
        Some(m) if m <= DESK_SCALE_MAX => Ok(m),
        _ => Err(EcError::ModulusTooLarge),
    }
}

/// Exhaustive group order `#E(F_m)`: one point at infinity plus every
/// solution of the curve equation, counted through a table of squares.
pub fn count_points(e: &CurveParams) -> Result<u64, EcError> {
    let m = desk_scale_modulus(e)?;
    let a = e.a.to_u64().expect("reduced below desk-scale modulus");
    let b = e.b.to_u64().expect("reduced below desk-scale modulus");
    let mut square_counts = vec![0u8; m as usize];
    for y in 0..m {
        let sq = mul_u64(y, y, m);
        square_counts[sq as usize] += 1;
    }
    let mut order = 1u64;
    for x in 0..m {
        let rhs = curve_rhs_u64(x, a, b, m);
        order += square_counts[rhs as usize] as u64;
    }
    Ok(order)
}

/// Smallest `k ≥ 1` with `k · p = O`, computed from the factored group
/// order.
pub fn point_order(p: &Point, e: &CurveParams) -> Result<u64, EcError> {
    desk_scale_modulus(e)?;
    if p.is_infinity() {
        return Ok(1);
    }
    let group_order = count_points(e)?;
    let mut order = group_order;
    let mut ctr = MulCounter::new();
    for (prime, _) in factor_u64(group_order) {
        while order % prime == 0 {
            let candidate = order / prime;
            if scalar_mul(&BigUint::from(candidate), p, e, &mut ctr)?.is_infinity() {
                order = candidate;
            } else {
                break;
            }
        }
    }
    Ok(order)
}

/// Checks a field curve against the standard small-curve attacks: the
/// largest prime factor of the order must be big enough for Pollard-rho /
/// Pohlig-Hellman resistance, the modulus must not divide `m + 1 - #E`
/// (MOV / supersingular), and the order must differ from the modulus
/// (anomalous curves).
pub fn curve_security_check(e: &CurveParams, min_prime_bits: u32) -> Result<CurveReport, EcError> {
    let m = desk_scale_modulus(e)?;
    let order = count_points(e)?;
    let large_prime_factor = factor_u64(order)
        .into_iter()
        .map(|(p, _)| p)
        .max()
        .unwrap_or(1);
    let lpf_bits = 64 - large_prime_factor.leading_zeros();
    let trace = m as i128 + 1 - order as i128;
    Ok(CurveReport {
        order,
        large_prime_factor,
        pollard_ok: lpf_bits >= min_prime_bits,
        mov_ok: trace.rem_euclid(m as i128) != 0,
        anomalous_ok: order != m,
    })
}

/// All points `t` with `2t = s`, by exhaustive scan of the group.
pub fn find_half_points(s: &Point, e: &CurveParams) -> Result<Vec<Point>, EcError> {
    let m = desk_scale_modulus(e)?;
    let a = e.a.to_u64().expect("reduced");
    let b = e.b.to_u64().expect("reduced");
    let target: Option<(u64, u64)> = match s {
        Point::Infinity => None,
        Point::Affine { x, y } => Some((
            x.to_u64().ok_or(EcError::ModulusTooLarge)?,
            y.to_u64().ok_or(EcError::ModulusTooLarge)?,
        )),
    };

    let mut half = Vec::new();
    if target.is_none() {
        half.push(Point::Infinity); // 2·O = O
    }
    // sqrt table: square value -> smallest root
    let mut sqrt_table: Vec<Option<u64>> = vec![None; m as usize];
    for y in (0..m).rev() {
        let sq = mul_u64(y, y, m);
        sqrt_table[sq as usize] = Some(y);
    }
    for x in 0..m {
        let rhs = curve_rhs_u64(x, a, b, m);
        let Some(y0) = sqrt_table[rhs as usize] else {
            continue;
        };
        let mut roots = vec![y0];
        if y0 != 0 {
            roots.push(m - y0);
        }
        for y in roots {
            if double_u64((x, y), a, m) == target {
                half.push(Point::affine(x, y));
            }
        }
    }
    Ok(half)
}

/// Uniformly random affine point on a field curve: random x until the cubic
/// is a square, then a random choice of root.
pub fn random_point<R: RngCore + ?Sized>(e: &CurveParams, rng: &mut R) -> Point {
    assert!(e.is_field, "random_point needs a field curve");
    loop {
        let x = rand_below(&e.m, rng);
        let rhs = (&x * &x * &x + &e.a * &x + &e.b) % &e.m;
        if let Some(root) = sqrt_mod_prime(&rhs, &e.m) {
            let y = if !root.is_zero() && rand_below(&BigUint::from(2u32), rng).is_one() {
                &e.m - &root
            } else {
                root
            };
            return Point::Affine { x, y };
        }
    }
}

/// Point encoding: `0x00` for the identity, else `0x04 ‖ X ‖ Y` with both
/// coordinates zero-padded big-endian to the byte length of the modulus.
pub fn encode_point(p: &Point, e: &CurveParams) -> Vec<u8> {
    match p {
        Point::Infinity => vec![0x00],
        Point::Affine { x, y } => {
            let len = e.field_byte_len();
            let mut out = Vec::with_capacity(1 + 2 * len);
            out.push(0x04);
            out.extend_from_slice(&pad_be(x, len));
            out.extend_from_slice(&pad_be(y, len));
            out
        }
    }
}

/// Inverse of [`encode_point`]; rejects bad tags, bad lengths and points
/// off the curve.
pub fn decode_point(bytes: &[u8], e: &CurveParams) -> Result<Point, EcError> {
    match bytes.first() {
        Some(0x00) if bytes.len() == 1 => Ok(Point::Infinity),
        Some(0x04) => {
            let len = e.field_byte_len();
            if bytes.len() != 1 + 2 * len {
                return Err(EcError::MalformedPoint);
            }
            let p = Point::Affine {
                x: BigUint::from_bytes_be(&bytes[1..1 + len]),
                y: BigUint::from_bytes_be(&bytes[1 + len..]),
            };
            if on_curve(&p, e) {
                Ok(p)
            } else {
                Err(EcError::PointOffCurve)
            }
        }
        _ => Err(EcError::MalformedPoint),
    }
}

fn pad_be(x: &BigUint, len: usize) -> Vec<u8> {
    if x.is_zero() {
        return vec![0u8; len];
    }
    let bytes = x.to_bytes_be();
    assert!(bytes.len() <= len);
    let mut out = vec![0u8; len - bytes.len()];
    out.extend_from_slice(&bytes);
    out
}

/// Trial-division factorization: `(prime, exponent)` pairs in ascending
/// order.
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut factors = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            factors.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        factors.push((n, 1));
    }
    factors
}

fn mul_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn curve_rhs_u64(x: u64, a: u64, b: u64, m: u64) -> u64 {
    (mul_u64(mul_u64(x, x, m), x, m) + mul_u64(a, x, m) + b) % m
}

fn inv_u64(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m as i128) as u64)
}

/// Doubling on the small-integer fast path; `None` is the identity.
fn double_u64(p: (u64, u64), a: u64, m: u64) -> Option<(u64, u64)> {
    let (x, y) = p;
    if y == 0 {
        return None;
    }
    let num = (3 * mul_u64(x, x, m) % m + a) % m;
    let den = (2 * y) % m;
    let lambda = mul_u64(num, inv_u64(den, m).expect("prime modulus, nonzero y"), m);
    let x3 = (mul_u64(lambda, lambda, m) + 2 * m - x - x) % m;
    let y3 = (mul_u64(lambda, (x + m - x3) % m, m) + m - y) % m;
    Some((x3, y3))
}
