//! Big-integer modular arithmetic, primality testing, and generation of the
//! algebraic settings the classical protocols run in.
//!
//! Everything that multiplies residues goes through a [`MulCounter`] so the
//! benchmark harness can report modular-multiplication counts; a squaring
//! counts as one multiplication.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

/// Default Miller–Rabin round count used by the generators.
pub const DEFAULT_PRIMALITY_ROUNDS: u32 = 40;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NumTheoryError {
    #[error("value is not invertible, gcd with modulus is {gcd}")]
    NotInvertible { gcd: BigUint },
    #[error("moduli are not pairwise coprime, shared factor {gcd}")]
    NonCoprimeModuli { gcd: BigUint },
}

/// Counter for modular multiplications performed on one party's behalf.
///
/// Monotonically non-decreasing while a session runs; reset between
/// sessions.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct MulCounter {
    count: u64,
}

impl MulCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bump(&mut self) {
        self.count += 1;
    }

    pub fn get(&self) -> u64 {
        self.count
    }

    pub fn reset(&mut self) {
        self.count = 0;
    }
}

/// RSA-style composite modulus: public `n`, private prime factors `p`, `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsaModulus {
    pub n: BigUint,
    pub p: BigUint,
    pub q: BigUint,
}

impl RsaModulus {
    /// Checks the type invariants: both factors probably prime, distinct,
    /// and multiplying to `n`.
    pub fn validate(&self) -> bool {
        self.p != self.q
            && is_probable_prime(&self.p, DEFAULT_PRIMALITY_ROUNDS)
            && is_probable_prime(&self.q, DEFAULT_PRIMALITY_ROUNDS)
            && &self.p * &self.q == self.n
    }
}

/// Prime-order subgroup of the multiplicative group mod `p`: `q | p-1` and
/// `g` generates the order-`q` subgroup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchnorrGroup {
    pub p: BigUint,
    pub q: BigUint,
    pub g: BigUint,
}

impl SchnorrGroup {
    pub fn validate(&self) -> bool {
        let one = BigUint::one();
        if self.g <= one || self.g >= self.p {
            return false;
        }
        if !is_probable_prime(&self.p, DEFAULT_PRIMALITY_ROUNDS)
            || !is_probable_prime(&self.q, DEFAULT_PRIMALITY_ROUNDS)
        {
            return false;
        }
        if !((&self.p - &one) % &self.q).is_zero() {
            return false;
        }
        let mut ctr = MulCounter::new();
        mod_exp(&self.g, &self.q, &self.p, &mut ctr) == one
    }
}

/// One counted modular multiplication.
pub fn mul_mod(a: &BigUint, b: &BigUint, m: &BigUint, ctr: &mut MulCounter) -> BigUint {
    ctr.bump();
    (a * b) % m
}

/// `base^exp mod m` by left-to-right square-and-multiply.
///
/// The counter advances once per squaring and once per multiplication, so a
/// full exponentiation costs `(bits(exp) - 1) + (popcount(exp) - 1)`.
pub fn mod_exp(base: &BigUint, exp: &BigUint, m: &BigUint, ctr: &mut MulCounter) -> BigUint {
    debug_assert!(*m >= BigUint::from(2u32));
    if exp.is_zero() {
        return BigUint::one();
    }
    let base = base % m;
    let bits = exp.bits();
    let mut acc = base.clone();
    for i in (0..bits - 1).rev() {
        acc = mul_mod(&acc.clone(), &acc, m, ctr);
        if exp.bit(i) {
            acc = mul_mod(&acc, &base, m, ctr);
        }
    }
    acc
}

/// Modular inverse via the extended Euclidean algorithm.
pub fn mod_inv(a: &BigUint, m: &BigUint) -> Result<BigUint, NumTheoryError> {
    let a = BigInt::from(a % m);
    let m_int = BigInt::from(m.clone());
    let (mut r0, mut r1) = (m_int.clone(), a);
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    if !r0.is_one() {
        return Err(NumTheoryError::NotInvertible {
            gcd: r0.magnitude().clone(),
        });
    }
    let mut x = t0 % &m_int;
    if x.is_negative() {
        x += &m_int;
    }
    Ok(x.magnitude().clone())
}

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Miller–Rabin probabilistic primality test.
///
/// Witnesses are drawn from a generator seeded by the candidate itself, so
/// the answer for a given `n` is reproducible. A composite survives all
/// rounds with probability at most `4^-rounds`.
pub fn is_probable_prime(n: &BigUint, rounds: u32) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for sp in SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    // n - 1 = d * 2^s with d odd
    let n_minus_1 = n - BigUint::one();
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let mut seed = [0u8; 32];
    let n_bytes = n.to_bytes_le();
    for (i, b) in n_bytes.iter().enumerate() {
        seed[i % 32] ^= *b;
    }
    seed[31] ^= 0x5a;
    let mut rng = ChaCha20Rng::from_seed(seed);

    let span = n - BigUint::from(4u32); // witnesses in [2, n-2]
    'witness: for _ in 0..rounds {
        let a = rand_below(&span, &mut rng) + &two;
        let mut ctr = MulCounter::new();
        let mut x = mod_exp(&a, &d, n, &mut ctr);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Uniform value in `[0, bound)` by rejection sampling.
pub fn rand_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    assert!(!bound.is_zero(), "rand_below bound must be positive");
    if bound.is_one() {
        return BigUint::zero();
    }
    let bits = bound.bits();
    let nbytes = bits.div_ceil(8) as usize;
    let top_mask = if bits % 8 == 0 {
        0xffu8
    } else {
        (1u8 << (bits % 8)) - 1
    };
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= top_mask;
        let candidate = BigUint::from_bytes_be(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

/// Random integer with exactly `bits` bits (top bit set).
pub fn rand_bits<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 1);
    let below = rand_below(&(BigUint::one() << (bits - 1)), rng);
    below | (BigUint::one() << (bits - 1))
}

/// Random probable prime with exactly `bits` bits.
///
/// With `set_second_bit` the two most significant bits are forced so that a
/// product of two such primes keeps the full bit length.
pub fn gen_prime<R: RngCore + ?Sized>(bits: u64, set_second_bit: bool, rng: &mut R) -> BigUint {
    assert!(bits >= 3);
    loop {
        let mut candidate = rand_bits(bits, rng);
        candidate.set_bit(0, true);
        if set_second_bit {
            candidate.set_bit(bits - 2, true);
        }
        if is_probable_prime(&candidate, DEFAULT_PRIMALITY_ROUNDS) {
            return candidate;
        }
    }
}

/// Generates an RSA-style modulus with exactly `bits` bits and balanced
/// prime factors (`bits/2 ± 1` bits each).
pub fn gen_rsa_modulus<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> RsaModulus {
    assert!(bits >= 16, "modulus below 16 bits is not supported");
    let p_bits = bits - bits / 2;
    let q_bits = bits / 2;
    loop {
        let p = gen_prime(p_bits, true, rng);
        let q = gen_prime(q_bits, true, rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        if n.bits() == bits {
            return RsaModulus { n, p, q };
        }
    }
}

/// Generates a Schnorr group: prime `q` of `q_bits` bits, prime
/// `p = k·q + 1` of `p_bits` bits, and a generator of the order-`q`
/// subgroup.
pub fn gen_schnorr_group<R: RngCore + ?Sized>(
    p_bits: u64,
    q_bits: u64,
    rng: &mut R,
) -> SchnorrGroup {
    assert!(q_bits >= 3 && q_bits < p_bits);
    let gap = p_bits - q_bits;
    loop {
        let q = gen_prime(q_bits, false, rng);
        // k must be even: p - 1 = k·q with q odd and p odd.
        for _ in 0..4096 {
            let k = if gap == 1 {
                BigUint::from(2u32)
            } else {
                let mut k = rand_bits(gap, rng);
                k.set_bit(0, false);
                if k.is_zero() {
                    continue;
                }
                k
            };
            let p = &k * &q + BigUint::one();
            if p.bits() != p_bits || !is_probable_prime(&p, DEFAULT_PRIMALITY_ROUNDS) {
                continue;
            }
            let exponent = (&p - BigUint::one()) / &q;
            let span = &p - BigUint::from(3u32);
            loop {
                let h = rand_below(&span, rng) + BigUint::from(2u32);
                let mut ctr = MulCounter::new();
                let g = mod_exp(&h, &exponent, &p, &mut ctr);
                if !g.is_one() {
                    return SchnorrGroup { p, q, g };
                }
            }
        }
    }
}

/// Chinese remainder lift: the unique `x` modulo the product of the moduli
/// matching every `(residue, modulus)` pair.
pub fn crt_combine(residues: &[(BigUint, BigUint)]) -> Result<BigUint, NumTheoryError> {
    assert!(!residues.is_empty(), "crt_combine needs at least one residue");
    let (mut x, mut modulus) = residues[0].clone();
    x %= &modulus;
    for (r, m) in &residues[1..] {
        let g = modulus.gcd(m);
        if !g.is_one() {
            return Err(NumTheoryError::NonCoprimeModuli { gcd: g });
        }
        // x' = x + modulus * ((r - x) * modulus^-1 mod m)
        let inv = mod_inv(&(&modulus % m), m).expect("coprime by gcd check");
        let diff = ((r % m) + m - (&x % m)) % m;
        let t = (diff * inv) % m;
        x += &modulus * t;
        modulus *= m;
    }
    Ok(x)
}

/// Square root modulo an odd prime via Tonelli–Shanks.
///
/// Returns `None` when `a` is a non-residue. The returned root is one of
/// the pair `{r, p-r}`.
pub fn sqrt_mod_prime(a: &BigUint, p: &BigUint) -> Option<BigUint> {
    let a = a % p;
    if a.is_zero() {
        return Some(BigUint::zero());
    }
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    let p_minus_1 = p - &one;
    let legendre_exp = &p_minus_1 / &two;
    let mut ctr = MulCounter::new();
    if mod_exp(&a, &legendre_exp, p, &mut ctr) != one {
        return None;
    }
    if (p % BigUint::from(4u32)) == BigUint::from(3u32) {
        let exp = (p + &one) >> 2;
        return Some(mod_exp(&a, &exp, p, &mut ctr));
    }
    // p ≡ 1 (mod 4): full Tonelli–Shanks.
    let s = p_minus_1.trailing_zeros().unwrap_or(0);
    let q = &p_minus_1 >> s;
    // Find a non-residue z deterministically.
    let mut z = two.clone();
    while mod_exp(&z, &legendre_exp, p, &mut ctr) == one {
        z += &one;
    }
    let mut m = s;
    let mut c = mod_exp(&z, &q, p, &mut ctr);
    let mut t = mod_exp(&a, &q, p, &mut ctr);
    let mut r = mod_exp(&a, &((&q + &one) >> 1), p, &mut ctr);
    while !t.is_one() {
        let mut i = 0u64;
        let mut probe = t.clone();
        while !probe.is_one() {
            probe = (&probe * &probe) % p;
            i += 1;
            if i == m {
                return None;
            }
        }
        let mut b = c.clone();
        for _ in 0..(m - i - 1) {
            b = (&b * &b) % p;
        }
        m = i;
        c = (&b * &b) % p;
        t = (&t * &c) % p;
        r = (&r * &b) % p;
    }
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn mod_exp_hand_values() {
        let mut ctr = MulCounter::new();
        assert_eq!(mod_exp(&big(7), &big(0), &big(13), &mut ctr), big(1));
        assert_eq!(mod_exp(&big(2), &big(11), &big(23), &mut ctr), big(1));
        assert_eq!(mod_exp(&big(2), &big(10), &big(23), &mut ctr), big(12));
    }

    #[test]
    fn mod_exp_counter_matches_square_and_multiply() {
        let mut r = rng(7);
        for _ in 0..50 {
            let m = rand_below(&(big(1) << 64), &mut r) | big(2);
            let e = rand_below(&m, &mut r);
            if e.is_zero() {
                continue;
            }
            let b = rand_below(&m, &mut r);
            let mut ctr = MulCounter::new();
            mod_exp(&b, &e, &m, &mut ctr);
            let expected = (e.bits() - 1) + (e.count_ones() - 1);
            assert_eq!(ctr.get(), expected);
        }
    }

    #[test]
    fn mod_exp_is_homomorphic_in_the_exponent() {
        let mut r = rng(11);
        let m = big(1_000_003);
        let g = big(5);
        for _ in 0..200 {
            let a = rand_below(&m, &mut r);
            let b = rand_below(&m, &mut r);
            let mut ctr = MulCounter::new();
            let lhs =
                (mod_exp(&g, &a, &m, &mut ctr) * mod_exp(&g, &b, &m, &mut ctr)) % &m;
            let rhs = mod_exp(&g, &(&a + &b), &m, &mut ctr);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn mod_inv_values_and_errors() {
        assert_eq!(mod_inv(&big(1), &big(97)).unwrap(), big(1));
        assert_eq!(mod_inv(&big(3), &big(7)).unwrap(), big(5));
        assert_eq!(
            mod_inv(&big(6), &big(9)),
            Err(NumTheoryError::NotInvertible { gcd: big(3) })
        );
        let mut r = rng(3);
        let m = big(1 << 31) - big(1);
        for _ in 0..100 {
            let a = rand_below(&m, &mut r);
            if a.is_zero() {
                continue;
            }
            let inv = mod_inv(&a, &m).unwrap();
            assert_eq!((a * inv) % &m, big(1));
        }
    }

    #[test]
    fn primality_known_values() {
        assert!(!is_probable_prime(&big(0), 40));
        assert!(!is_probable_prime(&big(1), 40));
        assert!(is_probable_prime(&big(2), 40));
        assert!(is_probable_prime(&big(23), 40));
        assert!(!is_probable_prime(&big(77), 40));
        assert!(is_probable_prime(&big(65537), 40));
        assert!(!is_probable_prime(&big(65536), 40));
        // Carmichael number 561 = 3·11·17 must not fool the test.
        assert!(!is_probable_prime(&big(561), 40));
        assert!(is_probable_prime(&BigUint::parse_bytes(b"2305843009213693951", 10).unwrap(), 40));
    }

    #[test]
    fn rsa_modulus_has_exact_bit_length_and_valid_factors() {
        let mut r = rng(42);
        for bits in [16u64, 48, 256] {
            let m = gen_rsa_modulus(bits, &mut r);
            assert_eq!(m.n.bits(), bits);
            assert!(m.validate());
        }
        let n1 = gen_rsa_modulus(32, &mut rng(1)).n;
        let n2 = gen_rsa_modulus(32, &mut rng(2)).n;
        assert_ne!(n1, n2);
    }

    #[test]
    fn schnorr_group_generation_and_validation() {
        let mut r = rng(9);
        let g16 = gen_schnorr_group(16, 8, &mut r);
        assert_eq!(g16.p.bits(), 16);
        assert_eq!(g16.q.bits(), 8);
        assert!(g16.validate());

        let known = SchnorrGroup {
            p: big(23),
            q: big(11),
            g: big(2),
        };
        assert!(known.validate());
        assert!(!SchnorrGroup { p: big(23), q: big(11), g: big(1) }.validate());
    }

    #[test]
    fn schnorr_subgroup_has_exactly_q_elements() {
        let mut r = rng(5);
        let grp = gen_schnorr_group(20, 10, &mut r);
        let q = grp.q.to_u64().unwrap();
        let mut seen = std::collections::HashSet::new();
        let mut x = BigUint::one();
        for _ in 0..q {
            seen.insert(x.clone());
            x = (&x * &grp.g) % &grp.p;
        }
        assert_eq!(x, BigUint::one());
        assert_eq!(seen.len() as u64, q);
    }

    #[test]
    fn rand_below_bounds_and_uniformity() {
        let mut r = rng(100);
        assert_eq!(rand_below(&big(1), &mut r), big(0));
        let mut counts = [0u64; 4];
        let n = 100_000u64;
        for _ in 0..n {
            let v = rand_below(&big(4), &mut r).to_u64().unwrap();
            assert!(v < 4);
            counts[v as usize] += 1;
        }
        // each frequency within 5 sigma of 1/4
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.25).abs() < 5.0 * sigma, "freq {freq}");
        }
        for _ in 0..1000 {
            assert!(rand_below(&big(97), &mut r) < big(97));
        }
    }

    #[test]
    fn crt_combine_values_and_errors() {
        let x = crt_combine(&[(big(2), big(7)), (big(4), big(11))]).unwrap();
        assert_eq!(x, big(37));
        assert_eq!(crt_combine(&[(big(0), big(13))]).unwrap(), big(0));
        assert_eq!(
            crt_combine(&[(big(1), big(6)), (big(1), big(4))]),
            Err(NumTheoryError::NonCoprimeModuli { gcd: big(2) })
        );
    }

    #[test]
    fn crt_combine_inverts_reduction_exhaustively() {
        // p·q = 251·257 = 64507 ≤ 2^16
        let p = 251u64;
        let q = 257u64;
        for x in 0..p * q {
            let lifted = crt_combine(&[(big(x % p), big(p)), (big(x % q), big(q))]).unwrap();
            assert_eq!(lifted, big(x));
        }
    }

    #[test]
    fn sqrt_mod_prime_finds_roots() {
        for p in [7u64, 17, 97, 65537, 1_000_003] {
            let pb = big(p);
            let mut r = rng(p);
            for _ in 0..40 {
                let x = rand_below(&pb, &mut r);
                let sq = (&x * &x) % &pb;
                let root = sqrt_mod_prime(&sq, &pb).expect("square must have a root");
                assert_eq!((&root * &root) % &pb, sq);
            }
        }
        // 3 is a non-residue mod 7 (squares are 0,1,2,4)
        assert_eq!(sqrt_mod_prime(&big(3), &big(7)), None);
    }
}
