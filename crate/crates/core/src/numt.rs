//! Number-theoretic helpers shared by every scheme in the crate.
//!
//! Everything here works on `num-bigint` integers. Randomness is always taken
//! from a caller-supplied [`RngCore`] + [`CryptoRng`] source; use
//! [`seeded_rng`] for reproducible runs.
//!
//! Modular exponentiations routed through [`mod_exp`] are counted per thread
//! so callers can check exact operation counts (see [`count_modexps`]).

use std::cell::Cell;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default Miller-Rabin round count (error bound 2^-128).
pub const DEFAULT_MR_ROUNDS: u32 = 64;

/// Default candidate budget for prime searches.
pub const DEFAULT_PRIME_BUDGET: usize = 1 << 20;

const TRIAL_DIVISION_LIMIT: u64 = 1 << 16;

thread_local! {
    static MODEXP_COUNT: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`mod_exp`] calls made on the current thread so far.
pub fn modexp_count() -> u64 {
    MODEXP_COUNT.with(Cell::get)
}

/// Runs `f` and returns its result along with the number of [`mod_exp`]
/// calls it made on this thread.
pub fn count_modexps<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = modexp_count();
    let out = f();
    (out, modexp_count() - before)
}

/// A modulus together with its minimal big-endian byte length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModulusCtx {
    n: BigUint,
    byte_len: usize,
}

impl ModulusCtx {
    pub fn new(n: BigUint) -> Result<Self> {
        if n < BigUint::from(15u32) || n.is_even() {
            return Err(Error::InvalidInput(format!(
                "modulus must be odd and at least 15, got {n}"
            )));
        }
        let byte_len = n.bits().div_ceil(8) as usize;
        Ok(ModulusCtx { n, byte_len })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn byte_len(&self) -> usize {
        self.byte_len
    }

    /// Fixed-width big-endian encoding of `x`, left-padded to `byte_len`.
    pub fn encode_fixed(&self, x: &BigUint) -> Vec<u8> {
        let raw = x.to_bytes_be();
        let mut out = vec![0u8; self.byte_len.saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }
}

/// `base^exp mod N` for a non-negative exponent.
pub fn mod_exp_unsigned(base: &BigUint, exp: &BigUint, ctx: &ModulusCtx) -> BigUint {
    MODEXP_COUNT.with(|c| c.set(c.get() + 1));
    base.modpow(exp, &ctx.n)
}

/// `base^exp mod N`. A negative exponent is evaluated as the inverse of
/// `base^|exp|`; the group order is never needed.
///
/// Fails with [`Error::NotInvertible`] carrying `gcd(base, N)` when the
/// exponent is negative and the base is not a unit. That gcd is a factor of N.
pub fn mod_exp(base: &BigUint, exp: &BigInt, ctx: &ModulusCtx) -> Result<BigUint> {
    let magnitude = exp.magnitude();
    if exp.sign() == Sign::Minus {
        let inv = mod_inverse(base, &ctx.n)?;
        Ok(mod_exp_unsigned(&inv, magnitude, ctx))
    } else {
        Ok(mod_exp_unsigned(base, magnitude, ctx))
    }
}

/// Inverse of `a` modulo `n`, or the offending gcd.
pub fn mod_inverse(a: &BigUint, n: &BigUint) -> Result<BigUint> {
    let a = BigInt::from(a % n);
    let n_signed = BigInt::from(n.clone());
    if a.is_zero() {
        return Err(Error::NotInvertible { gcd: n.clone() });
    }
    let (g, s, _) = ext_gcd(&a, &n_signed)?;
    if !g.is_one() {
        return Err(Error::NotInvertible {
            gcd: g.to_biguint().expect("gcd is positive"),
        });
    }
    Ok(s.mod_floor(&n_signed)
        .to_biguint()
        .expect("mod_floor of a positive modulus is non-negative"))
}

/// Extended Euclid: returns `(g, s, t)` with `g = gcd(a, b) > 0` and
/// `s*a + t*b = g`.
pub fn ext_gcd(a: &BigInt, b: &BigInt) -> Result<(BigInt, BigInt, BigInt)> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::InvalidInput("ext_gcd(0, 0) is undefined".into()));
    }
    let (mut old_r, mut r) = (a.clone(), b.clone());
    let (mut old_s, mut s) = (BigInt::one(), BigInt::zero());
    let (mut old_t, mut t) = (BigInt::zero(), BigInt::one());
    while !r.is_zero() {
        let (q, rem) = old_r.div_rem(&r);
        old_r = std::mem::replace(&mut r, rem);
        let next_s = &old_s - &q * &s;
        old_s = std::mem::replace(&mut s, next_s);
        let next_t = &old_t - &q * &t;
        old_t = std::mem::replace(&mut t, next_t);
    }
    if old_r.is_negative() {
        old_r = -old_r;
        old_s = -old_s;
        old_t = -old_t;
    }
    Ok((old_r, old_s, old_t))
}

/// Small odd primes used to sieve candidates before Miller-Rabin.
fn small_primes() -> &'static [u32] {
    static PRIMES: std::sync::OnceLock<Vec<u32>> = std::sync::OnceLock::new();
    PRIMES.get_or_init(|| {
        (3u32..2048)
            .step_by(2)
            .filter(|&c| {
                (3..)
                    .step_by(2)
                    .take_while(|d| d * d <= c)
                    .all(|d| c % d != 0)
            })
            .collect()
    })
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Probabilistic primality test.
///
/// Values below 2^16 are decided exactly by trial division. Larger values go
/// through small-prime trial division and then `rounds` Miller-Rabin rounds
/// (base 2 first, the rest drawn from a generator seeded by `n` so the
/// function stays pure).
pub fn is_probable_prime(n: &BigUint, rounds: u32) -> bool {
    if let Some(small) = n.to_u64() {
        if small < TRIAL_DIVISION_LIMIT {
            return is_prime_u64(small);
        }
    }
    if n.is_even() {
        return false;
    }
    for &p in small_primes() {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_one = n - &one;
    let twos = n_minus_one.trailing_zeros().expect("n > 1");
    let odd_part = &n_minus_one >> twos;

    let mut rng = ChaCha20Rng::from_seed(Sha256::digest(n.to_bytes_be()).into());
    let two = BigUint::from(2u32);
    let rounds = rounds.max(1);
    for round in 0..rounds {
        let base = if round == 0 {
            two.clone()
        } else {
            rng.gen_biguint_range(&two, &n_minus_one)
        };
        let mut x = base.modpow(&odd_part, n);
        if x == one || x == n_minus_one {
            continue;
        }
        let mut witness = true;
        for _ in 1..twos {
            x = &x * &x % n;
            if x == n_minus_one {
                witness = false;
                break;
            }
        }
        if witness {
            return false;
        }
    }
    true
}

/// Random integer with exactly `bits` bits, top and bottom bit set.
pub fn random_odd<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 1, "random_odd needs at least one bit");
    let mut x = rng.gen_biguint(bits);
    x.set_bit(bits - 1, true);
    x.set_bit(0, true);
    x
}

/// Uniformly sampled prime with exactly `bits` bits.
pub fn random_prime<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<BigUint> {
    random_prime_with_budget(bits, DEFAULT_PRIME_BUDGET, rng)
}

pub fn random_prime_with_budget<R: RngCore + CryptoRng + ?Sized>(
    bits: u64,
    budget: usize,
    rng: &mut R,
) -> Result<BigUint> {
    if bits < 2 {
        return Err(Error::InvalidInput("primes need at least 2 bits".into()));
    }
    for _ in 0..budget {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        if bits > 2 {
            candidate.set_bit(0, true);
        }
        if is_probable_prime(&candidate, DEFAULT_MR_ROUNDS) {
            return Ok(candidate);
        }
    }
    Err(Error::ExhaustedAttempts {
        what: "random prime",
        attempts: budget,
    })
}

/// Searches for a prime `r` of exactly `bits` bits such that
/// `2*multiplier*r + 1` is also prime, returning `(r, 2*multiplier*r + 1)`.
///
/// `accept` gets a final say on the pair (e.g. to pin the bit length of the
/// companion prime). With `multiplier = 1` this is a Sophie Germain search.
pub fn structured_prime_search<R, F>(
    bits: u64,
    multiplier: &BigUint,
    budget: usize,
    rng: &mut R,
    mut accept: F,
) -> Result<(BigUint, BigUint)>
where
    R: RngCore + CryptoRng + ?Sized,
    F: FnMut(&BigUint, &BigUint) -> bool,
{
    if bits < 2 {
        return Err(Error::InvalidInput("primes need at least 2 bits".into()));
    }
    let step = multiplier << 1u32;
    let sieve = bits > 16;
    // Residues of 2*multiplier modulo the sieve primes.
    let step_res: Vec<u64> = small_primes()
        .iter()
        .map(|&sp| (&step % sp).to_u64().unwrap_or(0))
        .collect();
    for _ in 0..budget {
        let mut r = rng.gen_biguint(bits);
        r.set_bit(bits - 1, true);
        if bits > 2 {
            r.set_bit(0, true);
        }
        if sieve {
            let mut rejected = false;
            for (&sp, &sr) in small_primes().iter().zip(&step_res) {
                let rr = (&r % sp).to_u64().unwrap_or(0);
                let companion = (sr * rr + 1) % u64::from(sp);
                if rr == 0 || companion == 0 {
                    rejected = true;
                    break;
                }
            }
            if rejected {
                continue;
            }
        }
        let companion = &step * &r + 1u32;
        if !accept(&r, &companion) {
            continue;
        }
        // Cheap single-round screens before the full test.
        if !is_probable_prime(&r, 1) || !is_probable_prime(&companion, 1) {
            continue;
        }
        if is_probable_prime(&r, DEFAULT_MR_ROUNDS)
            && is_probable_prime(&companion, DEFAULT_MR_ROUNDS)
        {
            return Ok((r, companion));
        }
    }
    Err(Error::ExhaustedAttempts {
        what: "structured prime search",
        attempts: budget,
    })
}

/// Safe prime `2r + 1` with exactly `bits` bits; returns `(r, 2r + 1)`.
pub fn random_safe_prime<R: RngCore + CryptoRng + ?Sized>(
    bits: u64,
    rng: &mut R,
) -> Result<(BigUint, BigUint)> {
    if bits < 3 {
        return Err(Error::InvalidInput(
            "safe primes need at least 3 bits".into(),
        ));
    }
    structured_prime_search(
        bits - 1,
        &BigUint::one(),
        DEFAULT_PRIME_BUDGET,
        rng,
        |_, _| true,
    )
}

/// Deterministic generator seeded from arbitrary bytes (hashed to 32 bytes).
pub fn seeded_rng(seed: &[u8]) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(Sha256::digest(seed).into())
}

/// Generator seeded from the operating system.
pub fn os_seeded_rng() -> ChaCha20Rng {
    ChaCha20Rng::from_entropy()
}

/// Canonical integer text form: lowercase hex, no leading zeros.
pub fn to_hex(x: &BigUint) -> String {
    x.to_str_radix(16)
}

/// Parses the canonical hex form, rejecting uppercase digits, signs,
/// prefixes and leading zeros.
pub fn from_hex(s: &str) -> Result<BigUint> {
    let ok = !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        && (s == "0" || !s.starts_with('0'));
    if !ok {
        return Err(Error::format(format!("not a canonical hex integer: {s:?}")));
    }
    BigUint::parse_bytes(s.as_bytes(), 16)
        .ok_or_else(|| Error::format(format!("not a canonical hex integer: {s:?}")))
}

/// Multiplicative order of `x` modulo `n` by repeated multiplication.
/// Only meant for toy moduli; returns `None` if `x` is not a unit or the
/// order exceeds `limit`.
pub fn brute_force_order(x: &BigUint, n: &BigUint, limit: u64) -> Option<u64> {
    let x = x % n;
    let one = BigUint::one();
    let mut acc = x.clone();
    for k in 1..=limit {
        if acc == one {
            return Some(k);
        }
        acc = &acc * &x % n;
    }
    None
}

/// `x` converted to a signed integer.
pub(crate) fn signed(x: &BigUint) -> BigInt {
    BigInt::from(x.clone())
}
