//! The two earlier exponentiation-based schemes, kept as attack targets.
//!
//! Fiat–Naor: the KGC keeps `g` secret and hands user `i` a prime `e_i` with
//! `d_i = g^(e_i)`. A group key is `d_i^(prod of the other e_j) = g^(prod e)`.
//!
//! Eskeland: `g` is public and the KGC keeps `u` and `phi(N)`. User `i` gets
//! `d_i = z_i*u + v_i*phi(N)` with `z_i = e_i mod phi(N)`. A group key is
//! `g^(d_i * prod of the other e_j) = g^(u * prod z)`.
//!
//! Both use `N = p*q` with safe primes so that an element of maximal order
//! (`lcm(p-1, q-1)`) is easy to certify.

use std::collections::BTreeSet;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::numt::{self, ModulusCtx};

const GENERATOR_BUDGET: usize = 1000;
const MIN_LEGACY_BITS: u64 = 12;

/// Modulus `N = p*q` with safe primes, plus an element of maximal order.
fn safe_modulus<R: RngCore + CryptoRng + ?Sized>(
    bits: u64,
    rng: &mut R,
) -> Result<(BigUint, BigUint, BigUint)> {
    if bits < MIN_LEGACY_BITS {
        return Err(Error::InvalidInput(format!(
            "legacy modulus needs at least {MIN_LEGACY_BITS} bits"
        )));
    }
    let p_bits = bits.div_ceil(2);
    let q_bits = bits - p_bits;
    for _ in 0..256 {
        let (_, p) = numt::random_safe_prime(p_bits, rng)?;
        let (_, q) = numt::random_safe_prime(q_bits, rng)?;
        if p != q && (&p * &q).bits() == bits {
            let g = maximal_order_element(&p, &q, rng)?;
            return Ok((p, q, g));
        }
    }
    Err(Error::ExhaustedAttempts {
        what: "legacy modulus",
        attempts: 256,
    })
}

/// Element that is a primitive root modulo both safe primes `p` and `q`.
fn maximal_order_element<R: RngCore + CryptoRng + ?Sized>(
    p: &BigUint,
    q: &BigUint,
    rng: &mut R,
) -> Result<BigUint> {
    let n = p * q;
    let primitive = |g: &BigUint, r: &BigUint| {
        let half = (r - 1u32) >> 1;
        !g.modpow(&BigUint::from(2u32), r).is_one() && !g.modpow(&half, r).is_one()
    };
    let two = BigUint::from(2u32);
    for _ in 0..GENERATOR_BUDGET {
        let g = rng.gen_biguint_range(&two, &(&n - 1u32));
        if g.gcd(&n).is_one() && primitive(&(&g % p), p) && primitive(&(&g % q), q) {
            return Ok(g);
        }
    }
    Err(Error::ExhaustedAttempts {
        what: "maximal-order element",
        attempts: GENERATOR_BUDGET,
    })
}

fn check_group(others: &[BigUint]) -> Result<()> {
    if others.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if others.iter().any(Zero::is_zero) {
        return Err(Error::InvalidInput("public keys must be positive".into()));
    }
    Ok(())
}

// ---- Fiat–Naor ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnParams {
    ctx: ModulusCtx,
    /// Master secret.
    pub g: BigUint,
}

impl FnParams {
    pub fn n(&self) -> &BigUint {
        self.ctx.modulus()
    }

    pub fn ctx(&self) -> &ModulusCtx {
        &self.ctx
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnKeyPair {
    /// The prime `y_i`.
    pub e: BigUint,
    /// `g^(y_i) mod N`.
    pub d: BigUint,
}

/// Fiat–Naor issuer. Tracks issued primes so each is used once.
#[derive(Debug, Clone)]
pub struct FnAuthority {
    params: FnParams,
    issued: BTreeSet<BigUint>,
}

pub fn fn_setup<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<FnAuthority> {
    let (p, q, g) = safe_modulus(bits, rng)?;
    FnAuthority::from_parts(p * q, g)
}

impl FnAuthority {
    pub fn from_parts(n: BigUint, g: BigUint) -> Result<Self> {
        let ctx = ModulusCtx::new(n)?;
        if !g.gcd(ctx.modulus()).is_one() || g <= BigUint::one() {
            return Err(Error::InvalidInput("g must be a unit other than 1".into()));
        }
        Ok(FnAuthority {
            params: FnParams { ctx, g },
            issued: BTreeSet::new(),
        })
    }

    pub fn params(&self) -> &FnParams {
        &self.params
    }

    /// Issues a fresh prime of `prime_bits` bits.
    pub fn keygen<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        prime_bits: u64,
        rng: &mut R,
    ) -> Result<FnKeyPair> {
        const ATTEMPTS: usize = 64;
        for _ in 0..ATTEMPTS {
            let y = numt::random_prime(prime_bits, rng)?;
            if self.issued.contains(&y) {
                continue;
            }
            if let Ok(pair) = self.keygen_with_prime(&y) {
                return Ok(pair);
            }
        }
        Err(Error::ExhaustedAttempts {
            what: "unused Fiat-Naor prime",
            attempts: ATTEMPTS,
        })
    }

    pub fn keygen_with_prime(&mut self, y: &BigUint) -> Result<FnKeyPair> {
        if !numt::is_probable_prime(y, numt::DEFAULT_MR_ROUNDS) {
            return Err(Error::InvalidInput("Fiat-Naor keys must be prime".into()));
        }
        if self.issued.contains(y) {
            return Err(Error::InvalidInput("prime already issued".into()));
        }
        let d = numt::mod_exp_unsigned(&self.params.g, y, &self.params.ctx);
        if d.is_one() {
            return Err(Error::DegenerateResult);
        }
        self.issued.insert(y.clone());
        Ok(FnKeyPair { e: y.clone(), d })
    }
}

/// `d^(prod others) mod N`, one exponentiation per public key.
pub fn fn_shared_key(ctx: &ModulusCtx, my: &FnKeyPair, others: &[BigUint]) -> Result<BigUint> {
    check_group(others)?;
    if others.contains(&my.e) {
        return Err(Error::SelfInGroup);
    }
    Ok(others
        .iter()
        .fold(my.d.clone(), |acc, e| numt::mod_exp_unsigned(&acc, e, ctx)))
}

/// `K_W' = K_W^(e_s) mod N`.
pub fn fn_join(ctx: &ModulusCtx, key: &BigUint, e_new: &BigUint) -> BigUint {
    numt::mod_exp_unsigned(key, e_new, ctx)
}

// ---- Eskeland ----

/// KGC-side Eskeland parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EskParams {
    ctx: ModulusCtx,
    pub g: BigUint,
    pub u: BigUint,
    pub phi: BigUint,
}

/// What every participant sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EskPublic {
    ctx: ModulusCtx,
    pub g: BigUint,
}

impl EskPublic {
    pub fn new(n: BigUint, g: BigUint) -> Result<Self> {
        Ok(EskPublic {
            ctx: ModulusCtx::new(n)?,
            g,
        })
    }

    pub fn n(&self) -> &BigUint {
        self.ctx.modulus()
    }

    pub fn ctx(&self) -> &ModulusCtx {
        &self.ctx
    }
}

impl EskParams {
    pub fn n(&self) -> &BigUint {
        self.ctx.modulus()
    }

    pub fn public(&self) -> EskPublic {
        EskPublic {
            ctx: self.ctx.clone(),
            g: self.g.clone(),
        }
    }

    /// `z = e mod phi(N)`.
    pub fn reduce(&self, e: &BigUint) -> BigUint {
        e % &self.phi
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EskKeyPair {
    pub e: BigUint,
    pub d: BigUint,
}

/// Eskeland issuer. `v` values are never reused.
#[derive(Debug, Clone)]
pub struct EskAuthority {
    params: EskParams,
    used_v: BTreeSet<BigUint>,
}

pub fn esk_setup<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<EskAuthority> {
    let (p, q, g) = safe_modulus(bits, rng)?;
    let phi = (&p - 1u32) * (&q - 1u32);
    let u = rng.gen_biguint_range(&BigUint::from(2u32), &phi);
    EskAuthority::from_parts(&p, &q, g, u)
}

impl EskAuthority {
    pub fn from_parts(p: &BigUint, q: &BigUint, g: BigUint, u: BigUint) -> Result<Self> {
        let ctx = ModulusCtx::new(p * q)?;
        let phi = (p - 1u32) * (q - 1u32);
        if !g.gcd(ctx.modulus()).is_one() {
            return Err(Error::InvalidInput("g must be a unit".into()));
        }
        if u <= BigUint::one() || u >= phi {
            return Err(Error::InvalidInput("u must lie in (1, phi(N))".into()));
        }
        Ok(EskAuthority {
            params: EskParams { ctx, g, u, phi },
            used_v: BTreeSet::new(),
        })
    }

    pub fn params(&self) -> &EskParams {
        &self.params
    }

    /// Private key for public key `e`, with a fresh `v` drawn from `[1, N)`.
    pub fn keygen<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        e: &BigUint,
        rng: &mut R,
    ) -> Result<EskKeyPair> {
        loop {
            let v = rng.gen_biguint_range(&BigUint::one(), self.params.n());
            if !self.used_v.contains(&v) {
                return self.keygen_with_v(e, &v);
            }
        }
    }

    pub fn keygen_with_v(&mut self, e: &BigUint, v: &BigUint) -> Result<EskKeyPair> {
        if *e < BigUint::from(2u32) {
            return Err(Error::InvalidInput(
                "Eskeland public keys must be >= 2".into(),
            ));
        }
        if v.is_zero() || self.used_v.contains(v) {
            return Err(Error::InvalidInput("v must be fresh and non-zero".into()));
        }
        let z = self.params.reduce(e);
        let d = z * &self.params.u + v * &self.params.phi;
        self.used_v.insert(v.clone());
        Ok(EskKeyPair { e: e.clone(), d })
    }
}

/// `g^(d * prod others) mod N`.
pub fn esk_shared_key(public: &EskPublic, my: &EskKeyPair, others: &[BigUint]) -> Result<BigUint> {
    check_group(others)?;
    let start = numt::mod_exp_unsigned(&public.g, &my.d, &public.ctx);
    Ok(others
        .iter()
        .fold(start, |acc, e| numt::mod_exp_unsigned(&acc, e, &public.ctx)))
}
