//! Collusion attacks built on Bézout coefficients.
//!
//! All attack functions take only what a coalition of users can see: public
//! parameters and the colluders' own key pairs. Equality against honest keys
//! is checked by callers.
//!
//! * Fiat–Naor: from `(a, g^a)` and `(b, g^b)` with `s*a + t*b = 1`, the
//!   coalition gets `g = (g^a)^s * (g^b)^t`, the master secret.
//! * Eskeland: with `a*e_i - b*e_j = 1`, `u' = a*d_i - b*d_j` is congruent to
//!   `u` modulo `phi(N)`, so `g^(u' * prod e)` is any group's key.
//! * [`proposed_scheme_attack_probe`] runs the same pipeline against keys of
//!   the structured-modulus scheme and reports what it obtains.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::kgc::KeyPair;
use crate::legacy::EskPublic;
use crate::nike::{self, GroupKey};
use crate::numt::{self, ModulusCtx};
use crate::params::PublicParams;

/// Result of combining two exponentiations with Bézout coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GcdPower {
    /// `gcd(a, b)`.
    pub gcd: BigUint,
    pub s: BigInt,
    pub t: BigInt,
    /// `g^gcd mod N`.
    pub value: BigUint,
}

/// Given `ga = g^a` and `gb = g^b`, computes `g^gcd(a, b)` without knowing
/// `g` or the group order.
pub fn recover_gcd_power(
    ctx: &ModulusCtx,
    a: &BigUint,
    ga: &BigUint,
    b: &BigUint,
    gb: &BigUint,
) -> Result<GcdPower> {
    let (g, s, t) = numt::ext_gcd(&numt::signed(a), &numt::signed(b))?;
    let left = numt::mod_exp(ga, &s, ctx)?;
    let right = numt::mod_exp(gb, &t, ctx)?;
    Ok(GcdPower {
        gcd: g.to_biguint().expect("gcd is positive"),
        s,
        t,
        value: left * right % ctx.modulus(),
    })
}

/// Recovers the Fiat–Naor master generator from two colluders' pairs.
///
/// Fails with [`Error::NotCoprime`] when `gcd(a, b) != 1`; use
/// [`recover_gcd_power`] to get `g^gcd` in that case.
pub fn fiat_naor_recover_g(
    ctx: &ModulusCtx,
    a: &BigUint,
    ga: &BigUint,
    b: &BigUint,
    gb: &BigUint,
) -> Result<BigUint> {
    let gcd = a.gcd(b);
    if !gcd.is_one() {
        return Err(Error::NotCoprime { gcd });
    }
    Ok(recover_gcd_power(ctx, a, ga, b, gb)?.value)
}

/// `u'` together with the coefficients that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredExponent {
    /// `a > 0` with `a*e_i - b*e_j = 1`.
    pub a: BigInt,
    pub b: BigInt,
    /// `a*d_i - b*d_j`, congruent to `u` modulo `phi(N)`.
    pub u_prime: BigInt,
}

/// Coefficients `(a, b)` with `a*x - b*y = 1` and `a > 0`.
pub fn positive_bezout(x: &BigUint, y: &BigUint) -> Result<(BigInt, BigInt)> {
    let (x, y) = (numt::signed(x), numt::signed(y));
    let (g, s, t) = numt::ext_gcd(&x, &y)?;
    if !g.is_one() {
        return Err(Error::NotCoprime {
            gcd: g.to_biguint().expect("gcd is positive"),
        });
    }
    let (mut a, mut b) = (s, -t);
    if !a.is_positive() {
        // a + k*y > 0 with k = floor(-a / y) + 1
        let k = (-&a).div_floor(&y) + 1;
        a += &k * &y;
        b += &k * &x;
    }
    Ok((a, b))
}

/// Recovers an exponent equivalent to the Eskeland master secret `u`.
pub fn eskeland_recover_u(
    e_i: &BigUint,
    d_i: &BigUint,
    e_j: &BigUint,
    d_j: &BigUint,
) -> Result<RecoveredExponent> {
    let (a, b) = positive_bezout(e_i, e_j)?;
    let u_prime = &a * numt::signed(d_i) - &b * numt::signed(d_j);
    Ok(RecoveredExponent { a, b, u_prime })
}

/// `g^(u' * prod target) mod N`, the Eskeland key of the target group.
pub fn eskeland_forge_group_key(
    public: &EskPublic,
    u_prime: &BigInt,
    target: &[BigUint],
) -> Result<BigUint> {
    let start = numt::mod_exp(&public.g, u_prime, public.ctx())?;
    Ok(target.iter().fold(start, |acc, e| {
        numt::mod_exp_unsigned(&acc, e, public.ctx())
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    FiatNaor,
    Eskeland,
    Proposed,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::FiatNaor => "fiat-naor",
            Scheme::Eskeland => "eskeland",
            Scheme::Proposed => "proposed",
        })
    }
}

/// Two colluders' `(e, d)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollusionPair {
    pub pair_a: (BigUint, BigUint),
    pub pair_b: (BigUint, BigUint),
    pub scheme: Scheme,
}

impl CollusionPair {
    /// Both legacy attacks need coprime public keys; this is checked here.
    pub fn new(
        scheme: Scheme,
        pair_a: (BigUint, BigUint),
        pair_b: (BigUint, BigUint),
    ) -> Result<Self> {
        let gcd = pair_a.0.gcd(&pair_b.0);
        if scheme != Scheme::Proposed && !gcd.is_one() {
            return Err(Error::NotCoprime { gcd });
        }
        Ok(CollusionPair {
            pair_a,
            pair_b,
            scheme,
        })
    }

    pub fn recover_fiat_naor(&self, ctx: &ModulusCtx) -> Result<BigUint> {
        fiat_naor_recover_g(
            ctx,
            &self.pair_a.0,
            &self.pair_a.1,
            &self.pair_b.0,
            &self.pair_b.1,
        )
    }

    pub fn recover_eskeland(&self) -> Result<RecoveredExponent> {
        eskeland_recover_u(
            &self.pair_a.0,
            &self.pair_a.1,
            &self.pair_b.0,
            &self.pair_b.1,
        )
    }
}

/// What the Bézout pipeline yields against the structured-modulus scheme.
#[derive(Clone, PartialEq, Eq)]
pub struct ProbeReport {
    /// Colluders' public keys, in input order.
    pub colluders: Vec<BigUint>,
    /// Coefficients `c_k` with `sum c_k * e_k = combined_e`.
    pub coefficients: Vec<BigInt>,
    /// `gcd` of the colluders' public keys.
    pub combined_e: BigUint,
    /// `prod d_k^(c_k) mod N`.
    pub combined_d: BigUint,
    /// `combined_d^(e_k / combined_e) == d_k` for every colluder. Checkable
    /// without any secret.
    pub root_consistent: bool,
    /// `combined_d^(prod target / combined_e)`, when the division is exact.
    pub forged_element: Option<BigUint>,
    pub forged_key: Option<GroupKey>,
}

impl ProbeReport {
    /// Whether the forged key equals `honest`.
    pub fn reproduces(&self, honest: &GroupKey) -> bool {
        self.forged_key.as_ref() == Some(honest)
    }
}

impl fmt::Debug for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProbeReport")
            .field("colluders", &self.colluders.len())
            .field("combined_e", &numt::to_hex(&self.combined_e))
            .field("root_consistent", &self.root_consistent)
            .field("forged", &self.forged_key.is_some())
            .finish_non_exhaustive()
    }
}

/// Runs the Euclid pipeline on colluders' pairs of the structured scheme and
/// tries to derive the key of the `target` group from the result.
///
/// Needs at least two pairs.
pub fn proposed_scheme_attack_probe(
    pp: &PublicParams,
    pairs: &[KeyPair],
    target: &[BigUint],
) -> Result<ProbeReport> {
    if pairs.len() < 2 {
        return Err(Error::InvalidInput(
            "the probe needs at least two key pairs".into(),
        ));
    }
    let ctx = pp.ctx();

    // Fold gcd(e_1, ..., e_k) while tracking a coefficient per pair.
    let mut combined = numt::signed(&pairs[0].e);
    let mut coefficients = vec![BigInt::one()];
    for pair in &pairs[1..] {
        let (g, s, t) = numt::ext_gcd(&combined, &numt::signed(&pair.e))?;
        for c in coefficients.iter_mut() {
            *c *= &s;
        }
        coefficients.push(t);
        combined = g;
    }
    let combined_e = combined.to_biguint().expect("gcd is positive");

    let mut combined_d = BigUint::one();
    for (pair, c) in pairs.iter().zip(&coefficients) {
        let term = numt::mod_exp(&pair.d, c, ctx)?;
        combined_d = combined_d * term % ctx.modulus();
    }

    let root_consistent = pairs.iter().all(|pair| {
        let (quot, rem) = pair.e.div_rem(&combined_e);
        rem.is_zero() && numt::mod_exp_unsigned(&combined_d, &quot, ctx) == pair.d
    });

    let (forged_element, forged_key) = if target.is_empty() {
        (None, None)
    } else {
        let product: BigUint = target.iter().product();
        let (quot, rem) = product.div_rem(&combined_e);
        if rem.is_zero() {
            let f = numt::mod_exp_unsigned(&combined_d, &quot, ctx);
            match nike::kdf(pp, &f) {
                Ok(k) => (Some(f), Some(k)),
                Err(_) => (Some(f), None),
            }
        } else {
            (None, None)
        }
    };

    Ok(ProbeReport {
        colluders: pairs.iter().map(|p| p.e.clone()).collect(),
        coefficients,
        combined_e,
        combined_d,
        root_consistent,
        forged_element,
        forged_key,
    })
}

/// Ordered key/value transcript of an attack run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<(String, String)>,
}

impl Transcript {
    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_int(&mut self, key: impl Into<String>, value: &BigUint) -> &mut Self {
        self.push(key, numt::to_hex(value))
    }

    pub fn push_signed(&mut self, key: impl Into<String>, value: &BigInt) -> &mut Self {
        let text = match value.sign() {
            Sign::Minus => format!("-{}", numt::to_hex(value.magnitude())),
            _ => numt::to_hex(value.magnitude()),
        };
        self.push(key, text)
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// One `key=value` per line.
    pub fn to_records(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Aligned `key : value` lines.
    pub fn to_text(&self) -> String {
        let width = self.entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        self.entries
            .iter()
            .map(|(k, v)| format!("{k:<width$} : {v}\n"))
            .collect()
    }
}
