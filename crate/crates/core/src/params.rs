//! Public parameters and the KGC master secret.
//!
//! The modulus is `N = p'q'` with `p' = 2pz + 1` and `q' = 2q + 1`, where
//! `p`, `z`, `q`, `p'` and `q'` are all prime. The unit group then has order
//! `4pzq` and contains a cyclic subgroup of order `pzq`. The KGC keeps a
//! generator `g` of that subgroup private and publishes `g_p = g^p`, which
//! generates the order-`zq` subgroup.
//!
//! Bit allocation: `p`, `z` and `q` get (roughly) equal sizes, with `q'` the
//! smaller prime factor and `bitlen(N)` equal to the requested modulus size.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::One;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kv::{KvDoc, KvWriter};
use crate::numt::{self, ModulusCtx, DEFAULT_MR_ROUNDS};

pub const PARAMS_VERSION: u32 = 1;

/// Samples drawn by [`find_generator`] before giving up.
pub const GENERATOR_BUDGET: usize = 1000;

const SETUP_OUTER_ATTEMPTS: usize = 256;
const MIN_TOY_BITS: u64 = 16;
const MAX_TOY_BITS: u64 = 4096;
const DEFAULT_LAMBDA: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecurityLevel {
    /// Small parameters for brute-force checks. Not secure.
    Toy {
        modulus_bits: u64,
    },
    Bits80,
    Bits112,
    Bits128,
}

impl SecurityLevel {
    pub fn modulus_bits(&self) -> u64 {
        match self {
            SecurityLevel::Toy { modulus_bits } => *modulus_bits,
            SecurityLevel::Bits80 => 1024,
            SecurityLevel::Bits112 => 2048,
            SecurityLevel::Bits128 => 3072,
        }
    }

    /// Output length of the key-derivation hash, in bits.
    pub fn lambda(&self) -> u32 {
        DEFAULT_LAMBDA
    }

    /// Label stored in parameter files.
    pub fn gamma(&self) -> &'static str {
        match self {
            SecurityLevel::Toy { .. } => "toy",
            SecurityLevel::Bits80 => "80",
            SecurityLevel::Bits112 => "112",
            SecurityLevel::Bits128 => "128",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SecurityLevel::Toy { modulus_bits } = self {
            if !(MIN_TOY_BITS..=MAX_TOY_BITS).contains(modulus_bits) {
                return Err(Error::InvalidLevel(format!(
                    "toy modulus must be {MIN_TOY_BITS}..={MAX_TOY_BITS} bits, got {modulus_bits}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SecurityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SecurityLevel::Toy { modulus_bits } => write!(f, "toy:{modulus_bits}"),
            other => f.write_str(other.gamma()),
        }
    }
}

/// Accepts `80`, `112`, `128`, `toy` (16-bit modulus) and `toy:<bits>`.
impl FromStr for SecurityLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let level = match s {
            "80" => SecurityLevel::Bits80,
            "112" => SecurityLevel::Bits112,
            "128" => SecurityLevel::Bits128,
            "toy" => SecurityLevel::Toy {
                modulus_bits: MIN_TOY_BITS,
            },
            other => {
                let bits = other
                    .strip_prefix("toy:")
                    .and_then(|b| b.parse().ok())
                    .ok_or_else(|| Error::InvalidLevel(other.to_string()))?;
                SecurityLevel::Toy { modulus_bits: bits }
            }
        };
        level.validate()?;
        Ok(level)
    }
}

/// Hash used for key derivation and parameter digests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashId {
    Sha256,
}

impl HashId {
    pub fn as_str(&self) -> &'static str {
        match self {
            HashId::Sha256 => "sha256",
        }
    }

    pub fn output_bits(&self) -> u32 {
        256
    }

    pub(crate) fn digest(&self, parts: &[&[u8]]) -> Vec<u8> {
        match self {
            HashId::Sha256 => {
                let mut h = Sha256::new();
                for part in parts {
                    h.update(part);
                }
                h.finalize().to_vec()
            }
        }
    }
}

impl FromStr for HashId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sha256" => Ok(HashId::Sha256),
            other => Err(Error::format(format!("unsupported hash {other:?}"))),
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct MasterSecret {
    pub p: BigUint,
    pub z: BigUint,
    pub q: BigUint,
    /// Generator of the order-`pzq` subgroup. Never published.
    pub g: BigUint,
    pub p_prime: BigUint,
    pub q_prime: BigUint,
}

impl MasterSecret {
    /// `pzq`, the order of `g`.
    pub fn subgroup_order(&self) -> BigUint {
        &self.p * &self.z * &self.q
    }

    pub fn zq(&self) -> BigUint {
        &self.z * &self.q
    }
}

impl fmt::Debug for MasterSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MasterSecret(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicParams {
    pub gamma: String,
    ctx: ModulusCtx,
    pub g_p: BigUint,
    pub hash_id: HashId,
    pub lambda: u32,
    /// Bit length of `pzq`.
    pub m: u64,
}

impl PublicParams {
    pub fn new(
        gamma: impl Into<String>,
        n: BigUint,
        g_p: BigUint,
        hash_id: HashId,
        lambda: u32,
        m: u64,
    ) -> Result<Self> {
        let ctx = ModulusCtx::new(n)?;
        if g_p < BigUint::from(2u32) || &g_p >= ctx.modulus() {
            return Err(Error::InvalidInput("g_p must lie in [2, N)".into()));
        }
        if lambda == 0 || !lambda.is_multiple_of(8) || lambda > hash_id.output_bits() {
            return Err(Error::InvalidInput(format!("unsupported lambda {lambda}")));
        }
        if m < 2 {
            return Err(Error::InvalidInput("m must be at least 2".into()));
        }
        Ok(PublicParams {
            gamma: gamma.into(),
            ctx,
            g_p,
            hash_id,
            lambda,
            m,
        })
    }

    pub fn n(&self) -> &BigUint {
        self.ctx.modulus()
    }

    pub fn ctx(&self) -> &ModulusCtx {
        &self.ctx
    }

    /// Bit length of the exponents `y` and `k` drawn at issuance.
    pub fn half_m(&self) -> u64 {
        self.m.div_ceil(2)
    }

    /// Canonical text form; this exact byte string is what gets digested.
    pub fn to_text(&self) -> String {
        let mut w = KvWriter::default();
        self.write_fields(&mut w);
        w.finish()
    }

    fn write_fields(&self, w: &mut KvWriter) {
        w.put("version", PARAMS_VERSION)
            .put("gamma", &self.gamma)
            .put_int("N", self.n())
            .put_int("g_p", &self.g_p)
            .put("hash_id", self.hash_id.as_str())
            .put("lambda", self.lambda)
            .put("m", self.m);
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut doc = KvDoc::parse(text)?;
        let pp = Self::take_fields(&mut doc)?;
        doc.finish()?;
        Ok(pp)
    }

    fn take_fields(doc: &mut KvDoc) -> Result<Self> {
        let version: u32 = doc.take_parsed("version")?;
        if version != PARAMS_VERSION {
            return Err(Error::format(format!(
                "unsupported params version {version}"
            )));
        }
        let gamma = doc.take("gamma")?;
        if !["toy", "80", "112", "128"].contains(&gamma.as_str()) {
            return Err(Error::format(format!("unknown gamma {gamma:?}")));
        }
        let n = doc.take_int("N")?;
        let g_p = doc.take_int("g_p")?;
        let hash_id: HashId = doc.take("hash_id")?.parse()?;
        let lambda = doc.take_parsed("lambda")?;
        let m = doc.take_parsed("m")?;
        PublicParams::new(gamma, n, g_p, hash_id, lambda, m)
            .map_err(|e| Error::format(format!("invalid parameters: {e}")))
    }

    /// `lambda`-bit digest of the canonical parameter text.
    pub fn digest(&self) -> Vec<u8> {
        let mut d = self.hash_id.digest(&[self.to_text().as_bytes()]);
        d.truncate(self.lambda as usize / 8);
        d
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }

    /// Fails with [`Error::ParamsMismatch`] unless `digest_hex` names these
    /// parameters.
    pub fn check_digest(&self, digest_hex: &str) -> Result<()> {
        let expected = self.digest_hex();
        if expected != digest_hex {
            return Err(Error::ParamsMismatch {
                expected,
                found: digest_hex.to_string(),
            });
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Master-secret file: the public fields followed by the secret ones.
pub fn master_secret_to_text(pp: &PublicParams, msk: &MasterSecret) -> String {
    let mut w = KvWriter::default();
    pp.write_fields(&mut w);
    w.put_int("p", &msk.p)
        .put_int("z", &msk.z)
        .put_int("q", &msk.q)
        .put_int("g", &msk.g)
        .put_int("p_prime", &msk.p_prime)
        .put_int("q_prime", &msk.q_prime);
    w.finish()
}

pub fn master_secret_from_text(text: &str) -> Result<(PublicParams, MasterSecret)> {
    let mut doc = KvDoc::parse(text)?;
    let pp = PublicParams::take_fields(&mut doc)?;
    let msk = MasterSecret {
        p: doc.take_int("p")?,
        z: doc.take_int("z")?,
        q: doc.take_int("q")?,
        g: doc.take_int("g")?,
        p_prime: doc.take_int("p_prime")?,
        q_prime: doc.take_int("q_prime")?,
    };
    doc.finish()?;
    Ok((pp, msk))
}

/// Writes the master-secret file, owner-readable only on Unix.
pub fn save_master_secret(
    path: impl AsRef<Path>,
    pp: &PublicParams,
    msk: &MasterSecret,
) -> Result<()> {
    write_owner_only(path.as_ref(), &master_secret_to_text(pp, msk))
}

/// Writes `contents` with mode 0600 on unix, also when the file existed.
pub(crate) fn write_owner_only(path: &Path, contents: &str) -> Result<()> {
    use std::io::Write;

    let mut opts = std::fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut file = opts.open(path)?;
    #[cfg(unix)]
    {
        // mode() only applies on creation.
        use std::os::unix::fs::PermissionsExt;
        file.set_permissions(std::fs::Permissions::from_mode(0o600))?;
    }
    file.write_all(contents.as_bytes())?;
    Ok(())
}

pub fn load_master_secret(path: impl AsRef<Path>) -> Result<(PublicParams, MasterSecret)> {
    master_secret_from_text(&std::fs::read_to_string(path)?)
}

/// Bit sizes `(p, z, q)` for a modulus of `modulus_bits` bits.
///
/// `q` gets `floor((bits - 2) / 6) * 2` bits; `p` and `z` split what is left
/// so that `bitlen(p') + bitlen(q') = bits`.
pub fn bit_allocation(modulus_bits: u64) -> (u64, u64, u64) {
    let q_bits = (modulus_bits - 2) / 6 * 2;
    let p_prime_bits = modulus_bits - (q_bits + 1);
    let pz_bits = p_prime_bits - 1;
    let p_bits = pz_bits.div_ceil(2);
    (p_bits, pz_bits - p_bits, q_bits)
}

/// `(p, z, q)` sizes tried by [`setup`]: [`bit_allocation`] first, then
/// splits with `q` one or two bits shorter or longer. Some small moduli
/// (18 bits, for one) have no solution under the primary split.
fn allocation_candidates(modulus_bits: u64) -> Vec<(u64, u64, u64)> {
    let (p_bits, z_bits, q_bits) = bit_allocation(modulus_bits);
    let mut out = vec![(p_bits, z_bits, q_bits)];
    for delta in [-1i64, 1, -2, 2] {
        let q = q_bits as i64 + delta;
        let pz = modulus_bits as i64 - (q + 1) - 1;
        let p = (pz + 1) / 2;
        if q >= 2 && pz - p >= 2 {
            out.push((p as u64, (pz - p) as u64, q as u64));
        }
    }
    out
}

/// Generates fresh parameters for `level`.
pub fn setup<R: RngCore + CryptoRng + ?Sized>(
    level: SecurityLevel,
    rng: &mut R,
) -> Result<(PublicParams, MasterSecret)> {
    level.validate()?;
    let bits = level.modulus_bits();
    for allocation in allocation_candidates(bits) {
        match setup_with_allocation(level, allocation, rng) {
            Err(Error::ExhaustedAttempts { .. }) => continue,
            other => return other,
        }
    }
    Err(Error::ExhaustedAttempts {
        what: "structured modulus",
        attempts: SETUP_OUTER_ATTEMPTS,
    })
}

fn setup_with_allocation<R: RngCore + CryptoRng + ?Sized>(
    level: SecurityLevel,
    (p_bits, z_bits, q_bits): (u64, u64, u64),
    rng: &mut R,
) -> Result<(PublicParams, MasterSecret)> {
    let bits = level.modulus_bits();
    let p_prime_bits = p_bits + z_bits + 1;
    let inner_budget = (16 * z_bits * p_prime_bits).max(4096) as usize;

    for _ in 0..SETUP_OUTER_ATTEMPTS {
        let (q, q_prime) = numt::structured_prime_search(
            q_bits,
            &BigUint::one(),
            numt::DEFAULT_PRIME_BUDGET,
            rng,
            |_, _| true,
        )?;
        let p = numt::random_prime(p_bits, rng)?;
        if p == q {
            continue;
        }
        // A small p leaves almost no z that reaches the target bit lengths;
        // at real sizes insist on the second-highest bit and drop hopeless p.
        if p_bits >= 16 && !p.bit(p_bits - 2) {
            continue;
        }
        let max_p_prime = ((&p * ((BigUint::one() << z_bits) - 1u32)) << 1u32) + 1u32;
        if max_p_prime.bits() < p_prime_bits || (&max_p_prime * &q_prime).bits() < bits {
            continue;
        }
        let found = numt::structured_prime_search(z_bits, &p, inner_budget, rng, |z, pp| {
            z != &p && z != &q && pp.bits() == p_prime_bits && (pp * &q_prime).bits() == bits
        });
        let (z, p_prime) = match found {
            Ok(pair) => pair,
            Err(Error::ExhaustedAttempts { .. }) => continue,
            Err(e) => return Err(e),
        };
        return assemble(
            level.gamma(),
            level.lambda(),
            p,
            z,
            q,
            p_prime,
            q_prime,
            rng,
        );
    }
    Err(Error::ExhaustedAttempts {
        what: "structured modulus",
        attempts: SETUP_OUTER_ATTEMPTS,
    })
}

/// Toy setup from caller-chosen `(p, z, q)`.
pub fn setup_with_primes<R: RngCore + CryptoRng + ?Sized>(
    p: &BigUint,
    z: &BigUint,
    q: &BigUint,
    rng: &mut R,
) -> Result<(PublicParams, MasterSecret)> {
    for (name, v) in [("p", p), ("z", z), ("q", q)] {
        if v.is_even() || !numt::is_probable_prime(v, DEFAULT_MR_ROUNDS) {
            return Err(Error::InvalidInput(format!("{name} must be an odd prime")));
        }
    }
    if p == z || p == q || z == q {
        return Err(Error::InvalidInput(
            "p, z and q must be pairwise distinct".into(),
        ));
    }
    let p_prime = ((p * z) << 1u32) + 1u32;
    let q_prime = (q << 1u32) + 1u32;
    if !numt::is_probable_prime(&p_prime, DEFAULT_MR_ROUNDS) {
        return Err(Error::InvalidInput("2pz+1 is not prime".into()));
    }
    if !numt::is_probable_prime(&q_prime, DEFAULT_MR_ROUNDS) {
        return Err(Error::InvalidInput("2q+1 is not prime".into()));
    }
    assemble(
        "toy",
        DEFAULT_LAMBDA,
        p.clone(),
        z.clone(),
        q.clone(),
        p_prime,
        q_prime,
        rng,
    )
}

#[allow(clippy::too_many_arguments)]
fn assemble<R: RngCore + CryptoRng + ?Sized>(
    gamma: &str,
    lambda: u32,
    p: BigUint,
    z: BigUint,
    q: BigUint,
    p_prime: BigUint,
    q_prime: BigUint,
    rng: &mut R,
) -> Result<(PublicParams, MasterSecret)> {
    let n = &p_prime * &q_prime;
    let g = find_generator(&p, &z, &q, &n, rng)?;
    let g_p = g.modpow(&p, &n);
    let m = (&p * &z * &q).bits();
    let pp = PublicParams::new(gamma, n, g_p, HashId::Sha256, lambda, m)?;
    let msk = MasterSecret {
        p,
        z,
        q,
        g,
        p_prime,
        q_prime,
    };
    Ok((pp, msk))
}

/// Picks an element of order exactly `pzq` modulo `N = (2pz+1)(2q+1)`.
///
/// Squares-of-squares `x^4` land in the order-`pzq` subgroup; a candidate is
/// kept once none of `c^(pzq/p)`, `c^(pzq/z)`, `c^(pzq/q)` is 1.
pub fn find_generator<R: RngCore + CryptoRng + ?Sized>(
    p: &BigUint,
    z: &BigUint,
    q: &BigUint,
    n: &BigUint,
    rng: &mut R,
) -> Result<BigUint> {
    let order = p * z * q;
    let cofactors = [&order / p, &order / z, &order / q];
    let two = BigUint::from(2u32);
    let four = BigUint::from(4u32);
    let upper = n - 1u32;
    for _ in 0..GENERATOR_BUDGET {
        let x = rng.gen_biguint_range(&two, &upper);
        if !x.gcd(n).is_one() {
            continue;
        }
        let c = x.modpow(&four, n);
        if cofactors.iter().all(|cf| !c.modpow(cf, n).is_one()) {
            return Ok(c);
        }
    }
    Err(Error::ExhaustedAttempts {
        what: "subgroup generator",
        attempts: GENERATOR_BUDGET,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name)
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        self.checks
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.passed)
    }
}

/// Re-checks every structural invariant of a parameter set.
pub fn validate(pp: &PublicParams, msk: &MasterSecret) -> ValidationReport {
    let n = pp.n();
    let one = BigUint::one();
    let prime = |x: &BigUint| numt::is_probable_prime(x, DEFAULT_MR_ROUNDS);
    let order = msk.subgroup_order();
    let zq = msk.zq();
    let nonzero_primes = [&msk.p, &msk.z, &msk.q].iter().all(|v| v.bits() > 1);

    let mut checks = Vec::new();
    let mut push = |name, passed| checks.push(Check { name, passed });

    push(
        "p_prime_is_2pz_plus_1",
        msk.p_prime == ((&msk.p * &msk.z) << 1u32) + 1u32,
    );
    push(
        "q_prime_is_2q_plus_1",
        msk.q_prime == (&msk.q << 1u32) + 1u32,
    );
    push(
        "modulus_is_p_prime_times_q_prime",
        *n == &msk.p_prime * &msk.q_prime,
    );
    push("p_is_prime", prime(&msk.p));
    push("z_is_prime", prime(&msk.z));
    push("q_is_prime", prime(&msk.q));
    push("p_prime_is_prime", prime(&msk.p_prime));
    push("q_prime_is_prime", prime(&msk.q_prime));
    push(
        "p_z_q_distinct",
        msk.p != msk.z && msk.p != msk.q && msk.z != msk.q,
    );

    let g_ok = nonzero_primes
        && msk.g > one
        && &msk.g < n
        && msk.g.modpow(&order, n).is_one()
        && [&msk.p, &msk.z, &msk.q]
            .iter()
            .all(|f| !msk.g.modpow(&(&order / *f), n).is_one());
    push("g_has_order_pzq", g_ok);
    push("g_p_is_g_to_the_p", pp.g_p == msk.g.modpow(&msk.p, n));

    let gp_ok = nonzero_primes
        && !pp.g_p.is_one()
        && pp.g_p.modpow(&zq, n).is_one()
        && !pp.g_p.modpow(&msk.z, n).is_one()
        && !pp.g_p.modpow(&msk.q, n).is_one();
    push("g_p_has_order_zq", gp_ok);

    let bit_sum = msk.p.bits() + msk.z.bits() + msk.q.bits();
    push(
        "m_consistent",
        pp.m == order.bits() && pp.m + 2 >= bit_sum && pp.m <= bit_sum + 2,
    );
    push(
        "lambda_supported",
        pp.lambda.is_multiple_of(8) && pp.lambda <= pp.hash_id.output_bits(),
    );

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    // All element orders modulo n, by repeated multiplication.
    fn unit_orders(n: u64) -> Vec<(u64, u64)> {
        (1..n)
            .filter(|x| num_integer::gcd(*x, n) == 1)
            .map(|x| {
                let mut acc = x;
                let mut k = 1;
                while acc != 1 {
                    acc = acc * x % n;
                    k += 1;
                }
                (x, k)
            })
            .collect()
    }

    #[test]
    fn bit_allocation_sums_to_modulus() {
        for bits in [16u64, 17, 32, 64, 100, 512, 1024, 2048, 3072] {
            let (p, z, q) = bit_allocation(bits);
            assert_eq!((p + z + 1) + (q + 1), bits, "bits = {bits}");
            assert!(q < p + z + 1);
        }
        assert_eq!(bit_allocation(1024), (341, 341, 340));
        for bits in 16u64..=200 {
            for (p, z, q) in allocation_candidates(bits) {
                assert_eq!((p + z + 1) + (q + 1), bits, "bits = {bits}");
            }
        }
    }

    #[test]
    fn every_small_size_has_parameters() {
        // 18 bits has no solution under the primary split.
        let mut rng = numt::seeded_rng(b"sizes");
        for bits in 16u64..=40 {
            let (pp, msk) = setup(SecurityLevel::Toy { modulus_bits: bits }, &mut rng).unwrap();
            assert_eq!(pp.n().bits(), bits);
            assert!(validate(&pp, &msk).all_passed(), "bits = {bits}");
        }
    }

    #[test]
    fn level_parsing() {
        assert_eq!(
            "80".parse::<SecurityLevel>().unwrap(),
            SecurityLevel::Bits80
        );
        assert_eq!(
            "toy:24".parse::<SecurityLevel>().unwrap(),
            SecurityLevel::Toy { modulus_bits: 24 }
        );
        assert!("toy:8".parse::<SecurityLevel>().is_err());
        assert!("96".parse::<SecurityLevel>().is_err());
        let mut rng = numt::seeded_rng(b"x");
        assert!(matches!(
            setup(SecurityLevel::Toy { modulus_bits: 4 }, &mut rng),
            Err(Error::InvalidLevel(_))
        ));
    }

    #[test]
    fn toy_setup_structure_and_orders() {
        for seed in 0u8..8 {
            let mut rng = numt::seeded_rng(&[seed]);
            let (pp, msk) = setup(SecurityLevel::Toy { modulus_bits: 20 }, &mut rng).unwrap();
            assert_eq!(pp.n().bits(), 20);
            assert!(validate(&pp, &msk).all_passed());
            let n = pp.n().to_u64().unwrap();
            let order = msk.subgroup_order().to_u64().unwrap();
            let zq = msk.zq().to_u64().unwrap();
            assert_eq!(numt::brute_force_order(&msk.g, pp.n(), n), Some(order));
            assert_eq!(numt::brute_force_order(&pp.g_p, pp.n(), n), Some(zq));
        }
    }

    #[test]
    fn smallest_toy_level() {
        let mut rng = numt::seeded_rng(b"toy16");
        let (pp, msk) = setup(SecurityLevel::Toy { modulus_bits: 16 }, &mut rng).unwrap();
        assert_eq!(pp.n().bits(), 16);
        assert!(validate(&pp, &msk).all_passed());
    }

    #[test]
    fn forced_primes_match_exhaustive_orders() {
        // p=3, z=5, q=11: p' = 31, q' = 23, N = 713, phi = 660 = 4 * 165.
        let mut rng = numt::seeded_rng(b"forced");
        let (pp, msk) = setup_with_primes(&big(3), &big(5), &big(11), &mut rng).unwrap();
        assert_eq!(pp.n(), &big(713));
        assert_eq!(30 * 22, 660);
        assert_eq!(pp.m, 8);

        let orders = unit_orders(713);
        assert_eq!(orders.len(), 660);
        let g = msk.g.to_u64().unwrap();
        let g_order = orders.iter().find(|(x, _)| *x == g).unwrap().1;
        assert_eq!(g_order, 165);
        let g_p = pp.g_p.to_u64().unwrap();
        assert_eq!(orders.iter().find(|(x, _)| *x == g_p).unwrap().1, 55);
        assert!(validate(&pp, &msk).all_passed());
    }

    #[test]
    fn coinciding_z_and_q_rejected() {
        // With z = q = 5 the 5-part of the unit group mod 341 is not cyclic,
        // so no element of order pzq = 75 exists.
        let max = unit_orders(341).iter().map(|&(_, k)| k).max().unwrap();
        assert_eq!(max, 30);
        let mut rng = numt::seeded_rng(b"x");
        assert!(setup_with_primes(&big(3), &big(5), &big(5), &mut rng).is_err());
        assert!(setup_with_primes(&big(3), &big(5), &big(13), &mut rng).is_err());
    }

    #[test]
    fn generator_output_has_full_order() {
        let mut rng = numt::seeded_rng(b"gen");
        for _ in 0..50 {
            let g = find_generator(&big(3), &big(5), &big(11), &big(713), &mut rng).unwrap();
            assert!(g.modpow(&big(165), &big(713)).is_one());
            assert_eq!(numt::brute_force_order(&g, &big(713), 1000), Some(165));
        }
    }

    #[test]
    fn validate_catches_tampering() {
        let mut rng = numt::seeded_rng(b"tamper");
        let (pp, msk) = setup(SecurityLevel::Toy { modulus_bits: 24 }, &mut rng).unwrap();
        let report = validate(&pp, &msk);
        assert!(
            report.all_passed(),
            "{:?}",
            report.failed().collect::<Vec<_>>()
        );

        let bad_n = PublicParams::new(
            "toy",
            pp.n() + 2u32,
            pp.g_p.clone(),
            HashId::Sha256,
            256,
            pp.m,
        )
        .unwrap();
        let report = validate(&bad_n, &msk);
        assert_eq!(report.get("modulus_is_p_prime_times_q_prime"), Some(false));

        let mut one = pp.clone();
        one.g_p = BigUint::one();
        let report = validate(&one, &msk);
        assert_eq!(report.get("g_p_has_order_zq"), Some(false));
        assert_eq!(report.get("g_p_is_g_to_the_p"), Some(false));
    }

    #[test]
    fn seeded_setup_is_reproducible() {
        let level = SecurityLevel::Toy { modulus_bits: 64 };
        let a = setup(level, &mut numt::seeded_rng(b"same")).unwrap();
        let b = setup(level, &mut numt::seeded_rng(b"same")).unwrap();
        assert_eq!(
            master_secret_to_text(&a.0, &a.1),
            master_secret_to_text(&b.0, &b.1)
        );
    }

    #[test]
    fn text_round_trip_and_digest() {
        let mut rng = numt::seeded_rng(b"text");
        let (pp, msk) = setup(SecurityLevel::Toy { modulus_bits: 48 }, &mut rng).unwrap();
        let text = pp.to_text();
        assert!(text.starts_with("version=1\ngamma=toy\nN="));
        assert_eq!(PublicParams::from_text(&text).unwrap(), pp);
        let (pp2, msk2) = master_secret_from_text(&master_secret_to_text(&pp, &msk)).unwrap();
        assert_eq!((pp2, msk2), (pp.clone(), msk));
        assert_eq!(pp.digest().len(), 32);
        pp.check_digest(&pp.digest_hex()).unwrap();
        assert!(matches!(
            pp.check_digest("00"),
            Err(Error::ParamsMismatch { .. })
        ));
        // Public text never carries secret fields.
        assert!(!text.contains("\np=") && !text.contains("\ng="));
        assert!(PublicParams::from_text(&(text + "p=3\n")).is_err());
    }

    #[test]
    fn master_secret_file_permissions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("msk");
        let mut rng = numt::seeded_rng(b"perm");
        let (pp, msk) = setup(SecurityLevel::Toy { modulus_bits: 32 }, &mut rng).unwrap();
        save_master_secret(&path, &pp, &msk).unwrap();
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let mode = std::fs::metadata(&path).unwrap().permissions().mode();
            assert_eq!(mode & 0o777, 0o600);
        }
        assert_eq!(load_master_secret(&path).unwrap().1, msk);
    }
}
