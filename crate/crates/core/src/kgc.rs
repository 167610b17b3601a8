//! Key generation center: issues `(e, d)` pairs and keeps them in a keystore.
//!
//! For a user the KGC draws odd `y` and `k` of `ceil(m/2)` bits and sets
//!
//! ```text
//! e = p*y + z*q*k        d = g^(p*y) mod N
//! ```
//!
//! Since `g_p = g^p` has order `zq` and `e = p*y (mod zq)`, every honest pair
//! satisfies `d = g_p^(e * p^-1 mod zq)`, which is what [`verify_pair`]
//! checks. The relation only sees `e mod zq`, so `(e + t*zq, d)` verifies
//! as well.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::{DateTime, SubsecRound, Utc};
use num_bigint::BigUint;
use num_traits::One;
use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::kv::{KvDoc, KvWriter};
use crate::numt;
use crate::params::{self, MasterSecret, PublicParams};

pub const KEYSTORE_MAGIC: &str = "MPNIKE-KEYSTORE";
pub const KEYSTORE_VERSION: u32 = 1;

/// Fresh `k` values tried when a new `e` collides with an issued one.
pub const COLLISION_RETRIES: usize = 16;

pub const MAX_USER_ID_LEN: usize = 256;

#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub user_id: String,
    pub e: BigUint,
    pub d: BigUint,
}

impl KeyPair {
    pub fn public_key(&self) -> &BigUint {
        &self.e
    }

    /// Key file handed to a user: `key=value` lines bound to `pp` by digest.
    pub fn to_text(&self, pp: &PublicParams) -> String {
        KvWriter::default()
            .put("version", KEYPAIR_VERSION)
            .put("params_digest", pp.digest_hex())
            .put("user_id", &self.user_id)
            .put_int("e", &self.e)
            .put_int("d", &self.d)
            .finish()
    }

    pub fn from_text(text: &str, pp: &PublicParams) -> Result<Self> {
        let mut doc = KvDoc::parse(text)?;
        let version: u32 = doc.take_parsed("version")?;
        if version != KEYPAIR_VERSION {
            return Err(Error::format(format!(
                "unsupported key file version {version}"
            )));
        }
        pp.check_digest(&doc.take("params_digest")?)?;
        let pair = KeyPair {
            user_id: doc.take("user_id")?,
            e: doc.take_int("e")?,
            d: doc.take_int("d")?,
        };
        doc.finish()?;
        validate_user_id(&pair.user_id)?;
        if pair.d < BigUint::from(2u32) || &pair.d >= pp.n() {
            return Err(Error::format("d out of range"));
        }
        Ok(pair)
    }

    pub fn save(&self, path: impl AsRef<Path>, pp: &PublicParams) -> Result<()> {
        params::write_owner_only(path.as_ref(), &self.to_text(pp))
    }

    pub fn load(path: impl AsRef<Path>, pp: &PublicParams) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, pp)
    }
}

pub const KEYPAIR_VERSION: u32 = 1;
pub const DIRECTORY_MAGIC: &str = "MPNIKE-DIRECTORY";

/// Public directory: user ids and public keys only, safe to publish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Directory {
    params_ref: String,
    entries: BTreeMap<String, BigUint>,
}

impl Directory {
    pub fn get(&self, user_id: &str) -> Option<&BigUint> {
        self.entries.get(user_id)
    }

    pub fn require(&self, user_id: &str) -> Result<&BigUint> {
        self.get(user_id)
            .ok_or_else(|| Error::UnknownUser(user_id.to_string()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &BigUint)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{DIRECTORY_MAGIC}\t{KEYSTORE_VERSION}\t{}\n",
            self.params_ref
        );
        for (user, e) in &self.entries {
            out.push_str(&format!("{user}\t{}\n", numt::to_hex(e)));
        }
        out
    }

    pub fn from_text(text: &str, pp: &PublicParams) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("empty directory"))?;
        let fields: Vec<&str> = header.split('\t').collect();
        let [magic, version, digest] = fields[..] else {
            return Err(Error::format("malformed directory header"));
        };
        if magic != DIRECTORY_MAGIC || version != KEYSTORE_VERSION.to_string() {
            return Err(Error::format("not a version-1 directory"));
        }
        pp.check_digest(digest)?;
        let mut entries = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let (user, e) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(format!("entry {}: expected 2 columns", i + 1)))?;
            if entries
                .insert(user.to_string(), numt::from_hex(e)?)
                .is_some()
            {
                return Err(Error::DuplicateUser(user.to_string()));
            }
        }
        Ok(Directory {
            params_ref: digest.to_string(),
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, pp: &PublicParams) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, pp)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("user_id", &self.user_id)
            .field("e", &numt::to_hex(&self.e))
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuanceRecord {
    pub user_id: String,
    pub e: BigUint,
    pub d: BigUint,
    /// `None` when the keystore was configured not to retain exponents.
    pub y: Option<BigUint>,
    pub k: Option<BigUint>,
    pub issued_at: DateTime<Utc>,
}

impl IssuanceRecord {
    pub fn key_pair(&self) -> KeyPair {
        KeyPair {
            user_id: self.user_id.clone(),
            e: self.e.clone(),
            d: self.d.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keystore {
    params_ref: String,
    records: BTreeMap<String, IssuanceRecord>,
    issued_e: BTreeSet<BigUint>,
    retain_exponents: bool,
}

impl Keystore {
    pub fn new(pp: &PublicParams) -> Self {
        Keystore {
            params_ref: pp.digest_hex(),
            records: BTreeMap::new(),
            issued_e: BTreeSet::new(),
            retain_exponents: true,
        }
    }

    /// When off, new records drop `y` and `k` after issuance.
    pub fn set_retain_exponents(&mut self, retain: bool) {
        self.retain_exponents = retain;
    }

    pub fn params_ref(&self) -> &str {
        &self.params_ref
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, user_id: &str) -> Option<&IssuanceRecord> {
        self.records.get(user_id)
    }

    pub fn require(&self, user_id: &str) -> Result<&IssuanceRecord> {
        self.get(user_id)
            .ok_or_else(|| Error::UnknownUser(user_id.to_string()))
    }

    /// Records in `user_id` order.
    pub fn records(&self) -> impl Iterator<Item = &IssuanceRecord> {
        self.records.values()
    }

    pub fn find_by_public_key(&self, e: &BigUint) -> Option<&IssuanceRecord> {
        if !self.issued_e.contains(e) {
            return None;
        }
        self.records.values().find(|r| &r.e == e)
    }

    fn insert(&mut self, record: IssuanceRecord) -> Result<()> {
        validate_user_id(&record.user_id)?;
        if self.records.contains_key(&record.user_id) {
            return Err(Error::DuplicateUser(record.user_id));
        }
        if !self.issued_e.insert(record.e.clone()) {
            return Err(Error::format(format!(
                "public key of {:?} collides with an existing record",
                record.user_id
            )));
        }
        self.records.insert(record.user_id.clone(), record);
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{KEYSTORE_MAGIC}\t{KEYSTORE_VERSION}\t{}\n",
            self.params_ref
        );
        let opt = |v: &Option<BigUint>| v.as_ref().map_or_else(|| "-".to_string(), numt::to_hex);
        for r in self.records.values() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.user_id,
                numt::to_hex(&r.e),
                numt::to_hex(&r.d),
                opt(&r.y),
                opt(&r.k),
                r.issued_at
                    .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            ));
        }
        out
    }

    /// Parses a keystore and checks it was issued under `pp`.
    pub fn from_text(text: &str, pp: &PublicParams) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("empty keystore"))?;
        let fields: Vec<&str> = header.split('\t').collect();
        let [magic, version, digest] = fields[..] else {
            return Err(Error::format("malformed keystore header"));
        };
        if magic != KEYSTORE_MAGIC || version != KEYSTORE_VERSION.to_string() {
            return Err(Error::format("not a version-1 keystore"));
        }
        pp.check_digest(digest)?;
        if !text.ends_with('\n') {
            return Err(Error::format("keystore is truncated"));
        }

        let mut store = Keystore::new(pp);
        let opt = |s: &str| -> Result<Option<BigUint>> {
            if s == "-" {
                Ok(None)
            } else {
                numt::from_hex(s).map(Some)
            }
        };
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            let [user_id, e, d, y, k, at] = cols[..] else {
                return Err(Error::format(format!(
                    "record {}: expected 6 columns",
                    i + 1
                )));
            };
            let issued_at = DateTime::parse_from_rfc3339(at)
                .map_err(|err| Error::format(format!("record {}: bad timestamp: {err}", i + 1)))?
                .with_timezone(&Utc);
            let record = IssuanceRecord {
                user_id: user_id.to_string(),
                e: numt::from_hex(e)?,
                d: numt::from_hex(d)?,
                y: opt(y)?,
                k: opt(k)?,
                issued_at,
            };
            if record.d < BigUint::from(2u32) || &record.d >= pp.n() {
                return Err(Error::format(format!("record {}: d out of range", i + 1)));
            }
            store.insert(record)?;
        }
        Ok(store)
    }

    /// Holds private keys, so written owner-only.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        params::write_owner_only(path.as_ref(), &self.to_text())
    }

    pub fn load(path: impl AsRef<Path>, pp: &PublicParams) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, pp)
    }

    /// The publishable part: user ids and public keys.
    pub fn directory(&self) -> Directory {
        Directory {
            params_ref: self.params_ref.clone(),
            entries: self
                .records
                .values()
                .map(|r| (r.user_id.clone(), r.e.clone()))
                .collect(),
        }
    }
}

/// User labels are opaque UTF-8, at most 256 bytes, without control
/// characters (the keystore is tab/newline delimited).
pub fn validate_user_id(user_id: &str) -> Result<()> {
    if user_id.is_empty() || user_id.len() > MAX_USER_ID_LEN {
        return Err(Error::InvalidInput(format!(
            "user id must be 1..={MAX_USER_ID_LEN} bytes"
        )));
    }
    if user_id.chars().any(char::is_control) {
        return Err(Error::InvalidInput(
            "user id contains control characters".into(),
        ));
    }
    Ok(())
}

/// Issues a key pair for `user_id` and records it in `store`.
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(
    store: &mut Keystore,
    pp: &PublicParams,
    msk: &MasterSecret,
    user_id: &str,
    rng: &mut R,
) -> Result<KeyPair> {
    precheck(store, pp, user_id)?;
    let bits = pp.half_m();
    loop {
        let y = numt::random_odd(bits, rng);
        let d = msk.g.modpow(&(&msk.p * &y), pp.n());
        if d.is_one() {
            continue;
        }
        for _ in 0..COLLISION_RETRIES {
            let k = numt::random_odd(bits, rng);
            let e = public_key(msk, &y, &k);
            if !store.issued_e.contains(&e) {
                return commit(store, user_id, e, d, y, k);
            }
        }
        return Err(Error::CollisionBudgetExceeded);
    }
}

/// Issues a key pair from caller-chosen odd exponents. Meant for toy-scale
/// cross-checks.
pub fn keygen_with_exponents(
    store: &mut Keystore,
    pp: &PublicParams,
    msk: &MasterSecret,
    user_id: &str,
    y: &BigUint,
    k: &BigUint,
) -> Result<KeyPair> {
    precheck(store, pp, user_id)?;
    if !y.bit(0) || !k.bit(0) {
        return Err(Error::InvalidInput("y and k must be odd".into()));
    }
    let e = public_key(msk, y, k);
    if store.issued_e.contains(&e) {
        return Err(Error::CollisionBudgetExceeded);
    }
    let d = msk.g.modpow(&(&msk.p * y), pp.n());
    if d.is_one() {
        return Err(Error::DegenerateResult);
    }
    commit(store, user_id, e, d, y.clone(), k.clone())
}

fn precheck(store: &Keystore, pp: &PublicParams, user_id: &str) -> Result<()> {
    pp.check_digest(&store.params_ref)?;
    validate_user_id(user_id)?;
    if store.records.contains_key(user_id) {
        return Err(Error::DuplicateUser(user_id.to_string()));
    }
    Ok(())
}

fn public_key(msk: &MasterSecret, y: &BigUint, k: &BigUint) -> BigUint {
    &msk.p * y + msk.zq() * k
}

fn commit(
    store: &mut Keystore,
    user_id: &str,
    e: BigUint,
    d: BigUint,
    y: BigUint,
    k: BigUint,
) -> Result<KeyPair> {
    let retain = store.retain_exponents;
    let record = IssuanceRecord {
        user_id: user_id.to_string(),
        e,
        d,
        y: retain.then_some(y),
        k: retain.then_some(k),
        issued_at: Utc::now().trunc_subsecs(0),
    };
    let pair = record.key_pair();
    store.insert(record)?;
    Ok(pair)
}

/// Checks `d = g_p^(e * p^-1 mod zq) (mod N)`.
pub fn verify_pair(pp: &PublicParams, msk: &MasterSecret, e: &BigUint, d: &BigUint) -> bool {
    if d >= pp.n() {
        return false;
    }
    let zq = msk.zq();
    let Ok(p_inv) = numt::mod_inverse(&msk.p, &zq) else {
        return false;
    };
    let exponent = e * p_inv % &zq;
    pp.g_p.modpow(&exponent, pp.n()) == *d
}

/// Upper bound on `bitlen(e)` for issued keys.
pub fn public_key_bit_bound(pp: &PublicParams, msk: &MasterSecret) -> u64 {
    msk.p.bits().max(msk.zq().bits()) + pp.half_m() + 1
}
