//! Party-side group key derivation.
//!
//! A member of `W` holding `(e_i, d_i)` computes
//!
//! ```text
//! F_W = d_i ^ (prod of e_j over the other members)  (mod N)
//! K_W = H("MPNIKEv1" || F_W padded to byte_len(N)), truncated to lambda bits
//! ```
//!
//! The exponent product is never formed: parties do not know the group order,
//! so `F` is raised to one public key at a time. That costs exactly `|W| - 1`
//! modular exponentiations and keeps the intermediate size bounded.
//!
//! A member already holding `F_W` moves to `W + {s}` with a single
//! exponentiation, `F_W' = F_W ^ e_s`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::kgc::KeyPair;
use crate::numt;
use crate::params::PublicParams;

/// Domain-separation prefix for group key derivation.
pub const KDF_TAG: &[u8; 8] = b"MPNIKEv1";

pub const GROUP_MAGIC: &str = "MPNIKE-GROUP";
pub const GROUP_VERSION: u32 = 1;

/// A derived `lambda`-bit group key.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupKey(Vec<u8>);

impl GroupKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    /// Short non-secret identifier for comparing keys without revealing them.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(b"MPNIKE-FP");
        h.update(&self.0);
        hex::encode(&h.finalize()[..8])
    }
}

impl fmt::Debug for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupKey(fp={})", self.fingerprint())
    }
}

/// Result of a derivation for one group.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupKeyState {
    members: Vec<BigUint>,
    f: BigUint,
    key: GroupKey,
}

impl GroupKeyState {
    /// Member public keys, ascending.
    pub fn members(&self) -> &[BigUint] {
        &self.members
    }

    /// The pre-hash group element `F_W`. Sensitive.
    pub fn group_element(&self) -> &BigUint {
        &self.f
    }

    pub fn key(&self) -> &GroupKey {
        &self.key
    }

    pub fn contains(&self, e: &BigUint) -> bool {
        self.members.binary_search(e).is_ok()
    }
}

// F and K stay out of debug output.
impl fmt::Debug for GroupKeyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupKeyState")
            .field("members", &self.members.len())
            .field("key", &self.key)
            .finish_non_exhaustive()
    }
}

/// Hashes a group element to a `lambda`-bit key.
pub fn kdf(pp: &PublicParams, f: &BigUint) -> Result<GroupKey> {
    if f.is_zero() || f >= pp.n() {
        return Err(Error::OutOfRange);
    }
    let encoded = pp.ctx().encode_fixed(f);
    let mut digest = pp.hash_id.digest(&[KDF_TAG, &encoded]);
    digest.truncate(pp.lambda as usize / 8);
    Ok(GroupKey(digest))
}

/// Derives the group key for `my` together with `others`.
///
/// `others` is processed in the given order; any order gives the same result.
pub fn shared_key(pp: &PublicParams, my: &KeyPair, others: &[BigUint]) -> Result<GroupKeyState> {
    if others.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if my.d.is_zero() || &my.d >= pp.n() {
        return Err(Error::OutOfRange);
    }
    let mut members = BTreeSet::new();
    members.insert(my.e.clone());
    for e in others {
        if e.is_zero() {
            return Err(Error::InvalidInput("public keys must be positive".into()));
        }
        if *e == my.e {
            return Err(Error::SelfInGroup);
        }
        if !members.insert(e.clone()) {
            return Err(Error::InvalidInput(format!(
                "public key {} listed twice",
                numt::to_hex(e)
            )));
        }
    }

    let ctx = pp.ctx();
    let f = others
        .iter()
        .fold(my.d.clone(), |acc, e| numt::mod_exp_unsigned(&acc, e, ctx));
    finish(pp, members.into_iter().collect(), f)
}

/// Extends an existing group by one public key.
pub fn join(pp: &PublicParams, state: &GroupKeyState, e_new: &BigUint) -> Result<GroupKeyState> {
    if e_new.is_zero() {
        return Err(Error::InvalidInput("public keys must be positive".into()));
    }
    let pos = match state.members.binary_search(e_new) {
        Ok(_) => return Err(Error::AlreadyMember),
        Err(pos) => pos,
    };
    let mut members = state.members.clone();
    members.insert(pos, e_new.clone());
    let f = numt::mod_exp_unsigned(&state.f, e_new, pp.ctx());
    finish(pp, members, f)
}

fn finish(pp: &PublicParams, members: Vec<BigUint>, f: BigUint) -> Result<GroupKeyState> {
    if f.is_one() {
        return Err(Error::DegenerateResult);
    }
    let key = kdf(pp, &f)?;
    Ok(GroupKeyState { members, f, key })
}

/// Public description of a group: the parameter digest plus the sorted
/// member public keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupDescriptor {
    pub params_digest: String,
    members: Vec<BigUint>,
}

impl GroupDescriptor {
    pub fn new(pp: &PublicParams, members: impl IntoIterator<Item = BigUint>) -> Result<Self> {
        let set: BTreeSet<BigUint> = members.into_iter().collect();
        if set.len() < 2 {
            return Err(Error::GroupTooSmall);
        }
        Ok(GroupDescriptor {
            params_digest: pp.digest_hex(),
            members: set.into_iter().collect(),
        })
    }

    pub fn members(&self) -> &[BigUint] {
        &self.members
    }

    /// Every member except `e`, or [`Error::NotAuthorized`] if `e` is absent.
    pub fn others(&self, e: &BigUint) -> Result<Vec<BigUint>> {
        if self.members.binary_search(e).is_err() {
            return Err(Error::NotAuthorized);
        }
        Ok(self.members.iter().filter(|m| *m != e).cloned().collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{GROUP_MAGIC}\t{GROUP_VERSION}\t{}\n", self.params_digest);
        for e in &self.members {
            out.push_str(&numt::to_hex(e));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, pp: &PublicParams) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("empty group file"))?;
        let fields: Vec<&str> = header.split('\t').collect();
        let [magic, version, digest] = fields[..] else {
            return Err(Error::format("malformed group header"));
        };
        if magic != GROUP_MAGIC || version != GROUP_VERSION.to_string() {
            return Err(Error::format("not a version-1 group file"));
        }
        pp.check_digest(digest)?;
        let members = lines.map(numt::from_hex).collect::<Result<Vec<_>>>()?;
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("group members must be strictly ascending"));
        }
        Self::new(pp, members)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, pp: &PublicParams) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, pp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgc::{self, Keystore};
    use crate::params::{self, MasterSecret, SecurityLevel};
    use rand::seq::SliceRandom;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn toy_users(n: usize, seed: &[u8]) -> (PublicParams, MasterSecret, Keystore, Vec<KeyPair>) {
        let mut rng = numt::seeded_rng(seed);
        let (pp, msk) = params::setup(SecurityLevel::Toy { modulus_bits: 24 }, &mut rng).unwrap();
        let mut store = Keystore::new(&pp);
        let pairs = (0..n)
            .map(|i| kgc::keygen(&mut store, &pp, &msk, &format!("u{i}"), &mut rng).unwrap())
            .collect();
        (pp, msk, store, pairs)
    }

    fn others_of(pairs: &[KeyPair], i: usize) -> Vec<BigUint> {
        pairs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| p.e.clone())
            .collect()
    }

    // g^(p^|W| * prod y) mod N, with the exponent reduced mod pzq.
    fn closed_form(
        pp: &PublicParams,
        msk: &MasterSecret,
        store: &Keystore,
        pairs: &[KeyPair],
    ) -> BigUint {
        let order = msk.subgroup_order();
        let mut exp = BigUint::one();
        for p in pairs {
            let y = store.get(&p.user_id).unwrap().y.clone().unwrap();
            exp = exp * &msk.p % &order * y % &order;
        }
        msk.g.modpow(&exp, pp.n())
    }

    #[test]
    fn three_members_match_closed_form() {
        let (pp, msk, store, pairs) = toy_users(3, b"three");
        let expected = closed_form(&pp, &msk, &store, &pairs);
        for i in 0..3 {
            let st = shared_key(&pp, &pairs[i], &others_of(&pairs, i)).unwrap();
            assert_eq!(st.group_element(), &expected);
            assert_eq!(st.members().len(), 3);
            assert!(st.members().windows(2).all(|w| w[0] < w[1]));
            assert_eq!(st.key(), &kdf(&pp, &expected).unwrap());
            // F lives in the order-zq subgroup.
            assert!(st.group_element().modpow(&msk.zq(), pp.n()).is_one());
        }
    }

    #[test]
    fn order_independence() {
        let (pp, _, _, pairs) = toy_users(6, b"order");
        let mut others = others_of(&pairs, 0);
        let base = shared_key(&pp, &pairs[0], &others).unwrap();
        others.reverse();
        assert_eq!(shared_key(&pp, &pairs[0], &others).unwrap(), base);
        let mut rng = numt::seeded_rng(b"shuffle");
        for _ in 0..10 {
            others.shuffle(&mut rng);
            assert_eq!(shared_key(&pp, &pairs[0], &others).unwrap(), base);
        }
    }

    #[test]
    fn argument_errors() {
        let (pp, _, _, pairs) = toy_users(3, b"errors");
        assert!(matches!(
            shared_key(&pp, &pairs[0], &[]),
            Err(Error::EmptyGroup)
        ));
        assert!(matches!(
            shared_key(&pp, &pairs[0], &[pairs[1].e.clone(), pairs[0].e.clone()]),
            Err(Error::SelfInGroup)
        ));
        assert!(shared_key(&pp, &pairs[0], &[pairs[1].e.clone(), pairs[1].e.clone()]).is_err());
        let bogus = KeyPair {
            user_id: "x".into(),
            e: big(7),
            d: BigUint::one(),
        };
        assert!(matches!(
            shared_key(&pp, &bogus, &[pairs[1].e.clone()]),
            Err(Error::DegenerateResult)
        ));
    }

    #[test]
    fn join_matches_recomputation_and_leaves_old_state() {
        let (pp, _, _, pairs) = toy_users(4, b"join");
        let abc = &pairs[..3];
        let old = shared_key(&pp, &abc[0], &others_of(abc, 0)).unwrap();
        let snapshot = old.clone();
        let joined = join(&pp, &old, &pairs[3].e).unwrap();
        assert_eq!(old, snapshot);
        for i in 0..4 {
            let fresh = shared_key(&pp, &pairs[i], &others_of(&pairs, i)).unwrap();
            assert_eq!(fresh, joined);
        }
        assert!(matches!(
            join(&pp, &old, &pairs[1].e),
            Err(Error::AlreadyMember)
        ));
    }

    #[test]
    fn kdf_range_and_determinism() {
        let (pp, _, _, _) = toy_users(0, b"kdf");
        assert!(matches!(kdf(&pp, &BigUint::zero()), Err(Error::OutOfRange)));
        assert!(matches!(kdf(&pp, pp.n()), Err(Error::OutOfRange)));
        let one = kdf(&pp, &BigUint::one()).unwrap();
        assert_eq!(one, kdf(&pp, &BigUint::one()).unwrap());
        assert_eq!(one.as_bytes().len(), 32);
        assert_ne!(one, kdf(&pp, &big(2)).unwrap());
    }

    #[test]
    fn kdf_regression_vector() {
        // N = 713 (p=3, z=5, q=11); the generator does not affect the kdf.
        let pp =
            PublicParams::new("toy", big(713), big(2), params::HashId::Sha256, 256, 8).unwrap();
        let key = kdf(&pp, &big(0x1a5)).unwrap();
        // sha256("MPNIKEv1" || 01 a5)
        assert_eq!(
            key.to_hex(),
            "16261033df33fdce33075ab922aa28a4941df72071f5b78f764138dd2468e0fa"
        );
    }

    #[test]
    fn outsider_gets_a_different_key() {
        let (pp, _, _, pairs) = toy_users(5, b"outsider");
        let members = &pairs[..3];
        let honest = shared_key(&pp, &members[0], &others_of(members, 0)).unwrap();
        let outsider = shared_key(
            &pp,
            &pairs[4],
            &members
                .iter()
                .skip(1)
                .map(|p| p.e.clone())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert_ne!(outsider.key(), honest.key());
    }

    #[test]
    fn modexp_count_is_group_size_minus_one() {
        let (pp, _, _, pairs) = toy_users(12, b"count");
        for size in 2..=12 {
            let group = &pairs[..size];
            let (res, count) =
                numt::count_modexps(|| shared_key(&pp, &group[0], &others_of(group, 0)));
            res.unwrap();
            assert_eq!(count, size as u64 - 1);
        }
    }

    #[test]
    fn descriptor_round_trip() {
        let (pp, _, _, pairs) = toy_users(4, b"desc");
        let desc = GroupDescriptor::new(&pp, pairs.iter().rev().map(|p| p.e.clone())).unwrap();
        assert!(desc.members().windows(2).all(|w| w[0] < w[1]));
        let back = GroupDescriptor::from_text(&desc.to_text(), &pp).unwrap();
        assert_eq!(back, desc);
        assert_eq!(desc.others(&pairs[0].e).unwrap().len(), 3);
        assert!(matches!(desc.others(&big(1)), Err(Error::NotAuthorized)));
        assert!(GroupDescriptor::new(&pp, [pairs[0].e.clone()]).is_err());

        let mut unsorted = desc.to_text().lines().map(String::from).collect::<Vec<_>>();
        unsorted.swap(1, 2);
        assert!(GroupDescriptor::from_text(&(unsorted.join("\n") + "\n"), &pp).is_err());
    }
}
