//! Broadcast encryption to an authorized subset of keystore users.
//!
//! The server derives the authorized group's key from one member's private
//! key in its keystore, maps it to an AES-256-GCM key and encrypts. The
//! ciphertext carries the member public keys in clear; every listed member
//! re-derives the same group key on its own.
//!
//! # Ciphertext layout
//!
//! All integers are big-endian. `u32`-length-prefixed sections follow a
//! fixed 2-byte version:
//!
//! ```text
//! u16      version (= 1)
//! u32 len  params digest (lambda/8 bytes)
//! u32      member count
//! count x (u32 len, member public key, minimal big-endian bytes)
//! u32 len  nonce (12 bytes)
//! u32 len  AEAD output (ciphertext || 16-byte tag)
//! ```
//!
//! Everything before the nonce section is the AEAD associated data, so the
//! member list and parameter digest are authenticated.

use std::collections::BTreeSet;

use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes256Gcm, Key, KeyInit, Nonce};
use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::kgc::{self, KeyPair, Keystore};
use crate::nike::{self, GroupKey};
use crate::params::{self, MasterSecret, PublicParams, SecurityLevel};

pub const CIPHERTEXT_VERSION: u16 = 1;
pub const NONCE_LEN: usize = 12;

/// Tag for mapping a group key to a transport key.
pub const TRANSPORT_TAG: &[u8] = b"MPNIKE-BC1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastCiphertext {
    /// Sorted ascending.
    pub authorized: Vec<BigUint>,
    pub nonce: [u8; NONCE_LEN],
    pub ct: Vec<u8>,
    pub params_digest: Vec<u8>,
}

impl BroadcastCiphertext {
    fn header_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CIPHERTEXT_VERSION.to_be_bytes());
        put_section(&mut out, &self.params_digest);
        out.extend_from_slice(&(self.authorized.len() as u32).to_be_bytes());
        for e in &self.authorized {
            put_section(&mut out, &e.to_bytes_be());
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header_bytes();
        put_section(&mut out, &self.nonce);
        put_section(&mut out, &self.ct);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes };
        let version = u16::from_be_bytes(r.take(2)?.try_into().expect("2 bytes"));
        if version != CIPHERTEXT_VERSION {
            return Err(Error::format(format!(
                "unsupported ciphertext version {version}"
            )));
        }
        let params_digest = r.section()?.to_vec();
        let count = r.u32()? as usize;
        if count < 2 {
            return Err(Error::format("ciphertext lists fewer than two members"));
        }
        let mut authorized = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let raw = r.section()?;
            if raw.is_empty() || raw[0] == 0 {
                return Err(Error::format("member key not in minimal encoding"));
            }
            authorized.push(BigUint::from_bytes_be(raw));
        }
        if authorized.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("member keys must be strictly ascending"));
        }
        let nonce: [u8; NONCE_LEN] = r
            .section()?
            .try_into()
            .map_err(|_| Error::format("nonce must be 12 bytes"))?;
        let ct = r.section()?.to_vec();
        if !r.buf.is_empty() {
            return Err(Error::format("trailing bytes after ciphertext"));
        }
        Ok(BroadcastCiphertext {
            authorized,
            nonce,
            ct,
            params_digest,
        })
    }
}

fn put_section(out: &mut Vec<u8>, data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    out.extend_from_slice(data);
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::format("ciphertext is truncated"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn section(&mut self) -> Result<&'a [u8]> {
        let len = self.u32()? as usize;
        self.take(len)
    }
}

/// Runs setup and issues `eta` key pairs named `user0001`, `user0002`, ...
pub fn brod_setup<R: RngCore + CryptoRng + ?Sized>(
    eta: usize,
    level: SecurityLevel,
    rng: &mut R,
) -> Result<(PublicParams, MasterSecret, Keystore)> {
    if eta < 2 {
        return Err(Error::GroupTooSmall);
    }
    let (pp, msk) = params::setup(level, rng)?;
    let mut store = Keystore::new(&pp);
    for i in 1..=eta {
        kgc::keygen(&mut store, &pp, &msk, &format!("user{i:04}"), rng)?;
    }
    Ok((pp, msk, store))
}

fn transport_cipher(pp: &PublicParams, key: &GroupKey) -> Aes256Gcm {
    let material = pp.hash_id.digest(&[TRANSPORT_TAG, key.as_bytes()]);
    Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(&material))
}

/// Encrypts `message` for the users in `authorized`.
///
/// The group key is derived from the private key of the lexicographically
/// first authorized user id.
pub fn brod_encrypt<R: RngCore + CryptoRng + ?Sized>(
    store: &Keystore,
    pp: &PublicParams,
    authorized: &[&str],
    message: &[u8],
    rng: &mut R,
) -> Result<BroadcastCiphertext> {
    pp.check_digest(store.params_ref())?;
    let ids: BTreeSet<&str> = authorized.iter().copied().collect();
    let records = ids
        .iter()
        .map(|id| store.require(id))
        .collect::<Result<Vec<_>>>()?;
    if records.len() < 2 {
        return Err(Error::GroupTooSmall);
    }
    let server_side = records[0].key_pair();
    let others: Vec<BigUint> = records[1..].iter().map(|r| r.e.clone()).collect();
    let state = nike::shared_key(pp, &server_side, &others)?;

    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    seal(pp, state.key(), state.members().to_vec(), nonce, message)
}

/// Encrypts under an already derived group key.
pub fn seal(
    pp: &PublicParams,
    key: &GroupKey,
    authorized: Vec<BigUint>,
    nonce: [u8; NONCE_LEN],
    message: &[u8],
) -> Result<BroadcastCiphertext> {
    let mut out = BroadcastCiphertext {
        authorized,
        nonce,
        ct: Vec::new(),
        params_digest: pp.digest(),
    };
    let aad = out.header_bytes();
    out.ct = transport_cipher(pp, key)
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: message,
                aad: &aad,
            },
        )
        .map_err(|_| Error::AuthFailure)?;
    Ok(out)
}

/// Decrypts with an already derived group key.
pub fn open_with_group_key(
    pp: &PublicParams,
    key: &GroupKey,
    ct: &BroadcastCiphertext,
) -> Result<Vec<u8>> {
    let aad = ct.header_bytes();
    transport_cipher(pp, key)
        .decrypt(
            Nonce::from_slice(&ct.nonce),
            Payload {
                msg: &ct.ct,
                aad: &aad,
            },
        )
        .map_err(|_| Error::AuthFailure)
}

/// Member-side decryption.
pub fn brod_decrypt(pp: &PublicParams, my: &KeyPair, ct: &BroadcastCiphertext) -> Result<Vec<u8>> {
    if ct.params_digest != pp.digest() {
        return Err(Error::ParamsMismatch {
            expected: pp.digest_hex(),
            found: hex::encode(&ct.params_digest),
        });
    }
    if ct.authorized.binary_search(&my.e).is_err() {
        return Err(Error::NotAuthorized);
    }
    let others: Vec<BigUint> = ct
        .authorized
        .iter()
        .filter(|e| **e != my.e)
        .cloned()
        .collect();
    let state = nike::shared_key(pp, my, &others)?;
    open_with_group_key(pp, state.key(), ct)
}
