//! Multi-party non-interactive key exchange (MP-NIKE) over a structured RSA
//! modulus `N = (2pz+1)(2q+1)`.
//!
//! A key generation center ([`kgc`]) holding the factorization issues each
//! user a pair `(e, d)`. Any subset `W` of users then derives a common group
//! key without exchanging messages: each member raises its private `d` to the
//! public keys of the other members ([`nike`]). The same machinery backs a
//! broadcast-encryption layer ([`broadcast`]).
//!
//! The crate also carries two older exponentiation-based schemes
//! ([`legacy`]) and working collusion attacks against them ([`attacks`]).
//!
//! ```
//! use mpnike::{kgc, nike, numt, params};
//!
//! let mut rng = numt::seeded_rng(b"doc");
//! let level = params::SecurityLevel::Toy { modulus_bits: 32 };
//! let (pp, msk) = params::setup(level, &mut rng).unwrap();
//! let mut store = kgc::Keystore::new(&pp);
//! let alice = kgc::keygen(&mut store, &pp, &msk, "alice", &mut rng).unwrap();
//! let bob = kgc::keygen(&mut store, &pp, &msk, "bob", &mut rng).unwrap();
//!
//! let a = nike::shared_key(&pp, &alice, &[bob.e.clone()]).unwrap();
//! let b = nike::shared_key(&pp, &bob, &[alice.e.clone()]).unwrap();
//! assert_eq!(a.key(), b.key());
//! ```

pub mod attacks;
pub mod bench;
pub mod broadcast;
pub mod error;
pub mod kgc;
mod kv;
pub mod legacy;
pub mod nike;
pub mod numt;
pub mod params;

pub use error::{Error, Result};
