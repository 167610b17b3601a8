use std::sync::OnceLock;

use mpnike::attacks;
use mpnike::broadcast;
use mpnike::kgc::{self, KeyPair, Keystore};
use mpnike::nike;
use mpnike::numt;
use mpnike::params::{self, MasterSecret, PublicParams, SecurityLevel};
use num_bigint::BigUint;
use proptest::prelude::*;

struct Fixture {
    pp: PublicParams,
    msk: MasterSecret,
    store: Keystore,
    pairs: Vec<KeyPair>,
}

const USERS: usize = 24;

fn fixture() -> &'static Fixture {
    static FIX: OnceLock<Fixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let mut rng = numt::seeded_rng(b"properties");
        let (pp, msk) = params::setup(SecurityLevel::Toy { modulus_bits: 64 }, &mut rng).unwrap();
        let mut store = Keystore::new(&pp);
        store.set_retain_exponents(true);
        let pairs = (0..USERS)
            .map(|i| kgc::keygen(&mut store, &pp, &msk, &format!("user{i:02}"), &mut rng).unwrap())
            .collect();
        Fixture {
            pp,
            msk,
            store,
            pairs,
        }
    })
}

/// Distinct user indices, 2..=max of them.
fn group(max: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..USERS).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_flat_map(move |v| (2..=max).prop_map(move |n| v[..n].to_vec()))
}

fn others(members: &[usize], me: usize) -> Vec<BigUint> {
    let f = fixture();
    members
        .iter()
        .filter(|&&i| i != me)
        .map(|&i| f.pairs[i].e.clone())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_member_derives_the_same_key(members in group(10)) {
        let f = fixture();
        let reference = nike::shared_key(&f.pp, &f.pairs[members[0]], &others(&members, members[0])).unwrap();
        for &i in &members[1..] {
            let state = nike::shared_key(&f.pp, &f.pairs[i], &others(&members, i)).unwrap();
            prop_assert_eq!(state.key(), reference.key());
            prop_assert_eq!(state.members(), reference.members());
        }
    }

    #[test]
    fn order_of_others_is_irrelevant(members in group(8), seed in any::<u64>()) {
        let f = fixture();
        let me = members[0];
        let mut shuffled = others(&members, me);
        let forward = nike::shared_key(&f.pp, &f.pairs[me], &shuffled).unwrap();
        let k = seed as usize % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let reordered = nike::shared_key(&f.pp, &f.pairs[me], &shuffled).unwrap();
        prop_assert_eq!(forward, reordered);
    }

    #[test]
    fn closed_form_matches(members in group(6)) {
        // F = g^(p^|W| * prod y)
        let f = fixture();
        let me = members[0];
        let state = nike::shared_key(&f.pp, &f.pairs[me], &others(&members, me)).unwrap();
        let mut exponent = BigUint::from(1u32);
        for &i in &members {
            let y = f.store.get(&format!("user{i:02}")).unwrap().y.clone().unwrap();
            exponent = exponent * &f.msk.p * y;
        }
        let expected = f.msk.g.modpow(&exponent, f.pp.n());
        prop_assert_eq!(state.group_element(), &expected);
    }

    #[test]
    fn join_equals_fresh_derivation(members in group(9)) {
        let f = fixture();
        let (base, newcomer) = members.split_at(members.len() - 1);
        prop_assume!(base.len() >= 2);
        let me = base[0];
        let state = nike::shared_key(&f.pp, &f.pairs[me], &others(base, me)).unwrap();
        let joined = nike::join(&f.pp, &state, &f.pairs[newcomer[0]].e).unwrap();
        let fresh = nike::shared_key(&f.pp, &f.pairs[me], &others(&members, me)).unwrap();
        prop_assert_eq!(&joined, &fresh);
        let from_newcomer = nike::shared_key(&f.pp, &f.pairs[newcomer[0]], &others(&members, newcomer[0])).unwrap();
        prop_assert_eq!(joined.key(), from_newcomer.key());
    }

    #[test]
    fn derivation_costs_one_exponentiation_per_other(members in group(USERS)) {
        let f = fixture();
        let me = members[0];
        let rest = others(&members, me);
        let (state, count) = numt::count_modexps(|| nike::shared_key(&f.pp, &f.pairs[me], &rest));
        state.unwrap();
        prop_assert_eq!(count, members.len() as u64 - 1);
    }

    #[test]
    fn broadcast_reaches_exactly_the_authorized(members in group(6), outsider_pick in 0usize..USERS, msg in proptest::collection::vec(any::<u8>(), 0..200)) {
        let f = fixture();
        let ids: Vec<String> = members.iter().map(|i| format!("user{i:02}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let mut rng = numt::seeded_rng(&msg);
        let ct = broadcast::brod_encrypt(&f.store, &f.pp, &refs, &msg, &mut rng).unwrap();
        for &i in &members {
            prop_assert_eq!(broadcast::brod_decrypt(&f.pp, &f.pairs[i], &ct).unwrap(), msg.clone());
        }
        if !members.contains(&outsider_pick) {
            prop_assert!(broadcast::brod_decrypt(&f.pp, &f.pairs[outsider_pick], &ct).is_err());
        }
    }

    #[test]
    fn issued_pairs_verify_and_shifted_ones_too(i in 0usize..USERS, shift in 0u32..4) {
        let f = fixture();
        let pair = &f.pairs[i];
        prop_assert!(kgc::verify_pair(&f.pp, &f.msk, &pair.e, &pair.d));
        let shifted = &pair.e + f.msk.zq() * shift;
        prop_assert!(kgc::verify_pair(&f.pp, &f.msk, &shifted, &pair.d));
        prop_assert!(pair.e.bits() <= kgc::public_key_bit_bound(&f.pp, &f.msk));
    }

    #[test]
    fn colluder_keys_share_one_root(a in 0usize..USERS, b in 0usize..USERS) {
        prop_assume!(a != b);
        let f = fixture();
        let report = attacks::proposed_scheme_attack_probe(&f.pp, &[f.pairs[a].clone(), f.pairs[b].clone()], &[]).unwrap();
        prop_assert!(report.root_consistent);
        prop_assert!(kgc::verify_pair(&f.pp, &f.msk, &report.combined_e, &report.combined_d));
    }
}

#[test]
fn keystore_and_directory_round_trip() {
    let f = fixture();
    let text = f.store.to_text();
    assert_eq!(Keystore::from_text(&text, &f.pp).unwrap(), f.store);
    let dir = f.store.directory();
    let dir_text = dir.to_text();
    assert_eq!(kgc::Directory::from_text(&dir_text, &f.pp).unwrap(), dir);
    for pair in &f.pairs {
        assert!(!dir_text.contains(&numt::to_hex(&pair.d)));
        assert_eq!(dir.require(&pair.user_id).unwrap(), &pair.e);
        let key_file = pair.to_text(&f.pp);
        assert_eq!(&KeyPair::from_text(&key_file, &f.pp).unwrap(), pair);
    }
}

#[test]
fn files_from_other_parameters_are_rejected() {
    let f = fixture();
    let mut rng = numt::seeded_rng(b"other");
    let (other, _) = params::setup(SecurityLevel::Toy { modulus_bits: 64 }, &mut rng).unwrap();
    assert!(matches!(
        Keystore::from_text(&f.store.to_text(), &other),
        Err(mpnike::Error::ParamsMismatch { .. })
    ));
    assert!(matches!(
        KeyPair::from_text(&f.pairs[0].to_text(&f.pp), &other),
        Err(mpnike::Error::ParamsMismatch { .. })
    ));
}

#[test]
fn full_size_flow() {
    let mut rng = numt::seeded_rng(b"full-size");
    let (pp, msk) = params::setup(SecurityLevel::Bits80, &mut rng).unwrap();
    assert_eq!(pp.n().bits(), 1024);
    assert!(params::validate(&pp, &msk).all_passed());
    let mut store = Keystore::new(&pp);
    let pairs: Vec<_> = (0..5)
        .map(|i| kgc::keygen(&mut store, &pp, &msk, &format!("m{i}"), &mut rng).unwrap())
        .collect();
    let es: Vec<BigUint> = pairs.iter().map(|p| p.e.clone()).collect();
    let keys: Vec<_> = pairs
        .iter()
        .map(|p| {
            let rest: Vec<_> = es[..4].iter().filter(|e| **e != p.e).cloned().collect();
            nike::shared_key(&pp, p, &rest).unwrap()
        })
        .collect();
    assert!(keys[..4].iter().all(|k| k.key() == keys[0].key()));
    let joined = nike::join(&pp, &keys[0], &es[4]).unwrap();
    let fresh = nike::shared_key(&pp, &pairs[4], &es[..4]).unwrap();
    assert_eq!(joined.key(), fresh.key());
}
