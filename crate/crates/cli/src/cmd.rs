use std::path::Path;

use mpnike::attacks::{self, CollusionPair, Scheme, Transcript};
use mpnike::kgc::{self, Directory, KeyPair, Keystore};
use mpnike::nike::{self, GroupDescriptor};
use mpnike::params::{self, PublicParams, SecurityLevel};
use mpnike::{bench, broadcast, legacy, numt, Error, Result};
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use rand_chacha::ChaCha20Rng;

use crate::{AttackCmd, BroadcastCmd, Cli, Command, Format, GroupSource, KeySource};

/// Runs one command and returns what goes to stdout.
pub fn run(cli: &Cli) -> Result<String> {
    let mut t = Transcript::default();
    match &cli.command {
        Command::Setup {
            security,
            params: params_path,
            msk,
            keystore,
        } => {
            let level: SecurityLevel = security.parse()?;
            let (pp, secret) = params::setup(level, &mut rng(cli, &["setup"]))?;
            pp.save(params_path)?;
            params::save_master_secret(msk, &pp, &secret)?;
            if let Some(path) = keystore {
                Keystore::new(&pp).save(path)?;
            }
            t.push("security", level)
                .push("modulus_bits", pp.n().bits())
                .push_int("N", pp.n())
                .push_int("g_p", &pp.g_p)
                .push("m", pp.m)
                .push("params_digest", pp.digest_hex());
        }
        Command::Issue {
            msk,
            keystore,
            users,
            key_out,
            retain_exponents,
        } => {
            let (pp, secret) = params::load_master_secret(msk)?;
            let mut store = if keystore.exists() {
                Keystore::load(keystore, &pp)?
            } else {
                Keystore::new(&pp)
            };
            store.set_retain_exponents(*retain_exponents);
            if key_out.is_some() && users.len() != 1 {
                return Err(Error::InvalidInput(
                    "--key-out needs exactly one --user".into(),
                ));
            }
            for user in users {
                let pair = kgc::keygen(
                    &mut store,
                    &pp,
                    &secret,
                    user,
                    &mut rng(cli, &["issue", user]),
                )?;
                t.push("user", user).push_int("e", &pair.e);
                if let Some(path) = key_out {
                    pair.save(path, &pp)?;
                }
            }
            store.save(keystore)?;
            t.push("issued", users.len())
                .push("keystore_size", store.len());
        }
        Command::ExportKey {
            params: params_path,
            keystore,
            user,
            out,
        } => {
            let pp = PublicParams::load(params_path)?;
            let store = Keystore::load(keystore, &pp)?;
            let pair = store.require(user)?.key_pair();
            pair.save(out, &pp)?;
            t.push("user", user).push_int("e", &pair.e);
        }
        Command::Directory {
            params: params_path,
            keystore,
            out,
        } => {
            let pp = PublicParams::load(params_path)?;
            let dir = Keystore::load(keystore, &pp)?.directory();
            dir.save(out)?;
            t.push("entries", dir.entries().count())
                .push("params_digest", pp.digest_hex());
        }
        Command::Group {
            params: params_path,
            lookup,
            members,
            out,
        } => {
            let pp = PublicParams::load(params_path)?;
            let resolver =
                Resolver::open(&pp, lookup.directory.as_deref(), lookup.keystore.as_deref())?;
            let group = GroupDescriptor::new(&pp, resolver.resolve(members)?)?;
            group.save(out)?;
            t.push("members", group.members().len())
                .push("params_digest", &group.params_digest);
        }
        Command::Derive {
            params: params_path,
            key,
            group,
            reveal,
        } => {
            let pp = PublicParams::load(params_path)?;
            let my = load_key(&pp, key)?;
            let others = group_others(&pp, &my, key, group)?;
            let state = nike::shared_key(&pp, &my, &others)?;
            t.push("user", &my.user_id)
                .push("group_size", state.members().len())
                .push("fingerprint", state.key().fingerprint());
            if *reveal {
                t.push("key", state.key().to_hex());
            }
        }
        Command::Join {
            params: params_path,
            key,
            group,
            add_e,
            add_user,
            out,
            reveal,
        } => {
            let pp = PublicParams::load(params_path)?;
            let my = load_key(&pp, key)?;
            let others = group_others(&pp, &my, key, group)?;
            let state = nike::shared_key(&pp, &my, &others)?;
            let e_new = match (add_e, add_user) {
                (Some(hex), _) => numt::from_hex(hex)?,
                (None, Some(user)) => {
                    let resolver =
                        Resolver::open(&pp, group.directory.as_deref(), key.keystore.as_deref())?;
                    resolver.resolve(std::slice::from_ref(user))?.remove(0)
                }
                (None, None) => {
                    return Err(Error::InvalidInput("give --add-e or --add-user".into()));
                }
            };
            let joined = nike::join(&pp, &state, &e_new)?;
            if let Some(path) = out {
                GroupDescriptor::new(&pp, joined.members().iter().cloned())?.save(path)?;
            }
            t.push("user", &my.user_id)
                .push("previous_fingerprint", state.key().fingerprint())
                .push_int("joined_e", &e_new)
                .push("group_size", joined.members().len())
                .push("fingerprint", joined.key().fingerprint());
            if *reveal {
                t.push("key", joined.key().to_hex());
            }
        }
        Command::Broadcast(BroadcastCmd::Encrypt {
            params: params_path,
            keystore,
            to,
            input,
            out,
        }) => {
            let pp = PublicParams::load(params_path)?;
            let store = Keystore::load(keystore, &pp)?;
            let message = std::fs::read(input)?;
            let ids: Vec<&str> = to.iter().map(String::as_str).collect();
            let ct = broadcast::brod_encrypt(
                &store,
                &pp,
                &ids,
                &message,
                &mut rng(cli, &["broadcast"]),
            )?;
            let bytes = ct.to_bytes();
            std::fs::write(out, &bytes)?;
            t.push("authorized", ct.authorized.len())
                .push("plaintext_bytes", message.len())
                .push("ciphertext_bytes", bytes.len());
        }
        Command::Broadcast(BroadcastCmd::Decrypt {
            params: params_path,
            key,
            input,
            out,
        }) => {
            let pp = PublicParams::load(params_path)?;
            let my = load_key(&pp, key)?;
            let ct = broadcast::BroadcastCiphertext::from_bytes(&std::fs::read(input)?)?;
            let message = broadcast::brod_decrypt(&pp, &my, &ct)?;
            std::fs::write(out, &message)?;
            t.push("user", &my.user_id)
                .push("plaintext_bytes", message.len());
        }
        Command::Attack(attack) => run_attack(cli, attack, &mut t)?,
        Command::Validate {
            msk,
            params: params_path,
        } => {
            let (pp, secret) = params::load_master_secret(msk)?;
            if let Some(path) = params_path {
                let published = PublicParams::load(path)?;
                published.check_digest(&pp.digest_hex())?;
            }
            let report = params::validate(&pp, &secret);
            for check in &report.checks {
                t.push(check.name, if check.passed { "pass" } else { "FAIL" });
            }
            if !report.all_passed() {
                print!("{}", render(cli.format, &t));
                let failed: Vec<_> = report.failed().collect();
                return Err(Error::InvalidInput(format!(
                    "failed checks: {}",
                    failed.join(", ")
                )));
            }
            t.push("verdict", "VALID");
        }
        Command::Bench {
            security,
            parties: (lo, hi),
            reps,
            out,
        } => {
            let level: SecurityLevel = security.parse()?;
            let mut r = rng(cli, &["bench"]);
            let (pp, secret) = params::setup(level, &mut r)?;
            let mut store = Keystore::new(&pp);
            let pairs = (0..*hi)
                .map(|i| kgc::keygen(&mut store, &pp, &secret, &format!("b{i:04}"), &mut r))
                .collect::<Result<Vec<_>>>()?;
            let rows = bench::measure(&pp, &pairs, *lo..=*hi, *reps)?;
            let csv = bench::to_csv(&rows);
            let xs: Vec<f64> = rows.iter().map(|r| r.parties as f64).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.min().as_secs_f64() * 1e3).collect();
            if let Some(fit) = bench::linear_fit(&xs, &ys) {
                eprintln!(
                    "fit: slope={:.4} ms/party intercept={:.4} ms r2={:.4}",
                    fit.slope, fit.intercept, fit.r_squared
                );
            }
            return match out {
                Some(path) => {
                    std::fs::write(path, &csv)?;
                    t.push("rows", rows.len()).push("csv", path.display());
                    Ok(render(cli.format, &t))
                }
                None => Ok(csv),
            };
        }
    }
    Ok(render(cli.format, &t))
}

fn run_attack(cli: &Cli, attack: &AttackCmd, t: &mut Transcript) -> Result<()> {
    match attack {
        AttackCmd::FiatNaor {
            bits,
            prime_bits,
            n,
            a,
            ga,
            b,
            gb,
        } => {
            let (n, a, ga, b, gb, truth) = match (n, a, ga, b, gb) {
                (Some(n), Some(a), Some(ga), Some(b), Some(gb)) => (
                    n.clone(),
                    a.clone(),
                    ga.clone(),
                    b.clone(),
                    gb.clone(),
                    None,
                ),
                _ => {
                    let mut r = rng(cli, &["attack", "fiat-naor"]);
                    let mut authority = legacy::fn_setup(*bits, &mut r)?;
                    let u = authority.keygen(*prime_bits, &mut r)?;
                    let v = authority.keygen(*prime_bits, &mut r)?;
                    let fp = authority.params();
                    (fp.n().clone(), u.e, u.d, v.e, v.d, Some(fp.g.clone()))
                }
            };
            let ctx = numt::ModulusCtx::new(n.clone())?;
            t.push("scheme", Scheme::FiatNaor)
                .push_int("N", &n)
                .push_int("e_i", &a)
                .push_int("d_i", &ga)
                .push_int("e_j", &b)
                .push_int("d_j", &gb);
            let power = attacks::recover_gcd_power(&ctx, &a, &ga, &b, &gb)?;
            t.push_signed("s", &power.s)
                .push_signed("t", &power.t)
                .push_int("gcd", &power.gcd)
                .push_int("recovered_g", &power.value);
            if !power.gcd.is_one() {
                return Err(Error::NotCoprime { gcd: power.gcd });
            }
            if let Some(g) = truth {
                t.push_int("master_g", &g)
                    .push("verdict", verdict(g == power.value));
            }
        }
        AttackCmd::Eskeland {
            bits,
            users,
            target,
        } => {
            if *users < target + 2 || *target < 2 {
                return Err(Error::InvalidInput(
                    "need target >= 2 and at least target + 2 users".into(),
                ));
            }
            let mut r = rng(cli, &["attack", "eskeland"]);
            let mut authority = legacy::esk_setup(*bits, &mut r)?;
            let mut pairs = Vec::with_capacity(*users);
            while pairs.len() < *users {
                let e = numt::random_odd(64, &mut r);
                if pairs.iter().any(|p: &legacy::EskKeyPair| p.e == e) {
                    continue;
                }
                pairs.push(authority.keygen(&e, &mut r)?);
            }
            // Resample until the first two users have coprime keys.
            while !pairs[0].e.gcd(&pairs[1].e).is_one() {
                let e = numt::random_odd(64, &mut r);
                if pairs.iter().all(|p| p.e != e) {
                    pairs[1] = authority.keygen(&e, &mut r)?;
                }
            }
            let public = authority.params().public();
            let colluders = CollusionPair::new(
                Scheme::Eskeland,
                (pairs[0].e.clone(), pairs[0].d.clone()),
                (pairs[1].e.clone(), pairs[1].d.clone()),
            )?;
            let rec = colluders.recover_eskeland()?;
            let victims = &pairs[2..2 + target];
            let target_es: Vec<BigUint> = victims.iter().map(|p| p.e.clone()).collect();
            let forged = attacks::eskeland_forge_group_key(&public, &rec.u_prime, &target_es)?;
            let honest = legacy::esk_shared_key(&public, &victims[0], &target_es[1..])?;
            t.push("scheme", Scheme::Eskeland)
                .push("modulus_bits", public.n().bits())
                .push_int("e_i", &colluders.pair_a.0)
                .push_int("e_j", &colluders.pair_b.0)
                .push_signed("a", &rec.a)
                .push_signed("b", &rec.b)
                .push_signed("u_prime", &rec.u_prime)
                .push("target_size", target_es.len());
            for (i, e) in target_es.iter().enumerate() {
                t.push_int(format!("target_e_{i}"), e);
            }
            t.push_int("forged_key", &forged)
                .push_int("honest_key", &honest)
                .push("verdict", verdict(forged == honest));
        }
        AttackCmd::Probe {
            security,
            colluders,
            target,
            trials,
        } => {
            let level: SecurityLevel = security.parse()?;
            if *colluders < 2 || *target < 2 {
                return Err(Error::InvalidInput(
                    "need at least two colluders and two targets".into(),
                ));
            }
            let mut r = rng(cli, &["attack", "probe"]);
            let mut reproduced = 0usize;
            for trial in 0..*trials {
                let (pp, secret) = params::setup(level, &mut r)?;
                let mut store = Keystore::new(&pp);
                let pairs = (0..colluders + target)
                    .map(|i| kgc::keygen(&mut store, &pp, &secret, &format!("p{i:03}"), &mut r))
                    .collect::<Result<Vec<_>>>()?;
                let (coalition, victims) = pairs.split_at(*colluders);
                let target_es: Vec<BigUint> = victims.iter().map(|p| p.e.clone()).collect();
                let report = attacks::proposed_scheme_attack_probe(&pp, coalition, &target_es)?;
                let honest = nike::shared_key(&pp, &victims[0], &target_es[1..])?;
                let hit = report.reproduces(honest.key());
                reproduced += usize::from(hit);
                let prefix = format!("trial_{trial}");
                t.push(format!("{prefix}.N"), numt::to_hex(pp.n()))
                    .push_int(format!("{prefix}.combined_e"), &report.combined_e)
                    .push(format!("{prefix}.root_consistent"), report.root_consistent)
                    .push(format!("{prefix}.forged"), report.forged_key.is_some())
                    .push(format!("{prefix}.verdict"), verdict(hit));
            }
            t.push("scheme", Scheme::Proposed)
                .push("trials", trials)
                .push("reproduced", reproduced);
        }
    }
    Ok(())
}

fn verdict(hit: bool) -> &'static str {
    if hit {
        "MATCH"
    } else {
        "NO-MATCH"
    }
}

fn render(format: Format, t: &Transcript) -> String {
    match format {
        Format::Text => t.to_text(),
        Format::Record => format!("status=ok\n{}", t.to_records()),
    }
}

/// Per-command randomness: derived from `--seed` and a label, or from the OS.
fn rng(cli: &Cli, label: &[&str]) -> ChaCha20Rng {
    match &cli.seed {
        Some(seed) => {
            let mut material = seed.0.clone();
            for part in label {
                material.push(0);
                material.extend_from_slice(part.as_bytes());
            }
            numt::seeded_rng(&material)
        }
        None => numt::os_seeded_rng(),
    }
}

fn load_key(pp: &PublicParams, source: &KeySource) -> Result<KeyPair> {
    match (&source.key, &source.keystore, &source.user) {
        (Some(path), _, _) => KeyPair::load(path, pp),
        (None, Some(store), Some(user)) => Ok(Keystore::load(store, pp)?.require(user)?.key_pair()),
        _ => Err(Error::InvalidInput(
            "give --key or --keystore with --user".into(),
        )),
    }
}

fn group_others(
    pp: &PublicParams,
    my: &KeyPair,
    key: &KeySource,
    group: &GroupSource,
) -> Result<Vec<BigUint>> {
    match &group.group {
        Some(path) => GroupDescriptor::load(path, pp)?.others(&my.e),
        None => Resolver::open(pp, group.directory.as_deref(), key.keystore.as_deref())?
            .resolve(&group.with),
    }
}

/// Maps user ids to public keys from a directory or a keystore.
enum Resolver {
    Directory(Directory),
    Keystore(Keystore),
}

impl Resolver {
    fn open(pp: &PublicParams, directory: Option<&Path>, keystore: Option<&Path>) -> Result<Self> {
        match (directory, keystore) {
            (Some(path), _) => Ok(Resolver::Directory(Directory::load(path, pp)?)),
            (None, Some(path)) => Ok(Resolver::Keystore(Keystore::load(path, pp)?)),
            (None, None) => Err(Error::InvalidInput(
                "user ids need --directory or --keystore to resolve".into(),
            )),
        }
    }

    fn resolve(&self, users: &[String]) -> Result<Vec<BigUint>> {
        users
            .iter()
            .map(|u| match self {
                Resolver::Directory(d) => d.require(u).cloned(),
                Resolver::Keystore(s) => s.require(u).map(|r| r.e.clone()),
            })
            .collect()
    }
}
