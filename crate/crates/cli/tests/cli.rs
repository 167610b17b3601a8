use std::path::Path;
use std::process::{Command, Output};

use mpnike::params;

/// Runs the binary in `dir`; `args` is split on whitespace.
fn mpnike(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpnike"))
        .current_dir(dir)
        .args(args.split_whitespace())
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &str) -> String {
    let out = mpnike(dir, args);
    assert!(
        out.status.success(),
        "{args} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a command expected to fail with exit code 1; returns the error kind.
fn domain_error(dir: &Path, args: &str) -> String {
    let out = mpnike(dir, &format!("--format record {args}"));
    assert_eq!(out.status.code(), Some(1), "{args}");
    field(&String::from_utf8(out.stdout).unwrap(), "kind")
}

fn field(records: &str, key: &str) -> String {
    records
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {records}"))
        .to_string()
}

/// Toy setup with alice, bob and carol issued.
fn provision(dir: &Path, seed: &str) {
    ok(
        dir,
        &format!("--seed {seed} setup --security toy:64 --params pp --msk msk --keystore ks"),
    );
    ok(
        dir,
        &format!(
            "--seed {seed} issue --msk msk --keystore ks --user alice --user bob --user carol"
        ),
    );
}

#[test]
fn members_agree_on_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    provision(dir, "aa");
    ok(dir, "directory --params pp --keystore ks --out dir");
    ok(
        dir,
        "group --params pp --directory dir --member alice,bob,carol --out g",
    );
    let keys: Vec<String> = ["alice", "bob", "carol"]
        .iter()
        .map(|u| {
            let out = ok(
                dir,
                &format!("--format record derive --params pp --keystore ks --user {u} --group g --reveal"),
            );
            field(&out, "key")
        })
        .collect();
    assert_eq!(keys[0].len(), 64);
    assert!(keys.iter().all(|k| *k == keys[0]));

    // --with resolves the same group by name.
    let out = ok(
        dir,
        "--format record derive --params pp --keystore ks --user bob --with carol,alice --reveal",
    );
    assert_eq!(field(&out, "key"), keys[0]);
}

#[test]
fn key_is_hidden_without_reveal() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    provision(dir, "ab");
    let out = ok(
        dir,
        "--format record derive --params pp --keystore ks --user alice --with bob",
    );
    assert!(out.lines().all(|l| !l.starts_with("key=")));
    assert_eq!(field(&out, "fingerprint").len(), 16);
}

#[test]
fn join_matches_fresh_group() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    provision(dir, "ac");
    ok(
        dir,
        "issue --msk msk --keystore ks --user dave --key-out dave.key",
    );
    ok(
        dir,
        "group --params pp --keystore ks --member alice,bob --out g",
    );
    let joined = ok(
        dir,
        "--format record join --params pp --keystore ks --user alice --group g --add-user dave --out g2 --reveal",
    );
    let fresh = ok(
        dir,
        "--format record derive --params pp --key dave.key --group g2 --reveal",
    );
    assert_eq!(field(&joined, "key"), field(&fresh, "key"));
}

#[test]
fn broadcast_round_trip_and_outsider() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    provision(dir, "ad");
    std::fs::write(dir.join("msg"), b"attack at dawn").unwrap();
    ok(
        dir,
        "broadcast encrypt --params pp --keystore ks --to alice,carol --in msg --out ct",
    );
    ok(
        dir,
        "broadcast decrypt --params pp --keystore ks --user carol --in ct --out plain",
    );
    assert_eq!(std::fs::read(dir.join("plain")).unwrap(), b"attack at dawn");

    let as_bob = "broadcast decrypt --params pp --keystore ks --user bob --in ct --out x";
    assert_eq!(domain_error(dir, as_bob), "NotAuthorized");

    let mut ct = std::fs::read(dir.join("ct")).unwrap();
    let last = ct.len() - 1;
    ct[last] ^= 1;
    std::fs::write(dir.join("ct"), ct).unwrap();
    let as_carol = "broadcast decrypt --params pp --keystore ks --user carol --in ct --out x";
    assert_eq!(domain_error(dir, as_carol), "AuthFailure");
}

#[test]
fn mismatched_params_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    provision(dir, "ae");
    ok(
        dir,
        "--seed ff setup --security toy:64 --params pp2 --msk msk2",
    );
    let derive = "derive --params pp2 --keystore ks --user alice --with bob";
    assert_eq!(domain_error(dir, derive), "ParamsMismatch");
    let validate = "validate --msk msk --params pp2";
    assert_eq!(domain_error(dir, validate), "ParamsMismatch");
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        "derive --bogus",
        "setup",
        "--seed xyz setup --params a --msk b",
        "bench --parties 1..4",
        "derive --params pp --key k --keystore ks --user u --with x",
    ] {
        assert_eq!(mpnike(tmp.path(), args).status.code(), Some(2), "{args}");
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        provision(dir, "0badcafe");
        ok(dir, "issue --msk msk --keystore ks --user dave");
        std::fs::write(dir.join("msg"), b"same").unwrap();
        ok(
            dir,
            "--seed 0badcafe broadcast encrypt --params pp --keystore ks --to alice,bob --in msg --out ct",
        );
    }
    for file in ["pp", "msk", "ct"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
    // Keystores differ only in issuance timestamps; dave was issued unseeded.
    let strip = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p.join("ks"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("dave\t"))
            .map(|l| l.rsplit_once('\t').map_or(l, |(head, _)| head).to_string())
            .collect()
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn public_outputs_carry_no_master_secret() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    provision(dir, "af");
    ok(dir, "directory --params pp --keystore ks --out dir");
    ok(
        dir,
        "group --params pp --directory dir --member alice,bob --out g",
    );
    std::fs::write(dir.join("msg"), b"x").unwrap();
    ok(
        dir,
        "broadcast encrypt --params pp --keystore ks --to alice,bob --in msg --out ct",
    );

    let (_, msk) = params::load_master_secret(dir.join("msk")).unwrap();
    let secrets = [&msk.p, &msk.z, &msk.q, &msk.g, &msk.p_prime, &msk.q_prime];
    for file in ["pp", "dir", "g", "ct"] {
        let bytes = std::fs::read(dir.join(file)).unwrap();
        let text = String::from_utf8_lossy(&bytes).to_lowercase();
        for s in secrets {
            assert!(!text.contains(&s.to_str_radix(16)), "{file} leaks hex");
            assert!(!text.contains(&s.to_str_radix(10)), "{file} leaks decimal");
            let raw = s.to_bytes_be();
            assert!(
                !bytes.windows(raw.len()).any(|w| w == raw),
                "{file} leaks bytes"
            );
        }
    }
}

#[cfg(unix)]
#[test]
fn secret_files_are_owner_only() {
    use std::os::unix::fs::PermissionsExt;
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    provision(dir, "b0");
    ok(
        dir,
        "export-key --params pp --keystore ks --user bob --out bob.key",
    );
    for file in ["msk", "ks", "bob.key"] {
        let mode = std::fs::metadata(dir.join(file))
            .unwrap()
            .permissions()
            .mode();
        assert_eq!(mode & 0o777, 0o600, "{file}");
    }
}

#[test]
fn attack_demos() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = ok(
        dir,
        "--format record attack fiat-naor --n 35 --a 5 --ga 32 --b 7 --gb 23",
    );
    assert_eq!(field(&out, "recovered_g"), "2");
    assert_eq!(field(&out, "s"), "3");
    assert_eq!(field(&out, "t"), "-2");

    let out = ok(dir, "--seed 01 --format record attack fiat-naor");
    assert_eq!(field(&out, "verdict"), "MATCH");

    let out = ok(dir, "--seed 01 --format record attack eskeland --bits 128");
    assert_eq!(field(&out, "verdict"), "MATCH");

    let out = ok(dir, "--seed 01 --format record attack probe --trials 2");
    assert_eq!(field(&out, "trials"), "2");
    assert_eq!(field(&out, "trial_0.root_consistent"), "true");
}

#[test]
fn bench_reports_exact_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(
        tmp.path(),
        "--seed 01 bench --security toy:64 --parties 2..6 --reps 2",
    );
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("parties,modexps,repetitions,min_ms,mean_ms")
    );
    for (line, parties) in lines.zip(2..) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], parties.to_string());
        assert_eq!(cols[1], (parties - 1).to_string());
        assert_eq!(cols[2], "2");
    }
}
