//! `mpnike`: operator command line for parameter setup, key issuance, group
//! key derivation, broadcast encryption, collusion attack demos and
//! benchmarks.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

mod cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "mpnike",
    version,
    about = "Multi-party non-interactive key exchange toolkit"
)]
pub struct Cli {
    /// Output style: aligned text or `key=value` records.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Hex seed; makes every random choice of the command reproducible.
    #[arg(long, global = true, value_parser = parse_seed)]
    pub seed: Option<Seed>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed(pub Vec<u8>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Record,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate public parameters and the master secret.
    Setup {
        /// 80, 112, 128, toy or toy:<bits>.
        #[arg(long, default_value = "80")]
        security: String,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        msk: PathBuf,
        /// Also create an empty keystore here.
        #[arg(long)]
        keystore: Option<PathBuf>,
    },
    /// Issue key pairs (KGC side). Creates the keystore if missing.
    Issue {
        #[arg(long)]
        msk: PathBuf,
        #[arg(long)]
        keystore: PathBuf,
        /// User id; repeat for several users.
        #[arg(long = "user", required = true)]
        users: Vec<String>,
        /// Write the key file of a single issued user here.
        #[arg(long)]
        key_out: Option<PathBuf>,
        /// Keep y and k in the keystore (needed by the closed-form checks).
        #[arg(long)]
        retain_exponents: bool,
    },
    /// Write a single user's key file from the keystore.
    ExportKey {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        keystore: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the public directory (user ids and public keys).
    Directory {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        keystore: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a group descriptor for the named users.
    Group {
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        lookup: Lookup,
        /// Member user ids; repeat or comma-separate.
        #[arg(long = "member", required = true, value_delimiter = ',')]
        members: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive the shared key of a group.
    Derive {
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        key: KeySource,
        #[command(flatten)]
        group: GroupSource,
        /// Print the key itself instead of only its fingerprint.
        #[arg(long)]
        reveal: bool,
    },
    /// Extend a derived group key by one member without re-deriving.
    Join {
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        key: KeySource,
        #[command(flatten)]
        group: GroupSource,
        /// Public key (hex) of the joining member.
        #[arg(long, conflicts_with = "add_user")]
        add_e: Option<String>,
        /// User id of the joining member, looked up like group members.
        #[arg(long)]
        add_user: Option<String>,
        /// Write the extended group descriptor here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        reveal: bool,
    },
    /// Broadcast encryption.
    #[command(subcommand)]
    Broadcast(BroadcastCmd),
    /// Collusion attack demonstrations.
    #[command(subcommand)]
    Attack(AttackCmd),
    /// Check the structure of parameters against the master secret.
    Validate {
        #[arg(long)]
        msk: PathBuf,
        /// Also check that this parameter file matches the master secret.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Time derivations and count exponentiations per group size; CSV out.
    Bench {
        #[arg(long, default_value = "80")]
        security: String,
        /// Range `a..b` (inclusive) or a single size.
        #[arg(long, default_value = "2..20", value_parser = parse_range)]
        parties: (usize, usize),
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum BroadcastCmd {
    /// Encrypt a file for a set of users (server side, needs the keystore).
    Encrypt {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        keystore: PathBuf,
        #[arg(long = "to", required = true, value_delimiter = ',')]
        to: Vec<String>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decrypt as one of the authorized members.
    Decrypt {
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        key: KeySource,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum AttackCmd {
    /// Recover the Fiat-Naor master generator from two colluders.
    ///
    /// Without explicit values a fresh instance is generated.
    FiatNaor {
        /// Modulus bits for the generated instance.
        #[arg(long, default_value_t = 256)]
        bits: u64,
        /// Bits of the users' prime exponents.
        #[arg(long, default_value_t = 64)]
        prime_bits: u64,
        #[arg(long, value_parser = parse_int, requires_all = ["a", "ga", "b", "gb"])]
        n: Option<num_bigint::BigUint>,
        #[arg(long, value_parser = parse_int)]
        a: Option<num_bigint::BigUint>,
        #[arg(long, value_parser = parse_int)]
        ga: Option<num_bigint::BigUint>,
        #[arg(long, value_parser = parse_int)]
        b: Option<num_bigint::BigUint>,
        #[arg(long, value_parser = parse_int)]
        gb: Option<num_bigint::BigUint>,
    },
    /// Forge an Eskeland group key from two colluders' key pairs.
    Eskeland {
        #[arg(long, default_value_t = 512)]
        bits: u64,
        /// Users issued in the generated instance.
        #[arg(long, default_value_t = 6)]
        users: usize,
        /// Size of the targeted group (drawn from the non-colluders).
        #[arg(long, default_value_t = 3)]
        target: usize,
    },
    /// Run the same pipeline against this scheme's keys.
    Probe {
        #[arg(long, default_value = "toy:32")]
        security: String,
        #[arg(long, default_value_t = 2)]
        colluders: usize,
        #[arg(long, default_value_t = 3)]
        target: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
}

/// Where the deriving user's key pair comes from.
#[derive(Args, Debug, Clone)]
pub struct KeySource {
    /// Key file written by `issue --key-out` or `export-key`.
    #[arg(long, conflicts_with_all = ["keystore", "user"], required_unless_present = "user")]
    pub key: Option<PathBuf>,
    #[arg(long, requires = "user")]
    pub keystore: Option<PathBuf>,
    #[arg(long, requires = "keystore")]
    pub user: Option<String>,
}

/// Group members: a descriptor file or user ids resolved via a directory.
#[derive(Args, Debug, Clone)]
pub struct GroupSource {
    #[arg(long, conflicts_with = "with", required_unless_present = "with")]
    pub group: Option<PathBuf>,
    /// Other members' user ids; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    pub with: Vec<String>,
    /// Public directory used to resolve user ids.
    #[arg(long)]
    pub directory: Option<PathBuf>,
}

/// Resolves user ids to public keys.
#[derive(Args, Debug, Clone)]
pub struct Lookup {
    #[arg(long, required_unless_present = "keystore")]
    pub directory: Option<PathBuf>,
    #[arg(long)]
    pub keystore: Option<PathBuf>,
}

fn parse_seed(s: &str) -> Result<Seed, String> {
    if s.is_empty() {
        return Err("seed must not be empty".into());
    }
    let padded = if s.len() % 2 == 1 {
        format!("0{s}")
    } else {
        s.to_string()
    };
    hex::decode(padded)
        .map(Seed)
        .map_err(|_| format!("seed must be hex, got {s:?}"))
}

/// Decimal, or hex with a `0x` prefix.
fn parse_int(s: &str) -> Result<num_bigint::BigUint, String> {
    let parsed = match s.strip_prefix("0x") {
        Some(hex) => num_bigint::BigUint::parse_bytes(hex.as_bytes(), 16),
        None => num_bigint::BigUint::parse_bytes(s.as_bytes(), 10),
    };
    parsed.ok_or_else(|| format!("not an integer: {s:?}"))
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("expected a..b or a single size, got {s:?}");
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let lo: usize = lo.parse().map_err(|_| bad())?;
    let hi: usize = hi.parse().map_err(|_| bad())?;
    if lo < 2 || hi < lo {
        return Err(format!("need 2 <= a <= b, got {s:?}"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cmd::run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            match cli.format {
                Format::Text => eprintln!("error[{}]: {err}", err.kind()),
                Format::Record => {
                    println!("status=error\nkind={}\nmessage={err}", err.kind())
                }
            }
            ExitCode::from(1)
        }
    }
}
