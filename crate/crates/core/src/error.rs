use num_bigint::BigUint;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A negative-exponent request hit a base sharing a factor with the
    /// modulus. `gcd` is a non-trivial divisor of N.
    #[error("base is not invertible modulo N (gcd = {gcd:x})")]
    NotInvertible { gcd: BigUint },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("gave up after {attempts} attempts: {what}")]
    ExhaustedAttempts { what: &'static str, attempts: usize },

    #[error("invalid security level: {0}")]
    InvalidLevel(String),

    #[error("user {0:?} already has a key pair")]
    DuplicateUser(String),

    #[error("unknown user {0:?}")]
    UnknownUser(String),

    #[error("could not find a unique public key within the collision budget")]
    CollisionBudgetExceeded,

    #[error("group has no other members")]
    EmptyGroup,

    #[error("own public key listed among the other members")]
    SelfInGroup,

    #[error("group element collapsed to 1; the key material is invalid")]
    DegenerateResult,

    #[error("public key is already a member of the group")]
    AlreadyMember,

    #[error("value out of range for this modulus")]
    OutOfRange,

    #[error("exponents are not coprime (gcd = {gcd})")]
    NotCoprime { gcd: BigUint },

    #[error("authorized set needs at least two members")]
    GroupTooSmall,

    #[error("public key is not in the authorized list")]
    NotAuthorized,

    #[error("authentication failed")]
    AuthFailure,

    #[error("parameter digest mismatch (expected {expected}, found {found})")]
    ParamsMismatch { expected: String, found: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable variant name, used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotInvertible { .. } => "NotInvertible",
            Error::InvalidInput(_) => "InvalidInput",
            Error::ExhaustedAttempts { .. } => "ExhaustedAttempts",
            Error::InvalidLevel(_) => "InvalidLevel",
            Error::DuplicateUser(_) => "DuplicateUser",
            Error::UnknownUser(_) => "UnknownUser",
            Error::CollisionBudgetExceeded => "CollisionBudgetExceeded",
            Error::EmptyGroup => "EmptyGroup",
            Error::SelfInGroup => "SelfInGroup",
            Error::DegenerateResult => "DegenerateResult",
            Error::AlreadyMember => "AlreadyMember",
            Error::OutOfRange => "OutOfRange",
            Error::NotCoprime { .. } => "NotCoprime",
            Error::GroupTooSmall => "GroupTooSmall",
            Error::NotAuthorized => "NotAuthorized",
            Error::AuthFailure => "AuthFailure",
            Error::ParamsMismatch { .. } => "ParamsMismatch",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
        }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
