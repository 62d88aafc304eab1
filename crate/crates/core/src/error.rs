use thiserror::Error;

use crate::lattice::Site;

/// Errors raised across the toolkit.
///
/// Variants fall in three groups: contract violations on inputs (`Precondition`,
/// `BadInitial`, ...), family validation failures (`TorusTooSmall`,
/// `NotRangeClosed`, ...) and property violations detected while running
/// (`PropertyViolation`). The CLI maps the last group to exit code 1 and
/// everything else to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice dimension must be 1, 2 or 3 (got {0})")]
    InvalidDimension(usize),
    #[error("torus side lengths must be at least 2 (got {0:?})")]
    TorusSideTooSmall(Vec<i64>),
    #[error("operation requires a torus lattice")]
    UnboundedLattice,
    #[error("site {0} has dimension {1}, expected {2}")]
    DimensionMismatch(Site, usize, usize),
    #[error("torus sides {sides:?} too small: each side must exceed twice the range extent {extent:?}")]
    TorusTooSmall { sides: Vec<i64>, extent: Vec<i64> },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("invalid rate {0}: rates must be finite and positive")]
    InvalidRate(f64),
    #[error("duplicate base permutation {0}")]
    DuplicatePermutation(String),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("family is not range-closed: {0}")]
    NotRangeClosed(String),
    #[error("family is not symmetric (q(σ) ≠ q(σ⁻¹) for some σ)")]
    NotSymmetric,
    #[error("no cyclic permutation of the range covers the requested word pair")]
    NoCover,
    #[error("bad initial state: {0}")]
    BadInitial(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("state space too large: {sites} sites (limit {limit})")]
    TooLarge { sites: usize, limit: usize },
    #[error("particle-number sector {0} is not irreducible")]
    SectorReducible(usize),
    #[error("property violation: {0}")]
    PropertyViolation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
