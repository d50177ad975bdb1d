use thiserror::Error;

/// Errors raised by the cube, operator, entropy and landscape routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("table for n={n} needs {expected} values, got {found}")]
    TableLength {
        n: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension {n} exceeds the dense-table limit {max}")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("norm exponent must be >= 1, got {0}")]
    InvalidExponent(f64),

    #[error("negative value {value} at index {index}")]
    NegativeValue { index: usize, value: f64 },

    #[error("non-integer value {value} at index {index}")]
    NonInteger { index: usize, value: f64 },

    #[error("value {value} at index {index} is not a 0/1 indicator")]
    NotIndicator { index: usize, value: f64 },

    #[error("invalid noise parameter (r={r}, s={s}): need r >= 1 and 0 <= s <= r")]
    InvalidNoiseParam { r: u64, s: u64 },

    #[error("correlation {0} outside [0, 1]")]
    InvalidCorrelation(f64),

    #[error("{0} must be nonempty")]
    EmptySet(&'static str),

    #[error("function {0} is identically zero")]
    ZeroFunction(&'static str),

    #[error("no triple has positive weight (s=0 with disjoint sets)")]
    EmptyTripleSupport,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid bit joint: {0}")]
    InvalidBitJoint(String),

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("coordinate {i} outside 1..={n}")]
    CoordinateOutOfRange { i: usize, n: usize },

    #[error("past at coordinate {i} is not achievable")]
    UnachievablePast { i: usize },

    #[error("exhaustive sweep over n={n} is infeasible (limit {max})")]
    InfeasibleSweep { n: usize, max: usize },

    #[error("perturbation needs two zeros in one row or column, got {0:?}")]
    BoundaryShape(crate::fdelta::ZeroPattern),

    #[error("delta = 1 is degenerate for {0}")]
    DegenerateDelta(&'static str),

    #[error("log2(delta) undefined: delta = {delta} with Pr[X != Y] = {disagreement}")]
    UndefinedLogDelta { delta: f64, disagreement: f64 },

    #[error("weight function is not positive at index {index}, where the distribution has mass")]
    NonPositiveOnSupport { index: usize },

    #[error("support of {name} does not match the declared set at index {index}")]
    SupportMismatch { name: &'static str, index: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
