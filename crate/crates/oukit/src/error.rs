//! Error type shared by every module in the crate.

use thiserror::Error;

use crate::report::EstimateReport;

/// Which side of the open interval (0, 1) a regression slope fell on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaSide {
    /// beta <= 0: the fitted dynamics are anti-persistent or the fit is pure noise.
    NonPositive,
    /// beta >= 1: the fitted dynamics have a unit root or are explosive.
    UnitRootOrAbove,
}

impl std::fmt::Display for BetaSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BetaSide::NonPositive => write!(f, "beta <= 0"),
            BetaSide::UnitRootOrAbove => write!(f, "beta >= 1"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A domain-type invariant was violated at construction time.
    /// `name` matches the field (and CLI flag) name.
    #[error("parameter `{name}` {reason}, got {value}")]
    InvalidParam {
        name: &'static str,
        reason: &'static str,
        value: f64,
    },

    /// A simulation request would allocate more matrix elements than the budget allows.
    #[error("requested {requested} path values exceeds the element budget of {budget}")]
    CapacityExceeded { requested: u128, budget: u64 },

    /// Pooled predictor variance too small for a regression to be meaningful.
    #[error("degenerate regression design: pooled predictor variance {variance:e} below {threshold:e}")]
    DegenerateDesign { variance: f64, threshold: f64 },

    /// Not enough pooled observations for the requested fit.
    #[error("need at least {needed} pooled observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    /// AR(1) slope outside (0, 1); parameter recovery is undefined.
    #[error("regression slope {beta} out of range: {side}")]
    BetaOutOfRange { beta: f64, side: BetaSide },

    /// A filter or optimizer produced a value the algebra forbids.
    #[error("numerical breakdown: {what}")]
    NumericalBreakdown { what: &'static str },

    /// Optimizer hit its iteration cap; carries the best estimate seen.
    #[error("optimizer did not converge within {iterations} iterations (simplex diameter {diameter:e})")]
    DidNotConverge {
        iterations: usize,
        diameter: f64,
        best: Box<EstimateReport>,
    },

    /// Matrix or batch dimensions do not line up.
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Trajectory shorter than the requested feature length.
    #[error("trajectory of {len} points is too short to resample to {feature_len} features")]
    TooShort { len: usize, feature_len: usize },

    /// A configuration struct failed validation.
    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },

    /// Text input (CSV, grid file, checkpoint) failed to parse; 1-based line number.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// A checkpoint file is malformed or inconsistent.
    #[error("checkpoint error: {reason}")]
    Checkpoint { reason: String },

    /// Nothing to serialize or aggregate.
    #[error("empty result: {what}")]
    EmptyResult { what: &'static str },

    /// I/O failure on a named file.
    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// I/O failure on an anonymous reader or writer.
    #[error("i/o error: {0}")]
    IoStream(#[from] std::io::Error),
}

impl Error {
    /// Short stable tag for benchmark failure rows.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::InvalidParam { .. } => "invalid_param",
            Error::CapacityExceeded { .. } => "capacity_exceeded",
            Error::DegenerateDesign { .. } => "degenerate_design",
            Error::TooFewObservations { .. } => "too_few_observations",
            Error::BetaOutOfRange { .. } => "beta_out_of_range",
            Error::NumericalBreakdown { .. } => "numerical_breakdown",
            Error::DidNotConverge { .. } => "did_not_converge",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::TooShort { .. } => "too_short",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::Parse { .. } => "parse_error",
            Error::Checkpoint { .. } => "checkpoint_error",
            Error::EmptyResult { .. } => "empty_result",
            Error::Io { .. } | Error::IoStream(_) => "io_error",
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
