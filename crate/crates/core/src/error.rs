use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("budget exhausted: requested (eps={requested_epsilon}, delta={requested_delta}) with (eps={spent_epsilon}, delta={spent_delta}) of cap (eps={cap_epsilon}, delta={cap_delta}) already spent")]
    BudgetExhausted {
        requested_epsilon: f64,
        requested_delta: f64,
        spent_epsilon: f64,
        spent_delta: f64,
        cap_epsilon: f64,
        cap_delta: f64,
    },

    #[error("unknown group {0:?}")]
    UnknownGroup(String),

    #[error("group {0} has no records")]
    EmptyGroup(u8),

    #[error("group {group} has no records with label {missing_label}")]
    DegenerateLabels { group: u8, missing_label: u8 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("both likelihoods are zero")]
    BothLikelihoodsZero,

    #[error("no finite sample size satisfies the constraints: {0}")]
    Infeasible(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("malformed dataset {path}: {reason}")]
    Dataset { path: PathBuf, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable variant name, used in CLI diagnostics and FFI error codes.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::BudgetExhausted { .. } => "BudgetExhausted",
            Error::UnknownGroup(_) => "UnknownGroup",
            Error::EmptyGroup(_) => "EmptyGroup",
            Error::DegenerateLabels { .. } => "DegenerateLabels",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::BothLikelihoodsZero => "BothLikelihoodsZero",
            Error::Infeasible(_) => "Infeasible",
            Error::NonFinite(_) => "NonFinite",
            Error::EmptyInput(_) => "EmptyInput",
            Error::Dataset { .. } => "Dataset",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
            Error::Io(_) => "Io",
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Fails with `InvalidParameter` unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}

pub(crate) fn ensure_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in (0, 1), got {value}")))
    }
}

pub(crate) fn ensure_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in [0, 1], got {value}")))
    }
}
