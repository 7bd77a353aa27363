use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("matrix `{matrix}` is singular or numerically singular (condition estimate {condition:.3e})")]
    Singular { matrix: String, condition: f64 },

    #[error("system matrix is not Schur stable (spectral radius {spectral_radius})")]
    Unstable { spectral_radius: f64 },

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("no feasible input sequence{}", step_suffix(*.step))]
    Infeasible { step: Option<usize> },

    #[error("enumeration of {required} candidates exceeds the configured cap of {cap}")]
    Capacity { required: u128, cap: u64 },

    #[error("periodicity certificate failed: residual {residual:.3e} exceeds {tolerance:.1e}")]
    Certificate { residual: f64, tolerance: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(k) => format!(" at simulation step {k}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn dimension(
        context: impl Into<String>,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Dimension { .. } | Error::Json(_) => 2,
            Error::Singular { .. } | Error::Unstable { .. } | Error::Certificate { .. } => 3,
            Error::Infeasible { .. } => 4,
            Error::Capacity { .. } => 5,
            Error::Io { .. } | Error::Csv(_) => 1,
        }
    }
}
