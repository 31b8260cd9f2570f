use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ill-posed feedback interconnection: (I + D_c D) is singular")]
    IllPosedLoop,

    #[error("riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    RiccatiNonConvergence { iterations: usize, residual: f64 },

    #[error("pair is not detectable: {0}")]
    NotDetectable(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing data block: {0}")]
    MissingBlock(String),

    #[error("rank deficient {block}: numerical rank {rank} < {required}")]
    RankDeficient {
        block: String,
        rank: usize,
        required: usize,
    },

    #[error("singular KKT system")]
    SingularKkt,

    #[error("qp solver stopped with status {status:?} after {iterations} iterations")]
    QpFailed {
        status: crate::qp::QpStatus,
        iterations: usize,
    },

    #[error("{variant} failed at step {step}: {source}")]
    Controller {
        variant: String,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {message}")]
    Config { message: String, keys: Vec<String> },

    #[error("SNR calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(message: impl Into<String>, keys: Vec<String>) -> Self {
        Error::Config {
            message: message.into(),
            keys,
        }
    }

    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::IllPosedLoop => "ill_posed_loop",
            Error::RiccatiNonConvergence { .. } => "riccati_non_convergence",
            Error::NotDetectable(_) => "not_detectable",
            Error::InsufficientData(_) => "insufficient_data",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::MissingBlock(_) => "missing_block",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::SingularKkt => "singular_kkt",
            Error::QpFailed { .. } => "qp_failed",
            Error::Controller { .. } => "controller",
            Error::Config { .. } => "config",
            Error::Calibration(_) => "calibration",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// Machine-readable report: `{"error": {"kind", "message", "keys"?}}`.
    pub fn report(&self) -> serde_json::Value {
        let mut body = serde_json::json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        if let Error::Config { keys, .. } = self {
            body["keys"] = serde_json::json!(keys);
        }
        serde_json::json!({ "error": body })
    }
}
