use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("dictionary error: {0}")]
    Dictionary(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("logistic fit diverged ({0}); perfectly separable data needs l2 > 0")]
    Divergence(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("threshold error: {0}")]
    Threshold(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("oracle scope exceeded: {0}")]
    OracleScope(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
