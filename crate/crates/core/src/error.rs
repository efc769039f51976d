use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation was handed a dataset it cannot work on.
    #[error("invalid dataset: {0}")]
    Dataset(String),

    /// A metric is undefined for the given inputs (empty class, zero denominator).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    /// A requested cluster geometry cannot be embedded.
    #[error("infeasible geometry: {0}")]
    Geometry(String),

    /// The premises of a theoretical claim do not hold for the given geometry.
    #[error("premise violated: {0}")]
    Premise(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
