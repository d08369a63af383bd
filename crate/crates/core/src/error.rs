use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // data model
    #[error("schema names column `{0}` which is absent from the CSV header")]
    MissingColumn(String),
    #[error("role violation: {0}")]
    RoleViolation(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("parse error at row {row}, column `{column}`: cannot read `{value}` as a number")]
    ParseError {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("dataset has no data rows")]
    EmptyData,
    #[error("sensitive column `{0}` has fewer than two categories")]
    SensitiveArity(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is numeric and cannot be used for exact stratification")]
    NumericConditioning(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    // distribution
    #[error("row and column variables refer to the same column `{0}`")]
    SameVariable(String),
    #[error("table is empty and no smoothing was requested")]
    EmptyTable,
    #[error("no stratum has at least {min_count} records; use soft conditioning instead")]
    AllStrataDropped { min_count: usize },

    // measures
    #[error("contingency table has fewer than two non-empty rows or columns")]
    DegenerateTable,
    #[error("sensitive category index {0} has zero marginal probability")]
    MissingClass(usize),

    // criteria
    #[error("criterion conditions on numeric feature `{0}`; use soft evaluation")]
    ContinuousConditioning(String),
    #[error("empty selection: {0}")]
    EmptySelection(String),
    #[error("invalid threshold {0}: must be positive and finite")]
    InvalidThreshold(f64),

    // neighborhood
    #[error("dataset has no feature columns to measure distance over")]
    NoFeatures,
    #[error("invalid distance specification: {0}")]
    InvalidDistance(String),
    #[error("invalid neighborhood specification: {0}")]
    InvalidNeighborhood(String),
    #[error("criterion `{0}` does not condition on the feature vector")]
    GroupCriterion(String),
    #[error("every record's neighborhood is below the minimum size {0}")]
    AllIndeterminate(usize),
    #[error("invalid soft evaluation parameter: {0}")]
    InvalidSoftParams(String),

    // lipschitz
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("mapped vector of record {0} is not a probability vector")]
    NotAProbabilityVector(usize),

    // synth
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid scenario parameters: {0}")]
    InvalidParams(String),

    // cli / report
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attaches the file the error came from.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
