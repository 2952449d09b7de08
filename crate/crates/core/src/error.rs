use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset is empty: {0}")]
    EmptyDataset(&'static str),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("model document: {0}")]
    ModelFormat(String),

    #[error("model expects {expected} features but the data has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("model is for {model} but the data is {data}")]
    TaskMismatch {
        model: &'static str,
        data: &'static str,
    },

    #[error("oracle refused: {steps:.3e} elementary steps exceed the budget of {budget:.3e}")]
    BudgetExceeded { steps: f64, budget: f64 },
}
