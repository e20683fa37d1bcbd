use thiserror::Error;

/// Problems found while reading an instance or allocation document.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("missing or mistyped field `{0}`")]
    Field(&'static str),
    #[error("`agents` must be at least 1")]
    NoAgents,
    #[error("`agents` is {declared} but `values` has {rows} rows")]
    RowCount { declared: usize, rows: usize },
    #[error("ragged `values` matrix: row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("`values[{row}][{col}]` has a zero denominator")]
    ZeroDenominator { row: usize, col: usize },
    #[error("`values[{row}][{col}]` is not a number: {text:?}")]
    BadValue {
        row: usize,
        col: usize,
        text: String,
    },
    #[error("duplicate item label {0:?} in `items`")]
    DuplicateLabel(String),
    #[error("unknown item label {0:?} in `bundles`")]
    UnknownLabel(String),
    #[error("`bundles` has {found} bundles, expected {expected}")]
    BundleCount { expected: usize, found: usize },
    #[error("not a partition: item {0:?} is assigned more than once")]
    Duplicated(String),
    #[error("not a partition: item {0:?} is not assigned")]
    Missing(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("enumeration needs {required} candidates, budget is {budget}")]
    Budget { required: String, budget: u64 },
    #[error("agent {agent} has zero total value; remove it before normalizing")]
    ZeroTotal { agent: usize },
    #[error("tau-condition violated for agents {agents:?}")]
    TauViolation { agents: Vec<usize> },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Fails unless `base^exp` fits in `budget`.
pub fn check_budget(base: usize, exp: usize, budget: u64) -> Result<u64> {
    let mut total: u128 = 1;
    for _ in 0..exp {
        total = total.saturating_mul(base as u128);
        if total > budget as u128 {
            return Err(Error::Budget {
                required: format!(
                    "{base}^{exp} = {}",
                    num_bigint::BigUint::from(base).pow(exp as u32)
                ),
                budget,
            });
        }
    }
    Ok(total as u64)
}
