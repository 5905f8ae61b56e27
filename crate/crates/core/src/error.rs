use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong between reading a file and reporting an ATT.
#[derive(Debug, Error)]
pub enum DidError {
    #[error("missing column `{column}`{}", context(.path))]
    MissingColumn { column: String, path: Option<PathBuf> },

    #[error("treatment column `{column}` has non-binary value `{value}` at data row {row}")]
    NonBinaryTreatment { column: String, row: usize, value: String },

    #[error("non-finite or unparsable value `{value}` in column `{column}` at data row {row}")]
    NonFiniteValue { column: String, row: usize, value: String },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("unknown covariate `{name}` referenced by term `{term}`")]
    UnknownTerm { term: String, name: String },

    #[error("duplicate covariate term `{0}`")]
    DuplicateTerm(String),

    #[error("covariate spec line {line}: {message}")]
    SpecSyntax { line: usize, message: String },

    #[error("design needs n >= k, got n = {n}, k = {k}")]
    TooFewRows { n: usize, k: usize },

    #[error("rank deficient design: column `{column}` is linearly dependent on the others")]
    RankDeficient { column: String },

    #[error("need at least {needed} control units, found {found}")]
    TooFewControls { needed: usize, found: usize },

    #[error("treatment indicator has no {0} units")]
    EmptyGroup(&'static str),

    #[error("perfect separation: logistic likelihood is unbounded (max |x'b| = {max_index:.1})")]
    Separation { max_index: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { solver: &'static str, iterations: usize, residual: f64 },

    #[error("moment Jacobian is singular")]
    SingularJacobian,

    #[error("value out of domain: {0}")]
    OutOfDomain(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn context(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" in {}", p.display()),
        None => String::new(),
    }
}

impl DidError {
    /// Process exit code: 2 input validation, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use DidError::*;
        match self {
            MissingColumn { .. }
            | NonBinaryTreatment { .. }
            | NonFiniteValue { .. }
            | InvalidPanel(_)
            | UnknownTerm { .. }
            | DuplicateTerm(_)
            | SpecSyntax { .. }
            | TooFewRows { .. }
            | TooFewControls { .. }
            | EmptyGroup(_)
            | OutOfDomain(_)
            | Format { .. } => 2,
            RankDeficient { .. } | Separation { .. } | NoConvergence { .. } | SingularJacobian => 3,
            Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DidError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, DidError>;
