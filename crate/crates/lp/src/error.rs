use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate constraint name `{0}`")]
    DuplicateConstraint(String),
    #[error("invalid bounds for `{name}`: [{lb}, {ub}]")]
    InvalidBounds { name: String, lb: f64, ub: f64 },
    #[error("unknown variable id {0}")]
    UnknownVariable(usize),
    #[error("constraint `{0}` has a non-finite right-hand side")]
    NonFiniteRhs(String),
    #[error("constraint `{0}` has a non-finite coefficient")]
    NonFiniteCoefficient(String),
    #[error("binary variable `{0}` not allowed in a continuous standard form")]
    BinaryInStandardForm(String),
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("failed to launch external solver `{command}`: {source}")]
    Launch {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("external solver exited with {0}")]
    ExternalFailed(String),
    #[error("cannot read solution document: {0}")]
    SolutionDocument(String),
    #[error("solution status mismatch: {0}")]
    StatusMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
