use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("triples map `{triples_map}` joins to unknown parent map `{parent}`")]
    DanglingParentMap { triples_map: String, parent: String },

    #[error("conflicting annotation on {table}/{column}: {message}")]
    ConflictingAnnotation {
        table: String,
        column: String,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("ragged row in {path}: row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        path: String,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{0} has no header row and no rowTitles")]
    MissingHeader(String),

    #[error("duplicate column `{column}` in {path}")]
    DuplicateColumn { path: String, column: String },

    #[error("conflicting constraint: {0}")]
    ConflictingConstraint(String),

    #[error("no triples map provides the predicates of star group {0}")]
    NoMatchingTriplesMap(String),

    #[error("format violation in {path} row {row} column `{column}`: `{value}` ({message})")]
    FormatViolation {
        path: String,
        row: usize,
        column: String,
        value: String,
        message: String,
    },

    #[error("function error at row {row}: {message}")]
    FunctionError { row: usize, message: String },

    #[error("foreign keys form a cycle through tables {0:?}")]
    CyclicForeignKeys(Vec<String>),

    #[error("name collision: {0}")]
    NameCollision(String),

    #[error("constraint violation in table `{table}` row {row}: {constraint}")]
    ConstraintViolation {
        table: String,
        row: usize,
        constraint: String,
    },

    #[error("logical source `{0}` has no table in the generated schema")]
    UnmappedSource(String),

    #[error("untyped comparison: {0}")]
    UntypedComparison(String),

    #[error("engine error: {message}\n  while running: {sql}")]
    Engine { message: String, sql: String },

    #[error("adapter error: {0}")]
    Adapter(String),

    #[error("monotonicity violation for {query}: baseline returned {baseline} answers, enhanced {enhanced}")]
    MonotonicityViolation {
        query: String,
        baseline: usize,
        enhanced: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{step}: {source}")]
    AtStep {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn engine(err: rusqlite::Error, sql: impl Into<String>) -> Self {
        Error::Engine {
            message: err.to_string(),
            sql: sql.into(),
        }
    }

    /// The error with any step attribution removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code for the CLI: 2 input, 3 constraint, 4 engine, 5 monotonicity.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::ConflictingConstraint(_)
            | Error::FormatViolation { .. }
            | Error::ConstraintViolation { .. }
            | Error::CyclicForeignKeys(_) => 3,
            Error::Engine { .. } | Error::Adapter(_) | Error::FunctionError { .. } => 4,
            Error::MonotonicityViolation { .. } => 5,
            _ => 2,
        }
    }
}
