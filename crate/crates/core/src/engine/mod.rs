//! Query answering: SQL translation and execution, pluggable engines and
//! the brute-force oracle.

pub mod adapter;
pub mod execute;
pub mod oracle;
pub mod results;
pub mod sql;

pub use adapter::{AdapterRegistry, EngineAdapter, EngineInput, ReferenceAdapter, REFERENCE};
pub use execute::{decode, execute};
pub use oracle::{answer as oracle_answer, evaluate as eval_oracle, materialize as materialize_oracle, Triple};
pub use results::{ResultSet, Row};
pub use sql::{translate_query, SqlQuery};
