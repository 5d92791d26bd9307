//! Query-driven loading of CSV sources into a constrained relational
//! instance, and SPARQL answering over it through declarative mappings.
//!
//! The flow for one query is: parse the inputs ([`frontends`]), keep only
//! the mapping rules and columns the query needs ([`pipeline::selection`]),
//! derive constraints from mappings and metadata ([`constraints`]),
//! normalize and prepare the data ([`pipeline`]), create and load a schema
//! ([`schema`]) and finally translate and run the query ([`engine`]).
//! [`run`] strings all of it together.

pub mod constraints;
pub mod engine;
pub mod error;
pub mod frontends;
pub mod functions;
pub mod model;
pub mod pipeline;
pub mod run;
pub mod schema;
pub mod term;
pub mod validate;
pub mod values;

pub use error::{Error, Result};
pub use functions::FunctionRegistry;
pub use model::*;
pub use run::{compare_modes, run, CompareReport, Mode, RunConfig, RunReport};
pub use term::Term;
